#ifndef CHANSEM_H
#define CHANSEM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum ChansemStatus {
  CHANSEM_STATUS_OK = 0,
  /*
   A required pointer was null or a string was not UTF-8.
   */
  CHANSEM_STATUS_INVALID_ARGUMENT = 1,
  /*
   Malformed scene, trace, rules, query or configuration.
   */
  CHANSEM_STATUS_INVALID_INPUT = 2,
  /*
   A pipeline stage failed on valid input.
   */
  CHANSEM_STATUS_PIPELINE_ERROR = 3,
  /*
   File-system failure.
   */
  CHANSEM_STATUS_IO_ERROR = 4,
  /*
   Unknown record identifier.
   */
  CHANSEM_STATUS_NOT_FOUND = 5,
  /*
   Internal panic caught at the boundary.
   */
  CHANSEM_STATUS_PANIC = 6,
} ChansemStatus;

typedef struct ChansemMap ChansemMap;

typedef struct ChansemScene ChansemScene;

typedef struct ChansemStore ChansemStore;

typedef struct ChansemTrace ChansemTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message describing the last failure on the calling thread; empty after a
 successful call. Valid until the next chansem call on the same thread.
 */
const char *chansem_last_error(void);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not have been freed.
 */
void chansem_string_free(char *s);

/*
 Parses and validates a scene description.

 # Safety
 `json` must be a NUL-terminated string; `out` a valid pointer.
 */
enum ChansemStatus chansem_scene_from_json(const char *json, struct ChansemScene **out);

/*
 # Safety
 `scene` must come from [`chansem_scene_from_json`] or be null.
 */
void chansem_scene_free(struct ChansemScene *scene);

/*
 Synthesizes the scene's snapshot trace.

 # Safety
 `scene` must be a live handle; `out` a valid pointer.
 */
enum ChansemStatus chansem_scene_run(const struct ChansemScene *scene, struct ChansemTrace **out);

/*
 Reads a trace file (binary or JSON-lines).

 # Safety
 `path` must be a NUL-terminated string; `out` a valid pointer.
 */
enum ChansemStatus chansem_trace_read(const char *path, struct ChansemTrace **out);

/*
 Writes a trace; `.jsonl` paths get JSON-lines framing, others binary.

 # Safety
 `trace` must be a live handle; `path` a NUL-terminated string.
 */
enum ChansemStatus chansem_trace_write(const struct ChansemTrace *trace, const char *path);

/*
 Number of snapshots in a trace; 0 for null.

 # Safety
 `trace` must be a live handle or null.
 */
size_t chansem_trace_len(const struct ChansemTrace *trace);

/*
 # Safety
 `trace` must come from this library or be null.
 */
void chansem_trace_free(struct ChansemTrace *trace);

/*
 Runs the characterization pipeline.

 `config_json` (a partial pipeline configuration object) and `rules_json`
 (a rule list) may be null for the defaults.

 # Safety
 `trace` must be a live handle; strings NUL-terminated or null; `out` a
 valid pointer.
 */
enum ChansemStatus chansem_characterize(const struct ChansemTrace *trace,
                                        const char *config_json,
                                        const char *rules_json,
                                        struct ChansemMap **out);

/*
 Record counts of a map. Any output pointer may be null.

 # Safety
 `map` must be a live handle; non-null outputs valid for writes.
 */
enum ChansemStatus chansem_map_counts(const struct ChansemMap *map,
                                      size_t *statuses,
                                      size_t *behaviors,
                                      size_t *events);

/*
 Serializes a map as JSON lines. Free the result with
 [`chansem_string_free`].

 # Safety
 `map` must be a live handle; `out` a valid pointer.
 */
enum ChansemStatus chansem_map_to_jsonl(const struct ChansemMap *map, char **out);

/*
 Parses a JSON-lines map export.

 # Safety
 `jsonl` must be NUL-terminated; `out` a valid pointer.
 */
enum ChansemStatus chansem_map_from_jsonl(const char *jsonl, struct ChansemMap **out);

/*
 Counts model-invariant violations of a map (0 = valid).

 # Safety
 `map` must be a live handle; `violations` a valid pointer.
 */
enum ChansemStatus chansem_map_validate(const struct ChansemMap *map, size_t *violations);

/*
 # Safety
 `map` must come from this library or be null.
 */
void chansem_map_free(struct ChansemMap *map);

/*
 Opens (creating if absent) a persistent semantic store.

 # Safety
 `path` must be NUL-terminated; `out` a valid pointer.
 */
enum ChansemStatus chansem_store_open(const char *path, struct ChansemStore **out);

/*
 Validates and persists a map. Storing the same map again is a no-op.

 # Safety
 Both handles must be live.
 */
enum ChansemStatus chansem_store_put(struct ChansemStore *store, const struct ChansemMap *map);

/*
 Evaluates a query given as JSON (e.g. `{"kind":"approach"}` or
 `{"and":[{"label":"trees"},{"record_type":"status"}]}`) and returns the
 matching records as JSON lines.

 # Safety
 `store` must be a live handle; `query_json` NUL-terminated; `out` valid.
 */
enum ChansemStatus chansem_store_query(const struct ChansemStore *store,
                                       const char *query_json,
                                       char **out);

/*
 # Safety
 `store` must come from this library or be null.
 */
void chansem_store_free(struct ChansemStore *store);

/*
 Power delay profile of one multi-tone response: unitary inverse DFT,
 then squared magnitude per bin.

 `samples` holds `n` interleaved (re, im) pairs; `pdp_out` receives `n`
 values.

 # Safety
 `samples` must be readable for `2n` doubles and `pdp_out` writable for
 `n` doubles.
 */
enum ChansemStatus chansem_pdp_from_response(const double *samples, size_t n, double *pdp_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHANSEM_H */
