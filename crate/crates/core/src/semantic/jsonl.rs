//! JSON-lines export/import of a [`SemanticMap`]: one tagged record per line,
//! the `meta` record first.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BehaviorSemantic, EventSemantic, MapMeta, SemanticMap, StatusSemantic, StoreError};

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Meta(MapMeta),
    Status(StatusSemantic),
    Behavior(BehaviorSemantic),
    Event(EventSemantic),
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LineRef<'a> {
    Meta(&'a MapMeta),
    Status(&'a StatusSemantic),
    Behavior(&'a BehaviorSemantic),
    Event(&'a EventSemantic),
}

pub fn write_map_to<W: Write>(map: &SemanticMap, out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    let lines = std::iter::once(LineRef::Meta(&map.meta))
        .chain(map.statuses.iter().map(LineRef::Status))
        .chain(map.behaviors.iter().map(LineRef::Behavior))
        .chain(map.events.iter().map(LineRef::Event));
    for line in lines {
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_map(map: &SemanticMap, path: &Path) -> Result<(), StoreError> {
    let file = std::fs::File::create(path).map_err(|e| StoreError::unavailable(path, e))?;
    write_map_to(map, file).map_err(|e| StoreError::unavailable(path, e))
}

pub fn read_map_from<R: Read>(input: R) -> Result<SemanticMap, StoreError> {
    let mut map = SemanticMap::default();
    let mut saw_meta = false;
    for (n, line) in BufReader::new(input).lines().enumerate() {
        let line = line.map_err(|e| StoreError::Malformed {
            line: n + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Line = serde_json::from_str(&line).map_err(|e| StoreError::Malformed {
            line: n + 1,
            message: e.to_string(),
        })?;
        match rec {
            Line::Meta(m) => {
                if saw_meta {
                    return Err(StoreError::Malformed {
                        line: n + 1,
                        message: "second meta record".into(),
                    });
                }
                saw_meta = true;
                map.meta = m;
            }
            Line::Status(s) => map.statuses.push(s),
            Line::Behavior(b) => map.behaviors.push(b),
            Line::Event(e) => map.events.push(e),
        }
    }
    Ok(map)
}

pub fn read_map(path: &Path) -> Result<SemanticMap, StoreError> {
    let file = std::fs::File::open(path).map_err(|e| StoreError::unavailable(path, e))?;
    read_map_from(file)
}
