//! Trace files and plot-ready exports.
//!
//! Two framings share one logical layout: a header (sounding parameters,
//! trace id, payload kind) followed by one frame per snapshot carrying the
//! time, `N` complex samples and optional ground truth.
//!
//! * Binary: magic `CHANSEM\0`, `u32` version, `u32` kind, `u64` header
//!   length and header JSON; then per frame `f64` time, `u32` N, N×(re, im)
//!   as little-endian `f64`, `u32` truth length and truth JSON (0 = none).
//! * JSON-lines: a header object, then one object per frame.
//!
//! Readers detect the framing from the first bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{to_frequency_response, Cir, FrequencyResponse, Pdp};
use crate::scene::{GroundTruth, Snapshot, SnapshotTrace, TraceHeader};

pub const TRACE_MAGIC: &[u8; 8] = b"CHANSEM\0";
pub const TRACE_VERSION: u32 = 1;
const JSONL_FORMAT: &str = "chansem-trace";
const MAX_HEADER_BYTES: u64 = 1 << 24;
const MAX_SAMPLES: u32 = 1 << 26;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: not a trace file (unrecognised header)")]
    BadMagic { path: String },
    #[error("{path}: unsupported format version {found} (expected {TRACE_VERSION})")]
    UnsupportedVersion { path: String, found: u32 },
    #[error("{path}: corrupt trace: {detail}")]
    Corrupt { path: String, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    FrequencyResponse,
    ImpulseResponse,
}

impl PayloadKind {
    fn code(self) -> u32 {
        match self {
            PayloadKind::FrequencyResponse => 0,
            PayloadKind::ImpulseResponse => 1,
        }
    }

    fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(PayloadKind::FrequencyResponse),
            1 => Some(PayloadKind::ImpulseResponse),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Framing {
    Binary,
    JsonLines,
}

impl Framing {
    /// JSON-lines for `.jsonl`/`.json` paths, binary otherwise.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => Framing::JsonLines,
            _ => Framing::Binary,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub time: f64,
    pub samples: Vec<Complex64>,
    pub truth: Option<GroundTruth>,
}

/// Frames of one payload kind under a common header.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub kind: PayloadKind,
    pub frames: Vec<Frame>,
}

impl TraceFile {
    pub fn from_trace(trace: &SnapshotTrace) -> Self {
        TraceFile {
            header: trace.header.clone(),
            kind: PayloadKind::FrequencyResponse,
            frames: trace
                .snapshots
                .iter()
                .map(|s| Frame {
                    time: s.response.snapshot_time,
                    samples: s.response.samples.clone(),
                    truth: s.truth.clone(),
                })
                .collect(),
        }
    }

    pub fn from_cirs(header: TraceHeader, cirs: &[Cir]) -> Self {
        TraceFile {
            header,
            kind: PayloadKind::ImpulseResponse,
            frames: cirs
                .iter()
                .map(|c| Frame {
                    time: c.snapshot_time,
                    samples: c.taps.clone(),
                    truth: None,
                })
                .collect(),
        }
    }

    /// Frequency-domain view; impulse responses are transformed back.
    pub fn into_trace(self) -> SnapshotTrace {
        let resolution = self.header.sounding.delay_resolution();
        let kind = self.kind;
        let snapshots = self
            .frames
            .into_iter()
            .map(|f| {
                let response = match kind {
                    PayloadKind::FrequencyResponse => FrequencyResponse {
                        snapshot_time: f.time,
                        samples: f.samples,
                    },
                    PayloadKind::ImpulseResponse => to_frequency_response(&Cir {
                        snapshot_time: f.time,
                        taps: f.samples,
                        resolution,
                    }),
                };
                Snapshot {
                    response,
                    truth: f.truth,
                }
            })
            .collect();
        SnapshotTrace {
            header: self.header,
            snapshots,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonHeader {
    format: String,
    version: u32,
    kind: PayloadKind,
    header: TraceHeader,
}

#[derive(Serialize, Deserialize)]
struct JsonFrame {
    time: f64,
    samples: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truth: Option<GroundTruth>,
}

fn io_err(path: &str) -> impl Fn(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_string(),
        source,
    }
}

fn to_json<T: Serialize + ?Sized>(v: &T, name: &str) -> Result<Vec<u8>, FormatError> {
    serde_json::to_vec(v).map_err(|e| corrupt(name, e.to_string()))
}

fn corrupt(path: &str, detail: impl Into<String>) -> FormatError {
    FormatError::Corrupt {
        path: path.to_string(),
        detail: detail.into(),
    }
}

pub fn write_trace_file_to<W: Write>(
    file: &TraceFile,
    framing: Framing,
    mut w: W,
    name: &str,
) -> Result<(), FormatError> {
    let e = io_err(name);
    match framing {
        Framing::Binary => {
            let header = to_json(&file.header, name)?;
            w.write_all(TRACE_MAGIC).map_err(&e)?;
            w.write_all(&TRACE_VERSION.to_le_bytes()).map_err(&e)?;
            w.write_all(&file.kind.code().to_le_bytes()).map_err(&e)?;
            w.write_all(&(header.len() as u64).to_le_bytes())
                .map_err(&e)?;
            w.write_all(&header).map_err(&e)?;
            for f in &file.frames {
                w.write_all(&f.time.to_le_bytes()).map_err(&e)?;
                w.write_all(&(f.samples.len() as u32).to_le_bytes())
                    .map_err(&e)?;
                for s in &f.samples {
                    w.write_all(&s.re.to_le_bytes()).map_err(&e)?;
                    w.write_all(&s.im.to_le_bytes()).map_err(&e)?;
                }
                let truth = match &f.truth {
                    Some(t) => to_json(t, name)?,
                    None => Vec::new(),
                };
                w.write_all(&(truth.len() as u32).to_le_bytes())
                    .map_err(&e)?;
                w.write_all(&truth).map_err(&e)?;
            }
        }
        Framing::JsonLines => {
            let head = JsonHeader {
                format: JSONL_FORMAT.into(),
                version: TRACE_VERSION,
                kind: file.kind,
                header: file.header.clone(),
            };
            w.write_all(&to_json(&head, name)?).map_err(&e)?;
            w.write_all(b"\n").map_err(&e)?;
            for f in &file.frames {
                let line = JsonFrame {
                    time: f.time,
                    samples: f.samples.iter().map(|s| [s.re, s.im]).collect(),
                    truth: f.truth.clone(),
                };
                w.write_all(&to_json(&line, name)?).map_err(&e)?;
                w.write_all(b"\n").map_err(&e)?;
            }
        }
    }
    w.flush().map_err(&e)
}

pub fn read_trace_file_from<R: BufRead>(mut r: R, name: &str) -> Result<TraceFile, FormatError> {
    let head = r.fill_buf().map_err(io_err(name))?;
    if head.starts_with(TRACE_MAGIC) {
        read_binary(r, name)
    } else if head.first() == Some(&b'{') {
        read_jsonl(r, name)
    } else {
        Err(FormatError::BadMagic {
            path: name.to_string(),
        })
    }
}

fn read_binary<R: Read>(mut r: R, name: &str) -> Result<TraceFile, FormatError> {
    let eof = |e: std::io::Error| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            corrupt(name, "truncated")
        } else {
            io_err(name)(e)
        }
    };
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(eof)?;
    let version = read_u32(&mut r).map_err(eof)?;
    if version != TRACE_VERSION {
        return Err(FormatError::UnsupportedVersion {
            path: name.to_string(),
            found: version,
        });
    }
    let code = read_u32(&mut r).map_err(eof)?;
    let kind = PayloadKind::from_code(code)
        .ok_or_else(|| corrupt(name, format!("payload kind {code}")))?;
    let len = read_u64(&mut r).map_err(eof)?;
    if len > MAX_HEADER_BYTES {
        return Err(corrupt(name, format!("header length {len}")));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf).map_err(eof)?;
    let header: TraceHeader =
        serde_json::from_slice(&buf).map_err(|e| corrupt(name, format!("header: {e}")))?;

    let mut frames = Vec::new();
    loop {
        let mut t = [0u8; 8];
        match r.read(&mut t[..1]).map_err(io_err(name))? {
            0 => break,
            _ => r.read_exact(&mut t[1..]).map_err(eof)?,
        }
        let time = f64::from_le_bytes(t);
        let n = read_u32(&mut r).map_err(eof)?;
        if n > MAX_SAMPLES {
            return Err(corrupt(name, format!("frame with {n} samples")));
        }
        let mut samples = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let re = read_f64(&mut r).map_err(eof)?;
            let im = read_f64(&mut r).map_err(eof)?;
            samples.push(Complex64::new(re, im));
        }
        let tl = read_u32(&mut r).map_err(eof)?;
        let truth = if tl == 0 {
            None
        } else {
            let mut buf = vec![0u8; tl as usize];
            r.read_exact(&mut buf).map_err(eof)?;
            Some(serde_json::from_slice(&buf).map_err(|e| corrupt(name, format!("truth: {e}")))?)
        };
        frames.push(Frame {
            time,
            samples,
            truth,
        });
    }
    Ok(TraceFile {
        header,
        kind,
        frames,
    })
}

fn read_jsonl<R: BufRead>(r: R, name: &str) -> Result<TraceFile, FormatError> {
    let mut lines = r.lines().enumerate();
    let head: JsonHeader = match lines.next() {
        Some((_, line)) => {
            let line = line.map_err(io_err(name))?;
            serde_json::from_str(&line).map_err(|_| FormatError::BadMagic {
                path: name.to_string(),
            })?
        }
        None => unreachable!("caller checked for a leading '{{'"),
    };
    if head.format != JSONL_FORMAT {
        return Err(FormatError::BadMagic {
            path: name.to_string(),
        });
    }
    if head.version != TRACE_VERSION {
        return Err(FormatError::UnsupportedVersion {
            path: name.to_string(),
            found: head.version,
        });
    }
    let mut frames = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(io_err(name))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: JsonFrame = serde_json::from_str(&line)
            .map_err(|e| corrupt(name, format!("line {}: {e}", i + 1)))?;
        frames.push(Frame {
            time: f.time,
            samples: f
                .samples
                .iter()
                .map(|&[re, im]| Complex64::new(re, im))
                .collect(),
            truth: f.truth,
        });
    }
    Ok(TraceFile {
        header: head.header,
        kind: head.kind,
        frames,
    })
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn write_trace_file(path: &Path, file: &TraceFile) -> Result<(), FormatError> {
    let name = path.display().to_string();
    let f = File::create(path).map_err(io_err(&name))?;
    write_trace_file_to(file, Framing::for_path(path), BufWriter::new(f), &name)
}

pub fn read_trace_file(path: &Path) -> Result<TraceFile, FormatError> {
    let name = path.display().to_string();
    let f = File::open(path).map_err(io_err(&name))?;
    read_trace_file_from(BufReader::new(f), &name)
}

/// Writes a frequency-response trace; framing follows the file extension.
pub fn write_trace(path: &Path, trace: &SnapshotTrace) -> Result<(), FormatError> {
    write_trace_file(path, &TraceFile::from_trace(trace))
}

/// Reads a trace of either framing and payload kind.
pub fn read_trace(path: &Path) -> Result<SnapshotTrace, FormatError> {
    read_trace_file(path).map(TraceFile::into_trace)
}

/// Writes PDPs as CSV: one row per snapshot, first column the snapshot time
/// [s], remaining columns the delay bins (header row gives bin delays [s]).
pub fn write_pdp_csv<W: Write>(pdps: &[Pdp], mut w: W) -> std::io::Result<()> {
    let bins = pdps.iter().map(|p| p.bins.len()).max().unwrap_or(0);
    let resolution = pdps.first().map_or(0.0, |p| p.resolution);
    write!(w, "time_s")?;
    for i in 0..bins {
        write!(w, ",{}", i as f64 * resolution)?;
    }
    writeln!(w)?;
    for p in pdps {
        write!(w, "{}", p.snapshot_time)?;
        for v in &p.bins {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}
