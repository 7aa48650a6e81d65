//! Dataset files.
//!
//! Text: a header line `n d`, then `n` lines of `d` whitespace-separated reals.
//! Binary: `FANN`, `n` and `d` as little-endian `u32`, then `n·d` little-endian
//! `f32` values, row-major.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use fann_core::Dataset;

pub const MAGIC: &[u8; 4] = b"FANN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Binary,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" | "txt" => Ok(Format::Text),
            "binary" | "bin" => Ok(Format::Binary),
            _ => Err(format!("unknown format `{s}` (expected text or binary)")),
        }
    }
}

impl Format {
    /// `.bin` and `.fann` mean binary, anything else text.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("fann") => Format::Binary,
            _ => Format::Text,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("cannot access {path}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("short file: expected {expected} values, found {found}")]
    ShortFile { expected: usize, found: usize },
    #[error("line {line}: expected {expected} values, found {found}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },
    #[error("line {line}: cannot parse `{token}` as a number")]
    BadValue { line: usize, token: String },
    #[error("trailing data after {n} rows")]
    TrailingData { n: usize },
    #[error(transparent)]
    Core(#[from] fann_core::Error),
}

pub fn parse_text(s: &str) -> Result<Dataset, IoError> {
    let mut lines = s.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| IoError::MalformedHeader("empty file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [n, d] = fields[..] else {
        return Err(IoError::MalformedHeader(format!("expected `n d`, got `{header}`")));
    };
    let parse = |x: &str| x.parse::<usize>().map_err(|_| IoError::MalformedHeader(format!("`{x}` is not a count")));
    let (n, d) = (parse(n)?, parse(d)?);
    if d == 0 {
        return Err(IoError::MalformedHeader("dimension must be positive".into()));
    }
    let mut data = Vec::with_capacity(n.saturating_mul(d).min(1 << 28));
    let mut rows = 0;
    for (i, line) in lines {
        if rows == n {
            return Err(IoError::TrailingData { n });
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f32 = tok.parse().map_err(|_| IoError::BadValue { line: i + 1, token: tok.into() })?;
            data.push(v);
        }
        if data.len() - before != d {
            return Err(IoError::DimensionMismatch { line: i + 1, expected: d, found: data.len() - before });
        }
        rows += 1;
    }
    if rows < n {
        return Err(IoError::ShortFile { expected: n * d, found: rows * d });
    }
    Ok(Dataset::new(d, data)?)
}

/// Shortest representation that parses back to the same `f32`.
pub fn to_text(ds: &Dataset) -> String {
    let mut out = format!("{} {}\n", ds.len(), ds.dim());
    for p in ds.iter() {
        let row: Vec<String> = p.coords.iter().map(|x| x.to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_binary(bytes: &[u8]) -> Result<Dataset, IoError> {
    if bytes.len() < 12 {
        return Err(IoError::MalformedHeader(format!("{} bytes is shorter than the 12-byte header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(IoError::MalformedHeader("missing FANN magic".into()));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if d == 0 {
        return Err(IoError::MalformedHeader("dimension must be positive".into()));
    }
    let payload = &bytes[12..];
    let expected = n * d;
    if payload.len() < expected * 4 {
        return Err(IoError::ShortFile { expected, found: payload.len() / 4 });
    }
    if payload.len() > expected * 4 {
        return Err(IoError::TrailingData { n });
    }
    let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Dataset::new(d, data)?)
}

pub fn to_binary(ds: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + ds.raw().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(ds.len() as u32).to_le_bytes());
    out.extend_from_slice(&(ds.dim() as u32).to_le_bytes());
    for x in ds.raw() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn load_dataset(path: &Path, format: Format) -> Result<Dataset, IoError> {
    let io = |source| IoError::Io { path: path.display().to_string(), source };
    match format {
        Format::Text => parse_text(&fs::read_to_string(path).map_err(io)?),
        Format::Binary => parse_binary(&fs::read(path).map_err(io)?),
    }
}

pub fn save_dataset(path: &Path, ds: &Dataset, format: Format) -> Result<(), IoError> {
    let bytes = match format {
        Format::Text => to_text(ds).into_bytes(),
        Format::Binary => to_binary(ds),
    };
    fs::write(path, bytes).map_err(|source| IoError::Io { path: path.display().to_string(), source })
}
