//! Text input: quadrilaterals as 8 coordinates, canonical parameters as 4, grids.

use quadqk::geometry::{CanonicalQuad, ConvexQuad, GeometryError};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Convexity { line: usize, source: GeometryError },
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
}

impl InputError {
    pub fn kind(&self) -> &'static str {
        match self {
            InputError::Parse { .. } => "ParseError",
            InputError::Convexity { .. } => "ConvexityError",
            InputError::Io { .. } => "IoError",
        }
    }
}

/// Numbers separated by whitespace and/or commas.
pub fn parse_numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: '{t}'")))
        .collect()
}

fn exactly<const N: usize>(text: &str) -> Result<[f64; N], String> {
    let v = parse_numbers(text)?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected {N} numbers, got {}", v.len()))
}

/// `x1 y1 x2 y2 x3 y3 x4 y4`, counterclockwise.
pub fn parse_quad(text: &str, line: usize) -> Result<ConvexQuad, InputError> {
    let c = exactly::<8>(text).map_err(|msg| InputError::Parse { line, msg })?;
    ConvexQuad::from_coords(c).map_err(|source| InputError::Convexity { line, source })
}

/// `a b ã b̃`.
pub fn parse_canonical(text: &str) -> Result<CanonicalQuad, InputError> {
    let [a, b, at, bt] = exactly::<4>(text).map_err(|msg| InputError::Parse { line: 1, msg })?;
    CanonicalQuad::new(a, b, at, bt).map_err(|source| InputError::Convexity { line: 1, source })
}

/// One quad per line; blank lines and `#` comments are skipped. Line numbers are
/// 1-based and refer to the file.
pub fn read_quads_file(path: &Path) -> Result<Vec<(usize, ConvexQuad)>, InputError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| InputError::Io { path: path.display().to_string(), msg: e.to_string() })?;
    parse_quads(&text)
}

pub fn parse_quads(text: &str) -> Result<Vec<(usize, ConvexQuad)>, InputError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        out.push((i + 1, parse_quad(body, i + 1)?));
    }
    Ok(out)
}
