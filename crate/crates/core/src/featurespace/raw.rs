use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One delimiter-separated line: label first, then one token per field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    /// 1-based line number in the source.
    pub line: usize,
    pub label: u8,
    pub tokens: Vec<String>,
}

pub fn parse_label(tok: &str, line: usize) -> Result<u8> {
    match tok.trim() {
        "0" | "0.0" => Ok(0),
        "1" | "1.0" => Ok(1),
        other => Err(Error::Parse { line, field: 0, token: other.to_string(), message: "label must be 0 or 1".into() }),
    }
}

pub fn parse_line(text: &str, line: usize, delimiter: char) -> Result<RawRecord> {
    let mut parts = text.split(delimiter);
    let label = parse_label(parts.next().unwrap_or(""), line)?;
    Ok(RawRecord { line, label, tokens: parts.map(str::to_string).collect() })
}

/// Streams [`RawRecord`]s from a header-less delimited text file. Blank lines are skipped.
pub struct RawReader {
    path: PathBuf,
    lines: std::io::Lines<BufReader<File>>,
    line: usize,
    delimiter: char,
}

impl RawReader {
    pub fn open(path: impl AsRef<Path>, delimiter: char) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self { path, lines: BufReader::new(file).lines(), line: 0, delimiter })
    }
}

impl Iterator for RawReader {
    type Item = Result<RawRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let text = match self.lines.next()? {
                Ok(t) => t,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            self.line += 1;
            let text = text.strip_suffix('\r').unwrap_or(&text);
            if text.trim().is_empty() {
                continue;
            }
            return Some(parse_line(text, self.line, self.delimiter));
        }
    }
}
