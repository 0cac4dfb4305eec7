//! Plain CSV and JSON-lines output.
//!
//! CSV files carry a header row; floats are written with 17 significant
//! digits so that every value round-trips exactly.

use serde::Serialize;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Round-trip float formatting (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}
impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::I(x)
    }
}
impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::I(x as i64)
    }
}
impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::I(x as i64)
    }
}
impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.to_string())
    }
}
impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::S(x)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::I(i) => i.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

pub struct CsvWriter<W: Write> {
    out: W,
    width: usize,
}

impl CsvWriter<BufWriter<File>> {
    pub fn create(path: &Path, header: &[&str]) -> io::Result<Self> {
        Self::new(BufWriter::new(File::create(path)?), header)
    }
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W, header: &[&str]) -> io::Result<Self> {
        writeln!(out, "{}", header.join(","))?;
        Ok(Self { out, width: header.len() })
    }

    pub fn row(&mut self, cells: &[Cell]) -> io::Result<()> {
        if cells.len() != self.width {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!("row has {} cells, header has {}", cells.len(), self.width),
            ));
        }
        let line: Vec<String> = cells.iter().map(Cell::render).collect();
        writeln!(self.out, "{}", line.join(","))
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Appends one JSON object per line.
pub struct JsonLines<W: Write> {
    out: W,
}

impl JsonLines<BufWriter<File>> {
    pub fn create(path: &Path) -> io::Result<Self> {
        Ok(Self { out: BufWriter::new(File::create(path)?) })
    }

    pub fn append(path: &Path) -> io::Result<Self> {
        let f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { out: BufWriter::new(f) })
    }
}

impl<W: Write> JsonLines<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> io::Result<()> {
        let s = serde_json::to_string(record).map_err(io::Error::other)?;
        writeln!(self.out, "{s}")
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Reads a CSV file written by [`CsvWriter`] into its header and rows.
pub fn read_csv(path: &Path) -> io::Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = match lines.next() {
        Some(h) => h?.split(',').map(str::to_string).collect(),
        None => return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "empty csv")),
    };
    let mut rows = Vec::new();
    for l in lines {
        let l = l?;
        if !l.is_empty() {
            rows.push(l.split(',').map(str::to_string).collect());
        }
    }
    Ok((header, rows))
}
