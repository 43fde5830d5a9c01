//! CSV files with a metadata header.
//!
//! ```text
//! # tqdiff 0.1.0
//! # target: front-law
//! # seed: none
//! # config: {"params":{...},"front":{...}}
//! t,sigma2_quantum,sigma2_classical
//! ```
//!
//! The `config` line is the complete resolved configuration; saved as a
//! file and passed back with `--config` it reproduces the output byte for
//! byte. Floats use the shortest representation that round-trips, and
//! non-finite values are written as empty cells.

use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "TQDIFF_OUT_DIR";

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub target: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
}

impl Metadata {
    pub fn new(target: &str, seed: Option<u64>, config: serde_json::Value) -> Self {
        Self {
            target: target.to_string(),
            seed,
            config,
        }
    }

    fn write_header(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "# tqdiff {}", crate::VERSION)?;
        writeln!(w, "# target: {}", self.target)?;
        match self.seed {
            Some(s) => writeln!(w, "# seed: {s}")?,
            None => writeln!(w, "# seed: none")?,
        }
        writeln!(w, "# config: {}", self.config)
    }
}

pub fn format_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

pub fn write_csv<W, R>(w: &mut W, meta: &Metadata, columns: &[&str], rows: R) -> io::Result<()>
where
    W: Write,
    R: IntoIterator<Item = Vec<f64>>,
{
    meta.write_header(w)?;
    writeln!(w, "{}", columns.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(format_value).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Writes a CSV file, creating its directory if needed.
pub fn write_csv_file<R>(path: &Path, meta: &Metadata, columns: &[&str], rows: R) -> Result<()>
where
    R: IntoIterator<Item = Vec<f64>>,
{
    let file = create(path)?;
    let mut w = BufWriter::new(file);
    write_csv(&mut w, meta, columns, rows)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = create(path)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(io::Error::from)
        .and_then(|_| writeln!(w))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

/// Column names and numeric rows of a CSV written by [`write_csv`]. Empty
/// cells read back as NaN.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn read_csv(path: &Path) -> Result<Table> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(io::BufReader::new(file), path)
}

fn parse_csv(r: impl BufRead, path: &Path) -> Result<Table> {
    let bad = |line: usize, what: String| {
        Error::Config(format!("{}:{}: {what}", path.display(), line + 1))
    };
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some(cols) = &columns else {
            columns = Some(line.split(',').map(|c| c.trim().to_string()).collect());
            continue;
        };
        let row = line
            .split(',')
            .map(|c| {
                let c = c.trim();
                if c.is_empty() {
                    Ok(f64::NAN)
                } else {
                    c.parse::<f64>()
                        .map_err(|_| bad(i, format!("cannot parse {c:?} as a number")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != cols.len() {
            return Err(bad(
                i,
                format!("{} cells for {} columns", row.len(), cols.len()),
            ));
        }
        rows.push(row);
    }
    let columns = columns.ok_or_else(|| bad(0, "no header row".into()))?;
    Ok(Table { columns, rows })
}

/// `dir/name`, with `dir` defaulting to `$TQDIFF_OUT_DIR` and then `.`.
pub fn output_path(dir: Option<&Path>, name: &str) -> PathBuf {
    let dir = dir
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    dir.join(name)
}
