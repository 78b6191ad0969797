//! CSV tables with round-trip numeric formatting.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Minimum significant digits of every number written.
pub const MIN_DIGITS: usize = 12;

/// Decimal text of `v` with at least twelve significant digits, and more
/// when twelve do not parse back to the same value.
pub fn num(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "NaN".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    let plain = (-5..15).contains(&exp);
    let fixed = |digits: usize| -> String {
        if plain {
            let decimals = (digits as i32 - 1 - exp).max(0) as usize;
            format!("{v:.decimals$}")
        } else {
            let decimals = digits - 1;
            format!("{v:.decimals$e}")
        }
    };
    (MIN_DIGITS..=17)
        .map(fixed)
        .find(|s| s.parse::<f64>().ok() == Some(v))
        .unwrap_or_else(|| format!("{v:e}"))
}

/// An in-memory CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    /// Write `<dir>/<name>.csv` and return its path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        std::fs::write(&path, self.to_csv()).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Write tables into `dir`, or to stdout separated by blank lines when no
/// directory is given.
pub fn emit(tables: &[Table], dir: Option<&Path>) -> Result<Vec<PathBuf>> {
    match dir {
        Some(d) => {
            std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
            tables.iter().map(|t| t.save(d)).collect()
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            for (i, t) in tables.iter().enumerate() {
                if i > 0 {
                    writeln!(lock)?;
                }
                t.write_to(&mut lock)?;
            }
            Ok(Vec::new())
        }
    }
}
