//! CSV and JSON writers. Every file starts with the run manifest.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ctraj::report::Report;

/// Everything that determines a run; embedded in every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub n: u32,
    pub model: ModelParams,
    pub grid: Option<String>,
    pub levels: Option<String>,
    pub starts: Vec<String>,
    pub method: Option<String>,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub quick: bool,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub si: bool,
    pub mass: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
}

/// Reports with the manifest that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub manifest: RunManifest,
    pub reports: Vec<Report>,
}

/// Shortest decimal that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn open(out: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub struct Csv {
    w: Box<dyn Write>,
}

impl Csv {
    pub fn new(out: Option<&Path>, manifest: &RunManifest, columns: &[&str]) -> io::Result<Self> {
        let mut w = open(out)?;
        writeln!(w, "# {}", serde_json::to_string(manifest)?)?;
        writeln!(w, "{}", columns.join(","))?;
        Ok(Self { w })
    }

    pub fn row(&mut self, fields: &[String]) -> io::Result<()> {
        writeln!(self.w, "{}", fields.join(","))
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.w.flush()
    }
}

pub fn write_reports(out: Option<&Path>, file: &ReportFile) -> io::Result<()> {
    let mut w = open(out)?;
    serde_json::to_writer_pretty(&mut w, file)?;
    writeln!(w)?;
    w.flush()
}

pub fn read_reports(path: &Path) -> io::Result<ReportFile> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 5.134617359161245e-18, -2.0, 1e300, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(num(0.5), "0.5");
    }
}
