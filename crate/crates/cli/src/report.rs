//! CSV writing with a self-describing comment header.
//!
//! Every file starts with the artifact version, the subcommand and the
//! full resolved configuration, enough to re-run the job bit-identically.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::{CliError, CliResult, Config};

pub struct CsvWriter {
    out: String,
}

impl CsvWriter {
    pub fn new(command: &str, cfg: &Config) -> Self {
        let mut out = String::new();
        let _ = writeln!(out, "# hops v{}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "# command = {command}");
        for line in cfg.resolved_lines() {
            let _ = writeln!(out, "# {line}");
        }
        CsvWriter { out }
    }

    pub fn comment(&mut self, text: &str) {
        let _ = writeln!(self.out, "# {text}");
    }

    pub fn header(&mut self, columns: &[&str]) {
        let _ = writeln!(self.out, "{}", columns.join(","));
    }

    pub fn row(&mut self, values: &[String]) {
        let _ = writeln!(self.out, "{}", values.join(","));
    }

    pub fn row_f64(&mut self, values: &[f64]) {
        self.row(&values.iter().map(|v| format!("{v}")).collect::<Vec<_>>());
    }

    pub fn write_to(&self, dir: &Path, name: &str) -> CliResult<PathBuf> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        let path = dir.join(name);
        std::fs::write(&path, &self.out)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}
