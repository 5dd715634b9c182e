//! CSV tables with a leading `#` manifest block.

use std::io::Write;

use crate::config::Config;
use crate::{CliError, VERSION};

/// Nine significant digits, fixed layout so identical runs give identical bytes.
pub fn num(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn flag(b: Option<bool>) -> String {
    match b {
        Some(true) => "1".into(),
        Some(false) => "0".into(),
        None => String::new(),
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub manifest: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(command: &str, cfg: &Config, header: &[&str]) -> Self {
        let mut manifest = vec![("command".to_string(), command.to_string()), ("version".to_string(), VERSION.to_string())];
        manifest.extend(cfg.resolved.iter().cloned());
        Table { manifest, header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.manifest.push((key.to_string(), value.to_string()));
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Parsed values of a column; blanks and text become `None`.
    pub fn values(&self, name: &str) -> Vec<Option<f64>> {
        match self.column(name) {
            Some(c) => self.rows.iter().map(|r| r[c].parse().ok()).collect(),
            None => Vec::new(),
        }
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), CliError> {
        for (k, v) in &self.manifest {
            writeln!(w, "# {k} = {v}")?;
        }
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(&self.header)?;
        for r in &self.rows {
            csv.write_record(r)?;
        }
        csv.flush()?;
        Ok(())
    }
}
