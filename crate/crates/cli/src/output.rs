//! Byte-stable CSV and text artifacts.

use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

/// 17 significant digits in scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV cell text: separators and line breaks are not allowed inside cells.
pub fn cell(text: &str) -> String {
    text.replace([',', '\n', '\r'], ";")
}

#[derive(Debug, Clone, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut csv = Self::default();
        csv.row(header.iter().map(|s| s.to_string()));
        csv
    }

    pub fn row(&mut self, cells: impl IntoIterator<Item = String>) {
        let cells: Vec<String> = cells.into_iter().collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// `key: value` lines.
#[derive(Debug, Clone, Default)]
pub struct Summary {
    text: String,
}

impl Summary {
    pub fn line(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "{key}: {value}");
    }

    pub fn raw(&mut self, text: &str) {
        self.text.push_str(text);
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// Files are written only after every computation has finished.
pub fn write_files(dir: &Path, files: &[(String, String)]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    for (name, content) in files {
        let path = dir.join(name);
        std::fs::write(&path, content).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}
