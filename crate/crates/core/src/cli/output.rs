//! CSV emission with a provenance header.

use super::config::ExperimentConfig;

/// Comma-separated, LF-terminated table preceded by `#` provenance lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    comments: Vec<String>,
    header: String,
    rows: Vec<String>,
}

impl CsvTable {
    pub fn new(cfg: &ExperimentConfig, header: &str) -> Self {
        CsvTable {
            comments: vec![
                format!("mbl {}", env!("CARGO_PKG_VERSION")),
                format!("seed: {}", cfg.seed.unwrap_or_default()),
                format!("config_sha256: {}", cfg.hash()),
            ],
            header: header.to_string(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, text: impl Into<String>) {
        self.comments.push(text.into());
    }

    pub fn push(&mut self, row: String) {
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.comments {
            s.push_str("# ");
            s.push_str(c);
            s.push('\n');
        }
        s.push_str(&self.header);
        s.push('\n');
        for r in &self.rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }
}

/// Formats an optional number; `None` becomes an empty cell.
pub fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
