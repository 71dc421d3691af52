use std::io::Write;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;

use super::CliError;
use crate::format::{fmt_sig, round_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    /// CSV text, optionally preceded by a `# config: {...}` comment line.
    pub fn to_csv(&self, config: Option<&Value>) -> Result<String, CliError> {
        let mut buf = Vec::new();
        if let Some(cfg) = config {
            writeln!(buf, "# config: {cfg}").map_err(io_err)?;
        }
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.headers).map_err(csv_err)?;
            for row in &self.rows {
                w.write_record(row).map_err(csv_err)?;
            }
            w.flush().map_err(io_err)?;
        }
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

pub(crate) fn num(x: f64) -> String {
    fmt_sig(x)
}

pub(crate) fn opt_num(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

/// A report: resolved config, machine records, and the same records as a table.
pub(crate) struct Document {
    pub config: Value,
    pub records: Value,
    pub table: Table,
}

impl Document {
    pub fn new(config: &impl Serialize, records: &impl Serialize, table: Table) -> Self {
        let mut config = serde_json::to_value(config).expect("config serializes");
        let mut records = serde_json::to_value(records).expect("records serialize");
        round_json(&mut config);
        round_json(&mut records);
        Self {
            config,
            records,
            table,
        }
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => {
                let doc = serde_json::json!({ "config": self.config, "records": self.records });
                let mut s = serde_json::to_string_pretty(&doc).expect("json renders");
                s.push('\n');
                Ok(s)
            }
            Format::Csv => self.table.to_csv(Some(&self.config)),
        }
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError {
        code: super::EXIT_DATA,
        message: format!("{}: {e}", path.display()),
    })
}

/// Writes `doc` to `<out_dir>/<stem>.<ext>` or, without an output directory, to `out`.
pub(crate) fn emit(
    out_dir: Option<&Path>,
    stem: &str,
    format: Format,
    doc: &Document,
    out: &mut dyn Write,
) -> Result<Option<PathBuf>, CliError> {
    let text = doc.render(format)?;
    match out_dir {
        Some(dir) => {
            ensure_dir(dir)?;
            let path = dir.join(format!("{stem}.{}", format.extension()));
            write_file(&path, &text)?;
            Ok(Some(path))
        }
        None => {
            out.write_all(text.as_bytes()).map_err(io_err)?;
            Ok(None)
        }
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError {
        code: super::EXIT_DATA,
        message: format!("{}: {e}", dir.display()),
    })
}

pub(crate) fn io_err(e: std::io::Error) -> CliError {
    CliError {
        code: super::EXIT_DATA,
        message: e.to_string(),
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError {
        code: super::EXIT_DATA,
        message: e.to_string(),
    }
}
