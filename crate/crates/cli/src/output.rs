use std::fs::File;
use std::io::{self, BufWriter, Write};

use serde_json::{json, Value};

use mtphase::io::{write_table, Metadata, VERSION};

use crate::args::Format;
use crate::commands::CliError;

/// A command result in both output shapes.
pub struct Report {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// Summary values written as extra metadata lines in CSV.
    pub extra: Vec<(String, String)>,
    pub json: Value,
}

pub struct Sink {
    pub format: Format,
    pub out: Option<String>,
    pub meta: Metadata,
}

impl Sink {
    pub fn emit(&self, report: Report) -> Result<(), CliError> {
        let mut w: Box<dyn Write> = match &self.out {
            Some(path) => Box::new(BufWriter::new(
                File::create(path).map_err(|e| CliError::Io(format!("{path}: {e}")))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        match self.format {
            Format::Csv => {
                let meta = Metadata {
                    extra: report.extra,
                    ..self.meta.clone()
                };
                write_table(&mut w, &meta, &report.header, report.rows).map_err(|e| CliError::Io(e.to_string()))?;
            }
            Format::Json => {
                let config: Value = serde_json::from_str(&self.meta.config_json).expect("config is JSON");
                let doc = json!({
                    "meta": {
                        "version": VERSION,
                        "command": self.meta.command,
                        "config_sha256": self.meta.config_hash,
                        "seed": self.meta.seed,
                        "config": config,
                    },
                    "result": report.json,
                });
                serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| CliError::Io(e.to_string()))?;
                writeln!(w).map_err(|e| CliError::Io(e.to_string()))?;
            }
        }
        w.flush().map_err(|e| CliError::Io(e.to_string()))
    }
}
