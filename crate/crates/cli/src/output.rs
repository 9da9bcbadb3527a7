//! Atomic file output and the run manifest.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::table::{Cell, Format, Table};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    std::io::Write::write_all(&mut tmp, bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Output set of one command invocation.
pub struct Bundle {
    command: &'static str,
    config: Value,
    inputs: Vec<String>,
    tables: Vec<(String, Table)>,
    details: serde_json::Map<String, Value>,
    warnings: Vec<String>,
}

impl Bundle {
    /// `inputs` holds the SHA-256 of every input file in order.
    pub fn new(command: &'static str, config: Value, inputs: Vec<String>) -> Self {
        Bundle {
            command,
            config,
            inputs,
            tables: Vec::new(),
            details: serde_json::Map::new(),
            warnings: Vec::new(),
        }
    }

    /// Identifier of the run, determined by the configuration and input contents.
    pub fn run_id(&self) -> String {
        let key = json!({ "command": self.command, "config": self.config, "inputs": self.inputs });
        sha256_hex(key.to_string().as_bytes())[..16].to_string()
    }

    pub fn table(&mut self, name: impl Into<String>, table: Table) {
        self.tables.push((name.into(), table));
    }

    pub fn detail(&mut self, key: &str, value: Value) {
        self.details.insert(key.to_string(), value);
    }

    pub fn warn(&mut self, message: String) {
        self.warnings.push(message);
    }

    /// Writes every table (with a leading `run` column) and `manifest.json`.
    /// Returns the manifest content hash.
    pub fn write(self, dir: &Path, format: Format) -> Result<String, CliError> {
        create_dir(dir)?;
        let run = self.run_id();
        let mut outputs = serde_json::Map::new();
        for (name, table) in &self.tables {
            let file = format!("{name}.{}", format.extension());
            let bytes = with_run_column(table, &run).render(format)?;
            write_atomic(&dir.join(&file), &bytes)?;
            outputs.insert(file, Value::String(sha256_hex(&bytes)));
        }
        let mut manifest = json!({
            "command": self.command,
            "run": run,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": outputs,
            "warnings": self.warnings,
            "details": self.details,
        });
        let hash = sha256_hex(manifest.to_string().as_bytes());
        let created = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        manifest["content_hash"] = Value::String(hash.clone());
        manifest["created_unix"] = Value::from(created);
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(CliError::internal)?;
        bytes.push(b'\n');
        write_atomic(&dir.join("manifest.json"), &bytes)?;
        Ok(hash)
    }
}

fn with_run_column(table: &Table, run: &str) -> Table {
    let mut out =
        Table::new(std::iter::once("run".to_string()).chain(table.columns.iter().cloned()));
    for row in &table.rows {
        out.push(
            std::iter::once(Cell::Text(run.to_string()))
                .chain(row.iter().cloned())
                .collect(),
        );
    }
    out
}

pub fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}
