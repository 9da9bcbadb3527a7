use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use super::Outcome;
use crate::error::CliError;
use crate::output::{read_input, sha256_hex, Bundle};
use crate::table::{Cell, Format, Table};

/// Columns recognized as series values, in output order.
pub const METRICS: [&str; 7] = [
    "tightness",
    "female_finding_rate",
    "male_finding_rate",
    "a_index",
    "eps_f",
    "eps_m",
    "share",
];

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Series tables to merge; all must cover the same (ym, region) keys.
    #[arg(long, required = true)]
    #[serde(skip)]
    pub input: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(short, long)]
    #[serde(skip)]
    pub out: PathBuf,
}

type Key = (String, String);

pub fn run(args: &ReportArgs) -> Outcome {
    let mut hashes = Vec::new();
    let mut merged = Table::new(["ym", "region", "metric", "value"]);
    let mut reference: Option<(BTreeSet<Key>, &PathBuf)> = None;
    for path in &args.input {
        hashes.push(sha256_hex(&read_input(path)?));
        let table = Table::read(path)?;
        let bad = |msg: String| CliError::Validation(format!("{}: {msg}", path.display()));
        let ym = table
            .column("ym")
            .ok_or_else(|| bad("missing column `ym`".into()))?;
        let region = table.column("region");
        let metrics: Vec<(&str, usize)> = METRICS
            .iter()
            .filter_map(|&m| table.column(m).map(|i| (m, i)))
            .collect();
        if metrics.is_empty() {
            return Err(bad(format!(
                "none of the series columns {} present",
                METRICS.join(", ")
            )));
        }

        let keys: BTreeSet<Key> = table
            .rows
            .iter()
            .map(|row| {
                (
                    row[ym].as_text(),
                    region.map_or(String::new(), |i| row[i].as_text()),
                )
            })
            .collect();
        match &reference {
            None => reference = Some((keys, path)),
            Some((first, first_path)) if *first != keys => {
                let missing = first.difference(&keys).count();
                let extra = keys.difference(first).count();
                return Err(bad(format!(
                    "period/region keys differ from {} ({missing} missing, {extra} extra)",
                    first_path.display()
                )));
            }
            Some(_) => {}
        }

        for row in &table.rows {
            for &(name, i) in &metrics {
                let raw = row[i].as_text();
                if raw.is_empty() {
                    continue;
                }
                let value: f64 = raw
                    .parse()
                    .map_err(|_| bad(format!("non-numeric {name} `{raw}`")))?;
                merged.push(vec![
                    row[ym].clone(),
                    region.map_or(Cell::Empty, |r| row[r].clone()),
                    Cell::Text(name.to_string()),
                    Cell::Float(value),
                ]);
            }
        }
    }

    let config = serde_json::to_value(args).map_err(CliError::internal)?;
    let mut bundle = Bundle::new("report", config, hashes);
    bundle.table("report", merged);
    bundle.write(&args.out, args.format)?;
    Ok(0)
}
