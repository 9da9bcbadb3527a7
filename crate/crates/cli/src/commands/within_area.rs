use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use matchfn::panel::{
    load_match_records, within_area_share, ConditioningSide, Granularity, ShareOptions,
};
use serde::{Deserialize, Serialize};

use super::Outcome;
use crate::error::CliError;
use crate::output::{read_input, sha256_hex, Bundle};
use crate::table::{Cell, Format, Table};

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GranularityArg {
    Month,
    Year,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SideArg {
    Female,
    Male,
}

#[derive(Debug, Args, Serialize)]
pub struct WithinAreaArgs {
    /// Match records CSV with columns ym, female_region, male_region.
    #[arg(long)]
    #[serde(skip)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "month")]
    pub granularity: GranularityArg,
    /// Party whose region defines the denominator.
    #[arg(long, value_enum, default_value = "female")]
    pub conditioning: SideArg,
    /// TOML file mapping group names to region lists under `[groups]`.
    /// The listed regions form the accepted vocabulary.
    #[arg(long)]
    #[serde(skip)]
    pub groups: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(short, long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Deserialize)]
struct GroupFile {
    groups: BTreeMap<String, Vec<String>>,
}

/// Region to group lookup built from a group file.
fn load_groups(path: &Path, bytes: &[u8]) -> Result<BTreeMap<String, String>, CliError> {
    let bad = |msg: String| CliError::Validation(format!("{}: {msg}", path.display()));
    let text = std::str::from_utf8(bytes).map_err(|e| bad(e.to_string()))?;
    let file: GroupFile = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
    let mut lookup = BTreeMap::new();
    for (group, regions) in file.groups {
        for region in regions {
            if let Some(prev) = lookup.insert(region.clone(), group.clone()) {
                return Err(bad(format!(
                    "region `{region}` listed in both `{prev}` and `{group}`"
                )));
            }
        }
    }
    if lookup.is_empty() {
        return Err(bad("no regions listed under [groups]".into()));
    }
    Ok(lookup)
}

pub fn run(args: &WithinAreaArgs) -> Outcome {
    let bytes = read_input(&args.input)?;
    let context = args.input.display().to_string();
    let records =
        load_match_records(bytes.as_slice(), b',').map_err(|e| CliError::from_core(e, &context))?;
    let mut hashes = vec![sha256_hex(&bytes)];
    let groups = match &args.groups {
        Some(path) => {
            let raw = read_input(path)?;
            hashes.push(sha256_hex(&raw));
            Some(load_groups(path, &raw)?)
        }
        None => None,
    };
    let options = ShareOptions {
        granularity: match args.granularity {
            GranularityArg::Month => Granularity::Month,
            GranularityArg::Year => Granularity::Year,
        },
        conditioning: match args.conditioning {
            SideArg::Female => ConditioningSide::Female,
            SideArg::Male => ConditioningSide::Male,
        },
        vocabulary: groups
            .as_ref()
            .map(|g| g.keys().cloned().collect::<BTreeSet<_>>()),
    };
    let cells =
        within_area_share(&records, &options).map_err(|e| CliError::from_core(e, &context))?;

    let group_of = |region: &str| groups.as_ref().and_then(|g| g.get(region)).cloned();
    let mut by_region = Table::new(["ym", "group", "region", "same_region", "total", "share"]);
    let mut totals: BTreeMap<(String, String), (u64, u64)> = BTreeMap::new();
    for c in &cells {
        let group = group_of(&c.region);
        by_region.push(vec![
            Cell::Text(c.bucket.to_string()),
            Cell::opt_text(group.as_deref()),
            Cell::Text(c.region.clone()),
            Cell::Int(c.same_region),
            Cell::Int(c.total),
            Cell::Float(c.share),
        ]);
        if let Some(group) = group {
            let entry = totals.entry((c.bucket.to_string(), group)).or_default();
            entry.0 += c.same_region;
            entry.1 += c.total;
        }
    }

    let config = serde_json::to_value(args).map_err(CliError::internal)?;
    let mut bundle = Bundle::new("within-area", config, hashes);
    bundle.table("within_area", by_region);
    if groups.is_some() {
        let mut by_group = Table::new(["ym", "group", "same_region", "total", "share"]);
        for ((bucket, group), (same, total)) in totals {
            by_group.push(vec![
                Cell::Text(bucket),
                Cell::Text(group),
                Cell::Int(same),
                Cell::Int(total),
                Cell::Float(same as f64 / total as f64),
            ]);
        }
        bundle.table("within_area_groups", by_group);
    }
    bundle.write(&args.out, args.format)?;
    Ok(0)
}
