use std::path::PathBuf;

use clap::{Args, ValueEnum};
use matchfn::efficiency::{Warning, DEFAULT_LAMBDA_POINTS, DEFAULT_PSI_POINTS};
use matchfn::elasticity::lasso::{DEFAULT_CV_FOLDS, DEFAULT_CV_GRID};
use matchfn::elasticity::{Denominator, Penalty, RegressionForm};
use matchfn::kernel_cdf::{TieRule, DEFAULT_BANDWIDTH};
use matchfn::panel::{derive_ratios, load_panel, Schema};
use matchfn::pipeline::estimate_panel;
use matchfn::{Estimate, MarketPanel, Options};
use serde::Serialize;
use serde_json::json;

use super::{parse_period, region_cell, Outcome};
use crate::error::CliError;
use crate::output::{read_input, sha256_hex, Bundle};
use crate::table::{Cell, Format, Table};

/// Share of clamped observations above which the run is flagged as degraded.
pub const CLAMP_LIMIT: f64 = 0.20;

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormArg {
    Levels,
    Loglog,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DenominatorArg {
    Fitted,
    Observed,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TieArg {
    Strict,
    Midpoint,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    /// Panel CSV with columns ym, region (optional), E, F, M.
    #[arg(long)]
    #[serde(skip)]
    pub input: PathBuf,
    /// Estimate on this region only.
    #[arg(long)]
    pub region: Option<String>,
    /// Normalization period, YYYY-MM. Defaults to January of the first year.
    #[arg(long)]
    pub anchor: Option<String>,
    /// Normalization region. Defaults to the first region.
    #[arg(long)]
    pub anchor_region: Option<String>,
    /// Normalize every region to its own anchor period.
    #[arg(long)]
    pub per_region_anchor: bool,
    #[arg(long, default_value_t = DEFAULT_BANDWIDTH)]
    pub bandwidth: f64,
    #[arg(long, value_enum, default_value = "strict")]
    pub tie_rule: TieArg,
    #[arg(long, default_value_t = DEFAULT_PSI_POINTS)]
    pub psi_grid: usize,
    #[arg(long, default_value_t = DEFAULT_LAMBDA_POINTS)]
    pub lambda_grid: usize,
    /// LASSO penalty: a nonnegative number, or `cv` for cross-validation.
    #[arg(long, default_value = "cv")]
    pub penalty: String,
    #[arg(long, default_value_t = DEFAULT_CV_FOLDS)]
    pub cv_folds: usize,
    #[arg(long, value_enum, default_value = "levels")]
    pub form: FormArg,
    #[arg(long, value_enum, default_value = "fitted")]
    pub denominator: DenominatorArg,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(short, long)]
    #[serde(skip)]
    pub out: PathBuf,
}

impl EstimateArgs {
    fn options(&self) -> Result<Options, CliError> {
        let penalty = match self.penalty.trim() {
            "cv" => Penalty::CrossValidated {
                folds: self.cv_folds,
                grid_points: DEFAULT_CV_GRID,
            },
            raw => {
                let v: f64 = raw.parse().map_err(|_| {
                    CliError::flag("--penalty", format!("`{raw}` is neither a number nor `cv`"))
                })?;
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(CliError::flag(
                        "--penalty",
                        format!("{v} must be finite and >= 0"),
                    ));
                }
                Penalty::Fixed(v)
            }
        };
        let mut opts = Options::default();
        opts.kernel.bandwidth = self.bandwidth;
        opts.kernel.tie_rule = match self.tie_rule {
            TieArg::Strict => TieRule::Strict,
            TieArg::Midpoint => TieRule::Midpoint,
        };
        opts.psi_points = self.psi_grid;
        opts.lambda_points = self.lambda_grid;
        opts.anchor_period = self
            .anchor
            .as_deref()
            .map(|a| parse_period("--anchor", a))
            .transpose()?;
        opts.anchor_region = self.anchor_region.clone();
        opts.per_region_anchor = self.per_region_anchor;
        opts.lasso.penalty = penalty;
        opts.lasso.form = match self.form {
            FormArg::Levels => RegressionForm::Levels,
            FormArg::Loglog => RegressionForm::LogLog,
        };
        opts.denominator = match self.denominator {
            DenominatorArg::Fitted => Denominator::Fitted,
            DenominatorArg::Observed => Denominator::Observed,
        };
        Ok(opts)
    }
}

pub fn run(args: &EstimateArgs) -> Outcome {
    let opts = args.options()?;
    let bytes = read_input(&args.input)?;
    let context = args.input.display().to_string();
    let mut panel = load_panel(bytes.as_slice(), &Schema::default())
        .map_err(|e| CliError::from_core(e, &context))?;
    if let Some(region) = &args.region {
        panel = panel
            .slice_region(Some(region))
            .map_err(|e| CliError::from_core(e, &context))?;
    }
    let est = estimate_panel::<f64>(&panel, &opts).map_err(|e| CliError::from_core(e, ""))?;

    let config = serde_json::to_value(args).map_err(CliError::internal)?;
    let mut bundle = Bundle::new("estimate", config, vec![sha256_hex(&bytes)]);
    tables(&mut bundle, &panel, &est)?;
    for w in &est.warnings {
        bundle.warn(w.to_string());
    }
    let clamped = est.clamped_fraction();
    let (mean_f, mean_m) = est.elasticity.means().unzip();
    bundle.detail(
        "anchor",
        json!({ "ym": est.anchor.period.to_string(), "region": est.anchor.region }),
    );
    bundle.detail("clamped_fraction", json!(clamped));
    bundle.detail("missing_cells", json!(est.distribution.missing_cells()));
    bundle.detail(
        "lasso",
        json!({
            "penalty": est.lasso.penalty,
            "sweeps": est.lasso.sweeps,
            "kkt_residual": est.lasso.kkt_residual,
            "mean_eps_f": mean_f,
            "mean_eps_m": mean_m,
        }),
    );
    bundle.write(&args.out, args.format)?;

    let edges = est
        .warnings
        .iter()
        .filter(|w| matches!(w, Warning::SupportEdge { .. }))
        .count();
    if clamped > CLAMP_LIMIT {
        eprintln!(
            "warning: {edges} of {} observations ({:.1}%) clamped at the support edge; estimates are degraded",
            est.efficiency.points.len(),
            100.0 * clamped
        );
        return Ok(3);
    }
    Ok(0)
}

fn tables(bundle: &mut Bundle, panel: &MarketPanel, est: &Estimate) -> Result<(), CliError> {
    let mut derived = Table::new([
        "ym",
        "region",
        "tightness",
        "female_finding_rate",
        "male_finding_rate",
    ]);
    for r in derive_ratios::<f64>(panel).map_err(|e| CliError::from_core(e, ""))? {
        derived.push(vec![
            Cell::Text(r.period.to_string()),
            region_cell(&r.region),
            Cell::Float(r.tightness),
            Cell::Float(r.female_finding_rate),
            Cell::Float(r.male_finding_rate),
        ]);
    }
    bundle.table("derived", derived);

    let eff_columns = ["ym", "region", "rank", "lambda", "a_raw", "a_index", "edge"];
    let eff_row = |p: &matchfn::efficiency::EfficiencyPoint<f64>| {
        vec![
            Cell::Text(p.period.to_string()),
            region_cell(&p.region),
            Cell::Float(p.rank),
            Cell::Float(p.lambda),
            Cell::Float(p.a_raw),
            Cell::Float(p.a_index),
            p.edge.map_or(Cell::Empty, |e| Cell::Text(e.to_string())),
        ]
    };
    let mut efficiency = Table::new(eff_columns);
    for p in &est.efficiency.points {
        efficiency.push(eff_row(p));
    }
    bundle.table("efficiency", efficiency);

    let regions = panel.regions();
    if regions.len() > 1 {
        for region in regions.iter().flatten() {
            let mut t = Table::new(eff_columns);
            for p in est
                .efficiency
                .points
                .iter()
                .filter(|p| p.region.as_ref() == Some(region))
            {
                t.push(eff_row(p));
            }
            bundle.table(format!("efficiency_{}", file_stem(region)), t);
        }
    }

    let mut elasticity = Table::new(["ym", "region", "e_fitted", "eps_f", "eps_m"]);
    for p in &est.elasticity.points {
        elasticity.push(vec![
            Cell::Text(p.period.to_string()),
            region_cell(&p.region),
            Cell::Float(p.e_fitted),
            Cell::opt_float(p.eps_f),
            Cell::opt_float(p.eps_m),
        ]);
    }
    bundle.table("elasticity", elasticity);

    let mut surface = Table::new([
        "ym",
        "region",
        "effective_input",
        "males",
        "matches",
        "observed",
        "probability",
    ]);
    for p in &est.surface.points {
        surface.push(vec![
            Cell::Text(p.period.to_string()),
            region_cell(&p.region),
            Cell::Float(p.effective_input),
            Cell::Float(p.males),
            Cell::Float(p.matches),
            Cell::Float(p.observed),
            Cell::Float(p.probability),
        ]);
    }
    bundle.table("surface", surface);
    Ok(())
}

/// Region label made safe for use in a file name.
fn file_stem(region: &str) -> String {
    region
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
