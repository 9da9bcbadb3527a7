use std::path::PathBuf;

use clap::{Args, ValueEnum};
use matchfn::panel::{write_panel, Schema};
use matchfn::simulate::{
    simulate_market, simulate_regions, write_truth, RegionSpec, SimConfig, Technology,
};
use serde::Serialize;

use super::Outcome;
use crate::error::CliError;
use crate::output::{create_dir, write_atomic};

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Efficiency triples over eleven years while tightness declines.
    PaperShape,
    /// Flat efficiency without engagement noise.
    Constant,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "paper-shape")]
    pub preset: Preset,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Female-input share of the Cobb-Douglas technology.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub periods: Option<usize>,
    /// AR(1) persistence of efficiency deviations.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub sigma_a: Option<f64>,
    #[arg(long)]
    pub sigma_e: Option<f64>,
    /// Use a CES technology with this substitution parameter.
    #[arg(long)]
    pub ces_r: Option<f64>,
    /// Comma-separated region names. Region k starts at 0.5^k of the base size
    /// with log efficiency shifted by -0.1k.
    #[arg(long, value_delimiter = ',')]
    pub regions: Vec<String>,
    #[arg(short, long)]
    pub out: PathBuf,
}

impl SimulateArgs {
    fn config(&self) -> SimConfig {
        let mut cfg = match self.preset {
            Preset::PaperShape => SimConfig::paper_shape(),
            Preset::Constant => SimConfig::constant_efficiency(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.periods {
            cfg.periods = v;
        }
        if let Some(v) = self.rho {
            cfg.a_rho = v;
        }
        if let Some(v) = self.sigma_a {
            cfg.a_sigma = v;
        }
        if let Some(v) = self.sigma_e {
            cfg.e_sigma = v;
        }
        if let Some(r) = self.ces_r {
            cfg.technology = Technology::Ces { r };
        }
        cfg
    }
}

pub fn run(args: &SimulateArgs) -> Outcome {
    let cfg = args.config();
    cfg.validate().map_err(|e| CliError::from_core(e, ""))?;
    let out = if args.regions.is_empty() {
        simulate_market(&cfg)
    } else {
        let specs: Vec<RegionSpec> = args
            .regions
            .iter()
            .enumerate()
            .map(|(k, name)| RegionSpec {
                name: name.trim().to_string(),
                size: 0.5f64.powi(k as i32),
                log_a_shift: -0.1 * k as f64,
            })
            .collect();
        if specs.iter().any(|s| s.name.is_empty()) {
            return Err(CliError::flag("--regions", "region names must be nonempty"));
        }
        simulate_regions(&cfg, &specs)
    }
    .map_err(|e| CliError::from_core(e, ""))?;

    create_dir(&args.out)?;
    let mut panel = Vec::new();
    write_panel(&mut panel, &out.panel, &Schema::default())
        .map_err(|e| CliError::from_core(e, "panel"))?;
    write_atomic(&args.out.join("panel.csv"), &panel)?;
    let mut truth = Vec::new();
    write_truth(&mut truth, &out.truth).map_err(|e| CliError::from_core(e, "truth"))?;
    write_atomic(&args.out.join("truth.csv"), &truth)?;

    let a = out.true_efficiency();
    let periods = cfg.periods;
    println!(
        "T={periods} alpha={} true A ratio={:.4}",
        cfg.alpha,
        a[periods - 1] / a[0]
    );
    Ok(0)
}
