//! Synthetic two-sided markets with a known efficiency path.
//!
//! Efficiency follows a trend plus an AR(1) deviation,
//! `ln A_t = ln a0 + drift·t + u_t` with `u_t = ρ·u_{t−1} + σ_A·ε_t`.
//! Female users follow a random walk with drift in logs, male users load on
//! female users, and engagements come from a constant-returns technology in
//! `(A·F, M)`. Each shock family has its own generator stream, so male users
//! are independent of efficiency given female users by construction.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::panel::{MarketObservation, MarketPanel, Period};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Technology {
    CobbDouglas,
    /// `(α·x^r + (1−α)·y^r)^{1/r}` with `r < 1`, `r ≠ 0`.
    Ces {
        r: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub periods: usize,
    pub start: Period,
    pub region: Option<String>,
    pub alpha: f64,
    pub technology: Technology,
    pub log_a0: f64,
    pub a_drift: f64,
    pub a_rho: f64,
    pub a_sigma: f64,
    /// Initial number of female users.
    pub f0: f64,
    pub f_drift: f64,
    pub f_sigma: f64,
    /// `c` in `ln M = c + γ·ln F + σ_M·ε`.
    pub m_intercept: f64,
    pub m_loading: f64,
    pub m_sigma: f64,
    /// Multiplicative log-normal noise on engagements.
    pub e_sigma: f64,
    pub seed: u64,
}

impl SimConfig {
    /// Eleven years of monthly data from January 2014. Efficiency triples,
    /// male users grow faster than female users so tightness declines, and
    /// engagement noise is small.
    pub fn paper_shape() -> Self {
        let periods = 132;
        let alpha = 0.6;
        let f0: f64 = 20_000.0;
        let m0: f64 = 18_000.0;
        let e0: f64 = 400.0;
        let m_loading = 2.5;
        SimConfig {
            periods,
            start: Period::new(2014, 1).expect("valid period"),
            region: None,
            alpha,
            technology: Technology::CobbDouglas,
            log_a0: ((e0 / (f0.powf(alpha) * m0.powf(1.0 - alpha))).ln()) / alpha,
            a_drift: 3f64.ln() / (periods - 1) as f64,
            a_rho: 0.9,
            a_sigma: 0.03,
            f0,
            f_drift: 0.006,
            f_sigma: 0.005,
            m_intercept: m0.ln() - m_loading * f0.ln(),
            m_loading,
            m_sigma: 0.2,
            e_sigma: 0.01,
            seed: 7,
        }
    }

    /// Constant efficiency, no engagement noise.
    pub fn constant_efficiency() -> Self {
        SimConfig {
            a_drift: 0.0,
            a_rho: 0.0,
            a_sigma: 0.0,
            e_sigma: 0.0,
            ..Self::paper_shape()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.periods == 0 {
            return Err(Error::param("periods", "must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(
                "alpha",
                format!("{} must lie strictly between 0 and 1", self.alpha),
            ));
        }
        if !(0.0..1.0).contains(&self.a_rho) {
            return Err(Error::param(
                "rho",
                format!("{} must lie in [0, 1)", self.a_rho),
            ));
        }
        for (name, v) in [
            ("sigma-a", self.a_sigma),
            ("sigma-f", self.f_sigma),
            ("sigma-m", self.m_sigma),
            ("sigma-e", self.e_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("{v} must be finite and >= 0")));
            }
        }
        for (name, v) in [
            ("log-a0", self.log_a0),
            ("a-drift", self.a_drift),
            ("f-drift", self.f_drift),
            ("m-intercept", self.m_intercept),
            ("m-loading", self.m_loading),
        ] {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if !(self.f0 >= 1.0 && self.f0.is_finite()) {
            return Err(Error::param(
                "f0",
                format!("{} must be at least 1", self.f0),
            ));
        }
        if let Technology::Ces { r } = self.technology {
            if !(r < 1.0 && r != 0.0 && r.is_finite()) {
                return Err(Error::param(
                    "ces-r",
                    format!("{r} must be below 1 and nonzero"),
                ));
            }
        }
        Ok(())
    }
}

impl Technology {
    /// Matches produced from effective female input `x` and male users `y`.
    pub fn output(self, alpha: f64, x: f64, y: f64) -> f64 {
        match self {
            Technology::CobbDouglas => x.powf(alpha) * y.powf(1.0 - alpha),
            Technology::Ces { r } => (alpha * x.powf(r) + (1.0 - alpha) * y.powf(r)).powf(1.0 / r),
        }
    }

    /// Elasticities with respect to `x` and `y`.
    pub fn elasticities(self, alpha: f64, x: f64, y: f64) -> (f64, f64) {
        match self {
            Technology::CobbDouglas => (alpha, 1.0 - alpha),
            Technology::Ces { r } => {
                let a = alpha * x.powf(r);
                let b = (1.0 - alpha) * y.powf(r);
                (a / (a + b), b / (a + b))
            }
        }
    }
}

/// Standard normal draws for each shock family.
#[derive(Clone, Debug, PartialEq)]
pub struct Shocks {
    pub efficiency: Vec<f64>,
    pub females: Vec<f64>,
    pub males: Vec<f64>,
    pub engagements: Vec<f64>,
}

impl Shocks {
    pub fn draw(seed: u64, n: usize) -> Self {
        let stream = |k: u64| -> Vec<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            (0..n).map(|_| rng.sample(StandardNormal)).collect()
        };
        Shocks {
            efficiency: stream(1),
            females: stream(2),
            males: stream(3),
            engagements: stream(4),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruthRow {
    pub period: Period,
    pub region: Option<String>,
    pub efficiency: f64,
    pub eps_f: f64,
    pub eps_m: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOutput {
    pub panel: MarketPanel,
    pub truth: Vec<TruthRow>,
    pub shocks: Shocks,
}

impl SimOutput {
    pub fn true_efficiency(&self) -> Vec<f64> {
        self.truth.iter().map(|t| t.efficiency).collect()
    }
}

fn count(v: f64) -> u64 {
    v.round().max(1.0) as u64
}

pub fn simulate_market(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let n = config.periods;
    let shocks = Shocks::draw(config.seed, n);
    let mut observations = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    let mut deviation = 0.0;
    let mut log_f = config.f0.ln();
    for t in 0..n {
        if t > 0 {
            deviation = config.a_rho * deviation + config.a_sigma * shocks.efficiency[t];
            log_f += config.f_drift + config.f_sigma * shocks.females[t];
        }
        let a = (config.log_a0 + config.a_drift * t as f64 + deviation).exp();
        let f = count(log_f.exp());
        let m = count(
            (config.m_intercept + config.m_loading * log_f + config.m_sigma * shocks.males[t])
                .exp(),
        );
        let (ff, mf) = (f as f64, m as f64);
        let clean = config.technology.output(config.alpha, a * ff, mf);
        let noisy = clean * (config.e_sigma * shocks.engagements[t]).exp();
        if !noisy.is_finite() {
            return Err(Error::param(
                "simulation",
                format!("engagements overflow at period {t}"),
            ));
        }
        let e = (noisy.round().max(0.0) as u64).min(f.min(m));
        let period = config.start.plus_months(t as i64);
        observations.push(MarketObservation::new(
            period,
            config.region.clone(),
            e,
            f,
            m,
        )?);
        let (eps_f, eps_m) = config.technology.elasticities(config.alpha, a * ff, mf);
        truth.push(TruthRow {
            period,
            region: config.region.clone(),
            efficiency: a,
            eps_f,
            eps_m,
        });
    }
    Ok(SimOutput {
        panel: MarketPanel::from_observations(observations)?,
        truth,
        shocks,
    })
}

/// One region of a multi-region simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionSpec {
    pub name: String,
    /// Multiplies the initial number of users.
    pub size: f64,
    /// Added to the log efficiency level.
    pub log_a_shift: f64,
}

/// Simulates each region independently from `base`, with per-region seeds
/// `base.seed + k`.
pub fn simulate_regions(base: &SimConfig, regions: &[RegionSpec]) -> Result<SimOutput> {
    if regions.is_empty() {
        return Err(Error::Empty("no regions to simulate"));
    }
    let mut observations = Vec::new();
    let mut truth = Vec::new();
    let mut shocks = Shocks {
        efficiency: vec![],
        females: vec![],
        males: vec![],
        engagements: vec![],
    };
    for (k, spec) in regions.iter().enumerate() {
        if !(spec.size > 0.0 && spec.size.is_finite()) {
            return Err(Error::param(
                "region size",
                format!("{} must be positive", spec.size),
            ));
        }
        let config = SimConfig {
            region: Some(spec.name.clone()),
            f0: base.f0 * spec.size,
            m_intercept: base.m_intercept + (1.0 - base.m_loading) * spec.size.ln(),
            log_a0: base.log_a0 + spec.log_a_shift,
            seed: base.seed.wrapping_add(k as u64),
            ..base.clone()
        };
        let out = simulate_market(&config)?;
        observations.extend(out.panel.observations().iter().cloned());
        truth.extend(out.truth);
        shocks.efficiency.extend(out.shocks.efficiency);
        shocks.females.extend(out.shocks.females);
        shocks.males.extend(out.shocks.males);
        shocks.engagements.extend(out.shocks.engagements);
    }
    Ok(SimOutput {
        panel: MarketPanel::from_observations(observations)?,
        truth,
        shocks,
    })
}

/// Cobb–Douglas inversion `A_t = (E_t / (F_t^α·M_t^{1−α}))^{1/α}`; `None`
/// where `E_t = 0`.
pub fn closed_form_efficiency(panel: &MarketPanel, alpha: f64) -> Result<Vec<Option<f64>>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(
            "alpha",
            format!("{alpha} must lie strictly between 0 and 1"),
        ));
    }
    Ok(panel
        .iter()
        .map(|o| {
            (o.engagements > 0).then(|| {
                let (e, f, m) = (o.engagements as f64, o.females as f64, o.males as f64);
                (e / (f.powf(alpha) * m.powf(1.0 - alpha))).powf(1.0 / alpha)
            })
        })
        .collect())
}

pub fn write_truth<W: Write>(sink: W, truth: &[TruthRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["ym", "region", "A", "eps_f", "eps_m"])?;
    for row in truth {
        w.write_record([
            row.period.to_string(),
            row.region.clone().unwrap_or_default(),
            format!("{}", row.efficiency),
            format!("{}", row.eps_f),
            format!("{}", row.eps_m),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_triples_efficiency_trend() {
        let c = SimConfig::paper_shape();
        assert!(((c.a_drift * (c.periods - 1) as f64).exp() - 3.0).abs() < 1e-12);
        let out = simulate_market(&c).unwrap();
        assert_eq!(out.panel.len(), 132);
        let a = out.true_efficiency();
        let ratio = a[131] / a[0];
        assert!(ratio > 2.0 && ratio < 4.5, "{ratio}");
    }

    #[test]
    fn constant_technology_without_noise() {
        let mut c = SimConfig::constant_efficiency();
        c.a_rho = 0.0;
        let out = simulate_market(&c).unwrap();
        let a = out.true_efficiency();
        assert!(a.iter().all(|&v| v == a[0]));
        let ratios: Vec<f64> = out
            .panel
            .iter()
            .map(|o| {
                o.engagements as f64 / ((o.females as f64).powf(0.6) * (o.males as f64).powf(0.4))
            })
            .collect();
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(hi / lo - 1.0 < 0.01, "{lo} {hi}");
    }

    #[test]
    fn rejects_boundary_alpha() {
        let c = SimConfig {
            alpha: 1.0,
            ..SimConfig::paper_shape()
        };
        assert!(
            matches!(simulate_market(&c), Err(Error::InvalidParameter { name, .. }) if name == "alpha")
        );
        let c = SimConfig {
            a_rho: 1.0,
            ..SimConfig::paper_shape()
        };
        assert!(c.validate().is_err());
        let c = SimConfig {
            e_sigma: -0.1,
            ..SimConfig::paper_shape()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn closed_form_hand_cases() {
        let p = Period::new(2014, 1).unwrap();
        let panel = MarketPanel::from_observations(vec![
            MarketObservation::new(p, None, 100, 100, 100).unwrap(),
            MarketObservation::new(p.succ(), None, 50, 400, 100).unwrap(),
            MarketObservation::new(p.succ().succ(), None, 0, 400, 100).unwrap(),
        ])
        .unwrap();
        let a = closed_form_efficiency(&panel, 0.5).unwrap();
        assert!((a[0].unwrap() - 1.0).abs() < 1e-12);
        assert!((a[1].unwrap() - 0.0625).abs() < 1e-12);
        assert!(a[2].is_none());
    }

    #[test]
    fn ces_elasticities_sum_to_one() {
        let t = Technology::Ces { r: 0.5 };
        let (a, b) = t.elasticities(0.6, 3.0, 7.0);
        assert!((a + b - 1.0).abs() < 1e-12);
        let y = t.output(0.6, 3.0, 7.0);
        assert!((t.output(0.6, 6.0, 14.0) - 2.0 * y).abs() < 1e-12);
    }
}
