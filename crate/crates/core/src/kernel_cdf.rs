//! Kernel-weighted conditional distribution of engagements given market size.
//!
//! `G(e | f, m)` is estimated as the Nadaraya–Watson weighted share of panel
//! observations with `E_t < e`, where each observation is weighted by a
//! bivariate Gaussian kernel on standardized `(ln F, ln M)` distances from the
//! evaluation point.

use crate::error::{Error, Result};
use crate::panel::{MarketObservation, MarketPanel};
use crate::scalar::{mean_sd, Scalar};

pub const DEFAULT_BANDWIDTH: f64 = 0.75;

/// Interior points inserted between consecutive distinct engagement counts
/// when building the quantile search grid.
pub const QUANTILE_REFINEMENT: usize = 64;

/// How observations with `E_t == e` enter the CDF at threshold `e`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TieRule {
    /// `1(E_t < e)`
    #[default]
    Strict,
    /// Ties count with half weight.
    Midpoint,
}

/// Per-coordinate location/scale of `ln F` and `ln M` over the fitting panel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Standardization<T> {
    pub mean_log_f: T,
    pub sd_log_f: T,
    pub mean_log_m: T,
    pub sd_log_m: T,
}

/// User-adjustable part of the kernel configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelOptions<T> {
    pub bandwidth: T,
    pub tie_rule: TieRule,
}

impl<T: Scalar> Default for KernelOptions<T> {
    fn default() -> Self {
        KernelOptions {
            bandwidth: T::lit(DEFAULT_BANDWIDTH),
            tie_rule: TieRule::Strict,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelConfig<T> {
    pub bandwidth: T,
    pub tie_rule: TieRule,
    pub standardization: Standardization<T>,
}

/// Point `(f, m)` in market-size space at which `G(· | f, m)` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalPoint<T> {
    f: T,
    m: T,
}

impl<T: Scalar> EvalPoint<T> {
    pub fn new(f: T, m: T) -> Result<Self> {
        if !(f > T::zero() && f.is_finite()) {
            return Err(Error::param(
                "f",
                format!("{f} must be positive and finite"),
            ));
        }
        if !(m > T::zero() && m.is_finite()) {
            return Err(Error::param(
                "m",
                format!("{m} must be positive and finite"),
            ));
        }
        Ok(EvalPoint { f, m })
    }

    pub fn of(obs: &MarketObservation) -> Self {
        EvalPoint {
            f: obs.f(),
            m: obs.m(),
        }
    }

    pub fn f(&self) -> T {
        self.f
    }

    pub fn m(&self) -> T {
        self.m
    }
}

#[derive(Clone, Debug)]
pub struct ConditionalCdfEstimator<T> {
    config: KernelConfig<T>,
    log_f: Vec<T>,
    log_m: Vec<T>,
    engagements: Vec<T>,
    /// Observation indices ordered by engagements.
    order: Vec<usize>,
    sorted_e: Vec<T>,
    candidates: Vec<T>,
}

impl<T: Scalar> ConditionalCdfEstimator<T> {
    pub fn fit(panel: &MarketPanel, options: KernelOptions<T>) -> Result<Self> {
        if panel.len() < 2 {
            return Err(Error::Degenerate(format!(
                "kernel fit needs at least 2 observations, got {}",
                panel.len()
            )));
        }
        if !(options.bandwidth > T::zero() && options.bandwidth.is_finite()) {
            return Err(Error::param(
                "bandwidth",
                format!("{} must be positive and finite", options.bandwidth),
            ));
        }
        let log_f: Vec<T> = panel.iter().map(|o| o.f::<T>().ln()).collect();
        let log_m: Vec<T> = panel.iter().map(|o| o.m::<T>().ln()).collect();
        let engagements: Vec<T> = panel.iter().map(|o| o.e::<T>()).collect();
        let (mean_log_f, sd_log_f) = mean_sd(&log_f);
        let (mean_log_m, sd_log_m) = mean_sd(&log_m);
        if !(sd_log_f > T::zero()) {
            return Err(Error::Degenerate("ln F has zero variance".into()));
        }
        if !(sd_log_m > T::zero()) {
            return Err(Error::Degenerate("ln M has zero variance".into()));
        }

        let mut order: Vec<usize> = (0..engagements.len()).collect();
        order.sort_by(|&a, &b| engagements[a].partial_cmp(&engagements[b]).unwrap());
        let sorted_e: Vec<T> = order.iter().map(|&i| engagements[i]).collect();
        let candidates = candidate_grid(&sorted_e);

        Ok(ConditionalCdfEstimator {
            config: KernelConfig {
                bandwidth: options.bandwidth,
                tie_rule: options.tie_rule,
                standardization: Standardization {
                    mean_log_f,
                    sd_log_f,
                    mean_log_m,
                    sd_log_m,
                },
            },
            log_f,
            log_m,
            engagements,
            order,
            sorted_e,
            candidates,
        })
    }

    pub fn config(&self) -> &KernelConfig<T> {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.engagements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.engagements.is_empty()
    }

    /// Monotone grid searched by [`Self::conditional_quantile`].
    pub fn candidates(&self) -> &[T] {
        &self.candidates
    }

    /// Standardized log-space offsets `(u, v)` of `(ln f_obs, ln m_obs)` from `at`.
    pub fn standardized_distance(&self, log_f: T, log_m: T, at: EvalPoint<T>) -> (T, T) {
        let s = &self.config.standardization;
        (
            (log_f - at.f.ln()) / s.sd_log_f,
            (log_m - at.m.ln()) / s.sd_log_m,
        )
    }

    fn weight_from_log(&self, log_f: T, log_m: T, at: EvalPoint<T>) -> T {
        let (u, v) = self.standardized_distance(log_f, log_m, at);
        let h = self.config.bandwidth;
        (-(u * u + v * v) / (T::lit(2.0) * h * h)).exp()
    }

    /// Unnormalized Gaussian weight of one observation, 1 at zero distance.
    pub fn kernel_weight(&self, obs: &MarketObservation, at: EvalPoint<T>) -> T {
        self.weight_from_log(obs.f::<T>().ln(), obs.m::<T>().ln(), at)
    }

    /// Normalized local distribution of engagements at `at`.
    pub fn local(&self, at: EvalPoint<T>) -> Result<LocalCdf<'_, T>> {
        let mut cumulative = Vec::with_capacity(self.order.len() + 1);
        cumulative.push(T::zero());
        let mut total = T::zero();
        for &i in &self.order {
            total = total + self.weight_from_log(self.log_f[i], self.log_m[i], at);
            cumulative.push(total);
        }
        if !(total > T::zero() && total.is_finite()) {
            return Err(Error::NoLocalSupport {
                f: at.f.to_f64_lossy(),
                m: at.m.to_f64_lossy(),
            });
        }
        for c in cumulative.iter_mut() {
            *c = *c / total;
        }
        Ok(LocalCdf {
            estimator: self,
            cumulative,
        })
    }

    /// Weighted share of observations with fewer engagements than `e_threshold`.
    pub fn conditional_cdf(&self, e_threshold: T, at: EvalPoint<T>) -> Result<T> {
        Ok(self.local(at)?.cdf(e_threshold))
    }

    /// Smallest candidate `e` with `conditional_cdf(e) >= p`.
    pub fn conditional_quantile(&self, p: T, at: EvalPoint<T>) -> Result<T> {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(Error::param("p", format!("{p} is not a probability")));
        }
        Ok(self.local(at)?.quantile(p))
    }
}

/// Sorted distinct values, each gap split into `QUANTILE_REFINEMENT + 1`
/// equal steps, plus one point above the maximum.
fn candidate_grid<T: Scalar>(sorted: &[T]) -> Vec<T> {
    let mut distinct: Vec<T> = Vec::with_capacity(sorted.len());
    for &e in sorted {
        if distinct.last() != Some(&e) {
            distinct.push(e);
        }
    }
    let steps = T::from_len(QUANTILE_REFINEMENT + 1);
    let mut grid = Vec::with_capacity(distinct.len() * (QUANTILE_REFINEMENT + 1) + 1);
    for w in distinct.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        grid.push(lo);
        for k in 1..=QUANTILE_REFINEMENT {
            grid.push(lo + (hi - lo) * T::from_len(k) / steps);
        }
    }
    let first = distinct[0];
    let last = *distinct.last().unwrap();
    grid.push(last);
    let span = last - first;
    let step = if span > T::zero() {
        span / steps
    } else {
        T::one()
    };
    grid.push(last + step);
    grid
}

/// Normalized kernel weights at one evaluation point, with prefix sums over
/// observations sorted by engagements.
#[derive(Clone, Debug)]
pub struct LocalCdf<'a, T> {
    estimator: &'a ConditionalCdfEstimator<T>,
    cumulative: Vec<T>,
}

impl<T: Scalar> LocalCdf<'_, T> {
    pub fn cdf(&self, e: T) -> T {
        let sorted = &self.estimator.sorted_e;
        let below = sorted.partition_point(|&x| x < e);
        let value = match self.estimator.config.tie_rule {
            TieRule::Strict => self.cumulative[below],
            TieRule::Midpoint => {
                let through = sorted.partition_point(|&x| x <= e);
                let tied = self.cumulative[through] - self.cumulative[below];
                self.cumulative[below] + tied / T::lit(2.0)
            }
        };
        value.max(T::zero()).min(T::one())
    }

    pub fn quantile(&self, p: T) -> T {
        let grid = &self.estimator.candidates;
        let k = grid.partition_point(|&e| self.cdf(e) < p);
        grid[k.min(grid.len() - 1)]
    }

    /// Normalized weight of each panel observation, in panel order.
    pub fn weights(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.estimator.len()];
        for (rank, &i) in self.estimator.order.iter().enumerate() {
            out[i] = self.cumulative[rank + 1] - self.cumulative[rank];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{MarketObservation, Period};

    fn panel(rows: &[(u64, u64, u64)]) -> MarketPanel {
        let start: Period = "2014-01".parse().unwrap();
        MarketPanel::from_observations(
            rows.iter()
                .enumerate()
                .map(|(i, &(e, f, m))| {
                    MarketObservation::new(start.plus_months(i as i64), None, e, f, m).unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn minimal_fit_and_degeneracy() {
        let est = ConditionalCdfEstimator::<f64>::fit(
            &panel(&[(10, 100, 120), (20, 200, 150)]),
            KernelOptions::default(),
        )
        .unwrap();
        let s = est.config().standardization;
        assert!(s.sd_log_f.is_finite() && s.sd_log_m.is_finite());
        assert_eq!(est.config().bandwidth, 0.75);

        let same_f = panel(&[(10, 100, 120), (20, 100, 150)]);
        assert!(matches!(
            ConditionalCdfEstimator::<f64>::fit(&same_f, KernelOptions::default()),
            Err(Error::Degenerate(_))
        ));
        let one = panel(&[(10, 100, 120)]);
        assert!(ConditionalCdfEstimator::<f64>::fit(&one, KernelOptions::default()).is_err());
        let bad_h = KernelOptions {
            bandwidth: 0.0,
            ..Default::default()
        };
        assert!(ConditionalCdfEstimator::<f64>::fit(
            &panel(&[(10, 100, 120), (20, 200, 150)]),
            bad_h
        )
        .is_err());
    }

    #[test]
    fn weight_closed_forms() {
        let p = panel(&[(10, 100, 120), (20, 200, 150), (5, 50, 80)]);
        let est = ConditionalCdfEstimator::<f64>::fit(&p, KernelOptions::default()).unwrap();
        let obs = &p.observations()[0];
        assert_eq!(est.kernel_weight(obs, EvalPoint::of(obs)), 1.0);

        // shift f so that u = h exactly, v = 0
        let s = est.config().standardization;
        let f = (obs.f::<f64>().ln() - 0.75 * s.sd_log_f).exp();
        let at = EvalPoint::new(f, 120.0).unwrap();
        let w = est.kernel_weight(obs, at);
        assert!((w - (-0.5f64).exp()).abs() < 1e-12, "{w}");
        assert!((w - 0.6065).abs() < 1e-4);
    }

    #[test]
    fn cdf_extremes_and_quantile_ends() {
        let p = panel(&[(10, 100, 120), (20, 200, 150), (5, 50, 80), (7, 70, 90)]);
        let est = ConditionalCdfEstimator::<f64>::fit(&p, KernelOptions::default()).unwrap();
        let at = EvalPoint::new(90.0, 100.0).unwrap();
        assert_eq!(est.conditional_cdf(4.0, at).unwrap(), 0.0);
        assert_eq!(est.conditional_cdf(5.0, at).unwrap(), 0.0);
        assert_eq!(est.conditional_cdf(21.0, at).unwrap(), 1.0);
        assert_eq!(est.conditional_quantile(0.0, at).unwrap(), 5.0);
        assert!(est.conditional_quantile(1.0, at).unwrap() >= 20.0);
        assert!(est.conditional_quantile(1.5, at).is_err());
    }

    #[test]
    fn far_away_point_has_no_support() {
        let p = panel(&[(10, 100, 120), (20, 101, 121)]);
        let est = ConditionalCdfEstimator::<f64>::fit(&p, KernelOptions::default()).unwrap();
        let at = EvalPoint::new(1e12, 1e-12).unwrap();
        assert!(matches!(
            est.conditional_cdf(10.0, at),
            Err(Error::NoLocalSupport { .. })
        ));
    }

    #[test]
    fn midpoint_counts_ties_by_half() {
        let p = panel(&[(10, 100, 120), (10, 101, 121), (12, 102, 119)]);
        let strict = ConditionalCdfEstimator::<f64>::fit(&p, KernelOptions::default()).unwrap();
        let mid = ConditionalCdfEstimator::<f64>::fit(
            &p,
            KernelOptions {
                tie_rule: TieRule::Midpoint,
                ..Default::default()
            },
        )
        .unwrap();
        let at = EvalPoint::new(101.0, 120.0).unwrap();
        let w = strict.local(at).unwrap().weights();
        assert_eq!(strict.conditional_cdf(10.0, at).unwrap(), 0.0);
        let expected = (w[0] + w[1]) / 2.0;
        assert!((mid.conditional_cdf(10.0, at).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn candidate_grid_layout() {
        let g = candidate_grid(&[1.0f64, 1.0, 66.0]);
        assert_eq!(g.len(), 65 + 1 + 1);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[1], 2.0);
        assert_eq!(g[65], 66.0);
        assert_eq!(g[66], 67.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(candidate_grid(&[3.0f64]), vec![3.0, 4.0]);
    }

    #[test]
    fn works_in_single_precision() {
        let p = panel(&[(10, 100, 120), (20, 200, 150), (5, 50, 80)]);
        let est = ConditionalCdfEstimator::<f32>::fit(&p, KernelOptions::default()).unwrap();
        let at = EvalPoint::new(100.0f32, 120.0).unwrap();
        let c = est.conditional_cdf(11.0, at).unwrap();
        assert!(c > 0.0 && c < 1.0);
    }
}
