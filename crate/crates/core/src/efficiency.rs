//! Recovery of the matching-efficiency series.
//!
//! Under constant returns and `M ⊥ A | F`, the conditional efficiency
//! distribution at female scale `λ·f0` is read off the engagement CDF along a
//! ray through the base point:
//!
//! ```text
//! F(ψ·A0 | λ·f0) = G(ψλ·e0 | λ·f0, ψλ·m0)
//! ```
//!
//! Tracing this over a `(ψ, λ)` grid and inverting each observation's rank
//! `G(E_t | F_t, M_t)` along its `λ_t = F_t / f0` column gives `A_t / A0`.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::isotonic::pava;
use crate::kernel_cdf::{ConditionalCdfEstimator, EvalPoint};
use crate::panel::{MarketObservation, MarketPanel, Period};
use crate::scalar::Scalar;

pub const DEFAULT_PSI_POINTS: usize = 80;
pub const DEFAULT_LAMBDA_POINTS: usize = 40;

/// Normalization anchor: a period, and the region when the panel has several.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Anchor {
    pub period: Period,
    pub region: Option<String>,
}

impl Anchor {
    pub fn new(period: Period, region: Option<String>) -> Self {
        Anchor { period, region }
    }

    /// January of the first sample year when present, otherwise the earliest
    /// period. The region defaults to the first in panel order.
    pub fn default_for(panel: &MarketPanel, region: Option<&str>) -> Result<Self> {
        let region = match region {
            Some(r) => Some(r.to_string()),
            None => panel
                .regions()
                .into_iter()
                .next()
                .ok_or(Error::Empty("panel has no observations"))?,
        };
        let first = panel
            .iter()
            .filter(|o| o.region == region)
            .map(|o| o.period)
            .min()
            .ok_or_else(|| Error::UnknownRegion(region.clone().unwrap_or_default()))?;
        let january = Period::new(first.year(), 1)?;
        let period = if panel.get(january, region.as_deref()).is_some() {
            january
        } else {
            first
        };
        Ok(Anchor { period, region })
    }
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.region {
            Some(r) => write!(f, "{}/{}", self.period, r),
            None => write!(f, "{}", self.period),
        }
    }
}

/// Reference point `(e0, f0, m0)` against which efficiency is measured.
#[derive(Clone, Debug, PartialEq)]
pub struct BasePoint<T> {
    pub e0: T,
    pub f0: T,
    pub m0: T,
    pub period: Period,
    pub region: Option<String>,
}

impl<T: Scalar> BasePoint<T> {
    pub fn new(e0: T, f0: T, m0: T, period: Period, region: Option<String>) -> Result<Self> {
        for (name, v) in [("e0", e0), ("f0", f0), ("m0", m0)] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::param(name, format!("{v} must be positive")));
            }
        }
        Ok(BasePoint {
            e0,
            f0,
            m0,
            period,
            region,
        })
    }

    pub fn from_observation(obs: &MarketObservation) -> Result<Self> {
        Self::new(obs.e(), obs.f(), obs.m(), obs.period, obs.region.clone())
    }

    /// The panel observation at `anchor`.
    pub fn at_anchor(panel: &MarketPanel, anchor: &Anchor) -> Result<Self> {
        let obs = panel
            .get(anchor.period, anchor.region.as_deref())
            .ok_or_else(|| Error::MissingAnchor(anchor.to_string()))?;
        Self::from_observation(obs)
    }

    /// Whether `(ln f0, ln m0)` lies inside the convex hull of the panel's
    /// `(ln F, ln M)` support.
    pub fn inside_support(&self, panel: &MarketPanel) -> bool {
        let pts: Vec<(f64, f64)> = panel
            .iter()
            .map(|o| ((o.females as f64).ln(), (o.males as f64).ln()))
            .collect();
        let q = (self.f0.to_f64_lossy().ln(), self.m0.to_f64_lossy().ln());
        point_in_hull(&convex_hull(pts), q)
    }
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain; counter-clockwise, no repeated endpoint.
fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn point_in_hull(hull: &[(f64, f64)], q: (f64, f64)) -> bool {
    const EPS: f64 = 1e-12;
    match hull.len() {
        0 => false,
        1 => (hull[0].0 - q.0).abs() < EPS && (hull[0].1 - q.1).abs() < EPS,
        2 => {
            let (a, b) = (hull[0], hull[1]);
            cross(a, b, q).abs() < EPS
                && q.0 >= a.0.min(b.0) - EPS
                && q.0 <= a.0.max(b.0) + EPS
                && q.1 >= a.1.min(b.1) - EPS
                && q.1 <= a.1.max(b.1) + EPS
        }
        n => (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], q) >= -EPS),
    }
}

/// Grid over the efficiency scale `ψ` and the female-count scale `λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleGrid<T> {
    psi: Vec<T>,
    lambda: Vec<T>,
}

fn check_axis<T: Scalar>(name: &'static str, values: &[T]) -> Result<()> {
    if values.len() < 2 {
        return Err(Error::param(name, "needs at least 2 points"));
    }
    if values.iter().any(|&v| !(v > T::zero() && v.is_finite())) {
        return Err(Error::param(name, "values must be positive and finite"));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param(name, "values must be strictly increasing"));
    }
    Ok(())
}

/// `n` log-uniform points on `[lo, hi]`, with 1 inserted when inside.
fn geometric_with_unit<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let last = T::from_len(n - 1);
    let mut out: Vec<T> = (0..n)
        .map(|k| (llo + (lhi - llo) * T::from_len(k) / last).exp())
        .collect();
    if lo < T::one() && hi > T::one() {
        let tol = T::lit(1e-9);
        match out.iter().position(|&v| v >= T::one()) {
            Some(k) if (out[k] - T::one()).abs() <= tol => out[k] = T::one(),
            Some(k) if k > 0 && (out[k - 1] - T::one()).abs() <= tol => out[k - 1] = T::one(),
            Some(k) => out.insert(k, T::one()),
            None => out.push(T::one()),
        }
    }
    out
}

impl<T: Scalar> ScaleGrid<T> {
    pub fn new(psi: Vec<T>, lambda: Vec<T>) -> Result<Self> {
        check_axis("psi grid", &psi)?;
        check_axis("lambda grid", &lambda)?;
        Ok(ScaleGrid { psi, lambda })
    }

    /// Log-uniform grids padded to `[0.5·min, 2·max]` of the panel's scale ratios.
    ///
    /// `ψ` covers both `E/e0` and the female finding-rate ratio
    /// `(E/e0)/(F/f0)`; `λ` covers `F/f0`. Both always contain 1 so the base
    /// point sits on a node.
    pub fn for_panel(
        panel: &MarketPanel,
        base: &BasePoint<T>,
        n_psi: usize,
        n_lambda: usize,
    ) -> Result<Self> {
        if n_psi < 2 || n_lambda < 2 {
            return Err(Error::param(
                "grid size",
                "needs at least 2 points per axis",
            ));
        }
        let mut psi_lo = T::one();
        let mut psi_hi = T::one();
        let mut lam_lo = T::one();
        let mut lam_hi = T::one();
        for o in panel {
            let lam = o.f::<T>() / base.f0;
            lam_lo = lam_lo.min(lam);
            lam_hi = lam_hi.max(lam);
            if o.engagements > 0 {
                let e_ratio = o.e::<T>() / base.e0;
                for r in [e_ratio, e_ratio / lam] {
                    psi_lo = psi_lo.min(r);
                    psi_hi = psi_hi.max(r);
                }
            }
        }
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        Self::new(
            geometric_with_unit(psi_lo * half, psi_hi * two, n_psi),
            geometric_with_unit(lam_lo * half, lam_hi * two, n_lambda),
        )
    }

    pub fn psi(&self) -> &[T] {
        &self.psi
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }
}

/// Traced `F(ψ_i·A0 | λ_j·f0)` values. Cells without kernel support are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct EfficiencyDistribution<T> {
    psi: Vec<T>,
    lambda: Vec<T>,
    cells: Vec<Option<T>>,
    monotonized: bool,
}

impl<T: Scalar> EfficiencyDistribution<T> {
    pub fn psi(&self) -> &[T] {
        &self.psi
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        self.cells[i * self.lambda.len() + j]
    }

    pub fn column(&self, j: usize) -> Vec<Option<T>> {
        (0..self.psi.len()).map(|i| self.get(i, j)).collect()
    }

    pub fn is_monotonized(&self) -> bool {
        self.monotonized
    }

    pub fn missing_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.is_none()).count()
    }

    /// Column at `ln λ` by linear interpolation between adjacent grid columns.
    /// Returns the column and whether `λ` had to be clamped onto the grid.
    pub fn column_at(&self, lambda: T) -> (Vec<(T, T)>, bool) {
        let logs: Vec<T> = self.lambda.iter().map(|l| l.ln()).collect();
        let x = lambda.ln();
        let n = logs.len();
        let (k, w, clamped) = if x <= logs[0] {
            (0, T::zero(), x < logs[0])
        } else if x >= logs[n - 1] {
            (n - 2, T::one(), x > logs[n - 1])
        } else {
            let k = logs.partition_point(|&l| l <= x) - 1;
            let k = k.min(n - 2);
            (k, (x - logs[k]) / (logs[k + 1] - logs[k]), false)
        };
        let col = (0..self.psi.len())
            .filter_map(|i| {
                let lo = self.get(i, k)?;
                let hi = self.get(i, k + 1)?;
                let p = if w == T::zero() {
                    lo
                } else if w == T::one() {
                    hi
                } else {
                    lo + (hi - lo) * w
                };
                Some((self.psi[i].ln(), p))
            })
            .collect();
        (col, clamped)
    }
}

pub fn trace_distribution<T: Scalar>(
    estimator: &ConditionalCdfEstimator<T>,
    base: &BasePoint<T>,
    grid: &ScaleGrid<T>,
) -> Result<EfficiencyDistribution<T>> {
    let psi = grid.psi();
    let columns: Vec<Vec<Option<T>>> = grid
        .lambda()
        .par_iter()
        .map(|&lam| {
            psi.iter()
                .map(|&p| {
                    let scale = p * lam;
                    let at = EvalPoint::new(lam * base.f0, scale * base.m0).ok()?;
                    estimator.conditional_cdf(scale * base.e0, at).ok()
                })
                .collect()
        })
        .collect();
    let n_lambda = grid.lambda().len();
    let mut cells = vec![None; psi.len() * n_lambda];
    for (j, col) in columns.into_iter().enumerate() {
        for (i, v) in col.into_iter().enumerate() {
            cells[i * n_lambda + j] = v;
        }
    }
    if cells.iter().all(Option::is_none) {
        return Err(Error::Estimation(
            "no local support anywhere on the scale grid".into(),
        ));
    }
    Ok(EfficiencyDistribution {
        psi: psi.to_vec(),
        lambda: grid.lambda().to_vec(),
        cells,
        monotonized: false,
    })
}

/// Isotonic regression of every column along `ψ` (missing cells skipped).
pub fn monotonize<T: Scalar>(dist: &EfficiencyDistribution<T>) -> EfficiencyDistribution<T> {
    let mut out = dist.clone();
    let n_lambda = dist.lambda.len();
    for j in 0..n_lambda {
        let present: Vec<usize> = (0..dist.psi.len())
            .filter(|&i| dist.get(i, j).is_some())
            .collect();
        let values: Vec<T> = present.iter().map(|&i| dist.get(i, j).unwrap()).collect();
        for (&i, v) in present.iter().zip(pava(&values)) {
            out.cells[i * n_lambda + j] = Some(v);
        }
    }
    out.monotonized = true;
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Edge {
    Lower,
    Upper,
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Edge::Lower => "lower",
            Edge::Upper => "upper",
        })
    }
}

/// Non-fatal estimation diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub enum Warning {
    /// Rank fell outside the traced column; `A_t` clamped to a grid endpoint.
    SupportEdge {
        period: Period,
        region: Option<String>,
        edge: Edge,
        rank: f64,
    },
    /// `F_t / f0` fell outside the λ grid; the edge column was used.
    LambdaOutsideGrid {
        period: Period,
        region: Option<String>,
        lambda: f64,
    },
    MissingCells {
        missing: usize,
        total: usize,
    },
    BaseOutsideSupport {
        f0: f64,
        m0: f64,
    },
    /// Several regions and no anchor region given; the first was used.
    AnchorRegionDefaulted {
        region: String,
    },
    UndefinedElasticity {
        period: Period,
        region: Option<String>,
    },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let key = |p: &Period, r: &Option<String>| match r {
            Some(r) => format!("{p}/{r}"),
            None => p.to_string(),
        };
        match self {
            Warning::SupportEdge {
                period,
                region,
                edge,
                rank,
            } => write!(
                f,
                "support edge at {}: rank {rank:.6} outside traced column, clamped to {edge} grid end",
                key(period, region)
            ),
            Warning::LambdaOutsideGrid {
                period,
                region,
                lambda,
            } => write!(
                f,
                "lambda {lambda:.6} at {} outside grid, edge column used",
                key(period, region)
            ),
            Warning::MissingCells { missing, total } => {
                write!(f, "{missing} of {total} distribution cells lack kernel support")
            }
            Warning::BaseOutsideSupport { f0, m0 } => write!(
                f,
                "base point (f0={f0}, m0={m0}) lies outside the convex hull of the panel support"
            ),
            Warning::AnchorRegionDefaulted { region } => {
                write!(f, "no anchor region given; normalized to first region {region}")
            }
            Warning::UndefinedElasticity { period, region } => {
                write!(f, "elasticity undefined at {} (fitted engagements <= 0)", key(period, region))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EfficiencyPoint<T> {
    pub period: Period,
    pub region: Option<String>,
    /// `G(E_t | F_t, M_t)`
    pub rank: T,
    pub lambda: T,
    /// `A_t / A0`
    pub a_raw: T,
    pub a_index: T,
    pub edge: Option<Edge>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EfficiencySeries<T> {
    pub points: Vec<EfficiencyPoint<T>>,
    pub warnings: Vec<Warning>,
}

impl<T: Scalar> EfficiencySeries<T> {
    pub fn a_raw(&self) -> Vec<T> {
        self.points.iter().map(|p| p.a_raw).collect()
    }

    pub fn a_index(&self) -> Vec<T> {
        self.points.iter().map(|p| p.a_index).collect()
    }

    pub fn clamped(&self) -> usize {
        self.points.iter().filter(|p| p.edge.is_some()).count()
    }
}

/// `ψ` at which a monotone column first exceeds `rank`, interpolated linearly
/// in `ln ψ`. On a flat stretch at exactly `rank` the right end is taken.
fn invert_column<T: Scalar>(col: &[(T, T)], rank: T) -> (T, Option<Edge>) {
    let (first, last) = (col[0], col[col.len() - 1]);
    if rank < first.1 {
        return (first.0, Some(Edge::Lower));
    }
    if rank > last.1 {
        return (last.0, Some(Edge::Upper));
    }
    match col.iter().position(|&(_, p)| p > rank) {
        Some(k) => {
            let (x0, p0) = col[k - 1];
            let (x1, p1) = col[k];
            (x0 + (x1 - x0) * (rank - p0) / (p1 - p0), None)
        }
        None => {
            // rank equals the column maximum: left end of the final plateau
            let k = col.iter().position(|&(_, p)| p >= rank).unwrap();
            (col[k].0, None)
        }
    }
}

/// Value of a monotone column at `ln ψ`, clamped at the grid ends.
fn eval_column<T: Scalar>(col: &[(T, T)], log_psi: T) -> T {
    if log_psi <= col[0].0 {
        return col[0].1;
    }
    let n = col.len();
    if log_psi >= col[n - 1].0 {
        return col[n - 1].1;
    }
    let k = col.partition_point(|&(x, _)| x <= log_psi);
    let (x0, p0) = col[k - 1];
    let (x1, p1) = col[k];
    if x0 == log_psi {
        return p0;
    }
    p0 + (p1 - p0) * (log_psi - x0) / (x1 - x0)
}

pub fn recover_efficiency<T: Scalar>(
    estimator: &ConditionalCdfEstimator<T>,
    dist: &EfficiencyDistribution<T>,
    panel: &MarketPanel,
    base: &BasePoint<T>,
) -> Result<EfficiencySeries<T>> {
    if !dist.is_monotonized() {
        return Err(Error::param(
            "distribution",
            "must be monotonized before inversion",
        ));
    }
    let results: Vec<Result<(EfficiencyPoint<T>, Vec<Warning>)>> = panel
        .observations()
        .par_iter()
        .map(|obs| {
            let mut warnings = Vec::new();
            let rank = estimator.conditional_cdf(obs.e(), EvalPoint::of(obs))?;
            let lambda = obs.f::<T>() / base.f0;
            let (col, lambda_clamped) = dist.column_at(lambda);
            if lambda_clamped {
                warnings.push(Warning::LambdaOutsideGrid {
                    period: obs.period,
                    region: obs.region.clone(),
                    lambda: lambda.to_f64_lossy(),
                });
            }
            if col.is_empty() {
                return Err(Error::Estimation(format!(
                    "no supported distribution cells for {}",
                    obs.period
                )));
            }
            let (log_psi, edge) = invert_column(&col, rank);
            if let Some(edge) = edge {
                warnings.push(Warning::SupportEdge {
                    period: obs.period,
                    region: obs.region.clone(),
                    edge,
                    rank: rank.to_f64_lossy(),
                });
            }
            let a_raw = log_psi.exp();
            Ok((
                EfficiencyPoint {
                    period: obs.period,
                    region: obs.region.clone(),
                    rank,
                    lambda,
                    a_raw,
                    a_index: T::lit(100.0) * a_raw,
                    edge,
                },
                warnings,
            ))
        })
        .collect();

    let mut points = Vec::with_capacity(results.len());
    let mut warnings = Vec::new();
    let missing = dist.missing_cells();
    if missing > 0 {
        warnings.push(Warning::MissingCells {
            missing,
            total: dist.psi.len() * dist.lambda.len(),
        });
    }
    if !base.inside_support(panel) {
        warnings.push(Warning::BaseOutsideSupport {
            f0: base.f0.to_f64_lossy(),
            m0: base.m0.to_f64_lossy(),
        });
    }
    for r in results {
        let (p, w) = r?;
        points.push(p);
        warnings.extend(w);
    }
    Ok(EfficiencySeries { points, warnings })
}

/// Rescales `a_index` so that the anchor observation is exactly 100.
pub fn normalize_index<T: Scalar>(
    series: &EfficiencySeries<T>,
    anchor: &Anchor,
) -> Result<EfficiencySeries<T>> {
    let matches: Vec<&EfficiencyPoint<T>> = series
        .points
        .iter()
        .filter(|p| {
            p.period == anchor.period && (anchor.region.is_none() || p.region == anchor.region)
        })
        .collect();
    let reference = match matches.as_slice() {
        [one] => one.a_raw,
        [] => return Err(Error::MissingAnchor(anchor.to_string())),
        _ => {
            return Err(Error::MissingAnchor(format!(
                "{anchor} (ambiguous: several regions share the period; name one)"
            )))
        }
    };
    let mut out = series.clone();
    for p in out.points.iter_mut() {
        p.a_index = T::lit(100.0) * (p.a_raw / reference);
    }
    Ok(out)
}

/// Normalizes each region separately so its own `period` value is 100.
pub fn normalize_per_region<T: Scalar>(
    series: &EfficiencySeries<T>,
    period: Period,
) -> Result<EfficiencySeries<T>> {
    let mut out = series.clone();
    let mut regions: Vec<Option<String>> = series.points.iter().map(|p| p.region.clone()).collect();
    regions.sort();
    regions.dedup();
    for region in regions {
        let reference = series
            .points
            .iter()
            .find(|p| p.period == period && p.region == region)
            .map(|p| p.a_raw)
            .ok_or_else(|| Error::MissingAnchor(Anchor::new(period, region.clone()).to_string()))?;
        for p in out.points.iter_mut().filter(|p| p.region == region) {
            p.a_index = T::lit(100.0) * (p.a_raw / reference);
        }
    }
    Ok(out)
}

/// Recovered `m(a·F, M)` with `a` in units of the base efficiency: the
/// engagement quantile at `(f, m)` of the rank that `a` has in the traced
/// distribution at `λ = f / f0`. Nondecreasing in `a` for fixed `(f, m)`.
pub fn matches_at<T: Scalar>(
    estimator: &ConditionalCdfEstimator<T>,
    dist: &EfficiencyDistribution<T>,
    base: &BasePoint<T>,
    a: T,
    f: T,
    m: T,
) -> Result<T> {
    if !(a > T::zero() && a.is_finite()) {
        return Err(Error::param(
            "a",
            format!("{a} must be positive and finite"),
        ));
    }
    let (col, _) = dist.column_at(f / base.f0);
    if col.is_empty() {
        return Err(Error::Estimation("no supported distribution cells".into()));
    }
    let probability = eval_column(&col, a.ln());
    estimator.conditional_quantile(probability, EvalPoint::new(f, m)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfacePoint<T> {
    pub period: Period,
    pub region: Option<String>,
    /// `A_t·F_t` in units of `A0`.
    pub effective_input: T,
    pub males: T,
    /// Recovered `m(A_t F_t, M_t)`.
    pub matches: T,
    pub observed: T,
    /// `F(A_t | F_t)` read back from the traced distribution.
    pub probability: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchingSurface<T> {
    pub points: Vec<SurfacePoint<T>>,
    /// False when some point is dominated in both inputs by a point with fewer matches.
    pub monotone: bool,
}

pub fn recover_surface<T: Scalar>(
    estimator: &ConditionalCdfEstimator<T>,
    dist: &EfficiencyDistribution<T>,
    series: &EfficiencySeries<T>,
    panel: &MarketPanel,
) -> Result<MatchingSurface<T>> {
    if series.points.len() != panel.len() {
        return Err(Error::param(
            "series",
            "must come from the same panel as the surface",
        ));
    }
    let points = panel
        .observations()
        .par_iter()
        .zip(series.points.par_iter())
        .map(|(obs, pt)| {
            let (col, _) = dist.column_at(pt.lambda);
            let probability = eval_column(&col, pt.a_raw.ln());
            let matches = estimator.conditional_quantile(probability, EvalPoint::of(obs))?;
            Ok(SurfacePoint {
                period: obs.period,
                region: obs.region.clone(),
                effective_input: pt.a_raw * obs.f::<T>(),
                males: obs.m(),
                matches,
                observed: obs.e(),
                probability,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = points.iter().all(|a| {
        points.iter().all(|b| {
            !(a.effective_input <= b.effective_input && a.males <= b.males && a.matches > b.matches)
        })
    });
    Ok(MatchingSurface { points, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_grid_contains_unit() {
        let g = geometric_with_unit(0.3f64, 5.0, 10);
        assert_eq!(g.len(), 11);
        assert!(g.contains(&1.0));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!((g[0] - 0.3).abs() < 1e-12 && (g[10] - 5.0).abs() < 1e-12);
        let g = geometric_with_unit(2.0f64, 5.0, 4);
        assert_eq!(g.len(), 4);
    }

    #[test]
    fn grid_validation() {
        assert!(ScaleGrid::new(vec![1.0f64, 2.0], vec![0.5, 1.0]).is_ok());
        assert!(ScaleGrid::new(vec![2.0f64, 1.0], vec![0.5, 1.0]).is_err());
        assert!(ScaleGrid::new(vec![0.0f64, 1.0], vec![0.5, 1.0]).is_err());
        assert!(ScaleGrid::new(vec![1.0f64], vec![0.5, 1.0]).is_err());
    }

    #[test]
    fn inversion_rules() {
        let col = vec![(0.0f64, 0.0), (1.0, 0.0), (2.0, 0.5), (3.0, 1.0)];
        // flat zero stretch: right end
        assert_eq!(invert_column(&col, 0.0), (1.0, None));
        assert_eq!(invert_column(&col, 0.25), (1.5, None));
        assert_eq!(invert_column(&col, 1.0), (3.0, None));
        let col = vec![(0.0f64, 0.2), (1.0, 0.6)];
        assert_eq!(invert_column(&col, 0.1), (0.0, Some(Edge::Lower)));
        assert_eq!(invert_column(&col, 0.7), (1.0, Some(Edge::Upper)));
    }

    #[test]
    fn eval_inverts_invert() {
        let col = vec![(0.0f64, 0.0), (1.0, 0.1), (2.0, 0.5), (3.0, 0.9)];
        for r in [0.05, 0.1, 0.3, 0.77] {
            let (x, _) = invert_column(&col, r);
            assert!((eval_column(&col, x) - r).abs() < 1e-15);
        }
        assert_eq!(eval_column(&col, -1.0), 0.0);
        assert_eq!(eval_column(&col, 9.0), 0.9);
    }

    #[test]
    fn hull_membership() {
        let hull = convex_hull(vec![
            (0.0, 0.0),
            (1.0, 0.0),
            (1.0, 1.0),
            (0.0, 1.0),
            (0.5, 0.5),
        ]);
        assert_eq!(hull.len(), 4);
        assert!(point_in_hull(&hull, (0.5, 0.5)));
        assert!(point_in_hull(&hull, (0.0, 0.0)));
        assert!(!point_in_hull(&hull, (1.5, 0.5)));
    }

    fn series(raw: &[f64]) -> EfficiencySeries<f64> {
        let start: Period = "2014-01".parse().unwrap();
        EfficiencySeries {
            points: raw
                .iter()
                .enumerate()
                .map(|(i, &a)| EfficiencyPoint {
                    period: start.plus_months(i as i64),
                    region: None,
                    rank: 0.5,
                    lambda: 1.0,
                    a_raw: a,
                    a_index: 100.0 * a,
                    edge: None,
                })
                .collect(),
            warnings: vec![],
        }
    }

    #[test]
    fn normalization_cases() {
        let anchor = Anchor::new("2014-01".parse().unwrap(), None);
        let s = normalize_index(&series(&[0.37; 5]), &anchor).unwrap();
        assert!(s.a_index().iter().all(|&v| v == 100.0));

        let s = normalize_index(&series(&[0.7, 0.9, 1.4]), &anchor).unwrap();
        assert_eq!(s.points[0].a_index, 100.0);
        assert!((s.points[2].a_index - 200.0).abs() < 1e-12);

        let missing = Anchor::new("2010-01".parse().unwrap(), None);
        assert!(matches!(
            normalize_index(&series(&[1.0]), &missing),
            Err(Error::MissingAnchor(_))
        ));
    }
}
