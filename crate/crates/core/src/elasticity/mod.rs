//! Quadratic LASSO projection of engagements on effective female input and
//! male users, and the pointwise elasticities of the fitted surface.

mod design;
pub mod lasso;

pub use design::{quadratic_features, Design, FEATURES, FEATURE_NAMES};
pub use lasso::{CvReport, Penalty, Solution, SolverOptions};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::panel::Period;
use crate::scalar::Scalar;

/// Scale on which the quadratic surface is fitted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RegressionForm {
    /// `E` on a quadratic in `(AF, M)`.
    #[default]
    Levels,
    /// `ln E` on a quadratic in `(ln AF, ln M)`.
    LogLog,
}

/// Level used in the `AF/E` factor of a levels-form elasticity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Denominator {
    #[default]
    Fitted,
    Observed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LassoOptions<T> {
    pub penalty: Penalty<T>,
    pub solver: SolverOptions<T>,
    pub form: RegressionForm,
}

impl<T: Scalar> Default for LassoOptions<T> {
    fn default() -> Self {
        LassoOptions {
            penalty: Penalty::default(),
            solver: SolverOptions::default(),
            form: RegressionForm::default(),
        }
    }
}

/// A fitted quadratic surface together with its standardization.
#[derive(Clone, Debug, PartialEq)]
pub struct LassoFit<T> {
    pub form: RegressionForm,
    /// Coefficients on standardized features, ordered as [`FEATURE_NAMES`].
    pub coefficients: [T; FEATURES],
    pub intercept: T,
    pub penalty: T,
    pub sweeps: usize,
    pub objective: T,
    pub objective_history: Vec<T>,
    pub kkt_residual: T,
    pub means: [T; FEATURES],
    pub sds: [T; FEATURES],
    pub cv: Option<CvReport<T>>,
}

impl<T: Scalar> LassoFit<T> {
    /// Coefficients in raw feature units.
    pub fn raw_coefficients(&self) -> [T; FEATURES] {
        std::array::from_fn(|j| self.coefficients[j] / self.sds[j])
    }

    pub fn raw_intercept(&self) -> T {
        self.intercept
            - (0..FEATURES)
                .map(|j| self.coefficients[j] * self.means[j] / self.sds[j])
                .sum::<T>()
    }

    fn coordinates(&self, af: T, m: T) -> (T, T) {
        match self.form {
            RegressionForm::Levels => (af, m),
            RegressionForm::LogLog => (af.ln(), m.ln()),
        }
    }

    /// Fitted response on the regression scale, using standardized features.
    pub fn predict_standardized(&self, af: T, m: T) -> T {
        let (x, y) = self.coordinates(af, m);
        let raw = quadratic_features(x, y);
        self.intercept
            + (0..FEATURES)
                .map(|j| self.coefficients[j] * (raw[j] - self.means[j]) / self.sds[j])
                .sum::<T>()
    }

    /// Fitted response on the regression scale, using raw coefficients.
    pub fn predict_raw(&self, af: T, m: T) -> T {
        let (x, y) = self.coordinates(af, m);
        let raw = quadratic_features(x, y);
        let b = self.raw_coefficients();
        self.raw_intercept() + (0..FEATURES).map(|j| b[j] * raw[j]).sum::<T>()
    }

    /// Fitted engagements `Ê` at `(AF, M)`.
    pub fn fitted_engagements(&self, af: T, m: T) -> T {
        let v = self.predict_raw(af, m);
        match self.form {
            RegressionForm::Levels => v,
            RegressionForm::LogLog => v.exp(),
        }
    }

    /// Partial derivatives of the regression-scale response in its two coordinates.
    pub fn gradient(&self, af: T, m: T) -> (T, T) {
        let (x, y) = self.coordinates(af, m);
        let b = self.raw_coefficients();
        let two = T::lit(2.0);
        (
            b[0] + two * b[2] * x + b[3] * y,
            b[1] + b[3] * x + two * b[4] * y,
        )
    }
}

/// Fits the quadratic surface of `engagements` on `(af, m)`.
pub fn lasso_fit<T: Scalar>(
    af: &[T],
    m: &[T],
    engagements: &[T],
    options: &LassoOptions<T>,
) -> Result<LassoFit<T>> {
    if af.len() != m.len() || af.len() != engagements.len() {
        return Err(Error::param("elasticity inputs", "series lengths differ"));
    }
    let (x, y, target): (Vec<T>, Vec<T>, Vec<T>) = match options.form {
        RegressionForm::Levels => (af.to_vec(), m.to_vec(), engagements.to_vec()),
        RegressionForm::LogLog => {
            let mut x = Vec::new();
            let mut y = Vec::new();
            let mut t = Vec::new();
            for i in 0..af.len() {
                if af[i] > T::zero() && m[i] > T::zero() && engagements[i] > T::zero() {
                    x.push(af[i].ln());
                    y.push(m[i].ln());
                    t.push(engagements[i].ln());
                }
            }
            (x, y, t)
        }
    };
    if x.iter().chain(&y).any(|v| !v.is_finite()) {
        return Err(Error::param("elasticity inputs", "AF and M must be finite"));
    }
    if options.form == RegressionForm::Levels && x.iter().chain(&y).any(|&v| v <= T::zero()) {
        return Err(Error::param(
            "elasticity inputs",
            "AF and M must be positive",
        ));
    }
    let design = Design::build(&x, &y)?;
    let (penalty, cv) = match options.penalty {
        Penalty::Fixed(p) => (p, None),
        Penalty::CrossValidated { folds, grid_points } => {
            let report = lasso::cross_validate(
                design.columns(),
                &target,
                folds,
                grid_points,
                &options.solver,
            )?;
            (report.penalties[report.selected], Some(report))
        }
    };
    let sol = lasso::fit_columns(design.columns(), &target, penalty, &options.solver)?;
    Ok(LassoFit {
        form: options.form,
        coefficients: std::array::from_fn(|j| sol.coefficients[j]),
        intercept: sol.intercept,
        penalty: sol.penalty,
        sweeps: sol.sweeps,
        objective: sol.objective,
        objective_history: sol.objective_history,
        kkt_residual: sol.kkt_residual,
        means: *design.means(),
        sds: *design.sds(),
        cv,
    })
}

/// `(d ln m/d ln AF, d ln m/d ln M)` at one point. `level` is the engagement
/// level in the `AF/E` factor and must be positive.
pub fn elasticity_at<T: Scalar>(fit: &LassoFit<T>, af: T, m: T, level: T) -> Result<(T, T)> {
    if !(level > T::zero()) || !level.is_finite() {
        return Err(Error::UndefinedElasticity(level.to_f64_lossy()));
    }
    let (gx, gy) = fit.gradient(af, m);
    let out = match fit.form {
        RegressionForm::Levels => (gx * af / level, gy * m / level),
        RegressionForm::LogLog => (gx, gy),
    };
    if out.0.is_finite() && out.1.is_finite() {
        Ok(out)
    } else {
        Err(Error::UndefinedElasticity(level.to_f64_lossy()))
    }
}

/// One input row of [`elasticity_series`].
#[derive(Clone, Debug, PartialEq)]
pub struct ElasticityInput<T> {
    pub period: Period,
    pub region: Option<String>,
    pub af: T,
    pub m: T,
    pub engagements: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElasticityPoint<T> {
    pub period: Period,
    pub region: Option<String>,
    pub e_fitted: T,
    /// `None` where the elasticity is undefined.
    pub eps_f: Option<T>,
    pub eps_m: Option<T>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ElasticitySeries<T> {
    pub points: Vec<ElasticityPoint<T>>,
}

impl<T: Scalar> ElasticitySeries<T> {
    pub fn missing(&self) -> usize {
        self.points.iter().filter(|p| p.eps_f.is_none()).count()
    }

    /// Means of `eps_f` and `eps_m` over defined points.
    pub fn means(&self) -> Option<(T, T)> {
        let defined: Vec<(T, T)> = self
            .points
            .iter()
            .filter_map(|p| Some((p.eps_f?, p.eps_m?)))
            .collect();
        if defined.is_empty() {
            return None;
        }
        let n = T::from_len(defined.len());
        Some((
            defined.iter().map(|d| d.0).sum::<T>() / n,
            defined.iter().map(|d| d.1).sum::<T>() / n,
        ))
    }
}

pub fn elasticity_series<T: Scalar>(
    fit: &LassoFit<T>,
    rows: &[ElasticityInput<T>],
    denominator: Denominator,
) -> ElasticitySeries<T> {
    let points = rows
        .par_iter()
        .map(|row| {
            let e_fitted = fit.fitted_engagements(row.af, row.m);
            let level = match denominator {
                Denominator::Fitted => e_fitted,
                Denominator::Observed => row.engagements,
            };
            let eps = elasticity_at(fit, row.af, row.m, level).ok();
            ElasticityPoint {
                period: row.period,
                region: row.region.clone(),
                e_fitted,
                eps_f: eps.map(|e| e.0),
                eps_m: eps.map(|e| e.1),
            }
        })
        .collect();
    ElasticitySeries { points }
}
