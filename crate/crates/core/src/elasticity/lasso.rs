//! L1-penalized least squares by cyclic coordinate descent.
//!
//! Minimizes `(1/2n)·Σ(y − b0 − Xb)² + λ·Σ|b_j|` with an unpenalized
//! intercept. Each sweep updates every coordinate by soft-thresholding and
//! then tries an exact solve on the current active set with the current
//! signs, kept only when it does not raise the objective. The solve step makes
//! ill-conditioned quadratic designs converge in a handful of sweeps.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_MAX_SWEEPS: usize = 10_000;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
/// A solve that stops improving is accepted when its KKT residual is below
/// this many machine epsilons relative to `λ_max`.
const STALL_EPSILONS: f64 = 1e4;
pub const DEFAULT_CV_FOLDS: usize = 5;
pub const DEFAULT_CV_GRID: usize = 50;
/// Smallest grid penalty as a fraction of `λ_max`.
pub const CV_GRID_RATIO: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Penalty<T> {
    Fixed(T),
    /// k-fold CV over a geometric grid from `λ_max` down to `λ_max·1e-3`.
    CrossValidated {
        folds: usize,
        grid_points: usize,
    },
}

impl<T> Default for Penalty<T> {
    fn default() -> Self {
        Penalty::CrossValidated {
            folds: DEFAULT_CV_FOLDS,
            grid_points: DEFAULT_CV_GRID,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions<T> {
    pub max_sweeps: usize,
    /// Stop once the largest KKT violation is at most this.
    pub tolerance: T,
    /// Exact active-set refinement after each sweep.
    pub active_set_refinement: bool,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        SolverOptions {
            max_sweeps: DEFAULT_MAX_SWEEPS,
            tolerance: T::lit(DEFAULT_TOLERANCE),
            active_set_refinement: true,
        }
    }
}

/// Solution of one penalized problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution<T> {
    pub coefficients: Vec<T>,
    pub intercept: T,
    pub penalty: T,
    pub sweeps: usize,
    pub objective: T,
    /// Objective after every sweep, starting with the initial point.
    pub objective_history: Vec<T>,
    pub kkt_residual: T,
}

/// Centered least-squares problem over a subset of rows.
struct Problem<T> {
    n: usize,
    columns: Vec<Vec<T>>,
    y: Vec<T>,
    x_means: Vec<T>,
    y_mean: T,
    gram: Vec<Vec<T>>,
    xty: Vec<T>,
}

impl<T: Scalar> Problem<T> {
    fn new(columns: &[Vec<T>], y: &[T], rows: &[usize]) -> Self {
        let n = rows.len();
        let nt = T::from_len(n);
        let y_mean = rows.iter().map(|&i| y[i]).sum::<T>() / nt;
        let yc: Vec<T> = rows.iter().map(|&i| y[i] - y_mean).collect();
        let mut x_means = Vec::with_capacity(columns.len());
        let mut centered = Vec::with_capacity(columns.len());
        for col in columns {
            let mean = rows.iter().map(|&i| col[i]).sum::<T>() / nt;
            x_means.push(mean);
            centered.push(rows.iter().map(|&i| col[i] - mean).collect::<Vec<T>>());
        }
        let p = columns.len();
        let gram = (0..p)
            .map(|a| {
                (0..p)
                    .map(|b| {
                        centered[a]
                            .iter()
                            .zip(&centered[b])
                            .map(|(&u, &v)| u * v)
                            .sum::<T>()
                            / nt
                    })
                    .collect()
            })
            .collect();
        let xty = centered
            .iter()
            .map(|c| c.iter().zip(&yc).map(|(&u, &v)| u * v).sum::<T>() / nt)
            .collect();
        Problem {
            n,
            columns: centered,
            y: yc,
            x_means,
            y_mean,
            gram,
            xty,
        }
    }

    fn objective(&self, beta: &[T], lambda: T) -> T {
        let mut rss = T::zero();
        for i in 0..self.n {
            let fit: T = beta.iter().zip(&self.columns).map(|(&b, c)| b * c[i]).sum();
            let r = self.y[i] - fit;
            rss = rss + r * r;
        }
        rss / (T::lit(2.0) * T::from_len(self.n)) + lambda * beta.iter().map(|b| b.abs()).sum::<T>()
    }

    /// `(1/n)·Xᵀ(y − Xb)`
    fn gradient(&self, beta: &[T]) -> Vec<T> {
        (0..beta.len())
            .map(|j| {
                self.xty[j]
                    - self.gram[j]
                        .iter()
                        .zip(beta)
                        .map(|(&g, &b)| g * b)
                        .sum::<T>()
            })
            .collect()
    }

    fn kkt_residual(&self, beta: &[T], lambda: T) -> T {
        kkt_violation(&self.gradient(beta), beta, lambda)
    }

    fn intercept(&self, beta: &[T]) -> T {
        self.y_mean
            - beta
                .iter()
                .zip(&self.x_means)
                .map(|(&b, &m)| b * m)
                .sum::<T>()
    }

    fn lambda_max(&self) -> T {
        self.xty.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }
}

/// Largest violation of the subgradient optimality conditions.
pub fn kkt_violation<T: Scalar>(gradient: &[T], beta: &[T], lambda: T) -> T {
    gradient
        .iter()
        .zip(beta)
        .map(|(&g, &b)| {
            if b != T::zero() {
                (g - lambda * b.signum()).abs()
            } else {
                (g.abs() - lambda).max(T::zero())
            }
        })
        .fold(T::zero(), T::max)
}

pub fn soft_threshold<T: Scalar>(z: T, gamma: T) -> T {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        T::zero()
    }
}

/// Gaussian elimination with partial pivoting; `None` if singular.
#[allow(clippy::needless_range_loop)]
fn solve_dense<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let pivot =
            (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() <= T::epsilon() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] = a[row][k] - factor * a[col][k];
            }
            b[row] = b[row] - factor * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let s: T = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn solve<T0: Scalar>(
    problem: &Problem<T0>,
    lambda: T0,
    warm: Option<&[T0]>,
    opts: &SolverOptions<T0>,
) -> Result<Solution<T0>> {
    let p = problem.gram.len();
    let mut beta = warm
        .map(<[T0]>::to_vec)
        .unwrap_or_else(|| vec![T0::zero(); p]);
    let mut objective = problem.objective(&beta, lambda);
    let mut history = vec![objective];
    let mut kkt = problem.kkt_residual(&beta, lambda);
    let mut sweeps = 0;
    while kkt > opts.tolerance {
        if sweeps == opts.max_sweeps {
            return Err(Error::NonConvergence {
                sweeps,
                objective: objective.to_f64_lossy(),
                kkt: kkt.to_f64_lossy(),
            });
        }
        sweeps += 1;
        let previous = (beta.clone(), objective);
        for j in 0..p {
            let gjj = problem.gram[j][j];
            if gjj <= T0::zero() {
                beta[j] = T0::zero();
                continue;
            }
            let partial: T0 = (0..p)
                .filter(|&k| k != j)
                .map(|k| problem.gram[j][k] * beta[k])
                .sum();
            beta[j] = soft_threshold(problem.xty[j] - partial, lambda) / gjj;
        }
        objective = problem.objective(&beta, lambda);

        if opts.active_set_refinement {
            if let Some(candidate) = refine_active_set(problem, &beta, lambda) {
                let cand_obj = problem.objective(&candidate, lambda);
                if cand_obj <= objective {
                    beta = candidate;
                    objective = cand_obj;
                }
            }
        }
        if objective > previous.1 || beta == previous.0 {
            // no further progress is possible at working precision
            (beta, objective) = previous;
            kkt = problem.kkt_residual(&beta, lambda);
            let floor =
                T0::epsilon() * T0::lit(STALL_EPSILONS) * problem.lambda_max().max(T0::one());
            if kkt > opts.tolerance.max(floor) {
                return Err(Error::NonConvergence {
                    sweeps,
                    objective: objective.to_f64_lossy(),
                    kkt: kkt.to_f64_lossy(),
                });
            }
            break;
        }
        history.push(objective);
        kkt = problem.kkt_residual(&beta, lambda);
    }
    Ok(Solution {
        intercept: problem.intercept(&beta),
        coefficients: beta,
        penalty: lambda,
        sweeps,
        objective,
        objective_history: history,
        kkt_residual: kkt,
    })
}

/// Stationary point of the smooth problem restricted to the active set with
/// fixed signs, if the signs survive.
fn refine_active_set<T: Scalar>(problem: &Problem<T>, beta: &[T], lambda: T) -> Option<Vec<T>> {
    let active: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != T::zero()).collect();
    if active.is_empty() {
        return None;
    }
    let a = active
        .iter()
        .map(|&r| active.iter().map(|&c| problem.gram[r][c]).collect())
        .collect();
    let b = active
        .iter()
        .map(|&j| problem.xty[j] - lambda * beta[j].signum())
        .collect();
    let sol = solve_dense(a, b)?;
    let mut out = vec![T::zero(); beta.len()];
    for (&j, v) in active.iter().zip(sol) {
        if v.signum() != beta[j].signum() || !v.is_finite() {
            return None;
        }
        out[j] = v;
    }
    Some(out)
}

/// Fits `y` on the given feature columns with a fixed penalty.
pub fn fit_columns<T: Scalar>(
    columns: &[Vec<T>],
    y: &[T],
    lambda: T,
    opts: &SolverOptions<T>,
) -> Result<Solution<T>> {
    check_inputs(columns, y)?;
    if !(lambda >= T::zero() && lambda.is_finite()) {
        return Err(Error::param(
            "penalty",
            format!("{lambda} must be finite and >= 0"),
        ));
    }
    let rows: Vec<usize> = (0..y.len()).collect();
    solve(&Problem::new(columns, y, &rows), lambda, None, opts)
}

fn check_inputs<T: Scalar>(columns: &[Vec<T>], y: &[T]) -> Result<()> {
    if columns.is_empty() || y.is_empty() {
        return Err(Error::Empty("lasso needs at least one feature and one row"));
    }
    if columns.iter().any(|c| c.len() != y.len()) {
        return Err(Error::param("design", "column length differs from target"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("target", "values must be finite"));
    }
    Ok(())
}

/// `max_j |x_jᵀ(y − ȳ)| / n` on centered columns: the smallest penalty with an all-zero solution.
pub fn lambda_max<T: Scalar>(columns: &[Vec<T>], y: &[T]) -> T {
    let rows: Vec<usize> = (0..y.len()).collect();
    Problem::new(columns, y, &rows).lambda_max()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvReport<T> {
    pub folds: usize,
    pub penalties: Vec<T>,
    /// Mean held-out squared error per penalty.
    pub errors: Vec<T>,
    pub selected: usize,
}

/// Contiguous fold boundaries.
fn fold_ranges(n: usize, k: usize) -> Vec<std::ops::Range<usize>> {
    (0..k).map(|f| (f * n / k)..((f + 1) * n / k)).collect()
}

pub fn geometric_penalties<T: Scalar>(lambda_max: T, points: usize) -> Vec<T> {
    let ratio = T::lit(CV_GRID_RATIO);
    if points == 1 {
        return vec![lambda_max];
    }
    let last = T::from_len(points - 1);
    (0..points)
        .map(|k| lambda_max * ratio.powf(T::from_len(k) / last))
        .collect()
}

/// Chooses the penalty minimizing mean held-out squared error.
pub fn cross_validate<T: Scalar>(
    columns: &[Vec<T>],
    y: &[T],
    folds: usize,
    grid_points: usize,
    opts: &SolverOptions<T>,
) -> Result<CvReport<T>> {
    check_inputs(columns, y)?;
    let n = y.len();
    if folds < 2 || folds > n {
        return Err(Error::param(
            "cv folds",
            format!("{folds} must be in 2..={n}"),
        ));
    }
    if grid_points == 0 {
        return Err(Error::param("cv grid", "needs at least one penalty"));
    }
    let lmax = lambda_max(columns, y);
    let penalties = geometric_penalties(lmax, grid_points);
    let mut errors = vec![T::zero(); penalties.len()];
    for range in fold_ranges(n, folds) {
        let train: Vec<usize> = (0..n).filter(|i| !range.contains(i)).collect();
        let problem = Problem::new(columns, y, &train);
        let mut warm: Option<Vec<T>> = None;
        for (k, &lambda) in penalties.iter().enumerate() {
            let sol = solve(&problem, lambda, warm.as_deref(), opts)?;
            let mut sse = T::zero();
            for i in range.clone() {
                let pred = sol.intercept
                    + sol
                        .coefficients
                        .iter()
                        .zip(columns)
                        .map(|(&b, c)| b * c[i])
                        .sum::<T>();
                sse = sse + (y[i] - pred) * (y[i] - pred);
            }
            errors[k] = errors[k] + sse / T::from_len(range.len()) / T::from_len(folds);
            warm = Some(sol.coefficients);
        }
    }
    let mut selected = 0;
    for k in 1..errors.len() {
        if errors[k] < errors[selected] {
            selected = k;
        }
    }
    Ok(CvReport {
        folds,
        penalties,
        errors,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0f64, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0f64, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5f64, 1.0), 0.0);
    }

    #[test]
    fn dense_solver() {
        let a = vec![vec![2.0f64, 1.0], vec![1.0, 3.0]];
        let x = solve_dense(a, vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!(solve_dense(vec![vec![1.0f64, 2.0], vec![2.0, 4.0]], vec![1.0, 2.0]).is_none());
    }

    #[test]
    fn folds_cover_rows() {
        let f = fold_ranges(11, 5);
        assert_eq!(f.first().unwrap().start, 0);
        assert_eq!(f.last().unwrap().end, 11);
        assert!(f.windows(2).all(|w| w[0].end == w[1].start));
    }

    #[test]
    fn penalty_grid_endpoints() {
        let g = geometric_penalties(2.0f64, 50);
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 2.0);
        assert!((g[49] - 2e-3).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn non_convergence_reports_last_objective() {
        let cols = vec![vec![1.0f64, 2.0, 3.0, 4.0], vec![1.0, 2.0, 3.0, 4.1]];
        let y = vec![1.0, 2.0, 3.5, 3.9];
        let opts = SolverOptions {
            max_sweeps: 1,
            tolerance: 1e-14,
            active_set_refinement: false,
        };
        match fit_columns(&cols, &y, 0.0, &opts) {
            Err(Error::NonConvergence {
                sweeps, objective, ..
            }) => {
                assert_eq!(sweeps, 1);
                assert!(objective.is_finite());
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
