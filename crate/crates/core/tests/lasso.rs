use matchfn::elasticity::lasso::{
    cross_validate, fit_columns, kkt_violation, lambda_max, SolverOptions,
};
use matchfn::elasticity::{
    elasticity_at, lasso_fit, quadratic_features, Design, LassoOptions, Penalty, RegressionForm,
    FEATURES,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample(seed: u64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..n).map(|_| rng.random_range(50.0..150.0)).collect();
    let y = (0..n).map(|_| rng.random_range(80.0..200.0)).collect();
    (x, y)
}

fn cobb_douglas(x: &[f64], y: &[f64], noise_seed: Option<u64>) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed.unwrap_or(0));
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let eps = if noise_seed.is_some() {
                rng.random_range(-0.02..0.02)
            } else {
                0.0
            };
            a.powf(0.6) * b.powf(0.4) * (1.0 + eps)
        })
        .collect()
}

/// Ordinary least squares on raw quadratic features with an intercept.
fn least_squares(x: &[f64], y: &[f64], target: &[f64]) -> Vec<f64> {
    let n = x.len();
    let a = DMatrix::from_fn(n, FEATURES + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            quadratic_features(x[i], y[i])[j - 1]
        }
    });
    let b = DVector::from_column_slice(target);
    let svd = a.svd(true, true);
    svd.solve(&b, 1e-14).unwrap().iter().copied().collect()
}

#[test]
fn zero_penalty_matches_least_squares() {
    let (x, y) = sample(1, 60);
    let e = cobb_douglas(&x, &y, Some(9));
    let fit = lasso_fit(
        &x,
        &y,
        &e,
        &LassoOptions {
            penalty: Penalty::Fixed(0.0),
            ..Default::default()
        },
    )
    .unwrap();
    let ols = least_squares(&x, &y, &e);
    let raw = fit.raw_coefficients();
    for (i, (&x_i, &y_i)) in x.iter().zip(&y).enumerate().take(10) {
        let f = quadratic_features(x_i, y_i);
        let pred_ols = ols[0] + (0..FEATURES).map(|j| ols[j + 1] * f[j]).sum::<f64>();
        assert!(
            (fit.predict_raw(x_i, y_i) - pred_ols).abs() < 1e-6,
            "row {i}"
        );
    }
    for j in 0..FEATURES {
        let tol = 1e-6 * ols[j + 1].abs().max(1.0);
        assert!(
            (raw[j] - ols[j + 1]).abs() < tol,
            "coef {j}: {} vs {}",
            raw[j],
            ols[j + 1]
        );
    }
    assert!(fit.kkt_residual <= 1e-8);
}

#[test]
fn penalty_at_lambda_max_zeroes_slopes() {
    let (x, y) = sample(2, 40);
    let e = cobb_douglas(&x, &y, Some(3));
    let design = Design::build(&x, &y).unwrap();
    let lmax = lambda_max(design.columns(), &e);
    for lambda in [lmax, lmax * 1.5] {
        let sol = fit_columns(design.columns(), &e, lambda, &SolverOptions::default()).unwrap();
        assert!(
            sol.coefficients.iter().all(|&b| b == 0.0),
            "{:?}",
            sol.coefficients
        );
        let mean = e.iter().sum::<f64>() / e.len() as f64;
        assert!((sol.intercept - mean).abs() < 1e-9);
    }
    let sol = fit_columns(design.columns(), &e, lmax * 0.9, &SolverOptions::default()).unwrap();
    assert!(sol.coefficients.iter().any(|&b| b != 0.0));
}

#[test]
fn kkt_and_monotone_objective_along_path() {
    let (x, y) = sample(4, 80);
    let e = cobb_douglas(&x, &y, Some(5));
    let design = Design::build(&x, &y).unwrap();
    let lmax = lambda_max(design.columns(), &e);
    for k in 0..12 {
        let lambda = lmax * 0.5f64.powi(k);
        {
            let sol = fit_columns(design.columns(), &e, lambda, &SolverOptions::default()).unwrap();
            assert!(
                sol.kkt_residual <= 1e-8,
                "lambda {lambda}: kkt {}",
                sol.kkt_residual
            );
            for w in sol.objective_history.windows(2) {
                assert!(w[1] <= w[0], "objective rose: {} -> {}", w[0], w[1]);
            }
            // independent KKT recomputation from residuals
            let n = e.len() as f64;
            let resid: Vec<f64> = (0..e.len())
                .map(|i| {
                    e[i] - sol.intercept
                        - (0..FEATURES)
                            .map(|j| sol.coefficients[j] * design.columns()[j][i])
                            .sum::<f64>()
                })
                .collect();
            let grad: Vec<f64> = (0..FEATURES)
                .map(|j| {
                    design.columns()[j]
                        .iter()
                        .zip(&resid)
                        .map(|(a, r)| a * r)
                        .sum::<f64>()
                        / n
                })
                .collect();
            assert!(kkt_violation(&grad, &sol.coefficients, lambda) <= 1e-8);
        }
    }
}

#[test]
fn plain_coordinate_descent_is_monotone_or_reports_stall() {
    let (x, y) = sample(4, 80);
    let e = cobb_douglas(&x, &y, Some(5));
    let design = Design::build(&x, &y).unwrap();
    let lmax = lambda_max(design.columns(), &e);
    let opts = SolverOptions {
        active_set_refinement: false,
        max_sweeps: 100_000,
        ..Default::default()
    };
    let mut converged = 0;
    for k in 0..12 {
        match fit_columns(design.columns(), &e, lmax * 0.5f64.powi(k), &opts) {
            Ok(sol) => {
                converged += 1;
                assert!(sol.kkt_residual <= 1e-10);
                assert!(sol.objective_history.windows(2).all(|w| w[1] <= w[0]));
            }
            Err(matchfn::Error::NonConvergence { objective, kkt, .. }) => {
                assert!(objective.is_finite() && kkt > 1e-10);
            }
            Err(other) => panic!("{other}"),
        }
    }
    assert!(converged > 0);
}

#[test]
fn planted_quadratic_recovered() {
    let (x, y) = sample(6, 100);
    let planted = [3.0, -1.5, 0.02, -0.01, 0.004];
    let intercept = 12.0;
    let e: Vec<f64> = x
        .iter()
        .zip(&y)
        .map(|(&a, &b)| {
            let f = quadratic_features(a, b);
            intercept + (0..FEATURES).map(|j| planted[j] * f[j]).sum::<f64>()
        })
        .collect();
    let fit = lasso_fit(
        &x,
        &y,
        &e,
        &LassoOptions {
            penalty: Penalty::Fixed(1e-9),
            ..Default::default()
        },
    )
    .unwrap();
    let raw = fit.raw_coefficients();
    for j in 0..FEATURES {
        assert!(
            (raw[j] - planted[j]).abs() < 1e-3,
            "coef {j}: {} vs {}",
            raw[j],
            planted[j]
        );
    }
    assert!((fit.raw_intercept() - intercept).abs() < 1e-3);
}

#[test]
fn destandardized_predictions_agree() {
    let (x, y) = sample(7, 50);
    let e = cobb_douglas(&x, &y, Some(8));
    let fit = lasso_fit(
        &x,
        &y,
        &e,
        &LassoOptions {
            penalty: Penalty::Fixed(0.05),
            ..Default::default()
        },
    )
    .unwrap();
    for i in 0..x.len() {
        assert!((fit.predict_raw(x[i], y[i]) - fit.predict_standardized(x[i], y[i])).abs() < 1e-10);
    }
}

fn finite_difference_check(form: RegressionForm, seed: u64) {
    let (x, y) = sample(seed, 80);
    let e = cobb_douglas(&x, &y, Some(seed + 1));
    let opts = LassoOptions {
        penalty: Penalty::Fixed(0.01),
        form,
        ..Default::default()
    };
    let fit = lasso_fit(&x, &y, &e, &opts).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
    let h: f64 = 1e-4;
    for _ in 0..100 {
        let af: f64 = rng.random_range(60.0..140.0);
        let m: f64 = rng.random_range(90.0..190.0);
        let level = fit.fitted_engagements(af, m);
        let (ef, em) = elasticity_at(&fit, af, m, level).unwrap();
        let ln_e = |a: f64, b: f64| fit.fitted_engagements(a, b).ln();
        let fd_f = (ln_e(af * h.exp(), m) - ln_e(af * (-h).exp(), m)) / (2.0 * h);
        let fd_m = (ln_e(af, m * h.exp()) - ln_e(af, m * (-h).exp())) / (2.0 * h);
        assert!((ef - fd_f).abs() < 1e-4, "{ef} vs {fd_f}");
        assert!((em - fd_m).abs() < 1e-4, "{em} vs {fd_m}");
    }
}

#[test]
fn analytic_elasticities_match_finite_differences() {
    finite_difference_check(RegressionForm::Levels, 10);
    finite_difference_check(RegressionForm::LogLog, 20);
}

#[test]
fn zero_penalty_elasticities_are_unit_free() {
    let (x, y) = sample(12, 70);
    let e = cobb_douglas(&x, &y, Some(13));
    let opts = LassoOptions {
        penalty: Penalty::Fixed(0.0),
        ..Default::default()
    };
    let fit = lasso_fit(&x, &y, &e, &opts).unwrap();
    let x_k: Vec<f64> = x.iter().map(|v| v * 1000.0).collect();
    let fit_k = lasso_fit(&x_k, &y, &e, &opts).unwrap();
    for i in 0..x.len() {
        let a = elasticity_at(&fit, x[i], y[i], fit.fitted_engagements(x[i], y[i])).unwrap();
        let b =
            elasticity_at(&fit_k, x_k[i], y[i], fit_k.fitted_engagements(x_k[i], y[i])).unwrap();
        assert!((a.0 - b.0).abs() < 1e-6 && (a.1 - b.1).abs() < 1e-6);
    }
}

#[test]
fn cross_validation_picks_grid_minimum() {
    let (x, y) = sample(14, 60);
    let e = cobb_douglas(&x, &y, Some(15));
    let design = Design::build(&x, &y).unwrap();
    let report = cross_validate(design.columns(), &e, 5, 50, &SolverOptions::default()).unwrap();
    assert_eq!(report.penalties.len(), 50);
    let min = report.errors.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(report.errors[report.selected], min);
    assert!(report.errors[..report.selected].iter().all(|&v| v > min));
    let fit = lasso_fit(&x, &y, &e, &LassoOptions::default()).unwrap();
    assert_eq!(fit.penalty, report.penalties[report.selected]);
    assert!(cross_validate(design.columns(), &e, 1, 50, &SolverOptions::default()).is_err());
}

#[test]
fn constant_inputs_give_constant_elasticities() {
    let (x, y) = sample(16, 30);
    let e = cobb_douglas(&x, &y, None);
    let fit = lasso_fit(
        &x,
        &y,
        &e,
        &LassoOptions {
            penalty: Penalty::Fixed(0.0),
            ..Default::default()
        },
    )
    .unwrap();
    let level = fit.fitted_engagements(100.0, 120.0);
    let first = elasticity_at(&fit, 100.0, 120.0, level).unwrap();
    for _ in 0..5 {
        assert_eq!(elasticity_at(&fit, 100.0, 120.0, level).unwrap(), first);
    }
}
