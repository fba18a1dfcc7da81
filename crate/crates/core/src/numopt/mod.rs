//! Shared numerical machinery: gamma function, weighted nonlinear least
//! squares (damped Gauss-Newton) and ordinary linear regression.

mod gamma;
mod models;

pub use gamma::gamma_fn;
pub(crate) use gamma::lanczos_gamma;
pub use models::{CurveModel, DecayingExp, Line, StretchedExp};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 200;
const GRADIENT_TOL: f64 = 1e-10;
const STEP_TOL: f64 = 1e-12;
const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e12;

/// Outcome of a least-squares fit.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub parameters: Vec<f64>,
    /// Covariance of the parameters: inverse of the weighted normal matrix
    /// at the optimum.
    pub covariance: Vec<Vec<f64>>,
    pub reduced_chi2: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    /// One-sigma parameter uncertainties, sqrt of the covariance diagonal.
    pub fn std_errors(&self) -> Vec<f64> {
        self.parameters
            .iter()
            .enumerate()
            .map(|(i, _)| self.covariance[i][i].max(0.0).sqrt())
            .collect()
    }
}

fn step_below_tol(delta: &DVector<f64>, params: &DVector<f64>) -> bool {
    delta.norm() <= STEP_TOL * (STEP_TOL + params.norm())
}

fn weighted_chi2(model: &dyn CurveModel, x: &[f64], y: &[f64], sigma: &[f64], p: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(sigma)
        .map(|((&xi, &yi), &si)| {
            let r = (yi - model.value(xi, p)) / si;
            r * r
        })
        .sum()
}

/// Minimises sum_i ((y_i - f(x_i; theta)) / sigma_i)^2 with a
/// Levenberg-Marquardt damped Gauss-Newton loop.
///
/// Damping is multiplied by 10 on a rejected step and divided by 10 on an
/// accepted one. Non-convergence within the iteration budget returns the
/// partial result with `converged = false`; a singular normal matrix at the
/// optimum is an error.
pub fn fit_nonlinear_weighted(
    model: &dyn CurveModel,
    x: &[f64],
    y: &[f64],
    sigma: &[f64],
    init: &[f64],
) -> Result<FitResult> {
    let n = x.len();
    let p = model.arity();
    if y.len() != n || sigma.len() != n {
        return Err(Error::InvalidFitInput(format!(
            "length mismatch: x={}, y={}, sigma={}",
            n,
            y.len(),
            sigma.len()
        )));
    }
    if init.len() != p {
        return Err(Error::InvalidFitInput(format!(
            "model expects {p} parameters, init has {}",
            init.len()
        )));
    }
    if n <= p {
        return Err(Error::InvalidFitInput(format!(
            "{n} points cannot constrain {p} parameters"
        )));
    }
    if sigma.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidFitInput("sigma must be positive".into()));
    }
    if init.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidFitInput("init must be finite".into()));
    }

    let mut params = DVector::from_column_slice(init);
    let mut chi2 = weighted_chi2(model, x, y, sigma, params.as_slice());
    let mut lambda = LAMBDA_INIT;
    let mut converged = false;
    let mut iterations = 0;
    let mut jac_row = vec![0.0; p];

    while iterations < MAX_ITERATIONS {
        iterations += 1;

        // Scaled Jacobian and residual: rows divided by sigma_i.
        let mut jt_j = DMatrix::<f64>::zeros(p, p);
        let mut jt_r = DVector::<f64>::zeros(p);
        for i in 0..n {
            model.jacobian_row(x[i], params.as_slice(), &mut jac_row);
            let w = 1.0 / sigma[i];
            let resid = (y[i] - model.value(x[i], params.as_slice())) * w;
            for a in 0..p {
                let ja = jac_row[a] * w;
                jt_r[a] += ja * resid;
                for b in a..p {
                    jt_j[(a, b)] += ja * jac_row[b] * w;
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                jt_j[(a, b)] = jt_j[(b, a)];
            }
        }

        if jt_r.amax() <= GRADIENT_TOL {
            converged = true;
            break;
        }

        // Marquardt scaling keeps the damping invariant under parameter rescaling.
        let mut step = None;
        while lambda <= LAMBDA_MAX {
            let mut damped = jt_j.clone();
            for a in 0..p {
                let d = jt_j[(a, a)];
                damped[(a, a)] = d + lambda * d.max(1e-30);
            }
            match damped.lu().solve(&jt_r) {
                Some(delta) if delta.iter().all(|v| v.is_finite()) => {
                    // A proposed step below resolution means the current
                    // point is stationary to working precision.
                    if step_below_tol(&delta, &params) {
                        converged = true;
                        break;
                    }
                    let trial = &params + &delta;
                    let trial_chi2 = weighted_chi2(model, x, y, sigma, trial.as_slice());
                    if trial_chi2.is_finite() && trial_chi2 <= chi2 {
                        step = Some((trial, trial_chi2, delta));
                        break;
                    }
                }
                _ => {}
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }

        let Some((trial, trial_chi2, delta)) = step else {
            break; // damping exhausted; report the best point found
        };
        params = trial;
        chi2 = trial_chi2;
        lambda = (lambda / 10.0).max(1e-12);

        if step_below_tol(&delta, &params) {
            converged = true;
            break;
        }
    }

    // Covariance from the (undamped) weighted normal matrix at the optimum.
    let mut jt_j = DMatrix::<f64>::zeros(p, p);
    for i in 0..n {
        model.jacobian_row(x[i], params.as_slice(), &mut jac_row);
        let w = 1.0 / sigma[i];
        for a in 0..p {
            for b in a..p {
                jt_j[(a, b)] += jac_row[a] * jac_row[b] * w * w;
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            jt_j[(a, b)] = jt_j[(b, a)];
        }
    }
    let covariance = jt_j.try_inverse().ok_or(Error::RankDeficient)?;
    if covariance.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient);
    }

    Ok(FitResult {
        parameters: params.as_slice().to_vec(),
        covariance: matrix_to_rows(&covariance),
        reduced_chi2: chi2 / (n - p) as f64,
        iterations,
        converged,
    })
}

/// Ordinary least-squares line fit. Parameters are `[slope, intercept]`
/// with textbook standard errors.
pub fn fit_linear(x: &[f64], y: &[f64]) -> Result<FitResult> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::InvalidFitInput(format!(
            "length mismatch: x={n}, y={}",
            y.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidFitInput(
            "at least 2 points are required".into(),
        ));
    }
    let mean_x = x.iter().sum::<f64>() / n as f64;
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|&v| (v - mean_x) * (v - mean_x)).sum();
    if sxx <= 0.0 || !sxx.is_finite() {
        return Err(Error::RankDeficient);
    }
    let sxy: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| (xi - mean_x) * (yi - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;

    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let r = yi - (slope * xi + intercept);
            r * r
        })
        .sum();
    // Residual variance; zero when the line is exactly determined (n = 2).
    let s2 = if n > 2 { rss / (n - 2) as f64 } else { 0.0 };
    let var_slope = s2 / sxx;
    let var_intercept = s2 * (1.0 / n as f64 + mean_x * mean_x / sxx);
    let cov_si = -s2 * mean_x / sxx;

    Ok(FitResult {
        parameters: vec![slope, intercept],
        covariance: vec![vec![var_slope, cov_si], vec![cov_si, var_intercept]],
        reduced_chi2: s2,
        iterations: 0,
        converged: true,
    })
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}
