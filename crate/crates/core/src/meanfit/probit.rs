//! Probit pseudo-log-likelihood and its Newton–Raphson maximizer.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{FitDiagnostics, PROB_CLAMP};
use crate::linalg::{cholesky_solve, dot, norm_inf, Matrix};
use crate::normal;
use crate::{Error, Result};

pub const MAX_ITER: usize = 100;
pub const GRAD_TOL: f64 = 1e-8;
const MAX_HALVINGS: usize = 50;

/// Value, first and negative second derivative in η of one clamped term
/// `y ln Φ(η) + (1 − y) ln(1 − Φ(η))`.
///
/// With `q = 2y − 1` and `z = qη` the term is `ln Φ(z)`. Where `Φ(z)` is
/// clamped the objective is flat, so both derivatives are zero there.
#[inline]
pub(crate) fn term(eta: f64, y: u8) -> (f64, f64, f64) {
    let q = if y == 1 { 1.0 } else { -1.0 };
    let z = q * eta;
    let p = normal::cdf(z);
    if p < PROB_CLAMP {
        (libm::log(PROB_CLAMP), 0.0, 0.0)
    } else if p > 1.0 - PROB_CLAMP {
        (libm::log(1.0 - PROB_CLAMP), 0.0, 0.0)
    } else {
        let lam = if z > -30.0 {
            normal::pdf(z) / p
        } else {
            normal::mills_ratio(z)
        };
        (libm::log(p), q * lam, lam * (lam + z))
    }
}

#[inline]
pub(crate) fn term_value(eta: f64, y: u8) -> f64 {
    let z = if y == 1 { eta } else { -eta };
    libm::log(normal::cdf(z).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP))
}

fn check(theta: &[f64], y: &[u8], design: &Matrix) -> Result<()> {
    if y.len() != design.rows() {
        return Err(Error::LengthMismatch {
            expected: design.rows(),
            found: y.len(),
        });
    }
    if theta.len() != design.cols() {
        return Err(Error::DimensionMismatch {
            expected: design.cols(),
            found: theta.len(),
        });
    }
    if !design.is_finite() || theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// `Σ Q_i(θ)` and its gradient for the probit link.
pub fn pseudo_loglik(theta: &[f64], y: &[u8], design: &Matrix) -> Result<(f64, Vec<f64>)> {
    check(theta, y, design)?;
    let mut value = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for (i, &yi) in y.iter().enumerate() {
        let row = design.row(i);
        let (q, s, _) = term(dot(row, theta), yi);
        value += q;
        if s != 0.0 {
            for (g, &x) in grad.iter_mut().zip(row) {
                *g += s * x;
            }
        }
    }
    Ok((value, grad))
}

fn value_only(theta: &[f64], y: &[u8], design: &Matrix, rows: &[usize]) -> f64 {
    rows.iter()
        .map(|&i| term_value(dot(design.row(i), theta), y[i]))
        .sum()
}

/// Value, gradient and negative Hessian (k×k, row-major) over `rows`.
fn second_order(
    theta: &[f64],
    y: &[u8],
    design: &Matrix,
    rows: &[usize],
) -> (f64, Vec<f64>, Vec<f64>) {
    let k = theta.len();
    let mut value = 0.0;
    let mut grad = vec![0.0; k];
    let mut hess = vec![0.0; k * k];
    for &i in rows {
        let row = design.row(i);
        let (q, s, w) = term(dot(row, theta), y[i]);
        value += q;
        if s == 0.0 && w == 0.0 {
            continue;
        }
        for a in 0..k {
            grad[a] += s * row[a];
            let wa = w * row[a];
            for b in a..k {
                hess[a * k + b] += wa * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            hess[a * k + b] = hess[b * k + a];
        }
    }
    (value, grad, hess)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbitFit {
    pub theta: Vec<f64>,
    pub loglik: f64,
    pub diagnostics: FitDiagnostics,
}

/// Maximizes the probit pseudo-log-likelihood over the rows selected by
/// `subset` (all rows when `None`) by Newton–Raphson with step halving.
pub fn fit_probit(y: &[u8], design: &Matrix, subset: Option<&[bool]>) -> Result<ProbitFit> {
    let k = design.cols();
    let mut theta = vec![0.0; k];
    check(&theta, y, design)?;
    let rows: Vec<usize> = match subset {
        Some(mask) => {
            if mask.len() != y.len() {
                return Err(Error::LengthMismatch {
                    expected: y.len(),
                    found: mask.len(),
                });
            }
            (0..y.len()).filter(|&i| mask[i]).collect()
        }
        None => (0..y.len()).collect(),
    };
    if rows.is_empty() {
        return Err(Error::EmptySubset);
    }
    let first = y[rows[0]];
    if rows.iter().all(|&i| y[i] == first) {
        // No interior maximizer exists.
        return Err(Error::Singular);
    }

    let (mut value, mut grad, mut hess) = second_order(&theta, y, design, &rows);
    let mut diagnostics = FitDiagnostics {
        objective_trace: vec![value],
        ..FitDiagnostics::default()
    };
    for iter in 0..MAX_ITER {
        diagnostics.iterations = iter;
        diagnostics.grad_norm = norm_inf(&grad);
        if diagnostics.grad_norm < GRAD_TOL {
            diagnostics.converged = true;
            break;
        }
        let step = cholesky_solve(&hess, k, &grad)?;
        let decrement = dot(&grad, &step);
        if decrement < 1e-15 * (1.0 + value.abs()) {
            // The predicted gain is below the resolution of the objective, so
            // the line search cannot discriminate; take the pure Newton step.
            for (a, s) in theta.iter_mut().zip(&step) {
                *a += s;
            }
            let (v, g, _) = second_order(&theta, y, design, &rows);
            value = v;
            grad = g;
            diagnostics.iterations = iter + 1;
            diagnostics.grad_norm = norm_inf(&grad);
            diagnostics.converged = true;
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let v = value_only(&cand, y, design, &rows);
            if v >= value {
                accepted = Some(cand);
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some(cand) => {
                theta = cand;
                (value, grad, hess) = second_order(&theta, y, design, &rows);
                diagnostics.objective_trace.push(value);
            }
            None => {
                // No representable ascent remains along the Newton direction.
                diagnostics.converged = decrement < 1e-10 * (1.0 + value.abs());
                break;
            }
        }
        diagnostics.iterations = iter + 1;
        diagnostics.grad_norm = norm_inf(&grad);
    }
    if !diagnostics.converged && diagnostics.grad_norm < GRAD_TOL {
        diagnostics.converged = true;
    }
    if !diagnostics.converged {
        return Err(Error::NotConverged {
            iterate: theta,
            diagnostics: Box::new(diagnostics),
        });
    }
    Ok(ProbitFit {
        theta,
        loglik: value,
        diagnostics,
    })
}
