//! Conditional-mean models for both periods.
//!
//! Period 0: `μ_{j,0} = Φ(γ₀ + X_j'γ)` fitted by probit MLE, or a constant
//! (intercept-only) fit. Period 1: `g₁ = (1 − Y_{i,0}) Φ(α + δ Ȳ_{i,0} + X_i'β)`
//! under irreversibility, or `Φ(α + δ Ȳ_{i,0} + ω Y_{i,0} + X_i'β)` otherwise,
//! fitted by probit pseudo-MLE or ℓ1-penalized pseudo-likelihood.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dgp::Panel;
use crate::graph::DirectedGraph;
use crate::linalg::{dot, Matrix};
use crate::normal;
use crate::{Error, Result};

pub mod lasso;
pub mod probit;
mod simulate;

pub use lasso::{fit_lasso, LambdaChoice, LassoFit, LassoOptions};
pub use probit::{fit_probit, pseudo_loglik, ProbitFit};
pub use simulate::{predict_mu0, simulate_mu1, SimDraws};

/// Fitted probabilities are kept inside `[PROB_CLAMP, 1 − PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-6;

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    /// Max-norm of the final gradient (MLE) or of the KKT violation (LASSO).
    pub grad_norm: f64,
    pub converged: bool,
    /// Objective after each accepted iterate.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<f64>,
    /// `(λ, summed held-out pseudo-log-likelihood)` along the CV grid.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cv_curve: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mu0Model {
    #[default]
    Probit,
    InterceptOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    #[default]
    Mle,
    Lasso(LambdaChoice),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanModel {
    pub mu0_model: Mu0Model,
    /// Intercept followed by covariate coefficients (intercept only for
    /// [`Mu0Model::InterceptOnly`]).
    pub gamma_hat: Vec<f64>,
    pub delta_hat: f64,
    /// Coefficient on the node's own period-0 outcome; zero when irreversible.
    pub own_hat: f64,
    /// Intercept followed by covariate coefficients.
    pub beta_hat: Vec<f64>,
    pub irreversible: bool,
    /// Penalty used for the period-1 fit (0 for MLE).
    pub lasso_lambda: f64,
    pub mu0_diagnostics: FitDiagnostics,
    pub fit_diagnostics: FitDiagnostics,
}

/// Options for [`MeanModel::fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub mu0: Mu0Model,
    pub mode: FitMode,
    pub irreversible: bool,
    pub lasso: LassoOptions,
    /// Seed for the CV fold assignment.
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            mu0: Mu0Model::Probit,
            mode: FitMode::Mle,
            irreversible: true,
            lasso: LassoOptions::default(),
            seed: 0,
        }
    }
}

impl MeanModel {
    pub fn p(&self) -> usize {
        self.beta_hat.len() - 1
    }

    /// Fitted period-0 probability for a covariate row, clamped.
    pub fn mu0(&self, x: &[f64]) -> f64 {
        let index = match self.mu0_model {
            Mu0Model::Probit => self.gamma_hat[0] + dot(x, &self.gamma_hat[1..]),
            Mu0Model::InterceptOnly => self.gamma_hat[0],
        };
        clamp_prob(normal::cdf(index))
    }

    /// `α + X_i'β`, the part of the period-1 index that does not vary across draws.
    pub fn base_index1(&self, x: &[f64]) -> f64 {
        self.beta_hat[0] + dot(x, &self.beta_hat[1..])
    }

    /// Fitted period-1 mean `ĝ₁(Ȳ, Y₀, X)`, clamped.
    pub fn g1(&self, x: &[f64], ybar: f64, own: u8) -> f64 {
        if self.irreversible && own == 1 {
            return 0.0;
        }
        let index = self.base_index1(x) + self.delta_hat * ybar + self.own_hat * own as f64;
        clamp_prob(normal::cdf(index))
    }

    /// Fits both periods on an observed panel.
    pub fn fit(g: &DirectedGraph, panel: &Panel, opts: &FitOptions) -> Result<Self> {
        let n = panel.n();
        if g.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: g.n(),
            });
        }
        let p = panel.x.cols();
        let x = &panel.x;

        let (gamma_hat, mu0_diagnostics) = match opts.mu0 {
            Mu0Model::Probit => {
                let mut data = Vec::with_capacity(n * (p + 1));
                for j in 0..n {
                    data.push(1.0);
                    data.extend_from_slice(x.row(j));
                }
                let design = Matrix::from_vec(n, p + 1, data)?;
                let fit = fit_probit(&panel.y0, &design, None)?;
                (fit.theta, fit.diagnostics)
            }
            Mu0Model::InterceptOnly => {
                let mean = panel.y0.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
                (
                    vec![normal::quantile(clamp_prob(mean))],
                    FitDiagnostics {
                        converged: true,
                        ..FitDiagnostics::default()
                    },
                )
            }
        };

        let ybar = g.neighborhood_average(&panel.y0)?;
        let rows: Vec<usize> = if opts.irreversible {
            (0..n).filter(|&i| panel.y0[i] == 0).collect()
        } else {
            (0..n).collect()
        };
        if rows.is_empty() {
            return Err(Error::EmptySubset);
        }
        let use_ybar = rows.iter().any(|&i| ybar[i] != 0.0);
        let use_own = !opts.irreversible && {
            let first = panel.y0[rows[0]];
            rows.iter().any(|&i| panel.y0[i] != first)
        };
        let lead = 1 + use_ybar as usize + use_own as usize;
        let mut data = Vec::with_capacity(rows.len() * (lead + p));
        for &i in &rows {
            data.push(1.0);
            if use_ybar {
                data.push(ybar[i]);
            }
            if use_own {
                data.push(panel.y0[i] as f64);
            }
            data.extend_from_slice(x.row(i));
        }
        let design = Matrix::from_vec(rows.len(), lead + p, data)?;
        let y1: Vec<u8> = rows.iter().map(|&i| panel.y1[i]).collect();

        let (theta, lasso_lambda, fit_diagnostics) = match opts.mode {
            FitMode::Mle => {
                let fit = fit_probit(&y1, &design, None)?;
                (fit.theta, 0.0, fit.diagnostics)
            }
            FitMode::Lasso(choice) => {
                let ids: Vec<u64> = rows.iter().map(|&i| panel.ids[i]).collect();
                let fit = fit_lasso(&y1, &design, lead, &ids, choice, &opts.lasso, opts.seed)?;
                (fit.theta, fit.lambda, fit.diagnostics)
            }
        };

        let mut k = 1;
        let delta_hat = if use_ybar {
            k += 1;
            theta[k - 1]
        } else {
            0.0
        };
        let own_hat = if use_own {
            k += 1;
            theta[k - 1]
        } else {
            0.0
        };
        let mut beta_hat = Vec::with_capacity(p + 1);
        beta_hat.push(theta[0]);
        beta_hat.extend_from_slice(&theta[k..]);

        Ok(Self {
            mu0_model: opts.mu0,
            gamma_hat,
            delta_hat,
            own_hat,
            beta_hat,
            irreversible: opts.irreversible,
            lasso_lambda,
            mu0_diagnostics,
            fit_diagnostics,
        })
    }
}
