//! ℓ1-penalized probit pseudo-likelihood.
//!
//! Minimizes `−Σ Q_i(θ) + λ Σ_{k ≥ u} |θ_k|`, where the first `u` design
//! columns (intercept, spillover regressor) are unpenalized. Each λ is solved
//! by accelerated proximal gradient with backtracking and adaptive restart,
//! restricted to a working set built by the sequential strong rule and grown
//! until the KKT conditions hold on every excluded coordinate.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::probit::{self, fit_probit};
use super::FitDiagnostics;
use crate::linalg::Matrix;
use crate::rng::{self, domain};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    /// Number of λ values on the log grid.
    pub grid: usize,
    /// Smallest grid value as a fraction of λ_max.
    pub ratio: f64,
    /// Relative objective change that stops the solver.
    pub tol: f64,
    /// Iteration cap per solve.
    pub max_iter: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            grid: 50,
            ratio: 1e-3,
            tol: 1e-7,
            max_iter: 5000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaChoice {
    Fixed { lambda: f64 },
    CrossValidated { folds: usize },
}

impl Default for LambdaChoice {
    fn default() -> Self {
        LambdaChoice::CrossValidated { folds: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub theta: Vec<f64>,
    /// `−2 Σ Q_i` at `theta`.
    pub deviance: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub theta: Vec<f64>,
    pub lambda: f64,
    pub lambda_max: f64,
    pub diagnostics: FitDiagnostics,
}

struct Solver<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    rows: Vec<usize>,
    unpen: usize,
    opts: LassoOptions,
    lipschitz: f64,
    /// Column means over `rows`; the solver works with centered columns and
    /// an intercept in column 0, which leaves the penalized coefficients
    /// unchanged and greatly improves conditioning.
    center: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn new(x: &'a Matrix, y: &'a [u8], rows: Vec<usize>, unpen: usize, opts: LassoOptions) -> Self {
        let k = x.cols();
        let mut center = vec![0.0; k];
        let has_intercept = (0..x.rows()).all(|i| x.get(i, 0) == 1.0);
        if has_intercept && !rows.is_empty() {
            for &i in &rows {
                for (c, v) in center.iter_mut().zip(x.row(i)).skip(1) {
                    *c += v;
                }
            }
            for c in center.iter_mut().skip(1) {
                *c /= rows.len() as f64;
            }
        }
        Self {
            x,
            y,
            rows,
            unpen,
            opts,
            lipschitz: 1.0,
            center,
        }
    }

    /// Original coordinates to centered ones.
    fn to_centered(&self, theta: &[f64]) -> Vec<f64> {
        let mut t = theta.to_vec();
        t[0] += self
            .center
            .iter()
            .zip(theta)
            .skip(1)
            .map(|(m, b)| m * b)
            .sum::<f64>();
        t
    }

    fn from_centered(&self, theta: &[f64]) -> Vec<f64> {
        let mut t = theta.to_vec();
        t[0] -= self
            .center
            .iter()
            .zip(theta)
            .skip(1)
            .map(|(m, b)| m * b)
            .sum::<f64>();
        t
    }

    fn eta(&self, theta: &[f64], cols: &[usize]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|&i| {
                let row = self.x.row(i);
                cols.iter()
                    .map(|&c| (row[c] - self.center[c]) * theta[c])
                    .sum()
            })
            .collect()
    }

    /// Smooth part `−Σ Q_i`.
    fn loss(&self, eta: &[f64]) -> f64 {
        -self
            .rows
            .iter()
            .zip(eta)
            .map(|(&i, &e)| probit::term_value(e, self.y[i]))
            .sum::<f64>()
    }

    /// `−Σ Q_i` and its gradient on `cols`.
    fn loss_grad(&self, eta: &[f64], cols: &[usize]) -> (f64, Vec<f64>) {
        let mut value = 0.0;
        let mut grad = vec![0.0; cols.len()];
        for (&i, &e) in self.rows.iter().zip(eta) {
            let (q, s, _) = probit::term(e, self.y[i]);
            value -= q;
            if s != 0.0 {
                let row = self.x.row(i);
                for (g, &c) in grad.iter_mut().zip(cols) {
                    *g -= s * (row[c] - self.center[c]);
                }
            }
        }
        (value, grad)
    }

    /// Score `∂ Σ Q_i / ∂θ` on every column.
    fn score(&self, theta: &[f64]) -> Vec<f64> {
        let all: Vec<usize> = (0..self.x.cols()).collect();
        let eta = self.eta(theta, &all);
        let (_, g) = self.loss_grad(&eta, &all);
        g.into_iter().map(|v| -v).collect()
    }

    fn penalty(&self, theta: &[f64], cols: &[usize]) -> f64 {
        cols.iter()
            .filter(|&&c| c >= self.unpen)
            .map(|&c| theta[c].abs())
            .sum()
    }

    /// Solves at `lambda` over the coordinates in `cols`, all others held at
    /// zero. Returns (iterations, converged).
    fn solve(&mut self, cols: &[usize], lambda: f64, theta: &mut [f64]) -> (usize, bool) {
        let mut xk = theta.to_vec();
        let mut eta_x = self.eta(&xk, cols);
        let mut yv = xk.clone();
        let mut eta_y = eta_x.clone();
        let mut t = 1.0_f64;
        let mut f_old = self.loss(&eta_x) + lambda * self.penalty(&xk, cols);
        let mut lip = (self.lipschitz * 0.5).max(1e-8);
        let mut z = xk.clone();
        let mut iters = 0;
        let mut converged = false;
        while iters < self.opts.max_iter {
            iters += 1;
            let (f_y, grad) = self.loss_grad(&eta_y, cols);
            let (f_z, eta_z) = loop {
                for (m, &c) in cols.iter().enumerate() {
                    let v = yv[c] - grad[m] / lip;
                    z[c] = if c >= self.unpen {
                        soft_threshold(v, lambda / lip)
                    } else {
                        v
                    };
                }
                let eta_z = self.eta(&z, cols);
                let f_z = self.loss(&eta_z);
                let mut lin = 0.0;
                let mut sq = 0.0;
                for (m, &c) in cols.iter().enumerate() {
                    let d = z[c] - yv[c];
                    lin += grad[m] * d;
                    sq += d * d;
                }
                if f_z <= f_y + lin + 0.5 * lip * sq + 1e-12 * f_y.abs() || lip > 1e300 {
                    break (f_z, eta_z);
                }
                lip *= 2.0;
            };
            let obj = f_z + lambda * self.penalty(&z, cols);
            if obj > f_old && t > 1.0 {
                yv.copy_from_slice(&xk);
                eta_y.copy_from_slice(&eta_x);
                t = 1.0;
                continue;
            }
            let t_next = 0.5 * (1.0 + libm::sqrt(1.0 + 4.0 * t * t));
            let c = (t - 1.0) / t_next;
            for &k in cols {
                yv[k] = z[k] + c * (z[k] - xk[k]);
                xk[k] = z[k];
            }
            for m in 0..eta_y.len() {
                eta_y[m] = eta_z[m] + c * (eta_z[m] - eta_x[m]);
            }
            eta_x = eta_z;
            t = t_next;
            let change = (f_old - obj).abs();
            f_old = obj;
            if change <= self.opts.tol * obj.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        self.lipschitz = lip;
        theta.copy_from_slice(&xk);
        (iters, converged)
    }

    /// Solves at `lambda` from the warm start `theta`, using the strong rule
    /// relative to `prev_lambda` and `prev_score`, then enforcing KKT.
    fn solve_screened(
        &mut self,
        lambda: f64,
        prev_lambda: f64,
        prev_score: &[f64],
        theta: &mut [f64],
    ) -> (usize, bool, Vec<f64>) {
        let k = self.x.cols();
        let mut in_set = vec![false; k];
        for (c, flag) in in_set.iter_mut().enumerate() {
            *flag = c < self.unpen
                || theta[c] != 0.0
                || prev_score[c].abs() >= 2.0 * lambda - prev_lambda;
        }
        let mut iters = 0;
        loop {
            let cols: Vec<usize> = (0..k).filter(|&c| in_set[c]).collect();
            for c in 0..k {
                if !in_set[c] {
                    theta[c] = 0.0;
                }
            }
            let (it, conv) = self.solve(&cols, lambda, theta);
            iters += it;
            let score = self.score(theta);
            let mut grew = false;
            for c in self.unpen..k {
                if !in_set[c] && score[c].abs() > lambda {
                    in_set[c] = true;
                    grew = true;
                }
            }
            if !grew {
                return (iters, conv, score);
            }
        }
    }

    fn deviance(&self, theta: &[f64]) -> f64 {
        let all: Vec<usize> = (0..self.x.cols()).collect();
        2.0 * self.loss(&self.eta(theta, &all))
    }

    fn held_out(&self, theta: &[f64], rows: &[usize]) -> f64 {
        rows.iter()
            .map(|&i| probit::term_value(crate::linalg::dot(self.x.row(i), theta), self.y[i]))
            .sum()
    }

    fn start(&self, theta0: &[f64], first_lambda: f64, exact_first: bool) -> PathState {
        let theta = self.to_centered(theta0);
        let score = self.score(&theta);
        let dev_null = self.deviance(&theta);
        PathState {
            theta,
            score,
            prev_lambda: first_lambda,
            dev_null,
            prev_ratio: 0.0,
            steps: 0,
            exact_first,
        }
    }

    /// Solves at the next λ of a decreasing sequence, warm-started from the
    /// previous solution.
    fn advance(&mut self, st: &mut PathState, lambda: f64) -> PathPoint {
        let (iterations, converged) = if st.steps == 0 && st.exact_first {
            (0, true)
        } else {
            let (it, conv, s) =
                self.solve_screened(lambda, st.prev_lambda, &st.score, &mut st.theta);
            st.score = s;
            (it, conv)
        };
        st.steps += 1;
        st.prev_lambda = lambda;
        PathPoint {
            lambda,
            theta: self.from_centered(&st.theta),
            deviance: self.deviance(&st.theta),
            iterations,
            converged,
        }
    }

    /// Solutions along `lambdas` (decreasing), warm-started from `theta0`.
    fn path(&mut self, lambdas: &[f64], theta0: &[f64], exact_first: bool) -> Vec<PathPoint> {
        let Some(&first) = lambdas.first() else {
            return Vec::new();
        };
        let mut st = self.start(theta0, first, exact_first);
        lambdas.iter().map(|&l| self.advance(&mut st, l)).collect()
    }
}

struct PathState {
    theta: Vec<f64>,
    score: Vec<f64>,
    prev_lambda: f64,
    dev_null: f64,
    prev_ratio: f64,
    steps: usize,
    exact_first: bool,
}

impl PathState {
    /// Deviance-ratio stopping rule: the ratio has saturated or stopped
    /// moving after at least five points.
    fn saturated(&mut self, deviance: f64) -> bool {
        if !(self.dev_null > 0.0) {
            return false;
        }
        let ratio = 1.0 - deviance / self.dev_null;
        let stop = self.steps >= 5 && (ratio >= 0.999 || ratio - self.prev_ratio < 1e-5 * ratio);
        self.prev_ratio = ratio;
        stop
    }
}

/// CV stops once the held-out likelihood has not improved for this many
/// consecutive grid points.
pub const CV_PATIENCE: usize = 10;

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn validate(y: &[u8], design: &Matrix, unpenalized: usize) -> Result<()> {
    if y.len() != design.rows() {
        return Err(Error::LengthMismatch {
            expected: design.rows(),
            found: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::EmptySubset);
    }
    if unpenalized == 0 || unpenalized > design.cols() {
        return Err(Error::InvalidArgument(
            "unpenalized column count must be in 1..=cols",
        ));
    }
    if !design.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// λ_max and the unpenalized fit with all penalized coefficients at zero.
pub fn lambda_max(y: &[u8], design: &Matrix, unpenalized: usize) -> Result<(f64, Vec<f64>)> {
    validate(y, design, unpenalized)?;
    let n = design.rows();
    let mut data = Vec::with_capacity(n * unpenalized);
    for i in 0..n {
        data.extend_from_slice(&design.row(i)[..unpenalized]);
    }
    let sub = Matrix::from_vec(n, unpenalized, data)?;
    let fit = fit_probit(y, &sub, None)?;
    let mut theta = vec![0.0; design.cols()];
    theta[..unpenalized].copy_from_slice(&fit.theta);
    let solver = Solver::new(
        design,
        y,
        (0..n).collect(),
        unpenalized,
        LassoOptions::default(),
    );
    let score = solver.score(&solver.to_centered(&theta));
    let lmax = score[unpenalized..]
        .iter()
        .fold(0.0_f64, |m, s| m.max(s.abs()));
    Ok((lmax, theta))
}

/// Log-spaced grid from `lmax` down to `ratio · lmax`.
pub fn lambda_grid(lmax: f64, opts: &LassoOptions) -> Vec<f64> {
    let g = opts.grid.max(1);
    if g == 1 {
        return vec![lmax];
    }
    (0..g)
        .map(|l| lmax * libm::pow(opts.ratio, l as f64 / (g - 1) as f64))
        .collect()
}

/// Solutions at each λ of a decreasing sequence starting at λ_max.
pub fn lasso_path(
    y: &[u8],
    design: &Matrix,
    unpenalized: usize,
    lambdas: &[f64],
    opts: &LassoOptions,
) -> Result<Vec<PathPoint>> {
    let (lmax, theta0) = lambda_max(y, design, unpenalized)?;
    let mut solver = Solver::new(design, y, (0..y.len()).collect(), unpenalized, *opts);
    let exact_first = lambdas.first().is_some_and(|&l| l >= lmax);
    Ok(solver.path(lambdas, &theta0, exact_first))
}

/// Largest KKT violation of `theta` at `lambda`.
pub fn kkt_violation(
    y: &[u8],
    design: &Matrix,
    unpenalized: usize,
    theta: &[f64],
    lambda: f64,
) -> Result<f64> {
    validate(y, design, unpenalized)?;
    let (_, score) = probit::pseudo_loglik(theta, y, design)?;
    let mut worst = 0.0_f64;
    for (c, &s) in score.iter().enumerate() {
        let v = if c < unpenalized {
            s.abs()
        } else if theta[c] == 0.0 {
            (s.abs() - lambda).max(0.0)
        } else {
            (s - lambda * theta[c].signum()).abs()
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

/// Fold index per row, depending only on `(seed, id)` so that relabeling
/// rows does not change which rows are held out together.
pub fn fold_assignment(ids: &[u64], folds: usize, seed: u64) -> Vec<usize> {
    let key = rng::derive_seed(seed, domain::CV_FOLDS);
    let mut order: Vec<(u64, u64, usize)> = ids
        .iter()
        .enumerate()
        .map(|(m, &id)| (rng::mix64(key ^ rng::mix64(id)), id, m))
        .collect();
    order.sort_unstable();
    let mut fold = vec![0; ids.len()];
    for (rank, &(_, _, m)) in order.iter().enumerate() {
        fold[m] = rank % folds;
    }
    fold
}

/// Fits the penalized period-1 model. The first `unpenalized` columns of
/// `design` are left unpenalized; `ids` key the CV folds.
pub fn fit_lasso(
    y: &[u8],
    design: &Matrix,
    unpenalized: usize,
    ids: &[u64],
    choice: LambdaChoice,
    opts: &LassoOptions,
    seed: u64,
) -> Result<LassoFit> {
    validate(y, design, unpenalized)?;
    if ids.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            found: ids.len(),
        });
    }
    let n = y.len();
    let (lmax, theta0) = lambda_max(y, design, unpenalized)?;
    let mut solver = Solver::new(design, y, (0..n).collect(), unpenalized, *opts);

    let (point, cv_curve) = match choice {
        LambdaChoice::Fixed { lambda } => {
            if !(lambda >= 0.0) {
                return Err(Error::InvalidArgument("lambda must be nonnegative"));
            }
            if lambda >= lmax {
                let deviance = solver.deviance(&solver.to_centered(&theta0));
                let point = PathPoint {
                    lambda,
                    theta: theta0,
                    deviance,
                    iterations: 0,
                    converged: true,
                };
                (point, Vec::new())
            } else {
                let mut lambdas: Vec<f64> = lambda_grid(lmax, opts)
                    .into_iter()
                    .filter(|&l| l > lambda)
                    .collect();
                lambdas.push(lambda);
                let mut path = solver.path(&lambdas, &theta0, true);
                (path.pop().expect("nonempty path"), Vec::new())
            }
        }
        LambdaChoice::CrossValidated { folds } => {
            if folds < 2 || folds > n {
                return Err(Error::InvalidArgument("folds must be in 2..=n"));
            }
            let grid = lambda_grid(lmax, opts);
            let assign = fold_assignment(ids, folds, seed);
            let mut fold_solvers: Vec<(Solver, Vec<usize>)> = (0..folds)
                .map(|f| {
                    let train = (0..n).filter(|&i| assign[i] != f).collect();
                    let test = (0..n).filter(|&i| assign[i] == f).collect();
                    (Solver::new(design, y, train, unpenalized, *opts), test)
                })
                .collect();
            let mut full_state = solver.start(&theta0, grid[0], true);
            let mut fold_states: Vec<PathState> = fold_solvers
                .iter()
                .map(|(fs, _)| fs.start(&theta0, grid[0], false))
                .collect();
            let mut full = Vec::with_capacity(grid.len());
            let mut cv: Vec<f64> = Vec::with_capacity(grid.len());
            let mut best = 0;
            for &lambda in &grid {
                let point = solver.advance(&mut full_state, lambda);
                let saturated = full_state.saturated(point.deviance);
                let mut total = 0.0;
                for ((fs, test), st) in fold_solvers.iter_mut().zip(fold_states.iter_mut()) {
                    let fp = fs.advance(st, lambda);
                    total += fs.held_out(&fp.theta, test);
                }
                full.push(point);
                cv.push(total);
                let l = cv.len() - 1;
                if cv[l] > cv[best] {
                    best = l;
                }
                if saturated || l - best >= CV_PATIENCE {
                    break;
                }
            }
            let lambdas: Vec<f64> = full.iter().map(|p| p.lambda).collect();
            let curve = lambdas.iter().copied().zip(cv).collect();
            (
                full.into_iter().nth(best).expect("best index in range"),
                curve,
            )
        }
    };

    let grad_norm = kkt_violation(y, design, unpenalized, &point.theta, point.lambda)?;
    let diagnostics = FitDiagnostics {
        iterations: point.iterations,
        grad_norm,
        converged: point.converged,
        objective_trace: Vec::new(),
        cv_curve,
    };
    if !point.converged {
        return Err(Error::NotConverged {
            iterate: point.theta,
            diagnostics: Box::new(diagnostics),
        });
    }
    Ok(LassoFit {
        theta: point.theta,
        lambda: point.lambda,
        lambda_max: lmax,
        diagnostics,
    })
}
