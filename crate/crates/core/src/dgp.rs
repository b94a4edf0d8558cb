//! The simulation design: covariates, period-0 and period-1 outcomes, and the
//! true diffusion targets computed by counterfactual simulation.
//!
//! Shock protocol. Period-0 outcomes are `Y0_j = 1{F0(X_j'γ) ≥ V_j}` with
//! `V_j ~ U[0,1)`. The period-1 shock `U_i ~ N(0,1)` is realised as
//! `U_i = Φ⁻¹(V_i)` with `V_i ~ U[0,1)`, so `δȲ + X'β − U > 0` is evaluated as
//! `V_i < Φ(δȲ + X'β)`. One uniform is drawn per node, in node order, from
//! the stage's stream, whether or not the node ends up using it.

use alloc::vec;
use alloc::vec::Vec;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::graph::DirectedGraph;
use crate::linalg::{dot, Matrix};
use crate::normal;
use crate::rng::{self, domain};
use crate::sum::KahanSum;
use crate::{Error, Result};

/// How period-0 outcomes are generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Y0Mode {
    /// `Y0_j ~ Bernoulli(Φ(X_j'γ))`.
    Probit,
    /// `Y0_j ~ Bernoulli(mean)` independently of the covariates.
    FixedBernoulli { mean: f64 },
}

/// Single-index probit design for both periods (standard normal link).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub gamma0: Vec<f64>,
    pub delta0: f64,
    pub beta0: Vec<f64>,
    pub y0_mode: Y0Mode,
    /// A node whose state changed in period 0 cannot change in period 1.
    pub irreversible: bool,
}

impl DgpSpec {
    /// Low-dimensional design (p = 5).
    pub fn low_dimensional(delta0: f64) -> Self {
        Self {
            gamma0: vec![0.1, -0.5, -0.7, 0.3, 0.1],
            delta0,
            beta0: vec![1.0, -1.0, -0.1, 0.1, 0.1],
            y0_mode: Y0Mode::Probit,
            irreversible: true,
        }
    }

    /// High-dimensional design: `p` covariates, the first five active with
    /// coefficients (1, −1, −1, 1, 1), and Bernoulli(0.3) period-0 outcomes.
    pub fn high_dimensional(p: usize, delta0: f64) -> Self {
        let mut beta0 = vec![0.0; p];
        for (b, v) in beta0.iter_mut().zip([1.0, -1.0, -1.0, 1.0, 1.0]) {
            *b = v;
        }
        Self {
            gamma0: vec![0.0; p],
            delta0,
            beta0,
            y0_mode: Y0Mode::FixedBernoulli { mean: 0.3 },
            irreversible: true,
        }
    }

    pub fn p(&self) -> usize {
        self.beta0.len()
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if self.gamma0.len() != x.cols() || self.beta0.len() != x.cols() {
            return Err(Error::DimensionMismatch {
                expected: x.cols(),
                found: if self.beta0.len() != x.cols() {
                    self.beta0.len()
                } else {
                    self.gamma0.len()
                },
            });
        }
        Ok(())
    }

    /// μ_{j,0} = P(Y0_j = 1 | X).
    pub fn mu0(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(match self.y0_mode {
            Y0Mode::Probit => (0..x.rows())
                .map(|j| normal::cdf(dot(x.row(j), &self.gamma0)))
                .collect(),
            Y0Mode::FixedBernoulli { mean } => vec![mean; x.rows()],
        })
    }

    /// Per node, the table `k ↦ Φ(δ k/dᵢ + Xᵢ'β)` for k = 0..=dᵢ.
    fn response_tables(&self, g: &DirectedGraph, x: &Matrix) -> Vec<Vec<f64>> {
        (0..g.n())
            .map(|i| {
                let xb = dot(x.row(i), &self.beta0);
                let d = g.in_degree(i);
                if d == 0 {
                    vec![normal::cdf(xb)]
                } else {
                    (0..=d)
                        .map(|k| normal::cdf(self.delta0 * k as f64 / d as f64 + xb))
                        .collect()
                }
            })
            .collect()
    }
}

/// Observed two-period panel. `ids` are external node identifiers; the
/// simulation draws used in estimation are keyed by them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub y0: Vec<u8>,
    pub y1: Vec<u8>,
    pub x: Matrix,
    pub ids: Vec<u64>,
}

impl Panel {
    /// Panel with ids `0..n`.
    pub fn new(y0: Vec<u8>, y1: Vec<u8>, x: Matrix) -> Result<Self> {
        let ids = (0..y0.len() as u64).collect();
        Self::with_ids(y0, y1, x, ids)
    }

    pub fn with_ids(y0: Vec<u8>, y1: Vec<u8>, x: Matrix, ids: Vec<u64>) -> Result<Self> {
        let n = y0.len();
        for len in [y1.len(), x.rows(), ids.len()] {
            if len != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        if y0.iter().chain(y1.iter()).any(|&v| v > 1) {
            return Err(Error::InvalidArgument("outcomes must be 0 or 1"));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self { y0, y1, x, ids })
    }

    pub fn n(&self) -> usize {
        self.y0.len()
    }

    /// No node has both y0 = 1 and y1 = 1.
    pub fn is_irreversible(&self) -> bool {
        self.y0
            .iter()
            .zip(&self.y1)
            .all(|(&a, &b)| !(a == 1 && b == 1))
    }
}

/// Covariates drawn i.i.d. from N(1, 1), row-major from one stream.
pub fn gen_covariates(n: usize, p: usize, seed: u64) -> Matrix {
    let mut rng = rng::stream(seed, domain::COVARIATES, 0);
    let data = (0..n * p)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z + 1.0
        })
        .collect();
    Matrix::from_vec(n, p, data).expect("n * p entries")
}

pub fn gen_y0(x: &Matrix, spec: &DgpSpec, seed: u64) -> Result<Vec<u8>> {
    let mu0 = spec.mu0(x)?;
    let mut rng = rng::stream(seed, domain::Y0, 0);
    Ok(mu0
        .iter()
        .map(|&m| (m >= rng::uniform(&mut rng)) as u8)
        .collect())
}

pub fn gen_y1(
    g: &DirectedGraph,
    y0: &[u8],
    x: &Matrix,
    spec: &DgpSpec,
    seed: u64,
) -> Result<Vec<u8>> {
    spec.check(x)?;
    let n = g.n();
    for len in [y0.len(), x.rows()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    let ybar = g.neighborhood_average(y0)?;
    let mut rng = rng::stream(seed, domain::Y1, 0);
    Ok((0..n)
        .map(|i| {
            let v = rng::uniform(&mut rng);
            let index = spec.delta0 * ybar[i] + dot(x.row(i), &spec.beta0);
            let changes = v < normal::cdf(index);
            (changes && !(spec.irreversible && y0[i] == 1)) as u8
        })
        .collect())
}

/// Draws (Y0, Y1) given fixed (G, X); the two stages use seeds derived from `seed`.
pub fn simulate_panel(g: &DirectedGraph, x: &Matrix, spec: &DgpSpec, seed: u64) -> Result<Panel> {
    let y0 = gen_y0(x, spec, rng::derive_seed(seed, 0))?;
    let y1 = gen_y1(g, &y0, x, spec, rng::derive_seed(seed, 1))?;
    Panel::new(y0, y1, x.clone())
}

/// Simulated diffusion targets with their Monte Carlo standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueDiffusion {
    /// D: weighted average edge contrast.
    pub d: f64,
    /// Dᴵ: the same contrasts conditional on the receiving node having Y0 = 0.
    pub d_irr: f64,
    pub se_d: f64,
    pub se_d_irr: f64,
    pub sims: usize,
}

/// Streaming accumulator over simulation replicates, mergeable in any
/// grouping that preserves chunk order.
#[derive(Debug, Clone, Copy, Default)]
pub struct TruthAccumulator {
    sum_d: KahanSum,
    sumsq_d: KahanSum,
    sum_di: KahanSum,
    sumsq_di: KahanSum,
    sims: usize,
}

impl TruthAccumulator {
    pub fn merge(&mut self, other: &TruthAccumulator) {
        self.sum_d.merge(&other.sum_d);
        self.sumsq_d.merge(&other.sumsq_d);
        self.sum_di.merge(&other.sum_di);
        self.sumsq_di.merge(&other.sumsq_di);
        self.sims += other.sims;
    }

    pub fn finish(&self) -> TrueDiffusion {
        let s = self.sims as f64;
        let moments = |sum: &KahanSum, sumsq: &KahanSum| {
            let mean = sum.value() / s;
            let var = (sumsq.value() / s - mean * mean).max(0.0);
            (
                mean,
                if self.sims > 1 {
                    libm::sqrt(var / (s - 1.0))
                } else {
                    0.0
                },
            )
        };
        let (d, se_d) = moments(&self.sum_d, &self.sumsq_d);
        let (d_irr, se_d_irr) = moments(&self.sum_di, &self.sumsq_di);
        TrueDiffusion {
            d,
            d_irr,
            se_d,
            se_d_irr,
            sims: self.sims,
        }
    }
}

/// Sims per chunk; chunk `c` always uses stream `c`, so results do not
/// depend on how chunks are scheduled.
pub const TRUTH_CHUNK: usize = 1000;

/// Precomputed pieces of the truth simulation for one (G, X, spec).
#[derive(Debug, Clone)]
pub struct TruthSimulator<'a> {
    g: &'a DirectedGraph,
    spec: &'a DgpSpec,
    mu0: Vec<f64>,
    weights: Vec<f64>,
    tables: Vec<Vec<f64>>,
}

impl<'a> TruthSimulator<'a> {
    pub fn new(g: &'a DirectedGraph, x: &Matrix, spec: &'a DgpSpec) -> Result<Self> {
        if x.rows() != g.n() {
            return Err(Error::DimensionMismatch {
                expected: g.n(),
                found: x.rows(),
            });
        }
        let mu0 = spec.mu0(x)?;
        let total = crate::sum::sum(mu0.iter().map(|m| m * (1.0 - m)));
        if !(total > 0.0) {
            return Err(Error::DegenerateWeights);
        }
        let weights = mu0.iter().map(|m| m * (1.0 - m) / total).collect();
        let tables = spec.response_tables(g, x);
        Ok(Self {
            g,
            spec,
            mu0,
            weights,
            tables,
        })
    }

    /// Weights w_j ∝ μ_{j,0}(1 − μ_{j,0}), summing to one.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Runs `count` replicates of chunk `chunk`.
    ///
    /// Each replicate draws all period-0 outcomes and period-1 shocks, then
    /// for every edge (i ← j) evaluates Y*ᵢⱼ(1) − Y*ᵢⱼ(0) with j's period-0
    /// value fixed and everything else, including the shock of `i`, held at
    /// the drawn values. Y0ᵢ is independent of the other inputs of node i's
    /// response, so the contrast conditional on Y0ᵢ = 0 is the same contrast
    /// with the irreversibility factor dropped.
    pub fn run_chunk(&self, chunk: usize, count: usize, seed: u64) -> TruthAccumulator {
        let n = self.g.n();
        let mut rng = rng::stream(seed, domain::TRUTH, chunk as u64);
        let mut y0 = vec![0u8; n];
        let mut v = vec![0.0; n];
        let mut acc = TruthAccumulator::default();
        for _ in 0..count {
            for (y, &m) in y0.iter_mut().zip(&self.mu0) {
                *y = (m >= rng::uniform(&mut rng)) as u8;
            }
            for vi in v.iter_mut() {
                *vi = rng::uniform(&mut rng);
            }
            let mut d = 0.0;
            let mut d_irr = 0.0;
            for i in 0..n {
                let nbrs = self.g.in_neighbors(i);
                if nbrs.is_empty() {
                    continue;
                }
                let table = &self.tables[i];
                let s: usize = nbrs.iter().map(|&j| y0[j] as usize).sum();
                let mut edge_sum = 0.0;
                for &j in nbrs {
                    let rest = s - y0[j] as usize;
                    let c = (v[i] < table[rest + 1]) as i32 - (v[i] < table[rest]) as i32;
                    if c != 0 {
                        edge_sum += self.weights[j] * c as f64;
                    }
                }
                d_irr += edge_sum;
                if !(self.spec.irreversible && y0[i] == 1) {
                    d += edge_sum;
                }
            }
            acc.sum_d.add(d);
            acc.sumsq_d.add(d * d);
            acc.sum_di.add(d_irr);
            acc.sumsq_di.add(d_irr * d_irr);
            acc.sims += 1;
        }
        acc
    }

    /// Chunk boundaries for `sims` replicates.
    pub fn chunks(sims: usize) -> impl Iterator<Item = (usize, usize)> {
        (0..sims.div_ceil(TRUTH_CHUNK)).map(move |c| (c, TRUTH_CHUNK.min(sims - c * TRUTH_CHUNK)))
    }
}

/// D and Dᴵ by counterfactual simulation with `sims` replicates.
pub fn true_diffusion(
    g: &DirectedGraph,
    x: &Matrix,
    spec: &DgpSpec,
    sims: usize,
    seed: u64,
) -> Result<TrueDiffusion> {
    if sims == 0 {
        return Err(Error::InvalidArgument("sims must be at least 1"));
    }
    let sim = TruthSimulator::new(g, x, spec)?;
    let mut acc = TruthAccumulator::default();
    for (chunk, count) in TruthSimulator::chunks(sims) {
        acc.merge(&sim.run_chunk(chunk, count, seed));
    }
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn figure_one() -> DirectedGraph {
        DirectedGraph::from_edge_list(&[(0, 2), (0, 1), (1, 0), (1, 2), (2, 3), (3, 1)], 4).unwrap()
    }

    fn mean(v: &[u8]) -> f64 {
        v.iter().map(|&b| b as f64).sum::<f64>() / v.len() as f64
    }

    #[test]
    fn covariates_shape_and_location() {
        let x = gen_covariates(1000, 5, 3);
        assert_eq!((x.rows(), x.cols()), (1000, 5));
        for k in 0..5 {
            let m = (0..1000).map(|i| x.get(i, k)).sum::<f64>() / 1000.0;
            assert!(
                (m - 1.0).abs() < 4.0 / libm::sqrt(1000.0),
                "column {k}: {m}"
            );
        }
        let one = gen_covariates(1, 1, 0);
        assert!(one.get(0, 0).is_finite());
        let wide = gen_covariates(500, 500, 1);
        assert_eq!((wide.rows(), wide.cols()), (500, 500));
    }

    #[test]
    fn y0_means() {
        let spec = DgpSpec::low_dimensional(1.0);
        let x = gen_covariates(2000, 5, 10);
        let m = mean(&gen_y0(&x, &spec, 11).unwrap());
        assert!((m - 0.3).abs() < 0.03, "{m}");

        let flat = DgpSpec {
            gamma0: vec![0.0; 5],
            ..spec.clone()
        };
        let m = mean(&gen_y0(&x, &flat, 12).unwrap());
        assert!((m - 0.5).abs() < 4.0 * libm::sqrt(0.25 / 2000.0), "{m}");

        let fixed = DgpSpec {
            y0_mode: Y0Mode::FixedBernoulli { mean: 0.3 },
            ..spec
        };
        let x = gen_covariates(5000, 5, 13);
        let m = mean(&gen_y0(&x, &fixed, 14).unwrap());
        assert!((m - 0.3).abs() < 4.0 * libm::sqrt(0.21 / 5000.0), "{m}");
    }

    #[test]
    fn y0_dimension_mismatch() {
        let spec = DgpSpec::low_dimensional(1.0);
        let x = gen_covariates(10, 3, 0);
        assert!(matches!(
            gen_y0(&x, &spec, 0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn y1_irreversible_and_saturated_y0() {
        let spec = DgpSpec::low_dimensional(2.0);
        let g = DirectedGraph::erdos_renyi(300, 3.0, 1).unwrap();
        let x = gen_covariates(300, 5, 2);
        let y1 = gen_y1(&g, &[1; 300], &x, &spec, 3).unwrap();
        assert!(y1.iter().all(|&v| v == 0));
        let panel = simulate_panel(&g, &x, &spec, 4).unwrap();
        assert!(panel.is_irreversible());
    }

    #[test]
    fn y1_on_empty_graph_ignores_delta() {
        let g = DirectedGraph::empty(200);
        let x = gen_covariates(200, 5, 7);
        let y0 = gen_y0(&x, &DgpSpec::low_dimensional(0.0), 8).unwrap();
        let a = gen_y1(&g, &y0, &x, &DgpSpec::low_dimensional(0.0), 9).unwrap();
        let b = gen_y1(&g, &y0, &x, &DgpSpec::low_dimensional(5.0), 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn y1_matches_reference_protocol() {
        // Independent re-implementation of the documented shock protocol.
        let g = figure_one();
        let spec = DgpSpec::low_dimensional(1.0);
        let x = gen_covariates(4, 5, 21);
        let y0 = [0u8, 1, 0, 1];
        let got = gen_y1(&g, &y0, &x, &spec, 22).unwrap();
        let mut rng = rng::stream(22, domain::Y1, 0);
        let nbrs: [&[usize]; 4] = [&[1, 2], &[0, 2], &[3], &[1]];
        for i in 0..4 {
            let v = rng::uniform(&mut rng);
            let u = normal::quantile(v);
            let ybar = nbrs[i].iter().map(|&j| y0[j] as f64).sum::<f64>() / nbrs[i].len() as f64;
            let xb: f64 = (0..5).map(|k| x.get(i, k) * spec.beta0[k]).sum();
            let expected = if y0[i] == 1 {
                0
            } else {
                (ybar + xb - u > 0.0) as u8
            };
            assert_eq!(got[i], expected, "node {i}");
        }
    }

    #[test]
    fn no_spillover_means_no_diffusion() {
        let g = DirectedGraph::erdos_renyi(200, 3.0, 5).unwrap();
        let x = gen_covariates(200, 5, 6);
        let t = true_diffusion(&g, &x, &DgpSpec::low_dimensional(0.0), 2000, 7).unwrap();
        assert_eq!(t.d, 0.0);
        assert_eq!(t.d_irr, 0.0);
    }

    #[test]
    fn weights_sum_to_one_and_degenerate_weights() {
        let g = DirectedGraph::erdos_renyi(50, 2.0, 5).unwrap();
        let x = gen_covariates(50, 5, 6);
        let spec = DgpSpec::low_dimensional(1.0);
        let sim = TruthSimulator::new(&g, &x, &spec).unwrap();
        assert!((sim.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let degenerate = DgpSpec {
            y0_mode: Y0Mode::FixedBernoulli { mean: 1.0 },
            ..spec
        };
        assert_eq!(
            true_diffusion(&g, &x, &degenerate, 10, 0).unwrap_err(),
            Error::DegenerateWeights
        );
    }

    #[test]
    fn truth_is_chunking_invariant() {
        let g = DirectedGraph::erdos_renyi(100, 2.0, 5).unwrap();
        let x = gen_covariates(100, 5, 6);
        let spec = DgpSpec::low_dimensional(1.0);
        let whole = true_diffusion(&g, &x, &spec, 2500, 9).unwrap();
        let sim = TruthSimulator::new(&g, &x, &spec).unwrap();
        let parts: Vec<_> = TruthSimulator::chunks(2500)
            .map(|(c, k)| sim.run_chunk(c, k, 9))
            .collect();
        let mut acc = TruthAccumulator::default();
        for p in parts.iter().rev() {
            acc.merge(p);
        }
        let rev = acc.finish();
        assert!((whole.d - rev.d).abs() < 1e-12);
        assert_eq!(whole.sims, 2500);
    }
}
