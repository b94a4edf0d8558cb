//! Exact expectations by enumerating all 2ⁿ period-0 configurations of a
//! small graph. The period-1 shock is integrated out analytically, so every
//! quantity is a finite sum with no sampling error.

use netdiff_core::linalg::Matrix;
use netdiff_core::DirectedGraph;

pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// A probit design with per-node indices already evaluated.
#[derive(Debug, Clone)]
pub struct Design {
    /// μ_{j,0}.
    pub mu0: Vec<f64>,
    /// X_i'β.
    pub xb: Vec<f64>,
    pub delta: f64,
    pub irreversible: bool,
}

impl Design {
    pub fn probit(x: &Matrix, gamma: &[f64], beta: &[f64], delta: f64, irreversible: bool) -> Self {
        let dot = |r: &[f64], c: &[f64]| r.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
        Self {
            mu0: (0..x.rows()).map(|j| phi(dot(x.row(j), gamma))).collect(),
            xb: (0..x.rows()).map(|i| dot(x.row(i), beta)).collect(),
            delta,
            irreversible,
        }
    }

    fn n(&self) -> usize {
        self.mu0.len()
    }

    fn prob(&self, y: &[u8]) -> f64 {
        y.iter()
            .zip(&self.mu0)
            .map(|(&v, &m)| if v == 1 { m } else { 1.0 - m })
            .product()
    }

    /// P(V_i < Φ(index)) for node `i` with `ones` of its `deg` in-neighbors at 1.
    fn response(&self, i: usize, ones: usize, deg: usize) -> f64 {
        let ybar = if deg == 0 {
            0.0
        } else {
            ones as f64 / deg as f64
        };
        phi(self.delta * ybar + self.xb[i])
    }

    /// E[Y_{i,1} | Y_0 = y].
    fn mean1(&self, g: &DirectedGraph, i: usize, y: &[u8]) -> f64 {
        if self.irreversible && y[i] == 1 {
            return 0.0;
        }
        let nb = g.in_neighbors(i);
        let ones = nb.iter().filter(|&&j| y[j] == 1).count();
        self.response(i, ones, nb.len())
    }

    fn weights(&self) -> Vec<f64> {
        let total: f64 = self.mu0.iter().map(|m| m * (1.0 - m)).sum();
        self.mu0.iter().map(|m| m * (1.0 - m) / total).collect()
    }

    fn configs(&self) -> impl Iterator<Item = Vec<u8>> + '_ {
        let n = self.n();
        (0..1u32 << n).map(move |mask| (0..n).map(|k| ((mask >> k) & 1) as u8).collect())
    }
}

/// Exact diffusion targets and covariance functionals.
#[derive(Debug, Clone, Copy)]
pub struct Exact {
    pub d: f64,
    pub d_irr: f64,
    pub c_g: f64,
    pub c_g_irr: f64,
}

/// `truth` generates the outcomes; `d`, `d_irr` sum the edge contrasts over
/// `truth`, while `c_g`, `c_g_irr` sum covariances over the edges of `observed`.
pub fn exact(truth: &DirectedGraph, observed: &DirectedGraph, dz: &Design) -> Exact {
    let w = dz.weights();
    let n = dz.n();
    let edge_contrast = |i: usize, j: usize, y: &[u8]| -> f64 {
        let mut y1 = y.to_vec();
        y1[j] = 1;
        let mut y0 = y.to_vec();
        y0[j] = 0;
        dz.mean1(truth, i, &y1) - dz.mean1(truth, i, &y0)
    };
    let irr_contrast = |i: usize, j: usize, y: &[u8]| -> f64 {
        // Own period-0 value fixed at 0: the response of an untreated unit.
        let nb = truth.in_neighbors(i);
        let rest = nb.iter().filter(|&&k| k != j && y[k] == 1).count();
        dz.response(i, rest + 1, nb.len()) - dz.response(i, rest, nb.len())
    };

    let mut d = 0.0;
    let mut d_irr = 0.0;
    let mut p_untreated = vec![0.0; n];
    let mut irr_num = vec![Vec::new(); n];
    for i in 0..n {
        irr_num[i] = vec![0.0; truth.in_neighbors(i).len()];
    }
    let mut e_y1 = vec![0.0; n];
    let mut e_y1_y0 = vec![vec![0.0; n]; n];
    for y in dz.configs() {
        let p = dz.prob(&y);
        for i in 0..n {
            for (k, &j) in truth.in_neighbors(i).iter().enumerate() {
                d += p * w[j] * edge_contrast(i, j, &y);
                if y[i] == 0 {
                    irr_num[i][k] += p * irr_contrast(i, j, &y);
                }
            }
            if y[i] == 0 {
                p_untreated[i] += p;
            }
            let m = dz.mean1(truth, i, &y);
            e_y1[i] += p * m;
            for j in 0..n {
                if y[j] == 1 {
                    e_y1_y0[i][j] += p * m;
                }
            }
        }
    }
    for i in 0..n {
        for (k, &j) in truth.in_neighbors(i).iter().enumerate() {
            d_irr += w[j] * irr_num[i][k] / p_untreated[i];
        }
    }

    let nv2: f64 = dz.mu0.iter().map(|m| m * (1.0 - m)).sum();
    let mut c_g = 0.0;
    let mut c_g_irr = 0.0;
    for (i, j) in observed.edges() {
        let cov = e_y1_y0[i][j] - e_y1[i] * dz.mu0[j];
        c_g += cov / nv2;
        c_g_irr += cov / (1.0 - dz.mu0[i]) / nv2;
    }
    Exact {
        d,
        d_irr,
        c_g,
        c_g_irr,
    }
}

/// E[(ĝ₁(draw) − μ̂₁)·â] for node `i` under independent Bernoulli(μ̂₀) draws,
/// with ĝ₁ supplied as a function of (Ȳ, own value). Returns (μ̂₁, Cᵢ).
pub fn simulation_law(
    g: &DirectedGraph,
    i: usize,
    mu0: &[f64],
    g1: impl Fn(f64, u8) -> f64,
) -> (f64, f64) {
    let mut nodes: Vec<usize> = g.in_neighbors(i).to_vec();
    nodes.push(i);
    let deg = g.in_neighbors(i).len();
    let k = nodes.len();
    let mut terms = Vec::new();
    for mask in 0..1u32 << k {
        let bit = |t: usize| ((mask >> t) & 1) as u8;
        let mut p = 1.0;
        for (t, &node) in nodes.iter().enumerate() {
            p *= if bit(t) == 1 {
                mu0[node]
            } else {
                1.0 - mu0[node]
            };
        }
        let ones: usize = (0..deg).map(|t| bit(t) as usize).sum();
        let ybar = if deg == 0 {
            0.0
        } else {
            ones as f64 / deg as f64
        };
        let a: f64 = (0..deg).map(|t| bit(t) as f64 - mu0[nodes[t]]).sum();
        terms.push((p, g1(ybar, bit(deg)), a));
    }
    let mu1: f64 = terms.iter().map(|(p, v, _)| p * v).sum();
    let c: f64 = terms.iter().map(|(p, v, a)| p * (v - mu1) * a).sum();
    (mu1, c)
}
