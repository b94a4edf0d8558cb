use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{clamp_prob, MeanModel};
use crate::graph::DirectedGraph;
use crate::linalg::Matrix;
use crate::normal;
use crate::rng::{self, domain};
use crate::sum::KahanSum;
use crate::{Error, Result};

/// Fitted period-0 probabilities μ̂_{j,0}.
pub fn predict_mu0(x: &Matrix, model: &MeanModel) -> Result<Vec<f64>> {
    if x.cols() != model.p() {
        return Err(Error::DimensionMismatch {
            expected: model.p(),
            found: x.cols(),
        });
    }
    Ok((0..x.rows()).map(|j| model.mu0(x.row(j))).collect())
}

/// Simulated period-0 configurations and the per-draw statistics derived
/// from them. Storage is node-major: entry `(i, r)` sits at `i * R + r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDraws {
    r: usize,
    /// Simulated Y_{i,0,r}.
    own: Vec<u8>,
    /// Number of in-neighbors with simulated outcome 1.
    counts: Vec<u32>,
    /// ĝ₁ evaluated at draw r.
    g1: Vec<f64>,
    degree: Vec<u32>,
    /// Σ_{j ∈ N(i)} μ̂_{j,0}.
    nbr_mu0: Vec<f64>,
}

impl SimDraws {
    pub fn draws(&self) -> usize {
        self.r
    }

    pub fn n(&self) -> usize {
        self.degree.len()
    }

    pub fn own(&self, i: usize, r: usize) -> u8 {
        self.own[i * self.r + r]
    }

    pub fn ybar(&self, i: usize, r: usize) -> f64 {
        match self.degree[i] {
            0 => 0.0,
            d => self.counts[i * self.r + r] as f64 / d as f64,
        }
    }

    /// â_{i,r} = Σ_{j ∈ N(i)} (Y_{j,0,r} − μ̂_{j,0}).
    pub fn a(&self, i: usize, r: usize) -> f64 {
        self.counts[i * self.r + r] as f64 - self.nbr_mu0[i]
    }

    pub fn g1(&self, i: usize, r: usize) -> f64 {
        self.g1[i * self.r + r]
    }

    /// Ĉ_i = (1/R) Σ_r ε̂_{i,1,r} â_{i,r} with ε̂_{i,1,r} = ĝ₁(draw r) − μ̂_{i,1}.
    pub fn c_hat(&self, mu1: &[f64]) -> Result<Vec<f64>> {
        if self.r == 0 {
            return Err(Error::MissingDraws);
        }
        if mu1.len() != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                found: mu1.len(),
            });
        }
        Ok((0..self.n())
            .map(|i| {
                if self.degree[i] == 0 {
                    return 0.0;
                }
                let base = i * self.r;
                let mut acc = KahanSum::new();
                for r in 0..self.r {
                    let a = self.counts[base + r] as f64 - self.nbr_mu0[i];
                    acc.add((self.g1[base + r] - mu1[i]) * a);
                }
                acc.value() / self.r as f64
            })
            .collect())
    }
}

/// Simulates `draws` period-0 configurations `Y_{j,0,r} = 1{μ̂_{j,0} ≥ U_{j,r}}`
/// and returns μ̂_{i,1} = (1/R) Σ_r ĝ₁(Ȳ_{i,0,r}, Y_{i,0,r}, X_i) with the draws.
///
/// The uniforms of node `j` come from a stream keyed by `ids[j]`, so the
/// output is invariant to relabeling nodes consistently.
pub fn simulate_mu1(
    g: &DirectedGraph,
    x: &Matrix,
    model: &MeanModel,
    draws: usize,
    seed: u64,
    ids: &[u64],
) -> Result<(Vec<f64>, SimDraws)> {
    if draws == 0 {
        return Err(Error::InvalidArgument("draw count must be at least 1"));
    }
    let n = g.n();
    for len in [x.rows(), ids.len()] {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: len,
            });
        }
    }
    let mu0 = predict_mu0(x, model)?;
    let r_len = draws;

    let mut own = vec![0u8; n * r_len];
    for j in 0..n {
        let mut rng = rng::stream(seed, domain::MU1_DRAWS, ids[j]);
        for slot in &mut own[j * r_len..(j + 1) * r_len] {
            *slot = (mu0[j] >= rng::uniform(&mut rng)) as u8;
        }
    }

    let mut counts = vec![0u32; n * r_len];
    let mut degree = vec![0u32; n];
    let mut nbr_mu0 = vec![0.0; n];
    for i in 0..n {
        let nbrs = g.in_neighbors(i);
        degree[i] = nbrs.len() as u32;
        nbr_mu0[i] = nbrs.iter().map(|&j| mu0[j]).sum();
        let dst = &mut counts[i * r_len..(i + 1) * r_len];
        for &j in nbrs {
            for (c, &y) in dst.iter_mut().zip(&own[j * r_len..(j + 1) * r_len]) {
                *c += y as u32;
            }
        }
    }

    // ĝ₁ depends on the draw only through (count, own), so tabulate it.
    let mut g1 = vec![0.0; n * r_len];
    let mut mu1 = vec![0.0; n];
    let own_states: &[u8] = if model.irreversible { &[0] } else { &[0, 1] };
    for i in 0..n {
        let d = degree[i] as usize;
        let base = model.base_index1(x.row(i));
        let mut table = vec![0.0; 2 * (d + 1)];
        for &o in own_states {
            for k in 0..=d {
                let ybar = if d == 0 { 0.0 } else { k as f64 / d as f64 };
                let index = base + model.delta_hat * ybar + model.own_hat * o as f64;
                table[o as usize * (d + 1) + k] = clamp_prob(normal::cdf(index));
            }
        }
        let mut acc = KahanSum::new();
        for r in 0..r_len {
            let at = i * r_len + r;
            let o = own[at];
            let v = if model.irreversible && o == 1 {
                0.0
            } else {
                table[o as usize * (d + 1) + counts[at] as usize]
            };
            g1[at] = v;
            acc.add(v);
        }
        mu1[i] = acc.value() / r_len as f64;
    }

    Ok((
        mu1,
        SimDraws {
            r: r_len,
            own,
            counts,
            g1,
            degree,
            nbr_mu0,
        },
    ))
}
