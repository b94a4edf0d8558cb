#![allow(dead_code)]

pub mod oracle;
pub mod properties;

use netdiff_core::linalg::Matrix;
use netdiff_core::DirectedGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn figure_one() -> DirectedGraph {
    DirectedGraph::from_edge_list(&[(0, 2), (0, 1), (1, 0), (1, 2), (2, 3), (3, 1)], 4).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Each ordered pair carries an edge with probability `p`.
pub fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> DirectedGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    DirectedGraph::from_edge_list(&edges, n).unwrap()
}

pub fn random_matrix(
    rows: usize,
    cols: usize,
    scale: f64,
    shift: f64,
    rng: &mut ChaCha8Rng,
) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| shift + scale * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_perm(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let k = rng.random_range(0..=i);
        p.swap(i, k);
    }
    p
}

/// Rows of `x` moved so that old row `i` becomes row `perm[i]`.
pub fn permute_rows(x: &Matrix, perm: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        out.row_mut(perm[i]).copy_from_slice(x.row(i));
    }
    out
}

pub fn permute_vec<T: Copy + Default>(v: &[T], perm: &[usize]) -> Vec<T> {
    let mut out = vec![T::default(); v.len()];
    for (i, &x) in v.iter().enumerate() {
        out[perm[i]] = x;
    }
    out
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
