//! Property checks shared by the test suites and the acceptance runner.

use netdiff_core::dgp::{gen_covariates, simulate_panel, DgpSpec, Panel};
use netdiff_core::inference::{
    a_hat, compute_q_psi, estimate_cg, estimate_diffusion, prepare_with_model, variance, Prepared,
};
use netdiff_core::linalg::Matrix;
use netdiff_core::meanfit::lasso::{kkt_violation, lambda_max};
use netdiff_core::meanfit::{
    fit_lasso, predict_mu0, pseudo_loglik, simulate_mu1, FitDiagnostics, LambdaChoice,
    LassoOptions, MeanModel, Mu0Model,
};
use netdiff_core::{normal, DirectedGraph, Error, EstimateOptions, Variant};
use rand::Rng;

use super::oracle::Design;
use super::{random_graph, random_matrix, rng};

pub fn fixed_model(irreversible: bool, delta: f64) -> MeanModel {
    MeanModel {
        mu0_model: Mu0Model::Probit,
        gamma_hat: vec![-0.4, 0.3, -0.2],
        delta_hat: delta,
        own_hat: if irreversible { 0.0 } else { 0.3 },
        beta_hat: vec![-0.6, 0.5, 0.2],
        irreversible,
        lasso_lambda: 0.0,
        mu0_diagnostics: FitDiagnostics::default(),
        fit_diagnostics: FitDiagnostics::default(),
    }
}

/// Random panel with fitted means from a fixed model.
pub fn instance(seed: u64, draws: usize) -> (DirectedGraph, Panel, MeanModel, Prepared) {
    let mut r = rng(seed);
    let n = r.random_range(2..=30);
    let g = random_graph(n, r.random_range(0.0..0.3), &mut r);
    let x = gen_covariates(n, 2, seed);
    let irreversible = r.random::<bool>();
    let m = fixed_model(irreversible, r.random_range(-1.0..2.0));
    loop {
        let y0: Vec<u8> = (0..n).map(|_| (r.random::<f64>() < 0.4) as u8).collect();
        let y1: Vec<u8> = (0..n)
            .map(|i| ((r.random::<f64>() < 0.35) && !(irreversible && y0[i] == 1)) as u8)
            .collect();
        let panel = Panel::new(y0, y1, x.clone()).unwrap();
        if let Ok(p) = prepare_with_model(&panel, &g, m.clone(), draws, seed) {
            return (g, panel, m, p);
        }
    }
}

pub fn closed_in(g: &DirectedGraph, i: usize) -> Vec<usize> {
    (0..g.n()).filter(|&j| j == i || g.has_edge(i, j)).collect()
}

pub fn overlaps(g: &DirectedGraph, a: usize, b: usize) -> bool {
    let na = closed_in(g, a);
    closed_in(g, b).iter().any(|k| na.contains(k))
}

pub fn simulated(n: usize, seed: u64) -> (DirectedGraph, Panel) {
    let g = DirectedGraph::erdos_renyi(n, 1.5, seed).unwrap();
    let x = gen_covariates(n, 5, seed);
    let panel = simulate_panel(&g, &x, &DgpSpec::low_dimensional(1.0), seed).unwrap();
    (g, panel)
}

pub fn with_intercept(x: &Matrix) -> Matrix {
    let mut data = Vec::with_capacity(x.rows() * (x.cols() + 1));
    for i in 0..x.rows() {
        data.push(1.0);
        data.extend_from_slice(x.row(i));
    }
    Matrix::from_vec(x.rows(), x.cols() + 1, data).unwrap()
}

pub fn probit_sample(design: &Matrix, theta: &[f64], seed: u64) -> Vec<u8> {
    let mut r = rng(seed);
    (0..design.rows())
        .map(|i| {
            let eta: f64 = design.row(i).iter().zip(theta).map(|(a, b)| a * b).sum();
            (r.random::<f64>() < normal::cdf(eta)) as u8
        })
        .collect()
}

pub fn tight() -> LassoOptions {
    LassoOptions {
        tol: 1e-14,
        max_iter: 200_000,
        ..LassoOptions::default()
    }
}

pub fn naive_formulas() {
    for seed in 0..60 {
        let (g, panel, m, prep) = instance(seed, 40);
        let n = panel.n();
        let fm = &prep.fm;
        let draws = fm.draws.as_ref().unwrap();
        let mu0 = predict_mu0(&panel.x, &m).unwrap();

        let v2: f64 = (0..n)
            .map(|j| (panel.y0[j] as f64 - mu0[j]).powi(2))
            .sum::<f64>()
            / n as f64;
        assert!((fm.v2_hat - v2).abs() < 1e-12);
        let a: Vec<f64> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| g.has_edge(i, j))
                    .map(|j| panel.y0[j] as f64 - mu0[j])
                    .sum()
            })
            .collect();
        let lib_a = a_hat(fm, &g).unwrap();
        for i in 0..n {
            assert!((lib_a[i] - a[i]).abs() < 1e-10);
        }

        // Per-draw statistics rebuilt from the simulated own outcomes alone.
        let r = draws.draws();
        let mut c_i = vec![0.0; n];
        for i in 0..n {
            let nb: Vec<usize> = (0..n).filter(|&j| g.has_edge(i, j)).collect();
            let mut acc = 0.0;
            let mut mean = 0.0;
            for k in 0..r {
                let ones = nb.iter().filter(|&&j| draws.own(j, k) == 1).count();
                let ybar = if nb.is_empty() {
                    0.0
                } else {
                    ones as f64 / nb.len() as f64
                };
                let g1 = m.g1(panel.x.row(i), ybar, draws.own(i, k));
                assert!((draws.g1(i, k) - g1).abs() < 1e-14);
                mean += g1 / r as f64;
            }
            assert!((fm.mu1_hat[i] - mean).abs() < 1e-12);
            for k in 0..r {
                let ak: f64 = nb.iter().map(|&j| draws.own(j, k) as f64 - mu0[j]).sum();
                assert!((draws.a(i, k) - ak).abs() < 1e-12);
                acc += (draws.g1(i, k) - fm.mu1_hat[i]) * ak;
            }
            c_i[i] = acc / r as f64;
        }

        let pairs = g.overlap_pairs();
        for variant in [Variant::Plain, Variant::Irreversible] {
            let e: Vec<f64> = (0..n)
                .map(|i| {
                    let eps = panel.y1[i] as f64 - fm.mu1_hat[i];
                    match variant {
                        Variant::Plain => eps,
                        Variant::Irreversible => eps / (1.0 - mu0[i]),
                    }
                })
                .collect();
            let est: f64 = (0..n).map(|i| e[i] * a[i]).sum::<f64>() / (n as f64 * v2);
            let lib_est = estimate_cg(fm, &g, variant).unwrap();
            assert!((lib_est - est).abs() < 1e-10, "seed {seed}");

            let (q, psi) = compute_q_psi(fm, &g, lib_est, variant).unwrap();
            let mut z = vec![0.0; n];
            for i in 0..n {
                let eps0 = panel.y0[i] as f64 - mu0[i];
                let qi = e[i] * a[i] - eps0 * eps0 * est;
                let ci = match variant {
                    Variant::Plain => c_i[i],
                    Variant::Irreversible => c_i[i] / (1.0 - mu0[i]),
                };
                let pi = ci - mu0[i] * (1.0 - mu0[i]) * est;
                assert!((q[i] - qi).abs() < 1e-10);
                assert!((psi[i] - pi).abs() < 1e-10);
                z[i] = qi - pi;
            }
            let mut s = 0.0;
            for i1 in 0..n {
                for i2 in 0..n {
                    if overlaps(&g, i1, i2) {
                        s += z[i1] * z[i2];
                    }
                }
            }
            let scale = n as f64 * v2 * v2;
            let diag: f64 = z.iter().map(|v| v * v).sum::<f64>() / scale;
            if let Ok(var) = variance(&q, &psi, fm, &pairs) {
                assert!((var.sigma2_g - s / scale).abs() < 1e-10, "seed {seed}");
                assert!((var.sigma2_one - diag).abs() < 1e-10);
                assert_eq!(var.fallback_used, !(var.sigma2_g > 0.0));
                assert!(var.sigma2_plus > 0.0);
            } else {
                assert!(!(s > 0.0) && diag == 0.0);
            }
        }
    }
}

pub fn overlap_pairs_brute_force() {
    for seed in 0..80 {
        let mut r = rng(seed);
        let n = r.random_range(1..=50);
        let g = random_graph(n, r.random_range(0.0..0.15), &mut r);
        let got: Vec<(usize, usize)> = g.overlap_pairs().iter().collect();
        let mut want = Vec::new();
        for a in 0..n {
            for b in a..n {
                if overlaps(&g, a, b) {
                    want.push((a, b));
                }
            }
        }
        assert_eq!(got, want, "seed {seed}");
    }
}

pub fn intervals_nest() {
    for seed in 0..5 {
        let (g, panel) = simulated(300, seed);
        let mut opts = EstimateOptions {
            seed,
            draws: Some(300),
            ..EstimateOptions::default()
        };
        let mut prev: Option<netdiff_core::DiffusionReport> = None;
        for alpha in [0.01, 0.05, 0.1, 0.3] {
            opts.alpha = alpha;
            let r = estimate_diffusion(&panel, &g, &opts).unwrap();
            assert!(r.sigma_plus > 0.0);
            assert!(r.ci_lower <= r.estimate && r.estimate <= r.ci_upper && r.clb <= r.estimate);
            if let Some(p) = prev {
                assert!(p.ci_lower <= r.ci_lower && p.ci_upper >= r.ci_upper);
                assert!(p.clb <= r.clb);
                assert_eq!(p.estimate, r.estimate);
            }
            prev = Some(r);
        }
    }
}

pub fn reports_relabel_invariant() {
    let n = 200;
    let (g, panel) = simulated(n, 11);
    let perm = super::random_perm(n, &mut rng(4));
    let relabeled = Panel::with_ids(
        super::permute_vec(&panel.y0, &perm),
        super::permute_vec(&panel.y1, &perm),
        super::permute_rows(&panel.x, &perm),
        super::permute_vec(&panel.ids, &perm),
    )
    .unwrap();
    let pg = g.permute(&perm).unwrap();
    for variant in [Variant::Plain, Variant::Irreversible] {
        let opts = EstimateOptions {
            variant,
            draws: Some(400),
            seed: 3,
            ..EstimateOptions::default()
        };
        let a = estimate_diffusion(&panel, &g, &opts).unwrap();
        let b = estimate_diffusion(&relabeled, &pg, &opts).unwrap();
        let close = |u: f64, v: f64| (u - v).abs() <= 1e-9 * (1.0 + u.abs());
        assert!(
            close(a.estimate, b.estimate),
            "{} vs {}",
            a.estimate,
            b.estimate
        );
        assert!(close(a.sigma2_g, b.sigma2_g));
        assert!(
            close(a.ci_lower, b.ci_lower) && close(a.ci_upper, b.ci_upper) && close(a.clb, b.clb)
        );
        assert_eq!(a.fallback_used, b.fallback_used);
    }
}

pub fn sigma_plus_positive() {
    for seed in 0..40 {
        let (g, panel, _, prep) = instance(seed + 500, 30);
        for variant in [Variant::Plain, Variant::Irreversible] {
            match prep.report(&g, &g.overlap_pairs(), variant, 0.05) {
                Ok(r) => assert!(r.sigma_plus > 0.0 && r.sigma_plus.is_finite()),
                Err(e) => assert_eq!(e, Error::DegenerateVariance, "n = {}", panel.n()),
            }
        }
    }
}

pub fn gradient_finite_differences() {
    let h = 1e-5;
    for seed in 0..100 {
        let mut r = rng(seed);
        let n = r.random_range(5..60);
        let p = r.random_range(1..6);
        let design = random_matrix(n, p, 1.5, 0.2, &mut r);
        let theta: Vec<f64> = (0..p).map(|_| r.random_range(-0.7..0.7)).collect();
        let y: Vec<u8> = (0..n).map(|_| r.random::<bool>() as u8).collect();
        let (_, grad) = pseudo_loglik(&theta, &y, &design).unwrap();
        for k in 0..p {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[k] += h;
            tm[k] -= h;
            let fd = (pseudo_loglik(&tp, &y, &design).unwrap().0
                - pseudo_loglik(&tm, &y, &design).unwrap().0)
                / (2.0 * h);
            let rel = (fd - grad[k]).abs() / grad[k].abs().max(1.0);
            assert!(
                rel < 1e-6,
                "seed {seed} k {k}: fd {fd} analytic {}",
                grad[k]
            );
        }
    }
}

pub fn lasso_subgradient_optimality() {
    let mut r = rng(8);
    for seed in 0..6 {
        let n = 150;
        let p = 30;
        let x = with_intercept(&random_matrix(n, p, 1.7, 1.0, &mut r));
        let mut theta = vec![0.0; p + 1];
        theta[0] = -0.5;
        theta[1..4].copy_from_slice(&[0.8, -0.6, 0.5]);
        let y = probit_sample(&x, &theta, seed);
        let ids: Vec<u64> = (0..n as u64).collect();
        let (lmax, _) = lambda_max(&y, &x, 1).unwrap();
        for frac in [0.5, 0.2, 0.05] {
            let lambda = frac * lmax;
            let fit =
                fit_lasso(&y, &x, 1, &ids, LambdaChoice::Fixed { lambda }, &tight(), 0).unwrap();
            let v = kkt_violation(&y, &x, 1, &fit.theta, lambda).unwrap();
            assert!(
                v < 1e-4 * (1.0 + lambda),
                "seed {seed} frac {frac}: violation {v}"
            );
        }
    }
}

pub fn model_with(gamma: Vec<f64>, delta: f64, beta: Vec<f64>, irreversible: bool) -> MeanModel {
    MeanModel {
        mu0_model: Mu0Model::Probit,
        gamma_hat: gamma,
        delta_hat: delta,
        own_hat: 0.0,
        beta_hat: beta,
        irreversible,
        lasso_lambda: 0.0,
        mu0_diagnostics: FitDiagnostics::default(),
        fit_diagnostics: FitDiagnostics::default(),
    }
}

pub fn mu1_relabel_invariant() {
    let n = 40;
    let g = DirectedGraph::erdos_renyi(n, 3.0, 8).unwrap();
    let x = gen_covariates(n, 2, 8);
    let m = model_with(vec![-0.5, 0.3, 0.1], 0.8, vec![-1.0, 0.4, 0.2], true);
    let ids: Vec<u64> = (0..n as u64).map(|i| 1000 + 3 * i).collect();
    let (a, _) = simulate_mu1(&g, &x, &m, 300, 5, &ids).unwrap();
    let (b, _) = simulate_mu1(&g, &x, &m, 300, 5, &ids).unwrap();
    assert_eq!(a, b);
    let perm = super::random_perm(n, &mut rng(1));
    let (c, _) = simulate_mu1(
        &g.permute(&perm).unwrap(),
        &super::permute_rows(&x, &perm),
        &m,
        300,
        5,
        &super::permute_vec(&ids, &perm),
    )
    .unwrap();
    assert_eq!(super::permute_vec(&a, &perm), c);
}

/// A small random design for exact enumeration.
pub struct Instance {
    pub truth: DirectedGraph,
    pub design: Design,
    pub x: netdiff_core::linalg::Matrix,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

pub fn lemma_instance(seed: u64, delta_range: (f64, f64)) -> Instance {
    let mut r = rng(seed);
    let n = r.random_range(2..=6);
    let truth = random_graph(n, r.random_range(0.2..0.8), &mut r);
    let x = random_matrix(n, 3, 1.0, 0.5, &mut r);
    let gamma: Vec<f64> = (0..3).map(|_| r.random_range(-0.8..0.8)).collect();
    let beta: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
    let delta = r.random_range(delta_range.0..delta_range.1);
    let irreversible = r.random::<bool>();
    let design = Design::probit(&x, &gamma, &beta, delta, irreversible);
    Instance {
        truth,
        design,
        x,
        gamma,
        beta,
    }
}

/// Keeps a random strict subset of the edges; `None` if the graph has none.
pub fn strict_subgraph(g: &DirectedGraph, seed: u64) -> Option<DirectedGraph> {
    let edges: Vec<(usize, usize)> = g.edges().collect();
    if edges.is_empty() {
        return None;
    }
    let mut r = rng(seed);
    let drop = r.random_range(0..edges.len());
    let kept: Vec<(usize, usize)> = edges
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != drop && r.random::<f64>() < 0.7)
        .map(|(_, &e)| e)
        .collect();
    Some(DirectedGraph::from_edge_list(&kept, g.n()).unwrap())
}
