//! Diffusion estimators, the dependency-graph variance estimator, confidence
//! intervals and confidence lower bounds.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};

use crate::dgp::Panel;
use crate::graph::{DirectedGraph, OverlapPairs};
use crate::meanfit::{
    simulate_mu1, FitMode, FitOptions, LassoOptions, MeanModel, Mu0Model, SimDraws, PROB_CLAMP,
};
use crate::normal;
use crate::{Error, Result};

/// Below this, v̂² is treated as zero.
pub const V2_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Ĉ_G, targeting D.
    Plain,
    /// Ĉ_G^I, targeting D^I: residuals rescaled by 1/(1 − μ̂_{i,0}).
    #[default]
    #[serde(rename = "irr")]
    Irreversible,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Plain => "plain",
            Variant::Irreversible => "irr",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Variant::Plain),
            "irr" | "irreversible" => Ok(Variant::Irreversible),
            _ => Err(Error::InvalidArgument("variant must be `plain` or `irr`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedMeans {
    pub mu0_hat: Vec<f64>,
    pub mu1_hat: Vec<f64>,
    pub eps0_hat: Vec<f64>,
    pub eps1_hat: Vec<f64>,
    pub v2_hat: f64,
    #[serde(skip)]
    pub draws: Option<SimDraws>,
}

impl FittedMeans {
    pub fn n(&self) -> usize {
        self.mu0_hat.len()
    }

    /// ê_{i,1} = ε̂_{i,1} / (1 − μ̂_{i,0}), the denominator floored at the
    /// probability clamp.
    pub fn e1_hat(&self) -> Vec<f64> {
        self.eps1_hat
            .iter()
            .zip(&self.mu0_hat)
            .map(|(e, m)| e / (1.0 - m).max(PROB_CLAMP))
            .collect()
    }

    fn period1_residuals(&self, variant: Variant) -> Vec<f64> {
        match variant {
            Variant::Plain => self.eps1_hat.clone(),
            Variant::Irreversible => self.e1_hat(),
        }
    }
}

/// Residuals ε̂_{j,0} = Y_{j,0} − μ̂_{j,0}, ε̂_{i,1} = Y_{i,1} − μ̂_{i,1} and
/// v̂² = (1/n) Σ ε̂²_{j,0}.
pub fn residuals_and_v2(
    y0: &[u8],
    y1: &[u8],
    mu0_hat: &[f64],
    mu1_hat: &[f64],
) -> Result<FittedMeans> {
    let n = y0.len();
    for len in [y1.len(), mu0_hat.len(), mu1_hat.len()] {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: len,
            });
        }
    }
    if n == 0 {
        return Err(Error::InvalidSize {
            n,
            reason: "panel is empty",
        });
    }
    if mu0_hat.iter().chain(mu1_hat).any(|m| !m.is_finite()) {
        return Err(Error::NonFinite);
    }
    let eps0_hat: Vec<f64> = y0.iter().zip(mu0_hat).map(|(&y, m)| y as f64 - m).collect();
    let eps1_hat: Vec<f64> = y1.iter().zip(mu1_hat).map(|(&y, m)| y as f64 - m).collect();
    let v2_hat = crate::sum::sum(eps0_hat.iter().map(|e| e * e)) / n as f64;
    if !(v2_hat >= V2_THRESHOLD) {
        return Err(Error::DegenerateV2 { v2: v2_hat });
    }
    Ok(FittedMeans {
        mu0_hat: mu0_hat.to_vec(),
        mu1_hat: mu1_hat.to_vec(),
        eps0_hat,
        eps1_hat,
        v2_hat,
        draws: None,
    })
}

/// â_i = Σ_{j ∈ N_G(i)} ε̂_{j,0}.
pub fn a_hat(fm: &FittedMeans, g: &DirectedGraph) -> Result<Vec<f64>> {
    if g.n() != fm.n() {
        return Err(Error::DimensionMismatch {
            expected: fm.n(),
            found: g.n(),
        });
    }
    Ok((0..g.n())
        .map(|i| g.in_neighbors(i).iter().map(|&j| fm.eps0_hat[j]).sum())
        .collect())
}

/// Ĉ_G = (1/(n v̂²)) Σ_i ε̂_{i,1} â_i, or Ĉ_G^I with ê_{i,1} in place of ε̂_{i,1}.
pub fn estimate_cg(fm: &FittedMeans, g: &DirectedGraph, variant: Variant) -> Result<f64> {
    if !(fm.v2_hat >= V2_THRESHOLD) {
        return Err(Error::DegenerateV2 { v2: fm.v2_hat });
    }
    let a = a_hat(fm, g)?;
    let e = fm.period1_residuals(variant);
    let total = crate::sum::sum(e.iter().zip(&a).map(|(e, a)| e * a));
    Ok(total / (fm.n() as f64 * fm.v2_hat))
}

/// The influence-function pieces q̂_i and ψ̂_i of the variance estimator.
pub fn compute_q_psi(
    fm: &FittedMeans,
    g: &DirectedGraph,
    estimate: f64,
    variant: Variant,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let draws = fm.draws.as_ref().ok_or(Error::MissingDraws)?;
    if draws.draws() == 0 || draws.n() != fm.n() {
        return Err(Error::MissingDraws);
    }
    let a = a_hat(fm, g)?;
    let e = fm.period1_residuals(variant);
    let c = draws.c_hat(&fm.mu1_hat)?;
    let n = fm.n();
    let mut q = Vec::with_capacity(n);
    let mut psi = Vec::with_capacity(n);
    for i in 0..n {
        let eps0 = fm.eps0_hat[i];
        let m0 = fm.mu0_hat[i];
        q.push(e[i] * a[i] - eps0 * eps0 * estimate);
        let ci = match variant {
            Variant::Plain => c[i],
            Variant::Irreversible => c[i] / (1.0 - m0).max(PROB_CLAMP),
        };
        psi.push(ci - m0 * (1.0 - m0) * estimate);
    }
    Ok((q, psi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    /// σ̂²_G over all overlapping ordered pairs, diagonal included.
    pub sigma2_g: f64,
    /// σ̂²_{1,G}, the diagonal part alone.
    pub sigma2_one: f64,
    /// σ̂²_{G,+}: σ̂²_G if positive, else σ̂²_{1,G}.
    pub sigma2_plus: f64,
    pub fallback_used: bool,
}

/// σ̂²_G = (1/(n v̂⁴)) Σ_{(i₁,i₂): N̄(i₁) ∩ N̄(i₂) ≠ ∅} (q̂−ψ̂)_{i₁} (q̂−ψ̂)_{i₂}.
pub fn variance(
    q_hat: &[f64],
    psi_hat: &[f64],
    fm: &FittedMeans,
    pairs: &OverlapPairs,
) -> Result<VarianceEstimate> {
    let n = fm.n();
    for len in [q_hat.len(), psi_hat.len(), pairs.n()] {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: len,
            });
        }
    }
    let z: Vec<f64> = q_hat.iter().zip(psi_hat).map(|(q, p)| q - p).collect();
    let scale = n as f64 * fm.v2_hat * fm.v2_hat;
    let sigma2_g = pairs.quadratic_form(&z) / scale;
    let sigma2_one = crate::sum::sum(z.iter().map(|v| v * v)) / scale;
    let (sigma2_plus, fallback_used) = if sigma2_g > 0.0 {
        (sigma2_g, false)
    } else {
        (sigma2_one, true)
    };
    if !(sigma2_plus > 0.0) || !sigma2_plus.is_finite() {
        return Err(Error::DegenerateVariance);
    }
    Ok(VarianceEstimate {
        sigma2_g,
        sigma2_one,
        sigma2_plus,
        fallback_used,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha { alpha })
    }
}

/// Ĉ ± z_{1−α/2} σ̂_{G,+} / √n.
pub fn confidence_interval(
    estimate: f64,
    sigma_plus: f64,
    n: usize,
    alpha: f64,
) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    let half = normal::quantile(1.0 - alpha / 2.0) * sigma_plus / libm::sqrt(n as f64);
    Ok((estimate - half, estimate + half))
}

/// L̂_{1−α} = Ĉ − z_{1−α} σ̂_{G,+} / √n.
pub fn confidence_lower_bound(estimate: f64, sigma_plus: f64, n: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    // For α ≥ 1/2 the quantile is nonpositive; the bound never exceeds the estimate.
    let z = normal::quantile(1.0 - alpha).max(0.0);
    Ok(estimate - z * sigma_plus / libm::sqrt(n as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub mode: FitMode,
    pub mu0: Mu0Model,
    pub variant: Variant,
    /// Period-1 model imposes Y_{i,1} = 0 when Y_{i,0} = 1.
    pub irreversible: bool,
    pub alpha: f64,
    /// Simulation draws R; `None` means max(1000, n).
    pub draws: Option<usize>,
    pub seed: u64,
    pub lasso: LassoOptions,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            mode: FitMode::Mle,
            mu0: Mu0Model::Probit,
            variant: Variant::Irreversible,
            irreversible: true,
            alpha: 0.05,
            draws: None,
            seed: 0,
            lasso: LassoOptions::default(),
        }
    }
}

impl EstimateOptions {
    pub fn draws_for(&self, n: usize) -> usize {
        self.draws.unwrap_or(n.max(1000))
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            mu0: self.mu0,
            mode: self.mode,
            irreversible: self.irreversible,
            lasso: self.lasso,
            seed: crate::rng::derive_seed(self.seed, 1),
        }
    }

    fn draw_seed(&self) -> u64 {
        crate::rng::derive_seed(self.seed, 2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionReport {
    pub estimate: f64,
    pub sigma_plus: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub clb: f64,
    pub alpha: f64,
    pub variant: Variant,
    pub n: usize,
    pub draws: usize,
    pub d_mx: f64,
    pub d_av: f64,
    pub fallback_used: bool,
    pub sigma2_g: f64,
    pub sigma2_one: f64,
    pub v2_hat: f64,
    /// d_mx⁵ √(d_mx d_av) / √n; small values indicate the sparsity regime
    /// where the normal approximation is expected to hold.
    pub rate_statistic: f64,
    pub model: MeanModel,
}

/// Fitted means and draws for one panel, from which reports for either
/// variant and any α can be produced without refitting.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub model: MeanModel,
    pub fm: FittedMeans,
    pub draws: usize,
}

/// Runs the simulation step and residual computation for a fitted model.
pub fn prepare_with_model(
    panel: &Panel,
    g: &DirectedGraph,
    model: MeanModel,
    draws: usize,
    seed: u64,
) -> Result<Prepared> {
    if g.n() != panel.n() {
        return Err(Error::DimensionMismatch {
            expected: panel.n(),
            found: g.n(),
        });
    }
    let (mu1, sim) = simulate_mu1(g, &panel.x, &model, draws, seed, &panel.ids)?;
    let mu0 = crate::meanfit::predict_mu0(&panel.x, &model)?;
    let mut fm = residuals_and_v2(&panel.y0, &panel.y1, &mu0, &mu1)?;
    fm.draws = Some(sim);
    Ok(Prepared { model, fm, draws })
}

/// Fits the mean models and runs the simulation step.
pub fn prepare(panel: &Panel, g: &DirectedGraph, opts: &EstimateOptions) -> Result<Prepared> {
    let model = MeanModel::fit(g, panel, &opts.fit_options())?;
    prepare_with_model(panel, g, model, opts.draws_for(panel.n()), opts.draw_seed())
}

impl Prepared {
    pub fn report(
        &self,
        g: &DirectedGraph,
        pairs: &OverlapPairs,
        variant: Variant,
        alpha: f64,
    ) -> Result<DiffusionReport> {
        check_alpha(alpha)?;
        let n = self.fm.n();
        let estimate = estimate_cg(&self.fm, g, variant)?;
        let (q, psi) = compute_q_psi(&self.fm, g, estimate, variant)?;
        let var = variance(&q, &psi, &self.fm, pairs)?;
        let sigma_plus = libm::sqrt(var.sigma2_plus);
        let (ci_lower, ci_upper) = confidence_interval(estimate, sigma_plus, n, alpha)?;
        let clb = confidence_lower_bound(estimate, sigma_plus, n, alpha)?;
        let stats = g.degree_stats();
        let rate_statistic =
            libm::pow(stats.d_mx, 5.0) * libm::sqrt(stats.d_mx * stats.d_av) / libm::sqrt(n as f64);
        Ok(DiffusionReport {
            estimate,
            sigma_plus,
            ci_lower,
            ci_upper,
            clb,
            alpha,
            variant,
            n,
            draws: self.draws,
            d_mx: stats.d_mx,
            d_av: stats.d_av,
            fallback_used: var.fallback_used,
            sigma2_g: var.sigma2_g,
            sigma2_one: var.sigma2_one,
            v2_hat: self.fm.v2_hat,
            rate_statistic,
            model: self.model.clone(),
        })
    }
}

/// Full pipeline: fit → predict → simulate μ̂₁ → residuals → estimate →
/// q̂/ψ̂ → variance → CI and CLB.
pub fn estimate_diffusion(
    panel: &Panel,
    g: &DirectedGraph,
    opts: &EstimateOptions,
) -> Result<DiffusionReport> {
    check_alpha(opts.alpha)?;
    let prepared = prepare(panel, g, opts)?;
    prepared.report(g, &g.overlap_pairs(), opts.variant, opts.alpha)
}

/// One-line human-readable summary of a report.
pub fn summary_line(r: &DiffusionReport) -> String {
    alloc::format!(
        "{} estimate {:.4}, {:.0}% CI [{:.4}, {:.4}], lower bound {:.4} (n = {}, sigma+ = {:.4}{})",
        r.variant,
        r.estimate,
        100.0 * (1.0 - r.alpha),
        r.ci_lower,
        r.ci_upper,
        r.clb,
        r.n,
        r.sigma_plus,
        if r.fallback_used {
            ", diagonal fallback"
        } else {
            ""
        }
    )
}
