//! Per-cell Monte Carlo kernels: cell preparation with a fixed (G, X) and
//! true targets, single replications, and aggregation into a report.
//!
//! Replications are independent given the cell and draw from streams derived
//! from `(seed, rep)`, so any schedule yields the same records; aggregation
//! walks records in replication order.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dgp::{self, DgpSpec, TrueDiffusion, TruthSimulator};
use crate::graph::{DegreeStats, DirectedGraph, OverlapPairs};
use crate::inference::{self, EstimateOptions, Variant};
use crate::linalg::Matrix;
use crate::meanfit::{FitMode, LambdaChoice, LassoOptions, Mu0Model};
use crate::rng::{self, domain};
use crate::sum::KahanSum;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum GraphSpec {
    ErdosRenyi { lambda: f64 },
    BarabasiAlbert { m: usize },
}

impl GraphSpec {
    pub fn generate(&self, n: usize, seed: u64) -> Result<DirectedGraph> {
        match *self {
            GraphSpec::ErdosRenyi { lambda } => DirectedGraph::erdos_renyi(n, lambda, seed),
            GraphSpec::BarabasiAlbert { m } => DirectedGraph::barabasi_albert(n, m, seed),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            GraphSpec::ErdosRenyi { lambda } => format!("ER(lambda={lambda})"),
            GraphSpec::BarabasiAlbert { m } => format!("BA(m={m})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Design {
    /// p = 5, probit period-0 outcomes, MLE fits.
    #[default]
    LowDimensional,
    /// `p` covariates, five active, Bernoulli(0.3) period-0 outcomes, LASSO
    /// with 10-fold CV and an intercept-only period-0 model.
    HighDimensional { p: usize },
}

/// Which estimator is scored against which target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Ĉ_G against D.
    Plain,
    /// Ĉ_G^I against D^I.
    #[default]
    Irreversible,
}

impl Pairing {
    pub fn variant(self) -> Variant {
        match self {
            Pairing::Plain => Variant::Plain,
            Pairing::Irreversible => Variant::Irreversible,
        }
    }

    pub fn other(self) -> Pairing {
        match self {
            Pairing::Plain => Pairing::Irreversible,
            Pairing::Irreversible => Pairing::Plain,
        }
    }

    pub fn target(self, truth: &TrueDiffusion) -> f64 {
        match self {
            Pairing::Plain => truth.d,
            Pairing::Irreversible => truth.d_irr,
        }
    }
}

fn default_reps() -> usize {
    1000
}
fn default_truth_sims() -> usize {
    100_000
}
fn default_alphas() -> Vec<f64> {
    vec![0.05]
}
fn default_clb_alpha() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub graph: GraphSpec,
    pub n: usize,
    pub delta0: f64,
    #[serde(default)]
    pub design: Design,
    /// Defaults to MLE for the low-dimensional design and 10-fold CV LASSO
    /// for the high-dimensional one.
    #[serde(default)]
    pub fit: Option<FitMode>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_truth_sims")]
    pub truth_sims: usize,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_clb_alpha")]
    pub clb_alpha: f64,
    /// Simulation draws R per replication; `None` means max(1000, n).
    #[serde(default)]
    pub draws: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub pairing: Pairing,
    /// When set, estimation uses a proxy graph keeping each true edge with
    /// this probability, while targets are computed on the true graph.
    #[serde(default)]
    pub proxy_keep: Option<f64>,
}

impl McConfig {
    pub fn new(graph: GraphSpec, n: usize, delta0: f64) -> Self {
        Self {
            name: None,
            graph,
            n,
            delta0,
            design: Design::LowDimensional,
            fit: None,
            reps: default_reps(),
            truth_sims: default_truth_sims(),
            alphas: default_alphas(),
            clb_alpha: default_clb_alpha(),
            draws: None,
            seed: 0,
            pairing: Pairing::Irreversible,
            proxy_keep: None,
        }
    }

    pub fn label(&self) -> String {
        match &self.name {
            Some(name) => name.clone(),
            None => {
                let mut s = format!("{} n={} delta={}", self.graph.label(), self.n, self.delta0);
                if let Design::HighDimensional { p } = self.design {
                    s.push_str(&format!(" p={p}"));
                }
                if let Some(k) = self.proxy_keep {
                    s.push_str(&format!(" proxy_keep={k}"));
                }
                s
            }
        }
    }

    pub fn spec(&self) -> DgpSpec {
        match self.design {
            Design::LowDimensional => DgpSpec::low_dimensional(self.delta0),
            Design::HighDimensional { p } => DgpSpec::high_dimensional(p, self.delta0),
        }
    }

    pub fn fit_mode(&self) -> FitMode {
        self.fit.unwrap_or(match self.design {
            Design::LowDimensional => FitMode::Mle,
            Design::HighDimensional { .. } => {
                FitMode::Lasso(LambdaChoice::CrossValidated { folds: 10 })
            }
        })
    }

    pub fn mu0_model(&self) -> Mu0Model {
        match self.design {
            Design::LowDimensional => Mu0Model::Probit,
            Design::HighDimensional { .. } => Mu0Model::InterceptOnly,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidArgument("reps must be at least 1"));
        }
        if self.truth_sims == 0 {
            return Err(Error::InvalidArgument("truth_sims must be at least 1"));
        }
        if self.alphas.is_empty() {
            return Err(Error::InvalidArgument("at least one alpha is required"));
        }
        for &a in self.alphas.iter().chain([self.clb_alpha].iter()) {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidAlpha { alpha: a });
            }
        }
        if let Some(k) = self.proxy_keep {
            if !(0.0..=1.0).contains(&k) {
                return Err(Error::InvalidProbability { p: k });
            }
        }
        if !self.delta0.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(())
    }
}

/// The fixed part of a cell: graphs, covariates and design.
#[derive(Debug, Clone)]
pub struct CellSetup {
    pub config: McConfig,
    pub spec: DgpSpec,
    /// Graph generating the data.
    pub true_graph: DirectedGraph,
    /// Graph used for estimation (equal to `true_graph` without a proxy).
    pub graph: DirectedGraph,
    pub x: Matrix,
}

impl CellSetup {
    pub fn new(config: &McConfig) -> Result<Self> {
        config.validate()?;
        let spec = config.spec();
        let true_graph = config
            .graph
            .generate(config.n, rng::derive_seed(config.seed, domain::GRAPH))?;
        let graph = match config.proxy_keep {
            Some(keep) => true_graph.thin(keep, rng::derive_seed(config.seed, domain::PROXY))?,
            None => true_graph.clone(),
        };
        let x = dgp::gen_covariates(
            config.n,
            spec.p(),
            rng::derive_seed(config.seed, domain::COVARIATES),
        );
        Ok(Self {
            config: config.clone(),
            spec,
            true_graph,
            graph,
            x,
        })
    }

    pub fn truth_seed(&self) -> u64 {
        rng::derive_seed(self.config.seed, domain::TRUTH)
    }

    pub fn truth_simulator(&self) -> Result<TruthSimulator<'_>> {
        TruthSimulator::new(&self.true_graph, &self.x, &self.spec)
    }

    pub fn true_diffusion(&self) -> Result<TrueDiffusion> {
        dgp::true_diffusion(
            &self.true_graph,
            &self.x,
            &self.spec,
            self.config.truth_sims,
            self.truth_seed(),
        )
    }
}

/// Everything a replication needs, immutable and shareable across workers.
#[derive(Debug, Clone)]
pub struct CellState {
    pub setup: CellSetup,
    pub truth: TrueDiffusion,
    pub pairs: OverlapPairs,
    pub stats: DegreeStats,
}

impl CellState {
    pub fn new(setup: CellSetup, truth: TrueDiffusion) -> Self {
        let pairs = setup.graph.overlap_pairs();
        let stats = setup.graph.degree_stats();
        Self {
            setup,
            truth,
            pairs,
            stats,
        }
    }

    pub fn config(&self) -> &McConfig {
        &self.setup.config
    }

    pub fn options(&self, rep_seed: u64) -> EstimateOptions {
        let c = self.config();
        EstimateOptions {
            mode: c.fit_mode(),
            mu0: c.mu0_model(),
            variant: c.pairing.variant(),
            irreversible: self.setup.spec.irreversible,
            alpha: c.alphas[0],
            draws: c.draws,
            seed: rng::derive_seed(rep_seed, 3),
            lasso: LassoOptions::default(),
        }
    }
}

/// Builds the cell, including the true targets, sequentially.
pub fn prepare_cell(config: &McConfig) -> Result<CellState> {
    let setup = CellSetup::new(config)?;
    let truth = setup.true_diffusion()?;
    Ok(CellState::new(setup, truth))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantDraw {
    pub estimate: f64,
    pub sigma_plus: f64,
    pub fallback_used: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    NotConverged,
    Degenerate,
    Other,
}

impl FailureKind {
    fn of(e: &Error) -> Self {
        match e {
            Error::NotConverged { .. } | Error::Singular => FailureKind::NotConverged,
            Error::DegenerateV2 { .. } | Error::DegenerateVariance | Error::EmptySubset => {
                FailureKind::Degenerate
            }
            _ => FailureKind::Other,
        }
    }
}

/// Outcome of one replication: both estimator variants from a single fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plain: Option<VariantDraw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub irr: Option<VariantDraw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureKind>,
}

impl RepRecord {
    pub fn draw(&self, pairing: Pairing) -> Option<&VariantDraw> {
        match pairing {
            Pairing::Plain => self.plain.as_ref(),
            Pairing::Irreversible => self.irr.as_ref(),
        }
    }
}

pub fn rep_seed(seed: u64, rep: usize) -> u64 {
    rng::derive_seed(rng::derive_seed(seed, domain::REPLICATION), rep as u64)
}

/// Draws fresh outcomes on the cell's fixed (G, X) and estimates both variants.
pub fn run_replication(cell: &CellState, rep: usize) -> RepRecord {
    let seed = rep_seed(cell.config().seed, rep);
    let n = cell.setup.graph.n();
    let attempt = || -> Result<(VariantDraw, VariantDraw)> {
        let panel = dgp::simulate_panel(
            &cell.setup.true_graph,
            &cell.setup.x,
            &cell.setup.spec,
            seed,
        )?;
        let opts = cell.options(seed);
        let prepared = inference::prepare(&panel, &cell.setup.graph, &opts)?;
        let mut out = [None, None];
        for (slot, variant) in out.iter_mut().zip([Variant::Plain, Variant::Irreversible]) {
            let r = prepared.report(&cell.setup.graph, &cell.pairs, variant, opts.alpha)?;
            *slot = Some(VariantDraw {
                estimate: r.estimate,
                sigma_plus: r.sigma_plus,
                fallback_used: r.fallback_used,
            });
        }
        Ok((out[0].unwrap(), out[1].unwrap()))
    };
    match attempt() {
        Ok((plain, irr)) => RepRecord {
            rep,
            n,
            plain: Some(plain),
            irr: Some(irr),
            failure: None,
        },
        Err(e) => RepRecord {
            rep,
            n,
            plain: None,
            irr: None,
            failure: Some(FailureKind::of(&e)),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSummary {
    pub alpha: f64,
    pub coverage: f64,
    pub mean_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingSummary {
    pub pairing: Pairing,
    pub target: f64,
    pub intervals: Vec<AlphaSummary>,
    pub mean_estimate: f64,
    pub sd_estimate: f64,
    pub clb_alpha: f64,
    /// Fraction of replications with target ≥ L̂_{1−α}.
    pub clb_coverage: f64,
    pub mean_clb: f64,
    pub fallback_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureCounts {
    pub not_converged: usize,
    pub degenerate: usize,
    pub other: usize,
}

impl FailureCounts {
    pub fn total(&self) -> usize {
        self.not_converged + self.degenerate + self.other
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub cell: String,
    pub config: McConfig,
    pub reps: usize,
    pub successes: usize,
    pub failures: FailureCounts,
    pub true_d: f64,
    pub true_d_irr: f64,
    pub truth_se_d: f64,
    pub truth_se_d_irr: f64,
    pub truth_sims: usize,
    pub degree_stats: DegreeStats,
    /// Degree statistics of the data-generating graph when a proxy is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_degree_stats: Option<DegreeStats>,
    /// The configured pairing.
    pub primary: PairingSummary,
    /// The other pairing, from the same replications.
    pub alternative: PairingSummary,
}

impl McReport {
    /// Coverage of the configured pairing at `alpha`.
    pub fn coverage(&self, alpha: f64) -> Option<f64> {
        self.primary
            .intervals
            .iter()
            .find(|a| a.alpha == alpha)
            .map(|a| a.coverage)
    }

    pub fn mean_length(&self, alpha: f64) -> Option<f64> {
        self.primary
            .intervals
            .iter()
            .find(|a| a.alpha == alpha)
            .map(|a| a.mean_length)
    }
}

fn summarize(cell: &CellState, records: &[RepRecord], pairing: Pairing) -> Result<PairingSummary> {
    let c = cell.config();
    let target = pairing.target(&cell.truth);
    let mut covered = vec![0usize; c.alphas.len()];
    let mut lengths = vec![KahanSum::new(); c.alphas.len()];
    let mut est = KahanSum::new();
    let mut est2 = KahanSum::new();
    let mut clb_sum = KahanSum::new();
    let mut clb_ok = 0usize;
    let mut fallback_count = 0usize;
    let mut k = 0usize;
    for r in records {
        let Some(d) = r.draw(pairing) else { continue };
        k += 1;
        for (m, &alpha) in c.alphas.iter().enumerate() {
            let (lo, hi) = inference::confidence_interval(d.estimate, d.sigma_plus, r.n, alpha)?;
            if lo <= target && target <= hi {
                covered[m] += 1;
            }
            lengths[m].add(hi - lo);
        }
        let clb = inference::confidence_lower_bound(d.estimate, d.sigma_plus, r.n, c.clb_alpha)?;
        if target >= clb {
            clb_ok += 1;
        }
        clb_sum.add(clb);
        est.add(d.estimate);
        est2.add(d.estimate * d.estimate);
        fallback_count += d.fallback_used as usize;
    }
    let kf = k.max(1) as f64;
    let mean = est.value() / kf;
    let var = if k > 1 {
        ((est2.value() - kf * mean * mean) / (kf - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(PairingSummary {
        pairing,
        target,
        intervals: c
            .alphas
            .iter()
            .zip(covered.iter().zip(&lengths))
            .map(|(&alpha, (&cov, len))| AlphaSummary {
                alpha,
                coverage: cov as f64 / kf,
                mean_length: len.value() / kf,
            })
            .collect(),
        mean_estimate: mean,
        sd_estimate: libm::sqrt(var),
        clb_alpha: c.clb_alpha,
        clb_coverage: clb_ok as f64 / kf,
        mean_clb: clb_sum.value() / kf,
        fallback_count,
    })
}

/// Aggregates replication records (any order) into a report.
pub fn aggregate(cell: &CellState, records: &[RepRecord]) -> Result<McReport> {
    let mut sorted: Vec<RepRecord> = records.to_vec();
    sorted.sort_by_key(|r| r.rep);
    let reps = sorted.len();
    let mut failures = FailureCounts {
        not_converged: 0,
        degenerate: 0,
        other: 0,
    };
    for r in &sorted {
        match r.failure {
            Some(FailureKind::NotConverged) => failures.not_converged += 1,
            Some(FailureKind::Degenerate) => failures.degenerate += 1,
            Some(FailureKind::Other) => failures.other += 1,
            None => {}
        }
    }
    if failures.total() * 10 > reps || failures.total() == reps {
        return Err(Error::TooManyFailures {
            failed: failures.total(),
            reps,
        });
    }
    let c = cell.config();
    Ok(McReport {
        cell: c.label(),
        config: c.clone(),
        reps,
        successes: reps - failures.total(),
        failures,
        true_d: cell.truth.d,
        true_d_irr: cell.truth.d_irr,
        truth_se_d: cell.truth.se_d,
        truth_se_d_irr: cell.truth.se_d_irr,
        truth_sims: cell.truth.sims,
        degree_stats: cell.stats,
        true_degree_stats: c.proxy_keep.map(|_| cell.setup.true_graph.degree_stats()),
        primary: summarize(cell, &sorted, c.pairing)?,
        alternative: summarize(cell, &sorted, c.pairing.other())?,
    })
}

/// Runs a whole cell sequentially.
pub fn run_mc(config: &McConfig) -> Result<McReport> {
    let cell = prepare_cell(config)?;
    let records: Vec<RepRecord> = (0..config.reps)
        .map(|rep| run_replication(&cell, rep))
        .collect();
    aggregate(&cell, &records)
}
