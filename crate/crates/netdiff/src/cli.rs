//! The `netdiff` command line.
//!
//! Exit status: 0 on success, 2 for invalid usage or input, 1 when a
//! computation or an output write fails.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use netdiff_core::dgp::{self, TrueDiffusion};
use netdiff_core::inference::{estimate_diffusion, summary_line};
use netdiff_core::meanfit::{FitMode, LambdaChoice, Mu0Model};
use netdiff_core::montecarlo::{rep_seed, CellSetup, Design, GraphSpec, McConfig, McReport};
use netdiff_core::{DegreeStats, EstimateOptions, Variant};
use serde::{Deserialize, Serialize};

use crate::ingest::{self, Columns, Direction, IngestManifest, MissingPolicy};
use crate::runner::{checkpoint_path, Runner};
use crate::{io, Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "netdiff",
    version,
    about = "Diffusion estimation over directed causal graphs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random graph and write it as a `target,source` edge list.
    GenGraph(GenGraphArgs),
    /// Print degree statistics of an edge list as JSON.
    GraphStats(GraphStatsArgs),
    /// Simulate a panel on a random graph and write it as CSV files.
    Simulate(SimulateArgs),
    /// Estimate diffusion from panel files.
    Estimate(EstimateArgs),
    /// Run Monte Carlo cells from a JSON or TOML config.
    Mc(McArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Er,
    Ba,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long, value_enum, default_value = "er")]
    pub model: Model,
    #[arg(long)]
    pub n: usize,
    /// Expected degree for `er`.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Attachments per new vertex for `ba`.
    #[arg(long, default_value_t = 1)]
    pub m: usize,
}

impl GraphArgs {
    fn spec(&self) -> GraphSpec {
        match self.model {
            Model::Er => GraphSpec::ErdosRenyi {
                lambda: self.lambda,
            },
            Model::Ba => GraphSpec::BarabasiAlbert { m: self.m },
        }
    }
}

#[derive(Debug, Args)]
pub struct GenGraphArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GraphStatsArgs {
    #[arg(long)]
    pub edges: PathBuf,
    /// Node count; one past the largest id when omitted.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DesignArg {
    Low,
    High,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long, value_enum, default_value = "low")]
    pub design: DesignArg,
    /// Covariate count for the high-dimensional design.
    #[arg(long, default_value_t = 500)]
    pub p: usize,
    /// Simulations for the true targets; 0 skips them.
    #[arg(long, default_value_t = 100_000)]
    pub truth_sims: usize,
    /// Let nodes with y0 = 1 change state again in period 1.
    #[arg(long)]
    pub reversible: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory for edges.csv, outcomes.csv, covariates.csv, panel.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitArg {
    Mle,
    Lasso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mu0Arg {
    Probit,
    Intercept,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MissingArg {
    Drop,
    Error,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// TOML or JSON ingest manifest, instead of the three file flags.
    #[arg(long, conflicts_with_all = ["edges", "outcomes", "covariates"])]
    pub manifest: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    pub edges: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    pub outcomes: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    pub covariates: Option<PathBuf>,
    /// Transpose every edge on input.
    #[arg(long)]
    pub reversed: bool,
    #[arg(long, value_enum)]
    pub missing: Option<MissingArg>,
    #[arg(long, default_value = "irr")]
    pub variant: Variant,
    #[arg(long, value_enum, default_value = "mle")]
    pub fit: FitArg,
    /// Fixed LASSO penalty; cross-validated when omitted.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, value_enum, default_value = "probit")]
    pub mu0: Mu0Arg,
    /// Do not impose y1 = 0 for nodes with y0 = 1 in the period-1 model.
    #[arg(long)]
    pub reversible: bool,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Simulation draws R; max(1000, n) when omitted.
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Override the replication count of every cell.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Ignore and do not write checkpoints.
    #[arg(long)]
    pub no_checkpoint: bool,
}

/// A list of Monte Carlo cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McPlan {
    pub cells: Vec<McConfig>,
}

/// Degree statistics as emitted by `graph-stats`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStatsJson {
    pub n: usize,
    pub max_deg: usize,
    pub avg_deg: f64,
    pub median_deg: f64,
    pub d_mx: f64,
    pub d_av: f64,
}

impl From<DegreeStats> for GraphStatsJson {
    fn from(s: DegreeStats) -> Self {
        Self {
            n: s.n,
            max_deg: s.max_deg,
            avg_deg: s.avg_deg,
            median_deg: s.median_deg,
            d_mx: s.d_mx,
            d_av: s.d_av,
        }
    }
}

/// Sidecar written next to a simulated panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSidecar {
    pub seed: u64,
    pub n: usize,
    pub graph: GraphSpec,
    pub spec: dgp::DgpSpec,
    pub degree_stats: GraphStatsJson,
    pub truth: Option<TrueDiffusion>,
}

/// Parses `args` (program name first) and runs the command; returns the exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenGraph(a) => gen_graph(&a),
        Command::GraphStats(a) => graph_stats(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Estimate(a) => estimate(&a),
        Command::Mc(a) => mc(&a),
    }
}

fn stdout_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: "<stdout>".into(),
        source: e,
    })?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e))
}

fn gen_graph(a: &GenGraphArgs) -> Result<()> {
    let g = a.graph.spec().generate(a.graph.n, a.seed)?;
    let ids: Vec<u64> = (0..g.n() as u64).collect();
    match &a.out {
        Some(path) => io::write_edges(path, &g, &ids),
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout().lock());
            let res = (|| {
                w.write_record(["target", "source"])?;
                for (t, s) in g.edges() {
                    w.write_record([t.to_string(), s.to_string()])?;
                }
                w.flush()
            })();
            res.map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn graph_stats(a: &GraphStatsArgs) -> Result<()> {
    let g = ingest::read_edge_list(&a.edges, a.n, &Columns::default())?;
    stdout_json(&GraphStatsJson::from(g.degree_stats()))
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let mut config = McConfig::new(a.graph.spec(), a.graph.n, a.delta);
    config.seed = a.seed;
    config.truth_sims = a.truth_sims.max(1);
    if a.design == DesignArg::High {
        config.design = Design::HighDimensional { p: a.p };
    }
    let mut setup = CellSetup::new(&config)?;
    setup.spec.irreversible = !a.reversible;
    let panel = dgp::simulate_panel(
        &setup.true_graph,
        &setup.x,
        &setup.spec,
        rep_seed(a.seed, 0),
    )?;
    let truth = if a.truth_sims > 0 {
        Some(Runner::new(a.threads)?.truth(&setup)?)
    } else {
        None
    };
    io::write_panel(&a.out, &panel, &setup.true_graph)?;
    let sidecar = PanelSidecar {
        seed: a.seed,
        n: panel.n(),
        graph: config.graph,
        spec: setup.spec.clone(),
        degree_stats: setup.true_graph.degree_stats().into(),
        truth,
    };
    io::write_json(&a.out.join("panel.json"), &sidecar)
}

fn manifest(a: &EstimateArgs) -> Result<IngestManifest> {
    let mut m = match &a.manifest {
        Some(path) => IngestManifest::load(path)?,
        None => IngestManifest::new(
            a.edges.clone().expect("required by clap"),
            a.outcomes.clone().expect("required by clap"),
            a.covariates.clone().expect("required by clap"),
        ),
    };
    if a.reversed {
        m.direction = Direction::Reversed;
    }
    if let Some(policy) = a.missing {
        m.missing = match policy {
            MissingArg::Drop => MissingPolicy::Drop,
            MissingArg::Error => MissingPolicy::Error,
        };
    }
    Ok(m)
}

pub fn estimate_options(a: &EstimateArgs) -> Result<EstimateOptions> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(Error::Invalid(format!(
            "--alpha {} must lie in (0, 1)",
            a.alpha
        )));
    }
    if a.folds < 2 {
        return Err(Error::Invalid("--folds must be at least 2".into()));
    }
    let mode = match (a.fit, a.lambda) {
        (FitArg::Mle, None) => FitMode::Mle,
        (FitArg::Mle, Some(_)) => {
            return Err(Error::Invalid("--lambda requires --fit lasso".into()))
        }
        (FitArg::Lasso, Some(lambda)) => FitMode::Lasso(LambdaChoice::Fixed { lambda }),
        (FitArg::Lasso, None) => FitMode::Lasso(LambdaChoice::CrossValidated { folds: a.folds }),
    };
    Ok(EstimateOptions {
        mode,
        mu0: match a.mu0 {
            Mu0Arg::Probit => Mu0Model::Probit,
            Mu0Arg::Intercept => Mu0Model::InterceptOnly,
        },
        variant: a.variant,
        irreversible: !a.reversible,
        alpha: a.alpha,
        draws: a.draws,
        seed: a.seed,
        ..EstimateOptions::default()
    })
}

fn estimate(a: &EstimateArgs) -> Result<()> {
    let opts = estimate_options(a)?;
    let data = ingest::ingest_panel(&manifest(a)?)?;
    if opts.irreversible && !data.panel.is_irreversible() {
        return Err(Error::Invalid(
            "some node has y0 = 1 and y1 = 1; pass --reversible to model reversible state changes"
                .into(),
        ));
    }
    let report = estimate_diffusion(&data.panel, &data.graph, &opts)?;
    match &a.out {
        Some(path) => {
            io::write_json(path, &report)?;
            println!("{}", summary_line(&report));
        }
        None => {
            stdout_json(&report)?;
            eprintln!("{}", summary_line(&report));
        }
    }
    Ok(())
}

fn level(alpha: f64) -> String {
    let pct = 100.0 * (1.0 - alpha);
    if (pct - pct.round()).abs() < 1e-9 {
        format!("{}", pct.round())
    } else {
        format!("{pct}")
    }
}

/// Rows shaped like the coverage tables: one line per cell.
pub fn summary_csv(reports: &[McReport]) -> Result<Vec<u8>> {
    let mut alphas: Vec<f64> = Vec::new();
    for r in reports {
        for a in &r.primary.intervals {
            if !alphas.contains(&a.alpha) {
                alphas.push(a.alpha);
            }
        }
    }
    let mut header: Vec<String> = [
        "cell",
        "graph",
        "n",
        "delta",
        "reps",
        "successes",
        "max_deg",
        "avg_deg",
        "median_deg",
        "true_d",
        "true_d_irr",
        "pairing",
    ]
    .map(String::from)
    .to_vec();
    for &a in &alphas {
        header.push(format!("coverage_{}", level(a)));
        header.push(format!("length_{}", level(a)));
    }
    header.extend(
        [
            "clb_level",
            "clb_coverage",
            "mean_clb",
            "alt_pairing",
            "alt_coverage",
            "alt_length",
        ]
        .map(String::from),
    );

    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| Error::io("<summary>", e.into());
    w.write_record(&header).map_err(io_err)?;
    for r in reports {
        let c = &r.config;
        let s = &r.degree_stats;
        let mut row = vec![
            r.cell.clone(),
            c.graph.label(),
            c.n.to_string(),
            c.delta0.to_string(),
            r.reps.to_string(),
            r.successes.to_string(),
            s.max_deg.to_string(),
            format!("{:.3}", s.avg_deg),
            s.median_deg.to_string(),
            format!("{:.4}", r.true_d),
            format!("{:.4}", r.true_d_irr),
            serde_json::to_value(r.primary.pairing)
                .map(|v| v.as_str().unwrap_or_default().to_string())
                .unwrap_or_default(),
        ];
        for &a in &alphas {
            match r.primary.intervals.iter().find(|i| i.alpha == a) {
                Some(i) => {
                    row.push(format!("{:.3}", i.coverage));
                    row.push(format!("{:.3}", i.mean_length));
                }
                None => row.extend([String::new(), String::new()]),
            }
        }
        let first = r.alternative.intervals.first();
        row.extend([
            level(r.primary.clb_alpha),
            format!("{:.3}", r.primary.clb_coverage),
            format!("{:.4}", r.primary.mean_clb),
            serde_json::to_value(r.alternative.pairing)
                .map(|v| v.as_str().unwrap_or_default().to_string())
                .unwrap_or_default(),
            first
                .map(|i| format!("{:.3}", i.coverage))
                .unwrap_or_default(),
            first
                .map(|i| format!("{:.3}", i.mean_length))
                .unwrap_or_default(),
        ]);
        w.write_record(&row).map_err(io_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::io("<summary>", e.into_error()))
}

fn mc(a: &McArgs) -> Result<()> {
    let mut plan: McPlan = io::read_config(&a.config)?;
    if plan.cells.is_empty() {
        return Err(Error::Invalid("config lists no cells".into()));
    }
    for cell in &mut plan.cells {
        if let Some(reps) = a.reps {
            cell.reps = reps;
        }
        cell.validate()?;
    }
    let runner = Runner::new(a.threads)?;
    let mut reports = Vec::with_capacity(plan.cells.len());
    for (k, cell) in plan.cells.iter().enumerate() {
        let cp = (!a.no_checkpoint).then(|| checkpoint_path(&a.out, k));
        let report = runner.run(cell, cp.as_deref())?;
        io::write_json(&cell_path(&a.out, k), &report)?;
        let cov = report.primary.intervals.first();
        eprintln!(
            "{}: coverage {:.3}, mean length {:.3}, target {:.4}",
            report.cell,
            cov.map_or(f64::NAN, |i| i.coverage),
            cov.map_or(f64::NAN, |i| i.mean_length),
            report.primary.target
        );
        reports.push(report);
    }
    let bytes = summary_csv(&reports)?;
    io::write_atomic(&a.out.join("summary.csv"), |w| w.write_all(&bytes))
}

pub fn cell_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("cell-{index:03}.json"))
}
