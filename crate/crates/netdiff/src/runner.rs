//! Parallel, resumable execution of Monte Carlo cells.
//!
//! Truth chunks and replications are spread over a rayon pool. Every unit of
//! work draws from its own derived stream and results are merged in index
//! order, so reports do not depend on the number of threads. With a
//! checkpoint path, finished replications are saved every
//! `checkpoint_every` reps and picked up again on the next run.

use std::path::{Path, PathBuf};

use netdiff_core::dgp::{TrueDiffusion, TruthAccumulator, TruthSimulator};
use netdiff_core::montecarlo::{
    aggregate, run_replication, CellSetup, CellState, McConfig, McReport, RepRecord,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{io, Error, Result};

pub const THREADS_ENV: &str = "NETDIFF_THREADS";

/// Thread cap from `NETDIFF_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
}

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    config: McConfig,
    truth: TrueDiffusion,
    records: Vec<RepRecord>,
}

pub struct Runner {
    pool: rayon::ThreadPool,
    pub checkpoint_every: usize,
}

impl Runner {
    /// `threads` overrides `NETDIFF_THREADS`; with neither, rayon's default.
    pub fn new(threads: Option<usize>) -> Result<Self> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads.or_else(threads_from_env) {
            builder = builder.num_threads(t);
        }
        let pool = builder.build().map_err(|e| Error::Invalid(e.to_string()))?;
        Ok(Self {
            pool,
            checkpoint_every: 100,
        })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// D and Dᴵ for a cell, chunks in parallel and merged in chunk order.
    pub fn truth(&self, setup: &CellSetup) -> Result<TrueDiffusion> {
        let sim = setup.truth_simulator()?;
        let seed = setup.truth_seed();
        let chunks: Vec<(usize, usize)> = TruthSimulator::chunks(setup.config.truth_sims).collect();
        let parts: Vec<TruthAccumulator> = self.pool.install(|| {
            chunks
                .par_iter()
                .map(|&(c, k)| sim.run_chunk(c, k, seed))
                .collect()
        });
        let mut acc = TruthAccumulator::default();
        for p in &parts {
            acc.merge(p);
        }
        Ok(acc.finish())
    }

    pub fn prepare(&self, config: &McConfig) -> Result<CellState> {
        let setup = CellSetup::new(config)?;
        let truth = self.truth(&setup)?;
        Ok(CellState::new(setup, truth))
    }

    pub fn replications(&self, cell: &CellState, reps: std::ops::Range<usize>) -> Vec<RepRecord> {
        self.pool.install(|| {
            reps.into_par_iter()
                .map(|r| run_replication(cell, r))
                .collect()
        })
    }

    /// Runs a cell, resuming from and updating `checkpoint` when given.
    pub fn run(&self, config: &McConfig, checkpoint: Option<&Path>) -> Result<McReport> {
        config.validate()?;
        let resumed = match checkpoint {
            Some(path) if path.exists() => {
                let cp: Checkpoint = io::read_json(path)?;
                // A different rep count only extends or shortens the run.
                let mut saved = cp.config.clone();
                saved.reps = config.reps;
                if saved != *config {
                    return Err(Error::CheckpointMismatch {
                        path: path.to_path_buf(),
                    });
                }
                Some(cp)
            }
            _ => None,
        };
        let (cell, mut records) = match resumed {
            Some(cp) => {
                log::info!("resuming {} at rep {}", config.label(), cp.records.len());
                (
                    CellState::new(CellSetup::new(config)?, cp.truth),
                    cp.records,
                )
            }
            None => (self.prepare(config)?, Vec::new()),
        };
        let step = self.checkpoint_every.max(1);
        while records.len() < config.reps {
            let start = records.len();
            let end = (start + step).min(config.reps);
            records.extend(self.replications(&cell, start..end));
            if let Some(path) = checkpoint {
                io::write_json(
                    path,
                    &Checkpoint {
                        config: config.clone(),
                        truth: cell.truth,
                        records: records.clone(),
                    },
                )?;
            }
        }
        records.truncate(config.reps);
        Ok(aggregate(&cell, &records)?)
    }
}

/// Checkpoint file for the `index`-th cell of a run directory.
pub fn checkpoint_path(dir: &Path, index: usize) -> PathBuf {
    dir.join("checkpoints")
        .join(format!("cell-{index:03}.json"))
}
