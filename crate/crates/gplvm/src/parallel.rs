//! Thread-pool execution of restarts and candidate grids.
//!
//! Results do not depend on the number of threads: every restart draws from
//! its own sub-seed and outcomes are reduced in index order.

use gplvm_core::model_select::{candidates, score_model_with};
use gplvm_core::optimize::{combine_restarts, fit_latents_restart};
use gplvm_core::{
    DataSource, FitResult, KernelSpec, ModelCandidate, ModelScore, OptimConfig, SelectConfig,
    SelectionReport,
};
use rayon::prelude::*;

use crate::error::{CliError, Result};

/// Pool with `threads` workers; `None` uses the available parallelism.
pub fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let n = match threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))
}

/// Multi-restart latent search with the restarts spread over the pool.
pub fn search(
    sources: &[DataSource],
    q: usize,
    cfg: &OptimConfig,
) -> gplvm_core::Result<FitResult> {
    let n = sources.first().map_or(0, DataSource::n);
    let outcomes: Vec<_> = (0..cfg.restarts_for(sources))
        .into_par_iter()
        .map(|k| fit_latents_restart(sources, q, cfg, k))
        .collect();
    combine_restarts(outcomes, n, q)
}

pub fn score(
    sources: &[DataSource],
    candidate: &ModelCandidate,
    cfg: &SelectConfig,
) -> gplvm_core::Result<gplvm_core::model_select::ScoredModel> {
    score_model_with(sources, candidate, cfg, &search)
}

/// Scores the whole grid concurrently.
pub fn select(
    sources: &[DataSource],
    q_values: &[usize],
    kernel_sets: &[Vec<KernelSpec>],
    cfg: &SelectConfig,
) -> gplvm_core::Result<SelectionReport> {
    if q_values.is_empty() || kernel_sets.is_empty() {
        return Err(gplvm_core::Error::InvalidInput("empty q range or kernel list".into()));
    }
    let entries: Vec<ModelScore> = candidates(q_values, kernel_sets)
        .into_par_iter()
        .map(|c| {
            let outcome = score(sources, &c, cfg);
            ModelScore::from_outcome(c, outcome)
        })
        .collect();
    SelectionReport::assemble(entries)
}
