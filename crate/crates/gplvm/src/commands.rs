//! The work behind each subcommand, callable without the command line.

use std::path::Path;
use std::time::Instant;

use gplvm_core::optimize::check_latent_dimension;
use gplvm_core::{evaluate, DataSource, ErrorReport, GenConfig, ModelCandidate, ModelScore, SelectionReport};

use crate::config::{load_sources, ProblemConfig};
use crate::dataset::{read_truth, write_synthetic, TruthSidecar, Written};
use crate::document::{max_score_difference, Command, ResultDocument, Runtime, SourceSummary};
use crate::error::{CliError, Result};
use crate::matrix_io::{from_rows, read_matrix};
use crate::{parallel, FORMAT_VERSION};

/// Largest score change a rerun may show and still count as reproduced.
pub const RERUN_TOLERANCE: f64 = 1e-9;

pub fn synth(data: &Path, gen: &GenConfig, with_truth: bool) -> Result<Written> {
    gen.validate()?;
    write_synthetic(data, gen, with_truth)
}

/// Runs `fit` or `select` on a loaded configuration.
pub fn run(cfg: &ProblemConfig, command: Command, threads: Option<usize>) -> Result<ResultDocument> {
    let started = Instant::now();
    let loaded = load_sources(cfg)?;
    let sources: Vec<DataSource> = loaded.iter().map(|l| l.source.clone()).collect();
    let select_cfg = cfg.select_config();
    let pool = parallel::pool(threads)?;
    let report = match command {
        Command::Fit => {
            let candidate = single_candidate(cfg, &sources)?;
            check_latent_dimension(&sources, candidate.q)?;
            let scored = pool.install(|| parallel::score(&sources, &candidate, &select_cfg))?;
            SelectionReport::assemble(vec![ModelScore::from_outcome(candidate, Ok(scored))])?
        }
        Command::Select => {
            let q_values = cfg.q_values(&sources);
            let q_max = q_values.iter().copied().max().ok_or_else(|| {
                CliError::Setup("the q range is empty for this data".into())
            })?;
            check_latent_dimension(&sources, q_max)?;
            let kernel_sets = cfg.kernel_sets();
            pool.install(|| parallel::select(&sources, &q_values, &kernel_sets, &select_cfg))?
        }
    };
    let errors = match &cfg.truth {
        Some(path) => {
            let pattern = read_truth(path)?;
            report
                .best_entry()
                .and_then(|e| e.result.as_ref())
                .map(|r| evaluate(&r.fit.x_star, &pattern).map_err(|e| e.to_string()))
        }
        None => None,
    };
    Ok(ResultDocument {
        format_version: FORMAT_VERSION,
        command,
        config: cfg.clone(),
        sources: loaded
            .iter()
            .map(|l| SourceSummary {
                name: l.name.clone(),
                path: l.path.clone(),
                n: l.source.n(),
                d: l.source.d(),
                normalization: l.normalization.as_ref().map(Into::into),
            })
            .collect(),
        candidates: ResultDocument::candidates_from(&report),
        best: ResultDocument::best_from(&report, errors),
        curves: ResultDocument::curves_from(&report),
        runtime: Runtime {
            seconds: started.elapsed().as_secs_f64(),
            threads: pool.current_num_threads(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

fn single_candidate(cfg: &ProblemConfig, sources: &[DataSource]) -> Result<ModelCandidate> {
    let q_values = cfg.q_values(sources);
    let sets = cfg.kernel_sets();
    match (q_values.as_slice(), sets.as_slice()) {
        ([q], [specs]) => Ok(ModelCandidate::new(*q, specs.clone())),
        _ => Err(CliError::Setup(
            "fit needs a single candidate: set `q` and one kernel per source (use select for grids)"
                .into(),
        )),
    }
}

pub struct Rerun {
    pub original: ResultDocument,
    pub repeated: ResultDocument,
    pub max_difference: f64,
}

/// Repeats the run recorded in a result document and compares the scores.
pub fn rerun(path: &Path, threads: Option<usize>) -> Result<Rerun> {
    let original = ResultDocument::read(path)?;
    let cfg = original.config.clone().checked(path)?;
    let repeated = run(&cfg, original.command, threads)?;
    let max_difference = max_score_difference(&original, &repeated).ok_or_else(|| {
        CliError::Mismatch("candidate grid or set of failed candidates changed".into())
    })?;
    if max_difference > RERUN_TOLERANCE {
        return Err(CliError::Mismatch(format!(
            "scores differ by up to {max_difference:e}"
        )));
    }
    Ok(Rerun {
        original,
        repeated,
        max_difference,
    })
}

/// Recovered latents from a CSV, or from a `.json` file holding either a
/// result document (its best model) or a truth sidecar.
pub fn read_latents(path: &Path) -> Result<nalgebra::DMatrix<f64>> {
    if !path.extension().is_some_and(|e| e == "json") {
        return read_matrix(path);
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let rows = if let Ok(doc) = serde_json::from_str::<ResultDocument>(&text) {
        doc.best
            .ok_or_else(|| CliError::format(path, "document has no best model"))?
            .x_star
    } else {
        serde_json::from_str::<TruthSidecar>(&text)
            .map_err(|_| CliError::format(path, "neither a result document nor a truth sidecar"))?
            .points
    };
    from_rows(&rows).map_err(|e| CliError::format(path, e))
}

pub fn metrics(x_path: &Path, truth_path: &Path) -> Result<ErrorReport> {
    let x = read_latents(x_path)?;
    let pattern = read_truth(truth_path)?;
    if x.nrows() != pattern.n() {
        return Err(CliError::format(
            x_path,
            format!("{} rows, truth pattern has {}", x.nrows(), pattern.n()),
        ));
    }
    Ok(evaluate(&x, &pattern)?)
}

pub fn metrics_text(r: &ErrorReport) -> String {
    format!(
        "measure absolute signed\nradial {:e} {:e}\nangular {:e} {:e}\nlinear {:e}\n",
        r.radial.absolute, r.radial.signed, r.angular.absolute, r.angular.signed, r.linear
    )
}
