//! Model comparison over latent dimension and kernel choice.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::gauge::GaugeSpec;
use crate::kernels::KernelSpec;
use crate::likelihood::{neg_log_hyp_posterior, DataSource};
use crate::optimize::{
    check_latent_dimension, fit_latents, fit_latents_from, refine_hyperparams, FitResult,
    OptimConfig,
};

/// A model `H`: latent dimension plus one kernel per source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelCandidate {
    pub q: usize,
    pub specs: Vec<KernelSpec>,
}

impl ModelCandidate {
    pub fn new(q: usize, specs: Vec<KernelSpec>) -> Self {
        Self { q, specs }
    }

    /// Kernel names joined by `+`, e.g. `linear+poly`.
    pub fn label(&self) -> String {
        let names: Vec<&str> = self.specs.iter().map(|s| s.name()).collect();
        names.join("+")
    }

    pub fn validate(&self, sources: &[DataSource]) -> Result<()> {
        if self.specs.len() != sources.len() {
            return Err(Error::DimensionMismatch {
                expected: sources.len(),
                found: self.specs.len(),
            });
        }
        check_latent_dimension(sources, self.q)
    }

    fn apply(&self, sources: &[DataSource]) -> Vec<DataSource> {
        sources
            .iter()
            .zip(&self.specs)
            .map(|(s, spec)| s.with_spec(*spec))
            .collect()
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        let key = |c: &Self| -> Vec<(u8, Option<u32>)> {
            c.specs
                .iter()
                .map(|s| (s.family() as u8, s.degree()))
                .collect()
        };
        key(self).cmp(&key(other)).then(self.q.cmp(&other.q))
    }
}

/// Options of the selection workflow beyond the optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SelectConfig {
    pub optim: OptimConfig,
    /// After the one-pass multi-source fit, run one more joint hyperparameter
    /// search over all sources with the shared latents as warm start.
    pub alternate: bool,
}

impl From<OptimConfig> for SelectConfig {
    fn from(optim: OptimConfig) -> Self {
        Self {
            optim,
            alternate: false,
        }
    }
}

/// Outcome of scoring one candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredModel {
    /// Minimum `L_hyp` found.
    pub score: f64,
    pub fit: FitResult,
    /// Per-source joint fits from the first stage of the multi-source
    /// workflow; empty for a single source.
    pub source_fits: Vec<FitResult>,
}

impl ScoredModel {
    /// `L_hyp` of each source fitted alone at this candidate.
    pub fn source_scores(&self) -> Vec<f64> {
        self.source_fits.iter().map(hyp_value).collect()
    }
}

fn hyp_value(fit: &FitResult) -> f64 {
    fit.hyp_objective.map_or(f64::INFINITY, |h| h.value)
}

fn annotate(candidate: &ModelCandidate, e: Error) -> Error {
    Error::Optimization(format!(
        "candidate q={} kernel={}: {e}",
        candidate.q,
        candidate.label()
    ))
}

/// Multi-restart latent search at fixed hyperparameters, e.g.
/// [`fit_latents`] or a parallel equivalent.
pub type LatentSearch<'a> = &'a (dyn Fn(&[DataSource], usize, &OptimConfig) -> Result<FitResult> + Sync);

/// Minimum of `L_hyp` for one candidate.
///
/// One source: joint search over latents and noise precision. Several
/// sources: each source's precision is fitted on its own, then the shared
/// latents are fitted with those precisions fixed and `L_hyp` is evaluated
/// once at that optimum. The starting precision is taken from each source.
pub fn score_model(
    sources: &[DataSource],
    candidate: &ModelCandidate,
    cfg: &SelectConfig,
) -> Result<ScoredModel> {
    score_model_with(sources, candidate, cfg, &fit_latents)
}

/// [`score_model`] with a caller-supplied latent search.
pub fn score_model_with(
    sources: &[DataSource],
    candidate: &ModelCandidate,
    cfg: &SelectConfig,
    search: LatentSearch<'_>,
) -> Result<ScoredModel> {
    candidate.validate(sources)?;
    let sources = candidate.apply(sources);
    let optim = &cfg.optim;
    let q = candidate.q;
    let joint = |srcs: &[DataSource]| -> Result<FitResult> {
        let initial = search(srcs, q, optim)?;
        refine_hyperparams(srcs, initial, optim)
    };
    let run = || -> Result<ScoredModel> {
        if sources.len() == 1 {
            let fit = joint(&sources)?;
            return Ok(ScoredModel {
                score: hyp_value(&fit),
                fit,
                source_fits: Vec::new(),
            });
        }
        let source_fits = sources
            .iter()
            .map(|s| joint(core::slice::from_ref(s)))
            .collect::<Result<Vec<_>>>()?;
        let fixed: Vec<DataSource> = sources
            .iter()
            .zip(&source_fits)
            .map(|(s, f)| s.with_hyperparams(f.hyp_star[0]))
            .collect();
        let shared = search(&fixed, q, optim)?;
        let fit = if cfg.alternate {
            refine_hyperparams(&fixed, shared, optim)?
        } else {
            let gauge = GaugeSpec::new(shared.x_star.nrows(), q);
            let hyp = neg_log_hyp_posterior(
                &fixed,
                &shared.x_star,
                &gauge,
                optim.rescale,
                optim.convention,
            )?;
            FitResult {
                hyp_objective: Some(hyp),
                ..shared
            }
        };
        Ok(ScoredModel {
            score: hyp_value(&fit),
            fit,
            source_fits,
        })
    };
    run().map_err(|e| annotate(candidate, e))
}

/// Scores the candidate by re-fitting its latents from `x0` at the current
/// hyperparameters of `sources`, without a hyperparameter search.
pub fn score_fixed(
    sources: &[DataSource],
    candidate: &ModelCandidate,
    x0: &nalgebra::DMatrix<f64>,
    cfg: &OptimConfig,
) -> Result<f64> {
    candidate.validate(sources)?;
    let sources = candidate.apply(sources);
    let fit = fit_latents_from(&sources, x0, cfg, cfg.grad_tol)?;
    let gauge = GaugeSpec::new(x0.nrows(), candidate.q);
    Ok(neg_log_hyp_posterior(&sources, &fit.x_star, &gauge, cfg.rescale, cfg.convention)?.value)
}

/// One row of a selection report. Failed candidates carry `score = +∞`
/// and the error message.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelScore {
    pub candidate: ModelCandidate,
    pub score: f64,
    pub result: Option<ScoredModel>,
    pub error: Option<String>,
}

impl ModelScore {
    pub fn from_outcome(candidate: ModelCandidate, outcome: Result<ScoredModel>) -> Self {
        match outcome {
            Ok(scored) if scored.score.is_finite() => Self {
                candidate,
                score: scored.score,
                result: Some(scored),
                error: None,
            },
            Ok(_) => Self {
                candidate,
                score: f64::INFINITY,
                result: None,
                error: Some("non-finite score".to_string()),
            },
            Err(e) => Self {
                candidate,
                score: f64::INFINITY,
                result: None,
                error: Some(e.to_string()),
            },
        }
    }
}

/// Score against `q` for one kernel assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(usize, f64)>,
}

impl Curve {
    /// Latent dimension with the lowest finite score.
    pub fn argmin(&self) -> Option<usize> {
        self.points
            .iter()
            .filter(|(_, s)| s.is_finite())
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(q, _)| *q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    /// Sorted by kernel assignment, then `q`.
    pub entries: Vec<ModelScore>,
    /// Index into `entries` of the lowest finite score. Ties go to the
    /// earlier entry, i.e. the simpler kernel and then the smaller `q`.
    pub best: Option<usize>,
}

impl SelectionReport {
    /// Builds a report from entries in any order.
    pub fn assemble(mut entries: Vec<ModelScore>) -> Result<Self> {
        entries.sort_by(|a, b| a.candidate.canonical_cmp(&b.candidate));
        if entries.is_empty() {
            return Err(Error::InvalidInput("no candidates to compare".into()));
        }
        let best = entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.score.is_finite())
            .min_by(|a, b| a.1.score.total_cmp(&b.1.score).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i);
        if best.is_none() {
            let reasons: Vec<String> = entries
                .iter()
                .filter_map(|e| e.error.clone())
                .take(3)
                .collect();
            return Err(Error::Optimization(format!(
                "all {} candidates failed: {}",
                entries.len(),
                reasons.join("; ")
            )));
        }
        Ok(Self { entries, best })
    }

    pub fn best_entry(&self) -> Option<&ModelScore> {
        self.best.map(|i| &self.entries[i])
    }

    pub fn failures(&self) -> impl Iterator<Item = &ModelScore> {
        self.entries.iter().filter(|e| e.error.is_some())
    }

    pub fn find(&self, q: usize, specs: &[KernelSpec]) -> Option<&ModelScore> {
        self.entries
            .iter()
            .find(|e| e.candidate.q == q && e.candidate.specs == specs)
    }

    /// One curve per kernel assignment, in report order.
    pub fn curves(&self) -> Vec<Curve> {
        let mut curves: Vec<Curve> = Vec::new();
        for e in &self.entries {
            let label = e.candidate.label();
            match curves.last_mut() {
                Some(c) if c.label == label => c.points.push((e.candidate.q, e.score)),
                _ => curves.push(Curve {
                    label,
                    points: vec![(e.candidate.q, e.score)],
                }),
            }
        }
        curves
    }
}

/// Every combination of `q` and kernel assignment.
pub fn candidates(q_values: &[usize], kernel_sets: &[Vec<KernelSpec>]) -> Vec<ModelCandidate> {
    kernel_sets
        .iter()
        .flat_map(|specs| q_values.iter().map(|&q| ModelCandidate::new(q, specs.clone())))
        .collect()
}

/// `1..=min(7, min_s d_s - 1)`.
pub fn default_q_values(sources: &[DataSource]) -> Vec<usize> {
    let min_d = sources.iter().map(|s| s.d()).min().unwrap_or(0);
    (1..=7.min(min_d.saturating_sub(1))).collect()
}

/// Scores every candidate in turn. Individual failures are recorded with
/// an infinite score; only a grid where every candidate fails is an error.
pub fn select(
    sources: &[DataSource],
    q_values: &[usize],
    kernel_sets: &[Vec<KernelSpec>],
    cfg: &SelectConfig,
) -> Result<SelectionReport> {
    if q_values.is_empty() || kernel_sets.is_empty() {
        return Err(Error::InvalidInput("empty q range or kernel list".into()));
    }
    let entries = candidates(q_values, kernel_sets)
        .into_iter()
        .map(|c| {
            let outcome = score_model(sources, &c, cfg);
            ModelScore::from_outcome(c, outcome)
        })
        .collect();
    SelectionReport::assemble(entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RatioConvention {
    /// `exp(score_b - score_a)`.
    #[default]
    PerSample,
    /// `exp(N (score_b - score_a))`.
    Total,
}

/// How much more probable model `a` is than model `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodRatio {
    pub log_ratio: f64,
    /// `exp(log_ratio)`, or `+∞`/`0` when that overflows or underflows.
    pub ratio: f64,
    pub overflow: bool,
    pub convention: RatioConvention,
}

pub fn likelihood_ratio(
    score_a: f64,
    score_b: f64,
    n: usize,
    convention: RatioConvention,
) -> Result<LikelihoodRatio> {
    if !(score_a.is_finite() && score_b.is_finite()) {
        return Err(Error::InvalidInput("scores must be finite".into()));
    }
    let diff = score_b - score_a;
    let log_ratio = match convention {
        RatioConvention::PerSample => diff,
        RatioConvention::Total => n as f64 * diff,
    };
    let ratio = libm::exp(log_ratio);
    let overflow = ratio.is_infinite() || (ratio == 0.0 && log_ratio != f64::NEG_INFINITY);
    Ok(LikelihoodRatio {
        log_ratio,
        ratio,
        overflow,
        convention,
    })
}
