//! Problem configuration files.
//!
//! A configuration is a TOML document with one `[[sources]]` table per data
//! matrix. Relative paths are resolved against the directory holding the
//! file. The resolved configuration is echoed into every result document
//! and can be loaded back from there to repeat the run.
//!
//! ```toml
//! seed = 0
//! q_min = 1
//! q_max = 5
//! truth = "data.truth.json"
//!
//! [[sources]]
//! data = "data.csv"
//! kernel = "both"
//! beta = 1.0
//! ```

use std::path::{Path, PathBuf};

use gplvm_core::model_select::default_q_values;
use gplvm_core::optimize::HyperSearch;
use gplvm_core::{
    DataSource, EvidenceConvention, InitStrategy, KernelSpec, OptimConfig, SelectConfig,
    SourceHyperparams,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Kernel choice of one source; `both` scores linear and polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    #[default]
    Linear,
    #[serde(alias = "polynomial")]
    Poly,
    Both,
}

impl KernelChoice {
    pub fn specs(self) -> Vec<KernelSpec> {
        match self {
            KernelChoice::Linear => vec![KernelSpec::linear()],
            KernelChoice::Poly => vec![KernelSpec::polynomial()],
            KernelChoice::Both => vec![KernelSpec::linear(), KernelSpec::polynomial()],
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(KernelChoice::Linear),
            "poly" | "polynomial" => Some(KernelChoice::Poly),
            "both" => Some(KernelChoice::Both),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    #[default]
    Laplace,
    Literal,
}

impl From<Convention> for EvidenceConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::Laplace => EvidenceConvention::Laplace,
            Convention::Literal => EvidenceConvention::Literal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    #[default]
    Random,
    Pca,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub data: PathBuf,
    #[serde(default)]
    pub kernel: KernelChoice,
    /// Starting noise precision of the hyperparameter search.
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

fn default_beta() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

/// Optimizer settings; every field defaults to the library default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    pub newton_polish: bool,
    pub hyper_max_iters: usize,
    pub hyper_grad_tol: f64,
    pub hyper_fd_step: f64,
    pub hyper_max_line_evals: usize,
    pub inner_grad_tol: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        let o = OptimConfig::default();
        Self {
            max_iters: o.max_iters,
            grad_tol: o.grad_tol,
            step_tol: o.step_tol,
            newton_polish: o.newton_polish,
            hyper_max_iters: o.hyper.max_iters,
            hyper_grad_tol: o.hyper.grad_tol,
            hyper_fd_step: o.hyper.fd_step,
            hyper_max_line_evals: o.hyper.max_line_evals,
            inner_grad_tol: o.hyper.inner_grad_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub sources: Vec<SourceConfig>,
    /// Latent dimension of a single fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_min: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_max: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// `None` uses 10 restarts with a polynomial kernel and 3 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default)]
    pub rescale: bool,
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default)]
    pub convention: Convention,
    #[serde(default)]
    pub alternate: bool,
    #[serde(default)]
    pub init: Init,
    /// Truth sidecar written by `synth`; enables the error measures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
}

impl ProblemConfig {
    /// A configuration over `sources` with every setting at its default.
    pub fn new(sources: Vec<SourceConfig>) -> Self {
        Self {
            sources,
            q: None,
            q_min: None,
            q_max: None,
            seed: 0,
            restarts: None,
            rescale: false,
            normalize: true,
            convention: Convention::default(),
            alternate: false,
            init: Init::default(),
            truth: None,
            output: None,
            optimizer: OptimizerSettings::default(),
        }
    }

    /// Reads, resolves and validates a TOML configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: ProblemConfig =
            toml::from_str(&text).map_err(|e| CliError::config(path, e.message_at(&text)))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()
            .map_err(|(key, msg)| CliError::config(path, with_line(&text, key, &msg)))?;
        cfg.check_files()?;
        Ok(cfg)
    }

    /// Validates a configuration echoed inside the result document `origin`.
    pub fn checked(self, origin: &Path) -> Result<Self> {
        let cfg = self;
        cfg.validate()
            .map_err(|(key, msg)| CliError::config(origin, format!("echoed config `{key}`: {msg}")))?;
        cfg.check_files()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for s in &mut self.sources {
            join(&mut s.data);
        }
        if let Some(t) = self.truth.as_mut() {
            join(t);
        }
        if let Some(o) = self.output.as_mut() {
            join(o);
        }
    }

    /// Checks field values; on failure returns the offending key.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.sources.is_empty() {
            return Err(("sources", "at least one [[sources]] entry is required".into()));
        }
        for s in &self.sources {
            if !(s.beta.is_finite() && s.beta > 0.0) {
                return Err(("beta", format!("beta must be positive, got {}", s.beta)));
            }
        }
        if self.q == Some(0) || self.q_min == Some(0) || self.q_max == Some(0) {
            return Err(("q", "latent dimensions start at 1".into()));
        }
        if let (Some(lo), Some(hi)) = (self.q_min, self.q_max) {
            if lo > hi {
                return Err(("q_min", format!("empty range q_min={lo} > q_max={hi}")));
            }
        }
        if self.restarts == Some(0) {
            return Err(("restarts", "restarts must be at least 1".into()));
        }
        let o = &self.optimizer;
        if o.max_iters == 0 || o.hyper_max_iters == 0 || o.hyper_max_line_evals == 0 {
            return Err(("optimizer", "iteration limits must be at least 1".into()));
        }
        let tols = [o.grad_tol, o.step_tol, o.hyper_grad_tol, o.hyper_fd_step, o.inner_grad_tol];
        if tols.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(("optimizer", "tolerances and steps must be positive".into()));
        }
        Ok(())
    }

    fn check_files(&self) -> Result<()> {
        for p in self
            .sources
            .iter()
            .map(|s| &s.data)
            .chain(self.truth.as_ref())
        {
            if !p.is_file() {
                return Err(CliError::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
                ));
            }
        }
        Ok(())
    }

    pub fn optim_config(&self) -> OptimConfig {
        let o = &self.optimizer;
        let defaults = OptimConfig::default();
        OptimConfig {
            max_iters: o.max_iters,
            grad_tol: o.grad_tol,
            step_tol: o.step_tol,
            restarts: self.restarts,
            init: match self.init {
                Init::Random => InitStrategy::RandomGaussian,
                Init::Pca => InitStrategy::Pca,
            },
            seed: self.seed,
            rescale: self.rescale,
            convention: self.convention.into(),
            newton_polish: o.newton_polish,
            hyper: HyperSearch {
                max_iters: o.hyper_max_iters,
                grad_tol: o.hyper_grad_tol,
                fd_step: o.hyper_fd_step,
                max_line_evals: o.hyper_max_line_evals,
                inner_grad_tol: o.inner_grad_tol,
                ..defaults.hyper
            },
        }
    }

    pub fn select_config(&self) -> SelectConfig {
        SelectConfig {
            optim: self.optim_config(),
            alternate: self.alternate,
        }
    }

    /// Cartesian product of the per-source kernel choices.
    pub fn kernel_sets(&self) -> Vec<Vec<KernelSpec>> {
        let mut sets: Vec<Vec<KernelSpec>> = vec![Vec::new()];
        for s in &self.sources {
            sets = sets
                .into_iter()
                .flat_map(|prefix| {
                    s.kernel.specs().into_iter().map(move |k| {
                        let mut next = prefix.clone();
                        next.push(k);
                        next
                    })
                })
                .collect();
        }
        sets
    }

    /// Latent dimensions to score. An explicit range wins over `q`; with
    /// neither, `1..=min(7, min d - 1)`.
    pub fn q_values(&self, sources: &[DataSource]) -> Vec<usize> {
        match (self.q_min, self.q_max, self.q) {
            (None, None, Some(q)) => vec![q],
            (None, None, None) => default_q_values(sources),
            (lo, hi, _) => {
                let lo = lo.unwrap_or(1);
                let hi = hi.unwrap_or_else(|| default_q_values(sources).last().copied().unwrap_or(lo));
                (lo..=hi).collect()
            }
        }
    }
}

/// A loaded source ready for fitting.
#[derive(Debug, Clone)]
pub struct LoadedSource {
    pub name: String,
    pub path: PathBuf,
    pub source: DataSource,
    pub normalization: Option<gplvm_core::Normalization>,
}

/// Reads every data file, normalizing columns unless disabled.
pub fn load_sources(cfg: &ProblemConfig) -> Result<Vec<LoadedSource>> {
    let mut out = Vec::with_capacity(cfg.sources.len());
    let mut rows = None;
    for (i, s) in cfg.sources.iter().enumerate() {
        let raw = crate::matrix_io::read_matrix(&s.data)?;
        match rows {
            Some(n) if n != raw.nrows() => {
                return Err(CliError::format(
                    &s.data,
                    format!("{} rows, but the first source has {n}", raw.nrows()),
                ))
            }
            _ => rows = Some(raw.nrows()),
        }
        let hyp = SourceHyperparams::new(s.beta)?;
        // The kernel is replaced per candidate; the first choice is a placeholder.
        let spec = s.kernel.specs()[0];
        let (source, normalization) = if cfg.normalize {
            let (src, norm) = DataSource::from_raw(&raw, spec, hyp)
                .map_err(|e| CliError::format(&s.data, e))?;
            (src, Some(norm))
        } else {
            let src = DataSource::unchecked(raw, spec, hyp).map_err(|e| CliError::format(&s.data, e))?;
            (src, None)
        };
        out.push(LoadedSource {
            name: s.name.clone().unwrap_or_else(|| format!("source{}", i + 1)),
            path: s.data.clone(),
            source,
            normalization,
        });
    }
    Ok(out)
}

trait MessageAt {
    fn message_at(&self, text: &str) -> String;
}

impl MessageAt for toml::de::Error {
    /// `line N: message`, or the bare message when no span is known.
    fn message_at(&self, text: &str) -> String {
        match self.span() {
            Some(span) => {
                let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                format!("line {line}: {}", self.message())
            }
            None => self.message().to_string(),
        }
    }
}

/// Prefixes `msg` with the first line that assigns `key`, if any.
fn with_line(text: &str, key: &str, msg: &str) -> String {
    let found = text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('=') || rest.starts_with(']'))
            || l.starts_with(&format!("[{key}]"))
            || l.starts_with(&format!("[[{key}]]"))
    });
    match found {
        Some(i) => format!("line {}: {msg}", i + 1),
        None => msg.to_string(),
    }
}
