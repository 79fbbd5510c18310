//! Result documents written by `fit` and `select`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gplvm_core::model_select::ScoredModel;
use gplvm_core::{ErrorMeasure, ErrorReport, ModelScore, Normalization, SelectionReport};
use serde::{Deserialize, Serialize};

use crate::config::ProblemConfig;
use crate::error::{CliError, Result};
use crate::matrix_io::rows_of;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Fit,
    Select,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub format_version: u32,
    pub command: Command,
    /// Fully resolved configuration; running it again repeats the scores.
    pub config: ProblemConfig,
    pub sources: Vec<SourceSummary>,
    pub candidates: Vec<CandidateEntry>,
    pub best: Option<BestModel>,
    pub curves: Vec<CurveData>,
    pub runtime: Runtime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSummary {
    pub name: String,
    pub path: PathBuf,
    pub n: usize,
    pub d: usize,
    /// Column means and standard deviations subtracted and divided out at
    /// load time; absent with `normalize = false`.
    pub normalization: Option<NormalizationDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationDoc {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl From<&Normalization> for NormalizationDoc {
    fn from(n: &Normalization) -> Self {
        Self {
            means: n.means.clone(),
            stds: n.stds.clone(),
        }
    }
}

/// One scored candidate. Non-finite values are written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub q: usize,
    pub kernels: Vec<String>,
    pub label: String,
    pub score: Option<f64>,
    pub error: Option<String>,
    pub betas: Vec<f64>,
    pub latent_objective: Option<f64>,
    pub log_det_hessian: Option<f64>,
    pub free_coordinates: Option<usize>,
    /// Some Hessian eigenvalues were raised to the floor before the
    /// log-determinant was taken.
    pub hessian_floored: bool,
    pub restart_values: Vec<Option<f64>>,
    /// Scores of each source fitted alone (multi-source candidates only).
    pub source_scores: Vec<Option<f64>>,
    pub degenerate_rows: Vec<usize>,
    pub iterations: usize,
    pub termination: Option<String>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl CandidateEntry {
    pub fn from_score(entry: &ModelScore) -> Self {
        let c = &entry.candidate;
        let mut out = Self {
            q: c.q,
            kernels: c.specs.iter().map(|k| k.name().to_string()).collect(),
            label: c.label(),
            score: finite(entry.score),
            error: entry.error.clone(),
            betas: Vec::new(),
            latent_objective: None,
            log_det_hessian: None,
            free_coordinates: None,
            hessian_floored: false,
            restart_values: Vec::new(),
            source_scores: Vec::new(),
            degenerate_rows: Vec::new(),
            iterations: 0,
            termination: None,
        };
        if let Some(ScoredModel {
            fit, source_fits, ..
        }) = &entry.result
        {
            out.betas = fit.hyp_star.iter().map(|h| h.beta()).collect();
            if let Some(h) = fit.hyp_objective {
                out.latent_objective = finite(h.latent);
                out.log_det_hessian = finite(h.log_det_a);
                out.free_coordinates = Some(h.free);
                out.hessian_floored = h.floored;
            }
            out.restart_values = fit.restart_values.iter().map(|&v| finite(v)).collect();
            out.source_scores = source_fits
                .iter()
                .map(|f| f.hyp_objective.and_then(|h| finite(h.value)))
                .collect();
            out.degenerate_rows = fit.degenerate_rows.clone();
            out.iterations = fit.iterations;
            out.termination = Some(format!("{:?}", fit.termination));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestModel {
    pub q: usize,
    pub label: String,
    pub score: f64,
    pub betas: Vec<f64>,
    /// Gauge-fixed latent coordinates, one row per sample.
    pub x_star: Vec<Vec<f64>>,
    pub degenerate_rows: Vec<usize>,
    /// Error measures against the truth pattern, when one was configured.
    pub errors: Option<ErrorsDoc>,
    pub errors_unavailable: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureDoc {
    pub absolute: f64,
    pub signed: f64,
}

impl From<ErrorMeasure> for MeasureDoc {
    fn from(m: ErrorMeasure) -> Self {
        Self {
            absolute: m.absolute,
            signed: m.signed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorsDoc {
    pub radial: MeasureDoc,
    pub angular: MeasureDoc,
    pub linear: f64,
}

impl From<ErrorReport> for ErrorsDoc {
    fn from(r: ErrorReport) -> Self {
        Self {
            radial: r.radial.into(),
            angular: r.angular.into(),
            linear: r.linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveData {
    pub label: String,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub q: usize,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Runtime {
    pub seconds: f64,
    pub threads: usize,
    pub version: String,
}

impl ResultDocument {
    pub fn candidates_from(report: &SelectionReport) -> Vec<CandidateEntry> {
        report.entries.iter().map(CandidateEntry::from_score).collect()
    }

    pub fn curves_from(report: &SelectionReport) -> Vec<CurveData> {
        report
            .curves()
            .into_iter()
            .map(|c| CurveData {
                label: c.label,
                points: c
                    .points
                    .into_iter()
                    .map(|(q, s)| CurvePoint { q, score: finite(s) })
                    .collect(),
            })
            .collect()
    }

    pub fn best_from(report: &SelectionReport, errors: Option<std::result::Result<ErrorReport, String>>) -> Option<BestModel> {
        let entry = report.best_entry()?;
        let scored = entry.result.as_ref()?;
        let (errors, errors_unavailable) = match errors {
            Some(Ok(r)) => (Some(r.into()), None),
            Some(Err(e)) => (None, Some(e)),
            None => (None, None),
        };
        Some(BestModel {
            q: entry.candidate.q,
            label: entry.candidate.label(),
            score: entry.score,
            betas: scored.fit.hyp_star.iter().map(|h| h.beta()).collect(),
            x_star: rows_of(&scored.fit.x_star),
            degenerate_rows: scored.fit.degenerate_rows.clone(),
            errors,
            errors_unavailable,
        })
    }

    /// `(label, q, score)` of every candidate, in document order.
    pub fn scores(&self) -> Vec<(String, usize, Option<f64>)> {
        self.candidates
            .iter()
            .map(|c| (c.label.clone(), c.q, c.score))
            .collect()
    }

    /// Two-column `q score` blocks, one per kernel assignment, separated by
    /// blank lines. Failed candidates print `inf`.
    pub fn curves_text(&self) -> String {
        let mut out = String::new();
        for (i, c) in self.curves.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "# {}", c.label);
            for p in &c.points {
                match p.score {
                    Some(s) => {
                        let _ = writeln!(out, "{} {}", p.q, s);
                    }
                    None => {
                        let _ = writeln!(out, "{} inf", p.q);
                    }
                }
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("document serializes");
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let doc: ResultDocument =
            serde_json::from_str(&text).map_err(|e| CliError::format(path, e))?;
        if doc.format_version != crate::FORMAT_VERSION {
            return Err(CliError::format(
                path,
                format!(
                    "format_version {} is not supported (expected {})",
                    doc.format_version,
                    crate::FORMAT_VERSION
                ),
            ));
        }
        Ok(doc)
    }
}

/// Largest absolute score difference between two documents over the same
/// candidate grid; `None` when the grids or the set of failures differ.
pub fn max_score_difference(a: &ResultDocument, b: &ResultDocument) -> Option<f64> {
    let (sa, sb) = (a.scores(), b.scores());
    if sa.len() != sb.len() {
        return None;
    }
    let mut worst: f64 = 0.0;
    for ((la, qa, va), (lb, qb, vb)) in sa.iter().zip(&sb) {
        if la != lb || qa != qb {
            return None;
        }
        match (va, vb) {
            (Some(x), Some(y)) => worst = worst.max((x - y).abs()),
            (None, None) => {}
            _ => return None,
        }
    }
    Some(worst)
}
