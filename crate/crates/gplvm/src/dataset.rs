//! Synthetic datasets on disk: a CSV of observations plus a JSON sidecar
//! with the generating latents, their group labels and the generator
//! settings.

use std::path::{Path, PathBuf};

use gplvm_core::synth::{project_to_high_dim, Projection};
use gplvm_core::{make_true_latents, GenConfig, KernelSpec, NoiseScale, PatternGroup, TruePattern};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::matrix_io::{from_rows, rows_of, write_matrix};
use crate::FORMAT_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorEcho {
    pub d: usize,
    pub kernel: String,
    pub beta: f64,
    /// `variance` or `precision`: how `beta` sets the noise.
    pub noise_scale: String,
    pub noise_variance: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub format_version: u32,
    /// Data file the sidecar describes, relative to the sidecar.
    pub data: PathBuf,
    pub generator: GeneratorEcho,
    pub groups: Vec<String>,
    pub points: Vec<Vec<f64>>,
}

impl TruthSidecar {
    pub fn pattern(&self, origin: &Path) -> Result<TruePattern> {
        let points = from_rows(&self.points).map_err(|e| CliError::format(origin, e))?;
        let groups = self
            .groups
            .iter()
            .map(|g| {
                PatternGroup::from_name(g)
                    .ok_or_else(|| CliError::format(origin, format!("unknown group `{g}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        TruePattern::new(points, groups).map_err(|e| CliError::format(origin, e))
    }
}

pub fn read_truth(path: &Path) -> Result<TruePattern> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let sidecar: TruthSidecar =
        serde_json::from_str(&text).map_err(|e| CliError::format(path, e))?;
    sidecar.pattern(path)
}

/// Sidecar path next to a data file: `data.csv` becomes `data.truth.json`.
pub fn sidecar_path(data: &Path) -> PathBuf {
    data.with_extension("truth.json")
}

pub fn noise_scale_name(s: NoiseScale) -> &'static str {
    match s {
        NoiseScale::Variance => "variance",
        NoiseScale::Precision => "precision",
    }
}

pub struct Written {
    pub data: PathBuf,
    pub truth: Option<PathBuf>,
    pub projection: Projection,
}

/// Generates the circles-and-lines dataset and writes the raw (unnormalized)
/// observations, plus the sidecar when `with_truth` is set.
pub fn write_synthetic(data: &Path, gen: &GenConfig, with_truth: bool) -> Result<Written> {
    let pattern = make_true_latents();
    let projection = project_to_high_dim(&pattern.points, gen)?;
    write_matrix(data, &projection.raw)?;
    let truth = if with_truth {
        let path = sidecar_path(data);
        let sidecar = TruthSidecar {
            format_version: FORMAT_VERSION,
            data: data.file_name().map(PathBuf::from).unwrap_or_default(),
            generator: GeneratorEcho {
                d: gen.d,
                kernel: gen.kernel.name().to_string(),
                beta: gen.beta,
                noise_scale: noise_scale_name(gen.noise_scale).to_string(),
                noise_variance: gen.noise_variance(),
                seed: gen.seed,
            },
            groups: pattern.groups.iter().map(|g| g.name().to_string()).collect(),
            points: rows_of(&pattern.points),
        };
        let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Some(path)
    } else {
        None
    };
    Ok(Written {
        data: data.to_path_buf(),
        truth,
        projection,
    })
}

pub fn kernel_from_name(name: &str) -> Option<KernelSpec> {
    match name {
        "linear" => Some(KernelSpec::linear()),
        "poly" | "polynomial" => Some(KernelSpec::polynomial()),
        _ => None,
    }
}
