//! Synthetic benchmark: a fixed two-dimensional pattern of circles and lines
//! projected into a high-dimensional space through a random GP-LVM mapping.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_4, PI};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::likelihood::{normalize_columns, Normalization};
use crate::linalg::all_finite;

pub const OUTER_COUNT: usize = 20;
pub const INNER_COUNT: usize = 16;
pub const LINE_COUNT: usize = 30;
pub const OUTER_RADIUS: f64 = 2.0;
pub const INNER_RADIUS: f64 = 1.0;
pub const LINE_HALF_LENGTH: f64 = 2.0;
pub const PATTERN_SIZE: usize = OUTER_COUNT + INNER_COUNT + 2 * LINE_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatternGroup {
    OuterCircle,
    InnerCircle,
    Line1,
    Line2,
}

impl PatternGroup {
    pub const ALL: [PatternGroup; 4] = [
        PatternGroup::OuterCircle,
        PatternGroup::InnerCircle,
        PatternGroup::Line1,
        PatternGroup::Line2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PatternGroup::OuterCircle => "outer_circle",
            PatternGroup::InnerCircle => "inner_circle",
            PatternGroup::Line1 => "line1",
            PatternGroup::Line2 => "line2",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.name() == name)
    }

    pub fn is_circle(self) -> bool {
        matches!(self, PatternGroup::OuterCircle | PatternGroup::InnerCircle)
    }
}

/// Ground-truth latents with the group of every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TruePattern {
    pub points: DMatrix<f64>,
    pub groups: Vec<PatternGroup>,
}

impl TruePattern {
    pub fn new(points: DMatrix<f64>, groups: Vec<PatternGroup>) -> Result<Self> {
        if points.nrows() != groups.len() {
            return Err(Error::DimensionMismatch {
                expected: points.nrows(),
                found: groups.len(),
            });
        }
        Ok(Self { points, groups })
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    /// Sample indices of `group`, in generation order.
    pub fn indices(&self, group: PatternGroup) -> Vec<usize> {
        self.groups
            .iter()
            .enumerate()
            .filter(|(_, g)| **g == group)
            .map(|(i, _)| i)
            .collect()
    }
}

/// The 96-point pattern: 20 points on a circle of radius 2, 16 on a circle
/// of radius 1 (both starting on the positive first axis and running
/// anticlockwise), and two lines of 30 equally spaced points on `[-2, 2]`
/// through the origin at +45° and -45°.
pub fn make_true_latents() -> TruePattern {
    let mut rows: Vec<[f64; 2]> = Vec::with_capacity(PATTERN_SIZE);
    let mut groups = Vec::with_capacity(PATTERN_SIZE);
    for (count, radius, group) in [
        (OUTER_COUNT, OUTER_RADIUS, PatternGroup::OuterCircle),
        (INNER_COUNT, INNER_RADIUS, PatternGroup::InnerCircle),
    ] {
        for k in 0..count {
            let angle = 2.0 * PI * k as f64 / count as f64;
            rows.push([radius * libm::cos(angle), radius * libm::sin(angle)]);
            groups.push(group);
        }
    }
    for (angle, group) in [(FRAC_PI_4, PatternGroup::Line1), (-FRAC_PI_4, PatternGroup::Line2)] {
        let (c, s) = (libm::cos(angle), libm::sin(angle));
        for k in 0..LINE_COUNT {
            let t = -LINE_HALF_LENGTH + 2.0 * LINE_HALF_LENGTH * k as f64 / (LINE_COUNT - 1) as f64;
            rows.push([t * c, t * s]);
            groups.push(group);
        }
    }
    let points = DMatrix::from_fn(rows.len(), 2, |i, j| rows[i][j]);
    TruePattern { points, groups }
}

/// How the generator's `beta` sets the variance of the added noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseScale {
    /// `beta` is the noise variance.
    #[default]
    Variance,
    /// `beta` is the noise precision (variance `1/beta`).
    Precision,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenConfig {
    pub d: usize,
    pub kernel: KernelSpec,
    pub beta: f64,
    pub noise_scale: NoiseScale,
    pub seed: u64,
}

impl GenConfig {
    pub fn noise_variance(&self) -> f64 {
        match self.noise_scale {
            NoiseScale::Variance => self.beta,
            NoiseScale::Precision => 1.0 / self.beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidInput("output dimension must be at least 1".into()));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidInput("beta must be finite and positive".into()));
        }
        Ok(())
    }
}

/// Explicit features whose inner products reproduce the kernel without noise.
///
/// Linear: the coordinates themselves. Polynomial (degree 2):
/// `[1, √2 x_m, x_m², √2 x_m x_n (m < n)]`, so that
/// `φ(x)·φ(x') = (1 + x·x')²`.
pub fn feature_map(x: &DMatrix<f64>, kernel: &KernelSpec) -> DMatrix<f64> {
    match kernel.family() {
        KernelFamily::Linear => x.clone(),
        KernelFamily::Polynomial => {
            let (n, q) = x.shape();
            let m = 1 + q + q * (q + 1) / 2;
            let sqrt2 = core::f64::consts::SQRT_2;
            DMatrix::from_fn(n, m, |i, k| {
                if k == 0 {
                    return 1.0;
                }
                let k = k - 1;
                if k < q {
                    return sqrt2 * x[(i, k)];
                }
                // pairs (a, b) with a <= b in row-major order
                let mut idx = k - q;
                for a in 0..q {
                    let span = q - a;
                    if idx < span {
                        let b = a + idx;
                        let scale = if a == b { 1.0 } else { sqrt2 };
                        return scale * x[(i, a)] * x[(i, b)];
                    }
                    idx -= span;
                }
                unreachable!("feature index within bounds")
            })
        }
    }
}

/// Un-normalized observations `Φ Wᵀ + ξ` with `W ~ N(0, 1)` and
/// `ξ ~ N(0, noise_variance)`.
pub fn draw_observations<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    kernel: &KernelSpec,
    d: usize,
    noise_variance: f64,
    rng: &mut R,
) -> DMatrix<f64> {
    let phi = feature_map(x, kernel);
    let w = DMatrix::<f64>::from_fn(d, phi.ncols(), |_, _| StandardNormal.sample(rng));
    let sd = libm::sqrt(noise_variance);
    let noise = DMatrix::<f64>::from_fn(x.nrows(), d, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        sd * z
    });
    phi * w.transpose() + noise
}

/// Generated data set: normalized observations plus what was removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub y: DMatrix<f64>,
    pub raw: DMatrix<f64>,
    pub normalization: Normalization,
}

/// Projects `x` to `cfg.d` dimensions and normalizes each column to zero mean
/// and unit variance. Deterministic per seed.
pub fn project_to_high_dim(x: &DMatrix<f64>, cfg: &GenConfig) -> Result<Projection> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    project_with_rng(x, cfg, &mut rng)
}

pub fn project_with_rng<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    cfg: &GenConfig,
    rng: &mut R,
) -> Result<Projection> {
    cfg.validate()?;
    if !all_finite(x) {
        return Err(Error::InvalidInput("latents contain non-finite values".into()));
    }
    let raw = draw_observations(x, &cfg.kernel, cfg.d, cfg.noise_variance(), rng);
    let (y, normalization) = normalize_columns(&raw)?;
    Ok(Projection {
        y,
        raw,
        normalization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{kernel_matrix, SourceHyperparams};

    #[test]
    fn pattern_shape() {
        let p = make_true_latents();
        assert_eq!(p.n(), 96);
        assert_eq!(p.points.ncols(), 2);
        assert_eq!(p.indices(PatternGroup::OuterCircle).len(), 20);
        assert_eq!(p.indices(PatternGroup::InnerCircle).len(), 16);
        let outer = p.indices(PatternGroup::OuterCircle);
        for w in 0..20 {
            let a = p.points.row(outer[w]);
            let b = p.points.row(outer[(w + 1) % 20]);
            let angle = libm::acos(a.dot(&b) / (a.norm() * b.norm()));
            assert!((angle - 2.0 * PI / 20.0).abs() < 1e-12);
        }
        // centred
        assert!(p.points.row_sum().amax() < 1e-12);
    }

    #[test]
    fn polynomial_features_reproduce_kernel() {
        let x = DMatrix::from_row_slice(3, 3, &[0.3, -1.0, 2.0, 1.5, 0.2, -0.4, 0.0, 0.7, 1.1]);
        let phi = feature_map(&x, &KernelSpec::polynomial());
        assert_eq!(phi.ncols(), 1 + 3 + 6);
        let k = kernel_matrix(&x, &KernelSpec::polynomial(), &SourceHyperparams::new(1e300).unwrap())
            .unwrap();
        assert!((phi.clone() * phi.transpose() - k).amax() < 1e-12);
    }

    #[test]
    fn normalized_output_and_determinism() {
        let p = make_true_latents();
        let cfg = GenConfig {
            d: 10,
            kernel: KernelSpec::linear(),
            beta: 0.1,
            noise_scale: NoiseScale::Variance,
            seed: 1,
        };
        let a = project_to_high_dim(&p.points, &cfg).unwrap();
        assert_eq!(a.y.shape(), (96, 10));
        for c in a.y.column_iter() {
            assert!(c.mean().abs() < 1e-9);
            assert!((c.norm_squared() / 96.0 - 1.0).abs() < 1e-9);
        }
        assert_eq!(a, project_to_high_dim(&p.points, &cfg).unwrap());
    }

    #[test]
    fn noise_free_identity_projection_recovers_columns() {
        let p = make_true_latents();
        let (x_norm, _) = normalize_columns(&p.points).unwrap();
        let proj = draw_observations(&p.points, &KernelSpec::linear(), 2, 0.0, &mut ChaCha8Rng::seed_from_u64(1));
        // Y = X Wᵀ exactly; with W = I this is X itself
        let phi = feature_map(&p.points, &KernelSpec::linear());
        assert_eq!(phi, p.points);
        let (y, _) = normalize_columns(&(phi * DMatrix::<f64>::identity(2, 2))).unwrap();
        assert!((y - x_norm).amax() < 1e-12);
        assert_eq!(proj.shape(), (96, 2));
    }

    #[test]
    fn column_covariance_matches_kernel_plus_noise() {
        // Every column is an independent draw; zero-mean Gaussian products
        // give the per-entry standard error.
        let x = DMatrix::from_row_slice(4, 2, &[0.5, -1.0, 1.2, 0.3, -0.7, 0.8, 0.0, 0.0]);
        let draws = 10_000;
        let noise = 0.3;
        for (kernel, seed) in [(KernelSpec::linear(), 1), (KernelSpec::polynomial(), 2)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y = draw_observations(&x, &kernel, draws, noise, &mut rng);
            let expected =
                kernel_matrix(&x, &kernel, &SourceHyperparams::new(1.0 / noise).unwrap()).unwrap();
            let est = &y * y.transpose() / draws as f64;
            for i in 0..4 {
                for j in 0..=i {
                    let c = expected[(i, j)];
                    let se = libm::sqrt(
                        (expected[(i, i)] * expected[(j, j)] + c * c) / draws as f64,
                    );
                    assert!(
                        (est[(i, j)] - c).abs() <= 3.0 * se,
                        "{} ({i},{j}): {} vs {c} (se {se})",
                        kernel.name(),
                        est[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn noise_scale_conventions() {
        let mut cfg = GenConfig {
            d: 3,
            kernel: KernelSpec::linear(),
            beta: 4.0,
            noise_scale: NoiseScale::Variance,
            seed: 0,
        };
        assert_eq!(cfg.noise_variance(), 4.0);
        cfg.noise_scale = NoiseScale::Precision;
        assert_eq!(cfg.noise_variance(), 0.25);
        cfg.beta = 0.0;
        assert!(cfg.validate().is_err());
    }
}
