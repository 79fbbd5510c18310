//! Scale-invariant measures of how well recovered latents reproduce the
//! circles-and-lines pattern.

use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::{DMatrix, RowDVector};

use crate::error::{Error, Result};
use crate::synth::{PatternGroup, TruePattern};

/// Mean relative deviation, with signs kept (`signed`) or discarded
/// (`absolute`). Signed deviations from a mean cancel by construction, so
/// `signed` is close to zero and `absolute` is the informative variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMeasure {
    pub absolute: f64,
    pub signed: f64,
}

impl core::ops::Add for ErrorMeasure {
    type Output = ErrorMeasure;
    fn add(self, other: ErrorMeasure) -> ErrorMeasure {
        ErrorMeasure {
            absolute: self.absolute + other.absolute,
            signed: self.signed + other.signed,
        }
    }
}

const ZERO: ErrorMeasure = ErrorMeasure {
    absolute: 0.0,
    signed: 0.0,
};

fn check_rows(x: &DMatrix<f64>, pattern: &TruePattern) -> Result<()> {
    if x.nrows() != pattern.n() {
        return Err(Error::DimensionMismatch {
            expected: pattern.n(),
            found: x.nrows(),
        });
    }
    Ok(())
}

fn mean_relative(values: &[f64], reference: f64) -> ErrorMeasure {
    let count = values.len() as f64;
    values.iter().fold(ZERO, |acc, v| {
        let rel = (v - reference) / reference;
        ErrorMeasure {
            absolute: acc.absolute + rel.abs() / count,
            signed: acc.signed + rel / count,
        }
    })
}

/// Spread of distances from the origin around their mean, per circle,
/// summed over both circles.
pub fn radial_error(x: &DMatrix<f64>, pattern: &TruePattern) -> Result<ErrorMeasure> {
    check_rows(x, pattern)?;
    let mut total = ZERO;
    for group in [PatternGroup::OuterCircle, PatternGroup::InnerCircle] {
        let radii: Vec<f64> = pattern
            .indices(group)
            .into_iter()
            .map(|i| x.row(i).norm())
            .collect();
        if radii.is_empty() {
            continue;
        }
        let mean = radii.iter().sum::<f64>() / radii.len() as f64;
        if !(mean > 0.0) {
            return Err(Error::UndefinedMeasure("circle points collapse onto the origin"));
        }
        total = total + mean_relative(&radii, mean);
    }
    Ok(total)
}

fn angle_between(a: RowDVector<f64>, b: RowDVector<f64>) -> Result<f64> {
    let (na, nb) = (a.norm_squared(), b.norm_squared());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedMeasure("circle point at the origin"));
    }
    let dot = a.dot(&b);
    let cross = libm::sqrt((na * nb - dot * dot).max(0.0));
    Ok(libm::atan2(cross, dot))
}

/// Deviation of the angular gaps between neighbouring circle points (in
/// generation order, wrapping around) from the ideal `2π/|C|`, summed over
/// both circles.
pub fn angular_error(x: &DMatrix<f64>, pattern: &TruePattern) -> Result<ErrorMeasure> {
    check_rows(x, pattern)?;
    let mut total = ZERO;
    for group in [PatternGroup::OuterCircle, PatternGroup::InnerCircle] {
        let idx = pattern.indices(group);
        if idx.len() < 2 {
            continue;
        }
        let ideal = 2.0 * PI / idx.len() as f64;
        let gaps = (0..idx.len())
            .map(|k| angle_between(x.row(idx[k]).into_owned(), x.row(idx[(k + 1) % idx.len()]).into_owned()))
            .collect::<Result<Vec<f64>>>()?;
        total = total + mean_relative(&gaps, ideal);
    }
    Ok(total)
}

/// Residual fraction `SS_err / SS_tot` of a least-squares fit `x₂ = α x₁`
/// through the origin, summed over both lines. Uses the first two columns.
pub fn linear_error(x: &DMatrix<f64>, pattern: &TruePattern) -> Result<f64> {
    check_rows(x, pattern)?;
    if x.ncols() < 2 {
        return Err(Error::UndefinedMeasure("line fit needs two latent dimensions"));
    }
    let mut total = 0.0;
    for group in [PatternGroup::Line1, PatternGroup::Line2] {
        let idx = pattern.indices(group);
        if idx.is_empty() {
            continue;
        }
        let (x1, x2): (Vec<f64>, Vec<f64>) = idx.iter().map(|&i| (x[(i, 0)], x[(i, 1)])).unzip();
        let sxx: f64 = x1.iter().map(|a| a * a).sum();
        if sxx == 0.0 {
            return Err(Error::UndefinedMeasure("line is parallel to the second axis"));
        }
        let alpha = x1.iter().zip(&x2).map(|(a, b)| a * b).sum::<f64>() / sxx;
        let mean2 = x2.iter().sum::<f64>() / x2.len() as f64;
        let ss_err: f64 = x1.iter().zip(&x2).map(|(a, b)| (b - alpha * a).powi(2)).sum();
        let ss_tot: f64 = x2.iter().map(|b| (b - mean2).powi(2)).sum();
        if ss_tot == 0.0 {
            return Err(Error::UndefinedMeasure("line has no spread along the second axis"));
        }
        total += ss_err / ss_tot;
    }
    Ok(total)
}

/// Orthonormal `q×k` map `R` maximizing `tr(Rᵀ Xᵀ T)` (orthogonal Procrustes),
/// for `X` of shape `N×q` and target `T` of shape `N×k`.
pub fn procrustes_rotation(x: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() != target.nrows() {
        return Err(Error::DimensionMismatch {
            expected: target.nrows(),
            found: x.nrows(),
        });
    }
    let m = x.transpose() * target;
    let svd = m.svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => Ok(u * v_t),
        _ => Err(Error::InvalidInput("Procrustes SVD failed".into())),
    }
}

/// `X R` with `R` from [`procrustes_rotation`].
pub fn align_to(x: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(x * procrustes_rotation(x, target)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub radial: ErrorMeasure,
    pub angular: ErrorMeasure,
    pub linear: f64,
}

/// All three measures after aligning `x` to the true pattern.
pub fn evaluate(x: &DMatrix<f64>, pattern: &TruePattern) -> Result<ErrorReport> {
    check_rows(x, pattern)?;
    let aligned = align_to(x, &pattern.points)?;
    Ok(ErrorReport {
        radial: radial_error(&aligned, pattern)?,
        angular: angular_error(&aligned, pattern)?,
        linear: linear_error(&aligned, pattern)?,
    })
}
