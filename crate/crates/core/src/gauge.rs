//! Removal of the rotational and reflectional symmetry of the latent space.
//!
//! Both kernels depend on the latents only through inner products, so `X` and
//! `X Uᵀ` are equivalent for any orthogonal `U`. The gauge used here rotates
//! sample 1 onto `e₁`, sample 2 into `span(e₁, e₂)` and so on, which zeroes the
//! upper-right corner of the first `q` rows, then flips column signs so the
//! leading diagonal is non-negative.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Row norms below this mark the gauge as degenerate (non-unique).
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

/// Tolerance used when checking that pinned entries are zero.
pub const PIN_TOLERANCE: f64 = 1e-9;

/// Which latent coordinates are pinned to zero and which carry a sign constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaugeSpec {
    n: usize,
    q: usize,
}

impl GaugeSpec {
    pub fn new(n: usize, q: usize) -> Self {
        Self { n, q }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Number of rows that take part in the gauge, `min(N, q)`.
    pub fn constrained_rows(&self) -> usize {
        self.n.min(self.q)
    }

    #[inline]
    pub fn is_pinned(&self, row: usize, col: usize) -> bool {
        row < self.q && col > row
    }

    /// Pinned `(row, col)` pairs in row-major order.
    pub fn pinned(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.constrained_rows() {
            for j in (i + 1)..self.q {
                out.push((i, j));
            }
        }
        out
    }

    pub fn pinned_count(&self) -> usize {
        (0..self.constrained_rows()).map(|i| self.q - 1 - i).sum()
    }

    /// Diagonal entries `(i, i)` that must be non-negative.
    pub fn sign_constrained(&self) -> Vec<usize> {
        (0..self.constrained_rows()).collect()
    }

    /// Number of free coordinates `F = N q - |pinned|`.
    pub fn free_count(&self) -> usize {
        self.n * self.q - self.pinned_count()
    }

    /// Free `(row, col)` pairs in packing order (row-major).
    pub fn free_indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            (0..self.q)
                .filter(move |&j| !self.is_pinned(i, j))
                .map(move |j| (i, j))
        })
    }
}

/// A gauge-fixed latent matrix together with the rows for which the gauge
/// could not be made unique.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeFixed {
    pub x: DMatrix<f64>,
    pub degenerate_rows: Vec<usize>,
}

impl GaugeFixed {
    pub fn is_degenerate(&self) -> bool {
        !self.degenerate_rows.is_empty()
    }
}

/// Rotates and reflects `x` into the canonical gauge.
///
/// Row norms are preserved. Rows among the first `q` whose remaining
/// component is shorter than [`DEGENERACY_THRESHOLD`] are reported as
/// degenerate. Diagonal entries are made non-negative either way.
pub fn apply_gauge(x: &DMatrix<f64>) -> GaugeFixed {
    let mut x = x.clone();
    let (n, q) = x.shape();
    let mut degenerate_rows = Vec::new();
    for i in 0..n.min(q) {
        // Givens rotations on column pairs (i, j) fold row i onto column i.
        for j in ((i + 1)..q).rev() {
            let b = x[(i, j)];
            if b == 0.0 {
                continue;
            }
            let a = x[(i, i)];
            let r = libm::hypot(a, b);
            let (c, s) = (a / r, b / r);
            for k in 0..n {
                let xi = x[(k, i)];
                let xj = x[(k, j)];
                x[(k, i)] = c * xi + s * xj;
                x[(k, j)] = -s * xi + c * xj;
            }
            x[(i, j)] = 0.0;
        }
        let diag = x[(i, i)];
        if diag.abs() < DEGENERACY_THRESHOLD {
            degenerate_rows.push(i);
        }
        if diag < 0.0 {
            for k in 0..n {
                x[(k, i)] = -x[(k, i)];
            }
        }
    }
    GaugeFixed { x, degenerate_rows }
}

/// True when all pinned entries vanish (to [`PIN_TOLERANCE`]) and the
/// constrained diagonal is non-negative.
pub fn is_gauge_fixed(x: &DMatrix<f64>) -> bool {
    let spec = GaugeSpec::new(x.nrows(), x.ncols());
    spec.pinned()
        .iter()
        .all(|&(i, j)| x[(i, j)].abs() <= PIN_TOLERANCE)
        && spec
            .sign_constrained()
            .iter()
            .all(|&i| x[(i, i)] >= -PIN_TOLERANCE)
}

/// Extracts the free coordinates of `x` in row-major order.
pub fn pack(x: &DMatrix<f64>, spec: &GaugeSpec) -> Result<DVector<f64>> {
    if x.shape() != (spec.n, spec.q) {
        return Err(Error::InvalidInput(format!(
            "latent matrix is {}x{}, gauge expects {}x{}",
            x.nrows(),
            x.ncols(),
            spec.n,
            spec.q
        )));
    }
    if let Some(&(i, j)) = spec
        .pinned()
        .iter()
        .find(|&&(i, j)| x[(i, j)].abs() > PIN_TOLERANCE)
    {
        return Err(Error::Precondition(format!(
            "pinned latent entry ({i}, {j}) is {:e}, expected zero",
            x[(i, j)]
        )));
    }
    Ok(DVector::from_iterator(
        spec.free_count(),
        spec.free_indices().map(|(i, j)| x[(i, j)]),
    ))
}

/// Inverse of [`pack`]; pinned entries are exactly zero.
pub fn unpack(v: &[f64], spec: &GaugeSpec) -> Result<DMatrix<f64>> {
    if v.len() != spec.free_count() {
        return Err(Error::DimensionMismatch {
            expected: spec.free_count(),
            found: v.len(),
        });
    }
    let mut x = DMatrix::zeros(spec.n, spec.q);
    for ((i, j), &value) in spec.free_indices().zip(v) {
        x[(i, j)] = value;
    }
    Ok(x)
}

/// Restricts an `Nq`-vector indexed `r q + μ` to the free coordinates.
pub(crate) fn free_positions(spec: &GaugeSpec) -> Vec<usize> {
    spec.free_indices().map(|(i, j)| i * spec.q + j).collect()
}
