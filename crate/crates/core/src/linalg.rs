//! Small dense linear-algebra helpers shared by the likelihood code.

use nalgebra::{Cholesky, DMatrix, Dyn};

/// Diagonal jitter schedule used when a Cholesky factorization fails.
///
/// The first attempt is made without jitter. On failure `initial` is added to
/// the diagonal and multiplied by `factor` after each further failure until it
/// would exceed `max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterPolicy {
    pub initial: f64,
    pub factor: f64,
    pub max: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self {
            initial: 1e-10,
            factor: 10.0,
            max: 1e-4,
        }
    }
}

/// Cholesky factor together with the jitter that had to be added to obtain it.
pub struct Factor {
    pub chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl Factor {
    pub fn log_det(&self) -> f64 {
        log_det_cholesky(&self.chol)
    }
}

/// Factorizes a symmetric matrix, escalating diagonal jitter on failure.
///
/// Returns the last jitter tried on failure.
pub fn cholesky_with_jitter(m: &DMatrix<f64>, policy: &JitterPolicy) -> Result<Factor, f64> {
    if let Some(chol) = m.clone().cholesky() {
        return Ok(Factor { chol, jitter: 0.0 });
    }
    let mut jitter = policy.initial;
    let mut last = 0.0;
    while jitter <= policy.max * (1.0 + 1e-12) {
        let mut shifted = m.clone();
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += jitter;
        }
        if let Some(chol) = shifted.cholesky() {
            return Ok(Factor { chol, jitter });
        }
        last = jitter;
        jitter *= policy.factor;
    }
    Err(last)
}

pub fn log_det_cholesky(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| libm::log(l[(i, i)])).sum::<f64>()
}

/// Replaces `m` by `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}
