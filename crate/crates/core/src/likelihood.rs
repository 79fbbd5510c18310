//! The latent objective `L_X`, its derivatives, and the Laplace-approximated
//! hyperparameter objective `L_hyp`.
//!
//! For sources `s` with kernel matrices `K_s` and sample covariances
//! `S_s = Y_s Y_sᵀ / d_s`,
//!
//! ```text
//! L_X = Σ_s w_s [ d_s/(2N) tr(K_s⁻¹ S_s) + d_s/(2N) log|K_s| + d_s/2 log 2π ]
//! ```
//!
//! where `w_s = d_tot / d_s` when rescaling is enabled and 1 otherwise.
//! `N·L_X` is the negative log-likelihood of the data, so derivatives of
//! `L_X` are per-sample quantities.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gauge::{free_positions, is_gauge_fixed, GaugeSpec};
use crate::kernels::{inner_products, kernel_matrix_unchecked, KernelSpec, SourceHyperparams};
use crate::linalg::{all_finite, cholesky_with_jitter, symmetrize, JitterPolicy};

/// Column means must be this close to zero for a source to count as normalized.
pub const MEAN_TOLERANCE: f64 = 1e-9;
/// Column variances must be this close to one.
pub const VARIANCE_TOLERANCE: f64 = 1e-6;

/// Eigenvalues of `A` below `HESSIAN_FLOOR · λ_max` are raised to that floor.
pub const HESSIAN_FLOOR: f64 = 1e-10;
/// Eigenvalues of `A` below `-HESSIAN_NEGATIVE_TOLERANCE · λ_max` mean the
/// point is not a minimum.
pub const HESSIAN_NEGATIVE_TOLERANCE: f64 = 1e-6;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Per-column affine map applied to raw observations: `y = (raw - mean) / std`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Centres each column and scales it to unit (population) variance.
pub fn normalize_columns(raw: &DMatrix<f64>) -> Result<(DMatrix<f64>, Normalization)> {
    let (n, d) = raw.shape();
    if n < 2 || d == 0 {
        return Err(Error::InvalidInput(format!(
            "cannot normalize a {n}x{d} data matrix"
        )));
    }
    if !all_finite(raw) {
        return Err(Error::InvalidInput("data contain non-finite values".into()));
    }
    let mut y = raw.clone();
    let mut means = Vec::with_capacity(d);
    let mut stds = Vec::with_capacity(d);
    for (c, mut col) in y.column_iter_mut().enumerate() {
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
        let std = libm::sqrt(col.norm_squared() / n as f64);
        if !(std > 0.0) {
            return Err(Error::InvalidInput(format!("column {c} is constant")));
        }
        col /= std;
        means.push(mean);
        stds.push(std);
    }
    Ok((y, Normalization { means, stds }))
}

/// One observed data matrix with its kernel and hyperparameters.
///
/// The sample covariance `S = Y Yᵀ / d` is computed once and shared between
/// clones.
#[derive(Debug, Clone)]
pub struct DataSource {
    y: Arc<DMatrix<f64>>,
    s: Arc<DMatrix<f64>>,
    spec: KernelSpec,
    hyp: SourceHyperparams,
}

impl DataSource {
    /// Builds a source from data that are already column-normalized.
    pub fn new(y: DMatrix<f64>, spec: KernelSpec, hyp: SourceHyperparams) -> Result<Self> {
        let n = y.nrows() as f64;
        for (c, col) in y.column_iter().enumerate() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            if mean.abs() > MEAN_TOLERANCE || (var - 1.0).abs() > VARIANCE_TOLERANCE {
                return Err(Error::InvalidInput(format!(
                    "column {c} is not normalized (mean {mean:e}, variance {var})"
                )));
            }
        }
        Self::unchecked(y, spec, hyp)
    }

    /// Normalizes `raw` column-wise and returns the constants used.
    pub fn from_raw(
        raw: &DMatrix<f64>,
        spec: KernelSpec,
        hyp: SourceHyperparams,
    ) -> Result<(Self, Normalization)> {
        let (y, norm) = normalize_columns(raw)?;
        Ok((Self::unchecked(y, spec, hyp)?, norm))
    }

    /// Builds a source without checking column normalization.
    pub fn unchecked(y: DMatrix<f64>, spec: KernelSpec, hyp: SourceHyperparams) -> Result<Self> {
        let (n, d) = y.shape();
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput(format!("empty {n}x{d} data matrix")));
        }
        if !all_finite(&y) {
            return Err(Error::InvalidInput("data contain non-finite values".into()));
        }
        let mut s = &y * y.transpose() / d as f64;
        symmetrize(&mut s);
        Ok(Self {
            y: Arc::new(y),
            s: Arc::new(s),
            spec,
            hyp,
        })
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn d(&self) -> usize {
        self.y.ncols()
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    pub fn hyp(&self) -> SourceHyperparams {
        self.hyp
    }

    pub fn with_hyperparams(&self, hyp: SourceHyperparams) -> Self {
        Self { hyp, ..self.clone() }
    }

    pub fn with_spec(&self, spec: KernelSpec) -> Self {
        Self {
            spec,
            ..self.clone()
        }
    }
}

/// Value of `L_X` (nats per sample, constants included).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentObjectiveValue {
    pub value: f64,
    pub per_source: Vec<f64>,
}

/// Checks that `sources` share a sample count matching `x`.
pub(crate) fn check_problem(x: &DMatrix<f64>, sources: &[DataSource]) -> Result<usize> {
    let first = sources
        .first()
        .ok_or_else(|| Error::InvalidInput("no data sources".into()))?;
    let n = first.n();
    if let Some(bad) = sources.iter().find(|s| s.n() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.n(),
        });
    }
    if x.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x.nrows(),
        });
    }
    if !all_finite(x) {
        return Err(Error::InvalidInput(
            "latent matrix contains non-finite entries".into(),
        ));
    }
    Ok(n)
}

fn rescale_weights(sources: &[DataSource], rescale: bool) -> Vec<f64> {
    let d_tot: usize = sources.iter().map(DataSource::d).sum();
    sources
        .iter()
        .map(|s| if rescale { d_tot as f64 / s.d() as f64 } else { 1.0 })
        .collect()
}

/// Quantities of one source needed for values and derivatives.
struct SourceEval {
    /// `w d / (2N)`, the weight of the trace and log-determinant terms.
    c: f64,
    /// Constant term `w d/2 log 2π`.
    constant: f64,
    trace: f64,
    log_det: f64,
    /// `K⁻¹`
    p: DMatrix<f64>,
    /// `k'(x_i·x_j)`
    d1: DMatrix<f64>,
    /// `k''(x_i·x_j)`
    d2: DMatrix<f64>,
}

impl SourceEval {
    fn new(x: &DMatrix<f64>, src: &DataSource, index: usize, weight: f64) -> Result<Self> {
        let n = x.nrows();
        let spec = src.spec();
        let k = kernel_matrix_unchecked(x, &spec, &src.hyp());
        let factor = cholesky_with_jitter(&k, &JitterPolicy::default()).map_err(|jitter| {
            Error::NotPositiveDefinite {
                source_index: index,
                jitter,
            }
        })?;
        let mut p = factor.chol.inverse();
        symmetrize(&mut p);
        let trace = p.component_mul(src.s()).sum();
        let inner = inner_products(x);
        let d = src.d() as f64;
        Ok(Self {
            c: weight * d / (2.0 * n as f64),
            constant: weight * 0.5 * d * LN_2PI,
            trace,
            log_det: factor.log_det(),
            p,
            d1: inner.map(|t| spec.profile_d1(t)),
            d2: inner.map(|t| spec.profile_d2(t)),
        })
    }

    fn value(&self) -> f64 {
        self.c * (self.trace + self.log_det) + self.constant
    }

    /// `K⁻¹ S K⁻¹`
    fn q(&self, src: &DataSource) -> DMatrix<f64> {
        let mut q = if src.d() < src.n() {
            let py = &self.p * src.y();
            &py * py.transpose() / src.d() as f64
        } else {
            &self.p * src.s() * &self.p
        };
        symmetrize(&mut q);
        q
    }

    /// `∂L_X/∂K = c (K⁻¹ - K⁻¹SK⁻¹)`
    fn dl_dk(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        (&self.p - q) * self.c
    }

    fn gradient(&self, x: &DMatrix<f64>, src: &DataSource) -> DMatrix<f64> {
        match src.spec().family() {
            crate::kernels::KernelFamily::Linear => {
                // (d/N)(K⁻¹X - K⁻¹SK⁻¹X), avoiding the N×N product K⁻¹SK⁻¹
                let px = &self.p * x;
                let qx = &self.p * (src.s() * &px);
                (px - qx) * (2.0 * self.c)
            }
            crate::kernels::KernelFamily::Polynomial => {
                let g = self.dl_dk(&self.q(src));
                g.component_mul(&self.d1) * x * 2.0
            }
        }
    }
}

fn evaluate_sources(
    x: &DMatrix<f64>,
    sources: &[DataSource],
    rescale: bool,
) -> Result<Vec<SourceEval>> {
    check_problem(x, sources)?;
    rescale_weights(sources, rescale)
        .into_iter()
        .zip(sources)
        .enumerate()
        .map(|(i, (w, src))| SourceEval::new(x, src, i, w))
        .collect()
}

/// `L_X(X)` summed over sources.
pub fn neg_log_posterior_x(
    x: &DMatrix<f64>,
    sources: &[DataSource],
    rescale: bool,
) -> Result<LatentObjectiveValue> {
    let evals = evaluate_sources(x, sources, rescale)?;
    let per_source: Vec<f64> = evals.iter().map(SourceEval::value).collect();
    Ok(LatentObjectiveValue {
        value: per_source.iter().sum(),
        per_source,
    })
}

/// `∂L_X/∂X` as an `N×q` matrix.
pub fn grad_l_x(x: &DMatrix<f64>, sources: &[DataSource], rescale: bool) -> Result<DMatrix<f64>> {
    Ok(value_and_grad(x, sources, rescale)?.1)
}

/// `L_X` and its gradient from a single factorization per source.
pub fn value_and_grad(
    x: &DMatrix<f64>,
    sources: &[DataSource],
    rescale: bool,
) -> Result<(LatentObjectiveValue, DMatrix<f64>)> {
    let evals = evaluate_sources(x, sources, rescale)?;
    let mut grad = DMatrix::zeros(x.nrows(), x.ncols());
    let mut per_source = Vec::with_capacity(evals.len());
    for (ev, src) in evals.iter().zip(sources) {
        per_source.push(ev.value());
        grad += ev.gradient(x, src);
    }
    let value = per_source.iter().sum();
    Ok((LatentObjectiveValue { value, per_source }, grad))
}

/// Full Hessian of `L_X` over all `Nq` coordinates, indexed `r q + μ`.
pub fn hessian_full(x: &DMatrix<f64>, sources: &[DataSource], rescale: bool) -> Result<DMatrix<f64>> {
    let evals = evaluate_sources(x, sources, rescale)?;
    let (n, q) = x.shape();
    let mut h = DMatrix::zeros(n * q, n * q);
    for (ev, src) in evals.iter().zip(sources) {
        accumulate_hessian(&mut h, x, ev, src);
    }
    symmetrize(&mut h);
    Ok(h)
}

/// Adds one source's contribution to `h`.
///
/// With `G = ∂L/∂K` and `∂L/∂x_{rμ} = 2 Σ_j G_rj k'_rj x_jμ`, the second
/// derivative with respect to `x_{pν}` is
///
/// ```text
/// 2 Σ_j (∂G_rj/∂x_pν) k'_rj x_jμ
///   + 2 δ_rp Σ_j G_rj k''_rj x_jν x_jμ + 2 G_rp k''_rp x_rν x_pμ
///   + 2 G_rp k'_rp δ_μν
/// ```
///
/// and `∂K/∂x_pν = e_p uᵀ + u e_pᵀ` with `u_b = k'_pb x_bν` is rank two, so
/// `∂G = c(-P E P + P E Q + Q E P)` is assembled from outer products.
fn accumulate_hessian(h: &mut DMatrix<f64>, x: &DMatrix<f64>, ev: &SourceEval, src: &DataSource) {
    let (n, q) = x.shape();
    let p = &ev.p;
    let qm = ev.q(src);
    let g = ev.dl_dk(&qm);
    let c = ev.c;
    let linear = src.spec().family() == crate::kernels::KernelFamily::Linear;

    let mut u = DVector::zeros(n);
    let mut dg = DMatrix::zeros(n, n);
    for pp in 0..n {
        for nu in 0..q {
            let col = pp * q + nu;
            for b in 0..n {
                u[b] = ev.d1[(pp, b)] * x[(b, nu)];
            }
            let pu = p * &u;
            let qu = &qm * &u;
            let p_col = p.column(pp);
            let q_col = qm.column(pp);
            if linear {
                // dG X from its four rank-one pieces:
                // c[P_p (qu - pu)ᵀ + Q_p puᵀ + pu (Q_p - P_p)ᵀ + qu P_pᵀ] X
                let a1 = (&qu - &pu).transpose() * x;
                let a2 = pu.transpose() * x;
                let a3 = (q_col - p_col).transpose() * x;
                let a4 = p_col.transpose() * x;
                for r in 0..n {
                    for mu in 0..q {
                        let t = p_col[r] * a1[mu] + q_col[r] * a2[mu] + pu[r] * a3[mu]
                            + qu[r] * a4[mu];
                        h[(r * q + mu, col)] += 2.0 * c * t;
                    }
                }
            } else {
                for j in 0..n {
                    let (pj, qj, puj, quj) = (p[(pp, j)], qm[(pp, j)], pu[j], qu[j]);
                    for r in 0..n {
                        dg[(r, j)] = c
                            * (p_col[r] * (quj - puj)
                                + q_col[r] * puj
                                + pu[r] * (qj - pj)
                                + qu[r] * pj)
                            * ev.d1[(r, j)];
                    }
                }
                let t = &dg * x;
                for r in 0..n {
                    for mu in 0..q {
                        h[(r * q + mu, col)] += 2.0 * t[(r, mu)];
                    }
                }
                // k'' terms
                for mu in 0..q {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += g[(pp, j)] * ev.d2[(pp, j)] * x[(j, nu)] * x[(j, mu)];
                    }
                    h[(pp * q + mu, col)] += 2.0 * acc;
                }
                for r in 0..n {
                    let coef = 2.0 * g[(r, pp)] * ev.d2[(r, pp)] * x[(r, nu)];
                    for mu in 0..q {
                        h[(r * q + mu, col)] += coef * x[(pp, mu)];
                    }
                }
            }
            for r in 0..n {
                h[(r * q + nu, col)] += 2.0 * g[(r, pp)] * ev.d1[(r, pp)];
            }
        }
    }
}

/// Closed-form Hessian of a single linear-kernel source, term by term from
/// the matrix identities
///
/// ```text
/// ∂(-K⁻¹SK⁻¹X)_rμ/∂x_pν = -Q_rp δ_μν + (QX)_pμ (PX)_rν + (QX)_rν (PX)_pμ
///                          + Q_rp (XᵀPX)_νμ + (XᵀQX)_νμ P_rp
/// ∂(K⁻¹X)_rμ/∂x_pν      =  P_rp δ_μν - (PX)_rν (PX)_pμ - (XᵀPX)_νμ P_rp
/// ```
///
/// with `P = K⁻¹`, `Q = K⁻¹SK⁻¹`. Independent of [`hessian_full`]; used to
/// cross-check it.
pub fn linear_hessian_closed_form(
    x: &DMatrix<f64>,
    source: &DataSource,
    weight: f64,
) -> Result<DMatrix<f64>> {
    if source.spec().family() != crate::kernels::KernelFamily::Linear {
        return Err(Error::InvalidInput(
            "closed-form Hessian applies to the linear kernel only".into(),
        ));
    }
    let ev = SourceEval::new(x, source, 0, weight)?;
    let (n, q) = x.shape();
    let p = &ev.p;
    let qm = &ev.p * source.s() * &ev.p;
    let px = p * x;
    let qx = &qm * x;
    let xpx = x.transpose() * &px;
    let xqx = x.transpose() * &qx;
    let scale = 2.0 * ev.c;
    Ok(DMatrix::from_fn(n * q, n * q, |row, col| {
        let (r, mu) = (row / q, row % q);
        let (pp, nu) = (col / q, col % q);
        let delta = if mu == nu { 1.0 } else { 0.0 };
        let from_q = -qm[(r, pp)] * delta
            + qx[(pp, mu)] * px[(r, nu)]
            + qx[(r, nu)] * px[(pp, mu)]
            + qm[(r, pp)] * xpx[(nu, mu)]
            + xqx[(nu, mu)] * p[(r, pp)];
        let from_p = p[(r, pp)] * delta - px[(r, nu)] * px[(pp, mu)] - xpx[(nu, mu)] * p[(r, pp)];
        scale * (from_q + from_p)
    }))
}

/// Hessian of `L_X` restricted to the gauge-free coordinates.
#[derive(Debug, Clone)]
pub struct HessianReport {
    pub matrix: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: DVector<f64>,
    /// Set when an eigenvalue is below `-HESSIAN_NEGATIVE_TOLERANCE · λ_max`.
    pub not_minimum: bool,
}

fn check_gauge(x: &DMatrix<f64>, gauge: &GaugeSpec) -> Result<()> {
    if x.shape() != (gauge.n(), gauge.q()) {
        return Err(Error::Precondition(format!(
            "latent matrix is {}x{}, gauge expects {}x{}",
            x.nrows(),
            x.ncols(),
            gauge.n(),
            gauge.q()
        )));
    }
    if !is_gauge_fixed(x) {
        return Err(Error::Precondition(
            "latent matrix is not gauge-fixed".into(),
        ));
    }
    Ok(())
}

/// Hessian restricted to the free coordinates, without the spectrum.
pub fn hessian_free(
    x_star: &DMatrix<f64>,
    sources: &[DataSource],
    gauge: &GaugeSpec,
    rescale: bool,
) -> Result<DMatrix<f64>> {
    check_gauge(x_star, gauge)?;
    let full = hessian_full(x_star, sources, rescale)?;
    let free = free_positions(gauge);
    Ok(full.select_rows(free.iter()).select_columns(free.iter()))
}

/// Hessian `A` of `L_X` at a gauge-fixed optimum, with its spectrum.
pub fn hessian_a(
    x_star: &DMatrix<f64>,
    sources: &[DataSource],
    gauge: &GaugeSpec,
    rescale: bool,
) -> Result<HessianReport> {
    let matrix = hessian_free(x_star, sources, gauge, rescale)?;
    let mut eigenvalues = matrix.clone().symmetric_eigen().eigenvalues;
    eigenvalues
        .as_mut_slice()
        .sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let not_minimum = match (eigenvalues.as_slice().first(), eigenvalues.as_slice().last()) {
        (Some(&lo), Some(&hi)) => lo < -HESSIAN_NEGATIVE_TOLERANCE * hi.abs().max(f64::MIN_POSITIVE),
        _ => false,
    };
    Ok(HessianReport {
        matrix,
        eigenvalues,
        not_minimum,
    })
}

/// `log|A|` with the eigenvalue floor applied when needed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianLogDet {
    pub value: f64,
    pub floored: bool,
}

pub fn hessian_log_det(a: &DMatrix<f64>) -> Result<HessianLogDet> {
    if a.nrows() == 0 {
        return Ok(HessianLogDet {
            value: 0.0,
            floored: false,
        });
    }
    if let Some(chol) = a.clone().cholesky() {
        let l = chol.l_dirty();
        let pivots = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]);
        let (lo, hi) = pivots.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if lo > HESSIAN_FLOOR * hi {
            return Ok(HessianLogDet {
                value: crate::linalg::log_det_cholesky(&chol),
                floored: false,
            });
        }
    }
    let eig = a.clone().symmetric_eigen().eigenvalues;
    let hi = eig.max();
    let lo = eig.min();
    if !(hi > 0.0) || lo < -HESSIAN_NEGATIVE_TOLERANCE * hi {
        return Err(Error::IndefiniteHessian { min: lo, max: hi });
    }
    let floor = HESSIAN_FLOOR * hi;
    let mut floored = false;
    let value = eig
        .iter()
        .map(|&v| {
            if v < floor {
                floored = true;
                libm::log(floor)
            } else {
                libm::log(v)
            }
        })
        .sum();
    Ok(HessianLogDet { value, floored })
}

/// Constant bookkeeping of the hyperparameter objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvidenceConvention {
    /// `L_X + log|A|/(2N) - (q/2) log 2π`, with `A` the Hessian of `L_X`.
    Literal,
    /// `-(1/N) log ∫ exp(-N L_X) dX` under the Laplace approximation on the
    /// `F` gauge-free coordinates:
    /// `L_X + (log|A| + F log N)/(2N) - F/(2N) log 2π`.
    #[default]
    Laplace,
}

/// Value of the hyperparameter objective and its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypObjective {
    pub value: f64,
    pub latent: f64,
    pub log_det_a: f64,
    pub free: usize,
    pub floored: bool,
}

/// `L_hyp` at a gauge-fixed optimum `x_star`.
pub fn neg_log_hyp_posterior(
    sources: &[DataSource],
    x_star: &DMatrix<f64>,
    gauge: &GaugeSpec,
    rescale: bool,
    convention: EvidenceConvention,
) -> Result<HypObjective> {
    check_gauge(x_star, gauge)?;
    let n = x_star.nrows() as f64;
    let latent = neg_log_posterior_x(x_star, sources, rescale)?.value;
    let free = gauge.free_count();
    let log_det = if free == 0 {
        HessianLogDet {
            value: 0.0,
            floored: false,
        }
    } else {
        hessian_log_det(&hessian_free(x_star, sources, gauge, rescale)?)?
    };
    let value = match convention {
        EvidenceConvention::Literal => {
            latent + log_det.value / (2.0 * n) - 0.5 * gauge.q() as f64 * LN_2PI
        }
        EvidenceConvention::Laplace => {
            let f = free as f64;
            latent + (log_det.value + f * libm::log(n)) / (2.0 * n) - f / (2.0 * n) * LN_2PI
        }
    };
    Ok(HypObjective {
        value,
        latent,
        log_det_a: log_det.value,
        free,
        floored: log_det.floored,
    })
}

/// Laplace estimate of `log ∫ exp(-N L_X(X)) dX` over the gauge-free
/// coordinates: `-N L_X(X*) + (F/2) log 2π - ½ log|N A|`.
pub fn laplace_log_marginal(
    sources: &[DataSource],
    x_star: &DMatrix<f64>,
    gauge: &GaugeSpec,
    rescale: bool,
) -> Result<f64> {
    let hyp = neg_log_hyp_posterior(sources, x_star, gauge, rescale, EvidenceConvention::Laplace)?;
    Ok(-(x_star.nrows() as f64) * hyp.value)
}
