//! Dot-product kernels on the latent space and their derivatives with respect
//! to the latent coordinates.
//!
//! Both supported families are functions of the inner product `t = x_i · x_j`
//! only: the linear kernel `k(t) = t` and the polynomial kernel
//! `k(t) = (1 + t)^2`. The kernel matrix adds the noise term `β⁻¹ δ_ij`.

use alloc::format;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, symmetrize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KernelFamily {
    Linear,
    Polynomial,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Linear => "linear",
            KernelFamily::Polynomial => "poly",
        }
    }
}

/// Kernel family plus its (fixed) parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KernelSpec {
    family: KernelFamily,
    degree: u32,
}

impl KernelSpec {
    pub const POLYNOMIAL_DEGREE: u32 = 2;

    pub fn linear() -> Self {
        Self {
            family: KernelFamily::Linear,
            degree: 1,
        }
    }

    pub fn polynomial() -> Self {
        Self {
            family: KernelFamily::Polynomial,
            degree: Self::POLYNOMIAL_DEGREE,
        }
    }

    pub fn new(family: KernelFamily, degree: Option<u32>) -> Result<Self> {
        match (family, degree) {
            (KernelFamily::Linear, None) => Ok(Self::linear()),
            (KernelFamily::Linear, Some(_)) => Err(Error::InvalidInput(
                "the linear kernel takes no degree".into(),
            )),
            (KernelFamily::Polynomial, None) => Ok(Self::polynomial()),
            (KernelFamily::Polynomial, Some(Self::POLYNOMIAL_DEGREE)) => Ok(Self::polynomial()),
            (KernelFamily::Polynomial, Some(d)) => Err(Error::InvalidInput(format!(
                "polynomial kernel degree must be {}, got {d}",
                Self::POLYNOMIAL_DEGREE
            ))),
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    /// Polynomial degree; `None` for the linear kernel.
    pub fn degree(&self) -> Option<u32> {
        match self.family {
            KernelFamily::Linear => None,
            KernelFamily::Polynomial => Some(self.degree),
        }
    }

    pub fn name(&self) -> &'static str {
        self.family.name()
    }

    /// `k(t)` for inner product `t`.
    #[inline]
    pub fn profile(&self, t: f64) -> f64 {
        match self.family {
            KernelFamily::Linear => t,
            KernelFamily::Polynomial => {
                let u = 1.0 + t;
                u * u
            }
        }
    }

    /// `k'(t)`.
    #[inline]
    pub fn profile_d1(&self, t: f64) -> f64 {
        match self.family {
            KernelFamily::Linear => 1.0,
            KernelFamily::Polynomial => 2.0 * (1.0 + t),
        }
    }

    /// `k''(t)`.
    #[inline]
    pub fn profile_d2(&self, _t: f64) -> f64 {
        match self.family {
            KernelFamily::Linear => 0.0,
            KernelFamily::Polynomial => 2.0,
        }
    }
}

/// Per-source hyperparameters. `beta` is the noise precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceHyperparams {
    beta: f64,
}

impl SourceHyperparams {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "noise precision must be finite and positive, got {beta}"
            )));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn noise_variance(&self) -> f64 {
        1.0 / self.beta
    }
}

fn check_latents(x: &DMatrix<f64>) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::InvalidInput("latent matrix has no samples".into()));
    }
    if !all_finite(x) {
        return Err(Error::InvalidInput(
            "latent matrix contains non-finite entries".into(),
        ));
    }
    Ok(())
}

/// Gram matrix of inner products `X Xᵀ`, exactly symmetric.
pub(crate) fn inner_products(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut g = x * x.transpose();
    symmetrize(&mut g);
    g
}

/// Kernel matrix `K_ij = k(x_i · x_j) + β⁻¹ δ_ij`.
pub fn kernel_matrix(
    x: &DMatrix<f64>,
    spec: &KernelSpec,
    hyp: &SourceHyperparams,
) -> Result<DMatrix<f64>> {
    check_latents(x)?;
    Ok(kernel_matrix_unchecked(x, spec, hyp))
}

pub(crate) fn kernel_matrix_unchecked(
    x: &DMatrix<f64>,
    spec: &KernelSpec,
    hyp: &SourceHyperparams,
) -> DMatrix<f64> {
    let mut k = inner_products(x).map(|t| spec.profile(t));
    let noise = hyp.noise_variance();
    for i in 0..k.nrows() {
        k[(i, i)] += noise;
    }
    k
}

/// Nonzero structure of `∂K/∂x_{rμ}`: only row `r` and column `r` are nonzero,
/// and by symmetry both hold the same values.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGradient {
    pub r: usize,
    pub mu: usize,
    /// `column[i] = ∂K_{ir}/∂x_{rμ}`, including the diagonal `i = r`.
    pub column: DVector<f64>,
}

impl KernelGradient {
    /// `∂K_ij/∂x_{rμ}` for any `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == self.r {
            self.column[j]
        } else if j == self.r {
            self.column[i]
        } else {
            0.0
        }
    }

    /// Dense `N×N` form, mostly for tests and diagnostics.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.column.len();
        DMatrix::from_fn(n, n, |i, j| self.entry(i, j))
    }
}

fn check_index(index: usize, bound: usize) -> Result<()> {
    if index >= bound {
        Err(Error::IndexOutOfRange { index, bound })
    } else {
        Ok(())
    }
}

/// First derivatives of the kernel matrix with respect to one latent coordinate.
///
/// Linear: `∂K_ir/∂x_rμ = x_iμ` (i ≠ r), `∂K_rr/∂x_rμ = 2 x_rμ`.
/// Polynomial: `2 x_iμ (1 + x_i·x_r)` (i ≠ r), `4 x_rμ (1 + x_r·x_r)`.
pub fn kernel_grad_entries(
    x: &DMatrix<f64>,
    spec: &KernelSpec,
    r: usize,
    mu: usize,
) -> Result<KernelGradient> {
    check_latents(x)?;
    check_index(r, x.nrows())?;
    check_index(mu, x.ncols())?;
    let xr = x.row(r);
    let column = DVector::from_fn(x.nrows(), |i, _| {
        let t = x.row(i).dot(&xr);
        let scale = if i == r { 2.0 } else { 1.0 };
        scale * spec.profile_d1(t) * x[(i, mu)]
    });
    Ok(KernelGradient { r, mu, column })
}

/// `∂²K_ij / ∂x_{rμ} ∂x_{pν}`.
///
/// With `t = x_i · x_j`, `∂t/∂x_{rμ} = δ_ir x_jμ + δ_jr x_iμ` and
/// `∂²t/∂x_{rμ}∂x_{pν} = δ_μν (δ_ir δ_jp + δ_jr δ_ip)`, so the result is
/// `k''(t) t_{rμ} t_{pν} + k'(t) t_{rμ,pν}`.
pub fn kernel_second_derivative(
    x: &DMatrix<f64>,
    spec: &KernelSpec,
    (i, j): (usize, usize),
    (r, mu): (usize, usize),
    (p, nu): (usize, usize),
) -> Result<f64> {
    check_latents(x)?;
    let (n, q) = x.shape();
    for idx in [i, j, r, p] {
        check_index(idx, n)?;
    }
    check_index(mu, q)?;
    check_index(nu, q)?;
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let t = x.row(i).dot(&x.row(j));
    let dt_r = delta(i, r) * x[(j, mu)] + delta(j, r) * x[(i, mu)];
    let dt_p = delta(i, p) * x[(j, nu)] + delta(j, p) * x[(i, nu)];
    let ddt = delta(mu, nu) * (delta(i, r) * delta(j, p) + delta(j, r) * delta(i, p));
    Ok(spec.profile_d2(t) * dt_r * dt_p + spec.profile_d1(t) * ddt)
}
