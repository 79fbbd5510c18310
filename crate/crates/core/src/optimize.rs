//! Fitting latent coordinates and hyperparameters.
//!
//! Latents are optimized in the packed gauge-free coordinates, so pinned
//! entries stay exactly zero; column signs are fixed once a run converges.
//! Hyperparameters are searched over `log β_s` with central-difference
//! gradients, re-optimizing the latents warm-started from the previous
//! optimum at every evaluation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cell::RefCell;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gauge::{apply_gauge, free_positions, pack, unpack, GaugeSpec};
use crate::kernels::{KernelFamily, SourceHyperparams};
use crate::likelihood::{
    check_problem, hessian_full, neg_log_hyp_posterior, value_and_grad, DataSource, EvidenceConvention,
    HypObjective,
};
use crate::minimize::{minimize, Minimum, MinimizeOptions, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitStrategy {
    /// Entries drawn i.i.d. from N(0, 1).
    #[default]
    RandomGaussian,
    /// First restart from the leading principal components of the pooled
    /// sample covariance, the others random.
    Pca,
    /// Start from a caller-supplied matrix (see [`fit_latents_from`]).
    Warm,
}

/// Settings of the outer search over `log β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperSearch {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Smallest accepted move in `log β`, relative to `1 + |log β|`.
    pub step_tol: f64,
    /// Smallest accepted decrease of `L_hyp`, relative to `1 + |L_hyp|`.
    pub value_tol: f64,
    /// Evaluations per line search; each costs one latent re-fit per
    /// finite-difference point.
    pub max_line_evals: usize,
    /// Relative step of the central differences in `log β`.
    pub fd_step: f64,
    /// Gradient tolerance of the inner latent solves.
    pub inner_grad_tol: f64,
    /// Admissible range of `log β`.
    pub log_beta_bounds: (f64, f64),
}

impl Default for HyperSearch {
    fn default() -> Self {
        Self {
            max_iters: 50,
            grad_tol: 1e-5,
            step_tol: 1e-7,
            value_tol: 1e-9,
            max_line_evals: 6,
            fd_step: 1e-4,
            inner_grad_tol: 1e-9,
            log_beta_bounds: (-15.0, 20.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    /// `None` picks 10 restarts when any source uses the polynomial kernel
    /// and 3 otherwise.
    pub restarts: Option<usize>,
    pub init: InitStrategy,
    pub seed: u64,
    pub rescale: bool,
    pub convention: EvidenceConvention,
    /// Finish each latent search with Newton steps on the analytic Hessian
    /// once the gradient sup-norm is small (see [`NEWTON_POLISH_FROM`]).
    pub newton_polish: bool,
    pub hyper: HyperSearch,
}

/// Gradient sup-norms at which the quasi-Newton phase tries handing over
/// to Newton.
pub const NEWTON_POLISH_FROM: [f64; 3] = [1e-2, 1e-3, 1e-4];
const NEWTON_MAX_STEPS: usize = 15;
// Needing more halvings means the quadratic model is poor here.
const NEWTON_MAX_HALVINGS: usize = 8;

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            grad_tol: 1e-6,
            step_tol: 1e-10,
            restarts: None,
            init: InitStrategy::RandomGaussian,
            seed: 0,
            rescale: false,
            convention: EvidenceConvention::default(),
            newton_polish: true,
            hyper: HyperSearch::default(),
        }
    }
}

impl OptimConfig {
    pub fn restarts_for(&self, sources: &[DataSource]) -> usize {
        self.restarts.unwrap_or_else(|| {
            if sources
                .iter()
                .any(|s| s.spec().family() == KernelFamily::Polynomial)
            {
                10
            } else {
                3
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.restarts == Some(0) {
            return Err(Error::InvalidInput(
                "max_iters and restarts must be at least 1".into(),
            ));
        }
        if !(self.grad_tol > 0.0 && self.step_tol > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        Ok(())
    }

    fn latent_options(&self, grad_tol: f64) -> MinimizeOptions {
        MinimizeOptions {
            max_iters: self.max_iters,
            grad_tol,
            step_tol: self.step_tol,
            ..MinimizeOptions::default()
        }
    }
}

/// Outcome of a latent or joint fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Gauge-fixed optimum.
    pub x_star: DMatrix<f64>,
    pub hyp_star: Vec<SourceHyperparams>,
    /// `L_X` at `x_star`.
    pub objective: f64,
    /// Final `L_X` of every restart of the latent search (`+∞` for failed
    /// restarts).
    pub restart_values: Vec<f64>,
    pub degenerate_rows: Vec<usize>,
    pub iterations: usize,
    pub termination: Termination,
    /// Hyperparameter objective at the optimum, when it was evaluated.
    pub hyp_objective: Option<HypObjective>,
}

/// Checks `q < min_s d_s`.
pub fn check_latent_dimension(sources: &[DataSource], q: usize) -> Result<()> {
    let min_d = sources
        .iter()
        .map(DataSource::d)
        .min()
        .ok_or_else(|| Error::InvalidInput("no data sources".into()))?;
    if q >= min_d {
        return Err(Error::Precondition(format!(
            "latent dimension {q} must be smaller than the smallest source dimension {min_d}"
        )));
    }
    Ok(())
}

fn random_latents(n: usize, q: usize, seed: u64, stream: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    DMatrix::from_fn(n, q, |_, _| StandardNormal.sample(&mut rng))
}

/// Leading `q` principal directions of the pooled sample covariance, scaled by
/// the square roots of their eigenvalues.
pub fn pca_latents(sources: &[DataSource], q: usize) -> Result<DMatrix<f64>> {
    let n = sources
        .first()
        .ok_or_else(|| Error::InvalidInput("no data sources".into()))?
        .n();
    let mut pooled = DMatrix::zeros(n, n);
    for s in sources {
        pooled += s.s();
    }
    pooled /= sources.len() as f64;
    let eig = pooled.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let mut x = DMatrix::zeros(n, q);
    for (k, &idx) in order.iter().take(q).enumerate() {
        let scale = libm::sqrt(eig.eigenvalues[idx].max(1e-6));
        x.set_column(k, &(eig.eigenvectors.column(idx) * scale));
    }
    Ok(x)
}

fn packed_value_grad(
    sources: &[DataSource],
    gauge: &GaugeSpec,
    rescale: bool,
    v: &[f64],
    g: &mut [f64],
) -> Result<f64> {
    let x = unpack(v, gauge)?;
    let (val, grad) = value_and_grad(&x, sources, rescale)?;
    for ((i, j), gi) in gauge.free_indices().zip(g.iter_mut()) {
        *gi = grad[(i, j)];
    }
    Ok(val.value)
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Polished {
    x: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
    steps: usize,
}

/// Damped Newton steps on the packed coordinates. Stops at `grad_tol`, at a
/// Hessian that is not positive definite, or when backtracking cannot make
/// progress. The objective never increases.
fn newton_polish(
    sources: &[DataSource],
    gauge: &GaugeSpec,
    rescale: bool,
    start: Polished,
    grad_tol: f64,
) -> Polished {
    let mut cur = start;
    let free = free_positions(gauge);
    let mut trial_grad = alloc::vec![0.0; cur.x.len()];
    while cur.steps < NEWTON_MAX_STEPS && sup_norm(&cur.grad) > grad_tol {
        let hessian = match unpack(&cur.x, gauge).and_then(|x| hessian_full(&x, sources, rescale)) {
            Ok(h) => h.select_rows(free.iter()).select_columns(free.iter()),
            Err(_) => break,
        };
        let chol = match hessian.cholesky() {
            Some(c) => c,
            None => break,
        };
        let g = DVector::from_column_slice(&cur.grad);
        let p = -chol.solve(&g);
        let slope = g.dot(&p);
        if !(slope < 0.0) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=NEWTON_MAX_HALVINGS {
            let trial: Vec<f64> = cur.x.iter().zip(p.iter()).map(|(a, b)| a + t * b).collect();
            if let Ok(f) = packed_value_grad(sources, gauge, rescale, &trial, &mut trial_grad) {
                let sufficient = f <= cur.value + 1e-4 * t * slope;
                let flat = f <= cur.value && sup_norm(&trial_grad) < sup_norm(&cur.grad);
                if f.is_finite() && (sufficient || flat) {
                    accepted = Some((trial, f));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((x, f)) => {
                cur.x = x;
                cur.value = f;
                cur.grad.copy_from_slice(&trial_grad);
                cur.steps += 1;
            }
            None => break,
        }
    }
    cur
}

/// A single local search from `x0` with the hyperparameters held fixed.
///
/// Quasi-Newton descent first; with `newton_polish` on, Newton steps take
/// over once the gradient is small and the Hessian positive definite.
pub fn fit_latents_from(
    sources: &[DataSource],
    x0: &DMatrix<f64>,
    cfg: &OptimConfig,
    grad_tol: f64,
) -> Result<FitResult> {
    check_problem(x0, sources)?;
    let (n, q) = x0.shape();
    let gauge = GaugeSpec::new(n, q);
    let start = pack(&apply_gauge(x0).x, &gauge)?;
    let rescale = cfg.rescale;
    let last_error: RefCell<Option<Error>> = RefCell::new(None);
    let mut objective = |v: &[f64], g: &mut [f64]| -> f64 {
        match packed_value_grad(sources, &gauge, rescale, v, g) {
            Ok(f) => f,
            Err(e) => {
                *last_error.borrow_mut() = Some(e);
                f64::NAN
            }
        }
    };
    // Quasi-Newton to each handover threshold in turn, then Newton; a
    // failed Newton attempt resumes quasi-Newton towards the next one.
    let mut stages: Vec<f64> = Vec::new();
    if cfg.newton_polish {
        stages.extend(NEWTON_POLISH_FROM.iter().copied().filter(|&t| t > grad_tol));
    }
    stages.push(grad_tol);
    let mut x = start.as_slice().to_vec();
    let mut iterations = 0;
    let mut outcome = None;
    for (k, &tol) in stages.iter().enumerate() {
        let opts = MinimizeOptions {
            max_iters: cfg.max_iters.saturating_sub(iterations).max(1),
            ..cfg.latent_options(tol)
        };
        let run = minimize(&mut objective, &x, &opts)
            .map_err(|e| last_error.borrow_mut().take().unwrap_or(e))?;
        iterations += run.iterations;
        let last = k + 1 == stages.len();
        if last || run.termination == Termination::MaxIterations || iterations >= cfg.max_iters {
            outcome = Some(run);
            break;
        }
        let polished = newton_polish(
            sources,
            &gauge,
            rescale,
            Polished {
                x: run.x.clone(),
                value: run.value,
                grad: run.grad.clone(),
                steps: 0,
            },
            grad_tol,
        );
        iterations += polished.steps;
        if sup_norm(&polished.grad) <= grad_tol {
            outcome = Some(Minimum {
                x: polished.x,
                value: polished.value,
                grad: polished.grad,
                termination: Termination::GradientTolerance,
                ..run
            });
            break;
        }
        x = polished.x;
    }
    let run = outcome.expect("the final stage always yields an outcome");
    let fixed = apply_gauge(&unpack(&run.x, &gauge)?);
    Ok(FitResult {
        x_star: fixed.x,
        hyp_star: sources.iter().map(DataSource::hyp).collect(),
        objective: run.value,
        restart_values: alloc::vec![run.value],
        degenerate_rows: fixed.degenerate_rows,
        iterations,
        termination: run.termination,
        hyp_objective: None,
    })
}

/// Multi-restart search for `X* = argmin L_X` at fixed hyperparameters.
///
/// Restart `k` draws its start from stream `k` of the configured seed, so
/// results do not depend on the order in which restarts are run.
pub fn fit_latents(sources: &[DataSource], q: usize, cfg: &OptimConfig) -> Result<FitResult> {
    cfg.validate()?;
    check_latent_dimension(sources, q)?;
    if cfg.init == InitStrategy::Warm {
        return Err(Error::Precondition(
            "warm initialization needs a starting matrix; use fit_latents_from".into(),
        ));
    }
    let n = sources[0].n();
    let restarts = cfg.restarts_for(sources);
    let outcomes: Vec<Result<FitResult>> = (0..restarts)
        .map(|k| fit_latents_restart(sources, q, cfg, k))
        .collect();
    combine_restarts(outcomes, n, q)
}

/// Runs restart `k` of [`fit_latents`] on its own.
pub fn fit_latents_restart(
    sources: &[DataSource],
    q: usize,
    cfg: &OptimConfig,
    k: usize,
) -> Result<FitResult> {
    let n = sources
        .first()
        .ok_or_else(|| Error::InvalidInput("no data sources".into()))?
        .n();
    let x0 = if k == 0 && cfg.init == InitStrategy::Pca {
        pca_latents(sources, q)?
    } else {
        random_latents(n, q, cfg.seed, k as u64)
    };
    fit_latents_from(sources, &x0, cfg, cfg.grad_tol)
}

/// Picks the best of independent restarts; ties go to the lowest index.
pub fn combine_restarts(outcomes: Vec<Result<FitResult>>, n: usize, q: usize) -> Result<FitResult> {
    let restart_values: Vec<f64> = outcomes
        .iter()
        .map(|o| match o {
            Ok(fit) if fit.objective.is_finite() => fit.objective,
            _ => f64::INFINITY,
        })
        .collect();
    let mut best: Option<FitResult> = None;
    let mut first_error: Option<Error> = None;
    for outcome in outcomes {
        match outcome {
            Ok(fit) if fit.objective.is_finite() => {
                if best.as_ref().is_none_or(|b| fit.objective < b.objective) {
                    best = Some(fit);
                }
            }
            Ok(_) => {}
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    match best {
        Some(mut fit) => {
            fit.restart_values = restart_values;
            Ok(fit)
        }
        None => Err(Error::Optimization(format!(
            "all {} restarts failed for a {n}x{q} latent space: {}",
            restart_values.len(),
            first_error.map_or_else(|| String::from("non-finite objective"), |e| format!("{e}"))
        ))),
    }
}

fn with_log_betas(sources: &[DataSource], theta: &[f64]) -> Result<Vec<DataSource>> {
    sources
        .iter()
        .zip(theta)
        .map(|(s, &t)| Ok(s.with_hyperparams(SourceHyperparams::new(libm::exp(t))?)))
        .collect()
}

/// Evaluates `L_hyp` at the given hyperparameters, re-optimizing the latents
/// from `warm`.
pub fn evaluate_hyp_objective(
    sources: &[DataSource],
    warm: &DMatrix<f64>,
    cfg: &OptimConfig,
) -> Result<FitResult> {
    let mut fit = fit_latents_from(sources, warm, cfg, cfg.hyper.inner_grad_tol)?;
    let gauge = GaugeSpec::new(warm.nrows(), warm.ncols());
    fit.hyp_objective = Some(neg_log_hyp_posterior(
        sources,
        &fit.x_star,
        &gauge,
        cfg.rescale,
        cfg.convention,
    )?);
    Ok(fit)
}

/// Joint fit: minimizes `L_hyp` over `log β_s` for all sources together.
///
/// The latents are first located by a multi-restart search at the initial
/// hyperparameters; every later evaluation re-optimizes them warm-started
/// from the latest accepted optimum. The returned fit is the best
/// hyperparameter point evaluated, so its `L_hyp` never exceeds the value at
/// the initial hyperparameters.
pub fn fit_hyperparams(sources: &[DataSource], q: usize, cfg: &OptimConfig) -> Result<FitResult> {
    let initial = fit_latents(sources, q, cfg)?;
    refine_hyperparams(sources, initial, cfg)
}

/// Hyperparameter search starting from an existing latent fit.
pub fn refine_hyperparams(
    sources: &[DataSource],
    initial: FitResult,
    cfg: &OptimConfig,
) -> Result<FitResult> {
    let restart_values = initial.restart_values.clone();
    let theta0: Vec<f64> = sources.iter().map(|s| libm::log(s.hyp().beta())).collect();
    let (lo, hi) = cfg.hyper.log_beta_bounds;
    let start = evaluate_hyp_objective(sources, &initial.x_star, cfg)?;
    let mut anchor = start.x_star.clone();
    let mut best = start;
    let evaluate = |theta: &[f64], warm: &DMatrix<f64>| -> Option<FitResult> {
        if theta.iter().any(|t| !(*t >= lo && *t <= hi)) {
            return None;
        }
        let srcs = with_log_betas(sources, theta).ok()?;
        evaluate_hyp_objective(&srcs, warm, cfg)
            .ok()
            .filter(|f| f.hyp_objective.is_some_and(|h| h.value.is_finite()))
    };
    let value_of = |f: &FitResult| f.hyp_objective.map_or(f64::INFINITY, |h| h.value);
    let outer = MinimizeOptions {
        max_iters: cfg.hyper.max_iters,
        grad_tol: cfg.hyper.grad_tol,
        step_tol: cfg.hyper.step_tol,
        value_tol: cfg.hyper.value_tol,
        max_line_evals: cfg.hyper.max_line_evals,
        ..MinimizeOptions::default()
    };
    minimize(
        |theta, grad| {
            let centre = match evaluate(theta, &anchor) {
                Some(f) => f,
                None => return f64::NAN,
            };
            let value = value_of(&centre);
            anchor = centre.x_star.clone();
            for k in 0..theta.len() {
                let h = cfg.hyper.fd_step * theta[k].abs().max(1.0);
                let mut plus = theta.to_vec();
                plus[k] += h;
                let mut minus = theta.to_vec();
                minus[k] -= h;
                let fp = evaluate(&plus, &anchor).map(|f| value_of(&f));
                let fm = evaluate(&minus, &anchor).map(|f| value_of(&f));
                grad[k] = match (fp, fm) {
                    (Some(a), Some(b)) => (a - b) / (2.0 * h),
                    (Some(a), None) => (a - value) / h,
                    (None, Some(b)) => (value - b) / h,
                    (None, None) => f64::NAN,
                };
            }
            if value < value_of(&best) {
                best = centre;
            }
            value
        },
        &theta0,
        &outer,
    )?;
    best.restart_values = restart_values;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::likelihood::neg_log_posterior_x;
    use rand::Rng;

    fn noisy_linear_source(n: usize, d: usize, q: usize, noise: f64, seed: u64) -> DataSource {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::<f64>::from_fn(n, q, |_, _| StandardNormal.sample(&mut rng));
        let w = DMatrix::<f64>::from_fn(d, q, |_, _| StandardNormal.sample(&mut rng));
        let e = DMatrix::from_fn(n, d, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            noise * z
        });
        let raw = x * w.transpose() + e;
        DataSource::from_raw(&raw, KernelSpec::linear(), SourceHyperparams::new(1.0).unwrap())
            .unwrap()
            .0
    }

    #[test]
    fn pure_noise_fit_descends_from_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let raw = DMatrix::from_fn(12, 6, |_, _| rng.random_range(-1.0..1.0));
        let src = DataSource::from_raw(&raw, KernelSpec::linear(), SourceHyperparams::new(2.0).unwrap())
            .unwrap()
            .0;
        let fit = fit_latents(&[src.clone()], 2, &OptimConfig::default()).unwrap();
        let at_zero = neg_log_posterior_x(&DMatrix::zeros(12, 2), &[src], false).unwrap().value;
        assert!(fit.objective <= at_zero);
        assert_eq!(fit.restart_values.len(), 3);
        assert_eq!(
            fit.objective,
            fit.restart_values.iter().cloned().fold(f64::INFINITY, f64::min)
        );
    }

    #[test]
    fn identical_seeds_identical_results() {
        let src = noisy_linear_source(15, 8, 2, 0.3, 1);
        let cfg = OptimConfig {
            seed: 42,
            ..OptimConfig::default()
        };
        let a = fit_latents(&[src.clone()], 2, &cfg).unwrap();
        let b = fit_latents(&[src], 2, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn restarts_are_independent_of_order() {
        let src = noisy_linear_source(10, 6, 2, 0.5, 2);
        let cfg = OptimConfig {
            seed: 9,
            restarts: Some(4),
            ..OptimConfig::default()
        };
        let srcs = [src];
        let forward = fit_latents(&srcs, 2, &cfg).unwrap();
        let mut outcomes: Vec<_> = (0..4).rev().map(|k| fit_latents_restart(&srcs, 2, &cfg, k)).collect();
        outcomes.reverse();
        assert_eq!(combine_restarts(outcomes, 10, 2).unwrap(), forward);
    }

    #[test]
    fn result_is_gauge_fixed_and_stationary() {
        let src = noisy_linear_source(20, 10, 3, 0.2, 3);
        let fit = fit_latents(&[src.clone()], 3, &OptimConfig::default()).unwrap();
        assert!(crate::gauge::is_gauge_fixed(&fit.x_star));
        let g = crate::likelihood::grad_l_x(&fit.x_star, &[src], false).unwrap();
        assert!(g.amax() < 1e-5);
    }

    #[test]
    fn latent_dimension_must_be_below_source_dimension() {
        let src = noisy_linear_source(10, 3, 1, 0.5, 2);
        assert!(matches!(
            fit_latents(&[src], 3, &OptimConfig::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn pca_start_is_used_for_first_restart() {
        let src = noisy_linear_source(16, 8, 2, 0.2, 5);
        let cfg = OptimConfig {
            init: InitStrategy::Pca,
            restarts: Some(1),
            ..OptimConfig::default()
        };
        let fit = fit_latents(&[src.clone()], 2, &cfg).unwrap();
        let random = fit_latents(&[src], 2, &OptimConfig { restarts: Some(1), ..OptimConfig::default() }).unwrap();
        assert!((fit.objective - random.objective).abs() < 1e-8);
    }

    #[test]
    fn hyperparameter_search_descends() {
        let src = noisy_linear_source(24, 12, 2, 0.3, 6);
        let cfg = OptimConfig::default();
        let initial = fit_latents(&[src.clone()], 2, &cfg).unwrap();
        let at_start = evaluate_hyp_objective(&[src.clone()], &initial.x_star, &cfg).unwrap();
        let fit = fit_hyperparams(&[src], 2, &cfg).unwrap();
        let start_value = at_start.hyp_objective.unwrap().value;
        let end_value = fit.hyp_objective.unwrap().value;
        assert!(end_value <= start_value + 1e-9);
        assert!(fit.hyp_star[0].beta() != 1.0);
    }

    #[test]
    fn warm_start_needs_fewer_iterations() {
        let src = noisy_linear_source(30, 12, 2, 0.3, 7);
        let cfg = OptimConfig::default();
        let first = fit_latents(&[src.clone()], 2, &cfg).unwrap();
        let moved = src.with_hyperparams(SourceHyperparams::new(1.1).unwrap());
        let warm = fit_latents_from(&[moved.clone()], &first.x_star, &cfg, cfg.grad_tol).unwrap();
        let cold = fit_latents_from(&[moved], &random_latents(30, 2, 0, 0), &cfg, cfg.grad_tol).unwrap();
        assert!(warm.iterations < cold.iterations, "{} vs {}", warm.iterations, cold.iterations);
        assert!((warm.objective - cold.objective).abs() < 1e-8);
    }
}
