//! Limited-memory BFGS with a strong Wolfe line search.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    /// Stop when the sup-norm of the gradient falls to this value.
    pub grad_tol: f64,
    /// Stop when an accepted step moves no coordinate by more than
    /// `step_tol · (1 + |x|_∞)`.
    pub step_tol: f64,
    pub memory: usize,
    /// Stop when an iteration lowers the objective by no more than
    /// `value_tol · (1 + |f|)`. Zero disables the test.
    pub value_tol: f64,
    /// Objective evaluations allowed per line search phase.
    pub max_line_evals: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            grad_tol: 1e-6,
            step_tol: 1e-10,
            memory: 10,
            value_tol: 0.0,
            max_line_evals: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    StepTolerance,
    ValueTolerance,
    MaxIterations,
    /// No step satisfying the sufficient-decrease condition could be found,
    /// typically because the objective is flat to machine precision.
    LineSearchStalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

impl Minimum {
    pub fn grad_sup_norm(&self) -> f64 {
        sup_norm(&self.grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

struct Point {
    alpha: f64,
    value: f64,
    slope: f64,
    x: Vec<f64>,
    grad: Vec<f64>,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

/// Minimizes `f` starting from `x0`.
///
/// `f(x, grad)` returns the objective and writes the gradient into `grad`.
/// A non-finite return value marks `x` as infeasible; the line search then
/// shrinks the step. The returned value never exceeds `f(x0)`.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &MinimizeOptions) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; n];
    let mut value = f(&x, &mut grad);
    let mut evaluations = 1;
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Optimization(
            "objective is not finite at the starting point".into(),
        ));
    }
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;
    let termination = loop {
        if sup_norm(&grad) <= opts.grad_tol {
            break Termination::GradientTolerance;
        }
        if iterations >= opts.max_iters {
            break Termination::MaxIterations;
        }
        let mut dir = two_loop(&grad, &history);
        let mut slope = dot(&dir, &grad);
        if !(slope < 0.0) {
            history.clear();
            dir = grad.iter().map(|g| -g).collect();
            slope = dot(&dir, &grad);
        }
        let initial = if history.is_empty() {
            (1.0 / libm::sqrt(dot(&grad, &grad))).min(1.0)
        } else {
            1.0
        };
        let current = Point {
            alpha: 0.0,
            value,
            slope,
            x: x.clone(),
            grad: grad.clone(),
        };
        let accepted = match line_search(&mut f, &current, &dir, initial, opts.max_line_evals, &mut evaluations) {
            Some(p) => p,
            None if !history.is_empty() => {
                history.clear();
                continue;
            }
            None => break Termination::LineSearchStalled,
        };
        iterations += 1;
        let s: Vec<f64> = accepted.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = accepted.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * libm::sqrt(dot(&s, &s) * dot(&y, &y)) {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s.clone(), y, 1.0 / sy));
        }
        let moved = sup_norm(&s);
        let decrease = value - accepted.value;
        x = accepted.x;
        grad = accepted.grad;
        value = accepted.value;
        if moved <= opts.step_tol * (1.0 + sup_norm(&x)) {
            break Termination::StepTolerance;
        }
        if decrease <= opts.value_tol * (1.0 + value.abs()) {
            break Termination::ValueTolerance;
        }
    };
    Ok(Minimum {
        x,
        value,
        grad,
        iterations,
        evaluations,
        termination,
    })
}

fn two_loop(grad: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

fn probe<F>(f: &mut F, base: &Point, dir: &[f64], alpha: f64, evaluations: &mut usize) -> Point
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let x: Vec<f64> = base.x.iter().zip(dir).map(|(xi, di)| xi + alpha * di).collect();
    let mut grad = vec![0.0; x.len()];
    let mut value = f(&x, &mut grad);
    *evaluations += 1;
    if grad.iter().any(|g| !g.is_finite()) {
        value = f64::NAN;
    }
    let slope = dot(&grad, dir);
    Point {
        alpha,
        value,
        slope,
        x,
        grad,
    }
}

fn sufficient(base: &Point, p: &Point) -> bool {
    p.value.is_finite() && p.value <= base.value + C1 * p.alpha * base.slope
}

fn curvature(base: &Point, p: &Point) -> bool {
    p.slope.abs() <= -C2 * base.slope
}

/// Strong Wolfe search: bracketing followed by safeguarded interpolation.
/// Falls back to the best point with sufficient decrease when the
/// curvature condition cannot be met.
fn line_search<F>(
    f: &mut F,
    base: &Point,
    dir: &[f64],
    initial: f64,
    max_evals: usize,
    evaluations: &mut usize,
) -> Option<Point>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let mut prev_alpha = 0.0;
    let mut prev_value = base.value;
    let mut prev_slope = base.slope;
    let mut prev: Option<Point> = None;
    let mut alpha = initial;
    for i in 0..max_evals {
        let p = probe(f, base, dir, alpha, evaluations);
        if !sufficient(base, &p) || (i > 0 && p.value >= prev_value) {
            return zoom(
                f,
                base,
                dir,
                (prev_alpha, prev_value, prev_slope, prev),
                (alpha, p.value),
                max_evals,
                evaluations,
            );
        }
        if curvature(base, &p) {
            return Some(p);
        }
        if p.slope >= 0.0 {
            let hi = (prev_alpha, prev_value);
            return zoom(
                f,
                base,
                dir,
                (p.alpha, p.value, p.slope, Some(p)),
                hi,
                max_evals,
                evaluations,
            );
        }
        prev_alpha = alpha;
        prev_value = p.value;
        prev_slope = p.slope;
        prev = Some(p);
        alpha *= 2.0;
        if alpha > 1e10 {
            break;
        }
    }
    prev
}

fn zoom<F>(
    f: &mut F,
    base: &Point,
    dir: &[f64],
    lo: (f64, f64, f64, Option<Point>),
    hi: (f64, f64),
    max_evals: usize,
    evaluations: &mut usize,
) -> Option<Point>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let (mut lo_alpha, mut lo_value, mut lo_slope, mut lo_point) = lo;
    let (mut hi_alpha, mut hi_value) = hi;
    for _ in 0..max_evals {
        let width = hi_alpha - lo_alpha;
        if width.abs() <= 1e-16 * lo_alpha.abs().max(1e-300) {
            break;
        }
        // quadratic through (lo, value, slope) and (hi, value), safeguarded
        let mut alpha = lo_alpha + 0.5 * width;
        if hi_value.is_finite() {
            let denom = 2.0 * (hi_value - lo_value - lo_slope * width);
            if denom > 0.0 {
                let t = -lo_slope * width * width / denom;
                let candidate = lo_alpha + t;
                let (a, b) = if width > 0.0 {
                    (lo_alpha + 0.1 * width, hi_alpha - 0.1 * width)
                } else {
                    (hi_alpha - 0.1 * width, lo_alpha + 0.1 * width)
                };
                if candidate.is_finite() && candidate > a.min(b) && candidate < a.max(b) {
                    alpha = candidate;
                }
            }
        }
        let p = probe(f, base, dir, alpha, evaluations);
        if !sufficient(base, &p) || p.value >= lo_value {
            hi_alpha = alpha;
            hi_value = p.value;
        } else {
            if curvature(base, &p) {
                return Some(p);
            }
            if p.slope * (hi_alpha - lo_alpha) >= 0.0 {
                hi_alpha = lo_alpha;
                hi_value = lo_value;
            }
            lo_alpha = alpha;
            lo_value = p.value;
            lo_slope = p.slope;
            lo_point = Some(p);
        }
    }
    lo_point.filter(|p| p.alpha > 0.0 && p.value < base.value)
}
