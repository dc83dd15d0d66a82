//! Pointwise constrained Hamiltonian evaluation and minimization over an
//! interval control set.
//!
//! For the lag dynamics `a = (k u - v) / tau` both Hamiltonians are
//!
//! ```text
//! H(u) = q (v - v_ref)^2 + r a^2 + λ1 v + λ2 a + μ c''(u) [+ β ||x - x̂||^2]
//! c''  = -ξ (p_f'' - a)
//! ```
//!
//! i.e. strongly convex quadratics in `u`. The penalty (model problem only)
//! is an additive constant, so it never moves the gradient or the minimizer.

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use crate::error::{Error, Result};
use crate::types::{ControlBounds, PointwiseContext};

/// Smallest curvature accepted for a [`QuadraticControlObjective`].
pub const MIN_CURVATURE: f64 = 1e-8;

/// Agreement tolerance used by [`uniqueness_witness`].
pub const UNIQUENESS_TOL: f64 = 1e-8;

/// Which pointwise problem a context belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    Plant,
    Model,
}

/// `quad * u^2 + lin * u + offset` with `quad >= MIN_CURVATURE`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticControlObjective {
    quad: f64,
    lin: f64,
    offset: f64,
}

impl QuadraticControlObjective {
    pub fn new(quad: f64, lin: f64, offset: f64) -> Result<Self> {
        if !(quad.is_finite() && lin.is_finite() && offset.is_finite()) {
            return Err(Error::invalid("quad", "coefficients must be finite"));
        }
        if quad < MIN_CURVATURE {
            return Err(Error::invalid(
                "quad",
                format!("curvature {quad} below {MIN_CURVATURE}; objective is not strongly convex"),
            ));
        }
        Ok(Self { quad, lin, offset })
    }

    pub fn quad(&self) -> f64 {
        self.quad
    }

    pub fn lin(&self) -> f64 {
        self.lin
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        (self.quad * u + self.lin) * u + self.offset
    }

    #[inline]
    pub fn gradient(&self, u: f64) -> f64 {
        2.0 * self.quad * u + self.lin
    }

    /// Stationary point over the whole real line.
    pub fn stationary_point(&self) -> f64 {
        -self.lin / (2.0 * self.quad)
    }
}

fn acceleration(ctx: &PointwiseContext, u: f64) -> f64 {
    ctx.actuator.acceleration(ctx.state.v, u)
}

/// Second time derivative of the gap constraint, `-ξ (p_f'' - a)`.
fn constraint_second_derivative(ctx: &PointwiseContext, a: f64) -> f64 {
    -ctx.safety.xi * (ctx.front_accel - a)
}

fn hamiltonian_core(ctx: &PointwiseContext, u: f64) -> f64 {
    let a = acceleration(ctx, u);
    let w = ctx.state.v - ctx.cost.v_ref;
    ctx.cost.q * w * w
        + ctx.cost.r * a * a
        + ctx.costate_lambda1 * ctx.state.v
        + ctx.costate_lambda2 * a
        + ctx.multiplier_mu * constraint_second_derivative(ctx, a)
}

/// Hamiltonian of the plant problem. `ctx.penalty_value` is ignored.
pub fn plant_hamiltonian(ctx: &PointwiseContext, u: f64) -> f64 {
    hamiltonian_core(ctx, u)
}

/// Hamiltonian of the penalized model problem: the plant form plus `ctx.penalty_value`.
pub fn model_hamiltonian(ctx: &PointwiseContext, u: f64) -> f64 {
    hamiltonian_core(ctx, u) + ctx.penalty_value
}

pub fn hamiltonian(ctx: &PointwiseContext, problem: Problem, u: f64) -> f64 {
    match problem {
        Problem::Plant => plant_hamiltonian(ctx, u),
        Problem::Model => model_hamiltonian(ctx, u),
    }
}

/// Analytic `dH/du`; identical for both problems.
pub fn hamiltonian_gradient(ctx: &PointwiseContext, u: f64) -> f64 {
    let gain_rate = ctx.actuator.gain / ctx.actuator.tau;
    let a = acceleration(ctx, u);
    gain_rate * (2.0 * ctx.cost.r * a + ctx.costate_lambda2 + ctx.multiplier_mu * ctx.safety.xi)
}

/// Expands the Hamiltonian into `quad u^2 + lin u + offset`.
pub fn reduce_to_quadratic(
    ctx: &PointwiseContext,
    problem: Problem,
) -> Result<QuadraticControlObjective> {
    let PointwiseContext {
        state,
        costate_lambda1: l1,
        costate_lambda2: l2,
        multiplier_mu: mu,
        actuator,
        cost,
        safety,
        front_accel,
        ..
    } = *ctx;
    // a = g u + a0
    let g = actuator.gain / actuator.tau;
    let a0 = -state.v / actuator.tau;
    let w = state.v - cost.v_ref;

    let quad = cost.r * g * g;
    let lin = g * (2.0 * cost.r * a0 + l2 + mu * safety.xi);
    let mut offset = cost.q * w * w + cost.r * a0 * a0 + l1 * state.v + l2 * a0
        - mu * safety.xi * (front_accel - a0);
    if problem == Problem::Model {
        offset += ctx.penalty_value;
    }
    QuadraticControlObjective::new(quad, lin, offset)
}

/// Unique minimizer of a strongly convex quadratic over the interval.
pub fn minimize_pointwise(obj: &QuadraticControlObjective, bounds: &ControlBounds) -> f64 {
    bounds.project(obj.stationary_point())
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const GOLDEN_MAX_ITER: usize = 500;
const POLISH_SPACING: f64 = 1e-3;

/// Golden-section search on `[lo, hi]` until the bracket is narrower than `tol`.
///
/// The bracket midpoint competes with both endpoints at the end, so minima on
/// the boundary are returned exactly. Interior results get one guarded
/// parabolic refinement step.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut eval = |u: f64| -> Result<f64> {
        let y = f(u);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFiniteObjective { u })
        }
    };
    if lo == hi {
        eval(lo)?;
        return Ok(lo);
    }
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    for _ in 0..GOLDEN_MAX_ITER {
        if b - a <= tol {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = eval(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = eval(x2)?;
        }
    }
    let mid = 0.5 * (a + b);
    let mut best = (mid, eval(mid)?);
    for edge in [lo, hi] {
        let fe = eval(edge)?;
        if fe < best.1 {
            best = (edge, fe);
        }
    }
    if best.0 == lo || best.0 == hi {
        return Ok(best.0);
    }
    // Comparing nearly equal function values limits the bracket to about
    // sqrt(eps) relative; one parabola through well-separated points recovers
    // the remaining digits.
    let s = POLISH_SPACING * (hi - lo);
    let c = best.0.clamp(lo + s, hi - s);
    let (fl, fc, fr) = (eval(c - s)?, eval(c)?, eval(c + s)?);
    let curvature = fl - 2.0 * fc + fr;
    if curvature > 0.0 {
        let vertex = c - 0.5 * s * (fr - fl) / curvature;
        if (c - s..=c + s).contains(&vertex) && eval(vertex)? <= fl.max(fr) {
            return Ok(vertex);
        }
    }
    Ok(best.0)
}

/// Derivative-free minimizer for a convex objective on the control interval.
pub fn minimize_pointwise_convex<F>(f: F, bounds: &ControlBounds, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    golden_section(f, bounds.u_min, bounds.u_max, tol)
}

/// First-order optimality `<∇f(u), v - u> >= 0 ∀ v ∈ [u_min, u_max]`,
/// i.e. `-∇f(u)` lies in the normal cone of the interval at `u`.
pub fn variational_inequality_holds(
    grad_at_u: f64,
    u: f64,
    bounds: &ControlBounds,
    tol: f64,
) -> Result<bool> {
    if u < bounds.u_min - tol || u > bounds.u_max + tol || !u.is_finite() {
        return Err(Error::OutOfBounds {
            u,
            u_min: bounds.u_min,
            u_max: bounds.u_max,
            tol,
        });
    }
    if bounds.width() <= tol {
        return Ok(true);
    }
    let at_min = u <= bounds.u_min + tol;
    let at_max = u >= bounds.u_max - tol;
    Ok(if at_min {
        grad_at_u >= -tol
    } else if at_max {
        grad_at_u <= tol
    } else {
        grad_at_u.abs() <= tol
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceTolerance {
    pub grad_abs: f64,
    pub grad_rel: f64,
    pub minimizer: f64,
}

impl Default for EquivalenceTolerance {
    fn default() -> Self {
        Self {
            grad_abs: 1e-8,
            grad_rel: 1e-8,
            minimizer: 1e-9,
        }
    }
}

/// Outcome of comparing the plant and model pointwise problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientMatchReport {
    /// Candidate control: the model minimizer.
    pub candidate: f64,
    pub grad_plant: f64,
    pub grad_model: f64,
    pub gradients_match: bool,
    pub argmin_plant: f64,
    pub argmin_model: f64,
    pub minimizers_coincide: bool,
    pub vi_plant: bool,
    pub vi_model: bool,
}

/// Minimizes both pointwise problems and compares their `u`-gradients at the
/// model minimizer.
pub fn check_equivalence(
    plant_ctx: &PointwiseContext,
    model_ctx: &PointwiseContext,
    bounds: &ControlBounds,
    tol: &EquivalenceTolerance,
) -> Result<GradientMatchReport> {
    let plant = reduce_to_quadratic(plant_ctx, Problem::Plant)?;
    let model = reduce_to_quadratic(model_ctx, Problem::Model)?;
    let argmin_plant = minimize_pointwise(&plant, bounds);
    let argmin_model = minimize_pointwise(&model, bounds);
    let candidate = argmin_model;
    let grad_plant = plant.gradient(candidate);
    let grad_model = model.gradient(candidate);
    let scale = grad_plant.abs().max(grad_model.abs());
    let gradients_match = (grad_plant - grad_model).abs() <= tol.grad_abs + tol.grad_rel * scale;
    let vi_tol = tol.grad_abs + tol.grad_rel * scale;
    Ok(GradientMatchReport {
        candidate,
        grad_plant,
        grad_model,
        gradients_match,
        argmin_plant,
        argmin_model,
        minimizers_coincide: (argmin_plant - argmin_model).abs() <= tol.minimizer,
        vi_plant: variational_inequality_holds(grad_plant, candidate, bounds, vi_tol)?,
        vi_model: variational_inequality_holds(grad_model, candidate, bounds, vi_tol)?,
    })
}

/// Golden-section runs from random starting brackets must all land on the
/// closed-form minimizer.
pub fn uniqueness_witness(
    obj: &QuadraticControlObjective,
    bounds: &ControlBounds,
    trials: usize,
    rng_seed: u64,
) -> bool {
    assert!(trials >= 2, "uniqueness_witness needs at least two trials");
    let reference = minimize_pointwise(obj, bounds);
    let mut rng = StdRng::seed_from_u64(rng_seed);
    let f = |u: f64| obj.eval(u);
    let mut results = Vec::with_capacity(trials);
    for _ in 0..trials {
        let start = if bounds.width() > 0.0 {
            rng.random_range(bounds.u_min..=bounds.u_max)
        } else {
            bounds.u_min
        };
        let step = bounds.width() * rng.random_range(0.01..0.5);
        let (lo, hi) = bracket_from(&f, start, step, bounds);
        match golden_section(f, lo, hi, 1e-12) {
            Ok(u) => results.push(u),
            Err(_) => return false,
        }
    }
    let spread = results.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - results.iter().cloned().fold(f64::INFINITY, f64::min);
    spread <= UNIQUENESS_TOL
        && results
            .iter()
            .all(|u| (u - reference).abs() <= UNIQUENESS_TOL)
}

/// Downhill expansion from `start` with doubling steps, clipped to the bounds.
fn bracket_from<F: Fn(f64) -> f64>(
    f: &F,
    start: f64,
    step: f64,
    bounds: &ControlBounds,
) -> (f64, f64) {
    if step <= 0.0 {
        return (bounds.u_min, bounds.u_max);
    }
    let f0 = f(start);
    for dir in [1.0, -1.0] {
        let mut prev = start;
        let mut cur = bounds.project(start + dir * step);
        if f(cur) >= f0 {
            continue;
        }
        let mut s = step;
        loop {
            s *= 2.0;
            let next = bounds.project(cur + dir * s);
            if next == cur || f(next) >= f(cur) {
                let (a, b) = if dir > 0.0 {
                    (prev, next)
                } else {
                    (next, prev)
                };
                return (a, b);
            }
            prev = cur;
            cur = next;
        }
    }
    (bounds.project(start - step), bounds.project(start + step))
}
