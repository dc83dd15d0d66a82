//! Brute-force reference computations used to check the closed forms.
//!
//! Nothing here calls into `hamiltonian` or `cruise_law`; the oracles only
//! see plain closures and parameter structs.

use std::ops::{Add, Div, Mul, Sub};

use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::types::{ActuatorParams, ControlBounds, CostParams};

/// Secant iteration cap for [`shoot_unconstrained_bvp`].
pub const MAX_SECANT_ITERATIONS: usize = 100;

/// Argmin over a uniform `n`-point grid (both endpoints included).
/// Ties go to the smaller `u`.
pub fn grid_minimize<F>(mut f: F, bounds: &ControlBounds, n: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    assert!(n >= 2, "grid needs at least two points");
    let step = bounds.width() / (n - 1) as f64;
    let mut best = (bounds.u_min, f64::INFINITY);
    for i in 0..n {
        let u = if i == n - 1 {
            bounds.u_max
        } else {
            bounds.u_min + i as f64 * step
        };
        let y = f(u);
        if !y.is_finite() {
            return Err(Error::NonFiniteObjective { u });
        }
        if y < best.1 {
            best = (u, y);
        }
    }
    Ok(best.0)
}

/// Central difference `(f(u+ε) - f(u-ε)) / 2ε`.
pub fn fd_gradient<F>(mut f: F, u: f64, eps: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    assert!(eps > 0.0, "eps must be positive");
    let hi = f(u + eps);
    if !hi.is_finite() {
        return Err(Error::NonFiniteObjective { u: u + eps });
    }
    let lo = f(u - eps);
    if !lo.is_finite() {
        return Err(Error::NonFiniteObjective { u: u - eps });
    }
    Ok((hi - lo) / (2.0 * eps))
}

/// Field a fixed-step integrator can work in: `f64` or double-double.
pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + From<f64>
{
}

impl<T> Scalar for T where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<Output = T> + Div<Output = T> + From<f64>
{
}

fn axpy<S: Scalar, const N: usize>(x: &[S; N], a: S, k: &[S; N]) -> [S; N] {
    std::array::from_fn(|i| x[i] + a * k[i])
}

/// One classical Runge-Kutta step.
pub fn rk4_step<S, F, const N: usize>(rhs: &mut F, t: S, x: &[S; N], h: S) -> [S; N]
where
    S: Scalar,
    F: FnMut(S, &[S; N]) -> [S; N],
{
    let half = S::from(0.5);
    let sixth = S::from(1.0 / 6.0);
    let two = S::from(2.0);
    let k1 = rhs(t, x);
    let k2 = rhs(t + half * h, &axpy(x, half * h, &k1));
    let k3 = rhs(t + half * h, &axpy(x, half * h, &k2));
    let k4 = rhs(t + h, &axpy(x, h, &k3));
    std::array::from_fn(|i| x[i] + h * sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
}

/// Fixed-step RK4 from `t0` to `t1` in `steps` equal steps.
pub fn rk4_integrate<S, F, const N: usize>(
    mut rhs: F,
    x0: [S; N],
    t0: S,
    t1: S,
    steps: usize,
) -> [S; N]
where
    S: Scalar,
    F: FnMut(S, &[S; N]) -> [S; N],
{
    assert!(steps >= 1, "rk4 needs at least one step");
    let h = (t1 - t0) / S::from(steps as f64);
    let mut x = x0;
    for i in 0..steps {
        let t = t0 + S::from(i as f64) * h;
        x = rk4_step(&mut rhs, t, &x, h);
    }
    x
}

/// Terminal-condition coefficient written directly with `cosh`/`sinh`.
/// Overflows for `ωT` above roughly 710.
pub fn boundary_coefficient_hyperbolic(w0: f64, h: f64, r: f64, omega: f64, horizon: f64) -> f64 {
    let hr = h / r;
    let (c, s) = ((omega * horizon).cosh(), (omega * horizon).sinh());
    -w0 * (hr * c + omega * s) / (omega * c + hr * s)
}

/// Sampled solution of the unconstrained two-point boundary value problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootingSolution {
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub v: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub u: Vec<f64>,
    /// Initial costate found by the secant iteration.
    pub lambda2_initial: f64,
    /// `λ2(T) - 2h (v(T) - v_ref)` at the solution.
    pub terminal_residual: f64,
    pub iterations: usize,
}

/// Solves `v' = -λ2 / 2r`, `λ2' = -2q (v - v_ref)`, `v(0) = v0`,
/// `λ2(T) = 2h (v(T) - v_ref)` by single shooting on `λ2(0)` with a secant
/// update.
///
/// Forward shooting amplifies errors in `λ2(0)` by about `e^{ωT}`, so the
/// integration and secant arithmetic run in double-double precision.
pub fn shoot_unconstrained_bvp(
    cost: &CostParams,
    actuator: &ActuatorParams,
    v0: f64,
    horizon: f64,
    steps: usize,
    tol: f64,
) -> Result<ShootingSolution> {
    assert!(steps >= 1, "shooting needs at least one step");
    let q = TwoFloat::from(cost.q);
    let v_ref = TwoFloat::from(cost.v_ref);
    let inv_2r = TwoFloat::from(1.0) / TwoFloat::from(2.0 * cost.r);
    let two_h = TwoFloat::from(2.0 * cost.h);
    let h = TwoFloat::from(horizon) / TwoFloat::from(steps as f64);

    let rhs = |_t: TwoFloat, x: &[TwoFloat; 3]| -> [TwoFloat; 3] {
        [
            x[1],
            -(x[2] * inv_2r),
            TwoFloat::from(-2.0) * q * (x[1] - v_ref),
        ]
    };
    let integrate = |g: TwoFloat, mut record: Option<&mut Vec<[TwoFloat; 3]>>| -> [TwoFloat; 3] {
        let mut rhs = rhs;
        let mut x = [TwoFloat::from(0.0), TwoFloat::from(v0), g];
        if let Some(out) = record.as_deref_mut() {
            out.push(x);
        }
        for i in 0..steps {
            let t = TwoFloat::from(i as f64) * h;
            x = rk4_step(&mut rhs, t, &x, h);
            if let Some(out) = record.as_deref_mut() {
                out.push(x);
            }
        }
        x
    };
    let residual = |g: TwoFloat| -> TwoFloat {
        let x = integrate(g, None);
        x[2] - two_h * (x[1] - v_ref)
    };

    let omega = (cost.q / cost.r).sqrt();
    let w0 = v0 - cost.v_ref;
    let mut g0 = TwoFloat::from(0.0);
    let mut r0 = residual(g0);
    let mut g1 = TwoFloat::from(-2.0 * cost.r * omega * w0 * 1.1);
    if g1 == g0 {
        g1 = TwoFloat::from(1e-3);
    }
    let mut r1 = residual(g1);
    let mut iterations = 0;
    let (g, r) = if f64::from(r0).abs() <= tol {
        (g0, r0)
    } else {
        loop {
            if f64::from(r1).abs() <= tol {
                break (g1, r1);
            }
            if iterations >= MAX_SECANT_ITERATIONS || r1 == r0 {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: f64::from(r1),
                });
            }
            let g2 = g1 - r1 * (g1 - g0) / (r1 - r0);
            g0 = g1;
            r0 = r1;
            g1 = g2;
            r1 = residual(g1);
            iterations += 1;
        }
    };

    let mut states = Vec::with_capacity(steps + 1);
    integrate(g, Some(&mut states));
    let hf = f64::from(h);
    let mut out = ShootingSolution {
        t: Vec::with_capacity(steps + 1),
        p: Vec::with_capacity(steps + 1),
        v: Vec::with_capacity(steps + 1),
        lambda2: Vec::with_capacity(steps + 1),
        u: Vec::with_capacity(steps + 1),
        lambda2_initial: f64::from(g),
        terminal_residual: f64::from(r),
        iterations,
    };
    for (i, x) in states.iter().enumerate() {
        let v = f64::from(x[1]);
        let lambda2 = f64::from(x[2]);
        let a = -lambda2 / (2.0 * cost.r);
        out.t.push(if i == steps { horizon } else { i as f64 * hf });
        out.p.push(f64::from(x[0]));
        out.v.push(v);
        out.lambda2.push(lambda2);
        out.u.push((v + actuator.tau * a) / actuator.gain);
    }
    Ok(out)
}
