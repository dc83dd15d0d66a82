//! Closed-form control laws for cruise control behind a slower leader.
//!
//! Unconstrained arc: with `w = v - v_ref` and `ω = sqrt(q/r)` the extremal
//! satisfies `w'' = ω² w`, so
//!
//! ```text
//! v*(t) = v_ref + w0 cosh(ωt) + B sinh(ωt)
//! u*(t) = (v*(t) + τ ω [w0 sinh(ωt) + B cosh(ωt)]) / k
//! λ2(t) = -2 r ω [w0 sinh(ωt) + B cosh(ωt)]
//! ```
//!
//! with `B` fixed by the terminal condition `λ2(T) = 2h w(T)`.
//! Boundary arc: hold `c'' = 0`, i.e. copy the leader's velocity and
//! acceleration, `u = (p_f' + τ p_f'') / k`. Both are projected onto `[u_min, u_max]`.
//!
//! Internally the hyperbolic combinations are evaluated as
//! `w0 e^{-ωt} + (B + w0) sinh(ωt)`, where `B + w0` is O(e^{-2ωT}); this
//! avoids both overflow and the cancellation between two huge terms for
//! long horizons.

use crate::error::{Error, Result};
use crate::types::{
    ActuatorParams, ControlBounds, CostParams, FrontVehicleProfile, PointwiseContext, SafetyParams,
    ScenarioConfig, Trajectory, VehicleState,
};

/// `ω = sqrt(q / r)`.
pub fn natural_frequency(cost: &CostParams) -> f64 {
    (cost.q / cost.r).sqrt()
}

/// Terminal-condition coefficient `B`, evaluated after dividing numerator and
/// denominator by `cosh(ωT)`.
pub fn boundary_coefficient(w0: f64, h: f64, r: f64, omega: f64, horizon: f64) -> f64 {
    let hr = h / r;
    let th = (omega * horizon).tanh();
    -w0 * (hr + omega * th) / (omega + hr * th)
}

/// `G` such that `B + w0 = G e^{-2ωT}`.
fn scaled_growth(w0: f64, h: f64, r: f64, omega: f64, horizon: f64) -> f64 {
    let hr = h / r;
    let x = omega * horizon;
    let th = x.tanh();
    // 1 - tanh(x) = 2 e^{-2x} / (1 + e^{-2x})
    w0 * (omega - hr) / (omega + hr * th) * 2.0 / (1.0 + (-2.0 * x).exp())
}

/// Coefficients of the unconstrained extremal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnconstrainedArcCoefficients {
    pub omega: f64,
    /// `v(0) - v_ref`.
    pub w0: f64,
    /// Boundary coefficient `B`.
    pub b: f64,
    horizon: f64,
    growth: f64,
}

impl UnconstrainedArcCoefficients {
    pub fn new(cost: &CostParams, v0: f64, horizon: f64) -> Self {
        let omega = natural_frequency(cost);
        let w0 = v0 - cost.v_ref;
        Self {
            omega,
            w0,
            b: boundary_coefficient(w0, cost.h, cost.r, omega, horizon),
            horizon,
            growth: scaled_growth(w0, cost.h, cost.r, omega, horizon),
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `(B + w0) sinh(ωt)` and `(B + w0) cosh(ωt)` without forming either factor.
    fn growth_terms(&self, t: f64) -> (f64, f64) {
        let up = (self.omega * (t - 2.0 * self.horizon)).exp();
        let down = (-self.omega * (t + 2.0 * self.horizon)).exp();
        (
            0.5 * self.growth * (up - down),
            0.5 * self.growth * (up + down),
        )
    }

    /// `w(t) = w0 cosh(ωt) + B sinh(ωt)`.
    pub fn velocity_error(&self, t: f64) -> f64 {
        let (gs, _) = self.growth_terms(t);
        self.w0 * (-self.omega * t).exp() + gs
    }

    /// `w'(t) = ω [w0 sinh(ωt) + B cosh(ωt)]`.
    pub fn acceleration(&self, t: f64) -> f64 {
        let (_, gc) = self.growth_terms(t);
        self.omega * (gc - self.w0 * (-self.omega * t).exp())
    }

    /// `∫_0^t w`.
    pub fn displacement_error(&self, t: f64) -> f64 {
        let (_, gc) = self.growth_terms(t);
        let (_, gc0) = self.growth_terms(0.0);
        (self.w0 * -(-self.omega * t).exp_m1() + gc - gc0) / self.omega
    }
}

/// `v*(t)` on the unconstrained arc.
pub fn unconstrained_velocity(t: f64, coeffs: &UnconstrainedArcCoefficients, v_ref: f64) -> f64 {
    v_ref + coeffs.velocity_error(t)
}

/// `p*(t) = p0 + v_ref t + (w0/ω) sinh(ωt) + (B/ω)(cosh(ωt) - 1)`.
pub fn unconstrained_position(
    t: f64,
    coeffs: &UnconstrainedArcCoefficients,
    v_ref: f64,
    p0: f64,
) -> f64 {
    p0 + v_ref * t + coeffs.displacement_error(t)
}

/// Unprojected control on the unconstrained arc.
pub fn unconstrained_control_raw(
    t: f64,
    coeffs: &UnconstrainedArcCoefficients,
    actuator: &ActuatorParams,
    v_ref: f64,
) -> f64 {
    (unconstrained_velocity(t, coeffs, v_ref) + actuator.tau * coeffs.acceleration(t))
        / actuator.gain
}

/// Unprojected control that keeps `c'' = 0`.
pub fn constrained_control_raw(
    t: f64,
    front: &FrontVehicleProfile,
    actuator: &ActuatorParams,
) -> f64 {
    let (_, v_f, a_f) = front.kinematics(t);
    (v_f + actuator.tau * a_f) / actuator.gain
}

/// `λ2(t) = -2 r a*(t)` on the unconstrained arc.
pub fn costate_lambda2(t: f64, coeffs: &UnconstrainedArcCoefficients, cost: &CostParams) -> f64 {
    -2.0 * cost.r * coeffs.acceleration(t)
}

/// Constraint value and its first time derivative, `(c, c')`.
pub fn tangency_residual(
    t: f64,
    state: &VehicleState,
    front: &FrontVehicleProfile,
    safety: &SafetyParams,
) -> (f64, f64) {
    let (p_f, v_f, _) = front.kinematics(t);
    (
        safety.constraint(p_f - state.p),
        -safety.xi * (v_f - state.v),
    )
}

/// First time the recorded constraint value reaches `-tol`, linearly
/// interpolated to the zero crossing between the bracketing samples.
pub fn detect_activation(simulated: &Trajectory, safety: &SafetyParams, tol: f64) -> Option<f64> {
    let c = |i: usize| safety.constraint(simulated.samples[i].gap);
    let idx = (0..simulated.samples.len()).find(|&i| c(i) >= -tol)?;
    let t1 = simulated.samples[idx].t;
    if idx == 0 {
        return Some(t1);
    }
    let t0 = simulated.samples[idx - 1].t;
    let (c0, c1) = (c(idx - 1), c(idx));
    if c1 <= c0 {
        return Some(t1);
    }
    let t = t0 + (t1 - t0) * (0.0 - c0) / (c1 - c0);
    Some(t.clamp(t0, t1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LawKind {
    /// Laws built from the model parameters `(τ, k)`.
    ModelBased,
    /// Laws built from the true plant parameters.
    PlantOptimal,
}

impl LawKind {
    pub fn name(&self) -> &'static str {
        match self {
            LawKind::ModelBased => "model_based",
            LawKind::PlantOptimal => "plant_optimal",
        }
    }
}

/// Projected two-arc law. Immutable; discovering the switch time produces a new value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlLaw {
    pub kind: LawKind,
    pub actuator: ActuatorParams,
    pub coeffs: UnconstrainedArcCoefficients,
    pub switch_time: Option<f64>,
    pub bounds: ControlBounds,
}

impl ControlLaw {
    pub fn new(kind: LawKind, cfg: &ScenarioConfig) -> Self {
        let actuator = match kind {
            LawKind::ModelBased => cfg.model,
            LawKind::PlantOptimal => cfg.plant,
        };
        Self {
            kind,
            actuator,
            coeffs: UnconstrainedArcCoefficients::new(&cfg.cost, cfg.x0.v, cfg.horizon_t),
            switch_time: None,
            bounds: cfg.bounds,
        }
    }

    pub fn with_switch_time(self, t_s: f64) -> Result<Self> {
        let horizon = self.coeffs.horizon();
        // the last sample may sit a rounding error past T
        if !(0.0..=horizon * (1.0 + 1e-12)).contains(&t_s) {
            return Err(Error::invalid(
                "switch_time",
                format!("{t_s} outside [0, {horizon}]"),
            ));
        }
        Ok(Self {
            switch_time: Some(t_s),
            ..self
        })
    }

    pub fn on_boundary_arc(&self, t: f64) -> bool {
        self.switch_time.is_some_and(|t_s| t >= t_s)
    }

    /// `(u_raw, u_projected)` at time `t`.
    pub fn apply(&self, t: f64, v_ref: f64, front: &FrontVehicleProfile) -> (f64, f64) {
        let raw = if self.on_boundary_arc(t) {
            constrained_control_raw(t, front, &self.actuator)
        } else {
            unconstrained_control_raw(t, &self.coeffs, &self.actuator, v_ref)
        };
        (raw, self.bounds.project(raw))
    }

    /// Pointwise Hamiltonian data consistent with this law at time `t`.
    ///
    /// Unconstrained arc: the extremal velocity `v*(t)`, `λ2` from the closed
    /// form, `μ = 0`. Boundary arc: the observed state, `λ2` held at its
    /// junction value, and `μ` chosen so the ride control is stationary.
    /// Either way the unconstrained minimizer of the context is `u_raw`.
    pub fn context_at(
        &self,
        t: f64,
        observed: &VehicleState,
        front: &FrontVehicleProfile,
        cost: &CostParams,
        safety: &SafetyParams,
        penalty_value: f64,
    ) -> PointwiseContext {
        let mut ctx = PointwiseContext {
            t,
            state: *observed,
            costate_lambda1: 0.0,
            costate_lambda2: 0.0,
            multiplier_mu: 0.0,
            actuator: self.actuator,
            cost: *cost,
            safety: *safety,
            front_accel: front.kinematics(t).2,
            penalty_value,
        };
        match self.switch_time {
            Some(t_s) if t >= t_s => {
                let lambda2 = costate_lambda2(t_s, &self.coeffs, cost);
                let u_ride = constrained_control_raw(t, front, &self.actuator);
                ctx.costate_lambda2 = lambda2;
                ctx.multiplier_mu =
                    boundary_multiplier(&self.actuator, observed.v, u_ride, lambda2, cost, safety);
            }
            _ => {
                ctx.state.v = unconstrained_velocity(t, &self.coeffs, cost.v_ref);
                ctx.costate_lambda2 = costate_lambda2(t, &self.coeffs, cost);
            }
        }
        ctx
    }
}

/// Multiplier that makes `u_ride` the stationary point: `2 r a + λ2 + μ ξ = 0`.
pub fn boundary_multiplier(
    actuator: &ActuatorParams,
    v: f64,
    u_ride: f64,
    lambda2: f64,
    cost: &CostParams,
    safety: &SafetyParams,
) -> f64 {
    let a = actuator.acceleration(v, u_ride);
    -(2.0 * cost.r * a + lambda2) / safety.xi
}

/// Free-function form of [`ControlLaw::apply`].
pub fn apply_law(law: &ControlLaw, t: f64, v_ref: f64, front: &FrontVehicleProfile) -> (f64, f64) {
    law.apply(t, v_ref, front)
}
