//! Closed-loop runs under zero-order hold.
//!
//! The plant is always the stepped system. The strategy only decides which
//! parameter set (model or plant) the control law is built from. The model
//! state is propagated in parallel with the same input for penalty accounting.

use crate::cruise_law::{ControlLaw, LawKind};
use crate::error::Result;
use crate::types::{
    ActuatorParams, FrontVehicleProfile, ScenarioConfig, Trajectory, TrajectorySample, VehicleState,
};

/// `c >= -SWITCH_TOL` at a sample switches the law to the boundary arc.
pub const SWITCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub kind: LawKind,
    pub trajectory: Trajectory,
    pub j_act: f64,
    pub j_mod: f64,
    /// `max_t max(0, c(t))` over the recorded samples.
    pub max_constraint_violation: f64,
    pub switch_time: Option<f64>,
}

/// Exact discretization of `p' = v, v' = (k u - v)/τ` under constant `u` over `dt`.
pub fn zoh_step(state: &VehicleState, u: f64, dt: f64, actuator: &ActuatorParams) -> VehicleState {
    let ActuatorParams { tau, gain } = *actuator;
    let alpha = (-dt / tau).exp();
    // 1 - α without cancellation for dt << τ
    let one_minus_alpha = -(-dt / tau).exp_m1();
    let v = alpha * state.v + gain * one_minus_alpha * u;
    let p = state.p + tau * one_minus_alpha * state.v + gain * (dt - tau * one_minus_alpha) * u;
    VehicleState { p, v }
}

/// `(p_f, p_f', p_f'')` at time `t`.
pub fn front_position(front: &FrontVehicleProfile, t: f64) -> (f64, f64, f64) {
    front.kinematics(t)
}

/// Runs one strategy over `[0, T]` on the validated `config`.
pub fn simulate(config: &ScenarioConfig, kind: LawKind) -> Result<SimulationResult> {
    let cfg = config.validate()?;
    let steps = cfg.steps();
    let mut law = ControlLaw::new(kind, &cfg);
    let mut plant = cfg.x0;
    let mut model = cfg.x0;
    let mut samples = Vec::with_capacity(steps + 1);

    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        let (p_front, _, _) = front_position(&cfg.front, t);
        let gap = p_front - plant.p;
        let c_value = cfg.safety.constraint(gap);
        let constraint_active = c_value >= -SWITCH_TOL;
        if law.switch_time.is_none() && constraint_active {
            law = law.with_switch_time(t)?;
        }
        let (u_raw, u) = law.apply(t, cfg.cost.v_ref, &cfg.front);
        let penalty = cfg.penalty.evaluate(&model, &plant);
        let ctx = law.context_at(t, &plant, &cfg.front, &cfg.cost, &cfg.safety, penalty);
        samples.push(TrajectorySample {
            t,
            state: plant,
            model_state: model,
            u_raw,
            u,
            p_front,
            gap,
            c_value,
            constraint_active,
            lambda2: ctx.costate_lambda2,
            running_cost: cfg
                .cost
                .running(plant.v, cfg.plant.acceleration(plant.v, u)),
        });
        if k < steps {
            plant = zoh_step(&plant, u, cfg.dt, &cfg.plant);
            model = zoh_step(&model, u, cfg.dt, &cfg.model);
        }
    }

    let mut trajectory = Trajectory {
        samples,
        total_cost: 0.0,
        switch_time: law.switch_time,
    };
    let (j_act, j_mod) = accumulate_costs(&trajectory, &cfg);
    trajectory.total_cost = j_act;
    let max_constraint_violation = trajectory
        .samples
        .iter()
        .map(|s| s.c_value.max(0.0))
        .fold(0.0, f64::max);
    Ok(SimulationResult {
        kind,
        trajectory,
        j_act,
        j_mod,
        max_constraint_violation,
        switch_time: law.switch_time,
    })
}

fn trapezoid(samples: &[TrajectorySample], integrand: impl Fn(&TrajectorySample) -> f64) -> f64 {
    samples
        .windows(2)
        .map(|w| 0.5 * (w[1].t - w[0].t) * (integrand(&w[0]) + integrand(&w[1])))
        .sum()
}

/// Trapezoid-rule `J_act` and penalized `J_mod`, each with its terminal term.
pub fn accumulate_costs(trajectory: &Trajectory, config: &ScenarioConfig) -> (f64, f64) {
    let samples = &trajectory.samples;
    let Some(last) = samples.last() else {
        return (0.0, 0.0);
    };
    let cost = &config.cost;
    let j_act = trapezoid(samples, |s| {
        cost.running(s.state.v, config.plant.acceleration(s.state.v, s.u))
    }) + cost.terminal(last.state.v);
    let j_mod = trapezoid(samples, |s| {
        cost.running(
            s.model_state.v,
            config.model.acceleration(s.model_state.v, s.u),
        ) + config.penalty.evaluate(&s.model_state, &s.state)
    }) + cost.terminal(last.model_state.v);
    (j_act, j_mod)
}

/// Penalty part of `J_mod` alone.
pub fn penalty_integral(trajectory: &Trajectory, config: &ScenarioConfig) -> f64 {
    trapezoid(&trajectory.samples, |s| {
        config.penalty.evaluate(&s.model_state, &s.state)
    })
}
