//! Value types shared across the crate.
//!
//! Every parameter block carries a `validate` method that checks its own
//! invariants; [`ScenarioConfig::validate`] runs all of them plus the
//! feasible-start check. All types are plain `Copy`/`Clone` data and are
//! `Send + Sync`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn finite(field: &'static str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite, got {x}")))
    }
}

fn positive(field: &'static str, x: f64) -> Result<()> {
    finite(field, x)?;
    if x > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be > 0, got {x}")))
    }
}

fn non_negative(field: &'static str, x: f64) -> Result<()> {
    finite(field, x)?;
    if x >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be >= 0, got {x}")))
    }
}

/// Position/velocity pair of the ego vehicle (plant or model).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleState {
    /// Position (m).
    pub p: f64,
    /// Velocity (m/s).
    pub v: f64,
}

impl VehicleState {
    pub const fn new(p: f64, v: f64) -> Self {
        Self { p, v }
    }

    pub fn validate(&self) -> Result<()> {
        finite("x0.p", self.p)?;
        finite("x0.v", self.v)
    }

    /// Squared Euclidean distance to another state.
    pub fn distance_sq(&self, other: &VehicleState) -> f64 {
        let dp = self.p - other.p;
        let dv = self.v - other.v;
        dp * dp + dv * dv
    }
}

/// First-order actuation lag: `v' = (gain * u - v) / tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorParams {
    /// Lag time constant (s).
    pub tau: f64,
    /// Actuation gain.
    pub gain: f64,
}

impl ActuatorParams {
    pub const fn new(tau: f64, gain: f64) -> Self {
        Self { tau, gain }
    }

    pub fn validate(&self, prefix: &'static str) -> Result<()> {
        let (tau, gain) = match prefix {
            "plant" => ("plant.tau", "plant.gain"),
            "model" => ("model.tau", "model.gain"),
            _ => ("tau", "gain"),
        };
        positive(tau, self.tau)?;
        positive(gain, self.gain)
    }

    /// Acceleration produced by control `u` at velocity `v`.
    #[inline]
    pub fn acceleration(&self, v: f64, u: f64) -> f64 {
        (self.gain * u - v) / self.tau
    }
}

/// Admissible control interval `[u_min, u_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBounds {
    pub u_min: f64,
    pub u_max: f64,
}

impl ControlBounds {
    pub const fn new(u_min: f64, u_max: f64) -> Self {
        Self { u_min, u_max }
    }

    pub fn validate(&self) -> Result<()> {
        finite("bounds.u_min", self.u_min)?;
        finite("bounds.u_max", self.u_max)?;
        if self.u_min <= self.u_max {
            Ok(())
        } else {
            Err(Error::invalid(
                "bounds.u_max",
                format!("must be >= u_min ({} > {})", self.u_min, self.u_max),
            ))
        }
    }

    /// Euclidean projection onto the interval.
    #[inline]
    pub fn project(&self, u: f64) -> f64 {
        u.clamp(self.u_min, self.u_max)
    }

    pub fn width(&self) -> f64 {
        self.u_max - self.u_min
    }
}

/// Running and terminal cost weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    /// Velocity-tracking weight.
    pub q: f64,
    /// Control-effort (acceleration) weight.
    pub r: f64,
    /// Terminal velocity weight.
    pub h: f64,
    /// Reference velocity (m/s).
    pub v_ref: f64,
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        positive("cost.q", self.q)?;
        positive("cost.r", self.r)?;
        positive("cost.h", self.h)?;
        finite("cost.v_ref", self.v_ref)
    }

    /// `q (v - v_ref)^2 + r a^2`.
    #[inline]
    pub fn running(&self, v: f64, a: f64) -> f64 {
        let w = v - self.v_ref;
        self.q * w * w + self.r * a * a
    }

    /// `h (v(T) - v_ref)^2`.
    #[inline]
    pub fn terminal(&self, v: f64) -> f64 {
        let w = v - self.v_ref;
        self.h * w * w
    }
}

/// Safety-gap constraint `delta - xi * (p_f - p) <= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetyParams {
    /// Safety distance (m).
    pub delta: f64,
    /// Reaction coefficient.
    pub xi: f64,
}

impl SafetyParams {
    pub fn validate(&self) -> Result<()> {
        positive("safety.delta", self.delta)?;
        positive("safety.xi", self.xi)
    }

    /// Constraint value for a given gap `p_f - p`.
    #[inline]
    pub fn constraint(&self, gap: f64) -> f64 {
        self.delta - self.xi * gap
    }

    /// Smallest admissible gap.
    pub fn min_gap(&self) -> f64 {
        self.delta / self.xi
    }
}

/// Leader moving with constant acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontVehicleProfile {
    /// Initial position (m).
    pub p0: f64,
    /// Initial speed (m/s).
    pub speed: f64,
    /// Constant acceleration (m/s^2).
    #[serde(default)]
    pub accel: f64,
}

impl FrontVehicleProfile {
    pub fn validate(&self) -> Result<()> {
        finite("front.p0", self.p0)?;
        finite("front.speed", self.speed)?;
        finite("front.accel", self.accel)
    }

    /// `(p_f, p_f', p_f'')` at time `t`.
    pub fn kinematics(&self, t: f64) -> (f64, f64, f64) {
        (
            self.p0 + self.speed * t + 0.5 * self.accel * t * t,
            self.speed + self.accel * t,
            self.accel,
        )
    }
}

/// Weights of the model/plant discrepancy penalty `beta1 (p - p̂)^2 + beta2 (v - v̂)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyWeights {
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        Self {
            beta1: 1.0,
            beta2: 1.0,
        }
    }
}

impl PenaltyWeights {
    pub fn validate(&self) -> Result<()> {
        non_negative("penalty.beta1", self.beta1)?;
        non_negative("penalty.beta2", self.beta2)
    }

    /// Penalty between a model state and the observed plant state.
    pub fn evaluate(&self, model: &VehicleState, plant: &VehicleState) -> f64 {
        let dp = model.p - plant.p;
        let dv = model.v - plant.v;
        self.beta1 * dp * dp + self.beta2 * dv * dv
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            beta1: self.beta1 * factor,
            beta2: self.beta2 * factor,
        }
    }
}

/// Complete description of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub plant: ActuatorParams,
    pub model: ActuatorParams,
    pub bounds: ControlBounds,
    pub cost: CostParams,
    pub safety: SafetyParams,
    pub front: FrontVehicleProfile,
    #[serde(default)]
    pub penalty: PenaltyWeights,
    pub x0: VehicleState,
    #[serde(rename = "horizon_T")]
    pub horizon_t: f64,
    pub dt: f64,
}

impl ScenarioConfig {
    /// The cruise-control experiment with a 0.1 s hold and a 15 s horizon.
    pub fn reference_scenario() -> Self {
        Self {
            plant: ActuatorParams::new(0.1, 1.4),
            model: ActuatorParams::new(0.3, 1.2),
            bounds: ControlBounds::new(0.1, 0.4),
            cost: CostParams {
                q: 1.0,
                r: 0.5,
                h: 1.0,
                v_ref: 0.6,
            },
            safety: SafetyParams {
                delta: 1.0,
                xi: 1.0,
            },
            front: FrontVehicleProfile {
                p0: 4.0,
                speed: 0.1,
                accel: 0.0,
            },
            penalty: PenaltyWeights::default(),
            x0: VehicleState::new(0.0, 0.5),
            horizon_t: 15.0,
            dt: 0.1,
        }
    }

    /// Returns the config unchanged when every invariant holds.
    pub fn validate(self) -> Result<Self> {
        self.plant.validate("plant")?;
        self.model.validate("model")?;
        self.bounds.validate()?;
        self.cost.validate()?;
        self.safety.validate()?;
        self.front.validate()?;
        self.penalty.validate()?;
        self.x0.validate()?;
        positive("horizon_T", self.horizon_t)?;
        positive("dt", self.dt)?;
        if self.dt >= self.horizon_t {
            return Err(Error::invalid(
                "dt",
                format!("must be < horizon_T ({} >= {})", self.dt, self.horizon_t),
            ));
        }
        let gap = self.front.p0 - self.x0.p;
        let required = self.safety.min_gap();
        if gap <= required {
            return Err(Error::InfeasibleStart { gap, required });
        }
        Ok(self)
    }

    /// Number of hold intervals; samples are taken at `k * dt` for `k = 0..=steps`.
    pub fn steps(&self) -> usize {
        (self.horizon_t / self.dt).round().max(1.0) as usize
    }
}

/// Everything needed to evaluate one Hamiltonian at a fixed time.
///
/// The state-constraint enters through its second time derivative
/// `-xi (p_f'' - a)`, so the leader acceleration is carried along.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointwiseContext {
    pub t: f64,
    pub state: VehicleState,
    pub costate_lambda1: f64,
    pub costate_lambda2: f64,
    pub multiplier_mu: f64,
    pub actuator: ActuatorParams,
    pub cost: CostParams,
    pub safety: SafetyParams,
    pub front_accel: f64,
    /// Control-independent offset `beta ||x - x̂||^2`; zero for the plant problem.
    pub penalty_value: f64,
}

impl PointwiseContext {
    pub fn validate(&self) -> Result<()> {
        for (field, x) in [
            ("t", self.t),
            ("state.p", self.state.p),
            ("state.v", self.state.v),
            ("costate_lambda1", self.costate_lambda1),
            ("costate_lambda2", self.costate_lambda2),
            ("multiplier_mu", self.multiplier_mu),
            ("front_accel", self.front_accel),
        ] {
            finite(field, x)?;
        }
        self.actuator.validate("")?;
        self.cost.validate()?;
        self.safety.validate()?;
        non_negative("penalty_value", self.penalty_value)
    }
}

/// One recorded sample of a closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    /// Plant (driven system) state.
    pub state: VehicleState,
    /// Model state propagated with the same control, used for the penalty.
    pub model_state: VehicleState,
    pub u_raw: f64,
    pub u: f64,
    pub p_front: f64,
    pub gap: f64,
    pub c_value: f64,
    pub constraint_active: bool,
    pub lambda2: f64,
    pub running_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub total_cost: f64,
    pub switch_time: Option<f64>,
}

impl Trajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_scenario_is_valid() {
        let cfg = ScenarioConfig::reference_scenario();
        assert_eq!(cfg.validate().unwrap(), cfg);
    }

    #[test]
    fn validate_is_idempotent() {
        let cfg = ScenarioConfig::reference_scenario();
        let once = cfg.validate().unwrap();
        assert_eq!(once.validate().unwrap(), once);
    }

    #[test]
    fn zero_effort_weight_is_rejected() {
        let mut cfg = ScenarioConfig::reference_scenario();
        cfg.cost.r = 0.0;
        match cfg.validate() {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "cost.r"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn start_inside_safety_distance_is_infeasible() {
        let mut cfg = ScenarioConfig::reference_scenario();
        cfg.x0.p = 3.5;
        match cfg.validate() {
            Err(Error::InfeasibleStart { gap, required }) => {
                assert_eq!(gap, 0.5);
                assert_eq!(required, 1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn other_invariants() {
        let base = ScenarioConfig::reference_scenario();
        let cases: Vec<(&str, ScenarioConfig)> = vec![
            (
                "plant.tau",
                ScenarioConfig {
                    plant: ActuatorParams::new(0.0, 1.0),
                    ..base
                },
            ),
            (
                "model.gain",
                ScenarioConfig {
                    model: ActuatorParams::new(0.3, -1.0),
                    ..base
                },
            ),
            (
                "bounds.u_max",
                ScenarioConfig {
                    bounds: ControlBounds::new(0.5, 0.4),
                    ..base
                },
            ),
            (
                "safety.xi",
                ScenarioConfig {
                    safety: SafetyParams {
                        delta: 1.0,
                        xi: 0.0,
                    },
                    ..base
                },
            ),
            (
                "penalty.beta2",
                ScenarioConfig {
                    penalty: PenaltyWeights {
                        beta1: 1.0,
                        beta2: -1.0,
                    },
                    ..base
                },
            ),
            ("dt", ScenarioConfig { dt: 15.0, ..base }),
            (
                "horizon_T",
                ScenarioConfig {
                    horizon_t: f64::NAN,
                    ..base
                },
            ),
            (
                "x0.v",
                ScenarioConfig {
                    x0: VehicleState::new(0.0, f64::INFINITY),
                    ..base
                },
            ),
        ];
        for (expected, cfg) in cases {
            match cfg.validate() {
                Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, expected),
                other => panic!("{expected}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn degenerate_bounds_are_allowed() {
        let cfg = ScenarioConfig {
            bounds: ControlBounds::new(0.2, 0.2),
            ..ScenarioConfig::reference_scenario()
        };
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn front_kinematics() {
        let front = FrontVehicleProfile {
            p0: 0.0,
            speed: 0.0,
            accel: 0.2,
        };
        let (p, v, a) = front.kinematics(2.0);
        assert!((p - 0.4).abs() < 1e-15);
        assert!((v - 0.4).abs() < 1e-15);
        assert_eq!(a, 0.2);
    }
}
