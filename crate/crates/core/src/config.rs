//! Scenario files: flat `section.key = value` lines, one scenario per file.
//!
//! ```text
//! # comment
//! plant.tau = 0.1
//! plant.gain = 1.4
//! horizon_T = 15.0
//! ```
//!
//! The dotted keys are valid TOML, so parsing goes through the `toml` crate;
//! unknown keys are rejected. `penalty.*` and `front.accel` are optional
//! (defaults 1, 1 and 0).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::ScenarioConfig;

/// Parses a scenario without validating its invariants.
pub fn parse(text: &str) -> Result<ScenarioConfig> {
    toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()))
}

/// Parses and validates a scenario.
pub fn parse_validated(text: &str) -> Result<ScenarioConfig> {
    parse(text)?.validate()
}

pub fn load(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_validated(&text)
}

/// Serializes every field, including optional ones, in the flat dotted form.
pub fn to_text(cfg: &ScenarioConfig) -> String {
    let entries: [(&str, f64); 21] = [
        ("plant.tau", cfg.plant.tau),
        ("plant.gain", cfg.plant.gain),
        ("model.tau", cfg.model.tau),
        ("model.gain", cfg.model.gain),
        ("bounds.u_min", cfg.bounds.u_min),
        ("bounds.u_max", cfg.bounds.u_max),
        ("cost.q", cfg.cost.q),
        ("cost.r", cfg.cost.r),
        ("cost.h", cfg.cost.h),
        ("cost.v_ref", cfg.cost.v_ref),
        ("safety.delta", cfg.safety.delta),
        ("safety.xi", cfg.safety.xi),
        ("front.p0", cfg.front.p0),
        ("front.speed", cfg.front.speed),
        ("front.accel", cfg.front.accel),
        ("penalty.beta1", cfg.penalty.beta1),
        ("penalty.beta2", cfg.penalty.beta2),
        ("x0.p", cfg.x0.p),
        ("x0.v", cfg.x0.v),
        ("horizon_T", cfg.horizon_t),
        ("dt", cfg.dt),
    ];
    let mut out = String::new();
    for (key, value) in entries {
        // `{:?}` is the shortest representation that round-trips, and always
        // carries a `.` or exponent so TOML reads it back as a float.
        let _ = writeln!(out, "{key} = {value:?}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::PenaltyWeights;

    const REFERENCE: &str = "\
plant.tau = 0.1
plant.gain = 1.4
model.tau = 0.3
model.gain = 1.2
bounds.u_min = 0.1
bounds.u_max = 0.4
cost.q = 1
cost.r = 0.5
cost.h = 1
cost.v_ref = 0.6
safety.delta = 1
safety.xi = 1
front.p0 = 4.0
front.speed = 0.1
x0.p = 0.0
x0.v = 0.5
horizon_T = 15
dt = 0.1
";

    #[test]
    fn parses_reference_scenario_with_defaults() {
        let cfg = parse_validated(REFERENCE).unwrap();
        assert_eq!(cfg, ScenarioConfig::reference_scenario());
        assert_eq!(cfg.penalty, PenaltyWeights::default());
        assert_eq!(cfg.front.accel, 0.0);
    }

    #[test]
    fn rejects_unknown_key() {
        let text = format!("{REFERENCE}cost.rr = 1.0\n");
        let err = parse(&text).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
        assert!(err.to_string().contains("rr"), "{err}");
    }

    #[test]
    fn rejects_missing_key() {
        let text = REFERENCE.replace("cost.r = 0.5\n", "");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("`r`"), "{err}");
    }

    #[test]
    fn zero_r_names_the_field() {
        let text = REFERENCE.replace("cost.r = 0.5", "cost.r = 0");
        let err = parse_validated(&text).unwrap_err();
        assert!(err.is_config_error());
        assert!(err.to_string().contains("cost.r"), "{err}");
    }

    #[test]
    fn round_trip() {
        let cfg = ScenarioConfig::reference_scenario();
        assert_eq!(parse(&to_text(&cfg)).unwrap(), cfg);
    }
}
