//! Trajectory CSVs, the model-vs-plant equivalence report, and self-checks.
//!
//! The equivalence analysis works on [`CsvRow`] values, i.e. on exactly what
//! the CSV files contain, so re-running it on files read back from disk
//! reproduces the report.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use crate::cruise_law::{tangency_residual, ControlLaw, LawKind, UnconstrainedArcCoefficients};
use crate::error::{Error, Result};
use crate::hamiltonian::{
    check_equivalence, hamiltonian, hamiltonian_gradient, minimize_pointwise, reduce_to_quadratic,
    EquivalenceTolerance, GradientMatchReport, Problem,
};
use crate::oracle::{fd_gradient, grid_minimize, shoot_unconstrained_bvp};
use crate::simulation::{simulate, SimulationResult};
use crate::types::{
    ActuatorParams, ControlBounds, CostParams, PointwiseContext, SafetyParams, ScenarioConfig,
    VehicleState,
};

pub const CSV_HEADER: [&str; 11] = [
    "t",
    "p",
    "v",
    "u_raw",
    "u",
    "p_front",
    "gap",
    "c_value",
    "constraint_active",
    "lambda2",
    "running_cost",
];

/// Significant digits written to the CSV.
pub const CSV_DIGITS: usize = 9;

/// Tolerance for counting two projected controls as equal.
pub const COINCIDENCE_TOL: f64 = 1e-9;

/// `printf("%.*g")`-style formatting: `digits` significant digits, trailing
/// zeros dropped, scientific notation outside `1e-4 <= |x| < 10^digits`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let prec = digits.saturating_sub(1);
    let sci = format!("{x:.prec$e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (prec as i32 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn sig(x: f64) -> String {
    format_sig(x, CSV_DIGITS)
}

/// One CSV line, parsed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvRow {
    pub t: f64,
    pub p: f64,
    pub v: f64,
    pub u_raw: f64,
    pub u: f64,
    pub p_front: f64,
    pub gap: f64,
    pub c_value: f64,
    pub constraint_active: bool,
    pub lambda2: f64,
    pub running_cost: f64,
}

impl CsvRow {
    fn fields(&self) -> [String; 11] {
        [
            sig(self.t),
            sig(self.p),
            sig(self.v),
            sig(self.u_raw),
            sig(self.u),
            sig(self.p_front),
            sig(self.gap),
            sig(self.c_value),
            u8::from(self.constraint_active).to_string(),
            sig(self.lambda2),
            sig(self.running_cost),
        ]
    }

    fn parse(record: &csv::StringRecord, line: usize) -> Result<Self> {
        let num = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse(format!("line {line}: bad `{}` field", CSV_HEADER[i])))
        };
        let active = match record.get(8) {
            Some("0") => false,
            Some("1") => true,
            _ => {
                return Err(Error::Parse(format!(
                    "line {line}: constraint_active must be 0 or 1"
                )))
            }
        };
        Ok(Self {
            t: num(0)?,
            p: num(1)?,
            v: num(2)?,
            u_raw: num(3)?,
            u: num(4)?,
            p_front: num(5)?,
            gap: num(6)?,
            c_value: num(7)?,
            constraint_active: active,
            lambda2: num(9)?,
            running_cost: num(10)?,
        })
    }

    /// Same row after a trip through the CSV text form.
    fn rounded(&self) -> Self {
        let f = self.fields();
        let p = |i: usize| f[i].parse::<f64>().expect("formatted number");
        Self {
            t: p(0),
            p: p(1),
            v: p(2),
            u_raw: p(3),
            u: p(4),
            p_front: p(5),
            gap: p(6),
            c_value: p(7),
            constraint_active: self.constraint_active,
            lambda2: p(9),
            running_cost: p(10),
        }
    }
}

/// Rows as they appear in the CSV for this run.
pub fn csv_rows(result: &SimulationResult) -> Vec<CsvRow> {
    result
        .trajectory
        .samples
        .iter()
        .map(|s| {
            CsvRow {
                t: s.t,
                p: s.state.p,
                v: s.state.v,
                u_raw: s.u_raw,
                u: s.u,
                p_front: s.p_front,
                gap: s.gap,
                c_value: s.c_value,
                constraint_active: s.constraint_active,
                lambda2: s.lambda2,
                running_cost: s.running_cost,
            }
            .rounded()
        })
        .collect()
}

pub fn trajectory_csv(result: &SimulationResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for row in csv_rows(result) {
        w.write_record(row.fields())?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Parse(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

pub fn write_trajectory_csv(result: &SimulationResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, trajectory_csv(result)?).map_err(|e| Error::io(path, e))
}

pub fn read_trajectory_csv(path: impl AsRef<Path>) -> Result<Vec<CsvRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory_csv(&text)
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse(format!(
            "unexpected CSV header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| CsvRow::parse(&rec?, i + 2))
        .collect()
}

/// Per-sample comparison of the two runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleComparison {
    pub t: f64,
    pub u_model_based: f64,
    pub u_plant_optimal: f64,
    pub control_gap: f64,
    pub equivalence: GradientMatchReport,
}

impl SampleComparison {
    pub fn gradients_differ_minimizers_coincide(&self) -> bool {
        !self.equivalence.gradients_match && self.equivalence.minimizers_coincide
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub switch_time: Option<f64>,
    pub max_constraint_violation: f64,
    pub j_act: f64,
    /// `(c, c')` at the switch sample.
    pub tangency: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceAnalysis {
    pub samples: Vec<SampleComparison>,
    pub model_based: RunSummary,
    pub plant_optimal: RunSummary,
    pub coincidence_fraction: f64,
}

impl EquivalenceAnalysis {
    /// Times where the Hamiltonian gradients differ but the constrained minimizers agree.
    pub fn mechanism_times(&self) -> Vec<f64> {
        self.samples
            .iter()
            .filter(|s| s.gradients_differ_minimizers_coincide())
            .map(|s| s.t)
            .collect()
    }
}

fn switch_time(rows: &[CsvRow]) -> Option<f64> {
    rows.iter().find(|r| r.constraint_active).map(|r| r.t)
}

fn summarize(rows: &[CsvRow], config: &ScenarioConfig) -> RunSummary {
    let j_running: f64 = rows
        .windows(2)
        .map(|w| 0.5 * (w[1].t - w[0].t) * (w[0].running_cost + w[1].running_cost))
        .sum();
    let last = rows.last().expect("trajectory has samples");
    let switch = rows.iter().find(|r| r.constraint_active);
    RunSummary {
        switch_time: switch.map(|r| r.t),
        max_constraint_violation: rows.iter().map(|r| r.c_value.max(0.0)).fold(0.0, f64::max),
        j_act: j_running + config.cost.terminal(last.v),
        tangency: switch.map(|r| {
            tangency_residual(
                r.t,
                &VehicleState::new(r.p, r.v),
                &config.front,
                &config.safety,
            )
        }),
    }
}

/// Law context for a recorded row; the penalty offset is left at zero since
/// it moves neither the gradient nor the minimizer.
fn row_context(law: &ControlLaw, row: &CsvRow, config: &ScenarioConfig) -> PointwiseContext {
    law.context_at(
        row.t,
        &VehicleState::new(row.p, row.v),
        &config.front,
        &config.cost,
        &config.safety,
        0.0,
    )
}

fn law_for(kind: LawKind, rows: &[CsvRow], config: &ScenarioConfig) -> Result<ControlLaw> {
    let law = ControlLaw::new(kind, config);
    match switch_time(rows) {
        Some(t_s) => law.with_switch_time(t_s),
        None => Ok(law),
    }
}

/// Compares a model-based run and a plant-optimal run sample by sample.
pub fn analyze_rows(
    model_based: &[CsvRow],
    plant_optimal: &[CsvRow],
    config: &ScenarioConfig,
) -> Result<EquivalenceAnalysis> {
    if model_based.len() != plant_optimal.len() {
        return Err(Error::HorizonMismatch(format!(
            "{} vs {} samples",
            model_based.len(),
            plant_optimal.len()
        )));
    }
    if model_based.is_empty() {
        return Err(Error::HorizonMismatch("no samples".into()));
    }
    let mb_law = law_for(LawKind::ModelBased, model_based, config)?;
    let opt_law = law_for(LawKind::PlantOptimal, plant_optimal, config)?;
    let tol = EquivalenceTolerance::default();

    let mut samples = Vec::with_capacity(model_based.len());
    for (mb, opt) in model_based.iter().zip(plant_optimal) {
        if (mb.t - opt.t).abs() > 1e-9 * (1.0 + mb.t.abs()) {
            return Err(Error::HorizonMismatch(format!(
                "sample times {} and {} differ",
                mb.t, opt.t
            )));
        }
        let model_ctx = row_context(&mb_law, mb, config);
        let plant_ctx = row_context(&opt_law, opt, config);
        samples.push(SampleComparison {
            t: mb.t,
            u_model_based: mb.u,
            u_plant_optimal: opt.u,
            control_gap: (mb.u - opt.u).abs(),
            equivalence: check_equivalence(&plant_ctx, &model_ctx, &config.bounds, &tol)?,
        });
    }
    let coincident = samples
        .iter()
        .filter(|s| s.control_gap <= COINCIDENCE_TOL)
        .count();
    Ok(EquivalenceAnalysis {
        coincidence_fraction: coincident as f64 / samples.len() as f64,
        samples,
        model_based: summarize(model_based, config),
        plant_optimal: summarize(plant_optimal, config),
    })
}

pub fn analyze(
    run_mb: &SimulationResult,
    run_opt: &SimulationResult,
    config: &ScenarioConfig,
) -> Result<EquivalenceAnalysis> {
    analyze_rows(&csv_rows(run_mb), &csv_rows(run_opt), config)
}

fn opt_sig(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), sig)
}

/// Report text: a readable body followed by a `key: value` trailer.
pub fn equivalence_report(analysis: &EquivalenceAnalysis, config: &ScenarioConfig) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(
        w,
        "Equivalence report: model-based vs plant-optimal control"
    );
    let _ = writeln!(w, "=======================================================");
    let _ = writeln!(
        w,
        "plant (tau, k) = ({}, {}), model (tau, k) = ({}, {}), U = [{}, {}]",
        config.plant.tau,
        config.plant.gain,
        config.model.tau,
        config.model.gain,
        config.bounds.u_min,
        config.bounds.u_max
    );
    let _ = writeln!(
        w,
        "penalty weights beta1 = {}, beta2 = {} (chosen values; the penalty does not enter the control)",
        config.penalty.beta1, config.penalty.beta2
    );
    let _ = writeln!(w);
    let _ = writeln!(
        w,
        "{:>10} {:>12} {:>12} {:>12} {:>14} {:>14} {:>7} {:>7}",
        "t", "u_mb", "u_opt", "|du|", "grad_plant", "grad_model", "grad=", "argmin="
    );
    for s in &analysis.samples {
        let e = &s.equivalence;
        let _ = writeln!(
            w,
            "{:>10} {:>12} {:>12} {:>12} {:>14} {:>14} {:>7} {:>7}",
            sig(s.t),
            sig(s.u_model_based),
            sig(s.u_plant_optimal),
            sig(s.control_gap),
            sig(e.grad_plant),
            sig(e.grad_model),
            u8::from(e.gradients_match),
            u8::from(e.minimizers_coincide)
        );
    }
    let _ = writeln!(w);
    for (name, run) in [
        ("model_based", &analysis.model_based),
        ("plant_optimal", &analysis.plant_optimal),
    ] {
        match (run.switch_time, run.tangency) {
            (Some(t_s), Some((c, c_dot))) => {
                let _ = writeln!(
                    w,
                    "{name}: constraint first active at t = {} s; tangency residual c = {}, c' = {}",
                    sig(t_s),
                    sig(c),
                    sig(c_dot)
                );
            }
            _ => {
                let _ = writeln!(w, "{name}: constraint never active (switch_time = none)");
            }
        }
    }
    let mechanism = analysis.mechanism_times();
    let coincident = analysis
        .samples
        .iter()
        .filter(|s| s.control_gap <= COINCIDENCE_TOL)
        .count();
    let _ = writeln!(w);
    let _ = writeln!(
        w,
        "j_act below is integrated from the recorded (9-digit) samples."
    );
    let _ = writeln!(w, "--- summary ---");
    let _ = writeln!(w, "samples: {}", analysis.samples.len());
    let _ = writeln!(w, "coincident_samples: {coincident}");
    let _ = writeln!(
        w,
        "coincidence_fraction: {}",
        sig(analysis.coincidence_fraction)
    );
    let _ = writeln!(w, "coincidence_tolerance: {}", sig(COINCIDENCE_TOL));
    let _ = writeln!(
        w,
        "gradients_differ_minimizers_coincide_count: {}",
        mechanism.len()
    );
    let _ = writeln!(
        w,
        "gradients_differ_minimizers_coincide_times: {}",
        mechanism
            .iter()
            .map(|&t| sig(t))
            .collect::<Vec<_>>()
            .join(" ")
    );
    let _ = writeln!(
        w,
        "gradients_match_everywhere: {}",
        analysis
            .samples
            .iter()
            .all(|s| s.equivalence.gradients_match)
    );
    for (name, run) in [
        ("model_based", &analysis.model_based),
        ("plant_optimal", &analysis.plant_optimal),
    ] {
        let _ = writeln!(w, "{name}.switch_time: {}", opt_sig(run.switch_time));
        let _ = writeln!(
            w,
            "{name}.max_constraint_violation: {}",
            sig(run.max_constraint_violation)
        );
        let _ = writeln!(w, "{name}.j_act: {}", sig(run.j_act));
        let _ = writeln!(
            w,
            "{name}.tangency_c: {}",
            opt_sig(run.tangency.map(|x| x.0))
        );
        let _ = writeln!(
            w,
            "{name}.tangency_c_dot: {}",
            opt_sig(run.tangency.map(|x| x.1))
        );
    }
    out
}

pub fn write_equivalence_report(
    run_mb: &SimulationResult,
    run_opt: &SimulationResult,
    config: &ScenarioConfig,
    path: impl AsRef<Path>,
) -> Result<EquivalenceAnalysis> {
    let path = path.as_ref();
    let analysis = analyze(run_mb, run_opt, config)?;
    fs::write(path, equivalence_report(&analysis, config)).map_err(|e| Error::io(path, e))?;
    Ok(analysis)
}

/// Parses the `key: value` trailer of a report.
pub fn parse_report_summary(text: &str) -> Vec<(String, String)> {
    text.split_once("--- summary ---\n")
        .map(|(_, tail)| {
            tail.lines()
                .filter_map(|l| {
                    l.split_once(": ")
                        .or_else(|| l.strip_suffix(':').map(|k| (k, "")))
                })
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect()
        })
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed,
        detail,
    }
}

fn random_context(rng: &mut StdRng) -> (PointwiseContext, ControlBounds) {
    let a: f64 = rng.random_range(-2.0..2.0);
    let b: f64 = rng.random_range(-2.0..2.0);
    let ctx = PointwiseContext {
        t: rng.random_range(0.0..15.0),
        state: VehicleState::new(rng.random_range(-5.0..5.0), rng.random_range(-1.0..2.0)),
        costate_lambda1: rng.random_range(-1.0..1.0),
        costate_lambda2: rng.random_range(-2.0..2.0),
        multiplier_mu: rng.random_range(0.0..3.0),
        actuator: ActuatorParams::new(rng.random_range(0.05..1.0), rng.random_range(0.5..2.0)),
        cost: CostParams {
            q: rng.random_range(0.1..5.0),
            r: rng.random_range(0.1..5.0),
            h: rng.random_range(0.1..5.0),
            v_ref: rng.random_range(0.0..1.5),
        },
        safety: SafetyParams {
            delta: rng.random_range(0.5..2.0),
            xi: rng.random_range(0.5..2.0),
        },
        front_accel: rng.random_range(-0.5..0.5),
        penalty_value: rng.random_range(0.0..10.0),
    };
    (ctx, ControlBounds::new(a.min(b), a.max(b)))
}

/// Self-checks on a scenario: closed-loop behaviour plus a seeded oracle sweep.
pub fn self_check(
    config: &ScenarioConfig,
    run_mb: &SimulationResult,
    run_opt: &SimulationResult,
    seed: u64,
) -> Result<Vec<CheckOutcome>> {
    let mut checks = Vec::new();
    let analysis = analyze(run_mb, run_opt, config)?;

    let in_bounds = [run_mb, run_opt].iter().all(|r| {
        r.trajectory
            .samples
            .iter()
            .all(|s| s.u >= config.bounds.u_min && s.u <= config.bounds.u_max)
    });
    checks.push(outcome(
        "projection_safety",
        in_bounds,
        "every applied control lies in U".into(),
    ));

    let consistent = analysis
        .samples
        .iter()
        .all(|s| s.equivalence.minimizers_coincide == (s.control_gap <= COINCIDENCE_TOL));
    checks.push(outcome(
        "hamiltonian_minimizers_match_laws",
        consistent,
        "pointwise argmin coincidence agrees with applied-control coincidence".into(),
    ));

    checks.push(outcome(
        "coincidence_fraction",
        analysis.coincidence_fraction >= 0.90,
        format!("{} >= 0.9", sig(analysis.coincidence_fraction)),
    ));

    let switch_ok = match (run_mb.switch_time, run_opt.switch_time) {
        (Some(a), Some(b)) => (a - b).abs() <= 0.3,
        (None, None) => true,
        _ => false,
    };
    checks.push(outcome(
        "switch_time_offset",
        switch_ok,
        format!(
            "model_based {} vs plant_optimal {} (<= 0.3 s apart)",
            opt_sig(run_mb.switch_time),
            opt_sig(run_opt.switch_time)
        ),
    ));

    let rerun = simulate(config, LawKind::PlantOptimal)?;
    checks.push(outcome(
        "determinism",
        trajectory_csv(&rerun)? == trajectory_csv(run_opt)?,
        "re-run produces a byte-identical CSV".into(),
    ));

    let mut rng = StdRng::seed_from_u64(seed);
    let n = 100_000;
    let mut grid_ok = true;
    let mut grad_ok = true;
    for _ in 0..50 {
        let (ctx, bounds) = random_context(&mut rng);
        let obj = reduce_to_quadratic(&ctx, Problem::Model)?;
        let closed = minimize_pointwise(&obj, &bounds);
        let grid = grid_minimize(|u| hamiltonian(&ctx, Problem::Model, u), &bounds, n)?;
        grid_ok &= (grid - closed).abs() <= bounds.width() / (n - 1) as f64 + 1e-12;
        let u = rng.random_range(-1.0..1.0);
        let fd = fd_gradient(|u| hamiltonian(&ctx, Problem::Model, u), u, 1e-6)?;
        grad_ok &= (fd - hamiltonian_gradient(&ctx, u)).abs() <= 1e-5;
    }
    checks.push(outcome(
        "grid_vs_closed_form",
        grid_ok,
        format!("50 random contexts, seed {seed}"),
    ));
    checks.push(outcome(
        "gradient_vs_finite_difference",
        grad_ok,
        format!("50 random contexts, seed {seed}"),
    ));

    let coeffs = UnconstrainedArcCoefficients::new(&config.cost, config.x0.v, config.horizon_t);
    if coeffs.omega * config.horizon_t <= 30.0 {
        let steps = ((coeffs.omega * config.horizon_t / 1e-3).ceil() as usize).max(1000);
        let sol = shoot_unconstrained_bvp(
            &config.cost,
            &config.model,
            config.x0.v,
            config.horizon_t,
            steps,
            1e-10,
        )?;
        let err = sol
            .t
            .iter()
            .zip(&sol.v)
            .map(|(&t, &v)| (v - config.cost.v_ref - coeffs.velocity_error(t)).abs())
            .fold(0.0, f64::max);
        checks.push(outcome(
            "shooting_vs_closed_form",
            err <= 1e-6,
            format!("sup |v_shoot - v*| = {err:.3e}"),
        ));
    }
    Ok(checks)
}
