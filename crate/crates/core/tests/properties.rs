use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use pmp_cruise::config;
use pmp_cruise::cruise_law::{
    constrained_control_raw, costate_lambda2, unconstrained_velocity, ControlLaw, LawKind,
    UnconstrainedArcCoefficients,
};
use pmp_cruise::hamiltonian::{
    check_equivalence, hamiltonian, hamiltonian_gradient, minimize_pointwise, reduce_to_quadratic,
    uniqueness_witness, variational_inequality_holds, EquivalenceTolerance, Problem,
};
use pmp_cruise::oracle::{rk4_integrate, shoot_unconstrained_bvp};
use pmp_cruise::report::trajectory_csv;
use pmp_cruise::simulation::{simulate, zoh_step};
use pmp_cruise::{
    ActuatorParams, ControlBounds, CostParams, FrontVehicleProfile, PenaltyWeights,
    PointwiseContext, SafetyParams, ScenarioConfig, VehicleState,
};

fn actuator() -> impl Strategy<Value = ActuatorParams> {
    (0.05..1.0f64, 0.5..2.0f64).prop_map(|(tau, gain)| ActuatorParams::new(tau, gain))
}

fn cost() -> impl Strategy<Value = CostParams> {
    (0.1..5.0f64, 0.05..5.0f64, 0.1..5.0f64, 0.0..1.5f64).prop_map(|(q, r, h, v_ref)| CostParams {
        q,
        r,
        h,
        v_ref,
    })
}

fn bounds() -> impl Strategy<Value = ControlBounds> {
    (-1.0..1.0f64, 0.0..1.5f64).prop_map(|(lo, w)| ControlBounds::new(lo, lo + w))
}

fn context() -> impl Strategy<Value = PointwiseContext> {
    (
        (0.0..15.0f64, -5.0..5.0f64, -1.0..2.0f64),
        (-1.0..1.0f64, -3.0..3.0f64, 0.0..5.0f64),
        actuator(),
        cost(),
        (0.5..2.0f64, 0.5..2.0f64, -0.5..0.5f64, 0.0..10.0f64),
    )
        .prop_map(
            |((t, p, v), (l1, l2, mu), actuator, cost, (delta, xi, fa, pen))| PointwiseContext {
                t,
                state: VehicleState::new(p, v),
                costate_lambda1: l1,
                costate_lambda2: l2,
                multiplier_mu: mu,
                actuator,
                cost,
                safety: SafetyParams { delta, xi },
                front_accel: fa,
                penalty_value: pen,
            },
        )
}

/// Reference scenario with perturbed dynamics, costs and initial speed.
fn scenario() -> impl Strategy<Value = ScenarioConfig> {
    (actuator(), actuator(), cost(), 0.2..1.0f64, 3.0..10.0f64).prop_map(
        |(plant, model, cost, v0, p0)| {
            let mut cfg = ScenarioConfig::reference_scenario();
            cfg.plant = plant;
            cfg.model = model;
            cfg.cost = cost;
            cfg.x0.v = v0;
            cfg.front.p0 = p0;
            cfg
        },
    )
}

fn problem() -> impl Strategy<Value = Problem> {
    prop_oneof![Just(Problem::Plant), Just(Problem::Model)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hamiltonian_is_the_reduced_quadratic(ctx in context(), pr in problem(), u in -2.0..2.0f64) {
        let obj = reduce_to_quadratic(&ctx, pr).unwrap();
        let h = hamiltonian(&ctx, pr, u);
        prop_assert!((h - obj.eval(u)).abs() <= 1e-9 * (1.0 + h.abs()));
        prop_assert!((hamiltonian_gradient(&ctx, u) - obj.gradient(u)).abs() <= 1e-9 * (1.0 + obj.gradient(u).abs()));
    }

    #[test]
    fn penalty_does_not_move_the_gradient(ctx in context(), u in -2.0..2.0f64, pen in 0.0..1e6f64) {
        let mut other = ctx;
        other.penalty_value = pen;
        prop_assert_eq!(hamiltonian_gradient(&ctx, u).to_bits(), hamiltonian_gradient(&other, u).to_bits());
        let a = reduce_to_quadratic(&ctx, Problem::Model).unwrap();
        let b = reduce_to_quadratic(&other, Problem::Model).unwrap();
        prop_assert_eq!(a.quad(), b.quad());
        prop_assert_eq!(a.lin(), b.lin());
    }

    #[test]
    fn variational_inequality_characterizes_the_minimizer(
        ctx in context(), b in bounds(), frac in 0.0..1.0f64,
    ) {
        let obj = reduce_to_quadratic(&ctx, Problem::Model).unwrap();
        let u_star = minimize_pointwise(&obj, &b);
        prop_assert!(variational_inequality_holds(obj.gradient(u_star), u_star, &b, 1e-9).unwrap());
        let u = b.u_min + frac * b.width();
        if variational_inequality_holds(obj.gradient(u), u, &b, 1e-9).unwrap() {
            prop_assert!((u - u_star).abs() <= 1e-9 / obj.quad() + 1e-12);
        }
    }

    #[test]
    fn identical_problems_are_equivalent(ctx in context(), b in bounds()) {
        let rep = check_equivalence(&ctx, &ctx, &b, &EquivalenceTolerance::default()).unwrap();
        prop_assert!(rep.gradients_match && rep.minimizers_coincide && rep.vi_plant && rep.vi_model);
    }

    #[test]
    fn golden_section_finds_the_unique_minimizer(ctx in context(), b in bounds(), seed in 0u64..1000) {
        let obj = reduce_to_quadratic(&ctx, Problem::Plant).unwrap();
        prop_assert!(uniqueness_witness(&obj, &b, 10, seed));
    }

    #[test]
    fn penalty_is_nonnegative(
        m in (-10.0..10.0f64, -3.0..3.0f64), p in (-10.0..10.0f64, -3.0..3.0f64),
        b1 in 0.0..100.0f64, b2 in 0.0..100.0f64,
    ) {
        let w = PenaltyWeights { beta1: b1, beta2: b2 };
        prop_assert!(w.evaluate(&VehicleState::new(m.0, m.1), &VehicleState::new(p.0, p.1)) >= 0.0);
    }

    #[test]
    fn config_text_round_trips(cfg in scenario(), b1 in 0.0..5.0f64, b2 in 0.0..5.0f64) {
        let mut cfg = cfg;
        cfg.penalty = PenaltyWeights { beta1: b1, beta2: b2 };
        prop_assert_eq!(config::parse(&config::to_text(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn tangent_start_rides_the_boundary(
        act in actuator(), speed in 0.05..1.0f64, delta in 0.5..2.0f64, xi in 0.5..2.0f64,
    ) {
        let front = FrontVehicleProfile { p0: 10.0, speed, accel: 0.0 };
        let safety = SafetyParams { delta, xi };
        let mut s = VehicleState::new(10.0 - safety.min_gap(), speed);
        let mut worst: f64 = f64::NEG_INFINITY;
        for k in 0..150 {
            let t = k as f64 * 0.1;
            let u = constrained_control_raw(t, &front, &act);
            s = zoh_step(&s, u, 0.1, &act);
            let (p_f, _, _) = front.kinematics(t + 0.1);
            worst = worst.max(safety.constraint(p_f - s.p));
        }
        prop_assert!(worst <= 1e-9, "{}", worst);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulations_are_deterministic(cfg in scenario()) {
        if cfg.validate().is_ok() {
            let a = simulate(&cfg, LawKind::ModelBased).unwrap();
            let b = simulate(&cfg, LawKind::ModelBased).unwrap();
            prop_assert_eq!(trajectory_csv(&a).unwrap(), trajectory_csv(&b).unwrap());
        }
    }

    #[test]
    fn applied_controls_stay_in_bounds(cfg in scenario(), lo in 0.0..0.3f64, w in 0.0..0.5f64) {
        let mut cfg = cfg;
        cfg.bounds = ControlBounds::new(lo, lo + w);
        if cfg.validate().is_ok() {
            for kind in [LawKind::ModelBased, LawKind::PlantOptimal] {
                let res = simulate(&cfg, kind).unwrap();
                prop_assert!(res.trajectory.samples.iter().all(|s| s.u >= lo && s.u <= lo + w));
            }
        }
    }

    #[test]
    fn gap_shrinks_while_closing_in(cfg in scenario()) {
        // the leader is slower than anything the ego can do at u_min
        let mut cfg = cfg;
        cfg.front.speed = 0.01;
        cfg.bounds = ControlBounds::new(0.1, 0.4);
        if cfg.validate().is_ok() && cfg.x0.v > 0.1 {
            let res = simulate(&cfg, LawKind::PlantOptimal).unwrap();
            let t_s = res.switch_time.unwrap_or(f64::INFINITY);
            let gaps: Vec<f64> = res.trajectory.samples.iter().filter(|s| s.t <= t_s).map(|s| s.gap).collect();
            prop_assert!(gaps.windows(2).all(|w| w[1] < w[0]));
        }
    }
}

#[test]
fn law_projection_matches_pointwise_minimization() {
    let cfg = ScenarioConfig::reference_scenario();
    let mut rng = StdRng::seed_from_u64(11);
    for kind in [LawKind::ModelBased, LawKind::PlantOptimal] {
        let law = ControlLaw::new(kind, &cfg).with_switch_time(6.6).unwrap();
        for _ in 0..1000 {
            let t = rng.random_range(0.0..cfg.horizon_t);
            let observed =
                VehicleState::new(rng.random_range(0.0..4.0), rng.random_range(0.05..0.7));
            let (raw, proj) = law.apply(t, cfg.cost.v_ref, &cfg.front);
            assert_eq!(proj, cfg.bounds.project(raw));
            let ctx = law.context_at(t, &observed, &cfg.front, &cfg.cost, &cfg.safety, 0.0);
            let obj = reduce_to_quadratic(&ctx, Problem::Plant).unwrap();
            let u = minimize_pointwise(&obj, &cfg.bounds);
            assert!((u - proj).abs() <= 1e-9, "t={t}: argmin {u} vs law {proj}");
        }
    }
}

#[test]
fn shooting_matches_closed_form_on_random_problems() {
    let mut rng = StdRng::seed_from_u64(5);
    let mut done = 0;
    while done < 20 {
        let cost = CostParams {
            q: rng.random_range(0.1..5.0),
            r: rng.random_range(0.1..5.0),
            h: rng.random_range(0.01..5.0),
            v_ref: rng.random_range(0.0..1.5),
        };
        let v0 = rng.random_range(0.0..1.5);
        let horizon: f64 = rng.random_range(0.5..10.0);
        let coeffs = UnconstrainedArcCoefficients::new(&cost, v0, horizon);
        if coeffs.omega * horizon > 30.0 {
            continue;
        }
        done += 1;
        let steps = ((coeffs.omega * horizon / 1e-3).ceil() as usize).max(1000);
        let act = ActuatorParams::new(0.3, 1.2);
        let sol = shoot_unconstrained_bvp(&cost, &act, v0, horizon, steps, 1e-10).unwrap();
        for i in 0..sol.t.len() {
            let t = sol.t[i];
            let dv = (sol.v[i] - unconstrained_velocity(t, &coeffs, cost.v_ref)).abs();
            let dl = (sol.lambda2[i] - costate_lambda2(t, &coeffs, &cost)).abs();
            assert!(
                dv <= 1e-6 && dl <= 1e-6,
                "{cost:?} v0={v0} T={horizon} t={t}: {dv:e} {dl:e}"
            );
        }
    }
}

fn linear_rhs(act: ActuatorParams, u: f64) -> impl FnMut(f64, &[f64; 2]) -> [f64; 2] {
    move |_t, x| [x[1], act.acceleration(x[1], u)]
}

#[test]
fn rk4_is_fourth_order_against_the_exact_step() {
    let act = ActuatorParams::new(0.3, 1.2);
    let x0 = VehicleState::new(0.0, 0.5);
    let exact = zoh_step(&x0, 0.4, 1.0, &act);
    let err = |steps: usize| {
        let x = rk4_integrate(linear_rhs(act, 0.4), [x0.p, x0.v], 0.0, 1.0, steps);
        (x[0] - exact.p).abs().max((x[1] - exact.v).abs())
    };
    let mut prev = err(4);
    for steps in [8, 16, 32] {
        let e = err(steps);
        if e > 1e-13 {
            assert!(prev / e >= 8.0, "{steps} steps: {prev:e} -> {e:e}");
        }
        prev = e;
    }
}

#[test]
fn exact_step_matches_fine_rk4() {
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..50 {
        let act = ActuatorParams::new(rng.random_range(0.05..1.0), rng.random_range(0.5..2.0));
        let x0 = VehicleState::new(rng.random_range(-5.0..5.0), rng.random_range(-1.0..2.0));
        let u = rng.random_range(-1.0..1.0);
        let dt = 0.1;
        let z = zoh_step(&x0, u, dt, &act);
        let x = rk4_integrate(linear_rhs(act, u), [x0.p, x0.v], 0.0, dt, 100);
        assert!((x[0] - z.p).abs() <= 1e-9 && (x[1] - z.v).abs() <= 1e-9);
    }
}
