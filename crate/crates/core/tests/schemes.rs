use aoflow::diagnostics::Trajectory;
use aoflow::manufactured::ManufacturedProblem;
use aoflow::mesh::{generate_two_domain_mesh, Domain};
use aoflow::problem::{Problem, SineVortexProblem};
use aoflow::schemes::{Bootstrap, Control, SchemeConfig, SchemeKind, Simulator, State};
use aoflow::space::{BasisTable, Space, Vec2};

fn space(n: usize) -> Space {
    Space::new(generate_two_domain_mesh(n).unwrap())
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn state_diff(a: &State, b: &State) -> f64 {
    Domain::BOTH
        .iter()
        .map(|&d| max_diff(&a.domain(d).u, &b.domain(d).u))
        .fold(0.0, f64::max)
}

/// Rest state with no forcing and homogeneous walls.
#[derive(Debug)]
struct Quiet;

impl Problem for Quiet {
    fn boundary_velocity(&self, _d: Domain, _t: f64, _x: Vec2) -> Vec2 {
        [0.0, 0.0]
    }
    fn initial_velocity(&self, _d: Domain, _x: Vec2) -> Vec2 {
        [0.0, 0.0]
    }
}

/// Same smooth field on both sides, so the initial interface jump is zero.
#[derive(Debug)]
struct Matched;

impl Problem for Matched {
    fn boundary_velocity(&self, _d: Domain, _t: f64, _x: Vec2) -> Vec2 {
        [0.0, 0.0]
    }
    fn initial_velocity(&self, _d: Domain, x: Vec2) -> Vec2 {
        let s = (std::f64::consts::PI * x[0]).sin();
        [s * s * (1.0 - x[1] * x[1]), 0.0]
    }
}

fn config(kind: SchemeKind, kappa: f64, dt: f64, t_end: f64) -> SchemeConfig {
    let mut c = SchemeConfig::new(kind, 0.5, 0.1, kappa, dt, t_end);
    c.picard_tol = 1e-13;
    c
}

fn run(space: &Space, problem: &dyn Problem, cfg: SchemeConfig) -> Trajectory {
    let mut sim = Simulator::new(space, problem, cfg).unwrap();
    let mut traj = Trajectory::new();
    sim.run(|s, i| {
        traj.record(s, i);
        Control::Continue
    })
    .unwrap();
    traj
}

/// Without friction and eddy viscosity every scheme reduces to the same pair
/// of uncoupled backward-Euler Navier–Stokes steps.
#[test]
fn uncoupled_schemes_coincide() {
    let s = space(4);
    let prob = ManufacturedProblem::standard(1.0, 0.5, 0.1);
    let dt = 0.125;
    let reference = {
        let mut cfg = config(SchemeKind::Ga, 0.0, dt, 1.0);
        cfg.bootstrap = Bootstrap::Exact;
        let sim = Simulator::new(&s, &prob, cfg).unwrap();
        let s0 = sim.initial_state().unwrap();
        sim.exact_second_level(&s0).unwrap()
    };
    let mut results = Vec::new();
    for kind in SchemeKind::ALL {
        let cfg = config(kind, 0.0, dt, 1.0).with_nu_t(0.0);
        let mut sim = Simulator::new(&s, &prob, cfg).unwrap();
        let (mut st, _) = sim.step(&reference).unwrap();
        for _ in 0..2 {
            st = sim.step(&st).unwrap().0;
        }
        results.push((kind, st));
    }
    for (kind, st) in &results[1..] {
        let d = state_diff(&results[0].1, st);
        assert!(d <= 1e-12, "{kind} differs from ga by {d}");
    }
}

/// Zero eddy viscosity turns GA-VMS into GA, with friction switched on.
#[test]
fn vms_without_eddy_viscosity_is_ga() {
    let s = space(4);
    let prob = ManufacturedProblem::standard(1.0, 0.5, 0.1);
    let ga = run(&s, &prob, config(SchemeKind::Ga, 0.001, 0.125, 0.5));
    let vms = run(&s, &prob, config(SchemeKind::GaVms, 0.001, 0.125, 0.5).with_nu_t(0.0));
    let twm = run(&s, &prob, config(SchemeKind::Twm, 0.001, 0.125, 0.5));
    let twm_vms = run(&s, &prob, config(SchemeKind::TwmVms, 0.001, 0.125, 0.5).with_nu_t(0.0));
    for (a, b) in ga.states.iter().zip(&vms.states) {
        assert!(state_diff(a, b) <= 1e-12);
    }
    for (a, b) in twm.states.iter().zip(&twm_vms.states) {
        assert!(state_diff(a, b) <= 1e-12);
    }
}

#[test]
fn rest_state_stays_at_rest() {
    let s = space(3);
    for kind in SchemeKind::ALL {
        let cfg = config(kind, 0.01, 0.25, 1.0).with_nu_t(0.1);
        let traj = run(&s, &Quiet, cfg);
        for st in &traj.states {
            for d in Domain::BOTH {
                assert!(st.domain(d).u.iter().all(|v| *v == 0.0), "{kind}");
            }
        }
    }
}

#[test]
fn bootstrap_with_matched_traces_ignores_friction() {
    let s = space(4);
    let mut with = Simulator::new(&s, &Matched, config(SchemeKind::Ga, 0.5, 0.1, 1.0)).unwrap();
    let mut without = Simulator::new(&s, &Matched, config(SchemeKind::Ga, 0.0, 0.1, 1.0)).unwrap();
    let s0 = with.initial_state().unwrap();
    let (a, _) = with.imex_bootstrap(&s0).unwrap();
    let (b, _) = without.imex_bootstrap(&s0).unwrap();
    assert!(state_diff(&a, &b) <= 1e-14);
    assert!(a.domain(Domain::Atmosphere).u.iter().any(|v| v.abs() > 1e-3));
}

/// The start-up step is first-order accurate in time: halving Δt roughly
/// halves the error at `t = Δt` once the spatial error is negligible.
#[test]
fn bootstrap_is_first_order() {
    let s = space(16);
    let prob = ManufacturedProblem::standard(1.0, 0.5, 0.1);
    let table = BasisTable::with_degree(5);
    let mut errs = Vec::new();
    for dt in [0.2, 0.1, 0.05] {
        let mut sim = Simulator::new(&s, &prob, config(SchemeKind::Ga, 0.001, dt, 1.0)).unwrap();
        let s0 = sim.initial_state().unwrap();
        let (s1, _) = sim.imex_bootstrap(&s0).unwrap();
        let mut e2 = 0.0;
        for d in Domain::BOTH {
            let (l2, _) = s.domain(d).error_norms(
                &s1.domain(d).u,
                |x| prob.velocity(d, dt, x),
                |x| prob.gradient(d, dt, x),
                &table,
            );
            e2 += l2 * l2;
        }
        errs.push(e2.sqrt());
    }
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.6..=2.4).contains(&ratio), "errors {errs:?}");
    }
}

#[test]
fn observer_sees_every_level() {
    let s = space(2);
    let prob = SineVortexProblem;
    for kind in SchemeKind::ALL {
        let cfg = config(kind, 0.01, 0.125, 1.0).with_nu_t(0.05);
        let mut sim = Simulator::new(&s, &prob, cfg.clone()).unwrap();
        let mut calls = 0;
        let summary = sim
            .run(|_, _| {
                calls += 1;
                Control::Continue
            })
            .unwrap();
        assert_eq!(calls, summary.steps + kind.initial_levels(), "{kind}");
        assert_eq!(summary.final_level, 8);
        assert!((summary.final_time - 1.0).abs() < 1e-12);

        // T = Δt ends at level 1 after exactly one advance.
        let mut one = cfg.clone();
        one.t_end = one.dt;
        let mut sim = Simulator::new(&s, &prob, one).unwrap();
        let mut levels = Vec::new();
        let summary = sim
            .run(|st, _| {
                levels.push(st.level);
                Control::Continue
            })
            .unwrap();
        assert_eq!(levels, vec![0, 1], "{kind}");
        assert_eq!(summary.final_level, 1);
    }
}

#[test]
fn observer_can_stop_the_run() {
    let s = space(2);
    let mut sim = Simulator::new(&s, &SineVortexProblem, config(SchemeKind::GaVms, 0.01, 0.125, 1.0)).unwrap();
    let summary = sim
        .run(|st, _| if st.level == 3 { Control::Stop } else { Control::Continue })
        .unwrap();
    assert!(summary.stopped);
    assert_eq!(summary.final_level, 3);
}

#[test]
fn concurrent_ga_is_bitwise_identical() {
    let s = space(6);
    let prob = ManufacturedProblem::standard(1.0, 0.5, 0.1);
    for kind in [SchemeKind::Ga, SchemeKind::GaVms, SchemeKind::GaVmsAlt] {
        let cfg = config(kind, 0.001, 0.125, 0.75).with_nu_t(0.2);
        let serial = run(&s, &prob, cfg.clone());
        let mut par = cfg;
        par.concurrent = true;
        let parallel = run(&s, &prob, par);
        assert_eq!(serial.states, parallel.states, "{kind}");
    }
}

#[test]
fn rejects_bad_configurations() {
    let s = space(1);
    let prob = SineVortexProblem;
    let bad = [
        SchemeConfig::new(SchemeKind::Ga, 0.0, 0.1, 0.0, 0.1, 1.0),
        SchemeConfig::new(SchemeKind::Ga, 0.5, 0.1, -1.0, 0.1, 1.0),
        SchemeConfig::new(SchemeKind::Ga, 0.5, 0.1, 0.0, 0.3, 1.0),
        SchemeConfig::new(SchemeKind::Ga, 0.5, 0.1, 0.0, 0.0, 1.0),
        SchemeConfig::new(SchemeKind::GaVms, 0.5, 0.1, 0.0, 0.1, 1.0).with_nu_t(-1.0),
    ];
    for cfg in bad {
        assert!(Simulator::new(&s, &prob, cfg).is_err());
    }
    // Exact start-up needs a closed-form solution.
    let mut cfg = SchemeConfig::new(SchemeKind::Ga, 0.5, 0.1, 0.0, 0.5, 1.0);
    cfg.bootstrap = Bootstrap::Exact;
    let mut sim = Simulator::new(&s, &prob, cfg).unwrap();
    assert!(sim.run(|_, _| Control::Continue).is_err());
}

#[test]
fn scheme_names_round_trip() {
    for kind in SchemeKind::ALL {
        assert_eq!(kind.name().parse::<SchemeKind>().unwrap(), kind);
    }
    assert!("gavms".parse::<SchemeKind>().is_err());
}
