use aoflow::diagnostics::{
    accumulated_errors, convergence_rates, energy_observe, norm_trace, verify_discrete_energy_law,
    verify_stability_bound, ConvergenceEntry, RowStatus, Trajectory,
};
use aoflow::error::DiagnosticsError;
use aoflow::manufactured::ManufacturedProblem;
use aoflow::mesh::{generate_two_domain_mesh, Domain};
use aoflow::problem::{Problem, SineVortexProblem};
use aoflow::quadrature::edge_quadrature;
use aoflow::schemes::{Bootstrap, Control, DomainState, SchemeConfig, SchemeKind, Simulator, State, StepInfo};
use aoflow::space::{Mat2, Space, Vec2};

fn space(n: usize) -> Space {
    Space::new(generate_two_domain_mesh(n).unwrap())
}

fn manufactured_run(kind: SchemeKind, n: usize, dt: f64, t_end: f64) -> (Space, ManufacturedProblem, SchemeConfig, Trajectory) {
    let s = space(n);
    let prob = ManufacturedProblem::standard(1.0, 0.5, 0.1);
    let mut cfg = SchemeConfig::new(kind, 0.5, 0.1, 0.001, dt, t_end).with_nu_t(s.h());
    cfg.picard_tol = 1e-12;
    cfg.bootstrap = Bootstrap::Exact;
    let traj = {
        let mut sim = Simulator::new(&s, &prob, cfg.clone()).unwrap();
        let mut traj = Trajectory::new();
        sim.run(|st, i| {
            traj.record(st, i);
            Control::Continue
        })
        .unwrap();
        traj
    };
    (s, prob, cfg, traj)
}

fn zero_state(space: &Space, level: usize, t: f64) -> State {
    let dom = |d: Domain| {
        let ds = space.domain(d);
        DomainState {
            u: vec![0.0; ds.n_velocity_dofs()],
            u_prev: None,
            p: vec![0.0; ds.n_pressure_dofs()],
            g: Some(vec![0.0; ds.n_large_scale_dofs()]),
        }
    };
    State {
        domains: [dom(Domain::Atmosphere), dom(Domain::Ocean)],
        level,
        t,
    }
}

fn zero_trajectory(space: &Space, levels: usize, dt: f64) -> Trajectory {
    let mut traj = Trajectory::new();
    for k in 0..levels {
        traj.record(&zero_state(space, k, k as f64 * dt), &StepInfo::default());
    }
    traj
}

#[test]
fn energy_law_holds_for_ga_family() {
    for kind in [SchemeKind::GaVms, SchemeKind::Ga, SchemeKind::GaVmsAlt] {
        let (s, prob, cfg, traj) = manufactured_run(kind, 8, 0.125, 1.0);
        let check = verify_discrete_energy_law(&s, &traj, &cfg, &prob).unwrap();
        assert_eq!(check.steps, 7);
        assert!(check.residual <= 1e-7, "{kind}: {check:?}");
    }
}

#[test]
fn energy_law_detects_corruption() {
    let (s, prob, cfg, mut traj) = manufactured_run(SchemeKind::GaVms, 8, 0.125, 1.0);
    for v in traj.states[4].domains[0].u.iter_mut() {
        *v += 1e-3;
    }
    let check = verify_discrete_energy_law(&s, &traj, &cfg, &prob).unwrap();
    assert!(check.residual > 1e-5, "{check:?}");
}

#[test]
fn energy_law_of_zero_trajectory() {
    let s = space(3);
    let cfg = SchemeConfig::new(SchemeKind::GaVms, 0.5, 0.1, 0.1, 0.25, 1.0).with_nu_t(0.2);
    let check = verify_discrete_energy_law(&s, &zero_trajectory(&s, 5, 0.25), &cfg, &SineVortexProblem).unwrap();
    assert_eq!(check.residual, 0.0);
    assert_eq!(check.lhs, 0.0);
}

#[test]
fn energy_law_needs_projections() {
    let s = space(2);
    let cfg = SchemeConfig::new(SchemeKind::GaVms, 0.5, 0.1, 0.1, 0.25, 1.0).with_nu_t(0.2);
    let mut traj = zero_trajectory(&s, 3, 0.25);
    traj.states[1].domains[0].g = None;
    assert!(matches!(
        verify_discrete_energy_law(&s, &traj, &cfg, &SineVortexProblem),
        Err(DiagnosticsError::MissingProjection)
    ));
}

#[test]
fn stability_bound_for_several_time_steps() {
    for kind in [SchemeKind::Ga, SchemeKind::GaVms] {
        for m in [4, 8, 16, 32] {
            let (s, prob, cfg, traj) = manufactured_run(kind, 8, 1.0 / m as f64, 1.0);
            let check = verify_stability_bound(&s, &traj, &cfg, &prob).unwrap();
            assert!(check.satisfied, "{kind} dt=1/{m}: {check:?}");
            assert!(check.lhs > 0.0);
        }
    }
}

#[test]
fn stability_bound_without_forcing() {
    let s = space(8);
    let mut cfg = SchemeConfig::new(SchemeKind::GaVms, 1.5e-3, 1e-4, 1e-3, 0.05, 1.0).with_nu_t(s.h());
    cfg.picard_tol = 1e-12;
    let mut sim = Simulator::new(&s, &SineVortexProblem, cfg.clone()).unwrap();
    let mut traj = Trajectory::new();
    sim.run(|st, i| {
        traj.record(st, i);
        Control::Continue
    })
    .unwrap();
    let check = verify_stability_bound(&s, &traj, &cfg, &SineVortexProblem).unwrap();
    assert!(check.satisfied, "{check:?}");

    let zero = verify_stability_bound(&s, &zero_trajectory(&s, 4, 0.05), &cfg, &SineVortexProblem).unwrap();
    assert_eq!((zero.lhs, zero.rhs), (0.0, 0.0));
    assert!(zero.satisfied);
}

#[test]
fn energy_report_of_zero_trajectory() {
    let s = space(2);
    let cfg = SchemeConfig::new(SchemeKind::Ga, 0.5, 0.1, 0.1, 0.25, 1.0);
    let r = energy_observe(&s, &zero_trajectory(&s, 5, 0.25), &cfg);
    assert_eq!(r.t.len(), 5);
    assert!(r.aed.iter().chain(r.ke.iter().flatten()).chain(r.dissipation.iter().flatten()).all(|v| *v == 0.0));
}

/// One uncoupled Stokes-like step tested with `u¹`:
/// `‖u⁰‖² − ‖u¹‖² − 2Δtν‖∇u¹‖² = ‖u¹ − u⁰‖²`.
#[test]
fn one_step_energy_balance() {
    let s = space(8);
    let cfg = SchemeConfig::new(SchemeKind::Ga, 0.05, 0.02, 0.0, 0.1, 0.1);
    let mut sim = Simulator::new(&s, &SineVortexProblem, cfg.clone()).unwrap();
    let mut traj = Trajectory::new();
    sim.run(|st, i| {
        traj.record(st, i);
        Control::Continue
    })
    .unwrap();
    assert_eq!(traj.len(), 2);
    let r = energy_observe(&s, &traj, &cfg);
    let mut incr = 0.0;
    for d in Domain::BOTH {
        let a = sim.assembler(d);
        let diff: Vec<f64> = traj.states[1].domain(d).u.iter().zip(&traj.states[0].domain(d).u).map(|(x, y)| x - y).collect();
        incr += a.l2_norm_sq(&diff);
    }
    let balance = r.initial_total() - (r.total(Domain::Atmosphere)[1] + r.total(Domain::Ocean)[1]);
    assert!(incr > 1e-6);
    assert!((balance - incr).abs() <= 1e-10 * r.initial_total(), "{balance} vs {incr}");
}

/// Solution quadratic in space, so its interpolant is exact.
#[derive(Debug)]
struct Quadratic;

impl Problem for Quadratic {
    fn boundary_velocity(&self, d: Domain, t: f64, x: Vec2) -> Vec2 {
        self.exact_velocity(d, t, x).unwrap()
    }
    fn initial_velocity(&self, d: Domain, x: Vec2) -> Vec2 {
        self.exact_velocity(d, 0.0, x).unwrap()
    }
    fn exact_velocity(&self, _d: Domain, t: f64, x: Vec2) -> Option<Vec2> {
        Some([(-t).exp() * x[1] * x[1], (-t).exp() * x[0] * x[1]])
    }
    fn exact_gradient(&self, _d: Domain, t: f64, x: Vec2) -> Option<Mat2> {
        let e = (-t).exp();
        Some([[0.0, 2.0 * e * x[1]], [e * x[1], e * x[0]]])
    }
}

#[test]
fn exact_trajectory_has_no_error() {
    let s = space(4);
    let dt = 0.25;
    let mut traj = Trajectory::new();
    for k in 0..5 {
        let t = k as f64 * dt;
        let mut st = zero_state(&s, k, t);
        for d in Domain::BOTH {
            st.domains[d.index()].u = s.domain(d).interpolate_velocity(|x| Quadratic.exact_velocity(d, t, x).unwrap());
        }
        traj.record(&st, &StepInfo::default());
    }
    let (l2, h1) = accumulated_errors(&s, &traj, &Quadratic, dt);
    assert!(l2 <= 1e-10 && h1 <= 1e-10);
}

/// Zero trajectory: the error is the space-time norm of the exact solution,
/// computed here with composite tensor Gauss quadrature on each square.
#[test]
fn zero_trajectory_error_is_solution_norm() {
    let s = space(4);
    let prob = ManufacturedProblem::standard(1.0, 0.5, 0.1);
    let dt = 0.25;
    let (l2, _) = accumulated_errors(&s, &zero_trajectory(&s, 5, dt), &prob, dt);
    let g = edge_quadrature(5).unwrap();
    let k = 8;
    let mut oracle = 0.0;
    for level in 1..5 {
        let t = level as f64 * dt;
        for d in Domain::BOTH {
            let y0 = if d == Domain::Atmosphere { 0.0 } else { -1.0 };
            for i in 0..k {
                for j in 0..k {
                    for a in 0..g.len() {
                        for b in 0..g.len() {
                            let x = (i as f64 + g.abscissa(a)) / k as f64;
                            let y = y0 + (j as f64 + g.abscissa(b)) / k as f64;
                            let u = prob.velocity(d, t, [x, y]);
                            oracle += dt * g.weights[a] * g.weights[b] / (k * k) as f64 * (u[0] * u[0] + u[1] * u[1]);
                        }
                    }
                }
            }
        }
    }
    assert!((l2 - oracle.sqrt()).abs() <= 1e-10 * oracle.sqrt());
}

#[test]
fn ga_errors_at_n8_match_reference_magnitude() {
    let (s, prob, cfg, traj) = manufactured_run(SchemeKind::Ga, 8, 0.125, 1.0);
    let (l2, _) = accumulated_errors(&s, &traj, &prob, cfg.dt);
    let paper = 1.14578e-3;
    assert!(l2 / paper <= 2.0 && paper / l2 <= 2.0, "{l2}");
}

fn entry(n: usize, l2: f64, h1: f64, status: RowStatus) -> ConvergenceEntry {
    ConvergenceEntry {
        n,
        h: 1.0 / n as f64,
        dt: 1.0 / n as f64,
        err_l2l2: l2,
        err_l2h1: h1,
        status,
    }
}

#[test]
fn rates() {
    let t = convergence_rates(&[entry(8, 1.14578e-3, 1.0, RowStatus::Ok), entry(16, 5.73429e-4, 1.0, RowStatus::Ok)]).unwrap();
    assert!((t.rows[1].rate_l2.unwrap() - 1.00).abs() < 0.005);
    assert_eq!(t.rows[1].rate_h1, Some(0.0));
    assert_eq!(t.rows[0].rate_l2, None);

    let single = convergence_rates(&[entry(8, 1.0, 1.0, RowStatus::Ok)]).unwrap();
    assert_eq!(single.rows.len(), 1);
    assert_eq!(single.last().unwrap().rate_h1, None);

    let div = convergence_rates(&[entry(8, 1.0, 1.0, RowStatus::Ok), entry(16, f64::NAN, f64::NAN, RowStatus::Diverged)]).unwrap();
    assert_eq!(div.rows[1].rate_l2, None);

    assert!(matches!(
        convergence_rates(&[entry(8, 1.0, 1.0, RowStatus::Ok), entry(32, 1.0, 1.0, RowStatus::Ok)]),
        Err(DiagnosticsError::NonDoubling(8, 32))
    ));
    assert!(matches!(convergence_rates(&[]), Err(DiagnosticsError::TooFewRows)));
}

#[test]
fn norm_traces() {
    let s = space(2);
    let zero = norm_trace(&s, &zero_trajectory(&s, 4, 0.5));
    assert!(zero.norms.iter().flatten().all(|v| *v == 0.0));
    assert_eq!(zero.t, vec![0.0, 0.5, 1.0, 1.5]);

    let mut traj = Trajectory::new();
    for k in 0..3 {
        let mut st = zero_state(&s, k, k as f64);
        for d in Domain::BOTH {
            st.domains[d.index()].u = s.domain(d).interpolate_velocity(|_| [1.0, 0.0]);
        }
        traj.record(&st, &StepInfo::default());
    }
    let c = norm_trace(&s, &traj);
    for n in c.norms.iter().flatten() {
        assert!((n - 1.0).abs() < 1e-14);
    }
}
