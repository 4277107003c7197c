use aoflow::interface::{assemble_interface_blocks, sample_interface_trace, InterfaceVariant};
use aoflow::manufactured::ManufacturedProblem;
use aoflow::mesh::{generate_two_domain_mesh, Domain};
use aoflow::problem::Problem;
use aoflow::quadrature::edge_quadrature;
use aoflow::space::{p2_edge_values, Space};
use proptest::prelude::*;

mod common;
use common::fd_residual;

fn space(n: usize) -> Space {
    Space::new(generate_two_domain_mesh(n).unwrap())
}

#[test]
fn closed_form_reference_value() {
    let p = ManufacturedProblem::standard(1.0, 0.5, 0.1);
    let u = p.velocity(Domain::Atmosphere, 0.0, [0.5, 0.0]);
    // α X₂ + β X₁ = 0.5·(1/16) + 0.5/√0.001 · 1/4
    let expect = 0.5 / 16.0 + 0.5 / 0.001f64.sqrt() / 4.0;
    assert!((u[0] - expect).abs() < 1e-13);
    assert!((u[0] - 3.98410).abs() < 5e-6);
    assert_eq!(u[1], 0.0);
}

#[test]
fn solution_and_forcing_decay() {
    let p = ManufacturedProblem::standard(1.0, 0.5, 0.1);
    for d in Domain::BOTH {
        for x in [[0.3, 0.4], [0.8, -0.6]] {
            let u = p.velocity(d, 60.0, x);
            assert!(u[0].abs() < 1e-11 && u[1].abs() < 1e-11);
            let f = p.forcing(d, 50.0, x);
            let bound = (-0.5f64 * 50.0).exp() * 1e3;
            assert!(f[0].abs() <= bound && f[1].abs() <= bound);
        }
    }
}

/// The trace at interface quadrature points equals the volume field of the
/// adjacent element evaluated at the same point.
#[test]
fn trace_matches_volume_evaluation() {
    let s = space(8);
    let p = ManufacturedProblem::standard(1.0, 0.5, 0.1);
    let u = Domain::BOTH.map(|d| s.domain(d).interpolate_velocity(|x| p.velocity(d, 0.0, x)));
    let tr = sample_interface_trace(&s, [&u[0], &u[1]], None);
    assert_eq!(tr.points.len(), 8 * 3);
    for pt in &tr.points {
        for d in Domain::BOTH {
            let (v, _) = s.domain(d).evaluate_velocity(&u[d.index()], pt.x).unwrap();
            let t = pt.velocity[d.index()];
            assert!((v[0] - t[0]).abs() < 1e-12 && (v[1] - t[1]).abs() < 1e-12);
        }
        // Normal component of the interpolant vanishes on y = 0.
        assert_eq!(pt.velocity[0][1], 0.0);
    }
}

/// Fields quadratic along the interface are traced exactly.
#[test]
fn trace_of_quadratic_field_is_exact() {
    let s = space(8);
    let f = |d: Domain, x: [f64; 2]| match d {
        Domain::Atmosphere => [x[0] * (1.0 - x[0]) + x[1], 0.3 * x[0]],
        Domain::Ocean => [2.0 * x[0] * x[0] - 1.0, -x[0] + x[1]],
    };
    let u = Domain::BOTH.map(|d| s.domain(d).interpolate_velocity(|x| f(d, x)));
    let tr = sample_interface_trace(&s, [&u[0], &u[1]], None);
    for pt in &tr.points {
        let a = f(Domain::Atmosphere, pt.x);
        let o = f(Domain::Ocean, pt.x);
        let jump = ((a[0] - o[0]).powi(2) + (a[1] - o[1]).powi(2)).sqrt();
        assert!((pt.velocity[0][0] - a[0]).abs() < 1e-12 && (pt.velocity[1][0] - o[0]).abs() < 1e-12);
        assert!((pt.jump - jump).abs() < 1e-12);
    }
}

#[test]
fn zero_jump_contributes_nothing() {
    let s = space(4);
    let u = Domain::BOTH.map(|d| s.domain(d).interpolate_velocity(|x| [x[0] * x[0], 0.0]));
    let tr = sample_interface_trace(&s, [&u[0], &u[1]], Some([&u[0], &u[1]]));
    for v in [InterfaceVariant::GeometricAverage, InterfaceVariant::Imex, InterfaceVariant::Monolithic] {
        let c = assemble_interface_blocks(&s, &tr, v, [0.7, 0.7]).unwrap();
        assert!(c.own.iter().chain(c.cross.iter()).flatten().all(|t| t.2 == 0.0));
        assert!(c.rhs.iter().flatten().all(|v| *v == 0.0));
    }
}

/// With one interface edge and a constant jump of 2 the implicit block is
/// `2κ` times the P2 edge mass matrix `L/30·[[4,−1,2],[−1,4,2],[2,2,16]]`,
/// here computed with an independent 5-point Gauss rule.
#[test]
fn single_pair_block_is_scaled_edge_mass() {
    let s = space(1);
    let kappa = 0.25;
    let u1 = s.domain(Domain::Atmosphere).interpolate_velocity(|_| [1.0, 0.0]);
    let u2 = s.domain(Domain::Ocean).interpolate_velocity(|_| [-1.0, 0.0]);
    let tr = sample_interface_trace(&s, [&u1, &u2], Some([&u1, &u2]));
    let c = assemble_interface_blocks(&s, &tr, InterfaceVariant::GeometricAverage, [kappa, kappa]).unwrap();
    let edge = s.interface()[0];
    let g5 = edge_quadrature(5).unwrap();
    let closed = [[4.0, -1.0, 2.0], [-1.0, 4.0, 2.0], [2.0, 2.0, 16.0]];
    for d in Domain::BOTH {
        let nodes = edge.nodes(d);
        let mut block = [[0.0; 3]; 3];
        for &(r, col, v) in &c.own[d.index()] {
            let a = nodes.iter().position(|n| *n == r).unwrap();
            let b = nodes.iter().position(|n| *n == col).unwrap();
            block[a][b] += v;
        }
        for a in 0..3 {
            for b in 0..3 {
                let oracle = 2.0 * kappa * edge.length() * g5.integrate_edge(|s| p2_edge_values(s)[a] * p2_edge_values(s)[b]);
                assert!((block[a][b] - oracle).abs() < 1e-14);
                assert!((oracle - 2.0 * kappa * closed[a][b] / 30.0).abs() < 1e-14);
            }
        }
    }
}

fn divergence(p: &ManufacturedProblem, d: Domain, t: f64, x: [f64; 2]) -> f64 {
    let g = p.gradient(d, t, x);
    g[0][0] + g[1][1]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn forcing_matches_finite_differences(
        x in 0.01f64..0.99, y in 0.01f64..0.99, t in 0.0f64..2.0, low in any::<bool>(), atm in any::<bool>()
    ) {
        let p = if low {
            ManufacturedProblem::standard(1.0 / 5e-4, 5e-4, 1e-4)
        } else {
            ManufacturedProblem::standard(1.0, 0.5, 0.1)
        };
        let (d, y) = if atm { (Domain::Atmosphere, y) } else { (Domain::Ocean, -y) };
        let (r, scale) = fd_residual(&p, d, t, [x, y]);
        prop_assert!(r <= 1e-6 * (1.0 + scale), "residual {} at scale {}", r, scale);
    }

    #[test]
    fn manufactured_field_is_solenoidal(x in 0.0f64..1.0, y in 0.0f64..1.0, t in 0.0f64..5.0) {
        let p = ManufacturedProblem::standard(1.0, 0.5, 0.1);
        prop_assert!(divergence(&p, Domain::Atmosphere, t, [x, y]).abs() <= 1e-12);
        prop_assert!(divergence(&p, Domain::Ocean, t, [x, -y]).abs() <= 1e-12);
        // Gradient agrees with central differences of the velocity.
        let h = 1e-6;
        for d in Domain::BOTH {
            let pt = if d == Domain::Atmosphere { [x, y] } else { [x, -y] };
            let g = p.gradient(d, t, pt);
            for k in 0..2 {
                let mut a = pt;
                let mut b = pt;
                a[k] += h;
                b[k] -= h;
                for c in 0..2 {
                    let fd = (p.velocity(d, t, a)[c] - p.velocity(d, t, b)[c]) / (2.0 * h);
                    prop_assert!((fd - g[c][k]).abs() <= 1e-6 * (1.0 + g[c][k].abs()));
                }
            }
        }
    }

    #[test]
    fn implicit_block_is_positive_semidefinite(
        seed in prop::collection::vec(-1.0f64..1.0, 40), x in prop::collection::vec(-1.0f64..1.0, 40)
    ) {
        let s = space(3);
        let u = Domain::BOTH.map(|d| {
            let n = s.domain(d).n_velocity_dofs();
            seed.iter().cycle().skip(d.index()).take(n).copied().collect::<Vec<_>>()
        });
        let tr = sample_interface_trace(&s, [&u[0], &u[1]], None);
        let c = assemble_interface_blocks(&s, &tr, InterfaceVariant::Imex, [0.3, 0.3]).unwrap();
        for d in Domain::BOTH {
            let n = s.domain(d).n_nodes();
            let v: Vec<f64> = x.iter().cycle().take(n).copied().collect();
            let mut q = 0.0;
            let mut sym = std::collections::HashMap::new();
            for &(a, b, w) in &c.own[d.index()] {
                q += v[a] * w * v[b];
                *sym.entry((a, b)).or_insert(0.0) += w;
            }
            prop_assert!(q >= -1e-14);
            for (&(a, b), w) in &sym {
                prop_assert!((w - sym.get(&(b, a)).copied().unwrap_or(0.0)).abs() <= 1e-15);
            }
        }
    }
}
