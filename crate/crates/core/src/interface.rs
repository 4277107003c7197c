//! Interface traces and the nonlinear friction terms coupling the domains.
//!
//! All interface integrals use the same Gauss points on each paired edge,
//! so both domains see identical jump weights.

use crate::error::AssemblyError;
use crate::mesh::Domain;
use crate::quadrature::edge_quadrature;
use crate::space::{p2_edge_values, Space, Vec2};

pub const INTERFACE_GAUSS_POINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub edge: usize,
    /// Position along the edge in `[0, 1]`.
    pub s: f64,
    /// Quadrature weight times edge length.
    pub weight: f64,
    pub x: Vec2,
    /// Velocity at level n on each side, indexed by `Domain::index`.
    pub velocity: [Vec2; 2],
    pub velocity_prev: Option<[Vec2; 2]>,
    /// `|[u^n]|`.
    pub jump: f64,
    /// `|[u^{n−1}]|`.
    pub jump_prev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceTrace {
    pub points: Vec<TracePoint>,
}

fn trace_value(nodes: [usize; 3], u: &[f64], phi: &[f64; 3]) -> Vec2 {
    let mut v = [0.0; 2];
    for k in 0..3 {
        v[0] += phi[k] * u[2 * nodes[k]];
        v[1] += phi[k] * u[2 * nodes[k] + 1];
    }
    v
}

fn jump(v: &[Vec2; 2]) -> f64 {
    ((v[0][0] - v[1][0]).powi(2) + (v[0][1] - v[1][1]).powi(2)).sqrt()
}

/// Samples both traces at level n and, when given, level n−1.
pub fn sample_interface_trace(space: &Space, u: [&[f64]; 2], u_prev: Option<[&[f64]; 2]>) -> InterfaceTrace {
    let rule = edge_quadrature(INTERFACE_GAUSS_POINTS).expect("supported edge rule");
    let mut points = Vec::with_capacity(space.interface().len() * rule.len());
    for (edge, e) in space.interface().iter().enumerate() {
        let len = e.length();
        for q in 0..rule.len() {
            let s = rule.abscissa(q);
            let phi = p2_edge_values(s);
            let sample = |u: [&[f64]; 2]| -> [Vec2; 2] {
                [
                    trace_value(e.atmosphere, u[0], &phi),
                    trace_value(e.ocean, u[1], &phi),
                ]
            };
            let velocity = sample(u);
            let velocity_prev = u_prev.map(sample);
            points.push(TracePoint {
                edge,
                s,
                weight: rule.weights[q] * len,
                x: e.point(s),
                velocity,
                velocity_prev,
                jump: jump(&velocity),
                jump_prev: velocity_prev.as_ref().map(jump),
            });
        }
    }
    InterfaceTrace { points }
}

impl InterfaceTrace {
    pub fn max_jump(&self) -> f64 {
        self.points.iter().map(|p| p.jump).fold(0.0, f64::max)
    }

    /// `∫_I w(point) |a|² ds` for a velocity `a` sampled from `u` on side `d`.
    pub fn weighted_square(&self, space: &Space, d: Domain, u: &[f64], w: impl Fn(&TracePoint) -> f64) -> f64 {
        let mut s = 0.0;
        for p in &self.points {
            let nodes = space.interface()[p.edge].nodes(d);
            let v = trace_value(nodes, u, &p2_edge_values(p.s));
            s += p.weight * w(p) * (v[0] * v[0] + v[1] * v[1]);
        }
        s
    }

    /// Trace of `u` on side `d` at every point.
    pub fn values(&self, space: &Space, d: Domain, u: &[f64]) -> Vec<Vec2> {
        self.points
            .iter()
            .map(|p| trace_value(space.interface()[p.edge].nodes(d), u, &p2_edge_values(p.s)))
            .collect()
    }
}

/// Which interface treatment to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterfaceVariant {
    /// Implicit own term, lagged geometric-mean cross term.
    GeometricAverage,
    /// Implicit own term, cross term with the level-n jump and velocity.
    Imex,
    /// Implicit jump `κ|[u^n]|(u_i − u_j)` coupling both domains.
    Monolithic,
}

/// Node-level interface contributions for both domains.
///
/// `own[d]` holds scalar triplets `(node, node, value)` in domain `d`;
/// `cross[d]` holds `(node in d, node in other, value)`; `rhs[d]` is a
/// vector-dof right-hand side.
#[derive(Debug, Clone, Default)]
pub struct InterfaceContribution {
    pub own: [Vec<(usize, usize, f64)>; 2],
    pub cross: [Vec<(usize, usize, f64)>; 2],
    pub rhs: [Vec<f64>; 2],
}

/// Assembles the friction terms. `coefficient[d]` multiplies every
/// contribution tested in domain `d` (κ, or κ(ν_d+ν_T)/ν_d for the
/// alternative scaling).
pub fn assemble_interface_blocks(
    space: &Space,
    trace: &InterfaceTrace,
    variant: InterfaceVariant,
    coefficient: [f64; 2],
) -> Result<InterfaceContribution, AssemblyError> {
    let mut out = InterfaceContribution {
        own: [Vec::new(), Vec::new()],
        cross: [Vec::new(), Vec::new()],
        rhs: [
            vec![0.0; space.domain(Domain::Atmosphere).n_velocity_dofs()],
            vec![0.0; space.domain(Domain::Ocean).n_velocity_dofs()],
        ],
    };
    for p in &trace.points {
        let phi = p2_edge_values(p.s);
        let edge = &space.interface()[p.edge];
        let rhs_weight = match variant {
            InterfaceVariant::GeometricAverage => {
                let prev = p.jump_prev.ok_or(AssemblyError::MissingLag)?;
                (p.jump * prev).sqrt()
            }
            InterfaceVariant::Imex => p.jump,
            InterfaceVariant::Monolithic => 0.0,
        };
        for d in Domain::BOTH {
            let i = d.index();
            let k = coefficient[i];
            if k == 0.0 {
                continue;
            }
            let own = edge.nodes(d);
            let other = edge.nodes(d.other());
            let w = k * p.weight * p.jump;
            if w != 0.0 {
                for a in 0..3 {
                    for b in 0..3 {
                        out.own[i].push((own[a], own[b], w * phi[a] * phi[b]));
                        if variant == InterfaceVariant::Monolithic {
                            out.cross[i].push((own[a], other[b], -w * phi[a] * phi[b]));
                        }
                    }
                }
            }
            if rhs_weight != 0.0 {
                let uj = p.velocity[d.other().index()];
                let s = k * p.weight * rhs_weight;
                for a in 0..3 {
                    out.rhs[i][2 * own[a]] += s * phi[a] * uj[0];
                    out.rhs[i][2 * own[a] + 1] += s * phi[a] * uj[1];
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_two_domain_mesh;

    fn space(n: usize) -> Space {
        Space::new(generate_two_domain_mesh(n).unwrap())
    }

    fn constant(space: &Space, d: Domain, v: Vec2) -> Vec<f64> {
        space.domain(d).interpolate_velocity(|_| v)
    }

    #[test]
    fn equal_traces_have_zero_jump() {
        let s = space(3);
        let u1 = s.domain(Domain::Atmosphere).interpolate_velocity(|x| [x[0] * (1.0 - x[0]), 0.0]);
        let u2 = s.domain(Domain::Ocean).interpolate_velocity(|x| [x[0] * (1.0 - x[0]), x[1]]);
        let tr = sample_interface_trace(&s, [&u1, &u2], Some([&u1, &u2]));
        assert!(tr.points.iter().all(|p| p.jump < 1e-15 && p.jump_prev == Some(p.jump)));
        let c = assemble_interface_blocks(&s, &tr, InterfaceVariant::GeometricAverage, [1.0, 1.0]).unwrap();
        assert!(c.own.iter().all(|o| o.is_empty()));
        assert!(c.rhs.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn opposite_constants_jump_two() {
        let s = space(2);
        let u1 = constant(&s, Domain::Atmosphere, [1.0, 0.0]);
        let u2 = constant(&s, Domain::Ocean, [-1.0, 0.0]);
        let tr = sample_interface_trace(&s, [&u1, &u2], None);
        assert_eq!(tr.points.len(), 2 * INTERFACE_GAUSS_POINTS);
        assert!(tr.points.iter().all(|p| (p.jump - 2.0).abs() < 1e-15));
    }

    #[test]
    fn missing_lag_is_an_error() {
        let s = space(1);
        let u1 = constant(&s, Domain::Atmosphere, [1.0, 0.0]);
        let u2 = constant(&s, Domain::Ocean, [0.0, 0.0]);
        let tr = sample_interface_trace(&s, [&u1, &u2], None);
        assert_eq!(
            assemble_interface_blocks(&s, &tr, InterfaceVariant::GeometricAverage, [1.0, 1.0]).unwrap_err(),
            AssemblyError::MissingLag
        );
    }

    #[test]
    fn weights_sum_to_interface_length() {
        let s = space(5);
        let u = constant(&s, Domain::Atmosphere, [0.0, 0.0]);
        let v = constant(&s, Domain::Ocean, [0.0, 0.0]);
        let tr = sample_interface_trace(&s, [&u, &v], None);
        assert!((tr.points.iter().map(|p| p.weight).sum::<f64>() - 1.0).abs() < 1e-14);
    }
}
