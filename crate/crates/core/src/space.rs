//! Taylor–Hood (P2 velocity / P1 pressure) spaces, the P1 tensor space that
//! receives projected gradients, constraints, interpolation and norms.
//!
//! Velocity degrees of freedom are interleaved: dof `2·node + c` is
//! component `c` at P2 node `node`. Nodes `0..V` are the mesh vertices,
//! nodes `V..V+E` are edge midpoints. Pressure dof `q` lives at vertex `q`,
//! and large-scale tensor dof `4·q + 2·c + d` holds `∂u_c/∂x_d` at vertex `q`.

use std::collections::HashMap;

use crate::error::SpaceError;
use crate::mesh::{BoundaryTag, CoupledMesh, Domain, DomainMesh};
use crate::quadrature::{conical_product_rule, triangle_quadrature, QuadratureRule};

/// Local edge `k` of a triangle joins local vertices `EDGE_VERTICES[k]`.
pub const EDGE_VERTICES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

/// Volume quadrature degree used by every assembly routine.
pub const DEFAULT_QUADRATURE_DEGREE: usize = 5;

/// Degree of the rule behind error norms. The manufactured velocity is a
/// quintic, so squared errors against P2 fields are integrated exactly.
pub const ERROR_QUADRATURE_DEGREE: usize = 10;

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

/// P2 basis values at reference point `(ξ, η)`.
pub fn p2_values(xi: f64, eta: f64) -> [f64; 6] {
    let l = [1.0 - xi - eta, xi, eta];
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// P2 basis gradients with respect to `(ξ, η)`.
pub fn p2_reference_gradients(xi: f64, eta: f64) -> [Vec2; 6] {
    let l = [1.0 - xi - eta, xi, eta];
    let dl: [Vec2; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
    let mut g = [[0.0; 2]; 6];
    for i in 0..3 {
        for d in 0..2 {
            g[i][d] = (4.0 * l[i] - 1.0) * dl[i][d];
        }
    }
    for (k, [i, j]) in EDGE_VERTICES.iter().copied().enumerate() {
        for d in 0..2 {
            g[3 + k][d] = 4.0 * (dl[i][d] * l[j] + l[i] * dl[j][d]);
        }
    }
    g
}

pub fn p1_values(xi: f64, eta: f64) -> [f64; 3] {
    [1.0 - xi - eta, xi, eta]
}

pub const P1_REFERENCE_GRADIENTS: [Vec2; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

/// P2 trace basis on an edge parametrised by `s ∈ [0,1]`:
/// (start vertex, end vertex, midpoint).
pub fn p2_edge_values(s: f64) -> [f64; 3] {
    [(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0), 4.0 * s * (1.0 - s)]
}

/// Affine map from the reference triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub origin: Vec2,
    /// Columns are the edge vectors `x₁ − x₀` and `x₂ − x₀`.
    pub jacobian: Mat2,
    /// `J⁻ᵀ`, mapping reference gradients to physical gradients.
    pub inverse_transpose: Mat2,
    pub det: f64,
}

impl ElementGeometry {
    pub fn new(p: [Vec2; 3]) -> Self {
        let j = [[p[1][0] - p[0][0], p[2][0] - p[0][0]], [p[1][1] - p[0][1], p[2][1] - p[0][1]]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        // J⁻¹ = [[j11, -j01], [-j10, j00]] / det, transposed
        let inverse_transpose = [[j[1][1] / det, -j[1][0] / det], [-j[0][1] / det, j[0][0] / det]];
        ElementGeometry {
            origin: p[0],
            jacobian: j,
            inverse_transpose,
            det,
        }
    }

    pub fn map(&self, xi: f64, eta: f64) -> Vec2 {
        [
            self.origin[0] + self.jacobian[0][0] * xi + self.jacobian[0][1] * eta,
            self.origin[1] + self.jacobian[1][0] * xi + self.jacobian[1][1] * eta,
        ]
    }

    pub fn physical_gradient(&self, g: Vec2) -> Vec2 {
        let m = &self.inverse_transpose;
        [m[0][0] * g[0] + m[0][1] * g[1], m[1][0] * g[0] + m[1][1] * g[1]]
    }

    /// Reference coordinates of a physical point.
    pub fn inverse_map(&self, x: Vec2) -> Vec2 {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        let m = &self.inverse_transpose;
        // J⁻¹ = (J⁻ᵀ)ᵀ
        [m[0][0] * d[0] + m[1][0] * d[1], m[0][1] * d[0] + m[1][1] * d[1]]
    }
}

/// Basis values and reference gradients tabulated at a quadrature rule.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub rule: QuadratureRule,
    pub p2: Vec<[f64; 6]>,
    pub p2_grad: Vec<[Vec2; 6]>,
    pub p1: Vec<[f64; 3]>,
}

impl BasisTable {
    pub fn new(rule: QuadratureRule) -> Self {
        let mut p2 = Vec::with_capacity(rule.len());
        let mut p2_grad = Vec::with_capacity(rule.len());
        let mut p1 = Vec::with_capacity(rule.len());
        for q in 0..rule.len() {
            let [x, y] = rule.reference_point(q);
            p2.push(p2_values(x, y));
            p2_grad.push(p2_reference_gradients(x, y));
            p1.push(p1_values(x, y));
        }
        BasisTable { rule, p2, p2_grad, p1 }
    }

    pub fn with_degree(degree: usize) -> Self {
        BasisTable::new(triangle_quadrature(degree).expect("supported quadrature degree"))
    }

    /// Table for error norms, see [`ERROR_QUADRATURE_DEGREE`].
    pub fn for_errors() -> Self {
        BasisTable::new(conical_product_rule(ERROR_QUADRATURE_DEGREE).expect("supported quadrature degree"))
    }
}

/// How a single velocity dof is constrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofConstraint {
    Free,
    /// Takes the boundary data value.
    Dirichlet,
    /// Normal component on the interface, fixed to zero.
    InterfaceNormal,
}

/// Finite element spaces on one domain.
#[derive(Debug, Clone)]
pub struct DomainSpace {
    pub domain: Domain,
    pub n_vertices: usize,
    pub edges: Vec<[usize; 2]>,
    /// P2 nodes of each triangle: 3 vertices then 3 edge midpoints.
    pub triangle_nodes: Vec<[usize; 6]>,
    pub node_coords: Vec<Vec2>,
    pub geometry: Vec<ElementGeometry>,
    pub velocity_constraints: Vec<DofConstraint>,
    /// Pressure dof pinned to zero during solves, absent when an outflow
    /// boundary fixes the pressure level.
    pub pressure_pin: Option<usize>,
    pub area: f64,
    /// Node-to-edge lookup for building traces.
    edge_index: HashMap<(usize, usize), usize>,
}

impl DomainSpace {
    fn new(domain: Domain, mesh: &DomainMesh) -> Self {
        let nv = mesh.vertices.len();
        let mut edge_index = HashMap::new();
        let mut edges = Vec::new();
        let mut triangle_nodes = Vec::with_capacity(mesh.triangles.len());
        for t in &mesh.triangles {
            let mut nodes = [t[0], t[1], t[2], 0, 0, 0];
            for (k, [i, j]) in EDGE_VERTICES.iter().copied().enumerate() {
                let (a, b) = (t[i], t[j]);
                let key = (a.min(b), a.max(b));
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edges.len() - 1
                });
                nodes[3 + k] = nv + e;
            }
            triangle_nodes.push(nodes);
        }
        let mut node_coords = mesh.vertices.clone();
        for [a, b] in &edges {
            let (p, q) = (mesh.vertices[*a], mesh.vertices[*b]);
            node_coords.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
        }
        let geometry: Vec<_> = mesh
            .triangles
            .iter()
            .map(|t| ElementGeometry::new([mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]]))
            .collect();

        // Node tags: Dirichlet wins over Interface wins over Outflow.
        let n_nodes = nv + edges.len();
        let rank = |t: BoundaryTag| match t {
            BoundaryTag::Dirichlet => 3,
            BoundaryTag::Interface => 2,
            BoundaryTag::Outflow => 1,
        };
        let mut node_tag: Vec<Option<BoundaryTag>> = vec![None; n_nodes];
        let mut normal_axis = vec![usize::MAX; n_nodes];
        let mut set = |node: usize, tag: BoundaryTag, axis: usize| {
            if node_tag[node].map_or(true, |old| rank(tag) > rank(old)) {
                node_tag[node] = Some(tag);
            }
            if tag == BoundaryTag::Interface {
                normal_axis[node] = axis;
            }
        };
        let mut has_outflow = false;
        for e in &mesh.boundary {
            let [a, b] = e.vertices;
            let (p, q) = (mesh.vertices[a], mesh.vertices[b]);
            let axis = if p[1] == q[1] {
                1
            } else if p[0] == q[0] {
                0
            } else {
                assert!(e.tag != BoundaryTag::Interface, "interface edges must be axis-aligned");
                usize::MAX
            };
            has_outflow |= e.tag == BoundaryTag::Outflow;
            let mid = nv + edge_index[&(a.min(b), a.max(b))];
            for node in [a, b, mid] {
                set(node, e.tag, axis);
            }
        }
        let mut velocity_constraints = vec![DofConstraint::Free; 2 * n_nodes];
        for node in 0..n_nodes {
            match node_tag[node] {
                Some(BoundaryTag::Dirichlet) => {
                    velocity_constraints[2 * node] = DofConstraint::Dirichlet;
                    velocity_constraints[2 * node + 1] = DofConstraint::Dirichlet;
                }
                Some(BoundaryTag::Interface) => {
                    velocity_constraints[2 * node + normal_axis[node]] = DofConstraint::InterfaceNormal;
                }
                _ => {}
            }
        }
        DomainSpace {
            domain,
            n_vertices: nv,
            edges,
            triangle_nodes,
            node_coords,
            geometry,
            velocity_constraints,
            pressure_pin: if has_outflow { None } else { Some(0) },
            area: mesh.area(),
            edge_index,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.node_coords.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangle_nodes.len()
    }

    pub fn n_velocity_dofs(&self) -> usize {
        2 * self.n_nodes()
    }

    pub fn n_pressure_dofs(&self) -> usize {
        self.n_vertices
    }

    pub fn n_large_scale_dofs(&self) -> usize {
        4 * self.n_vertices
    }

    pub fn n_free_velocity_dofs(&self) -> usize {
        self.velocity_constraints.iter().filter(|c| **c == DofConstraint::Free).count()
    }

    /// P1 (vertex) nodes of triangle `t`.
    pub fn triangle_vertices(&self, t: usize) -> [usize; 3] {
        let n = &self.triangle_nodes[t];
        [n[0], n[1], n[2]]
    }

    /// Midpoint node of the edge joining vertices `a` and `b`.
    pub fn edge_node(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&(a.min(b), a.max(b))).map(|e| self.n_vertices + e)
    }

    /// Writes boundary data into constrained dofs: Dirichlet dofs take
    /// `data(node position)`, interface-normal dofs become zero. Idempotent.
    pub fn apply_constraints(&self, u: &mut [f64], data: impl Fn(Vec2) -> Vec2) {
        for node in 0..self.n_nodes() {
            let (c0, c1) = (self.velocity_constraints[2 * node], self.velocity_constraints[2 * node + 1]);
            if c0 == DofConstraint::Dirichlet || c1 == DofConstraint::Dirichlet {
                let g = data(self.node_coords[node]);
                u[2 * node] = g[0];
                u[2 * node + 1] = g[1];
                continue;
            }
            for c in 0..2 {
                if self.velocity_constraints[2 * node + c] == DofConstraint::InterfaceNormal {
                    u[2 * node + c] = 0.0;
                }
            }
        }
    }

    /// Nodal interpolant of a vector field.
    pub fn interpolate_velocity(&self, f: impl Fn(Vec2) -> Vec2) -> Vec<f64> {
        let mut u = Vec::with_capacity(self.n_velocity_dofs());
        for &x in &self.node_coords {
            let v = f(x);
            u.push(v[0]);
            u.push(v[1]);
        }
        u
    }

    pub fn interpolate_pressure(&self, f: impl Fn(Vec2) -> f64) -> Vec<f64> {
        self.node_coords[..self.n_vertices].iter().map(|&x| f(x)).collect()
    }

    /// Velocity value and gradient (`grad[c][d] = ∂u_c/∂x_d`) at reference
    /// point `(ξ, η)` of triangle `t`.
    pub fn velocity_at(&self, u: &[f64], t: usize, xi: f64, eta: f64) -> (Vec2, Mat2) {
        let phi = p2_values(xi, eta);
        let dphi = p2_reference_gradients(xi, eta);
        self.velocity_from_table(u, t, &phi, &dphi)
    }

    pub fn velocity_from_table(&self, u: &[f64], t: usize, phi: &[f64; 6], dphi_ref: &[Vec2; 6]) -> (Vec2, Mat2) {
        let geo = &self.geometry[t];
        let nodes = &self.triangle_nodes[t];
        let mut val = [0.0; 2];
        let mut grad = [[0.0; 2]; 2];
        for k in 0..6 {
            let g = geo.physical_gradient(dphi_ref[k]);
            for c in 0..2 {
                let coef = u[2 * nodes[k] + c];
                val[c] += coef * phi[k];
                grad[c][0] += coef * g[0];
                grad[c][1] += coef * g[1];
            }
        }
        (val, grad)
    }

    /// Triangle containing `x` and the reference coordinates of `x` in it.
    pub fn locate(&self, x: Vec2) -> Result<(usize, Vec2), SpaceError> {
        const TOL: f64 = 1e-12;
        for (t, geo) in self.geometry.iter().enumerate() {
            let [xi, eta] = geo.inverse_map(x);
            if xi >= -TOL && eta >= -TOL && xi + eta <= 1.0 + TOL {
                return Ok((t, [xi, eta]));
            }
        }
        Err(SpaceError::PointNotFound {
            domain: self.domain,
            x: x[0],
            y: x[1],
        })
    }

    /// Velocity value and gradient at an arbitrary point of the domain.
    pub fn evaluate_velocity(&self, u: &[f64], x: Vec2) -> Result<(Vec2, Mat2), SpaceError> {
        let (t, [xi, eta]) = self.locate(x)?;
        Ok(self.velocity_at(u, t, xi, eta))
    }

    /// P1 pressure value and gradient at an arbitrary point.
    pub fn evaluate_pressure(&self, p: &[f64], x: Vec2) -> Result<(f64, Vec2), SpaceError> {
        let (t, [xi, eta]) = self.locate(x)?;
        let geo = &self.geometry[t];
        let verts = self.triangle_vertices(t);
        let phi = p1_values(xi, eta);
        let mut val = 0.0;
        let mut grad = [0.0; 2];
        for k in 0..3 {
            let g = geo.physical_gradient(P1_REFERENCE_GRADIENTS[k]);
            val += p[verts[k]] * phi[k];
            grad[0] += p[verts[k]] * g[0];
            grad[1] += p[verts[k]] * g[1];
        }
        Ok((val, grad))
    }

    /// P1 tensor value at reference point `(ξ, η)` of triangle `t`.
    pub fn tensor_at(&self, g: &[f64], t: usize, phi1: &[f64; 3]) -> Mat2 {
        let verts = self.triangle_vertices(t);
        let mut out = [[0.0; 2]; 2];
        for k in 0..3 {
            for c in 0..2 {
                for d in 0..2 {
                    out[c][d] += phi1[k] * g[4 * verts[k] + 2 * c + d];
                }
            }
        }
        out
    }

    /// Subtracts the area-weighted mean so that `∫ p = 0`.
    pub fn remove_pressure_mean(&self, p: &mut [f64]) {
        let table = BasisTable::with_degree(2);
        let mut integral = 0.0;
        for t in 0..self.n_triangles() {
            let verts = self.triangle_vertices(t);
            let det = self.geometry[t].det;
            for q in 0..table.rule.len() {
                let v: f64 = (0..3).map(|k| table.p1[q][k] * p[verts[k]]).sum();
                integral += table.rule.weights[q] * det * v;
            }
        }
        let mean = integral / self.area;
        for v in p.iter_mut() {
            *v -= mean;
        }
    }

    /// `‖u − u_exact‖` and `‖∇(u − u_exact)‖` over this domain.
    pub fn error_norms(
        &self,
        u: &[f64],
        exact: impl Fn(Vec2) -> Vec2,
        exact_gradient: impl Fn(Vec2) -> Mat2,
        table: &BasisTable,
    ) -> (f64, f64) {
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for t in 0..self.n_triangles() {
            let geo = &self.geometry[t];
            for q in 0..table.rule.len() {
                let [xi, eta] = table.rule.reference_point(q);
                let x = geo.map(xi, eta);
                let w = table.rule.weights[q] * geo.det;
                let (uh, guh) = self.velocity_from_table(u, t, &table.p2[q], &table.p2_grad[q]);
                let ue = exact(x);
                let ge = exact_gradient(x);
                for c in 0..2 {
                    l2 += w * (ue[c] - uh[c]).powi(2);
                    for d in 0..2 {
                        h1 += w * (ge[c][d] - guh[c][d]).powi(2);
                    }
                }
            }
        }
        (l2.sqrt(), h1.sqrt())
    }

    /// `‖u‖` and `‖∇u‖` by quadrature.
    pub fn norms(&self, u: &[f64], table: &BasisTable) -> (f64, f64) {
        self.error_norms(u, |_| [0.0, 0.0], |_| [[0.0; 2]; 2], table)
    }
}

/// P2 nodes of one interface pair in both domains, ordered along the
/// atmosphere edge: (start vertex, end vertex, midpoint).
#[derive(Debug, Clone, Copy)]
pub struct InterfaceEdgeNodes {
    pub atmosphere: [usize; 3],
    pub ocean: [usize; 3],
    pub start: Vec2,
    pub end: Vec2,
}

impl InterfaceEdgeNodes {
    pub fn nodes(&self, d: Domain) -> [usize; 3] {
        match d {
            Domain::Atmosphere => self.atmosphere,
            Domain::Ocean => self.ocean,
        }
    }

    pub fn length(&self) -> f64 {
        ((self.end[0] - self.start[0]).powi(2) + (self.end[1] - self.start[1]).powi(2)).sqrt()
    }

    pub fn point(&self, s: f64) -> Vec2 {
        [
            self.start[0] + s * (self.end[0] - self.start[0]),
            self.start[1] + s * (self.end[1] - self.start[1]),
        ]
    }
}

/// Finite element spaces on both domains of a coupled mesh.
#[derive(Debug, Clone)]
pub struct Space {
    mesh: CoupledMesh,
    domains: [DomainSpace; 2],
    interface: Vec<InterfaceEdgeNodes>,
}

impl Space {
    pub fn new(mesh: CoupledMesh) -> Self {
        let atm = DomainSpace::new(Domain::Atmosphere, &mesh.domains[0]);
        let ocean = DomainSpace::new(Domain::Ocean, &mesh.domains[1]);
        let mut interface = Vec::with_capacity(mesh.interface.len());
        for k in 0..mesh.interface.len() {
            let a = mesh.interface_edge(k, Domain::Atmosphere);
            let o = mesh.interface_edge(k, Domain::Ocean);
            interface.push(InterfaceEdgeNodes {
                atmosphere: [a[0], a[1], atm.edge_node(a[0], a[1]).expect("interface edge exists")],
                ocean: [o[0], o[1], ocean.edge_node(o[0], o[1]).expect("interface edge exists")],
                start: mesh.domains[0].vertices[a[0]],
                end: mesh.domains[0].vertices[a[1]],
            });
        }
        Space {
            mesh,
            domains: [atm, ocean],
            interface,
        }
    }

    pub fn mesh(&self) -> &CoupledMesh {
        &self.mesh
    }

    pub fn domain(&self, d: Domain) -> &DomainSpace {
        &self.domains[d.index()]
    }

    pub fn interface(&self) -> &[InterfaceEdgeNodes] {
        &self.interface
    }

    pub fn h(&self) -> f64 {
        self.mesh.h()
    }
}
