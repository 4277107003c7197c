//! Two-domain triangulations with tagged boundaries and a paired interface.
//!
//! Both geometries are built from structured square cells split into two
//! triangles. Cell diagonals alternate in a checkerboard pattern so that, for
//! an even number of cells per side, no corner triangle has all three
//! vertices on the boundary.

use std::collections::HashMap;
use std::fmt;

use crate::error::MeshError;

/// Which of the two coupled fluids a piece of data belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Domain {
    /// Ω₁, the upper fluid.
    Atmosphere,
    /// Ω₂, the lower fluid.
    Ocean,
}

impl Domain {
    pub const BOTH: [Domain; 2] = [Domain::Atmosphere, Domain::Ocean];

    pub fn index(self) -> usize {
        match self {
            Domain::Atmosphere => 0,
            Domain::Ocean => 1,
        }
    }

    pub fn other(self) -> Domain {
        match self {
            Domain::Atmosphere => Domain::Ocean,
            Domain::Ocean => Domain::Atmosphere,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Domain::Atmosphere => "atm",
            Domain::Ocean => "ocean",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    /// Velocity prescribed (no-slip walls, inflow, manufactured data).
    Dirichlet,
    /// Shared with the other fluid: rigid lid plus friction coupling.
    Interface,
    /// "Do nothing" natural condition.
    Outflow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    /// Endpoints in counter-clockwise order of the owning triangle, so the
    /// domain interior lies to the left of `vertices[0] -> vertices[1]`.
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshKind {
    TwoSquare,
    Step,
}

/// A single conforming triangulation.
#[derive(Debug, Clone)]
pub struct DomainMesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
    /// Largest triangle diameter.
    pub h: f64,
}

/// A pair of geometrically identical interface edges, one per domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterfacePair {
    /// Index into the atmosphere's `boundary` list.
    pub atmosphere_edge: usize,
    /// Index into the ocean's `boundary` list.
    pub ocean_edge: usize,
    /// True when the ocean edge runs opposite to the atmosphere edge.
    pub reversed: bool,
}

#[derive(Debug, Clone)]
pub struct CoupledMesh {
    pub kind: MeshKind,
    pub domains: [DomainMesh; 2],
    pub interface: Vec<InterfacePair>,
}

impl CoupledMesh {
    pub fn domain(&self, d: Domain) -> &DomainMesh {
        &self.domains[d.index()]
    }

    /// Largest element diameter over both domains.
    pub fn h(&self) -> f64 {
        self.domains[0].h.max(self.domains[1].h)
    }

    /// Edge endpoints of interface pair `k` as seen from domain `d`, ordered
    /// along the atmosphere edge's direction.
    pub fn interface_edge(&self, k: usize, d: Domain) -> [usize; 2] {
        let pair = &self.interface[k];
        match d {
            Domain::Atmosphere => self.domains[0].boundary[pair.atmosphere_edge].vertices,
            Domain::Ocean => {
                let [a, b] = self.domains[1].boundary[pair.ocean_edge].vertices;
                if pair.reversed {
                    [b, a]
                } else {
                    [a, b]
                }
            }
        }
    }

    /// Checks every structural invariant; used by tests and by debug builds
    /// of the generators.
    pub fn validate(&self) -> Result<(), MeshError> {
        for (di, m) in self.domains.iter().enumerate() {
            m.validate().map_err(|e| MeshError::Invalid(format!("domain {di}: {e}")))?;
        }
        let n_iface = |m: &DomainMesh| m.boundary.iter().filter(|e| e.tag == BoundaryTag::Interface).count();
        if n_iface(&self.domains[0]) != self.interface.len() || n_iface(&self.domains[1]) != self.interface.len() {
            return Err(MeshError::Invalid("interface edges are not paired one-to-one".into()));
        }
        let mut seen = [vec![false; self.domains[0].boundary.len()], vec![false; self.domains[1].boundary.len()]];
        for (k, pair) in self.interface.iter().enumerate() {
            for (d, e) in [(0, pair.atmosphere_edge), (1, pair.ocean_edge)] {
                if seen[d][e] {
                    return Err(MeshError::Invalid(format!("edge {e} of domain {d} paired twice")));
                }
                seen[d][e] = true;
            }
            let a = self.interface_edge(k, Domain::Atmosphere);
            let o = self.interface_edge(k, Domain::Ocean);
            for j in 0..2 {
                if self.domains[0].vertices[a[j]] != self.domains[1].vertices[o[j]] {
                    return Err(MeshError::Invalid(format!("interface pair {k} endpoints do not coincide")));
                }
            }
        }
        Ok(())
    }

    /// Largest coordinate mismatch between paired interface endpoints.
    pub fn interface_mismatch(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.interface.len() {
            let a = self.interface_edge(k, Domain::Atmosphere);
            let o = self.interface_edge(k, Domain::Ocean);
            for j in 0..2 {
                let pa = self.domains[0].vertices[a[j]];
                let po = self.domains[1].vertices[o[j]];
                worst = worst.max((pa[0] - po[0]).abs()).max((pa[1] - po[1]).abs());
            }
        }
        worst
    }
}

impl DomainMesh {
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let d = |i: usize, j: usize| {
            let (p, q) = (self.vertices[i], self.vertices[j]);
            ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
        };
        d(a, b).max(d(b, c)).max(d(c, a))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    /// Number of distinct edges.
    pub fn edge_count(&self) -> usize {
        let mut edges = std::collections::HashSet::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        edges.len()
    }

    pub fn validate(&self) -> Result<(), String> {
        for t in 0..self.triangles.len() {
            if self.signed_area(t) <= 0.0 {
                return Err(format!("triangle {t} has non-positive signed area"));
            }
        }
        // Boundary edges are exactly the edges with a single adjacent triangle.
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let boundary: Vec<_> = count.iter().filter(|(_, &c)| c == 1).map(|(&k, _)| k).collect();
        if boundary.len() != self.boundary.len() {
            return Err(format!(
                "{} boundary edges tagged but {} exist",
                self.boundary.len(),
                boundary.len()
            ));
        }
        for e in &self.boundary {
            let [a, b] = e.vertices;
            if count.get(&(a.min(b), a.max(b))) != Some(&1) {
                return Err(format!("tagged edge ({a},{b}) is not a boundary edge"));
            }
        }
        let euler = self.vertices.len() as i64 - count.len() as i64 + self.triangles.len() as i64;
        if euler != 1 {
            return Err(format!("Euler characteristic {euler} != 1"));
        }
        Ok(())
    }
}

/// Structured block of square cells `[x0, x0 + nx·s] × [y0, y0 + ny·s]`
/// with `s = 1/per_unit`. Cells for which `keep` returns false are dropped.
/// Coordinates are computed as `x0 + i / per_unit` so that identical grid
/// lines in different blocks produce bit-identical coordinates.
fn structured_block(
    x0: i64,
    y0: i64,
    nx: usize,
    ny: usize,
    per_unit: usize,
    keep: impl Fn(usize, usize) -> bool,
    classify: impl Fn([f64; 2], [f64; 2]) -> BoundaryTag,
) -> DomainMesh {
    let coord = |i: usize, j: usize| -> [f64; 2] {
        let ix = x0 * per_unit as i64 + i as i64;
        let jy = y0 * per_unit as i64 + j as i64;
        [ix as f64 / per_unit as f64, jy as f64 / per_unit as f64]
    };
    let mut index = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut vertices = Vec::new();
    let mut vertex = |i: usize, j: usize, vertices: &mut Vec<[f64; 2]>| -> usize {
        let slot = &mut index[j * (nx + 1) + i];
        if *slot == usize::MAX {
            *slot = vertices.len();
            vertices.push(coord(i, j));
        }
        *slot
    };
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            if !keep(i, j) {
                continue;
            }
            let p00 = vertex(i, j, &mut vertices);
            let p10 = vertex(i + 1, j, &mut vertices);
            let p11 = vertex(i + 1, j + 1, &mut vertices);
            let p01 = vertex(i, j + 1, &mut vertices);
            if (i + j) % 2 == 0 {
                triangles.push([p00, p10, p11]);
                triangles.push([p00, p11, p01]);
            } else {
                triangles.push([p00, p10, p01]);
                triangles.push([p10, p11, p01]);
            }
        }
    }
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut boundary = Vec::new();
    for t in &triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if count[&(a.min(b), a.max(b))] == 1 {
                boundary.push(BoundaryEdge {
                    vertices: [a, b],
                    tag: classify(vertices[a], vertices[b]),
                });
            }
        }
    }
    let mut mesh = DomainMesh {
        vertices,
        triangles,
        boundary,
        h: 0.0,
    };
    mesh.h = (0..mesh.triangles.len()).map(|t| mesh.diameter(t)).fold(0.0, f64::max);
    mesh
}

fn pair_interface(kind: MeshKind, atm: DomainMesh, ocean: DomainMesh) -> Result<CoupledMesh, MeshError> {
    let key = |p: [f64; 2]| (p[0].to_bits(), p[1].to_bits());
    let mut ocean_edges: HashMap<((u64, u64), (u64, u64)), (usize, bool)> = HashMap::new();
    for (k, e) in ocean.boundary.iter().enumerate() {
        if e.tag != BoundaryTag::Interface {
            continue;
        }
        let (a, b) = (key(ocean.vertices[e.vertices[0]]), key(ocean.vertices[e.vertices[1]]));
        ocean_edges.insert((a, b), (k, false));
        ocean_edges.insert((b, a), (k, true));
    }
    let mut interface = Vec::new();
    for (k, e) in atm.boundary.iter().enumerate() {
        if e.tag != BoundaryTag::Interface {
            continue;
        }
        let a = key(atm.vertices[e.vertices[0]]);
        let b = key(atm.vertices[e.vertices[1]]);
        let &(ocean_edge, reversed) = ocean_edges
            .get(&(a, b))
            .ok_or_else(|| MeshError::Invalid(format!("atmosphere interface edge {k} has no partner")))?;
        interface.push(InterfacePair {
            atmosphere_edge: k,
            ocean_edge,
            reversed,
        });
    }
    // Order pairs along the interface for reproducible traversal.
    interface.sort_by(|p, q| {
        let mid = |pair: &InterfacePair| {
            let [a, b] = atm.boundary[pair.atmosphere_edge].vertices;
            (atm.vertices[a][0] + atm.vertices[b][0], atm.vertices[a][1] + atm.vertices[b][1])
        };
        mid(p).partial_cmp(&mid(q)).unwrap()
    });
    let mesh = CoupledMesh {
        kind,
        domains: [atm, ocean],
        interface,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Ω₁ = [0,1]×[0,1] over Ω₂ = [0,1]×[−1,0] with `n` cells per side; the
/// interface is y = 0 and every other side is a Dirichlet wall.
pub fn generate_two_domain_mesh(n: usize) -> Result<CoupledMesh, MeshError> {
    if n == 0 {
        return Err(MeshError::InvalidParameter("subdivisions must be at least 1".into()));
    }
    let classify = |a: [f64; 2], b: [f64; 2]| {
        if a[1] == 0.0 && b[1] == 0.0 {
            BoundaryTag::Interface
        } else {
            BoundaryTag::Dirichlet
        }
    };
    let atm = structured_block(0, 0, n, n, n, |_, _| true, classify);
    let ocean = structured_block(0, -1, n, n, n, |_, _| true, classify);
    pair_interface(MeshKind::TwoSquare, atm, ocean)
}

/// Lengths of the backward-facing-step geometry.
pub mod step_geometry {
    /// Inflow shelf spans x ∈ [0, SHELF_END], y ∈ [STEP_HEIGHT, CHANNEL_TOP].
    pub const SHELF_END: f64 = 2.0;
    pub const STEP_HEIGHT: f64 = 1.0;
    pub const CHANNEL_TOP: f64 = 2.0;
    pub const CHANNEL_END: f64 = 12.0;
    pub const OCEAN_DEPTH: f64 = 1.0;
}

/// Backward-facing step over an ocean box.
///
/// The atmosphere is the inflow shelf `[0,2]×[1,2]` joined to the channel
/// `[2,12]×[0,2]`; the ocean is `[2,12]×[−1,0]`. Cells are squares of side
/// `1/m` with `m` the smallest integer giving triangle diameters no larger
/// than `1.4·h_target`.
pub fn generate_step_mesh(h_target: f64) -> Result<CoupledMesh, MeshError> {
    use step_geometry::*;
    if !(h_target > 0.0 && h_target <= 0.5) {
        return Err(MeshError::InvalidParameter(format!(
            "step mesh size must lie in (0, 0.5], got {h_target}"
        )));
    }
    let m = (std::f64::consts::SQRT_2 / (1.4 * h_target) - 1e-12).ceil().max(1.0) as usize;
    let eps = 1e-12;
    let atm_classify = |a: [f64; 2], b: [f64; 2]| {
        let on = |c: usize, v: f64| (a[c] - v).abs() < eps && (b[c] - v).abs() < eps;
        if on(1, 0.0) {
            BoundaryTag::Interface
        } else if on(1, CHANNEL_TOP) || on(0, CHANNEL_END) {
            BoundaryTag::Outflow
        } else {
            // inlet face, top of the step and its vertical face
            BoundaryTag::Dirichlet
        }
    };
    let shelf_cells = (SHELF_END * m as f64).round() as usize;
    let step_cells = (STEP_HEIGHT * m as f64).round() as usize;
    let atm = structured_block(
        0,
        0,
        (CHANNEL_END * m as f64).round() as usize,
        (CHANNEL_TOP * m as f64).round() as usize,
        m,
        |i, j| !(i < shelf_cells && j < step_cells),
        atm_classify,
    );
    let ocean_classify = |a: [f64; 2], b: [f64; 2]| {
        let on = |c: usize, v: f64| (a[c] - v).abs() < eps && (b[c] - v).abs() < eps;
        if on(1, 0.0) {
            BoundaryTag::Interface
        } else if on(0, CHANNEL_END) {
            BoundaryTag::Outflow
        } else {
            BoundaryTag::Dirichlet
        }
    };
    let ocean = structured_block(
        SHELF_END as i64,
        -(OCEAN_DEPTH as i64),
        ((CHANNEL_END - SHELF_END) * m as f64).round() as usize,
        (OCEAN_DEPTH * m as f64).round() as usize,
        m,
        |_, _| true,
        ocean_classify,
    );
    pair_interface(MeshKind::Step, atm, ocean)
}
