//! Oracles shared by several test targets.
#![allow(dead_code)]

use aoflow::manufactured::ManufacturedProblem;
use aoflow::mesh::Domain;
use aoflow::problem::Problem;
use aoflow::quadrature::triangle_quadrature;
use aoflow::space::{DomainSpace, EDGE_VERTICES};

/// P2 basis values and physical gradients on one triangle, written out from
/// barycentric coordinates rather than through the reference element.
pub struct OracleElement {
    p: [[f64; 2]; 3],
    det: f64,
    dl: [[f64; 2]; 3],
}

impl OracleElement {
    pub fn new(p: [[f64; 2]; 3]) -> Self {
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        // ∇λ_k is the inward normal of the opposite edge over 2·area.
        let dl = std::array::from_fn(|k| {
            let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
            [(a[1] - b[1]) / det, (b[0] - a[0]) / det]
        });
        OracleElement { p, det, dl }
    }

    pub fn lambda(&self, x: [f64; 2]) -> [f64; 3] {
        std::array::from_fn(|k| {
            let (a, b) = (self.p[(k + 1) % 3], self.p[(k + 2) % 3]);
            ((a[0] - x[0]) * (b[1] - x[1]) - (b[0] - x[0]) * (a[1] - x[1])) / self.det
        })
    }

    pub fn basis(&self, x: [f64; 2]) -> ([f64; 6], [[f64; 2]; 6]) {
        let l = self.lambda(x);
        let mut v = [0.0; 6];
        let mut g = [[0.0; 2]; 6];
        for k in 0..3 {
            v[k] = l[k] * (2.0 * l[k] - 1.0);
            for c in 0..2 {
                g[k][c] = (4.0 * l[k] - 1.0) * self.dl[k][c];
            }
        }
        for (e, [a, b]) in EDGE_VERTICES.iter().copied().enumerate() {
            v[3 + e] = 4.0 * l[a] * l[b];
            for c in 0..2 {
                g[3 + e][c] = 4.0 * (l[a] * self.dl[b][c] + l[b] * self.dl[a][c]);
            }
        }
        (v, g)
    }

    /// Physical quadrature points and weights.
    pub fn points(&self) -> Vec<([f64; 2], f64)> {
        let rule = triangle_quadrature(5).unwrap();
        (0..rule.len())
            .map(|q| {
                let [s, t] = rule.reference_point(q);
                let x = [
                    self.p[0][0] + s * (self.p[1][0] - self.p[0][0]) + t * (self.p[2][0] - self.p[0][0]),
                    self.p[0][1] + s * (self.p[1][1] - self.p[0][1]) + t * (self.p[2][1] - self.p[0][1]),
                ];
                (x, rule.weights[q] * self.det.abs())
            })
            .collect()
    }
}

pub fn elements(ds: &DomainSpace) -> Vec<(OracleElement, [usize; 6])> {
    (0..ds.n_triangles())
        .map(|t| {
            let v = ds.triangle_vertices(t);
            (OracleElement::new(v.map(|k| ds.node_coords[k])), ds.triangle_nodes[t])
        })
        .collect()
}

pub fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

/// Worst component of `u_t − ν Δu + (u·∇)u − f` by central differences,
/// and the size of `f`.
pub fn fd_residual(p: &ManufacturedProblem, d: Domain, t: f64, x: [f64; 2]) -> (f64, f64) {
    let u = |t: f64, x: [f64; 2]| p.velocity(d, t, x);
    let (h1, h2) = (1e-5, 1e-4);
    let shift = |x: [f64; 2], k: usize, s: f64| {
        let mut y = x;
        y[k] += s;
        y
    };
    let f = p.forcing(d, t, x);
    let u0 = u(t, x);
    let mut worst = 0.0f64;
    for c in 0..2 {
        let ut = (u(t + h1, x)[c] - u(t - h1, x)[c]) / (2.0 * h1);
        let mut lap = 0.0;
        let mut adv = 0.0;
        for k in 0..2 {
            lap += (u(t, shift(x, k, h2))[c] - 2.0 * u0[c] + u(t, shift(x, k, -h2))[c]) / (h2 * h2);
            adv += u0[k] * (u(t, shift(x, k, h1))[c] - u(t, shift(x, k, -h1))[c]) / (2.0 * h1);
        }
        let r = ut - p.nu[d.index()] * lap + adv - f[c];
        worst = worst.max(r.abs());
    }
    (worst, f[0].abs().max(f[1].abs()))
}

