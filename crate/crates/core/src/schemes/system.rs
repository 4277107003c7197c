//! Block saddle-point systems over one or both domains.
//!
//! Unknowns are ordered `[u_a, p_a, u_b, p_b, …]` for the included domains.
//! Constrained unknowns (Dirichlet and interface-normal velocity dofs, the
//! pinned pressure dof) are eliminated: their rows are dropped and their
//! columns move to the right-hand side.

use std::sync::Arc;

use crate::assembly::DomainAssembler;
use crate::error::SolverError;
use crate::mesh::Domain;
use crate::solver::{norm, CsrMatrix, CsrPattern, SparseLu, SymbolicCache};
use crate::space::{DofConstraint, Space};

const NONE: usize = usize::MAX;

#[derive(Debug)]
struct Slot {
    domain: Domain,
    u_offset: usize,
    p_offset: usize,
    n_u: usize,
    n_p: usize,
    /// Full-pattern positions of scalar-pattern entry `k`, components 0 and 1.
    scalar_map: Vec<[usize; 2]>,
    /// Full-pattern positions of divergence entry `k`: the `(p, u)` entry and
    /// its transposed `(u, p)` partner.
    div_map: Vec<[usize; 2]>,
}

#[derive(Debug)]
pub struct SaddleSystem {
    slots: Vec<Slot>,
    pattern: Arc<CsrPattern>,
    constrained: Vec<bool>,
    free_rows: Vec<usize>,
    reduced_pattern: Arc<CsrPattern>,
    reduced_pos: Vec<usize>,
    symbolic: SymbolicCache,
    lu: Option<SparseLu>,
}

impl SaddleSystem {
    /// `coupled` adds the cross-domain interface node couplings.
    pub fn new(space: &Space, assemblers: &[&DomainAssembler<'_>], coupled: bool) -> Self {
        let mut offset = 0;
        let mut slot_info = Vec::new();
        for asm in assemblers {
            let d = asm.space.domain;
            let n_u = asm.space.n_velocity_dofs();
            let n_p = asm.space.n_pressure_dofs();
            slot_info.push((d, offset, offset + n_u, n_u, n_p));
            offset += n_u + n_p;
        }
        let n = offset;
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (asm, &(_, uo, po, _, _)) in assemblers.iter().zip(&slot_info) {
            let sp = &asm.pattern;
            for r in 0..sp.n_rows() {
                for k in sp.row(r) {
                    let c = sp.col_idx()[k];
                    rows[uo + 2 * r].push(uo + 2 * c);
                    rows[uo + 2 * r + 1].push(uo + 2 * c + 1);
                }
            }
            let dp = &asm.div_pattern;
            for q in 0..dp.n_rows() {
                for k in dp.row(q) {
                    let v = dp.col_idx()[k];
                    rows[po + q].push(uo + v);
                    rows[uo + v].push(po + q);
                }
            }
        }
        let cross_pairs = if coupled { cross_node_pairs(space) } else { Vec::new() };
        if coupled {
            let off = |d: Domain| slot_info.iter().find(|s| s.0 == d).expect("both domains present").1;
            for &(d, a, b) in &cross_pairs {
                let (oa, ob) = (off(d), off(d.other()));
                for c in 0..2 {
                    rows[oa + 2 * a + c].push(ob + 2 * b + c);
                }
            }
        }
        let pattern = Arc::new(CsrPattern::from_rows(n, rows));

        let mut slots = Vec::new();
        let mut constrained = vec![false; n];
        for (asm, &(domain, u_offset, p_offset, n_u, n_p)) in assemblers.iter().zip(&slot_info) {
            let sp = &asm.pattern;
            let mut scalar_map = Vec::with_capacity(sp.nnz());
            for r in 0..sp.n_rows() {
                for k in sp.row(r) {
                    let c = sp.col_idx()[k];
                    scalar_map.push([
                        pattern.find(u_offset + 2 * r, u_offset + 2 * c).unwrap(),
                        pattern.find(u_offset + 2 * r + 1, u_offset + 2 * c + 1).unwrap(),
                    ]);
                }
            }
            let dp = &asm.div_pattern;
            let mut div_map = Vec::with_capacity(dp.nnz());
            for q in 0..dp.n_rows() {
                for k in dp.row(q) {
                    let v = dp.col_idx()[k];
                    div_map.push([
                        pattern.find(p_offset + q, u_offset + v).unwrap(),
                        pattern.find(u_offset + v, p_offset + q).unwrap(),
                    ]);
                }
            }
            for (i, c) in asm.space.velocity_constraints.iter().enumerate() {
                constrained[u_offset + i] = *c != DofConstraint::Free;
            }
            if let Some(pin) = asm.space.pressure_pin {
                constrained[p_offset + pin] = true;
            }
            slots.push(Slot {
                domain,
                u_offset,
                p_offset,
                n_u,
                n_p,
                scalar_map,
                div_map,
            });
        }

        let mut reduced_index = vec![NONE; n];
        let mut free_rows = Vec::new();
        for i in 0..n {
            if !constrained[i] {
                reduced_index[i] = free_rows.len();
                free_rows.push(i);
            }
        }
        let mut red_rows = Vec::with_capacity(free_rows.len());
        for &r in &free_rows {
            red_rows.push(
                pattern
                    .row(r)
                    .map(|k| pattern.col_idx()[k])
                    .filter(|&c| !constrained[c])
                    .map(|c| reduced_index[c])
                    .collect(),
            );
        }
        let reduced_pattern = Arc::new(CsrPattern::from_rows(free_rows.len(), red_rows));
        let mut reduced_pos = vec![NONE; pattern.nnz()];
        for r in 0..n {
            if constrained[r] {
                continue;
            }
            for k in pattern.row(r) {
                let c = pattern.col_idx()[k];
                if !constrained[c] {
                    reduced_pos[k] = reduced_pattern.find(reduced_index[r], reduced_index[c]).unwrap();
                }
            }
        }
        SaddleSystem {
            slots,
            pattern,
            constrained,
            free_rows,
            reduced_pattern,
            reduced_pos,
            symbolic: SymbolicCache::new(),
            lu: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.pattern.n_rows()
    }

    pub fn n_free(&self) -> usize {
        self.free_rows.len()
    }

    pub fn zero_values(&self) -> Vec<f64> {
        vec![0.0; self.pattern.nnz()]
    }

    fn slot(&self, d: Domain) -> &Slot {
        self.slots.iter().find(|s| s.domain == d).expect("domain in system")
    }

    /// Velocity and pressure ranges of domain `d` in the unknown vector.
    pub fn ranges(&self, d: Domain) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let s = self.slot(d);
        (s.u_offset..s.u_offset + s.n_u, s.p_offset..s.p_offset + s.n_p)
    }

    pub fn domains(&self) -> impl Iterator<Item = Domain> + '_ {
        self.slots.iter().map(|s| s.domain)
    }

    /// `values += coef · (scalar ⊗ I₂)` in the velocity block of `d`.
    pub fn add_scalar(&self, values: &mut [f64], d: Domain, scalar: &CsrMatrix, coef: f64) {
        let map = &self.slot(d).scalar_map;
        debug_assert_eq!(map.len(), scalar.values().len());
        for (k, v) in scalar.values().iter().enumerate() {
            let v = coef * v;
            values[map[k][0]] += v;
            values[map[k][1]] += v;
        }
    }

    /// Adds `−Bᵀ` in the momentum rows and `B` in the continuity rows.
    pub fn add_divergence(&self, values: &mut [f64], d: Domain, b: &CsrMatrix) {
        let map = &self.slot(d).div_map;
        for (k, v) in b.values().iter().enumerate() {
            values[map[k][0]] += v;
            values[map[k][1]] -= v;
        }
    }

    /// Adds node-level triplets `(node in from, node in to, value)` on both
    /// components.
    pub fn add_node_triplets(&self, values: &mut [f64], from: Domain, to: Domain, triplets: &[(usize, usize, f64)]) {
        let (ro, co) = (self.slot(from).u_offset, self.slot(to).u_offset);
        for &(a, b, v) in triplets {
            for c in 0..2 {
                let k = self
                    .pattern
                    .find(ro + 2 * a + c, co + 2 * b + c)
                    .expect("interface entry in pattern");
                values[k] += v;
            }
        }
    }

    pub fn is_constrained(&self, i: usize) -> bool {
        self.constrained[i]
    }

    /// `K x − b` for the full system.
    pub fn residual(&self, values: &[f64], rhs: &[f64], x: &[f64]) -> Vec<f64> {
        let m = CsrMatrix::from_parts(self.pattern.clone(), values.to_vec());
        let mut r = m.mul_vec(x);
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri -= bi;
        }
        r
    }

    fn reduced_rhs(&self, values: &[f64], rhs: &[f64], x: &[f64]) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.free_rows.len());
        for &r in &self.free_rows {
            let mut v = rhs[r];
            for k in self.pattern.row(r) {
                let c = self.pattern.col_idx()[k];
                if self.constrained[c] {
                    v -= values[k] * x[c];
                }
            }
            b.push(v);
        }
        b
    }

    /// Relative residual of the free equations at `x`; constrained entries
    /// of `x` carry their prescribed values. Absolute when the reduced
    /// right-hand side vanishes.
    pub fn relative_residual(&self, values: &[f64], rhs: &[f64], x: &[f64]) -> f64 {
        let mut r2 = 0.0;
        for &row in &self.free_rows {
            let mut s = -rhs[row];
            for k in self.pattern.row(row) {
                s += values[k] * x[self.pattern.col_idx()[k]];
            }
            r2 += s * s;
        }
        let nb = norm(&self.reduced_rhs(values, rhs, x));
        if nb > 0.0 {
            r2.sqrt() / nb
        } else {
            r2.sqrt()
        }
    }

    /// Solves for the free unknowns; constrained entries of `x` are kept.
    pub fn solve(&mut self, values: &[f64], rhs: &[f64], x: &mut [f64]) -> Result<(), SolverError> {
        let mut red = vec![0.0; self.reduced_pattern.nnz()];
        for (k, &p) in self.reduced_pos.iter().enumerate() {
            if p != NONE {
                red[p] = values[k];
            }
        }
        let b = self.reduced_rhs(values, rhs, x);
        let m = CsrMatrix::from_parts(self.reduced_pattern.clone(), red);
        let lu = SparseLu::factorize_cached(&m, &mut self.symbolic)?;
        let y = lu.solve(&b);
        self.lu = Some(lu);
        for (i, &r) in self.free_rows.iter().enumerate() {
            x[r] = y.as_ref().map_or(f64::NAN, |y| y[i]);
        }
        y.map(|_| ())
    }

    /// True once [`solve`](Self::solve) has stored factors.
    pub fn has_factors(&self) -> bool {
        self.lu.is_some()
    }

    /// One defect-correction step with the stored factors:
    /// `x_free −= LU⁻¹ (K x − b)_free`. The fixed point is the solution of
    /// the current system whatever matrix the factors came from.
    pub fn correct(&self, values: &[f64], rhs: &[f64], x: &mut [f64]) -> Result<(), SolverError> {
        let lu = self.lu.as_ref().ok_or(SolverError::DimensionMismatch {
            expected: self.free_rows.len(),
            got: 0,
        })?;
        let mut r = Vec::with_capacity(self.free_rows.len());
        for &row in &self.free_rows {
            let mut s = -rhs[row];
            for k in self.pattern.row(row) {
                s += values[k] * x[self.pattern.col_idx()[k]];
            }
            r.push(s);
        }
        lu.solve_in_place(&mut r)?;
        for (i, &row) in self.free_rows.iter().enumerate() {
            x[row] -= r[i];
        }
        Ok(())
    }

    /// `Σ x_c (K x − b)_c` over constrained unknowns: the work done by the
    /// constraint reactions.
    pub fn constraint_work(&self, values: &[f64], rhs: &[f64], x: &[f64]) -> f64 {
        let mut w = 0.0;
        for r in 0..self.dim() {
            if !self.constrained[r] || x[r] == 0.0 {
                continue;
            }
            let mut s = -rhs[r];
            for k in self.pattern.row(r) {
                s += values[k] * x[self.pattern.col_idx()[k]];
            }
            w += x[r] * s;
        }
        w
    }
}

/// Interface node pairs `(domain, node in domain, node in other)` that
/// share an interface edge.
fn cross_node_pairs(space: &Space) -> Vec<(Domain, usize, usize)> {
    let mut out = Vec::new();
    for e in space.interface() {
        for d in Domain::BOTH {
            for &a in &e.nodes(d) {
                for &b in &e.nodes(d.other()) {
                    out.push((d, a, b));
                }
            }
        }
    }
    out
}
