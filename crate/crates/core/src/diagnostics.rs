//! Energy bookkeeping, error norms, discrete energy-law and stability
//! checks, and convergence-rate tables.
//!
//! Everything here is recomputed from stored states with the assembly
//! quadrature; nothing is read back from the solver except the constraint
//! work in [`StepInfo`].

use crate::assembly::DomainAssembler;
use crate::error::DiagnosticsError;
use crate::interface::sample_interface_trace;
use crate::mesh::Domain;
use crate::problem::Problem;
use crate::schemes::{SchemeConfig, State, StepInfo};
use crate::space::{BasisTable, Space};

/// Every state of a run with its step record.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub infos: Vec<StepInfo>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, state: &State, info: &StepInfo) {
        self.states.push(state.clone());
        self.infos.push(*info);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Physical energy balance of a run: `I = KE(t) + ℰ(t)` for the
/// continuous problem without forcing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyReport {
    pub t: Vec<f64>,
    /// `‖u_d‖²` per domain.
    pub ke: [Vec<f64>; 2],
    /// `2ν_d Δt Σ_{j≤n} ‖∇u_d^j‖²` per domain.
    pub dissipation: [Vec<f64>; 2],
    /// Initial kinetic energy of each domain.
    pub initial: [f64; 2],
    pub aed: Vec<f64>,
}

impl EnergyReport {
    pub fn initial_total(&self) -> f64 {
        self.initial[0] + self.initial[1]
    }

    /// `KE + ℰ` of domain `d` at every level.
    pub fn total(&self, d: Domain) -> Vec<f64> {
        let i = d.index();
        self.ke[i].iter().zip(&self.dissipation[i]).map(|(k, e)| k + e).collect()
    }

    pub fn final_aed(&self) -> Option<f64> {
        self.aed.last().copied()
    }
}

/// Streaming builder of an [`EnergyReport`]; feed it every level in order.
#[derive(Debug)]
pub struct EnergyTracker<'a> {
    asm: [DomainAssembler<'a>; 2],
    nu: [f64; 2],
    dt: f64,
    report: EnergyReport,
}

impl<'a> EnergyTracker<'a> {
    pub fn new(space: &'a Space, config: &SchemeConfig) -> Self {
        EnergyTracker {
            asm: Domain::BOTH.map(|d| DomainAssembler::new(space.domain(d))),
            nu: config.nu,
            dt: config.dt,
            report: EnergyReport::default(),
        }
    }

    pub fn observe(&mut self, state: &State) {
        let r = &mut self.report;
        let first = r.t.is_empty();
        r.t.push(state.t);
        for d in Domain::BOTH {
            let i = d.index();
            let u = &state.domains[i].u;
            let ke = self.asm[i].l2_norm_sq(u);
            let diss = if first {
                r.initial[i] = ke;
                0.0
            } else {
                r.dissipation[i].last().copied().unwrap_or(0.0)
                    + 2.0 * self.nu[i] * self.dt * self.asm[i].gradient_norm_sq(u)
            };
            r.ke[i].push(ke);
            r.dissipation[i].push(diss);
        }
        let n = r.t.len() - 1;
        let total: f64 = (0..2).map(|i| r.ke[i][n] + r.dissipation[i][n]).sum();
        r.aed.push((r.initial_total() - total).abs());
    }

    pub fn report(&self) -> &EnergyReport {
        &self.report
    }

    pub fn into_report(self) -> EnergyReport {
        self.report
    }
}

/// Energy report of a stored trajectory.
pub fn energy_observe(space: &Space, trajectory: &Trajectory, config: &SchemeConfig) -> EnergyReport {
    let mut tracker = EnergyTracker::new(space, config);
    for s in &trajectory.states {
        tracker.observe(s);
    }
    tracker.into_report()
}

/// Streaming `(Δt Σ_{j≥1} ‖e^j‖²)^{1/2}` and `(Δt Σ_{j≥1} ‖∇e^j‖²)^{1/2}`
/// over both domains.
#[derive(Debug)]
pub struct ErrorAccumulator<'a> {
    space: &'a Space,
    problem: &'a dyn Problem,
    table: BasisTable,
    dt: f64,
    l2: f64,
    h1: f64,
}

impl<'a> ErrorAccumulator<'a> {
    pub fn new(space: &'a Space, problem: &'a dyn Problem, dt: f64) -> Self {
        ErrorAccumulator {
            space,
            problem,
            table: BasisTable::for_errors(),
            dt,
            l2: 0.0,
            h1: 0.0,
        }
    }

    /// Squared errors of one state: `(‖e‖², ‖∇e‖²)`.
    pub fn level_errors(&self, state: &State) -> (f64, f64) {
        let (mut l2, mut h1) = (0.0, 0.0);
        for d in Domain::BOTH {
            let t = state.t;
            let p = self.problem;
            let (a, b) = self.space.domain(d).error_norms(
                &state.domains[d.index()].u,
                |x| p.exact_velocity(d, t, x).unwrap_or([0.0; 2]),
                |x| p.exact_gradient(d, t, x).unwrap_or([[0.0; 2]; 2]),
                &self.table,
            );
            l2 += a * a;
            h1 += b * b;
        }
        (l2, h1)
    }

    /// Adds a level; level 0 is skipped.
    pub fn observe(&mut self, state: &State) {
        if state.level == 0 {
            return;
        }
        let (l2, h1) = self.level_errors(state);
        self.l2 += self.dt * l2;
        self.h1 += self.dt * h1;
    }

    pub fn errors(&self) -> (f64, f64) {
        (self.l2.sqrt(), self.h1.sqrt())
    }
}

/// Accumulated `L²(0,T;L²)` and `L²(0,T;H¹)` errors of a trajectory.
pub fn accumulated_errors(space: &Space, trajectory: &Trajectory, problem: &dyn Problem, dt: f64) -> (f64, f64) {
    let mut acc = ErrorAccumulator::new(space, problem, dt);
    for s in &trajectory.states {
        acc.observe(s);
    }
    acc.errors()
}

/// Both sides of the summed discrete energy identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLawCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / |rhs|`, or relative to the sum of the magnitudes of
    /// the left-hand terms when the right side vanishes.
    pub residual: f64,
    pub steps: usize,
}

/// Checks the energy identity of the GA-type schemes
///
/// ```text
/// ‖u^{n+1}‖² − ‖u^n‖² + ‖u^{n+1} − u^n‖² + 2Δtν‖∇u^{n+1}‖²
///   + Δtν_T(‖∇u^{n+1} − G^n‖² + ‖∇u^n − G^n‖² + ‖∇u^{n+1}‖² − ‖∇u^n‖²)
///   + κΔt(∫a_n|u_i^{n+1}|² − ∫a_{n−1}|u_j^n|² + ∫|a_n^{1/2}u_i^{n+1} − a_{n−1}^{1/2}u_j^n|²)
///   = 2Δt(f^{n+1}, u^{n+1}) + 2Δt W^{n+1}
/// ```
///
/// summed over both domains and over every regular step of the
/// trajectory. `W` is the constraint work recorded by the solver; it
/// vanishes for homogeneous boundary data.
pub fn verify_discrete_energy_law(
    space: &Space,
    trajectory: &Trajectory,
    config: &SchemeConfig,
    problem: &dyn Problem,
) -> Result<EnergyLawCheck, DiagnosticsError> {
    let nu_t = config.effective_nu_t();
    let dt = config.dt;
    let asm = Domain::BOTH.map(|d| DomainAssembler::new(space.domain(d)));
    let (mut lhs, mut rhs, mut scale) = (0.0, 0.0, 0.0);
    let mut steps = 0;
    let states = &trajectory.states;
    for n in 1..states.len().saturating_sub(1) {
        let (old, cur, new) = (&states[n - 1], &states[n], &states[n + 1]);
        let trace = sample_interface_trace(space, cur.velocities(), Some(old.velocities()));
        let mut terms = Vec::new();
        for d in Domain::BOTH {
            let i = d.index();
            let (un, un1) = (&cur.domains[i].u, &new.domains[i].u);
            let a = &asm[i];
            let incr: Vec<f64> = un1.iter().zip(un).map(|(x, y)| x - y).collect();
            terms.push(a.l2_norm_sq(un1));
            terms.push(-a.l2_norm_sq(un));
            terms.push(a.l2_norm_sq(&incr));
            terms.push(2.0 * dt * config.nu[i] * a.gradient_norm_sq(un1));
            if nu_t > 0.0 {
                let g = cur.domains[i].g.as_deref().ok_or(DiagnosticsError::MissingProjection)?;
                terms.push(dt * nu_t * a.gradient_defect_sq(un1, Some(g)));
                terms.push(dt * nu_t * a.gradient_defect_sq(un, Some(g)));
                terms.push(dt * nu_t * a.gradient_norm_sq(un1));
                terms.push(-dt * nu_t * a.gradient_norm_sq(un));
            }
            let k = config.interface_coefficient(d);
            let new_i = trace.values(space, d, un1);
            let cur_j = trace.values(space, d.other(), &cur.domains[d.other().index()].u);
            let (mut own, mut lag, mut sq) = (0.0, 0.0, 0.0);
            for (q, p) in trace.points.iter().enumerate() {
                let an = p.jump;
                let ap = p.jump_prev.expect("trace sampled with lag");
                let (x, y) = (new_i[q], cur_j[q]);
                own += p.weight * an * (x[0] * x[0] + x[1] * x[1]);
                lag += p.weight * ap * (y[0] * y[0] + y[1] * y[1]);
                let (s, r) = (an.sqrt(), ap.sqrt());
                sq += p.weight * ((s * x[0] - r * y[0]).powi(2) + (s * x[1] - r * y[1]).powi(2));
            }
            terms.push(k * dt * own);
            terms.push(-k * dt * lag);
            terms.push(k * dt * sq);
            if problem.has_forcing() {
                rhs += 2.0 * dt * a.load_product(un1, |x| problem.forcing(d, new.t, x));
            }
        }
        let info = trajectory.infos.get(n + 1).copied().unwrap_or_default();
        rhs += 2.0 * dt * (info.boundary_work[0] + info.boundary_work[1]);
        lhs += terms.iter().sum::<f64>();
        scale += terms.iter().map(|t| t.abs()).sum::<f64>();
        steps += 1;
    }
    let diff = (lhs - rhs).abs();
    let denom = if rhs != 0.0 { rhs.abs() } else { scale };
    let residual = if diff == 0.0 { 0.0 } else { diff / denom };
    Ok(EnergyLawCheck {
        lhs,
        rhs,
        residual,
        steps,
    })
}

/// Both sides of the a-priori stability bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// Evaluates the unconditional stability bound over a GA-type trajectory:
///
/// ```text
/// ‖u^M‖² + Σ‖u^{n+1} − u^n‖² + Δtν Σ‖∇u^{n+1}‖²
///   + Δtν_T Σ(‖∇u^{n+1} − G^n‖² + ‖∇u^n − G^n‖²) + Δtν_T‖∇u^M‖²
///   + κΔt∫a_{M−1}|u^M|² + κΔt Σ∫|a_n^{1/2}u_i^{n+1} − a_{n−1}^{1/2}u_j^n|²
/// ≤ ‖u^1‖² + κΔt∫a_0|u^1|² + Δtν_T‖∇u^1‖² + Δt Σ ν⁻¹‖f^{n+1}‖²_{−1} + 2Δt Σ W^{n+1}
/// ```
///
/// with `‖f‖_{−1}` replaced by `C_p‖f‖`, `C_p` the domain diameter.
pub fn verify_stability_bound(
    space: &Space,
    trajectory: &Trajectory,
    config: &SchemeConfig,
    problem: &dyn Problem,
) -> Result<StabilityCheck, DiagnosticsError> {
    let states = &trajectory.states;
    if states.len() < 2 {
        return Ok(StabilityCheck {
            lhs: 0.0,
            rhs: 0.0,
            satisfied: true,
        });
    }
    let nu_t = config.effective_nu_t();
    let dt = config.dt;
    let asm = Domain::BOTH.map(|d| DomainAssembler::new(space.domain(d)));
    let cp = Domain::BOTH.map(|d| domain_diameter(space, d));
    let (mut lhs, mut rhs) = (0.0, 0.0);
    let last = states.len() - 1;
    for d in Domain::BOTH {
        let i = d.index();
        lhs += asm[i].l2_norm_sq(&states[last].domains[i].u);
        rhs += asm[i].l2_norm_sq(&states[1].domains[i].u);
        lhs += dt * nu_t * asm[i].gradient_norm_sq(&states[last].domains[i].u);
        rhs += dt * nu_t * asm[i].gradient_norm_sq(&states[1].domains[i].u);
    }
    // Interface terms at the first and last level.
    let end_terms = |n: usize| -> f64 {
        let tr = sample_interface_trace(space, states[n].velocities(), Some(states[n - 1].velocities()));
        Domain::BOTH
            .iter()
            .map(|&d| {
                let k = config.interface_coefficient(d);
                k * dt * tr.weighted_square(space, d, &states[n].domains[d.index()].u, |p| p.jump_prev.unwrap_or(0.0))
            })
            .sum()
    };
    lhs += end_terms(last);
    rhs += end_terms(1);
    for n in 1..last {
        let (old, cur, new) = (&states[n - 1], &states[n], &states[n + 1]);
        let trace = sample_interface_trace(space, cur.velocities(), Some(old.velocities()));
        for d in Domain::BOTH {
            let i = d.index();
            let (un, un1) = (&cur.domains[i].u, &new.domains[i].u);
            let a = &asm[i];
            let incr: Vec<f64> = un1.iter().zip(un).map(|(x, y)| x - y).collect();
            lhs += a.l2_norm_sq(&incr);
            lhs += dt * config.nu[i] * a.gradient_norm_sq(un1);
            if nu_t > 0.0 {
                let g = cur.domains[i].g.as_deref().ok_or(DiagnosticsError::MissingProjection)?;
                lhs += dt * nu_t * (a.gradient_defect_sq(un1, Some(g)) + a.gradient_defect_sq(un, Some(g)));
            }
            let k = config.interface_coefficient(d);
            let new_i = trace.values(space, d, un1);
            let cur_j = trace.values(space, d.other(), &cur.domains[d.other().index()].u);
            for (q, p) in trace.points.iter().enumerate() {
                let (s, r) = (p.jump.sqrt(), p.jump_prev.unwrap_or(0.0).sqrt());
                let (x, y) = (new_i[q], cur_j[q]);
                lhs += k * dt * p.weight * ((s * x[0] - r * y[0]).powi(2) + (s * x[1] - r * y[1]).powi(2));
            }
            if problem.has_forcing() {
                let f = |x| problem.forcing(d, new.t, x);
                let fl2 = l2_norm_sq_of(a, f);
                rhs += dt / config.nu[i] * cp[i] * cp[i] * fl2;
            }
        }
        let info = trajectory.infos.get(n + 1).copied().unwrap_or_default();
        rhs += 2.0 * dt * (info.boundary_work[0] + info.boundary_work[1]);
    }
    Ok(StabilityCheck {
        lhs,
        rhs,
        satisfied: lhs <= rhs * (1.0 + 1e-9),
    })
}

fn l2_norm_sq_of(asm: &DomainAssembler<'_>, f: impl Fn([f64; 2]) -> [f64; 2]) -> f64 {
    let w = asm.rule().weights.clone();
    let mut s = 0.0;
    for t in 0..asm.space.n_triangles() {
        let det = asm.space.geometry[t].det.abs();
        for (q, x) in asm.element_points(t).iter().enumerate() {
            let v = f(*x);
            s += w[q] * det * (v[0] * v[0] + v[1] * v[1]);
        }
    }
    s
}

/// Largest vertex-to-vertex distance of a domain.
pub fn domain_diameter(space: &Space, d: Domain) -> f64 {
    let ds = space.domain(d);
    let pts = &ds.node_coords[..ds.n_vertices];
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in pts {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    Diverged,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Diverged => "diverged",
        }
    }
}

/// Input row of a refinement study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceEntry {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub err_l2l2: f64,
    pub err_l2h1: f64,
    pub status: RowStatus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub err_l2l2: f64,
    /// `log₂(e_{N/2}/e_N)`, blank on the first row.
    pub rate_l2: Option<f64>,
    pub err_l2h1: f64,
    pub rate_h1: Option<f64>,
    pub status: RowStatus,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn last(&self) -> Option<&ConvergenceRow> {
        self.rows.last()
    }
}

/// Observed orders by `log₂` of consecutive error ratios.
///
/// ```
/// use aoflow::diagnostics::{convergence_rates, ConvergenceEntry, RowStatus};
/// let e = |n, l2, h1| ConvergenceEntry { n, h: 1.0 / n as f64, dt: 1.0 / n as f64,
///     err_l2l2: l2, err_l2h1: h1, status: RowStatus::Ok };
/// let t = convergence_rates(&[e(8, 8e-2, 1.0), e(16, 4e-2, 1.0)]).unwrap();
/// assert_eq!(t.rows[1].rate_l2, Some(1.0));
/// assert_eq!(t.rows[1].rate_h1, Some(0.0));
/// ```
pub fn convergence_rates(entries: &[ConvergenceEntry]) -> Result<ConvergenceTable, DiagnosticsError> {
    if entries.is_empty() {
        return Err(DiagnosticsError::TooFewRows);
    }
    for w in entries.windows(2) {
        if w[1].n != 2 * w[0].n {
            return Err(DiagnosticsError::NonDoubling(w[0].n, w[1].n));
        }
    }
    let rate = |a: f64, b: f64| {
        let r = (a / b).log2();
        r.is_finite().then_some(r)
    };
    let rows = entries
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let prev = (k > 0).then(|| entries[k - 1]);
            let ok = |p: &ConvergenceEntry| p.status == RowStatus::Ok && e.status == RowStatus::Ok;
            ConvergenceRow {
                n: e.n,
                h: e.h,
                dt: e.dt,
                err_l2l2: e.err_l2l2,
                rate_l2: prev.filter(ok).and_then(|p| rate(p.err_l2l2, e.err_l2l2)),
                err_l2h1: e.err_l2h1,
                rate_h1: prev.filter(ok).and_then(|p| rate(p.err_l2h1, e.err_l2h1)),
                status: e.status,
            }
        })
        .collect();
    Ok(ConvergenceTable { rows })
}

/// `‖u_d^n‖` per domain at every level.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NormTrace {
    pub t: Vec<f64>,
    pub norms: [Vec<f64>; 2],
}

/// Streaming version of [`norm_trace`].
#[derive(Debug)]
pub struct NormTracker<'a> {
    asm: [DomainAssembler<'a>; 2],
    trace: NormTrace,
}

impl<'a> NormTracker<'a> {
    pub fn new(space: &'a Space) -> Self {
        NormTracker {
            asm: Domain::BOTH.map(|d| DomainAssembler::new(space.domain(d))),
            trace: NormTrace::default(),
        }
    }

    /// Records a level and returns its per-domain norms.
    pub fn observe(&mut self, state: &State) -> [f64; 2] {
        let n = Domain::BOTH.map(|d| self.asm[d.index()].l2_norm_sq(&state.domains[d.index()].u).sqrt());
        self.trace.t.push(state.t);
        self.trace.norms[0].push(n[0]);
        self.trace.norms[1].push(n[1]);
        n
    }

    pub fn trace(&self) -> &NormTrace {
        &self.trace
    }

    pub fn into_trace(self) -> NormTrace {
        self.trace
    }
}

pub fn norm_trace(space: &Space, trajectory: &Trajectory) -> NormTrace {
    let mut t = NormTracker::new(space);
    for s in &trajectory.states {
        t.observe(s);
    }
    t.into_trace()
}
