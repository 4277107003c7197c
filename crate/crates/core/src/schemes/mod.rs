//! Time stepping for the coupled flow: the geometric-average (GA) and
//! two-way monolithic (TWM) schemes, their VMS-stabilized versions, the
//! IMEX start-up step and the Picard loop for the convection term.
//!
//! All schemes are backward Euler in time. The interface friction
//! coefficient `κ|[u^n]|` is always lagged; GA additionally moves the
//! other side's velocity to the right-hand side with the weight
//! `κ|[u^n]|^{1/2}|[u^{n−1}]|^{1/2}`, so the two domains decouple.

mod system;

use std::fmt;
use std::str::FromStr;

use crate::assembly::{ConvectionForm, DomainAssembler, GradientProjector};
use crate::error::{SchemeError, SolverError};
use crate::interface::{assemble_interface_blocks, sample_interface_trace, InterfaceContribution, InterfaceVariant};
use crate::mesh::Domain;
use crate::problem::Problem;
use crate::solver::CsrMatrix;
use crate::space::Space;

pub use system::SaddleSystem;

pub const DEFAULT_PICARD_TOL: f64 = 1e-10;
pub const DEFAULT_PICARD_MAX: usize = 50;
/// Required residual reduction per defect-correction step.
pub const CHORD_RATIO: f64 = 0.5;
const CHORD_MAX_FACTOR: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Ga,
    GaVms,
    /// GA-VMS with the interface terms scaled by `(ν_i + ν_T)/ν_i`.
    GaVmsAlt,
    Twm,
    TwmVms,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 5] = [
        SchemeKind::Ga,
        SchemeKind::GaVms,
        SchemeKind::GaVmsAlt,
        SchemeKind::Twm,
        SchemeKind::TwmVms,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Ga => "ga",
            SchemeKind::GaVms => "ga-vms",
            SchemeKind::GaVmsAlt => "ga-vms-alt",
            SchemeKind::Twm => "twm",
            SchemeKind::TwmVms => "twm-vms",
        }
    }

    pub fn is_vms(self) -> bool {
        matches!(self, SchemeKind::GaVms | SchemeKind::GaVmsAlt | SchemeKind::TwmVms)
    }

    pub fn is_monolithic(self) -> bool {
        matches!(self, SchemeKind::Twm | SchemeKind::TwmVms)
    }

    /// Number of stored levels before the first regular step.
    pub fn initial_levels(self) -> usize {
        if self.is_monolithic() {
            1
        } else {
            2
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown scheme `{s}` (expected ga, ga-vms, ga-vms-alt, twm or twm-vms)"))
    }
}

/// How the GA schemes obtain their second starting level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Bootstrap {
    /// One IMEX backward-Euler step.
    #[default]
    Imex,
    /// Interpolate the exact solution at `t = Δt`.
    Exact,
}

impl FromStr for Bootstrap {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "imex" => Ok(Bootstrap::Imex),
            "exact" => Ok(Bootstrap::Exact),
            _ => Err(format!("expected `imex` or `exact`, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub scheme: SchemeKind,
    /// Kinematic viscosities, indexed by `Domain::index`.
    pub nu: [f64; 2],
    pub kappa: f64,
    /// Eddy viscosity; ignored by the unstabilized schemes.
    pub nu_t: f64,
    pub dt: f64,
    pub t_end: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub convection: ConvectionForm,
    pub bootstrap: Bootstrap,
    /// Solve the two GA domain problems on separate threads.
    pub concurrent: bool,
}

impl SchemeConfig {
    pub fn new(scheme: SchemeKind, nu1: f64, nu2: f64, kappa: f64, dt: f64, t_end: f64) -> Self {
        SchemeConfig {
            scheme,
            nu: [nu1, nu2],
            kappa,
            nu_t: 0.0,
            dt,
            t_end,
            picard_tol: DEFAULT_PICARD_TOL,
            picard_max: DEFAULT_PICARD_MAX,
            convection: ConvectionForm::Skew,
            bootstrap: Bootstrap::Imex,
            concurrent: false,
        }
    }

    pub fn with_nu_t(mut self, nu_t: f64) -> Self {
        self.nu_t = nu_t;
        self
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        let bad = |m: String| Err(SchemeError::InvalidConfig(m));
        if !(self.nu[0] > 0.0 && self.nu[1] > 0.0) {
            return bad(format!("viscosities must be positive, got {:?}", self.nu));
        }
        if !(self.nu_t >= 0.0) {
            return bad(format!("nu_t must be non-negative, got {}", self.nu_t));
        }
        if !(self.kappa >= 0.0) {
            return bad(format!("kappa must be non-negative, got {}", self.kappa));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.picard_tol > 0.0) || self.picard_max == 0 {
            return bad("picard tolerance and cap must be positive".into());
        }
        self.n_steps().map(|_| ())
    }

    /// `T/Δt`, required to be an integer.
    pub fn n_steps(&self) -> Result<usize, SchemeError> {
        let r = self.t_end / self.dt;
        let m = r.round();
        if !(m >= 1.0) || (r - m).abs() > 1e-9 {
            return Err(SchemeError::InvalidConfig(format!(
                "T/dt = {r} is not a positive integer"
            )));
        }
        Ok(m as usize)
    }

    /// Eddy viscosity actually used by the scheme.
    pub fn effective_nu_t(&self) -> f64 {
        if self.scheme.is_vms() {
            self.nu_t
        } else {
            0.0
        }
    }

    /// Interface coefficient tested in domain `d`.
    pub fn interface_coefficient(&self, d: Domain) -> f64 {
        let nu = self.nu[d.index()];
        match self.scheme {
            SchemeKind::GaVmsAlt => self.kappa * (nu + self.nu_t) / nu,
            _ => self.kappa,
        }
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.dt
    }
}

/// Unknowns of one domain at the current level.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainState {
    /// Interleaved P2 velocity at level n.
    pub u: Vec<f64>,
    /// Velocity at level n−1, once it exists.
    pub u_prev: Option<Vec<f64>>,
    /// P1 pressure at level n, mean zero.
    pub p: Vec<f64>,
    /// Projected gradient `G^{H,n}` (VMS schemes only).
    pub g: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub domains: [DomainState; 2],
    pub level: usize,
    pub t: f64,
}

impl State {
    pub fn domain(&self, d: Domain) -> &DomainState {
        &self.domains[d.index()]
    }

    pub fn velocities(&self) -> [&[f64]; 2] {
        [&self.domains[0].u, &self.domains[1].u]
    }

    fn previous_velocities(&self) -> Option<[&[f64]; 2]> {
        Some([self.domains[0].u_prev.as_deref()?, self.domains[1].u_prev.as_deref()?])
    }
}

/// Bookkeeping of the step that produced a level.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepInfo {
    pub level: usize,
    pub t: f64,
    /// Linear solves spent on each domain (shared by both for TWM).
    pub picard_iterations: [usize; 2],
    /// Final Picard residual per domain.
    pub residual: [f64; 2],
    /// Work of the constraint reactions, `Σ_c x_c (K x − b)_c` over
    /// prescribed velocity dofs, per domain. Zero for homogeneous data.
    pub boundary_work: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    /// Regular steps taken (excluding the start-up levels).
    pub steps: usize,
    pub final_level: usize,
    pub final_time: f64,
    /// True if the observer ended the run early.
    pub stopped: bool,
    pub picard_iterations: usize,
}

/// A system together with its time-independent matrix values.
#[derive(Debug)]
struct Block {
    sys: SaddleSystem,
    base: Vec<f64>,
}

struct Context<'a> {
    space: &'a Space,
    problem: &'a dyn Problem,
    config: SchemeConfig,
    asm: [DomainAssembler<'a>; 2],
    mass: [CsrMatrix; 2],
    stiffness: [CsrMatrix; 2],
    div: [CsrMatrix; 2],
    projectors: Option<[GradientProjector; 2]>,
}

/// Advances a coupled problem with one of the schemes.
pub struct Simulator<'a> {
    ctx: Context<'a>,
    blocks: Vec<Block>,
}

impl fmt::Debug for Simulator<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Simulator")
            .field("config", &self.ctx.config)
            .field("blocks", &self.blocks.len())
            .finish()
    }
}

struct Outcome {
    u: Vec<f64>,
    p: Vec<f64>,
    iterations: usize,
    residual: f64,
    work: f64,
}

impl<'a> Simulator<'a> {
    pub fn new(space: &'a Space, problem: &'a dyn Problem, config: SchemeConfig) -> Result<Self, SchemeError> {
        config.validate()?;
        let asm = Domain::BOTH.map(|d| DomainAssembler::new(space.domain(d)));
        let mass = [asm[0].mass(), asm[1].mass()];
        let stiffness = [asm[0].stiffness(1.0)?, asm[1].stiffness(1.0)?];
        let div = [asm[0].divergence(), asm[1].divergence()];
        let projectors = if config.scheme.is_vms() {
            Some([GradientProjector::new(&asm[0])?, GradientProjector::new(&asm[1])?])
        } else {
            None
        };
        let ctx = Context {
            space,
            problem,
            config,
            asm,
            mass,
            stiffness,
            div,
            projectors,
        };
        let nu_t = ctx.config.effective_nu_t();
        let blocks = if ctx.config.scheme.is_monolithic() {
            let sys = SaddleSystem::new(space, &[&ctx.asm[0], &ctx.asm[1]], true);
            let base = ctx.base_values(&sys, &Domain::BOTH, nu_t);
            vec![Block { sys, base }]
        } else {
            Domain::BOTH
                .iter()
                .map(|&d| {
                    let sys = SaddleSystem::new(space, &[&ctx.asm[d.index()]], false);
                    let base = ctx.base_values(&sys, &[d], nu_t);
                    Block { sys, base }
                })
                .collect()
        };
        Ok(Simulator { ctx, blocks })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.ctx.config
    }

    pub fn space(&self) -> &Space {
        self.ctx.space
    }

    pub fn assembler(&self, d: Domain) -> &DomainAssembler<'a> {
        &self.ctx.asm[d.index()]
    }

    /// Level 0: interpolated initial velocity with the boundary data of
    /// `t = 0` imposed, zero pressure.
    pub fn initial_state(&self) -> Result<State, SchemeError> {
        let ctx = &self.ctx;
        let mut domains = Vec::with_capacity(2);
        for d in Domain::BOTH {
            let ds = ctx.space.domain(d);
            let mut u = ds.interpolate_velocity(|x| ctx.problem.initial_velocity(d, x));
            ds.apply_constraints(&mut u, |x| ctx.problem.boundary_velocity(d, 0.0, x));
            let g = ctx.project(d, &u)?;
            domains.push(DomainState {
                u,
                u_prev: None,
                p: vec![0.0; ds.n_pressure_dofs()],
                g,
            });
        }
        let [a, o]: [DomainState; 2] = domains.try_into().expect("two domains");
        Ok(State {
            domains: [a, o],
            level: 0,
            t: 0.0,
        })
    }

    /// Level 1 from the exact solution of the problem.
    pub fn exact_second_level(&self, state: &State) -> Result<State, SchemeError> {
        let ctx = &self.ctx;
        let t = ctx.config.time(state.level + 1);
        let mut next = state.clone();
        for d in Domain::BOTH {
            let ds = ctx.space.domain(d);
            let exact = |x| ctx.problem.exact_velocity(d, t, x);
            if exact(ds.node_coords[0]).is_none() {
                return Err(SchemeError::InvalidConfig(
                    "exact bootstrap needs a problem with a known solution".into(),
                ));
            }
            let mut u = ds.interpolate_velocity(|x| exact(x).unwrap_or([0.0; 2]));
            ds.apply_constraints(&mut u, |x| ctx.problem.boundary_velocity(d, t, x));
            let g = ctx.project(d, &u)?;
            let dst = &mut next.domains[d.index()];
            dst.u_prev = Some(std::mem::replace(&mut dst.u, u));
            dst.g = g;
        }
        next.level += 1;
        next.t = t;
        Ok(next)
    }

    /// One backward-Euler step per domain with physical viscosity, the
    /// implicit own interface term `κ|[u⁰]| u¹` and the explicit cross term
    /// `κ|[u⁰]| u_j⁰`; convection is linearized about `u⁰` (one solve).
    pub fn imex_bootstrap(&mut self, state: &State) -> Result<(State, StepInfo), SchemeError> {
        let ctx = &self.ctx;
        let trace = sample_interface_trace(ctx.space, state.velocities(), None);
        let kappa = [ctx.config.kappa; 2];
        let contrib = assemble_interface_blocks(ctx.space, &trace, InterfaceVariant::Imex, kappa)?;
        let t1 = ctx.config.time(state.level + 1);
        let mut outcomes = Vec::with_capacity(2);
        for d in Domain::BOTH {
            let ds = ctx.space.domain(d);
            let mut sys = SaddleSystem::new(ctx.space, &[&ctx.asm[d.index()]], false);
            let mut values = ctx.base_values(&sys, &[d], 0.0);
            sys.add_node_triplets(&mut values, d, d, &contrib.own[d.index()]);
            let un = &state.domain(d).u;
            ctx.add_convection(&sys, &mut values, d, un);
            let rhs = ctx.rhs(&sys, &[d], state, t1, &contrib, 0.0);
            let mut x = vec![0.0; sys.dim()];
            let (ur, _) = sys.ranges(d);
            x[ur.clone()].copy_from_slice(un);
            ds.apply_constraints(&mut x[ur], |p| ctx.problem.boundary_velocity(d, t1, p));
            sys.solve(&values, &rhs, &mut x)?;
            check_finite(&x)?;
            let residual = sys.relative_residual(&values, &rhs, &x);
            let work = sys.constraint_work(&values, &rhs, &x);
            let (ur, pr) = sys.ranges(d);
            outcomes.push(Outcome {
                u: x[ur].to_vec(),
                p: x[pr].to_vec(),
                iterations: 1,
                residual,
                work,
            });
        }
        self.finish(state, outcomes)
    }

    /// Advances one level with the configured scheme.
    pub fn step(&mut self, state: &State) -> Result<(State, StepInfo), SchemeError> {
        if self.ctx.config.scheme.is_monolithic() {
            self.step_monolithic(state)
        } else {
            self.step_ga(state)
        }
    }

    fn step_ga(&mut self, state: &State) -> Result<(State, StepInfo), SchemeError> {
        let ctx = &self.ctx;
        let prev = state.previous_velocities().ok_or(crate::error::AssemblyError::MissingLag)?;
        let trace = sample_interface_trace(ctx.space, state.velocities(), Some(prev));
        let coef = Domain::BOTH.map(|d| ctx.config.interface_coefficient(d));
        let contrib = assemble_interface_blocks(ctx.space, &trace, InterfaceVariant::GeometricAverage, coef)?;
        let t1 = ctx.config.time(state.level + 1);
        let outcomes: Vec<Result<Outcome, SchemeError>> = if ctx.config.concurrent {
            std::thread::scope(|s| {
                let handles: Vec<_> = self
                    .blocks
                    .iter_mut()
                    .zip(Domain::BOTH)
                    .map(|(block, d)| {
                        let contrib = &contrib;
                        s.spawn(move || ctx.solve_ga_domain(block, d, state, t1, contrib))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("domain solve panicked")).collect()
            })
        } else {
            self.blocks
                .iter_mut()
                .zip(Domain::BOTH)
                .map(|(block, d)| ctx.solve_ga_domain(block, d, state, t1, &contrib))
                .collect()
        };
        let outcomes = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
        self.finish(state, outcomes)
    }

    fn step_monolithic(&mut self, state: &State) -> Result<(State, StepInfo), SchemeError> {
        let ctx = &self.ctx;
        let trace = sample_interface_trace(ctx.space, state.velocities(), None);
        let coef = Domain::BOTH.map(|d| ctx.config.interface_coefficient(d));
        let contrib = assemble_interface_blocks(ctx.space, &trace, InterfaceVariant::Monolithic, coef)?;
        let t1 = ctx.config.time(state.level + 1);
        let block = &mut self.blocks[0];
        let mut values = block.base.clone();
        for d in Domain::BOTH {
            block.sys.add_node_triplets(&mut values, d, d, &contrib.own[d.index()]);
            block.sys.add_node_triplets(&mut values, d, d.other(), &contrib.cross[d.index()]);
        }
        let rhs = ctx.rhs(&block.sys, &Domain::BOTH, state, t1, &contrib, ctx.config.effective_nu_t());
        let mut x = ctx.initial_guess(&block.sys, &Domain::BOTH, state, t1);
        let (values, iterations, residual) = ctx.picard(&mut block.sys, &values, &rhs, &mut x, &Domain::BOTH)?;
        let mut outcomes = Vec::with_capacity(2);
        for d in Domain::BOTH {
            let (ur, pr) = block.sys.ranges(d);
            let work = partial_work(&block.sys, &values, &rhs, &x, ur.clone());
            outcomes.push(Outcome {
                u: x[ur].to_vec(),
                p: x[pr].to_vec(),
                iterations,
                residual,
                work,
            });
        }
        self.finish(state, outcomes)
    }

    fn finish(&self, state: &State, outcomes: Vec<Outcome>) -> Result<(State, StepInfo), SchemeError> {
        let ctx = &self.ctx;
        let level = state.level + 1;
        let t = ctx.config.time(level);
        let mut info = StepInfo {
            level,
            t,
            ..StepInfo::default()
        };
        let mut next = state.clone();
        for (d, o) in Domain::BOTH.into_iter().zip(outcomes) {
            let i = d.index();
            let mut p = o.p;
            ctx.space.domain(d).remove_pressure_mean(&mut p);
            let g = ctx.project(d, &o.u)?;
            let dst = &mut next.domains[i];
            dst.u_prev = Some(std::mem::replace(&mut dst.u, o.u));
            dst.p = p;
            dst.g = g;
            info.picard_iterations[i] = o.iterations;
            info.residual[i] = o.residual;
            info.boundary_work[i] = o.work;
        }
        next.level = level;
        next.t = t;
        Ok((next, info))
    }

    /// Runs from level 0 to `T`, calling `observer` on every level
    /// including the start-up ones.
    pub fn run(
        &mut self,
        mut observer: impl FnMut(&State, &StepInfo) -> Control,
    ) -> Result<RunSummary, SchemeError> {
        let m = self.ctx.config.n_steps()?;
        let at = |level: usize, dt: f64| {
            move |e: SchemeError| SchemeError::AtLevel {
                time: level as f64 * dt,
                level,
                source: Box::new(e),
            }
        };
        let dt = self.ctx.config.dt;
        let mut summary = RunSummary {
            steps: 0,
            final_level: 0,
            final_time: 0.0,
            stopped: false,
            picard_iterations: 0,
        };
        let mut state = self.initial_state().map_err(at(0, dt))?;
        let info0 = StepInfo::default();
        if observer(&state, &info0) == Control::Stop {
            summary.stopped = true;
            return Ok(summary);
        }
        if !self.ctx.config.scheme.is_monolithic() {
            let (s1, info) = match self.ctx.config.bootstrap {
                Bootstrap::Imex => self.imex_bootstrap(&state),
                Bootstrap::Exact => self.exact_second_level(&state).map(|s| {
                    let info = StepInfo {
                        level: 1,
                        t: s.t,
                        ..StepInfo::default()
                    };
                    (s, info)
                }),
            }
            .map_err(at(1, dt))?;
            state = s1;
            summary.final_level = 1;
            summary.final_time = state.t;
            summary.picard_iterations += info.picard_iterations[0] + info.picard_iterations[1];
            if observer(&state, &info) == Control::Stop {
                summary.stopped = true;
                return Ok(summary);
            }
        }
        while state.level < m {
            let level = state.level + 1;
            let (next, info) = self.step(&state).map_err(at(level, dt))?;
            state = next;
            summary.steps += 1;
            summary.final_level = level;
            summary.final_time = state.t;
            summary.picard_iterations += if self.ctx.config.scheme.is_monolithic() {
                info.picard_iterations[0]
            } else {
                info.picard_iterations[0] + info.picard_iterations[1]
            };
            if observer(&state, &info) == Control::Stop {
                summary.stopped = true;
                break;
            }
        }
        Ok(summary)
    }
}

impl Context<'_> {
    fn project(&self, d: Domain, u: &[f64]) -> Result<Option<Vec<f64>>, SchemeError> {
        match &self.projectors {
            Some(p) => Ok(Some(p[d.index()].project(&self.asm[d.index()], u)?)),
            None => Ok(None),
        }
    }

    /// `M/Δt + (ν + ν_T) K` and the divergence blocks.
    fn base_values(&self, sys: &SaddleSystem, domains: &[Domain], nu_t: f64) -> Vec<f64> {
        let mut v = sys.zero_values();
        for &d in domains {
            let i = d.index();
            sys.add_scalar(&mut v, d, &self.mass[i], 1.0 / self.config.dt);
            sys.add_scalar(&mut v, d, &self.stiffness[i], self.config.nu[i] + nu_t);
            sys.add_divergence(&mut v, d, &self.div[i]);
        }
        v
    }

    fn add_convection(&self, sys: &SaddleSystem, values: &mut [f64], d: Domain, w: &[f64]) {
        let c = self.asm[d.index()].convection(w, self.config.convection);
        sys.add_scalar(values, d, &c, 1.0);
    }

    /// `M u^n/Δt + (f^{n+1}, v) + interface rhs + ν_T(G^{H,n}, ∇v)`.
    fn rhs(
        &self,
        sys: &SaddleSystem,
        domains: &[Domain],
        state: &State,
        t1: f64,
        contrib: &InterfaceContribution,
        nu_t: f64,
    ) -> Vec<f64> {
        let mut b = vec![0.0; sys.dim()];
        for &d in domains {
            let i = d.index();
            let (ur, _) = sys.ranges(d);
            let bu = &mut b[ur];
            let un = &state.domains[i].u;
            let inv_dt = 1.0 / self.config.dt;
            scalar_mul_add(&self.mass[i], un, inv_dt, bu);
            if self.problem.has_forcing() {
                let f = self.asm[i].load(|x| self.problem.forcing(d, t1, x));
                add_into(bu, &f);
            }
            add_into(bu, &contrib.rhs[i]);
            if nu_t > 0.0 {
                if let Some(g) = &state.domains[i].g {
                    add_into(bu, &self.asm[i].vms_rhs(g, nu_t));
                }
            }
        }
        b
    }

    /// Extrapolated velocity `2u^n − u^{n−1}` with the new boundary data,
    /// and the previous pressure.
    fn initial_guess(&self, sys: &SaddleSystem, domains: &[Domain], state: &State, t1: f64) -> Vec<f64> {
        let mut x = vec![0.0; sys.dim()];
        for &d in domains {
            let ds = &state.domains[d.index()];
            let (ur, pr) = sys.ranges(d);
            match &ds.u_prev {
                Some(up) => {
                    for (k, xi) in x[ur.clone()].iter_mut().enumerate() {
                        *xi = 2.0 * ds.u[k] - up[k];
                    }
                }
                None => x[ur.clone()].copy_from_slice(&ds.u),
            }
            self.space
                .domain(d)
                .apply_constraints(&mut x[ur], |p| self.problem.boundary_velocity(d, t1, p));
            x[pr].copy_from_slice(&ds.p);
        }
        // The pinned pressure dof keeps the value zero.
        for i in 0..x.len() {
            if sys.is_constrained(i) && domains.iter().any(|&d| sys.ranges(d).1.contains(&i)) {
                x[i] = 0.0;
            }
        }
        x
    }

    /// Fixed-point iteration in the advecting field, `K(x) x = b`.
    ///
    /// A full iteration factors `K(x_k)`. While the stored factors still
    /// contract the residual by at least [`CHORD_RATIO`] per step they are
    /// reused for defect corrections, including across time steps. Only
    /// full iterations count against `picard_max`. Returns the matrix
    /// values at the accepted iterate, the number of linear solves and the
    /// final residual.
    fn picard(
        &self,
        sys: &mut SaddleSystem,
        fixed: &[f64],
        rhs: &[f64],
        x: &mut [f64],
        domains: &[Domain],
    ) -> Result<(Vec<f64>, usize, f64), SchemeError> {
        let mut trace = Vec::new();
        let (mut full, mut chord_steps) = (0, 0);
        let mut chord = sys.has_factors();
        let mut last_was_chord = false;
        let diverged = |solves: usize, trace: Vec<f64>| SchemeError::PicardDivergence {
            iterations: solves,
            trace,
        };
        loop {
            let mut values = fixed.to_vec();
            for &d in domains {
                let (ur, _) = sys.ranges(d);
                self.add_convection(sys, &mut values, d, &x[ur]);
            }
            let r = sys.relative_residual(&values, rhs, x);
            let prev = trace.last().copied();
            trace.push(r);
            if !r.is_finite() {
                return Err(diverged(full + chord_steps, trace));
            }
            if r <= self.config.picard_tol {
                return Ok((values, full + chord_steps, r));
            }
            if last_was_chord && prev.is_some_and(|p| r > CHORD_RATIO * p) {
                chord = false;
            }
            if chord && chord_steps < CHORD_MAX_FACTOR * self.config.picard_max {
                last_was_chord = true;
                chord_steps += 1;
                match sys.correct(&values, rhs, x) {
                    Ok(()) => continue,
                    Err(SolverError::NonFinite) => return Err(diverged(full + chord_steps, trace)),
                    Err(e) => return Err(e.into()),
                }
            }
            if full >= self.config.picard_max {
                return Err(diverged(full + chord_steps, trace));
            }
            last_was_chord = false;
            chord = true;
            full += 1;
            match sys.solve(&values, rhs, x) {
                Ok(()) => {}
                Err(SolverError::NonFinite) => return Err(diverged(full + chord_steps, trace)),
                Err(e) => return Err(e.into()),
            }
        }
    }

    fn solve_ga_domain(
        &self,
        block: &mut Block,
        d: Domain,
        state: &State,
        t1: f64,
        contrib: &InterfaceContribution,
    ) -> Result<Outcome, SchemeError> {
        let mut values = block.base.clone();
        block.sys.add_node_triplets(&mut values, d, d, &contrib.own[d.index()]);
        let rhs = self.rhs(&block.sys, &[d], state, t1, contrib, self.config.effective_nu_t());
        let mut x = self.initial_guess(&block.sys, &[d], state, t1);
        let (values, iterations, residual) = self.picard(&mut block.sys, &values, &rhs, &mut x, &[d])?;
        let work = block.sys.constraint_work(&values, &rhs, &x);
        let (ur, pr) = block.sys.ranges(d);
        Ok(Outcome {
            u: x[ur].to_vec(),
            p: x[pr].to_vec(),
            iterations,
            residual,
            work,
        })
    }
}

fn check_finite(x: &[f64]) -> Result<(), SchemeError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SchemeError::PicardDivergence {
            iterations: 1,
            trace: vec![f64::NAN],
        })
    }
}

/// Constraint work restricted to the rows in `range`.
fn partial_work(sys: &SaddleSystem, values: &[f64], rhs: &[f64], x: &[f64], range: std::ops::Range<usize>) -> f64 {
    let r = sys.residual(values, rhs, x);
    range.filter(|&i| sys.is_constrained(i)).map(|i| x[i] * r[i]).sum()
}

fn add_into(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// `out += s · (M ⊗ I₂) u` for a scalar nodal matrix `M`.
fn scalar_mul_add(m: &CsrMatrix, u: &[f64], s: f64, out: &mut [f64]) {
    let p = m.pattern();
    for r in 0..p.n_rows() {
        let (mut a, mut b) = (0.0, 0.0);
        for k in p.row(r) {
            let c = p.col_idx()[k];
            a += m.values()[k] * u[2 * c];
            b += m.values()[k] * u[2 * c + 1];
        }
        out[2 * r] += s * a;
        out[2 * r + 1] += s * b;
    }
}
