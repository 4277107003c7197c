//! Run configuration, experiment drivers and file output.
//!
//! Each driver has a library form returning its results (`run_*`) and a
//! command form writing the CSV files (`cmd_*`). Outputs for scheme `s`
//! go to `<out>/<s>/`.

pub mod config;
pub mod vtu;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::diagnostics::{
    convergence_rates, ConvergenceEntry, ConvergenceTable, EnergyReport, EnergyTracker, ErrorAccumulator,
    NormTrace, NormTracker, RowStatus,
};
use crate::error::{RunError, SchemeError};
use crate::manufactured::ManufacturedProblem;
use crate::mesh::{generate_step_mesh, generate_two_domain_mesh, CoupledMesh, Domain};
use crate::problem::{SineVortexProblem, StepProblem};
use crate::schemes::{Control, SchemeKind, Simulator};
use crate::space::Space;

pub use config::{Experiment, MeshSpec, NuT, RunConfig, TimeStep};
pub use vtu::{render_vtu, write_vtu};

/// A step is blown up once either domain's velocity norm exceeds this.
pub const BLOWUP_NORM: f64 = 1e3;

pub const CONVERGENCE_HEADER: &str = "N,h,dt,err_l2l2,rate_l2,err_l2h1,rate_h1,status";
pub const ENERGY_HEADER: &str = "t,ke_atm,ke_ocean,diss_atm,diss_ocean,aed,total_atm,total_ocean";
pub const STEP_HEADER: &str = "t,norm_atm,norm_ocean,blowup_flag";

fn build_mesh(spec: MeshSpec) -> Result<CoupledMesh, RunError> {
    Ok(match spec {
        MeshSpec::TwoSquare { n } => generate_two_domain_mesh(n)?,
        MeshSpec::Step { h } => generate_step_mesh(h)?,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), RunError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| RunError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| RunError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Refinement study on the manufactured solution.
pub fn run_convergence(config: &RunConfig, scheme: SchemeKind) -> Result<ConvergenceTable, RunError> {
    let problem = ManufacturedProblem::new(config.a, config.b, config.kappa, config.nu[0], config.nu[1]);
    let mut entries = Vec::new();
    for &n in &config.refinement {
        let space = Space::new(generate_two_domain_mesh(n)?);
        let sc = config.scheme_config(scheme, n, space.h());
        let mut sim = Simulator::new(&space, &problem, sc.clone())?;
        let mut acc = ErrorAccumulator::new(&space, &problem, sc.dt);
        let mut norms = NormTracker::new(&space);
        let mut blown = false;
        let result = sim.run(|s, _| {
            acc.observe(s);
            if norms.observe(s).iter().any(|v| !(*v <= BLOWUP_NORM)) {
                blown = true;
                return Control::Stop;
            }
            Control::Continue
        });
        let status = match result {
            Ok(_) if !blown => RowStatus::Ok,
            Ok(_) => RowStatus::Diverged,
            Err(e) if e.is_divergence() => RowStatus::Diverged,
            Err(e) => return Err(e.into()),
        };
        let (l2, h1) = match status {
            RowStatus::Ok => acc.errors(),
            RowStatus::Diverged => (f64::NAN, f64::NAN),
        };
        entries.push(ConvergenceEntry {
            n,
            h: space.h(),
            dt: sc.dt,
            err_l2l2: l2,
            err_l2h1: h1,
            status,
        });
    }
    Ok(convergence_rates(&entries)?)
}

pub fn convergence_csv(table: &ConvergenceTable) -> String {
    let mut s = String::from(CONVERGENCE_HEADER);
    s.push('\n');
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.n,
            r.h,
            r.dt,
            r.err_l2l2,
            opt(r.rate_l2),
            r.err_l2h1,
            opt(r.rate_h1),
            r.status.as_str()
        );
    }
    s
}

/// Human-readable table in the layout of the paper's convergence tables.
pub fn format_convergence(scheme: SchemeKind, table: &ConvergenceTable) -> String {
    let mut s = format!("{scheme}\n{:>5} {:>12} {:>6} {:>12} {:>6}  status\n", "N", "L2(L2)", "rate", "L2(H1)", "rate");
    let rate = |r: Option<f64>| r.map(|v| format!("{v:6.2}")).unwrap_or_else(|| "     -".into());
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{:>5} {:>12.5e} {} {:>12.5e} {}  {}",
            r.n,
            r.err_l2l2,
            rate(r.rate_l2),
            r.err_l2h1,
            rate(r.rate_h1),
            r.status.as_str()
        );
    }
    s
}

pub fn cmd_convergence(config: &RunConfig, out: &Path) -> Result<Vec<(SchemeKind, ConvergenceTable)>, RunError> {
    let mut all = Vec::new();
    for &scheme in &config.schemes {
        let table = run_convergence(config, scheme)?;
        write_file(&out.join(scheme.name()).join("convergence.csv"), &convergence_csv(&table))?;
        print!("{}", format_convergence(scheme, &table));
        all.push((scheme, table));
    }
    Ok(all)
}

#[derive(Debug, Clone)]
pub struct EnergyOutcome {
    pub scheme: SchemeKind,
    pub report: EnergyReport,
    /// Time spent inside the solver loop, observers included.
    pub wall_clock: Duration,
}

/// Sine-vortex decay with walls at rest and no forcing.
pub fn run_energy(config: &RunConfig, scheme: SchemeKind) -> Result<EnergyOutcome, RunError> {
    let space = Space::new(build_mesh(config.mesh)?);
    let n = match config.mesh {
        MeshSpec::TwoSquare { n } => n,
        MeshSpec::Step { .. } => 1,
    };
    let sc = config.scheme_config(scheme, n, space.h());
    let problem = SineVortexProblem;
    let mut tracker = EnergyTracker::new(&space, &sc);
    let start = Instant::now();
    let mut sim = Simulator::new(&space, &problem, sc)?;
    sim.run(|s, _| {
        tracker.observe(s);
        Control::Continue
    })?;
    Ok(EnergyOutcome {
        scheme,
        report: tracker.into_report(),
        wall_clock: start.elapsed(),
    })
}

pub fn energy_csv(report: &EnergyReport) -> String {
    let mut s = String::from(ENERGY_HEADER);
    s.push('\n');
    let (ta, to) = (report.total(Domain::Atmosphere), report.total(Domain::Ocean));
    for k in 0..report.t.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            report.t[k],
            report.ke[0][k],
            report.ke[1][k],
            report.dissipation[0][k],
            report.dissipation[1][k],
            report.aed[k],
            ta[k],
            to[k]
        );
    }
    s
}

pub fn cmd_energy(config: &RunConfig, out: &Path) -> Result<Vec<EnergyOutcome>, RunError> {
    let mut all = Vec::new();
    let mut summary =
        String::from("scheme,final_t,final_aed,total_atm,total_ocean,initial_atm,initial_ocean,wall_clock_s\n");
    for &scheme in &config.schemes {
        let o = run_energy(config, scheme)?;
        write_file(&out.join(scheme.name()).join("energy.csv"), &energy_csv(&o.report))?;
        let r = &o.report;
        let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{},{}",
            scheme,
            last(&r.t),
            r.final_aed().unwrap_or(f64::NAN),
            last(&r.total(Domain::Atmosphere)),
            last(&r.total(Domain::Ocean)),
            r.initial[0],
            r.initial[1],
            o.wall_clock.as_secs_f64()
        );
        println!(
            "{scheme}: final AED {:.6e}, wall clock {:.2} s",
            r.final_aed().unwrap_or(f64::NAN),
            o.wall_clock.as_secs_f64()
        );
        all.push(o);
    }
    write_file(&out.join("energy_summary.csv"), &summary)?;
    Ok(all)
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub scheme: SchemeKind,
    pub trace: NormTrace,
    /// Time of the first blown-up level (norm above [`BLOWUP_NORM`] or a
    /// failed nonlinear solve).
    pub blowup: Option<f64>,
    pub snapshots: Vec<PathBuf>,
}

/// Channel flow over the step. Snapshots go to `snapshot_dir` when given
/// and `snapshot.every` is positive.
pub fn run_step(config: &RunConfig, scheme: SchemeKind, snapshot_dir: Option<&Path>) -> Result<StepOutcome, RunError> {
    let space = Space::new(build_mesh(config.mesh)?);
    let sc = config.scheme_config(scheme, 1, space.h());
    let problem = StepProblem {
        inflow_max: config.inflow_max,
    };
    let mut norms = NormTracker::new(&space);
    let mut blowup = None;
    let mut snapshots = Vec::new();
    let mut write_error = None;
    let mut sim = Simulator::new(&space, &problem, sc.clone())?;
    let every = config.snapshot_every;
    let result = sim.run(|s, _| {
        let n = norms.observe(s);
        if let (Some(dir), true) = (snapshot_dir, every > 0 && s.level > 0 && s.level % every == 0) {
            for d in Domain::BOTH {
                let path = dir.join(format!("{}_{:06}.vtu", d.short_name(), s.level));
                let ds = &s.domains[d.index()];
                if let Err(e) = std::fs::create_dir_all(dir).map_err(|source| RunError::Write {
                    path: dir.to_path_buf(),
                    source,
                }) {
                    write_error = Some(e);
                    return Control::Stop;
                }
                if let Err(e) = write_vtu(space.domain(d), &ds.u, &ds.p, &path) {
                    write_error = Some(e);
                    return Control::Stop;
                }
                snapshots.push(path);
            }
        }
        if n.iter().any(|v| !(*v <= BLOWUP_NORM)) {
            blowup = Some(s.t);
            return Control::Stop;
        }
        Control::Continue
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    match result {
        Ok(_) => {}
        Err(SchemeError::AtLevel { time, source, .. }) if source.is_divergence() => {
            blowup = Some(time);
        }
        Err(e) => return Err(e.into()),
    }
    Ok(StepOutcome {
        scheme,
        trace: norms.into_trace(),
        blowup,
        snapshots,
    })
}

pub fn step_csv(outcome: &StepOutcome) -> String {
    let mut s = String::from(STEP_HEADER);
    s.push('\n');
    let tr = &outcome.trace;
    for k in 0..tr.t.len() {
        let flag = outcome.blowup.is_some_and(|tb| tr.t[k] >= tb);
        let _ = writeln!(s, "{},{},{},{}", tr.t[k], tr.norms[0][k], tr.norms[1][k], u8::from(flag));
    }
    if let Some(tb) = outcome.blowup {
        if tr.t.last().is_none_or(|&t| t < tb) {
            let _ = writeln!(s, "{tb},NaN,NaN,1");
        }
    }
    s
}

pub fn cmd_step(config: &RunConfig, out: &Path) -> Result<Vec<StepOutcome>, RunError> {
    let mut all = Vec::new();
    let mut summary = String::from("scheme,blowup_t,max_norm_atm,max_norm_ocean\n");
    for &scheme in &config.schemes {
        let dir = out.join(scheme.name());
        let o = run_step(config, scheme, Some(&dir))?;
        write_file(&dir.join("step.csv"), &step_csv(&o))?;
        let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        let _ = writeln!(
            summary,
            "{},{},{},{}",
            scheme,
            opt(o.blowup),
            max(&o.trace.norms[0]),
            max(&o.trace.norms[1])
        );
        match o.blowup {
            Some(t) => println!("{scheme}: blow-up at t = {t}"),
            None => println!("{scheme}: stable through t = {}", o.trace.t.last().copied().unwrap_or(0.0)),
        }
        all.push(o);
    }
    write_file(&out.join("step_summary.csv"), &summary)?;
    Ok(all)
}
