//! Flat `key = value` run configuration.
//!
//! ```text
//! # table 2
//! scheme = ga-vms
//! nu1 = 0.5
//! nu_t = h
//! dt = 1/N
//! refinement = 8, 16, 32, 64
//! ```
//!
//! Keys may contain dots (`mesh.n`, `picard.tol`). Unknown keys and
//! repeated keys are errors. Unset keys take the defaults of the chosen
//! experiment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::assembly::ConvectionForm;
use crate::error::ConfigError;
use crate::schemes::{Bootstrap, SchemeConfig, SchemeKind, DEFAULT_PICARD_MAX, DEFAULT_PICARD_TOL};

pub const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "scheme",
    "nu1",
    "nu2",
    "kappa",
    "nu_t",
    "dt",
    "t_end",
    "a",
    "b",
    "mesh.kind",
    "mesh.n",
    "mesh.h",
    "refinement",
    "picard.tol",
    "picard.max",
    "output.dir",
    "snapshot.every",
    "convection",
    "bootstrap",
    "inflow.max",
    "concurrent",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Convergence,
    Energy,
    Step,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Convergence => "convergence",
            Experiment::Energy => "energy",
            Experiment::Step => "step",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "convergence" => Ok(Experiment::Convergence),
            "energy" => Ok(Experiment::Energy),
            "step" => Ok(Experiment::Step),
            _ => Err(format!("expected convergence, energy or step, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeshSpec {
    /// Stacked unit squares with `n` cells per side.
    TwoSquare { n: usize },
    /// Backward-facing step with target element size `h`.
    Step { h: f64 },
}

/// Eddy viscosity: a number or the mesh size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NuT {
    Value(f64),
    MeshSize,
}

/// Time step: a number or `1/N` for the two-square mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    Value(f64),
    InverseN,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub schemes: Vec<SchemeKind>,
    pub nu: [f64; 2],
    pub kappa: f64,
    pub nu_t: NuT,
    pub dt: TimeStep,
    pub t_end: f64,
    /// Manufactured amplitude and decay rate.
    pub a: f64,
    pub b: f64,
    pub mesh: MeshSpec,
    pub refinement: Vec<usize>,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub output_dir: PathBuf,
    /// Steps between VTU snapshots; 0 disables them.
    pub snapshot_every: usize,
    pub convection: ConvectionForm,
    pub bootstrap: Bootstrap,
    pub inflow_max: f64,
    pub concurrent: bool,
}

impl RunConfig {
    /// Parameters of the experiment as run by default.
    pub fn defaults(experiment: Experiment) -> Self {
        let base = RunConfig {
            experiment,
            schemes: vec![SchemeKind::Ga, SchemeKind::GaVms],
            nu: [0.5, 0.1],
            kappa: 0.001,
            nu_t: NuT::MeshSize,
            dt: TimeStep::InverseN,
            t_end: 1.0,
            a: 1.0,
            b: 0.5,
            mesh: MeshSpec::TwoSquare { n: 8 },
            refinement: vec![8, 16, 32, 64],
            picard_tol: DEFAULT_PICARD_TOL,
            picard_max: DEFAULT_PICARD_MAX,
            output_dir: PathBuf::from("out"),
            snapshot_every: 0,
            convection: ConvectionForm::Skew,
            bootstrap: Bootstrap::Exact,
            inflow_max: 1.0,
            concurrent: false,
        };
        match experiment {
            Experiment::Convergence => RunConfig {
                schemes: vec![SchemeKind::GaVms],
                ..base
            },
            Experiment::Energy => RunConfig {
                nu: [1.5e-3, 1e-4],
                kappa: 1e-3,
                dt: TimeStep::Value(0.01),
                t_end: 10.0,
                mesh: MeshSpec::TwoSquare { n: 32 },
                bootstrap: Bootstrap::Imex,
                ..base
            },
            Experiment::Step => RunConfig {
                nu: [5e-4, 5e-3],
                kappa: 2.45e-3,
                nu_t: NuT::Value(0.01),
                dt: TimeStep::Value(0.01),
                t_end: 40.0,
                mesh: MeshSpec::Step { h: 0.12 },
                bootstrap: Bootstrap::Imex,
                snapshot_every: 1000,
                ..base
            },
        }
    }

    pub fn load(path: &Path, experiment: Option<Experiment>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, experiment)
    }

    /// Parses a document. `experiment` (from the command line) must agree
    /// with an `experiment` key when both are present.
    pub fn parse(text: &str, experiment: Option<Experiment>) -> Result<Self, ConfigError> {
        let map = parse_pairs(text)?;
        let from_file = map.get("experiment").map(|v| parse_value::<Experiment>("experiment", v)).transpose()?;
        let experiment = match (experiment, from_file) {
            (Some(a), Some(b)) if a != b => {
                return Err(ConfigError::InvalidValue {
                    key: "experiment".into(),
                    message: format!("file says `{}` but `{}` was requested", b.name(), a.name()),
                })
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => {
                return Err(ConfigError::InvalidValue {
                    key: "experiment".into(),
                    message: "not given".into(),
                })
            }
        };
        let mut c = Self::defaults(experiment);
        let get = |k: &str| map.get(k).map(String::as_str);
        if let Some(v) = get("scheme") {
            c.schemes = v
                .split(',')
                .map(|s| parse_value::<SchemeKind>("scheme", s.trim()))
                .collect::<Result<_, _>>()?;
        }
        if let Some(v) = get("nu1") {
            c.nu[0] = parse_number("nu1", v)?;
        }
        if let Some(v) = get("nu2") {
            c.nu[1] = parse_number("nu2", v)?;
        }
        if let Some(v) = get("kappa") {
            c.kappa = parse_number("kappa", v)?;
        }
        if let Some(v) = get("nu_t") {
            c.nu_t = if v == "h" {
                NuT::MeshSize
            } else {
                NuT::Value(parse_number("nu_t", v)?)
            };
        }
        if let Some(v) = get("dt") {
            c.dt = if v == "1/N" {
                TimeStep::InverseN
            } else {
                TimeStep::Value(parse_number("dt", v)?)
            };
        }
        if let Some(v) = get("t_end") {
            c.t_end = parse_number("t_end", v)?;
        }
        if let Some(v) = get("a") {
            c.a = parse_number("a", v)?;
        }
        if let Some(v) = get("b") {
            c.b = parse_number("b", v)?;
        }
        let kind = get("mesh.kind").unwrap_or(match c.mesh {
            MeshSpec::TwoSquare { .. } => "two-square",
            MeshSpec::Step { .. } => "step",
        });
        c.mesh = match kind {
            "two-square" => {
                if map.contains_key("mesh.h") {
                    return Err(invalid("mesh.h", "the two-square mesh takes mesh.n"));
                }
                let n = match get("mesh.n") {
                    Some(v) => parse_value::<usize>("mesh.n", v)?,
                    None => match c.mesh {
                        MeshSpec::TwoSquare { n } => n,
                        MeshSpec::Step { .. } => 8,
                    },
                };
                MeshSpec::TwoSquare { n }
            }
            "step" => {
                if map.contains_key("mesh.n") {
                    return Err(invalid("mesh.n", "the step mesh takes mesh.h"));
                }
                let h = match get("mesh.h") {
                    Some(v) => parse_number("mesh.h", v)?,
                    None => match c.mesh {
                        MeshSpec::Step { h } => h,
                        MeshSpec::TwoSquare { .. } => 0.12,
                    },
                };
                MeshSpec::Step { h }
            }
            other => return Err(invalid("mesh.kind", &format!("expected two-square or step, got `{other}`"))),
        };
        if let Some(v) = get("refinement") {
            c.refinement = v
                .split([',', ' '])
                .filter(|s| !s.is_empty())
                .map(|s| parse_value::<usize>("refinement", s))
                .collect::<Result<_, _>>()?;
        }
        if let Some(v) = get("picard.tol") {
            c.picard_tol = parse_number("picard.tol", v)?;
        }
        if let Some(v) = get("picard.max") {
            c.picard_max = parse_value("picard.max", v)?;
        }
        if let Some(v) = get("output.dir") {
            c.output_dir = PathBuf::from(v);
        }
        if let Some(v) = get("snapshot.every") {
            c.snapshot_every = parse_value("snapshot.every", v)?;
        }
        if let Some(v) = get("convection") {
            c.convection = parse_value("convection", v)?;
        }
        if let Some(v) = get("bootstrap") {
            c.bootstrap = parse_value("bootstrap", v)?;
        }
        if let Some(v) = get("inflow.max") {
            c.inflow_max = parse_number("inflow.max", v)?;
        }
        if let Some(v) = get("concurrent") {
            c.concurrent = parse_value("concurrent", v)?;
        }
        c.check()?;
        Ok(c)
    }

    fn check(&self) -> Result<(), ConfigError> {
        if self.schemes.is_empty() {
            return Err(invalid("scheme", "no scheme given"));
        }
        if self.refinement.is_empty() {
            return Err(invalid("refinement", "empty list"));
        }
        if self.dt == TimeStep::InverseN && matches!(self.mesh, MeshSpec::Step { .. }) {
            return Err(invalid("dt", "1/N needs the two-square mesh"));
        }
        if matches!(self.mesh, MeshSpec::TwoSquare { n: 0 }) || self.refinement.contains(&0) {
            return Err(invalid("mesh.n", "cell counts must be positive"));
        }
        if self.experiment == Experiment::Step && !matches!(self.mesh, MeshSpec::Step { .. }) {
            return Err(invalid("mesh.kind", "the step experiment needs the step mesh"));
        }
        if self.experiment != Experiment::Step && matches!(self.mesh, MeshSpec::Step { .. }) {
            return Err(invalid("mesh.kind", "only the step experiment runs on the step mesh"));
        }
        // Catch everything else the scheme would reject.
        for &s in &self.schemes {
            let n = match self.mesh {
                MeshSpec::TwoSquare { n } => n,
                MeshSpec::Step { .. } => 1,
            };
            let ns: Vec<usize> = if self.experiment == Experiment::Convergence {
                self.refinement.clone()
            } else {
                vec![n]
            };
            for n in ns {
                let h = std::f64::consts::SQRT_2 / n as f64;
                self.scheme_config(s, n, h)
                    .validate()
                    .map_err(|e| invalid("scheme", &e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Fully numeric scheme parameters for `scheme` on a mesh with `n`
    /// cells per side (ignored off the two-square mesh) and size `h`.
    pub fn scheme_config(&self, scheme: SchemeKind, n: usize, h: f64) -> SchemeConfig {
        let dt = match self.dt {
            TimeStep::Value(v) => v,
            TimeStep::InverseN => 1.0 / n as f64,
        };
        let nu_t = match self.nu_t {
            NuT::Value(v) => v,
            NuT::MeshSize => h,
        };
        SchemeConfig {
            nu_t,
            picard_tol: self.picard_tol,
            picard_max: self.picard_max,
            convection: self.convection,
            bootstrap: self.bootstrap,
            concurrent: self.concurrent,
            ..SchemeConfig::new(scheme, self.nu[0], self.nu[1], self.kappa, dt, self.t_end)
        }
    }
}

fn invalid(key: &str, message: &str) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.into(),
        message: message.into(),
    }
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| invalid(key, &e.to_string()))
}

fn parse_number(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = parse_value(key, v)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(key, "not a finite number"))
    }
}

/// Splits a document into validated key/value pairs.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                message: "empty key or value".into(),
            });
        }
        if !KNOWN_KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                message: format!("`{k}` given twice"),
            });
        }
    }
    Ok(map)
}
