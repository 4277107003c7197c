//! Data of a coupled flow problem: forcing, boundary values, initial state.

use crate::mesh::{step_geometry, Domain};
use crate::space::{Mat2, Vec2};

pub trait Problem: Sync + std::fmt::Debug {
    /// Body force `f_d(t, x)`.
    fn forcing(&self, _d: Domain, _t: f64, _x: Vec2) -> Vec2 {
        [0.0, 0.0]
    }

    /// False lets the schemes skip load assembly.
    fn has_forcing(&self) -> bool {
        false
    }

    /// Velocity imposed on Dirichlet boundary nodes.
    fn boundary_velocity(&self, d: Domain, t: f64, x: Vec2) -> Vec2;

    fn initial_velocity(&self, d: Domain, x: Vec2) -> Vec2;

    /// Closed-form solution, when one is known.
    fn exact_velocity(&self, _d: Domain, _t: f64, _x: Vec2) -> Option<Vec2> {
        None
    }

    fn exact_gradient(&self, _d: Domain, _t: f64, _x: Vec2) -> Option<Mat2> {
        None
    }
}

/// Counter-rotating sine vortices in both unit squares, walls at rest and
/// no forcing.
#[derive(Debug, Clone, Copy, Default)]
pub struct SineVortexProblem;

impl Problem for SineVortexProblem {
    fn boundary_velocity(&self, _d: Domain, _t: f64, _x: Vec2) -> Vec2 {
        [0.0, 0.0]
    }

    fn initial_velocity(&self, _d: Domain, x: Vec2) -> Vec2 {
        use std::f64::consts::PI;
        let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
        [(2.0 * PI * x[1]).sin() * sx * sx, -(2.0 * PI * x[0]).sin() * sy * sy]
    }
}

/// Channel flow over the backward-facing step, driven by a parabolic
/// inflow on the inlet face `x = 0`, `y ∈ [1, 2]`. Both fluids start at rest.
#[derive(Debug, Clone, Copy)]
pub struct StepProblem {
    /// Peak inflow velocity.
    pub inflow_max: f64,
}

impl Default for StepProblem {
    fn default() -> Self {
        StepProblem { inflow_max: 1.0 }
    }
}

impl StepProblem {
    pub fn inflow(&self, y: f64) -> f64 {
        use step_geometry::{CHANNEL_TOP, STEP_HEIGHT};
        let width = CHANNEL_TOP - STEP_HEIGHT;
        let s = (y - STEP_HEIGHT) / width;
        if (0.0..=1.0).contains(&s) {
            4.0 * self.inflow_max * s * (1.0 - s)
        } else {
            0.0
        }
    }
}

impl Problem for StepProblem {
    fn boundary_velocity(&self, d: Domain, _t: f64, x: Vec2) -> Vec2 {
        if d == Domain::Atmosphere && x[0] == 0.0 {
            [self.inflow(x[1]), 0.0]
        } else {
            [0.0, 0.0]
        }
    }

    fn initial_velocity(&self, _d: Domain, _x: Vec2) -> Vec2 {
        [0.0, 0.0]
    }
}
