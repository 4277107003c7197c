//! Closed-form coupled solution on the stacked unit squares and its forcing.
//!
//! With `X₁ = x(1−x)`, `X₂ = X₁²`, `P = X₁(2x−1)`, `α = aν₁e^{−2bt}` and
//! `β = ae^{−bt}ν₁/√(κa)`:
//!
//! ```text
//! atmosphere: u = (α X₂ (1+y)  + β X₁,        α P y(2+y)  + β y(2x−1))
//! ocean:      u = (α X₂ (1+ry),               α P y(2+ry)),     r = ν₁/ν₂
//! ```
//!
//! Both fields are divergence free, vanish in the normal direction on
//! `y = 0`, and the pressures are zero.

use crate::mesh::Domain;
use crate::problem::Problem;
use crate::space::{Mat2, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedProblem {
    pub a: f64,
    pub b: f64,
    pub kappa: f64,
    pub nu: [f64; 2],
}

/// Value, first and second derivative of a one-variable factor.
#[derive(Debug, Clone, Copy)]
struct Jet {
    v: f64,
    d: f64,
    dd: f64,
}

impl ManufacturedProblem {
    pub fn new(a: f64, b: f64, kappa: f64, nu1: f64, nu2: f64) -> Self {
        ManufacturedProblem {
            a,
            b,
            kappa,
            nu: [nu1, nu2],
        }
    }

    /// The high-viscosity setting with `b = 1/2`, `κ = 0.001`.
    pub fn standard(a: f64, nu1: f64, nu2: f64) -> Self {
        Self::new(a, 0.5, 0.001, nu1, nu2)
    }

    fn alpha(&self, t: f64) -> f64 {
        self.a * self.nu[0] * (-2.0 * self.b * t).exp()
    }

    fn beta(&self, d: Domain, t: f64) -> f64 {
        match d {
            Domain::Atmosphere => self.a * (-self.b * t).exp() * self.nu[0] / (self.kappa * self.a).sqrt(),
            Domain::Ocean => 0.0,
        }
    }

    /// Slope of `g(y) = 1 + r y`.
    fn r(&self, d: Domain) -> f64 {
        match d {
            Domain::Atmosphere => 1.0,
            Domain::Ocean => self.nu[0] / self.nu[1],
        }
    }

    fn factors(&self, d: Domain, x: Vec2) -> (Jet, Jet, Jet, Jet, Jet) {
        let (x, y) = (x[0], x[1]);
        let x1 = x * (1.0 - x);
        let s = 2.0 * x - 1.0;
        let p = x1 * s;
        let dp = -s * s + 2.0 * x1;
        let r = self.r(d);
        let g = Jet {
            v: 1.0 + r * y,
            d: r,
            dd: 0.0,
        };
        let h = Jet {
            v: y * (2.0 + r * y),
            d: 2.0 * g.v,
            dd: 2.0 * r,
        };
        let x1 = Jet {
            v: x1,
            d: 1.0 - 2.0 * x,
            dd: -2.0,
        };
        let x2 = Jet {
            v: x1.v * x1.v,
            d: -2.0 * p,
            dd: -2.0 * dp,
        };
        let p = Jet {
            v: p,
            d: dp,
            dd: -6.0 * s,
        };
        (x1, x2, p, g, h)
    }

    pub fn velocity(&self, d: Domain, t: f64, x: Vec2) -> Vec2 {
        let (x1, x2, p, g, h) = self.factors(d, x);
        let (al, be) = (self.alpha(t), self.beta(d, t));
        [al * x2.v * g.v + be * x1.v, al * p.v * h.v + be * x[1] * (2.0 * x[0] - 1.0)]
    }

    /// `grad[c][k] = ∂u_c/∂x_k`.
    pub fn gradient(&self, d: Domain, t: f64, x: Vec2) -> Mat2 {
        let (x1, x2, p, g, h) = self.factors(d, x);
        let (al, be) = (self.alpha(t), self.beta(d, t));
        [
            [al * x2.d * g.v + be * x1.d, al * x2.v * g.d],
            [al * p.d * h.v + 2.0 * be * x[1], al * p.v * h.d + be * (2.0 * x[0] - 1.0)],
        ]
    }

    pub fn time_derivative(&self, d: Domain, t: f64, x: Vec2) -> Vec2 {
        let (x1, x2, p, g, h) = self.factors(d, x);
        let (al, be) = (-2.0 * self.b * self.alpha(t), -self.b * self.beta(d, t));
        [al * x2.v * g.v + be * x1.v, al * p.v * h.v + be * x[1] * (2.0 * x[0] - 1.0)]
    }

    pub fn laplacian(&self, d: Domain, t: f64, x: Vec2) -> Vec2 {
        let (x1, x2, p, g, h) = self.factors(d, x);
        let (al, be) = (self.alpha(t), self.beta(d, t));
        [
            al * (x2.dd * g.v + x2.v * g.dd) + be * x1.dd,
            al * (p.dd * h.v + p.v * h.dd),
        ]
    }

    /// `∂_t u − ν Δu + (u·∇)u` with the physical viscosity.
    pub fn forcing_at(&self, d: Domain, t: f64, x: Vec2) -> Vec2 {
        let u = self.velocity(d, t, x);
        let g = self.gradient(d, t, x);
        let ut = self.time_derivative(d, t, x);
        let lap = self.laplacian(d, t, x);
        let nu = self.nu[d.index()];
        std::array::from_fn(|c| ut[c] - nu * lap[c] + u[0] * g[c][0] + u[1] * g[c][1])
    }
}

impl Problem for ManufacturedProblem {
    fn forcing(&self, d: Domain, t: f64, x: Vec2) -> Vec2 {
        self.forcing_at(d, t, x)
    }

    fn has_forcing(&self) -> bool {
        true
    }

    fn boundary_velocity(&self, d: Domain, t: f64, x: Vec2) -> Vec2 {
        self.velocity(d, t, x)
    }

    fn initial_velocity(&self, d: Domain, x: Vec2) -> Vec2 {
        self.velocity(d, 0.0, x)
    }

    fn exact_velocity(&self, d: Domain, t: f64, x: Vec2) -> Option<Vec2> {
        Some(self.velocity(d, t, x))
    }

    fn exact_gradient(&self, d: Domain, t: f64, x: Vec2) -> Option<Mat2> {
        Some(self.gradient(d, t, x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_value() {
        let p = ManufacturedProblem::standard(1.0, 0.5, 0.1);
        let u = p.velocity(Domain::Atmosphere, 0.0, [0.5, 0.0]);
        // 0.5·(1/16) + (0.5/√0.001)·(1/4)
        let oracle = 0.5 / 16.0 + 0.5 / 0.001f64.sqrt() / 4.0;
        assert!((u[0] - oracle).abs() < 1e-13);
        assert!((u[0] - 3.98410).abs() < 5e-6);
        assert_eq!(u[1], 0.0);
    }

    #[test]
    fn decays_in_time() {
        let p = ManufacturedProblem::standard(1.0, 0.5, 0.1);
        let u = p.velocity(Domain::Atmosphere, 200.0, [0.3, 0.4]);
        assert!(u[0].abs() < 1e-40 && u[1].abs() < 1e-40);
    }
}
