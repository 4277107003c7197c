//! Symmetric quadrature on the reference triangle and Gauss rules on [0, 1].
//!
//! The reference triangle is `{(ξ, η) : ξ, η ≥ 0, ξ + η ≤ 1}` with area 1/2.
//! Points are stored as barycentric triples `(λ₀, λ₁, λ₂)` where
//! `ξ = λ₁`, `η = λ₂`.

use crate::error::QuadratureError;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Barycentric coordinates for triangle rules; `[s, 0, 0]` for edge rules.
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Highest total polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Reference coordinates `(ξ, η)` of point `q` of a triangle rule.
    pub fn reference_point(&self, q: usize) -> [f64; 2] {
        [self.points[q][1], self.points[q][2]]
    }

    /// Abscissa of point `q` of an edge rule.
    pub fn abscissa(&self, q: usize) -> f64 {
        self.points[q][0]
    }

    pub fn integrate_triangle(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        (0..self.len())
            .map(|q| {
                let [x, y] = self.reference_point(q);
                self.weights[q] * f(x, y)
            })
            .sum()
    }

    pub fn integrate_edge(&self, f: impl Fn(f64) -> f64) -> f64 {
        (0..self.len()).map(|q| self.weights[q] * f(self.abscissa(q))).sum()
    }
}

/// Appends the orbit of `(a, a, 1 − 2a)` (three points, or one at the centroid).
fn orbit3(points: &mut Vec<[f64; 3]>, weights: &mut Vec<f64>, a: f64, w: f64) {
    let b = 1.0 - 2.0 * a;
    for p in [[a, a, b], [a, b, a], [b, a, a]] {
        points.push(p);
        weights.push(w);
    }
}

fn orbit6(points: &mut Vec<[f64; 3]>, weights: &mut Vec<f64>, a: f64, b: f64, w: f64) {
    let c = 1.0 - a - b;
    for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
        points.push(p);
        weights.push(w);
    }
}

/// Symmetric rule exact for polynomials of total degree `degree`.
///
/// Degrees 1, 2, 4, 5, 6 use their own rules (centroid, 3-point, Dunavant
/// 6-point, Radon 7-point, Dunavant 12-point); degree 3 uses the degree-4
/// rule since the classical 4-point degree-3 rule has a negative weight.
pub fn triangle_quadrature(degree: usize) -> Result<QuadratureRule, QuadratureError> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    // weights below are normalised to sum to 1 and halved at the end
    let exact = match degree {
        1 => {
            points.push([1.0 / 3.0; 3]);
            weights.push(1.0);
            1
        }
        2 => {
            orbit3(&mut points, &mut weights, 1.0 / 6.0, 1.0 / 3.0);
            2
        }
        3 | 4 => {
            orbit3(&mut points, &mut weights, 0.445_948_490_915_965, 0.223_381_589_678_011);
            orbit3(&mut points, &mut weights, 0.091_576_213_509_771, 0.109_951_743_655_322);
            4
        }
        5 => {
            let s15 = 15f64.sqrt();
            points.push([1.0 / 3.0; 3]);
            weights.push(9.0 / 40.0);
            orbit3(&mut points, &mut weights, (6.0 - s15) / 21.0, (155.0 - s15) / 1200.0);
            orbit3(&mut points, &mut weights, (6.0 + s15) / 21.0, (155.0 + s15) / 1200.0);
            5
        }
        6 => {
            orbit3(&mut points, &mut weights, 0.249_286_745_170_910, 0.116_786_275_726_379);
            orbit3(&mut points, &mut weights, 0.063_089_014_491_502, 0.050_844_906_370_207);
            orbit6(
                &mut points,
                &mut weights,
                0.053_145_049_844_817,
                0.310_352_451_033_784,
                0.082_851_075_618_374,
            );
            6
        }
        d => return Err(QuadratureError::UnsupportedDegree(d)),
    };
    for w in &mut weights {
        *w *= 0.5;
    }
    Ok(QuadratureRule {
        points,
        weights,
        degree: exact,
    })
}

/// Gauss–Legendre rule with `n` points on [0, 1], exact to degree `2n − 1`.
pub fn edge_quadrature(n: usize) -> Result<QuadratureRule, QuadratureError> {
    // nodes and weights on [-1, 1]
    let (x, w): (Vec<f64>, Vec<f64>) = match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let r = 2.0 / 7.0 * (6.0f64 / 5.0).sqrt();
            let a = (3.0 / 7.0 - r).sqrt();
            let b = (3.0 / 7.0 + r).sqrt();
            let s30 = 30f64.sqrt();
            let wa = (18.0 + s30) / 36.0;
            let wb = (18.0 - s30) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        5 => {
            let r = 2.0 * (10.0f64 / 7.0).sqrt();
            let a = (5.0 - r).sqrt() / 3.0;
            let b = (5.0 + r).sqrt() / 3.0;
            let s70 = 70f64.sqrt();
            let wa = (322.0 + 13.0 * s70) / 900.0;
            let wb = (322.0 - 13.0 * s70) / 900.0;
            (vec![-b, -a, 0.0, a, b], vec![wb, wa, 128.0 / 225.0, wa, wb])
        }
        k if (6..=32).contains(&k) => legendre_nodes(k),
        k => return Err(QuadratureError::UnsupportedPoints(k)),
    };
    Ok(QuadratureRule {
        points: x.iter().map(|&xi| [0.5 * (xi + 1.0), 0.0, 0.0]).collect(),
        weights: w.iter().map(|wi| 0.5 * wi).collect(),
        degree: 2 * n - 1,
    })
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton's method on `P_n`.
fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_n(z) and P_{n-1}(z)
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[n - 1 - i] = z;
        w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Collapsed (Duffy) Gauss product rule on the reference triangle, exact to
/// any requested degree. Not symmetric; used for error norms where the
/// integrand has higher degree than the default rules handle.
pub fn conical_product_rule(degree: usize) -> Result<QuadratureRule, QuadratureError> {
    // ξ = a, η = b(1 − a); the Jacobian (1 − a) adds one degree in a.
    let n = degree / 2 + 1;
    let g = edge_quadrature(n)?;
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        let a = g.abscissa(i);
        for j in 0..n {
            let b = g.abscissa(j) * (1.0 - a);
            points.push([1.0 - a - b, a, b]);
            weights.push(g.weights[i] * g.weights[j] * (1.0 - a));
        }
    }
    Ok(QuadratureRule { points, weights, degree })
}
