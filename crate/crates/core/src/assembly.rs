//! Finite element operators on one domain.
//!
//! Velocity operators that act on each component separately (mass,
//! stiffness, convection, interface friction) are assembled once on the
//! scalar P2 node pattern and expanded to interleaved vector dofs only when
//! they are scattered into a system. [`expand_components`] gives the
//! explicit vector form.

use std::sync::Arc;

use crate::error::AssemblyError;
use crate::quadrature::QuadratureRule;
use crate::solver::{CsrMatrix, CsrPattern, SparseLu};
use crate::space::{BasisTable, DomainSpace, Vec2, DEFAULT_QUADRATURE_DEGREE};

/// Form of the discrete convection term `c(w; u, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvectionForm {
    /// `½(w·∇u, v) − ½(w·∇v, u)`.
    #[default]
    Skew,
    /// `(w·∇u, v)`.
    Raw,
}

impl std::str::FromStr for ConvectionForm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "skew" => Ok(ConvectionForm::Skew),
            "raw" => Ok(ConvectionForm::Raw),
            _ => Err(format!("expected `skew` or `raw`, got `{s}`")),
        }
    }
}

/// Cached geometry and index tables for element loops over one domain.
#[derive(Debug)]
pub struct DomainAssembler<'a> {
    pub space: &'a DomainSpace,
    pub table: BasisTable,
    /// Scalar P2 node pattern (nodes × nodes).
    pub pattern: Arc<CsrPattern>,
    /// P1 vertex pattern (vertices × vertices).
    pub p1_pattern: Arc<CsrPattern>,
    /// Divergence pattern (pressure dofs × velocity dofs).
    pub div_pattern: Arc<CsrPattern>,
    /// Position in `pattern` of local pair `(i, j)`, stored as `6 i + j`.
    positions: Vec<[usize; 36]>,
    /// `weight · |det J|` per element and quadrature point.
    weights: Vec<f64>,
    /// Physical P2 gradients per element, quadrature point and basis.
    gradients: Vec<[Vec2; 6]>,
    /// Physical coordinates of every quadrature point.
    points: Vec<Vec2>,
}

impl<'a> DomainAssembler<'a> {
    pub fn new(space: &'a DomainSpace) -> Self {
        let table = BasisTable::with_degree(DEFAULT_QUADRATURE_DEGREE);
        let nn = space.n_nodes();
        let nq = table.rule.len();
        let mut rows = vec![Vec::new(); nn];
        let mut p1_rows = vec![Vec::new(); space.n_vertices];
        let mut div_rows = vec![Vec::new(); space.n_vertices];
        for nodes in &space.triangle_nodes {
            for &a in nodes {
                rows[a].extend_from_slice(nodes);
            }
            for &a in &nodes[..3] {
                p1_rows[a].extend_from_slice(&nodes[..3]);
                div_rows[a].extend(nodes.iter().flat_map(|&b| [2 * b, 2 * b + 1]));
            }
        }
        let pattern = Arc::new(CsrPattern::from_rows(nn, rows));
        let p1_pattern = Arc::new(CsrPattern::from_rows(space.n_vertices, p1_rows));
        let div_pattern = Arc::new(CsrPattern::from_rows(2 * nn, div_rows));
        let nt = space.n_triangles();
        let mut positions = Vec::with_capacity(nt);
        let mut weights = Vec::with_capacity(nt * nq);
        let mut gradients = Vec::with_capacity(nt * nq);
        let mut points = Vec::with_capacity(nt * nq);
        for t in 0..nt {
            let nodes = &space.triangle_nodes[t];
            let mut pos = [0usize; 36];
            for i in 0..6 {
                for j in 0..6 {
                    pos[6 * i + j] = pattern.find(nodes[i], nodes[j]).expect("element pair in pattern");
                }
            }
            positions.push(pos);
            let geo = &space.geometry[t];
            for q in 0..nq {
                weights.push(table.rule.weights[q] * geo.det.abs());
                let mut g = [[0.0; 2]; 6];
                for k in 0..6 {
                    g[k] = geo.physical_gradient(table.p2_grad[q][k]);
                }
                gradients.push(g);
                let [xi, eta] = table.rule.reference_point(q);
                points.push(geo.map(xi, eta));
            }
        }
        DomainAssembler {
            space,
            table,
            pattern,
            p1_pattern,
            div_pattern,
            positions,
            weights,
            gradients,
            points,
        }
    }

    fn nq(&self) -> usize {
        self.table.rule.len()
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.table.rule
    }

    /// Quadrature point coordinates of element `t`.
    pub fn element_points(&self, t: usize) -> &[Vec2] {
        let nq = self.nq();
        &self.points[t * nq..(t + 1) * nq]
    }

    fn element_loop(&self, mut local: impl FnMut(usize, &mut [f64; 36])) -> CsrMatrix {
        let mut m = CsrMatrix::zeros(self.pattern.clone());
        let values = m.values_mut();
        for t in 0..self.space.n_triangles() {
            let mut a = [0.0; 36];
            local(t, &mut a);
            for (k, v) in a.iter().enumerate() {
                values[self.positions[t][k]] += v;
            }
        }
        m
    }

    /// Scalar P2 mass matrix `(φ_j, φ_i)`.
    pub fn mass(&self) -> CsrMatrix {
        let nq = self.nq();
        self.element_loop(|t, a| {
            for q in 0..nq {
                let w = self.weights[t * nq + q];
                let phi = &self.table.p2[q];
                for i in 0..6 {
                    for j in 0..6 {
                        a[6 * i + j] += w * phi[i] * phi[j];
                    }
                }
            }
        })
    }

    /// Scalar stiffness `ν (∇φ_j, ∇φ_i)`.
    pub fn stiffness(&self, nu: f64) -> Result<CsrMatrix, AssemblyError> {
        if !(nu >= 0.0) {
            return Err(AssemblyError::NegativeViscosity(nu));
        }
        let nq = self.nq();
        Ok(self.element_loop(|t, a| {
            for q in 0..nq {
                let w = nu * self.weights[t * nq + q];
                let g = &self.gradients[t * nq + q];
                for i in 0..6 {
                    for j in 0..6 {
                        a[6 * i + j] += w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                    }
                }
            }
        }))
    }

    /// Scalar convection matrix for advecting velocity `w` (vector dofs).
    pub fn convection(&self, w: &[f64], form: ConvectionForm) -> CsrMatrix {
        let nq = self.nq();
        self.element_loop(|t, a| {
            let nodes = &self.space.triangle_nodes[t];
            for q in 0..nq {
                let phi = &self.table.p2[q];
                let g = &self.gradients[t * nq + q];
                let mut wq = [0.0; 2];
                for k in 0..6 {
                    wq[0] += w[2 * nodes[k]] * phi[k];
                    wq[1] += w[2 * nodes[k] + 1] * phi[k];
                }
                let wt = self.weights[t * nq + q];
                let adv: [f64; 6] = std::array::from_fn(|k| wq[0] * g[k][0] + wq[1] * g[k][1]);
                for i in 0..6 {
                    for j in 0..6 {
                        a[6 * i + j] += match form {
                            ConvectionForm::Raw => wt * adv[j] * phi[i],
                            ConvectionForm::Skew => 0.5 * wt * (adv[j] * phi[i] - adv[i] * phi[j]),
                        };
                    }
                }
            }
        })
    }

    /// Divergence block `B` with `(B u)_q = (∇·u, ψ_q)`.
    pub fn divergence(&self) -> CsrMatrix {
        let nq = self.nq();
        let mut m = CsrMatrix::zeros(self.div_pattern.clone());
        for t in 0..self.space.n_triangles() {
            let nodes = &self.space.triangle_nodes[t];
            let mut local = [[[0.0; 2]; 6]; 3];
            for q in 0..nq {
                let w = self.weights[t * nq + q];
                let psi = &self.table.p1[q];
                let g = &self.gradients[t * nq + q];
                for (a, psi_a) in psi.iter().enumerate() {
                    for k in 0..6 {
                        local[a][k][0] += w * psi_a * g[k][0];
                        local[a][k][1] += w * psi_a * g[k][1];
                    }
                }
            }
            for a in 0..3 {
                for k in 0..6 {
                    for c in 0..2 {
                        m.add(nodes[a], 2 * nodes[k] + c, local[a][k][c]);
                    }
                }
            }
        }
        m
    }

    /// P1 mass matrix on vertices.
    pub fn p1_mass(&self) -> CsrMatrix {
        let nq = self.nq();
        let mut m = CsrMatrix::zeros(self.p1_pattern.clone());
        for t in 0..self.space.n_triangles() {
            let v = self.space.triangle_vertices(t);
            for q in 0..nq {
                let w = self.weights[t * nq + q];
                let psi = &self.table.p1[q];
                for a in 0..3 {
                    for b in 0..3 {
                        m.add(v[a], v[b], w * psi[a] * psi[b]);
                    }
                }
            }
        }
        m
    }

    /// Load vector `(f, v)` for a body force sampled at quadrature points.
    pub fn load(&self, f: impl Fn(Vec2) -> Vec2) -> Vec<f64> {
        let nq = self.nq();
        let mut b = vec![0.0; self.space.n_velocity_dofs()];
        for t in 0..self.space.n_triangles() {
            let nodes = &self.space.triangle_nodes[t];
            for q in 0..nq {
                let fx = f(self.points[t * nq + q]);
                let w = self.weights[t * nq + q];
                for k in 0..6 {
                    let s = w * self.table.p2[q][k];
                    b[2 * nodes[k]] += s * fx[0];
                    b[2 * nodes[k] + 1] += s * fx[1];
                }
            }
        }
        b
    }

    /// `(∇u, L_q)` for every P1 tensor basis function, laid out like `G^H`.
    pub fn gradient_moments(&self, u: &[f64]) -> Vec<f64> {
        let nq = self.nq();
        let mut r = vec![0.0; self.space.n_large_scale_dofs()];
        for t in 0..self.space.n_triangles() {
            let nodes = &self.space.triangle_nodes[t];
            let v = self.space.triangle_vertices(t);
            for q in 0..nq {
                let g = &self.gradients[t * nq + q];
                let mut grad = [[0.0; 2]; 2];
                for k in 0..6 {
                    for c in 0..2 {
                        let coef = u[2 * nodes[k] + c];
                        grad[c][0] += coef * g[k][0];
                        grad[c][1] += coef * g[k][1];
                    }
                }
                let w = self.weights[t * nq + q];
                for a in 0..3 {
                    let s = w * self.table.p1[q][a];
                    for c in 0..2 {
                        for d in 0..2 {
                            r[4 * v[a] + 2 * c + d] += s * grad[c][d];
                        }
                    }
                }
            }
        }
        r
    }

    /// `ν_T (G, ∇v)` for every velocity test function.
    pub fn vms_rhs(&self, g: &[f64], nu_t: f64) -> Vec<f64> {
        let nq = self.nq();
        let mut b = vec![0.0; self.space.n_velocity_dofs()];
        if nu_t == 0.0 {
            return b;
        }
        for t in 0..self.space.n_triangles() {
            let nodes = &self.space.triangle_nodes[t];
            for q in 0..nq {
                let gt = self.space.tensor_at(g, t, &self.table.p1[q]);
                let grads = &self.gradients[t * nq + q];
                let w = nu_t * self.weights[t * nq + q];
                for k in 0..6 {
                    for c in 0..2 {
                        b[2 * nodes[k] + c] += w * (gt[c][0] * grads[k][0] + gt[c][1] * grads[k][1]);
                    }
                }
            }
        }
        b
    }

    /// `‖∇u‖²` by the assembly quadrature.
    pub fn gradient_norm_sq(&self, u: &[f64]) -> f64 {
        self.gradient_defect_sq(u, None)
    }

    /// `‖∇u − G‖²`, or `‖∇u‖²` without a tensor.
    pub fn gradient_defect_sq(&self, u: &[f64], g: Option<&[f64]>) -> f64 {
        let nq = self.nq();
        let mut s = 0.0;
        for t in 0..self.space.n_triangles() {
            for q in 0..nq {
                let (_, grad) = self.space.velocity_from_table(u, t, &self.table.p2[q], &self.table.p2_grad[q]);
                let gt = g.map_or([[0.0; 2]; 2], |g| self.space.tensor_at(g, t, &self.table.p1[q]));
                let w = self.weights[t * nq + q];
                for c in 0..2 {
                    for d in 0..2 {
                        s += w * (grad[c][d] - gt[c][d]).powi(2);
                    }
                }
            }
        }
        s
    }

    /// `‖G‖²` for a P1 tensor field.
    pub fn tensor_norm_sq(&self, g: &[f64]) -> f64 {
        let nq = self.nq();
        let mut s = 0.0;
        for t in 0..self.space.n_triangles() {
            for q in 0..nq {
                let gt = self.space.tensor_at(g, t, &self.table.p1[q]);
                s += self.weights[t * nq + q] * gt.iter().flatten().map(|v| v * v).sum::<f64>();
            }
        }
        s
    }

    pub fn l2_norm_sq(&self, u: &[f64]) -> f64 {
        let nq = self.nq();
        let mut s = 0.0;
        for t in 0..self.space.n_triangles() {
            let nodes = &self.space.triangle_nodes[t];
            for q in 0..nq {
                let mut v = [0.0; 2];
                for k in 0..6 {
                    v[0] += u[2 * nodes[k]] * self.table.p2[q][k];
                    v[1] += u[2 * nodes[k] + 1] * self.table.p2[q][k];
                }
                s += self.weights[t * nq + q] * (v[0] * v[0] + v[1] * v[1]);
            }
        }
        s
    }

    /// `(f, u)` with `f` sampled at the quadrature points.
    pub fn load_product(&self, u: &[f64], f: impl Fn(Vec2) -> Vec2) -> f64 {
        self.load(f).iter().zip(u).map(|(a, b)| a * b).sum()
    }
}

/// Interleaved vector form `A ⊗ I₂` of a scalar nodal matrix.
pub fn expand_components(scalar: &CsrMatrix) -> CsrMatrix {
    let p = scalar.pattern();
    let mut t = Vec::with_capacity(2 * scalar.values().len());
    for r in 0..p.n_rows() {
        for k in p.row(r) {
            let c = p.col_idx()[k];
            for comp in 0..2 {
                t.push((2 * r + comp, 2 * c + comp, scalar.values()[k]));
            }
        }
    }
    CsrMatrix::from_triplets(2 * p.n_rows(), 2 * p.n_cols(), &t)
}

/// Vector P2 mass matrix.
pub fn assemble_mass(space: &DomainSpace) -> CsrMatrix {
    expand_components(&DomainAssembler::new(space).mass())
}

/// Vector P2 stiffness matrix `ν(∇u, ∇v)`.
pub fn assemble_stiffness(space: &DomainSpace, nu: f64) -> Result<CsrMatrix, AssemblyError> {
    Ok(expand_components(&DomainAssembler::new(space).stiffness(nu)?))
}

/// Vector convection matrix for advecting field `w`.
pub fn assemble_convection(space: &DomainSpace, w: &[f64], form: ConvectionForm) -> CsrMatrix {
    expand_components(&DomainAssembler::new(space).convection(w, form))
}

pub fn assemble_divergence(space: &DomainSpace) -> CsrMatrix {
    DomainAssembler::new(space).divergence()
}

/// L² projection of velocity gradients onto continuous P1 tensors.
pub struct GradientProjector {
    mass: CsrMatrix,
    lu: SparseLu,
}

impl std::fmt::Debug for GradientProjector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GradientProjector").field("n", &self.mass.n_rows()).finish()
    }
}

impl GradientProjector {
    pub fn new(asm: &DomainAssembler<'_>) -> Result<Self, AssemblyError> {
        let mass = asm.p1_mass();
        let lu = SparseLu::factorize(&mass)?;
        Ok(GradientProjector { mass, lu })
    }

    pub fn p1_mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// `G^H` with `(G^H − ∇u, L) = 0` for all P1 tensors `L`.
    pub fn project(&self, asm: &DomainAssembler<'_>, u: &[f64]) -> Result<Vec<f64>, AssemblyError> {
        let moments = asm.gradient_moments(u);
        let nv = self.mass.n_rows();
        let mut g = vec![0.0; 4 * nv];
        let mut col = vec![0.0; nv];
        for comp in 0..4 {
            for q in 0..nv {
                col[q] = moments[4 * q + comp];
            }
            self.lu.solve_in_place(&mut col)?;
            for q in 0..nv {
                g[4 * q + comp] = col[q];
            }
        }
        Ok(g)
    }
}

/// One-shot projection; builds and factors the P1 mass matrix.
pub fn project_gradient(space: &DomainSpace, u: &[f64]) -> Result<Vec<f64>, AssemblyError> {
    let asm = DomainAssembler::new(space);
    GradientProjector::new(&asm)?.project(&asm, u)
}

/// `ν_T (G^H, ∇v)` for every velocity test function.
pub fn assemble_vms_rhs(space: &DomainSpace, g: &[f64], nu_t: f64) -> Result<Vec<f64>, AssemblyError> {
    if !(nu_t >= 0.0) {
        return Err(AssemblyError::NegativeViscosity(nu_t));
    }
    Ok(DomainAssembler::new(space).vms_rhs(g, nu_t))
}
