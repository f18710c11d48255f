//! Coefficient fields of the boundary value problem
//!
//! ```text
//!   -div[D(x) grad c] + v(x) . grad c + alpha(x) c = f(x)   in  Omega
//!    c = c_p                                                on  boundary
//! ```
//!
//! plus per-element derived quantities: the integral element average
//! diffusivity Dbar, its minimum eigenvalue, the nondimensional ratios
//! (epsilon, eta) and element sup-norms of v and alpha.

pub mod expr;
pub mod file;

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::linalg2::{check_spd, sym_eigenvalues, sym_part};
use crate::mesh::Triangulation;
use crate::quadrature::{bary_to_point, triangle_rule};
use crate::{Error, Mat2, Result, Vec2};

type MatrixFn = Arc<dyn Fn(Vec2) -> Mat2 + Send + Sync>;
type VectorFn = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;
type ScalarFn = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;

/// Anisotropic diffusivity tensor field D(x); must evaluate to a symmetric
/// positive definite matrix everywhere.
#[derive(Clone)]
pub enum DiffusivityField {
    Constant(Mat2),
    /// R diag(d_max, d_min) R^T with R the rotation by theta
    RotationEigen {
        d_max: f64,
        d_min: f64,
        theta: f64,
    },
    /// alpha_t |v| I + ((alpha_l - alpha_t)/|v|) v (x) v
    Subsurface {
        v_ref: Vec2,
        alpha_t: f64,
        alpha_l: f64,
    },
    Callable(MatrixFn),
}

impl std::fmt::Debug for DiffusivityField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DiffusivityField::Constant(d) => write!(f, "Constant({d:?})"),
            DiffusivityField::RotationEigen {
                d_max,
                d_min,
                theta,
            } => {
                write!(
                    f,
                    "RotationEigen(d_max={d_max}, d_min={d_min}, theta={theta})"
                )
            }
            DiffusivityField::Subsurface {
                v_ref,
                alpha_t,
                alpha_l,
            } => {
                write!(f, "Subsurface(v_ref={v_ref:?}, aT={alpha_t}, aL={alpha_l})")
            }
            DiffusivityField::Callable(_) => write!(f, "Callable(..)"),
        }
    }
}

impl DiffusivityField {
    pub fn isotropic(d: f64) -> Self {
        DiffusivityField::Constant(Mat2::identity() * d)
    }

    pub fn rotation_eigen(d_max: f64, d_min: f64, theta: f64) -> Result<Self> {
        if !(d_max >= d_min && d_min > 0.0) {
            return Err(Error::Config(format!(
                "rotation_eigen needs d_max >= d_min > 0, got ({d_max}, {d_min})"
            )));
        }
        Ok(DiffusivityField::RotationEigen {
            d_max,
            d_min,
            theta,
        })
    }

    pub fn subsurface(v_ref: Vec2, alpha_t: f64, alpha_l: f64) -> Result<Self> {
        if !(alpha_l >= alpha_t && alpha_t > 0.0) {
            return Err(Error::Config(format!(
                "subsurface needs alpha_l >= alpha_t > 0, got ({alpha_t}, {alpha_l})"
            )));
        }
        if v_ref.norm() == 0.0 {
            return Err(Error::Config("subsurface needs a nonzero v_ref".into()));
        }
        Ok(DiffusivityField::Subsurface {
            v_ref,
            alpha_t,
            alpha_l,
        })
    }

    pub fn callable(f: impl Fn(Vec2) -> Mat2 + Send + Sync + 'static) -> Self {
        DiffusivityField::Callable(Arc::new(f))
    }

    /// Evaluates D(x); checks the SPD invariant and reports eigenvalues on
    /// failure (only callables can actually violate it).
    pub fn eval(&self, x: Vec2) -> Result<Mat2> {
        let d = match self {
            DiffusivityField::Constant(d) => *d,
            DiffusivityField::RotationEigen {
                d_max,
                d_min,
                theta,
            } => {
                let (s, c) = theta.sin_cos();
                let r = Mat2::new(c, -s, s, c);
                r * Mat2::new(*d_max, 0.0, 0.0, *d_min) * r.transpose()
            }
            DiffusivityField::Subsurface {
                v_ref,
                alpha_t,
                alpha_l,
            } => {
                let n = v_ref.norm();
                Mat2::identity() * (alpha_t * n)
                    + (v_ref * v_ref.transpose()) * ((alpha_l - alpha_t) / n)
            }
            DiffusivityField::Callable(f) => f(x),
        };
        check_spd(&d)?;
        Ok(d)
    }

    pub fn is_constant(&self) -> bool {
        !matches!(self, DiffusivityField::Callable(_))
    }
}

/// Scalar coefficient field (reaction alpha, source f).
#[derive(Clone)]
pub enum ScalarField {
    Constant(f64),
    Expr(expr::Expr),
    Callable(ScalarFn),
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScalarField::Constant(v) => write!(f, "Constant({v})"),
            ScalarField::Expr(e) => write!(f, "Expr({e:?})"),
            ScalarField::Callable(_) => write!(f, "Callable(..)"),
        }
    }
}

impl ScalarField {
    pub fn callable(f: impl Fn(Vec2) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField::Callable(Arc::new(f))
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        match self {
            ScalarField::Constant(v) => *v,
            ScalarField::Expr(e) => e.eval(x.x, x.y),
            ScalarField::Callable(f) => f(x),
        }
    }
}

/// Velocity field v(x).
#[derive(Clone)]
pub enum VectorField {
    Constant(Vec2),
    Expr(expr::Expr, expr::Expr),
    Callable(VectorFn),
}

impl std::fmt::Debug for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VectorField::Constant(v) => write!(f, "Constant({v:?})"),
            VectorField::Expr(a, b) => write!(f, "Expr({a:?}, {b:?})"),
            VectorField::Callable(_) => write!(f, "Callable(..)"),
        }
    }
}

impl VectorField {
    pub fn callable(f: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static) -> Self {
        VectorField::Callable(Arc::new(f))
    }

    pub fn eval(&self, x: Vec2) -> Vec2 {
        match self {
            VectorField::Constant(v) => *v,
            VectorField::Expr(ex, ey) => Vec2::new(ex.eval(x.x, x.y), ey.eval(x.x, x.y)),
            VectorField::Callable(f) => f(x),
        }
    }
}

/// Dirichlet data: prescribed value per boundary marker, with an optional
/// fallback for markers without an explicit entry.
#[derive(Clone, Debug, Default)]
pub struct DirichletSpec {
    pub values: BTreeMap<i32, f64>,
    pub default: Option<f64>,
}

impl DirichletSpec {
    pub fn constant(value: f64) -> Self {
        DirichletSpec {
            values: BTreeMap::new(),
            default: Some(value),
        }
    }

    pub fn by_marker(pairs: impl IntoIterator<Item = (i32, f64)>) -> Self {
        DirichletSpec {
            values: pairs.into_iter().collect(),
            default: None,
        }
    }

    pub fn value_for(&self, marker: i32) -> Option<f64> {
        self.values.get(&marker).copied().or(self.default)
    }
}

/// The full coefficient set of the boundary value problem.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub diffusivity: DiffusivityField,
    pub velocity: VectorField,
    pub reaction: ScalarField,
    pub source: ScalarField,
    pub dirichlet: DirichletSpec,
    /// characteristic length for the physics-based nondimensional numbers
    pub characteristic_length: f64,
}

impl ProblemSpec {
    pub fn new(
        diffusivity: DiffusivityField,
        velocity: VectorField,
        reaction: ScalarField,
        source: ScalarField,
        dirichlet: DirichletSpec,
        characteristic_length: f64,
    ) -> Result<Self> {
        if characteristic_length <= 0.0 {
            return Err(Error::Config(format!(
                "characteristic length must be positive, got {characteristic_length}"
            )));
        }
        Ok(ProblemSpec {
            diffusivity,
            velocity,
            reaction,
            source,
            dirichlet,
            characteristic_length,
        })
    }

    /// Pure diffusion: v = 0, alpha = 0, f = 0.
    pub fn pure_diffusion(diffusivity: DiffusivityField, dirichlet: DirichletSpec) -> Self {
        ProblemSpec {
            diffusivity,
            velocity: VectorField::Constant(Vec2::zeros()),
            reaction: ScalarField::Constant(0.0),
            source: ScalarField::Constant(0.0),
            dirichlet,
            characteristic_length: 1.0,
        }
    }

    /// Validates alpha(x) >= 0 at the given sample points. A negative
    /// reaction coefficient turns the equation Helmholtz-type, which has no
    /// maximum principle, so it is rejected outright.
    pub fn validate_reaction_sign(&self, samples: impl Iterator<Item = Vec2>) -> Result<()> {
        for x in samples {
            let a = self.reaction.eval(x);
            if a < 0.0 {
                return Err(Error::Config(format!(
                    "reaction coefficient is negative at ({}, {}): alpha = {a}",
                    x.x, x.y
                )));
            }
        }
        Ok(())
    }
}

/// Strategy for evaluating element sup-norms of v and alpha; the sampled
/// maximum is a lower bound of the true supremum (exact for affine fields).
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupNormStrategy {
    /// 3 vertices + the order-3 quadrature points
    #[default]
    VerticesQuadrature,
    /// additionally an n-point-per-edge barycentric lattice
    DenseSampling(usize),
}

/// Per-element coefficient summary used by the restriction checkers.
#[derive(Clone, Debug)]
pub struct ElementCoefficients {
    pub dbar: Mat2,
    pub lambda_min_bar: f64,
    pub v_sup: f64,
    pub alpha_sup: f64,
    pub epsilon: f64,
    pub eta: f64,
}

/// Integral element average of the diffusivity over element `e` using the
/// given symmetric triangle rule (1, 3 or 7 points).
pub fn element_avg_diffusivity(
    field: &DiffusivityField,
    tri: &Triangulation,
    e: usize,
    quadrature_order: usize,
) -> Result<Mat2> {
    let rule = triangle_rule(quadrature_order)?;
    let v = tri.element_vertices(e);
    let mut acc = Mat2::zeros();
    for p in rule {
        let x = bary_to_point(v, p.bary);
        acc += field.eval(x)? * p.weight;
    }
    let dbar = sym_part(&acc);
    // exact integration preserves SPD (strictly positive linear map); the
    // check catches wild callables under inexact quadrature
    check_spd(&dbar)?;
    Ok(dbar)
}

/// Nondimensional ratios epsilon = Dyy/Dxx and eta = Dxy/Dxx of an SPD
/// matrix; eta^2 < epsilon is asserted (equivalent to positive definiteness).
pub fn epsilon_eta(dbar: &Mat2) -> Result<(f64, f64)> {
    check_spd(dbar)?;
    let eps = dbar[(1, 1)] / dbar[(0, 0)];
    let eta = dbar[(0, 1)] / dbar[(0, 0)];
    if eta * eta >= eps {
        return Err(Error::NotSpd {
            lo: eps - eta * eta,
            hi: eps,
        });
    }
    Ok((eps, eta))
}

/// Sample points of an element under a sup-norm strategy.
fn sup_norm_samples(tri: &Triangulation, e: usize, strategy: SupNormStrategy) -> Result<Vec<Vec2>> {
    let v = tri.element_vertices(e);
    let mut pts: Vec<Vec2> = v.iter().map(|p| **p).collect();
    for q in triangle_rule(3)? {
        pts.push(bary_to_point(v, q.bary));
    }
    if let SupNormStrategy::DenseSampling(n) = strategy {
        let n = n.max(1);
        for i in 0..=n {
            for j in 0..=(n - i) {
                let k = n - i - j;
                let bary = [
                    i as f64 / n as f64,
                    j as f64 / n as f64,
                    k as f64 / n as f64,
                ];
                pts.push(bary_to_point(v, bary));
            }
        }
    }
    Ok(pts)
}

/// Element sup-norms: max Euclidean norm of v and max of alpha over the
/// sample set of the chosen strategy.
pub fn element_sup_norms(
    spec: &ProblemSpec,
    tri: &Triangulation,
    e: usize,
    strategy: SupNormStrategy,
) -> Result<(f64, f64)> {
    let mut v_sup = 0.0f64;
    let mut alpha_sup = 0.0f64;
    for x in sup_norm_samples(tri, e, strategy)? {
        v_sup = v_sup.max(spec.velocity.eval(x).norm());
        alpha_sup = alpha_sup.max(spec.reaction.eval(x));
    }
    Ok((v_sup, alpha_sup))
}

/// Element sup of the max-norm |v(x)|_inf (the physics-based nondimensional
/// numbers are defined with the infinity norm).
pub fn element_sup_norm_vinf(
    spec: &ProblemSpec,
    tri: &Triangulation,
    e: usize,
    strategy: SupNormStrategy,
) -> Result<f64> {
    let mut v_sup = 0.0f64;
    for x in sup_norm_samples(tri, e, strategy)? {
        let v = spec.velocity.eval(x);
        v_sup = v_sup.max(v.x.abs().max(v.y.abs()));
    }
    Ok(v_sup)
}

/// All per-element coefficient quantities in one pass.
pub fn element_coefficients(
    spec: &ProblemSpec,
    tri: &Triangulation,
    e: usize,
    quadrature_order: usize,
    strategy: SupNormStrategy,
) -> Result<ElementCoefficients> {
    let dbar = element_avg_diffusivity(&spec.diffusivity, tri, e, quadrature_order)?;
    let (lambda_min_bar, _) = sym_eigenvalues(&dbar);
    let (epsilon, eta) = epsilon_eta(&dbar)?;
    let (v_sup, alpha_sup) = element_sup_norms(spec, tri, e, strategy)?;
    Ok(ElementCoefficients {
        dbar,
        lambda_min_bar,
        v_sup,
        alpha_sup,
        epsilon,
        eta,
    })
}
