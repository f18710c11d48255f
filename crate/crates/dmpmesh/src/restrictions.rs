//! Mesh-restriction checkers: the anisotropic non-obtuse angle condition,
//! the generalized Delaunay-type angle condition, the T3/Q4 local
//! feasibility inequalities, and the element/edge/global and physics-based
//! Peclet and Damkohler numbers.
//!
//! In 2D (nd = 2) the anisotropic non-obtuse condition for every ordered
//! vertex pair (p, q) of every element reads
//!
//! ```text
//!   0 <= h_p |v|_e / (3 L) + h_p h_q |alpha|_e / (12 L) <= cos(beta_pq_metric)
//! ```
//!
//! with L the smallest eigenvalue of Dbar. The lower bound is nominally
//! strict, but with v = alpha = 0 the left side is exactly zero, so the
//! implemented predicate admits zero (flagged in the report as a deliberate
//! relaxation) -- pure diffusion could never pass otherwise.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::linalg2::{check_spd, sym_eigenvalues};
use crate::mesh::{EdgeKey, Triangulation};
use crate::problem::{
    element_coefficients, element_sup_norm_vinf, epsilon_eta, ElementCoefficients, ProblemSpec,
    SupNormStrategy,
};
use crate::quadrature::{bary_to_point, triangle_rule};
use crate::{Error, Mat2, Result, Vec2};

/// Absolute tolerance on dimensionless predicate margins (cosines,
/// normalized inequalities).
pub const MARGIN_TOL: f64 = 1e-10;

/// One checked item (an element or an interior edge).
#[derive(Clone, Debug, Serialize)]
pub struct AngleConditionItem {
    /// element index, or edge endpoints for the Delaunay condition
    pub id: usize,
    pub edge: Option<(usize, usize)>,
    pub pass: bool,
    /// binding left-hand side value
    pub lhs: f64,
    /// binding right-hand side value
    pub rhs: f64,
    /// rhs - lhs of the binding pair (negative = violated)
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AngleConditionReport {
    pub criterion: &'static str,
    pub items: Vec<AngleConditionItem>,
    pub fraction_passing: f64,
    pub worst: Option<AngleConditionItem>,
    pub sup_norm_strategy: SupNormStrategy,
    /// the lower bound 0 < lhs is relaxed to 0 <= lhs so that pure
    /// diffusion can pass
    pub zero_lhs_admitted: bool,
}

impl AngleConditionReport {
    pub fn all_pass(&self) -> bool {
        self.items.iter().all(|i| i.pass)
    }

    fn finish(
        criterion: &'static str,
        items: Vec<AngleConditionItem>,
        strategy: SupNormStrategy,
    ) -> Self {
        let passing = items.iter().filter(|i| i.pass).count();
        let fraction_passing = if items.is_empty() {
            1.0
        } else {
            passing as f64 / items.len() as f64
        };
        let worst = items
            .iter()
            .min_by(|a, b| a.margin.partial_cmp(&b.margin).unwrap())
            .cloned();
        AngleConditionReport {
            criterion,
            items,
            fraction_passing,
            worst,
            sup_norm_strategy: strategy,
            zero_lhs_admitted: true,
        }
    }
}

/// Anisotropic non-obtuse angle condition, checked per element over all
/// ordered vertex pairs.
pub fn check_anisotropic_nonobtuse(
    tri: &Triangulation,
    spec: &ProblemSpec,
    strategy: SupNormStrategy,
) -> Result<AngleConditionReport> {
    let items: Vec<AngleConditionItem> = (0..tri.num_elements())
        .into_par_iter()
        .map(|e| -> Result<AngleConditionItem> {
            let coeff = element_coefficients(spec, tri, e, 3, strategy)?;
            let geom = tri.element_geometry(e)?;
            let angles = geom.metric_angles(&coeff.dbar)?;
            let mut pass = true;
            let mut margin = f64::INFINITY;
            let mut lhs_at = 0.0;
            let mut rhs_at = 0.0;
            for p in 0..3 {
                for q in 0..3 {
                    if p == q {
                        continue;
                    }
                    let lhs = geom.heights[p] * coeff.v_sup / (3.0 * coeff.lambda_min_bar)
                        + geom.heights[p] * geom.heights[q] * coeff.alpha_sup
                            / (12.0 * coeff.lambda_min_bar);
                    let rhs = angles[3 - p - q].cos();
                    let m = rhs - lhs;
                    if m < margin {
                        margin = m;
                        lhs_at = lhs;
                        rhs_at = rhs;
                    }
                    if lhs > rhs + MARGIN_TOL {
                        pass = false;
                    }
                }
            }
            Ok(AngleConditionItem {
                id: e,
                edge: None,
                pass,
                lhs: lhs_at,
                rhs: rhs_at,
                margin,
            })
        })
        .collect::<Result<_>>()?;
    Ok(AngleConditionReport::finish(
        "anisotropic_nonobtuse",
        items,
        strategy,
    ))
}

/// arccot on the (0, pi) branch: continuous over all of R.
fn arccot(t: f64) -> f64 {
    PI / 2.0 - t.atan()
}

struct EdgeSide {
    /// metric dihedral angle facing the shared edge
    beta: f64,
    det: f64,
    meas: f64,
    v_sup: f64,
    alpha_sup: f64,
    /// heights of the two edge endpoints within this element
    h_end: [f64; 2],
}

fn edge_side(
    tri: &Triangulation,
    spec: &ProblemSpec,
    e: usize,
    edge: EdgeKey,
    strategy: SupNormStrategy,
) -> Result<EdgeSide> {
    let coeff = element_coefficients(spec, tri, e, 3, strategy)?;
    let geom = tri.element_geometry(e)?;
    let conn = tri.element(e);
    let la = conn
        .iter()
        .position(|&v| v == edge.0)
        .ok_or_else(|| Error::Validation(format!("edge {edge:?} not part of element {e}")))?;
    let lb = conn.iter().position(|&v| v == edge.1).unwrap();
    let angles = geom.metric_angles(&coeff.dbar)?;
    Ok(EdgeSide {
        beta: angles[3 - la - lb],
        det: coeff.dbar.determinant(),
        meas: geom.area,
        v_sup: coeff.v_sup,
        alpha_sup: coeff.alpha_sup,
        h_end: [geom.heights[la], geom.heights[lb]],
    })
}

/// Generalized Delaunay-type angle condition per interior edge:
///
/// ```text
///   (beta + beta') / 2
///     + arccot( sqrt(det'/det) cot(beta') - 2 F / sqrt(det) ) / 2
///     + arccot( sqrt(det/det') cot(beta)  - 2 F / sqrt(det') ) / 2  <=  pi
/// ```
///
/// with F = meas (|v|/3h_q + |alpha|/12) + meas' (|v|'/3h_q' + |alpha|'/12).
/// The constant depends on which edge endpoint plays the role of q; both
/// orientations are evaluated and the edge passes only if both hold.
pub fn check_generalized_delaunay(
    tri: &Triangulation,
    spec: &ProblemSpec,
    strategy: SupNormStrategy,
) -> Result<AngleConditionReport> {
    let edges: Vec<(EdgeKey, [usize; 2])> = tri.interior_edges().collect();
    let items: Vec<AngleConditionItem> = edges
        .par_iter()
        .map(|&(edge, [e0, e1])| -> Result<AngleConditionItem> {
            let s0 = edge_side(tri, spec, e0, edge, strategy)?;
            let s1 = edge_side(tri, spec, e1, edge, strategy)?;
            let mut pass = true;
            let mut worst_margin = f64::INFINITY;
            let mut lhs_at = 0.0;
            for endpoint in 0..2 {
                let f_const = s0.meas
                    * (s0.v_sup / (3.0 * s0.h_end[endpoint]) + s0.alpha_sup / 12.0)
                    + s1.meas * (s1.v_sup / (3.0 * s1.h_end[endpoint]) + s1.alpha_sup / 12.0);
                let cot0 = s0.beta.cos() / s0.beta.sin();
                let cot1 = s1.beta.cos() / s1.beta.sin();
                let lhs = 0.5 * (s0.beta + s1.beta)
                    + 0.5 * arccot((s1.det / s0.det).sqrt() * cot1 - 2.0 * f_const / s0.det.sqrt())
                    + 0.5 * arccot((s0.det / s1.det).sqrt() * cot0 - 2.0 * f_const / s1.det.sqrt());
                let margin = PI - lhs;
                if margin < worst_margin {
                    worst_margin = margin;
                    lhs_at = lhs;
                }
                if lhs > PI + MARGIN_TOL {
                    pass = false;
                }
            }
            Ok(AngleConditionItem {
                id: e0,
                edge: Some((edge.0, edge.1)),
                pass,
                lhs: lhs_at,
                rhs: PI,
                margin: worst_margin,
            })
        })
        .collect::<Result<_>>()?;
    Ok(AngleConditionReport::finish(
        "generalized_delaunay",
        items,
        strategy,
    ))
}

/// T3 feasibility of a triangle under element-average diffusivity Dbar
/// through the general-coordinate inequalities (the local stiffness
/// restriction method): the three off-diagonal conditions plus positive
/// orientation.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct T3Feasibility {
    /// off-diagonal conditions for local pairs (0,1), (0,2), (1,2)
    pub offdiag_ok: [bool; 3],
    /// normalized inequality values (<= 0 passes), same order
    pub offdiag_values: [f64; 3],
    pub area_ok: bool,
    pub pass: bool,
}

pub fn t3_feasibility(vertices: &[Vec2; 3], dbar: &Mat2) -> Result<T3Feasibility> {
    let (eps, eta) = epsilon_eta(dbar)?;
    let [p1, p2, p3] = *vertices;
    let (x1, y1, x2, y2, x3, y3) = (p1.x, p1.y, p2.x, p2.y, p3.x, p3.y);
    let scale = (p2 - p1)
        .norm_squared()
        .max((p3 - p1).norm_squared())
        .max((p3 - p2).norm_squared())
        .max(1e-300)
        * eps.max(1.0);

    // pair (0,1)
    let g1 = (y1 - y3) * (y3 - y2) - eta * (x1 - x3) * (y3 - y2) - eta * (x3 - x2) * (y1 - y3)
        + eps * (x1 - x3) * (x3 - x2);
    // pair (0,2)
    let g2 = (y2 - y1) * (y3 - y2) - eta * (x3 - x2) * (y2 - y1) - eta * (x2 - x1) * (y3 - y2)
        + eps * (x2 - x1) * (x3 - x2);
    // pair (1,2)
    let g3 = (y1 - y3) * (y2 - y1) - eta * (x1 - x3) * (y2 - y1) - eta * (x2 - x1) * (y1 - y3)
        + eps * (x1 - x3) * (x2 - x1);
    // positive orientation (twice the signed area)
    let orient = (x1 - x3) * (y2 - y1) - (x1 - x2) * (y3 - y1);

    let values = [g1 / scale, g2 / scale, g3 / scale];
    let offdiag_ok = values.map(|v| v <= MARGIN_TOL);
    let area_ok = orient > 0.0;
    if orient.abs() <= crate::mesh::DEGENERACY_REL_TOL * scale {
        return Err(Error::DegenerateElement {
            element: 0,
            det: orient.abs(),
        });
    }
    Ok(T3Feasibility {
        offdiag_ok,
        offdiag_values: values,
        area_ok,
        pass: area_ok && offdiag_ok.iter().all(|&b| b),
    })
}

/// Q4 feasibility of an axis-aligned a x b rectangle with constant D.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Q4Feasibility {
    /// sqrt(Dxx / 2 Dyy) <= a/b <= sqrt(2 Dxx / Dyy)
    pub ratio_ok: bool,
    /// both corner (diagonal-pair) entries nonpositive
    pub corner_ok: bool,
    /// all 12 off-diagonal entries of the closed form <= tolerance
    pub pass: bool,
    pub aspect: f64,
    pub aspect_bounds: (f64, f64),
    pub max_offdiagonal: f64,
}

pub fn q4_feasibility(a: f64, b: f64, d: &Mat2) -> Result<Q4Feasibility> {
    if a <= 0.0 || b <= 0.0 {
        return Err(Error::Config(format!(
            "rectangle sides must be positive, got ({a}, {b})"
        )));
    }
    check_spd(d)?;
    let (dxx, dxy, dyy) = (d[(0, 0)], d[(0, 1)], d[(1, 1)]);
    let aspect = a / b;
    let lo = (dxx / (2.0 * dyy)).sqrt();
    let hi = (2.0 * dxx / dyy).sqrt();
    let ratio_ok = aspect >= lo - MARGIN_TOL && aspect <= hi + MARGIN_TOL;
    let corner_m = -b * dxx / (6.0 * a) - dxy / 2.0 - a * dyy / (6.0 * b);
    let corner_p = -b * dxx / (6.0 * a) + dxy / 2.0 - a * dyy / (6.0 * b);
    let k = crate::assembly::rectangle_diffusion_closed_form(a, b, d);
    let scale = k.amax().max(1e-300);
    let corner_ok = corner_m <= MARGIN_TOL * scale && corner_p <= MARGIN_TOL * scale;
    let mut max_off = f64::NEG_INFINITY;
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                max_off = max_off.max(k[(i, j)]);
            }
        }
    }
    Ok(Q4Feasibility {
        ratio_ok,
        corner_ok,
        pass: max_off <= MARGIN_TOL * scale,
        aspect,
        aspect_bounds: (lo, hi),
        max_offdiagonal: max_off,
    })
}

/// Element-level Peclet and Damkohler numbers plus the master-inequality
/// margin for the (max, pumax) pair.
#[derive(Clone, Debug, Serialize)]
pub struct ElementNumbers {
    pub element: usize,
    pub peclet: f64,
    pub damkohler: f64,
    /// Pe/(3 cos b) + Da/(12 cos b) for the (max, pumax) height pair;
    /// <= 1 passes (informational, the per-pair angle check is authoritative)
    pub master_lhs: f64,
}

/// Edge-level numbers for one side (element) of an interior edge.
#[derive(Clone, Debug, Serialize)]
pub struct EdgeSideNumbers {
    pub element: usize,
    /// Pe for q = each edge endpoint (the height in the denominator)
    pub peclet: [f64; 2],
    pub damkohler: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EdgeNumbers {
    pub edge: (usize, usize),
    pub sides: [EdgeSideNumbers; 2],
    /// generalized-Delaunay master inequality value (<= 1 passes), worst
    /// orientation
    pub master_lhs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NondimensionalReport {
    pub elements: Vec<ElementNumbers>,
    pub edges: Vec<EdgeNumbers>,
    pub global_peclet: f64,
    pub global_damkohler: f64,
    /// global master inequality (h-refinement estimate), <= 1 passes
    pub global_master_lhs: f64,
    pub h: f64,
    pub sup_norm_strategy: SupNormStrategy,
}

fn element_numbers(
    tri: &Triangulation,
    e: usize,
    coeff: &ElementCoefficients,
) -> Result<ElementNumbers> {
    let geom = tri.element_geometry(e)?;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| geom.heights[a].partial_cmp(&geom.heights[b]).unwrap());
    let (i_max, i_pumax) = (order[2], order[1]);
    let h_max = geom.heights[i_max];
    let h_pumax = geom.heights[i_pumax];
    let peclet = h_max * coeff.v_sup / coeff.lambda_min_bar;
    let damkohler = h_max * h_pumax * coeff.alpha_sup / coeff.lambda_min_bar;
    let cosb = geom.metric_beta(&coeff.dbar, i_max, i_pumax)?.cos();
    let master_lhs = if cosb > 0.0 {
        peclet / (3.0 * cosb) + damkohler / (12.0 * cosb)
    } else if peclet + damkohler == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(ElementNumbers {
        element: e,
        peclet,
        damkohler,
        master_lhs,
    })
}

/// Element, edge and global Peclet/Damkohler numbers with the associated
/// master-inequality margins.
pub fn mesh_nondimensional_numbers(
    tri: &Triangulation,
    spec: &ProblemSpec,
    strategy: SupNormStrategy,
) -> Result<NondimensionalReport> {
    let coeffs: Vec<ElementCoefficients> = (0..tri.num_elements())
        .into_par_iter()
        .map(|e| element_coefficients(spec, tri, e, 3, strategy))
        .collect::<Result<_>>()?;
    let elements: Vec<ElementNumbers> = (0..tri.num_elements())
        .map(|e| element_numbers(tri, e, &coeffs[e]))
        .collect::<Result<_>>()?;

    let mut edges = Vec::new();
    for (edge, [e0, e1]) in tri.interior_edges() {
        let mut sides = Vec::with_capacity(2);
        for &e in &[e0, e1] {
            let geom = tri.element_geometry(e)?;
            let conn = tri.element(e);
            let la = conn.iter().position(|&v| v == edge.0).unwrap();
            let lb = conn.iter().position(|&v| v == edge.1).unwrap();
            let sqrt_det = coeffs[e].dbar.determinant().sqrt();
            sides.push(EdgeSideNumbers {
                element: e,
                peclet: [
                    geom.area * coeffs[e].v_sup / (geom.heights[la] * sqrt_det),
                    geom.area * coeffs[e].v_sup / (geom.heights[lb] * sqrt_det),
                ],
                damkohler: geom.area * coeffs[e].alpha_sup / sqrt_det,
            });
        }
        let sides: [EdgeSideNumbers; 2] = [sides[0].clone(), sides[1].clone()];

        // master form of the generalized Delaunay condition, both orientations
        let s0 = edge_side(tri, spec, e0, edge, strategy)?;
        let s1 = edge_side(tri, spec, e1, edge, strategy)?;
        let mut master = f64::NEG_INFINITY;
        for endpoint in 0..2 {
            let pe0 = sides[0].peclet[endpoint];
            let pe1 = sides[1].peclet[endpoint];
            let da0 = sides[0].damkohler;
            let da1 = sides[1].damkohler;
            let cot0 = s0.beta.cos() / s0.beta.sin();
            let cot1 = s1.beta.cos() / s1.beta.sin();
            let lhs = (0.5 * (s0.beta + s1.beta)
                + 0.5
                    * arccot(
                        (s1.det / s0.det).sqrt() * (cot1 - 2.0 * pe1 / 3.0 - da1 / 6.0)
                            - 2.0 * pe0 / 3.0
                            - da0 / 6.0,
                    )
                + 0.5
                    * arccot(
                        (s0.det / s1.det).sqrt() * (cot0 - 2.0 * pe0 / 3.0 - da0 / 6.0)
                            - 2.0 * pe1 / 3.0
                            - da1 / 6.0,
                    ))
                / PI;
            master = master.max(lhs);
        }
        edges.push(EdgeNumbers {
            edge: (edge.0, edge.1),
            sides,
            master_lhs: master,
        });
    }

    let v_max = coeffs.iter().map(|c| c.v_sup).fold(0.0, f64::max);
    let alpha_max = coeffs.iter().map(|c| c.alpha_sup).fold(0.0, f64::max);
    let lambda_min = coeffs
        .iter()
        .map(|c| c.lambda_min_bar)
        .fold(f64::INFINITY, f64::min);
    let h = tri.h();
    let global_peclet = h * v_max / lambda_min;
    let global_damkohler = h * h * alpha_max / lambda_min;

    // worst-case metric cosine over the (max, pumax) pairs
    let mut min_cos = f64::INFINITY;
    for e in 0..tri.num_elements() {
        let geom = tri.element_geometry(e)?;
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| geom.heights[a].partial_cmp(&geom.heights[b]).unwrap());
        let cosb = geom.metric_beta(&coeffs[e].dbar, order[2], order[1])?.cos();
        min_cos = min_cos.min(cosb);
    }
    let global_master_lhs = if min_cos > 0.0 {
        global_peclet / (3.0 * min_cos) + global_damkohler / (12.0 * min_cos)
    } else if global_peclet + global_damkohler == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };

    Ok(NondimensionalReport {
        elements,
        edges,
        global_peclet,
        global_damkohler,
        global_master_lhs,
        h,
        sup_norm_strategy: strategy,
    })
}

/// Physics-based nondimensional numbers; two anisotropic variants.
#[derive(Clone, Debug, Serialize)]
pub struct PhysicsNumbers {
    /// variant A: min-over-domain smallest eigenvalue in the denominator
    pub peclet_a: f64,
    /// variant B: geometric mean sqrt(min lambda_min * max lambda_max)
    pub peclet_b: f64,
    /// Damkohler of the first kind (variant independent); None when v = 0
    pub damkohler_i: Option<f64>,
    pub damkohler_ii_a: f64,
    pub damkohler_ii_b: f64,
    pub characteristic_length: f64,
    /// diagnostic bound beta_0 on max_i |v_i(x)| / lambda_min(D(x));
    /// reported, never enforced
    pub velocity_eigenvalue_ratio: f64,
    /// extrema sampled at mesh vertices and quadrature points
    pub sampling: &'static str,
}

/// Evaluates the physics-based numbers by sampling the coefficient extrema
/// over the mesh (vertices plus order-3 quadrature points).
pub fn physics_numbers(spec: &ProblemSpec, tri: &Triangulation) -> Result<PhysicsNumbers> {
    let mut v_max = 0.0f64;
    let mut alpha_max = 0.0f64;
    let mut lambda_min = f64::INFINITY;
    let mut lambda_max = f64::NEG_INFINITY;
    let mut beta0 = 0.0f64;
    let rule = triangle_rule(3)?;
    let mut visit = |x: Vec2| -> Result<()> {
        let v = spec.velocity.eval(x);
        let vinf = v.x.abs().max(v.y.abs());
        v_max = v_max.max(vinf);
        alpha_max = alpha_max.max(spec.reaction.eval(x).abs());
        let d = spec.diffusivity.eval(x)?;
        let (lo, hi) = sym_eigenvalues(&d);
        lambda_min = lambda_min.min(lo);
        lambda_max = lambda_max.max(hi);
        beta0 = beta0.max(vinf / lo);
        Ok(())
    };
    for v in tri.vertices() {
        visit(*v)?;
    }
    for e in 0..tri.num_elements() {
        let verts = tri.element_vertices(e);
        for p in rule {
            visit(bary_to_point(verts, p.bary))?;
        }
    }
    let length = spec.characteristic_length;
    let geo_mean = (lambda_min * lambda_max).sqrt();
    let peclet_a = v_max * length / lambda_min;
    let peclet_b = v_max * length / geo_mean;
    let damkohler_i = (v_max > 0.0).then(|| alpha_max * length / v_max);
    Ok(PhysicsNumbers {
        peclet_a,
        peclet_b,
        damkohler_i,
        damkohler_ii_a: alpha_max * length * length / lambda_min,
        damkohler_ii_b: alpha_max * length * length / geo_mean,
        characteristic_length: length,
        velocity_eigenvalue_ratio: beta0,
        sampling: "mesh vertices + order-3 quadrature points",
    })
}

/// Convenience wrapper: evaluates element sup of |v|_inf over the whole
/// mesh (used by reports).
pub fn mesh_sup_vinf(
    spec: &ProblemSpec,
    tri: &Triangulation,
    strategy: SupNormStrategy,
) -> Result<f64> {
    let mut v = 0.0f64;
    for e in 0..tri.num_elements() {
        v = v.max(element_sup_norm_vinf(spec, tri, e, strategy)?);
    }
    Ok(v)
}
