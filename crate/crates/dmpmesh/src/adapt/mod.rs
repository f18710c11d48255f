//! Metric tensor construction M_e = Theta_e Dbar_e^{-1}, M-uniformity
//! diagnostics (equidistribution and alignment), and the iterative
//! adaptation loop driving a remesher until the configured angle condition
//! holds on every element (or the iteration budget runs out, which is a
//! reported outcome, not an error).

pub mod backend;
pub mod remesh;

use serde::Serialize;

use crate::linalg2::{check_spd, inv2, sym_exp, sym_log};
use crate::mesh::Triangulation;
use crate::problem::{element_avg_diffusivity, ProblemSpec, SupNormStrategy};
use crate::restrictions::{
    check_anisotropic_nonobtuse, check_generalized_delaunay, AngleConditionReport,
};
use crate::{Error, Mat2, Result, Vec2};

/// Choice of the per-element scale Theta.
#[derive(Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaPolicy {
    Constant(f64),
    /// uniform Theta calibrated so the equidistribution estimate predicts
    /// this many elements (in 2D the metric density scales linearly with
    /// Theta)
    TargetCount(usize),
}

/// Per-element metric with its scale, plus the per-vertex interpolation
/// used by remesher backends.
#[derive(Clone, Debug)]
pub struct MetricField {
    pub element_metrics: Vec<Mat2>,
    pub thetas: Vec<f64>,
    /// volume-weighted log-Euclidean average of incident element metrics
    pub vertex_metrics: Vec<Mat2>,
}

impl MetricField {
    /// Metric density rho_e = sqrt(det M_e).
    pub fn density(&self, e: usize) -> f64 {
        self.element_metrics[e].determinant().sqrt()
    }
}

/// Builds M_e = Theta Dbar_e^{-1} with per-vertex log-Euclidean averages.
pub fn build_metric(
    tri: &Triangulation,
    spec: &ProblemSpec,
    policy: ThetaPolicy,
) -> Result<MetricField> {
    let nele = tri.num_elements();
    let mut inv_dbars = Vec::with_capacity(nele);
    let mut areas = Vec::with_capacity(nele);
    for e in 0..nele {
        let dbar = element_avg_diffusivity(&spec.diffusivity, tri, e, 3)?;
        inv_dbars.push(inv2(&dbar)?);
        areas.push(tri.element_geometry(e)?.area);
    }
    let theta = match policy {
        ThetaPolicy::Constant(t) => {
            if t <= 0.0 {
                return Err(Error::Config(format!("Theta must be positive, got {t}")));
            }
            t
        }
        ThetaPolicy::TargetCount(n) => {
            if n == 0 {
                return Err(Error::Config(
                    "target element count must be positive".into(),
                ));
            }
            // rho_e meas_e = Theta sqrt(det Dbar^-1) meas_e; a mesh with unit
            // metric area per element has sigma_h = Nele, so Theta scales the
            // predicted count linearly in 2D
            let base: f64 = (0..nele)
                .map(|e| inv_dbars[e].determinant().sqrt() * areas[e])
                .sum();
            n as f64 / base
        }
    };
    let element_metrics: Vec<Mat2> = inv_dbars.iter().map(|m| m * theta).collect();
    for m in &element_metrics {
        check_spd(m)?;
    }
    let vertex_metrics = vertex_interpolate(tri, &element_metrics, &areas);
    Ok(MetricField {
        element_metrics,
        thetas: vec![theta; nele],
        vertex_metrics,
    })
}

/// Volume-weighted log-Euclidean mean of the element metrics around each
/// vertex; SPD-closed and symmetric in its arguments, unlike arithmetic
/// averaging which distorts strong anisotropy ratios.
pub fn vertex_interpolate(tri: &Triangulation, metrics: &[Mat2], areas: &[f64]) -> Vec<Mat2> {
    let nv = tri.num_vertices();
    let mut log_sum = vec![Mat2::zeros(); nv];
    let mut weight = vec![0.0f64; nv];
    for (e, conn) in tri.elements().iter().enumerate() {
        let log_m = sym_log(&metrics[e]);
        for &v in conn {
            log_sum[v] += log_m * areas[e];
            weight[v] += areas[e];
        }
    }
    (0..nv)
        .map(|v| {
            if weight[v] > 0.0 {
                sym_exp(&(log_sum[v] / weight[v]))
            } else {
                Mat2::identity()
            }
        })
        .collect()
}

/// Log-Euclidean mean of two SPD matrices (edge metric for length
/// measurement).
pub fn log_euclidean_mean(a: &Mat2, b: &Mat2) -> Mat2 {
    sym_exp(&((sym_log(a) + sym_log(b)) * 0.5))
}

/// Metric length of the segment between two vertices under the mean of the
/// endpoint metrics.
pub fn metric_edge_length(pa: &Vec2, pb: &Vec2, ma: &Mat2, mb: &Mat2) -> f64 {
    let m = log_euclidean_mean(ma, mb);
    let e = pb - pa;
    (e.transpose() * m * e)[(0, 0)].sqrt()
}

/// Reference equilateral triangle (0,0), (1,0), (1/2, sqrt(3)/2) as an edge
/// matrix.
fn reference_edge_matrix() -> Mat2 {
    Mat2::new(1.0, 0.5, 0.0, 3f64.sqrt() / 2.0)
}

/// Shape/orientation misfit of an element under metric m: the AM-GM gap
///
/// ```text
///   tr(J^T M J) / 2 / det(J^T M J)^{1/2} - 1  >=  0
/// ```
///
/// with J the affine map from the reference equilateral element; zero iff
/// the element is metric-equilateral.
pub fn alignment_residual(v: [&Vec2; 3], m: &Mat2) -> f64 {
    let e_elem = Mat2::from_columns(&[v[1] - v[0], v[2] - v[0]]);
    let j = e_elem * inv2(&reference_edge_matrix()).unwrap();
    let jmj = j.transpose() * m * j;
    let tr = jmj[(0, 0)] + jmj[(1, 1)];
    let det = jmj.determinant();
    if det <= 0.0 {
        return f64::INFINITY;
    }
    (0.5 * tr / det.sqrt() - 1.0).max(0.0)
}

#[derive(Clone, Debug, Serialize)]
pub struct UniformityResiduals {
    /// |rho_e meas_e - sigma_h / Nele| / (sigma_h / Nele)
    pub equidistribution: Vec<f64>,
    /// AM-GM alignment gap per element
    pub alignment: Vec<f64>,
}

/// Equidistribution and alignment residuals of a mesh under a metric field.
pub fn uniformity_residuals(
    tri: &Triangulation,
    metric: &MetricField,
) -> Result<UniformityResiduals> {
    let nele = tri.num_elements();
    if metric.element_metrics.len() != nele {
        return Err(Error::Mismatch(format!(
            "metric field covers {} elements, mesh has {nele}",
            metric.element_metrics.len()
        )));
    }
    let mut measures = Vec::with_capacity(nele);
    for e in 0..nele {
        measures.push(tri.element_geometry(e)?.area);
    }
    let sigma_h: f64 = (0..nele).map(|e| metric.density(e) * measures[e]).sum();
    let target = sigma_h / nele as f64;
    let equidistribution = (0..nele)
        .map(|e| (metric.density(e) * measures[e] - target).abs() / target)
        .collect();
    let alignment = (0..nele)
        .map(|e| {
            let verts = tri.element_vertices(e);
            alignment_residual(verts, &metric.element_metrics[e])
        })
        .collect();
    Ok(UniformityResiduals {
        equidistribution,
        alignment,
    })
}

/// Stopping criterion of the adaptation loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCriterion {
    AnisotropicNonobtuse,
    GeneralizedDelaunay,
}

/// Remesher backend: the builtin local modifier, or an external command
/// template with {background_mesh}, {metric_file} and {output_mesh}
/// placeholders.
#[derive(Clone, Debug)]
pub enum RemeshBackend {
    Builtin(remesh::BuiltinOptions),
    External { command_template: String },
}

impl Default for RemeshBackend {
    fn default() -> Self {
        RemeshBackend::Builtin(remesh::BuiltinOptions::default())
    }
}

#[derive(Clone, Debug)]
pub struct AdaptConfig {
    pub max_iters: usize,
    pub stop_crit: StopCriterion,
    pub theta_policy: ThetaPolicy,
    pub backend: RemeshBackend,
    pub sup_norm_strategy: SupNormStrategy,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig {
            max_iters: 50,
            stop_crit: StopCriterion::AnisotropicNonobtuse,
            theta_policy: ThetaPolicy::Constant(1.0),
            backend: RemeshBackend::default(),
            sup_norm_strategy: SupNormStrategy::VerticesQuadrature,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub nele: usize,
    pub pass_fraction: f64,
    pub worst_margin: f64,
}

#[derive(Debug)]
pub struct AdaptResult {
    pub mesh: Triangulation,
    pub metric: MetricField,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
}

fn evaluate_stop(
    tri: &Triangulation,
    spec: &ProblemSpec,
    crit: StopCriterion,
    strategy: SupNormStrategy,
) -> Result<AngleConditionReport> {
    match crit {
        StopCriterion::AnisotropicNonobtuse => check_anisotropic_nonobtuse(tri, spec, strategy),
        StopCriterion::GeneralizedDelaunay => check_generalized_delaunay(tri, spec, strategy),
    }
}

/// Iteratively remeshes until the stop criterion holds on every element or
/// edge. Non-convergence within `max_iters` is a reported outcome
/// (`converged = false`), not an error; backend failures are errors.
pub fn adapt_mesh(
    tri0: &Triangulation,
    spec: &ProblemSpec,
    config: &AdaptConfig,
) -> Result<AdaptResult> {
    if config.max_iters == 0 {
        return Err(Error::Config("max_iters must be at least 1".into()));
    }
    let mut tri = tri0.clone();
    let mut history = Vec::new();
    let mut metric = build_metric(&tri, spec, config.theta_policy)?;
    for iteration in 1..=config.max_iters {
        let new_tri = match &config.backend {
            RemeshBackend::Builtin(opts) => {
                remesh::builtin_remesh(&tri, &metric.vertex_metrics, opts)?
            }
            RemeshBackend::External { command_template } => {
                backend::external_remesh(&tri, &metric, command_template)?
            }
        };
        // recompute element quantities on the new mesh, then check
        let report = evaluate_stop(&new_tri, spec, config.stop_crit, config.sup_norm_strategy)?;
        history.push(IterationRecord {
            iteration,
            nele: new_tri.num_elements(),
            pass_fraction: report.fraction_passing,
            worst_margin: report.worst.as_ref().map_or(f64::INFINITY, |w| w.margin),
        });
        tri = new_tri;
        metric = build_metric(&tri, spec, config.theta_policy)?;
        if report.all_pass() {
            return Ok(AdaptResult {
                mesh: tri,
                metric,
                iterations: iteration,
                converged: true,
                history,
            });
        }
    }
    let iterations = config.max_iters;
    Ok(AdaptResult {
        mesh: tri,
        metric,
        iterations,
        converged: false,
        history,
    })
}

/// History rows as CSV (iter, Nele, pass_fraction, worst_margin).
pub fn history_csv(history: &[IterationRecord]) -> String {
    let mut out = String::from("iter,Nele,pass_fraction,worst_margin\n");
    for row in history {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.iteration, row.nele, row.pass_fraction, row.worst_margin
        ));
    }
    out
}

/// Metric export format.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricFormat {
    /// BAMG solution-metric text: header "Nv 3", then "m11 m12 m22" rows
    BamgMtr,
    /// JSON document with the same content
    VertexJson,
}

/// Serializes the per-vertex metric.
pub fn metric_string(metric: &[Mat2], format: MetricFormat) -> String {
    match format {
        MetricFormat::BamgMtr => {
            let mut out = format!("{} 3\n", metric.len());
            for m in metric {
                out.push_str(&format!("{} {} {}\n", m[(0, 0)], m[(0, 1)], m[(1, 1)]));
            }
            out
        }
        MetricFormat::VertexJson => {
            let rows: Vec<[f64; 3]> = metric
                .iter()
                .map(|m| [m[(0, 0)], m[(0, 1)], m[(1, 1)]])
                .collect();
            let doc = serde_json::json!({ "nv": metric.len(), "metric": rows });
            serde_json::to_string_pretty(&doc).expect("metric serialization cannot fail")
        }
    }
}

/// Writes the per-vertex metric to a file.
pub fn export_metric(metric: &[Mat2], path: &std::path::Path, format: MetricFormat) -> Result<()> {
    std::fs::write(path, metric_string(metric, format))?;
    Ok(())
}

/// Reads a per-vertex metric back (both formats).
pub fn import_metric(text: &str, format: MetricFormat) -> Result<Vec<Mat2>> {
    match format {
        MetricFormat::BamgMtr => {
            let mut lines = text.lines().enumerate();
            let (ln, header) = lines
                .next()
                .ok_or_else(|| Error::parse(0, "empty metric file"))?;
            let mut it = header.split_whitespace();
            let nv: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::parse(ln + 1, "bad metric header"))?;
            let mut out = Vec::with_capacity(nv);
            for (ln, line) in lines.take(nv) {
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(Error::parse(ln + 1, "metric row needs m11 m12 m22"));
                }
                let vals: Vec<f64> = toks
                    .iter()
                    .map(|t| {
                        t.parse()
                            .map_err(|_| Error::parse(ln + 1, "bad metric value"))
                    })
                    .collect::<Result<_>>()?;
                out.push(Mat2::new(vals[0], vals[1], vals[1], vals[2]));
            }
            if out.len() != nv {
                return Err(Error::parse(
                    0,
                    format!("expected {nv} metric rows, got {}", out.len()),
                ));
            }
            Ok(out)
        }
        MetricFormat::VertexJson => {
            let doc: serde_json::Value =
                serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
            let rows = doc["metric"]
                .as_array()
                .ok_or_else(|| Error::parse(0, "missing metric array"))?;
            rows.iter()
                .map(|row| {
                    let vals: Vec<f64> = row
                        .as_array()
                        .map(|a| a.iter().filter_map(|v| v.as_f64()).collect())
                        .unwrap_or_default();
                    if vals.len() != 3 {
                        return Err(Error::parse(0, "metric row needs 3 entries"));
                    }
                    Ok(Mat2::new(vals[0], vals[1], vals[1], vals[2]))
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests;
