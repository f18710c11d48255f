//! Command implementations.

use std::path::Path;

use serde_json::json;

use dmpmesh::adapt::{
    adapt_mesh, export_metric, history_csv, AdaptConfig, MetricFormat, RemeshBackend,
    StopCriterion, ThetaPolicy,
};
use dmpmesh::assembly::{assemble, solve_system};
use dmpmesh::mesh::io::{format_from_path, load_mesh, write_msh2, write_node_ele};
use dmpmesh::mesh::Triangulation;
use dmpmesh::postprocess::vtk::{export_vtk, Field};
use dmpmesh::postprocess::{balance_errors, csv_header, csv_row, recover_flux, TableRow};
use dmpmesh::principles::{check_matrix_principles, check_solution_principles};
use dmpmesh::problem::{file::load_problem, ProblemSpec, SupNormStrategy};
use dmpmesh::restrictions::{
    check_anisotropic_nonobtuse, check_generalized_delaunay, mesh_nondimensional_numbers,
    physics_numbers, AngleConditionReport,
};
use dmpmesh::{Error, Result};

use crate::manifest::{verbose, RunManifest};

const STRATEGY: SupNormStrategy = SupNormStrategy::VerticesQuadrature;

pub fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_)
        | Error::Parse { .. }
        | Error::Validation(_)
        | Error::Config(_)
        | Error::Mismatch(_)
        | Error::Expr(_)
        | Error::DegenerateElement { .. }
        | Error::NonManifoldEdge { .. }
        | Error::NotSpd { .. } => 2,
        Error::SingularFactorization { .. } | Error::Capacity(_) | Error::Backend { .. } => 3,
    }
}

fn load_inputs(mesh_path: &Path, spec_path: &Path) -> Result<(Triangulation, ProblemSpec)> {
    let format = format_from_path(mesh_path)?;
    let tri = load_mesh(mesh_path, format)?;
    let spec = load_problem(spec_path)?;
    // alpha >= 0 is required for any maximum principle; sample at vertices
    spec.validate_reaction_sign(tri.vertices().iter().copied())?;
    Ok((tri, spec))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serialization cannot fail");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn parse_bounds(raw: Option<&str>) -> Result<Option<(f64, f64)>> {
    let Some(raw) = raw else {
        return Ok(None);
    };
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::Config(format!(
            "--bounds expects \"lo,hi\", got {raw:?}"
        )));
    }
    let lo: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad lower bound {:?}", parts[0])))?;
    let hi: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad upper bound {:?}", parts[1])))?;
    Ok(Some((lo, hi)))
}

pub fn cmd_solve(
    mesh_path: &Path,
    spec_path: &Path,
    out: &Path,
    bounds: Option<&str>,
    dense_cap: usize,
) -> Result<u8> {
    let (tri, spec) = load_inputs(mesh_path, spec_path)?;
    let bounds = parse_bounds(bounds)?;
    std::fs::create_dir_all(out)?;
    let manifest = RunManifest::new(
        "solve",
        mesh_path,
        spec_path,
        json!({"bounds": bounds, "dense_cap": dense_cap}),
    )?;

    let sys = assemble(&spec, &tri)?;
    let c = solve_system(&sys)?;
    if verbose() {
        eprintln!("solved {} free / {} prescribed DOFs", sys.n_f(), sys.n_p());
    }
    let solution = check_solution_principles(&sys, &c, bounds, 1e-10)?;
    let matrix = if sys.n_f() >= 1 && sys.n_f() <= dense_cap {
        Some(check_matrix_principles(&sys, Some(&tri), dense_cap)?)
    } else {
        None
    };
    let flux = recover_flux(&tri, &spec, &c, false)?;
    let balance = balance_errors(&tri, &spec, &c, &flux)?;

    let stats = tri.statistics()?;
    let row = TableRow {
        nv: stats.num_vertices,
        nele: stats.num_elements,
        h: stats.h,
        min_c: solution.min_c,
        max_c: solution.max_c,
        pct_below: solution.pct_below.unwrap_or(0.0),
        pct_above: solution.pct_above.unwrap_or(0.0),
    };
    std::fs::write(
        out.join("solve.csv"),
        format!("{}\n{}\n", csv_header(), csv_row(&row)),
    )?;

    export_vtk(
        &tri,
        &[
            ("concentration".into(), Field::NodalScalar(c.clone())),
            ("flux".into(), Field::NodalVector(flux)),
            (
                "local_balance_error".into(),
                Field::CellScalar(balance.local_errors.clone()),
            ),
        ],
        &out.join("solution.vtk"),
    )?;

    let report = json!({
        "manifest": manifest,
        "mesh": stats,
        "solution": solution,
        "matrix": matrix,
        "balance": {
            "abs_max_local": balance.abs_max_local,
            "global_error": balance.global_error,
            "global_error_direct": balance.global_error_direct,
        },
        "table_row": row,
    });
    write_json(&out.join("solve.json"), &report)?;
    // principle verdicts are data, not process failures
    Ok(0)
}

fn criterion_report(
    tri: &Triangulation,
    spec: &ProblemSpec,
    criterion: StopCriterion,
) -> Result<AngleConditionReport> {
    match criterion {
        StopCriterion::AnisotropicNonobtuse => check_anisotropic_nonobtuse(tri, spec, STRATEGY),
        StopCriterion::GeneralizedDelaunay => check_generalized_delaunay(tri, spec, STRATEGY),
    }
}

/// Per-element margin field for the VTK export; edge-based reports map each
/// edge margin onto both incident elements (keeping the minimum).
fn margin_cell_field(tri: &Triangulation, report: &AngleConditionReport) -> Vec<f64> {
    let mut margins = vec![f64::INFINITY; tri.num_elements()];
    for item in &report.items {
        match item.edge {
            None => margins[item.id] = margins[item.id].min(item.margin),
            Some((a, b)) => {
                if let Some(inc) = tri.edge_adjacency().get(&dmpmesh::mesh::edge_key(a, b)) {
                    for &e in inc {
                        margins[e] = margins[e].min(item.margin);
                    }
                }
            }
        }
    }
    for m in margins.iter_mut() {
        if !m.is_finite() {
            *m = 0.0;
        }
    }
    margins
}

pub fn cmd_check_mesh(
    mesh_path: &Path,
    spec_path: &Path,
    criterion: StopCriterion,
    out: &Path,
) -> Result<u8> {
    let (tri, spec) = load_inputs(mesh_path, spec_path)?;
    std::fs::create_dir_all(out)?;
    let manifest = RunManifest::new(
        "check-mesh",
        mesh_path,
        spec_path,
        json!({"criterion": criterion}),
    )?;
    let report = criterion_report(&tri, &spec, criterion)?;
    let margins = margin_cell_field(&tri, &report);
    export_vtk(
        &tri,
        &[("margin".into(), Field::CellScalar(margins))],
        &out.join("margins.vtk"),
    )?;
    let pass = report.all_pass();
    let doc = json!({
        "manifest": manifest,
        "mesh": tri.statistics()?,
        "report": report,
    });
    write_json(&out.join("check.json"), &doc)?;
    if verbose() {
        eprintln!(
            "criterion {:?}: fraction passing {:.4}",
            criterion, report.fraction_passing
        );
    }
    Ok(if pass { 0 } else { 1 })
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_adapt(
    mesh_path: &Path,
    spec_path: &Path,
    criterion: StopCriterion,
    max_iters: usize,
    theta: Option<f64>,
    target_count: Option<usize>,
    backend: &str,
    out: &Path,
) -> Result<u8> {
    let (tri, spec) = load_inputs(mesh_path, spec_path)?;
    std::fs::create_dir_all(out)?;
    let theta_policy = match (theta, target_count) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "--theta and --target-count are mutually exclusive".into(),
            ));
        }
        (Some(t), None) => ThetaPolicy::Constant(t),
        (None, Some(n)) => ThetaPolicy::TargetCount(n),
        (None, None) => ThetaPolicy::Constant(1.0),
    };
    let backend = if backend == "builtin" {
        RemeshBackend::default()
    } else if let Some(template) = backend.strip_prefix("external:") {
        RemeshBackend::External {
            command_template: template.to_string(),
        }
    } else {
        return Err(Error::Config(format!(
            "backend must be \"builtin\" or \"external:<template>\", got {backend:?}"
        )));
    };
    let manifest = RunManifest::new(
        "adapt",
        mesh_path,
        spec_path,
        json!({
            "criterion": criterion,
            "max_iters": max_iters,
            "theta_policy": theta_policy,
        }),
    )?;
    let config = AdaptConfig {
        max_iters,
        stop_crit: criterion,
        theta_policy,
        backend,
        sup_norm_strategy: STRATEGY,
    };
    let result = adapt_mesh(&tri, &spec, &config)?;
    write_node_ele(&result.mesh, &out.join("adapted"))?;
    write_msh2(&result.mesh, &out.join("adapted.msh"))?;
    export_metric(
        &result.metric.vertex_metrics,
        &out.join("adapted.mtr"),
        MetricFormat::BamgMtr,
    )?;
    std::fs::write(out.join("history.csv"), history_csv(&result.history))?;
    let doc = json!({
        "manifest": manifest,
        "converged": result.converged,
        "iterations": result.iterations,
        "final_mesh": result.mesh.statistics()?,
        "history": result.history,
    });
    write_json(&out.join("adapt.json"), &doc)?;
    if verbose() {
        eprintln!(
            "adapt: converged = {}, iterations = {}",
            result.converged, result.iterations
        );
    }
    Ok(if result.converged { 0 } else { 1 })
}

pub fn cmd_numbers(mesh_path: &Path, spec_path: &Path, out: &Path) -> Result<u8> {
    let (tri, spec) = load_inputs(mesh_path, spec_path)?;
    std::fs::create_dir_all(out)?;
    let manifest = RunManifest::new("numbers", mesh_path, spec_path, json!({}))?;
    let mesh_numbers = mesh_nondimensional_numbers(&tri, &spec, STRATEGY)?;
    let physics = physics_numbers(&spec, &tri)?;
    let doc = json!({
        "manifest": manifest,
        "mesh": tri.statistics()?,
        "mesh_numbers": mesh_numbers,
        "physics_numbers": physics,
    });
    write_json(&out.join("numbers.json"), &doc)?;
    println!(
        "global Peclet {}  global Damkohler {}  physics Peclet(A) {}",
        mesh_numbers.global_peclet, mesh_numbers.global_damkohler, physics.peclet_a
    );
    Ok(0)
}
