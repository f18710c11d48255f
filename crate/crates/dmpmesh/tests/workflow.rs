//! Full-pipeline integration test through the public API: files on disk ->
//! mesh + problem -> assemble/solve -> principle verification -> restriction
//! checks -> adaptation -> post-processing -> exports.

use std::collections::BTreeMap;

use dmpmesh::adapt::{
    adapt_mesh, export_metric, import_metric, AdaptConfig, MetricFormat, RemeshBackend,
    StopCriterion, ThetaPolicy,
};
use dmpmesh::assembly::{assemble, solve_system};
use dmpmesh::mesh::io::{load_mesh, write_node_ele, MeshFormat};
use dmpmesh::mesh::{structured_unit, Triangulation};
use dmpmesh::postprocess::vtk::{export_vtk, Field};
use dmpmesh::postprocess::{balance_errors, recover_flux};
use dmpmesh::principles::{check_matrix_principles, check_solution_principles};
use dmpmesh::problem::file::parse_problem;
use dmpmesh::problem::SupNormStrategy;
use dmpmesh::restrictions::{check_anisotropic_nonobtuse, check_generalized_delaunay};

#[test]
fn solve_diagnose_adapt_roundtrip() {
    let dir = tempfile::tempdir().unwrap();

    // mesh on disk: structured square, bottom edge marked 2
    let base = structured_unit(6, 6, 1.0, 1.0).unwrap();
    let mut markers = BTreeMap::new();
    for &v in base.boundary_vertices() {
        markers.insert(v, if base.vertex(v).y == 0.0 { 2 } else { 1 });
    }
    let tri =
        Triangulation::new(base.vertices().to_vec(), base.elements().to_vec(), markers).unwrap();
    write_node_ele(&tri, &dir.path().join("mesh")).unwrap();
    let tri = load_mesh(&dir.path().join("mesh.node"), MeshFormat::NodeEle).unwrap();
    assert_eq!(tri.boundary_marker(0), Some(2));

    // problem from JSON
    let spec = parse_problem(
        r#"{
            "diffusivity": {"kind": "constant", "d": [[1.0, 0.2], [0.2, 0.5]]},
            "velocity": {"constant": [0.1, 0.0]},
            "reaction": {"constant": 0.1},
            "source": {"constant": 0.0},
            "dirichlet": {"values": {"1": 0.0, "2": 1.0}},
            "length": 1.0
        }"#,
    )
    .unwrap();
    spec.validate_reaction_sign(tri.vertices().iter().copied())
        .unwrap();

    // assemble + solve + verify
    let sys = assemble(&spec, &tri).unwrap();
    let c = solve_system(&sys).unwrap();
    let solution = check_solution_principles(&sys, &c, Some((0.0, 1.0)), 1e-10).unwrap();
    assert!(solution.max_c <= 1.0 + 1e-10);
    let matrix = check_matrix_principles(&sys, Some(&tri), 4000).unwrap();
    assert!(matrix.inverse_nonneg.is_some());

    // restriction checks run on the same inputs
    let strat = SupNormStrategy::VerticesQuadrature;
    let strong = check_anisotropic_nonobtuse(&tri, &spec, strat).unwrap();
    let weak = check_generalized_delaunay(&tri, &spec, strat).unwrap();
    if strong.all_pass() {
        assert!(weak.all_pass());
    }

    // adapt with the builtin backend until the Delaunay criterion holds
    let config = AdaptConfig {
        max_iters: 20,
        stop_crit: StopCriterion::GeneralizedDelaunay,
        theta_policy: ThetaPolicy::TargetCount(tri.num_elements()),
        backend: RemeshBackend::default(),
        sup_norm_strategy: strat,
    };
    let adapted = adapt_mesh(&tri, &spec, &config).unwrap();
    assert!(adapted.converged);
    // boundary markers survive adaptation: the bottom edge keeps marker 2
    let bottom_marker = adapted
        .mesh
        .boundary_vertices()
        .iter()
        .find(|&&v| adapted.mesh.vertex(v).y == 0.0 && adapted.mesh.vertex(v).x > 0.0)
        .map(|&v| adapted.mesh.boundary_marker(v));
    assert_eq!(bottom_marker, Some(Some(2)));

    // metric export round-trip
    let mtr = dir.path().join("metric.mtr");
    export_metric(&adapted.metric.vertex_metrics, &mtr, MetricFormat::BamgMtr).unwrap();
    let back = import_metric(&std::fs::read_to_string(&mtr).unwrap(), MetricFormat::BamgMtr).unwrap();
    assert_eq!(back.len(), adapted.mesh.num_vertices());

    // solve on the adapted mesh and post-process
    let sys2 = assemble(&spec, &adapted.mesh).unwrap();
    let c2 = solve_system(&sys2).unwrap();
    let flux = recover_flux(&adapted.mesh, &spec, &c2, false).unwrap();
    let balance = balance_errors(&adapted.mesh, &spec, &c2, &flux).unwrap();
    let rel = (balance.global_error - balance.global_error_direct).abs()
        / balance.global_error.abs().max(1e-12);
    assert!(rel < 1e-8, "telescoping mismatch: {rel}");

    export_vtk(
        &adapted.mesh,
        &[
            ("c".into(), Field::NodalScalar(c2)),
            ("flux".into(), Field::NodalVector(flux)),
            ("balance".into(), Field::CellScalar(balance.local_errors)),
        ],
        &dir.path().join("adapted.vtk"),
    )
    .unwrap();
    assert!(dir.path().join("adapted.vtk").exists());

}
