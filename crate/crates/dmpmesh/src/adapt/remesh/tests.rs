use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::adapt::{adapt_mesh, AdaptConfig, RemeshBackend, StopCriterion, ThetaPolicy};
use crate::mesh::{in_circumcircle, structured_unit};
use crate::problem::{DiffusivityField, DirichletSpec, ProblemSpec};
use crate::restrictions::check_generalized_delaunay;
use crate::Vec2;

fn identity_metric(n: usize) -> Vec<Mat2> {
    vec![Mat2::identity(); n]
}

#[test]
fn metric_uniform_mesh_is_fixed_point() {
    // equilateral lattice at unit edge length under M = I: nothing to do
    let tri = crate::adapt::tests::equilateral_lattice(3, 3);
    let out = builtin_remesh_full(
        &tri,
        &identity_metric(tri.num_vertices()),
        &BuiltinOptions::default(),
    )
    .unwrap();
    assert!(out.complete);
    assert_eq!(out.operations, 0);
    assert_eq!(out.mesh.num_vertices(), tri.num_vertices());
    assert_eq!(out.mesh.num_elements(), tri.num_elements());
}

#[test]
fn non_delaunay_pair_gets_flipped() {
    // thin quad triangulated on the long diagonal flips to the short one
    let tri = crate::mesh::Triangulation::new(
        vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.02, 0.5),
            Vec2::new(0.0, 0.5),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
        BTreeMap::new(),
    )
    .unwrap();
    let opts = BuiltinOptions {
        // isolate the flip behaviour
        split_threshold: f64::INFINITY,
        collapse_threshold: 0.0,
        smooth: false,
        ..BuiltinOptions::default()
    };
    let out = builtin_remesh_full(&tri, &identity_metric(4), &opts).unwrap();
    assert!(out.complete);
    assert!(out.operations >= 1);
    // the new diagonal must be (1, 3)
    let has_short_diagonal = out
        .mesh
        .edge_adjacency()
        .keys()
        .any(|&(a, b)| (a, b) == (1, 3));
    assert!(has_short_diagonal, "expected flip to the Delaunay diagonal");
    // oracle: vertex 3 inside circumcircle of (0,1,2) before the flip
    assert!(in_circumcircle(
        out.mesh.vertex(0),
        out.mesh.vertex(1),
        out.mesh.vertex(2),
        out.mesh.vertex(3)
    ));
}

#[test]
fn long_edges_get_split() {
    // a metric demanding ~5x more resolution in x splits x-edges repeatedly
    let tri = structured_unit(2, 2, 1.0, 1.0).unwrap();
    let m = Mat2::new(100.0, 0.0, 0.0, 4.0);
    let metrics = vec![m; tri.num_vertices()];
    let out = builtin_remesh_full(&tri, &metrics, &BuiltinOptions::default()).unwrap();
    assert!(out.complete);
    // x-direction target spacing 1/10, y-direction 1/2: an ideal quasi-unit
    // mesh has roughly 11 x 3 = 33 vertices, up from 9
    assert!(
        out.mesh.num_vertices() >= 24,
        "got {} vertices",
        out.mesh.num_vertices()
    );
    // all edges inside the quasi-unit band afterwards (within one split of it)
    for (&(a, b), _) in out.mesh.edge_adjacency() {
        let len = metric_edge_length(
            out.mesh.vertex(a),
            out.mesh.vertex(b),
            &out.vertex_metrics[a],
            &out.vertex_metrics[b],
        );
        assert!(
            len < 2.0 * 2f64.sqrt(),
            "edge ({a},{b}) has metric length {len}"
        );
    }
}

#[test]
fn short_edges_get_collapsed() {
    // a coarse metric on a fine mesh drives collapses
    let tri = structured_unit(8, 8, 1.0, 1.0).unwrap();
    let m = Mat2::identity() * 4.0; // metric edge ~ 0.25 * 2 = 0.5 < 1/sqrt(2)
    let metrics = vec![m; tri.num_vertices()];
    let out = builtin_remesh_full(&tri, &metrics, &BuiltinOptions::default()).unwrap();
    assert!(out.complete);
    assert!(
        out.mesh.num_vertices() < tri.num_vertices(),
        "expected coarsening, got {} -> {}",
        tri.num_vertices(),
        out.mesh.num_vertices()
    );
    // boundary vertex positions are preserved (collapse keeps boundary ends)
    for &v in tri.boundary_vertices() {
        let p = tri.vertex(v);
        let found = out
            .mesh
            .boundary_vertices()
            .iter()
            .any(|&w| (out.mesh.vertex(w) - p).norm() < 1e-12);
        assert!(found, "boundary vertex at ({}, {}) disappeared", p.x, p.y);
    }
}

#[test]
fn boundary_positions_never_move() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let tri = perturbed_unit_square(6, &mut rng, 0.25);
    let before: Vec<Vec2> = tri
        .boundary_vertices()
        .iter()
        .map(|&v| *tri.vertex(v))
        .collect();
    let out = builtin_remesh_full(
        &tri,
        &identity_metric(tri.num_vertices()),
        &BuiltinOptions::default(),
    )
    .unwrap();
    assert!(out.mesh.num_elements() > 0);
    for p in &before {
        let found = out
            .mesh
            .boundary_vertices()
            .iter()
            .any(|&w| (out.mesh.vertex(w) - p).norm() < 1e-12);
        assert!(
            found,
            "boundary vertex at ({}, {}) moved or vanished",
            p.x, p.y
        );
    }
}

#[test]
fn adapt_isotropic_perturbed_square_reaches_delaunay() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let tri = perturbed_unit_square(8, &mut rng, 0.3);
    let spec = ProblemSpec::pure_diffusion(
        DiffusivityField::isotropic(1.0),
        DirichletSpec::constant(0.0),
    );
    let config = AdaptConfig {
        max_iters: 50,
        stop_crit: StopCriterion::GeneralizedDelaunay,
        theta_policy: ThetaPolicy::TargetCount(tri.num_elements()),
        backend: RemeshBackend::default(),
        ..AdaptConfig::default()
    };
    let result = adapt_mesh(&tri, &spec, &config).unwrap();
    assert!(result.converged, "history: {:?}", result.history);
    // independent re-check on the final mesh
    let report = check_generalized_delaunay(
        &result.mesh,
        &spec,
        crate::problem::SupNormStrategy::VerticesQuadrature,
    )
    .unwrap();
    assert!(report.all_pass());
    assert_eq!(report.fraction_passing, 1.0);
}

#[test]
fn adapt_forced_early_exit_reports_history() {
    // reaction-dominated problem on a deliberately coarse background with a
    // single iteration allowed: not converged, one history row
    let tri = crate::adapt::tests::equilateral_lattice(3, 2);
    let spec = ProblemSpec::new(
        DiffusivityField::rotation_eigen(1.0, 0.001, std::f64::consts::PI / 3.0).unwrap(),
        crate::problem::VectorField::Constant(Vec2::zeros()),
        crate::problem::ScalarField::Constant(1000.0),
        crate::problem::ScalarField::Constant(0.0),
        DirichletSpec::constant(0.0),
        1.0,
    )
    .unwrap();
    let config = AdaptConfig {
        max_iters: 1,
        stop_crit: StopCriterion::AnisotropicNonobtuse,
        theta_policy: ThetaPolicy::TargetCount(tri.num_elements()),
        backend: RemeshBackend::Builtin(BuiltinOptions {
            max_cycles: 2,
            ..BuiltinOptions::default()
        }),
        ..AdaptConfig::default()
    };
    let result = adapt_mesh(&tri, &spec, &config).unwrap();
    assert!(!result.converged);
    assert_eq!(result.history.len(), 1);
    assert!(result.history[0].pass_fraction < 1.0);
}

/// Structured unit square with interior vertices perturbed by `amount`
/// relative to the cell size.
pub fn perturbed_unit_square(
    n: usize,
    rng: &mut impl Rng,
    amount: f64,
) -> crate::mesh::Triangulation {
    let tri = structured_unit(n, n, 1.0, 1.0).unwrap();
    let h = 1.0 / n as f64;
    let vertices: Vec<Vec2> = tri
        .vertices()
        .iter()
        .enumerate()
        .map(|(v, p)| {
            if tri.is_boundary_vertex(v) {
                *p
            } else {
                *p + Vec2::new(
                    rng.random_range(-amount..amount) * h,
                    rng.random_range(-amount..amount) * h,
                )
            }
        })
        .collect();
    crate::mesh::Triangulation::new(vertices, tri.elements().to_vec(), BTreeMap::new()).unwrap()
}

#[test]
fn anisotropic_metric_refines_x_by_factor_five() {
    // M = diag(100, 1) on unit-spaced cells: x-edges have metric length 10
    // and split down to spacing 1/8, y-edges stay; the bottom boundary ends
    // up with at least 5x more vertices per unit length
    let tri = structured_unit(2, 2, 2.0, 2.0).unwrap();
    let metrics = vec![Mat2::new(100.0, 0.0, 0.0, 1.0); tri.num_vertices()];
    let out = builtin_remesh_full(&tri, &metrics, &BuiltinOptions::default()).unwrap();
    assert!(out.complete);
    let bottom = |mesh: &crate::mesh::Triangulation| {
        mesh.boundary_vertices()
            .iter()
            .filter(|&&v| mesh.vertex(v).y == 0.0)
            .count()
    };
    let before = bottom(&tri);
    let after = bottom(&out.mesh);
    assert_eq!(before, 3);
    assert!(after >= 5 * before, "bottom vertices {before} -> {after}");
}
