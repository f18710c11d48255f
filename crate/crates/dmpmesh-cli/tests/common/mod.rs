//! Shared fixtures for the integration and acceptance suites.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::prelude::*;

use dmpmesh::mesh::io::write_node_ele;
use dmpmesh::mesh::{signed_area2, structured_unit, Triangulation};
use dmpmesh::{Mat2, Vec2};

/// Structured unit square with interior vertices perturbed by `amount` of
/// the cell size (boundary fixed).
pub fn perturbed_unit_square(n: usize, rng: &mut impl Rng, amount: f64) -> Triangulation {
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
    Triangulation::new(vertices, tri.elements().to_vec(), BTreeMap::new()).unwrap()
}

/// Structured anisotropic lattice of the unit square with nx x ny cells and
/// interior perturbation given in cell units, marker 2 on the x = 0 edge.
pub fn perturbed_aniso_lattice(
    nx: usize,
    ny: usize,
    rng: &mut impl Rng,
    amount: f64,
) -> Triangulation {
    let tri = structured_unit(nx, ny, 1.0, 1.0).unwrap();
    let dx = 1.0 / nx as f64;
    let dy = 1.0 / ny as f64;
    let vertices: Vec<Vec2> = tri
        .vertices()
        .iter()
        .enumerate()
        .map(|(v, p)| {
            if tri.is_boundary_vertex(v) {
                *p
            } else {
                *p + Vec2::new(
                    rng.random_range(-amount..amount) * dx,
                    rng.random_range(-amount..amount) * dy,
                )
            }
        })
        .collect();
    let mut markers = BTreeMap::new();
    for &v in tri.boundary_vertices() {
        markers.insert(v, if tri.vertex(v).x == 0.0 { 2 } else { 1 });
    }
    Triangulation::new(vertices, tri.elements().to_vec(), markers).unwrap()
}

/// Unit square with a central square hole (outer marker 1, hole marker 2).
/// `n` must be divisible by 3.
pub fn holed_square(n: usize) -> Triangulation {
    assert!(n % 3 == 0);
    let lo = n / 3;
    let hi = 2 * n / 3;
    let full = structured_unit(n, n, 1.0, 1.0).unwrap();
    let keep = |conn: &[usize; 3]| {
        let inside = conn.iter().all(|&v| {
            let p = full.vertex(v);
            let (i, j) = (
                (p.x * n as f64).round() as usize,
                (p.y * n as f64).round() as usize,
            );
            i >= lo && i <= hi && j >= lo && j <= hi
        });
        !inside
    };
    let elements: Vec<[usize; 3]> = full
        .elements()
        .iter()
        .filter(|c| keep(c))
        .copied()
        .collect();
    let mut remap = vec![usize::MAX; full.num_vertices()];
    let mut vertices = Vec::new();
    for conn in &elements {
        for &v in conn {
            if remap[v] == usize::MAX {
                remap[v] = vertices.len();
                vertices.push(*full.vertex(v));
            }
        }
    }
    let elements: Vec<[usize; 3]> = elements.iter().map(|c| c.map(|v| remap[v])).collect();
    let tri = Triangulation::new(vertices, elements, BTreeMap::new()).unwrap();
    let mut markers = BTreeMap::new();
    for &v in tri.boundary_vertices() {
        let p = tri.vertex(v);
        let outer = p.x == 0.0 || p.x == 1.0 || p.y == 0.0 || p.y == 1.0;
        markers.insert(v, if outer { 1 } else { 2 });
    }
    Triangulation::new(tri.vertices().to_vec(), tri.elements().to_vec(), markers).unwrap()
}

/// Offset rows of near-equilateral triangles on the unit square.
pub fn equilateral_patch(nx: usize, ny: usize) -> Triangulation {
    let dy = 1.0 / ny as f64;
    let mut vertices = Vec::new();
    let mut index = BTreeMap::new();
    for j in 0..=ny {
        for i in 0..=nx {
            let offset = if j % 2 == 1 { 0.5 / nx as f64 } else { 0.0 };
            let x = (i as f64 / nx as f64 + offset).min(1.0);
            index.insert((i, j), vertices.len());
            vertices.push(Vec2::new(x, j as f64 * dy));
        }
    }
    let mut elements = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let v00 = index[&(i, j)];
            let v10 = index[&(i + 1, j)];
            let v01 = index[&(i, j + 1)];
            let v11 = index[&(i + 1, j + 1)];
            if j % 2 == 0 {
                elements.push([v00, v10, v01]);
                elements.push([v10, v11, v01]);
            } else {
                elements.push([v00, v10, v11]);
                elements.push([v00, v11, v01]);
            }
        }
    }
    Triangulation::new(vertices, elements, BTreeMap::new()).unwrap()
}

/// Random non-degenerate triangle in [-2, 2]^2.
pub fn random_triangle(rng: &mut impl Rng) -> [Vec2; 3] {
    loop {
        let v = [
            Vec2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
            Vec2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
            Vec2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
        ];
        let lmax = (v[1] - v[0])
            .norm()
            .max((v[2] - v[0]).norm())
            .max((v[2] - v[1]).norm());
        if signed_area2(&v[0], &v[1], &v[2]).abs() > 0.05 * lmax * lmax {
            return v;
        }
    }
}

/// Random SPD matrix with eigenvalue ratio up to 10^4.
pub fn random_spd(rng: &mut impl Rng) -> Mat2 {
    let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let (s, c) = theta.sin_cos();
    let r = Mat2::new(c, -s, s, c);
    let d1: f64 = 10f64.powf(rng.random_range(-2.0..2.0));
    let d2: f64 = 10f64.powf(rng.random_range(-2.0..2.0));
    r * Mat2::new(d1, 0.0, 0.0, d2) * r.transpose()
}

pub fn write_mesh(tri: &Triangulation, dir: &Path, name: &str) -> PathBuf {
    let base = dir.join(name);
    write_node_ele(tri, &base).unwrap();
    base.with_extension("node")
}

pub fn write_file(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}
