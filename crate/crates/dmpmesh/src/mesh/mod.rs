//! Mesh representation and the geometric machinery of simplicial elements:
//! edge matrices, q-vectors, heights, Euclidean and metric dihedral angles,
//! edge adjacency and interior connectivity.

pub mod io;

use std::collections::{BTreeMap, BTreeSet};

use crate::linalg2::{check_spd, inv2};
use crate::{Error, Mat2, Result, Vec2};

/// Relative threshold below which |det E| flags a degenerate element
/// (scale-relative: multiplied by the squared longest edge).
pub const DEGENERACY_REL_TOL: f64 = 1e-14;

/// An edge as an unordered vertex pair (stored with the smaller index first).
pub type EdgeKey = (usize, usize);

pub fn edge_key(a: usize, b: usize) -> EdgeKey {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// 2D simplicial mesh with counter-clockwise elements, edge adjacency and a
/// boundary-vertex set. Immutable after construction.
#[derive(Clone, Debug)]
pub struct Triangulation {
    vertices: Vec<Vec2>,
    elements: Vec<[usize; 3]>,
    boundary_vertices: BTreeSet<usize>,
    /// marker per boundary vertex (from file tags; defaults to 1)
    boundary_markers: BTreeMap<usize, i32>,
    /// edge -> incident element indices (1 for boundary edges, 2 interior)
    edge_adjacency: BTreeMap<EdgeKey, Vec<usize>>,
    /// maximum element size: max over elements of the largest height
    h: f64,
}

impl Triangulation {
    /// Builds a triangulation from raw vertices and (arbitrarily oriented)
    /// elements. Orientation is normalized to CCW; adjacency and boundary are
    /// derived. `markers` optionally tags boundary vertices.
    pub fn new(
        vertices: Vec<Vec2>,
        elements: Vec<[usize; 3]>,
        markers: BTreeMap<usize, i32>,
    ) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::Validation(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if elements.is_empty() {
            return Err(Error::Validation("mesh has no elements".into()));
        }
        let nv = vertices.len();
        let mut elems = elements;
        for (e, conn) in elems.iter_mut().enumerate() {
            for &v in conn.iter() {
                if v >= nv {
                    return Err(Error::Validation(format!(
                        "element {e} references vertex {v} but mesh has {nv} vertices"
                    )));
                }
            }
            if conn[0] == conn[1] || conn[1] == conn[2] || conn[0] == conn[2] {
                return Err(Error::Validation(format!(
                    "element {e} repeats a vertex: {conn:?}"
                )));
            }
            let [a, b, c] = *conn;
            let det = signed_area2(&vertices[a], &vertices[b], &vertices[c]);
            let lmax = (vertices[b] - vertices[a])
                .norm()
                .max((vertices[c] - vertices[a]).norm())
                .max((vertices[c] - vertices[b]).norm());
            if det.abs() <= DEGENERACY_REL_TOL * lmax * lmax {
                return Err(Error::DegenerateElement {
                    element: e,
                    det: det.abs(),
                });
            }
            if det < 0.0 {
                conn.swap(1, 2);
            }
        }

        let mut referenced = vec![false; nv];
        for conn in &elems {
            for &v in conn {
                referenced[v] = true;
            }
        }
        if let Some(orphan) = referenced.iter().position(|&r| !r) {
            return Err(Error::Validation(format!(
                "vertex {orphan} is not referenced by any element"
            )));
        }

        let mut edge_adjacency: BTreeMap<EdgeKey, Vec<usize>> = BTreeMap::new();
        for (e, conn) in elems.iter().enumerate() {
            for k in 0..3 {
                let key = edge_key(conn[k], conn[(k + 1) % 3]);
                let inc = edge_adjacency.entry(key).or_default();
                inc.push(e);
                if inc.len() > 2 {
                    return Err(Error::NonManifoldEdge {
                        a: key.0,
                        b: key.1,
                        count: inc.len(),
                    });
                }
            }
        }

        let mut boundary_vertices: BTreeSet<usize> = BTreeSet::new();
        for (key, inc) in &edge_adjacency {
            if inc.len() == 1 {
                boundary_vertices.insert(key.0);
                boundary_vertices.insert(key.1);
            }
        }
        // tagged boundary entities extend the geometric boundary set
        for &v in markers.keys() {
            if v >= nv {
                return Err(Error::Validation(format!(
                    "boundary marker references vertex {v} out of range"
                )));
            }
            boundary_vertices.insert(v);
        }
        let mut boundary_markers = markers;
        for &v in &boundary_vertices {
            boundary_markers.entry(v).or_insert(1);
        }

        let mut tri = Triangulation {
            vertices,
            elements: elems,
            boundary_vertices,
            boundary_markers,
            edge_adjacency,
            h: 0.0,
        };
        tri.h = (0..tri.elements.len())
            .map(|e| tri.element_geometry(e).map(|g| g.h_max()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        Ok(tri)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_interior_vertices(&self) -> usize {
        self.vertices.len() - self.boundary_vertices.len()
    }

    pub fn vertex(&self, v: usize) -> &Vec2 {
        &self.vertices[v]
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn element(&self, e: usize) -> [usize; 3] {
        self.elements[e]
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn element_vertices(&self, e: usize) -> [&Vec2; 3] {
        let [a, b, c] = self.elements[e];
        [&self.vertices[a], &self.vertices[b], &self.vertices[c]]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertices.contains(&v)
    }

    pub fn boundary_vertices(&self) -> &BTreeSet<usize> {
        &self.boundary_vertices
    }

    /// Marker of a boundary vertex (None for interior vertices).
    pub fn boundary_marker(&self, v: usize) -> Option<i32> {
        self.boundary_markers.get(&v).copied()
    }

    pub fn boundary_markers(&self) -> &BTreeMap<usize, i32> {
        &self.boundary_markers
    }

    pub fn edge_adjacency(&self) -> &BTreeMap<EdgeKey, Vec<usize>> {
        &self.edge_adjacency
    }

    /// Interior edges (exactly two incident elements), in index order.
    pub fn interior_edges(&self) -> impl Iterator<Item = (EdgeKey, [usize; 2])> + '_ {
        self.edge_adjacency
            .iter()
            .filter(|(_, inc)| inc.len() == 2)
            .map(|(&k, inc)| (k, [inc[0], inc[1]]))
    }

    /// Maximum element size: max over elements of the largest height.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Geometric quantities of element `e`.
    pub fn element_geometry(&self, e: usize) -> Result<ElementGeometry> {
        if e >= self.elements.len() {
            return Err(Error::Validation(format!(
                "element index {e} out of range ({} elements)",
                self.elements.len()
            )));
        }
        ElementGeometry::new(self.element_vertices(e), e)
    }

    /// True iff the graph of interior vertices joined by interior-interior
    /// mesh edges is connected. Returns the vertex partition as a witness
    /// when it is not. Meshes with fewer than two interior vertices are
    /// vacuously connected.
    pub fn is_interiorly_connected(&self) -> (bool, Vec<Vec<usize>>) {
        let interior: Vec<usize> = (0..self.vertices.len())
            .filter(|v| !self.boundary_vertices.contains(v))
            .collect();
        if interior.len() <= 1 {
            return (true, vec![interior]);
        }
        let mut adj: BTreeMap<usize, Vec<usize>> =
            interior.iter().map(|&v| (v, Vec::new())).collect();
        for (&(a, b), _) in &self.edge_adjacency {
            if adj.contains_key(&a) && adj.contains_key(&b) {
                adj.get_mut(&a).unwrap().push(b);
                adj.get_mut(&b).unwrap().push(a);
            }
        }
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        let mut components = Vec::new();
        for &start in &interior {
            if seen.contains(&start) {
                continue;
            }
            let mut comp = Vec::new();
            let mut stack = vec![start];
            seen.insert(start);
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &w in &adj[&v] {
                    if seen.insert(w) {
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        (components.len() == 1, components)
    }

    /// Summary statistics: h, Euclidean angle extremes, and counts.
    pub fn statistics(&self) -> Result<MeshStatistics> {
        let mut min_angle = f64::INFINITY;
        let mut max_angle = f64::NEG_INFINITY;
        for e in 0..self.elements.len() {
            let g = self.element_geometry(e)?;
            for &a in g.euclidean_angles.iter() {
                min_angle = min_angle.min(a);
                max_angle = max_angle.max(a);
            }
        }
        Ok(MeshStatistics {
            h: self.h,
            min_angle,
            max_angle,
            num_vertices: self.num_vertices(),
            num_elements: self.num_elements(),
            num_interior_vertices: self.num_interior_vertices(),
        })
    }
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct MeshStatistics {
    pub h: f64,
    pub min_angle: f64,
    pub max_angle: f64,
    pub num_vertices: usize,
    pub num_elements: usize,
    pub num_interior_vertices: usize,
}

/// Twice the signed area of the triangle (a, b, c); positive for CCW.
pub fn signed_area2(a: &Vec2, b: &Vec2, c: &Vec2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)
}

/// Does point `d` lie strictly inside the circumcircle of CCW triangle
/// (a, b, c)? Plain f64 determinant; adequate away from degeneracy.
pub fn in_circumcircle(a: &Vec2, b: &Vec2, c: &Vec2, d: &Vec2) -> bool {
    let ax = a.x - d.x;
    let ay = a.y - d.y;
    let bx = b.x - d.x;
    let by = b.y - d.y;
    let cx = c.x - d.x;
    let cy = c.y - d.y;
    let det = (ax * ax + ay * ay) * (bx * cy - cx * by) - (bx * bx + by * by) * (ax * cy - cx * ay)
        + (cx * cx + cy * cy) * (ax * by - bx * ay);
    det > 0.0
}

/// Geometric quantities of a single T3 element.
///
/// Vertices are local indices 0, 1, 2 (CCW). Faces are opposite edges:
/// face p is the edge not containing vertex p. The dihedral angle
/// beta(p, q) between faces p and q is the interior angle at the third
/// vertex r (the one that is neither p nor q).
#[derive(Clone, Debug)]
pub struct ElementGeometry {
    pub element: usize,
    pub vertices: [Vec2; 3],
    /// columns [x2 - x1, x3 - x1]
    pub edge_matrix: Mat2,
    /// gradients of the linear barycentric basis functions
    pub q_vectors: [Vec2; 3],
    /// heights: perpendicular distance from vertex p to face p
    pub heights: [f64; 3],
    /// unit inward normals of the faces
    pub inward_normals: [Vec2; 3],
    /// interior angles indexed by the vertex they sit at;
    /// `euclidean_angles[r]` equals beta(p, q) for {p,q,r} = {0,1,2}
    pub euclidean_angles: [f64; 3],
    pub area: f64,
}

impl ElementGeometry {
    pub fn new(v: [&Vec2; 3], element: usize) -> Result<Self> {
        let e1 = v[1] - v[0];
        let e2 = v[2] - v[0];
        let edge_matrix = Mat2::from_columns(&[e1, e2]);
        let det = edge_matrix.determinant();
        let lmax = e1.norm().max(e2.norm()).max((v[2] - v[1]).norm());
        if det.abs() <= DEGENERACY_REL_TOL * lmax * lmax {
            return Err(Error::DegenerateElement {
                element,
                det: det.abs(),
            });
        }
        // [q2, q3] = E^{-T}, q1 = -(q2 + q3)
        let e_inv_t = inv2(&edge_matrix)?.transpose();
        let q2 = Vec2::new(e_inv_t[(0, 0)], e_inv_t[(1, 0)]);
        let q3 = Vec2::new(e_inv_t[(0, 1)], e_inv_t[(1, 1)]);
        let q1 = -(q2 + q3);
        let q_vectors = [q1, q2, q3];
        let mut heights = [0.0; 3];
        let mut inward_normals = [Vec2::zeros(); 3];
        for p in 0..3 {
            let n = q_vectors[p].norm();
            heights[p] = 1.0 / n;
            inward_normals[p] = q_vectors[p] / n;
        }
        let euclidean_angles = interior_angles(v);
        Ok(ElementGeometry {
            element,
            vertices: [*v[0], *v[1], *v[2]],
            edge_matrix,
            q_vectors,
            heights,
            inward_normals,
            euclidean_angles,
            area: 0.5 * det.abs(),
        })
    }

    /// Dihedral angle between faces p and q = interior angle at the third
    /// vertex.
    pub fn beta(&self, p: usize, q: usize) -> f64 {
        self.euclidean_angles[3 - p - q]
    }

    pub fn h_max(&self) -> f64 {
        self.heights.iter().copied().fold(0.0, f64::max)
    }

    /// Second-largest height (the chain h_1 <= ... <= h_pumax <= h_max).
    pub fn h_pumax(&self) -> f64 {
        let mut h = self.heights;
        h.sort_by(|a, b| a.partial_cmp(b).unwrap());
        h[1]
    }

    /// Dihedral angles measured in the metric Dbar^{-1}; entry r is the
    /// metric interior angle at vertex r. Requires Dbar SPD.
    ///
    /// Computed with atan2 on edge vectors under the Dbar^{-1} inner product;
    /// the q-vector cosine formula is equivalent and kept as a test oracle.
    pub fn metric_angles(&self, dbar: &Mat2) -> Result<[f64; 3]> {
        check_spd(dbar)?;
        let g = inv2(dbar)?; // metric for measuring edges
        let det_g = g.determinant();
        let mut angles = [0.0; 3];
        for r in 0..3 {
            let u = self.vertices[(r + 1) % 3] - self.vertices[r];
            let w = self.vertices[(r + 2) % 3] - self.vertices[r];
            let dot = (u.transpose() * g * w)[(0, 0)];
            let cross = u.x * w.y - u.y * w.x;
            angles[r] = (det_g.sqrt() * cross.abs()).atan2(dot);
        }
        Ok(angles)
    }

    /// Metric dihedral angle between faces p and q.
    pub fn metric_beta(&self, dbar: &Mat2, p: usize, q: usize) -> Result<f64> {
        Ok(self.metric_angles(dbar)?[3 - p - q])
    }
}

/// Interior angles at the three vertices via atan2 of cross/dot of the edge
/// vectors (no arccos; robust near 0 and pi).
fn interior_angles(v: [&Vec2; 3]) -> [f64; 3] {
    let mut angles = [0.0; 3];
    for r in 0..3 {
        let u = v[(r + 1) % 3] - v[r];
        let w = v[(r + 2) % 3] - v[r];
        let cross = (u.x * w.y - u.y * w.x).abs();
        let dot = u.dot(&w);
        angles[r] = cross.atan2(dot);
    }
    angles
}

/// Quadrilateral mesh with convex CCW elements.
#[derive(Clone, Debug)]
pub struct QuadMesh {
    vertices: Vec<Vec2>,
    elements: Vec<[usize; 4]>,
    boundary_vertices: BTreeSet<usize>,
    boundary_markers: BTreeMap<usize, i32>,
}

impl QuadMesh {
    pub fn new(
        vertices: Vec<Vec2>,
        elements: Vec<[usize; 4]>,
        markers: BTreeMap<usize, i32>,
    ) -> Result<Self> {
        let nv = vertices.len();
        let mut elems = elements;
        for (e, conn) in elems.iter_mut().enumerate() {
            for &v in conn.iter() {
                if v >= nv {
                    return Err(Error::Validation(format!(
                        "quad {e} references vertex {v} but mesh has {nv} vertices"
                    )));
                }
            }
            let pts = conn.map(|i| vertices[i]);
            let area2: f64 = (0..4)
                .map(|k| {
                    let a = pts[k];
                    let b = pts[(k + 1) % 4];
                    a.x * b.y - b.x * a.y
                })
                .sum();
            if area2.abs() < 1e-14 {
                return Err(Error::Validation(format!("quad {e} has zero area")));
            }
            if area2 < 0.0 {
                conn.reverse();
            }
            let pts = conn.map(|i| vertices[i]);
            for k in 0..4 {
                let a = pts[k];
                let b = pts[(k + 1) % 4];
                let c = pts[(k + 2) % 4];
                if signed_area2(&a, &b, &c) <= 0.0 {
                    return Err(Error::Validation(format!(
                        "quad {e} is not strictly convex at corner {}",
                        (k + 1) % 4
                    )));
                }
            }
        }
        let mut edge_count: BTreeMap<EdgeKey, usize> = BTreeMap::new();
        for conn in &elems {
            for k in 0..4 {
                *edge_count
                    .entry(edge_key(conn[k], conn[(k + 1) % 4]))
                    .or_insert(0) += 1;
            }
        }
        let mut boundary_vertices = BTreeSet::new();
        for (&(a, b), &cnt) in &edge_count {
            if cnt == 1 {
                boundary_vertices.insert(a);
                boundary_vertices.insert(b);
            }
        }
        let mut boundary_markers = markers;
        for &v in &boundary_vertices {
            boundary_markers.entry(v).or_insert(1);
        }
        Ok(QuadMesh {
            vertices,
            elements: elems,
            boundary_vertices,
            boundary_markers,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn vertex(&self, v: usize) -> &Vec2 {
        &self.vertices[v]
    }

    pub fn element(&self, e: usize) -> [usize; 4] {
        self.elements[e]
    }

    pub fn element_vertices(&self, e: usize) -> [Vec2; 4] {
        self.elements[e].map(|i| self.vertices[i])
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertices.contains(&v)
    }

    pub fn boundary_vertices(&self) -> &BTreeSet<usize> {
        &self.boundary_vertices
    }

    pub fn boundary_marker(&self, v: usize) -> Option<i32> {
        self.boundary_markers.get(&v).copied()
    }
}

/// Structured right-triangle mesh of the rectangle [0, w] x [0, h] with
/// `nx` x `ny` cells, each split along the "/" diagonal. Boundary markers
/// default to 1.
///
/// ```text
///   6---7---8
///   | \ | \ |     vertex (i, j) -> j * (nx + 1) + i
///   3---4---5     cell (i, j) -> triangles (v, v+1, v+nx+2) and
///   | \ | \ |                    (v, v+nx+2, v+nx+1)
///   0---1---2
/// ```
pub fn structured_unit(nx: usize, ny: usize, w: f64, h: f64) -> Result<Triangulation> {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Vec2::new(
                w * i as f64 / nx as f64,
                h * j as f64 / ny as f64,
            ));
        }
    }
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let v = j * (nx + 1) + i;
            elements.push([v, v + 1, v + nx + 2]);
            elements.push([v, v + nx + 2, v + nx + 1]);
        }
    }
    Triangulation::new(vertices, elements, BTreeMap::new())
}
