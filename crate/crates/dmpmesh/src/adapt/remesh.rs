//! Builtin metric-aware local remesher.
//!
//! Per cycle: split edges that are metric-long, collapse edges that are
//! metric-short (boundary-preserving), smooth interior vertices, then flip
//! interior edges -- first when the flip reduces the summed alignment
//! residual of the two incident triangles, then a Lawson sweep on the
//! metric opposite-angle criterion so fixed points are metric-Delaunay.
//! Terminates when a full cycle performs no operation or the budget runs
//! out (best-so-far mesh is returned, flagged incomplete).
//!
//! Boundary vertices never move and are never removed; splitting a boundary
//! edge inserts its midpoint, which lies on the polygonal boundary.

use std::collections::{BTreeMap, BTreeSet};

use crate::assembly::sparse::{CooMatrix, SkylineLu};
use crate::linalg2::{sym_exp, sym_log};
use crate::mesh::{edge_key, signed_area2, EdgeKey, Triangulation};
use crate::{Mat2, Result, Vec2};

use super::{alignment_residual, log_euclidean_mean, metric_edge_length};

#[derive(Clone, Debug)]
pub struct BuiltinOptions {
    /// split edges with metric length above this (quasi-unit band top)
    pub split_threshold: f64,
    /// collapse edges with metric length below this (band bottom)
    pub collapse_threshold: f64,
    /// full remesh cycles per call
    pub max_cycles: usize,
    /// total discrete operations per call
    pub operation_budget: usize,
    /// harmonic smoothing of interior vertices
    pub smooth: bool,
    /// final Lawson sweep on the metric opposite-angle criterion
    pub delaunay_pass: bool,
}

impl Default for BuiltinOptions {
    fn default() -> Self {
        BuiltinOptions {
            split_threshold: 2f64.sqrt(),
            collapse_threshold: 1.0 / 2f64.sqrt(),
            max_cycles: 30,
            operation_budget: 200_000,
            smooth: true,
            delaunay_pass: true,
        }
    }
}

#[derive(Debug)]
pub struct RemeshOutcome {
    pub mesh: Triangulation,
    /// per-vertex metric on the output mesh
    pub vertex_metrics: Vec<Mat2>,
    /// false when the operation budget ran out first
    pub complete: bool,
    pub operations: usize,
}

/// Mutable mesh state between passes.
struct WorkMesh {
    vertices: Vec<Vec2>,
    metrics: Vec<Mat2>,
    markers: BTreeMap<usize, i32>,
    triangles: Vec<[usize; 3]>,
}

impl WorkMesh {
    fn from_triangulation(tri: &Triangulation, metrics: &[Mat2]) -> Self {
        WorkMesh {
            vertices: tri.vertices().to_vec(),
            metrics: metrics.to_vec(),
            markers: tri.boundary_markers().clone(),
            triangles: tri.elements().to_vec(),
        }
    }

    /// Compacts unreferenced vertices and rebuilds the triangulation.
    fn rebuild(&mut self) -> Result<Triangulation> {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &v in t {
                used[v] = true;
            }
        }
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut metrics = Vec::new();
        for (v, &u) in used.iter().enumerate() {
            if u {
                remap[v] = vertices.len();
                vertices.push(self.vertices[v]);
                metrics.push(self.metrics[v]);
            }
        }
        let triangles: Vec<[usize; 3]> =
            self.triangles.iter().map(|t| t.map(|v| remap[v])).collect();
        let markers: BTreeMap<usize, i32> = self
            .markers
            .iter()
            .filter(|(v, _)| remap[**v] != usize::MAX)
            .map(|(v, m)| (remap[*v], *m))
            .collect();
        self.vertices = vertices;
        self.metrics = metrics;
        self.triangles = triangles.clone();
        self.markers = markers.clone();
        Triangulation::new(self.vertices.clone(), triangles, markers)
    }

    fn edge_length(&self, a: usize, b: usize) -> f64 {
        metric_edge_length(
            &self.vertices[a],
            &self.vertices[b],
            &self.metrics[a],
            &self.metrics[b],
        )
    }

    fn element_metric(&self, t: [usize; 3]) -> Mat2 {
        let sum = sym_log(&self.metrics[t[0]])
            + sym_log(&self.metrics[t[1]])
            + sym_log(&self.metrics[t[2]]);
        sym_exp(&(sum / 3.0))
    }

    fn residual(&self, t: [usize; 3]) -> f64 {
        let m = self.element_metric(t);
        alignment_residual(
            [
                &self.vertices[t[0]],
                &self.vertices[t[1]],
                &self.vertices[t[2]],
            ],
            &m,
        )
    }

    fn is_positive(&self, t: [usize; 3]) -> bool {
        let a = &self.vertices[t[0]];
        let b = &self.vertices[t[1]];
        let c = &self.vertices[t[2]];
        let det = signed_area2(a, b, c);
        let lmax = (b - a).norm().max((c - a).norm()).max((c - b).norm());
        det > 1e-12 * lmax * lmax
    }
}

/// Splits all edges longer than the threshold; midpoints carry the
/// log-Euclidean mean metric and inherit a boundary marker on boundary
/// edges. Returns the number of split edges.
fn split_pass(work: &mut WorkMesh, tri: &Triangulation, threshold: f64, budget: usize) -> usize {
    let mut marked: BTreeMap<EdgeKey, usize> = BTreeMap::new();
    let mut order: Vec<(f64, EdgeKey)> = Vec::new();
    for (&key, _) in tri.edge_adjacency() {
        let len = work.edge_length(key.0, key.1);
        if len > threshold {
            order.push((len, key));
        }
    }
    // longest first, deterministic tie-break on the key
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    order.truncate(budget);
    for &(_, key) in &order {
        let (a, b) = key;
        let mid = (work.vertices[a] + work.vertices[b]) * 0.5;
        let metric = log_euclidean_mean(&work.metrics[a], &work.metrics[b]);
        let v = work.vertices.len();
        work.vertices.push(mid);
        work.metrics.push(metric);
        let boundary_edge = tri.edge_adjacency()[&key].len() == 1;
        if boundary_edge {
            let marker = work
                .markers
                .get(&a)
                .copied()
                .or_else(|| work.markers.get(&b).copied())
                .unwrap_or(1);
            work.markers.insert(v, marker);
        }
        marked.insert(key, v);
    }
    if marked.is_empty() {
        return 0;
    }

    let old = std::mem::take(&mut work.triangles);
    for t in old {
        let mids = [
            marked.get(&edge_key(t[0], t[1])).copied(),
            marked.get(&edge_key(t[1], t[2])).copied(),
            marked.get(&edge_key(t[2], t[0])).copied(),
        ];
        let count = mids.iter().flatten().count();
        match count {
            0 => work.triangles.push(t),
            1 => {
                let k = mids.iter().position(|m| m.is_some()).unwrap();
                let m = mids[k].unwrap();
                let (a, b, c) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
                work.triangles.push([a, m, c]);
                work.triangles.push([m, b, c]);
            }
            2 => {
                let k = mids.iter().position(|m| m.is_none()).unwrap();
                // unsplit edge is (t[k], t[k+1]); the two midpoints sit on
                // the edges around vertex t[k+2]
                let (a, b, c) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
                let m_bc = marked[&edge_key(b, c)];
                let m_ca = marked[&edge_key(c, a)];
                work.triangles.push([c, m_ca, m_bc]);
                // quad (a, b, m_bc, m_ca): pick the metric-shorter diagonal
                if work.edge_length(a, m_bc) <= work.edge_length(b, m_ca) {
                    work.triangles.push([a, b, m_bc]);
                    work.triangles.push([a, m_bc, m_ca]);
                } else {
                    work.triangles.push([a, b, m_ca]);
                    work.triangles.push([b, m_bc, m_ca]);
                }
            }
            _ => {
                let m01 = marked[&edge_key(t[0], t[1])];
                let m12 = marked[&edge_key(t[1], t[2])];
                let m20 = marked[&edge_key(t[2], t[0])];
                work.triangles.push([t[0], m01, m20]);
                work.triangles.push([m01, t[1], m12]);
                work.triangles.push([m20, m12, t[2]]);
                work.triangles.push([m01, m12, m20]);
            }
        }
    }
    marked.len()
}

/// Collapses interior edges shorter than the threshold. The surviving
/// endpoint keeps its position (a boundary endpoint always survives); edges
/// between two boundary vertices are never collapsed. Returns the number of
/// collapses.
fn collapse_pass(work: &mut WorkMesh, tri: &Triangulation, threshold: f64, budget: usize) -> usize {
    let mut candidates: Vec<(f64, EdgeKey)> = Vec::new();
    for (&key, inc) in tri.edge_adjacency() {
        if inc.len() != 2 {
            continue;
        }
        let both_boundary = tri.is_boundary_vertex(key.0) && tri.is_boundary_vertex(key.1);
        if both_boundary {
            continue;
        }
        let len = work.edge_length(key.0, key.1);
        if len < threshold {
            candidates.push((len, key));
        }
    }
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    // vertex -> incident triangle ids and neighbor sets for the link test
    let mut star: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut neighbors: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut existing: BTreeSet<[usize; 3]> = BTreeSet::new();
    for (i, t) in work.triangles.iter().enumerate() {
        existing.insert(tri_key(*t));
        for k in 0..3 {
            star.entry(t[k]).or_default().push(i);
            neighbors.entry(t[k]).or_default().insert(t[(k + 1) % 3]);
            neighbors.entry(t[k]).or_default().insert(t[(k + 2) % 3]);
        }
    }

    let mut touched: BTreeSet<usize> = BTreeSet::new();
    let mut dead_tris: BTreeSet<usize> = BTreeSet::new();
    let mut ops = 0;
    for (_, (a, b)) in candidates {
        if ops >= budget {
            break;
        }
        if touched.contains(&a) || touched.contains(&b) {
            continue;
        }
        // survivor keeps its position; prefer the boundary endpoint
        let (survivor, victim) = if tri.is_boundary_vertex(a) {
            (a, b)
        } else if tri.is_boundary_vertex(b) {
            (b, a)
        } else {
            (a, b)
        };
        // link condition: shared neighbors must be exactly the two opposite
        // vertices of the collapsing edge
        let shared: BTreeSet<usize> = neighbors[&survivor]
            .intersection(&neighbors[&victim])
            .copied()
            .collect();
        if shared.len() != 2 {
            continue;
        }
        // validate the re-pointed star of the victim: positive orientation
        // and no duplicate of a surviving triangle (a flat double cover
        // would otherwise produce a non-manifold edge)
        let mut valid = true;
        let mut modified: Vec<(usize, [usize; 3])> = Vec::new();
        let mut new_keys: BTreeSet<[usize; 3]> = BTreeSet::new();
        for &ti in &star[&victim] {
            if dead_tris.contains(&ti) {
                valid = false; // stale star information; be conservative
                break;
            }
            let t = work.triangles[ti];
            if t.contains(&survivor) {
                continue; // dies with the edge
            }
            let newt = t.map(|v| if v == victim { survivor } else { v });
            let key = tri_key(newt);
            if !work.is_positive(newt) || existing.contains(&key) || !new_keys.insert(key) {
                valid = false;
                break;
            }
            modified.push((ti, newt));
        }
        if !valid {
            continue;
        }
        for &ti in &star[&victim] {
            let t = work.triangles[ti];
            if t.contains(&survivor) {
                dead_tris.insert(ti);
                existing.remove(&tri_key(t));
            }
        }
        for (ti, newt) in modified {
            existing.remove(&tri_key(work.triangles[ti]));
            existing.insert(tri_key(newt));
            work.triangles[ti] = newt;
        }
        touched.insert(a);
        touched.insert(b);
        // conservative: also freeze the ring so stale stars are not reused
        for &n in &neighbors[&victim] {
            touched.insert(n);
        }
        ops += 1;
    }
    if !dead_tris.is_empty() || ops > 0 {
        let triangles = std::mem::take(&mut work.triangles);
        work.triangles = triangles
            .into_iter()
            .enumerate()
            .filter(|(i, _)| !dead_tris.contains(i))
            .map(|(_, t)| t)
            .collect();
    }
    ops
}

/// Uniform-weight harmonic smoothing of interior vertices with fixed
/// boundary (Tutte-style). Falls back to damped local averaging if the
/// global solve would invert any element (possible on non-convex domains).
/// Returns 1 if any vertex moved more than a relative tolerance.
fn smooth_pass(work: &mut WorkMesh, tri: &Triangulation) -> usize {
    let nv = work.vertices.len();
    let interior: Vec<usize> = (0..nv).filter(|&v| !tri.is_boundary_vertex(v)).collect();
    if interior.is_empty() {
        return 0;
    }
    let index: BTreeMap<usize, usize> = interior.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut adj: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (&(a, b), _) in tri.edge_adjacency() {
        adj.entry(a).or_default().insert(b);
        adj.entry(b).or_default().insert(a);
    }
    let n = interior.len();
    let mut lap = CooMatrix::new(n, n);
    let mut bx = vec![0.0; n];
    let mut by = vec![0.0; n];
    for (i, &v) in interior.iter().enumerate() {
        let nbrs = &adj[&v];
        lap.push(i, i, nbrs.len() as f64);
        for &w in nbrs {
            if let Some(&j) = index.get(&w) {
                lap.push(i, j, -1.0);
            } else {
                bx[i] += work.vertices[w].x;
                by[i] += work.vertices[w].y;
            }
        }
    }
    let scale = tri.h().max(1e-300);
    let mut moved = false;
    if let Ok(lu) = SkylineLu::factor(&lap.to_csr()) {
        let sx = lu.solve(&bx);
        let sy = lu.solve(&by);
        let mut candidate = work.vertices.clone();
        for (i, &v) in interior.iter().enumerate() {
            candidate[v] = Vec2::new(sx[i], sy[i]);
        }
        let all_valid = work.triangles.iter().all(|t| {
            let det = signed_area2(&candidate[t[0]], &candidate[t[1]], &candidate[t[2]]);
            det > 0.0
        });
        if all_valid {
            for &v in &interior {
                if (candidate[v] - work.vertices[v]).norm() > 1e-9 * scale {
                    moved = true;
                }
            }
            work.vertices = candidate;
            return usize::from(moved);
        }
    }
    // damped fallback: accept per-vertex moves that keep the star valid
    let mut star: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, t) in work.triangles.iter().enumerate() {
        for &v in t {
            star.entry(v).or_default().push(i);
        }
    }
    for _ in 0..10 {
        for &v in &interior {
            let nbrs = &adj[&v];
            let avg = nbrs
                .iter()
                .fold(Vec2::zeros(), |acc, &w| acc + work.vertices[w])
                / nbrs.len() as f64;
            let target = work.vertices[v] + (avg - work.vertices[v]) * 0.5;
            let old = work.vertices[v];
            work.vertices[v] = target;
            let ok = star[&v]
                .iter()
                .all(|&ti| work.is_positive(work.triangles[ti]));
            if ok {
                if (target - old).norm() > 1e-9 * scale {
                    moved = true;
                }
            } else {
                work.vertices[v] = old;
            }
        }
    }
    usize::from(moved)
}

#[derive(Clone, Copy, PartialEq)]
enum FlipRule {
    /// flip when the summed alignment residual of the two triangles drops
    Alignment,
    /// flip when the metric opposite angles exceed pi (Lawson)
    MetricDelaunay,
}

/// One greedy flip sweep; returns the number of flips applied.
fn flip_pass(work: &mut WorkMesh, tri: &Triangulation, rule: FlipRule, budget: usize) -> usize {
    // edge -> (triangle index, opposite vertex) pairs
    let mut incident: BTreeMap<EdgeKey, Vec<(usize, usize)>> = BTreeMap::new();
    let mut existing: BTreeSet<[usize; 3]> = BTreeSet::new();
    for (i, t) in work.triangles.iter().enumerate() {
        existing.insert(tri_key(*t));
        for k in 0..3 {
            let key = edge_key(t[k], t[(k + 1) % 3]);
            incident.entry(key).or_default().push((i, t[(k + 2) % 3]));
        }
    }
    let mut touched: BTreeSet<usize> = BTreeSet::new();
    let mut ops = 0;
    for (&(a, b), inc) in &incident {
        if ops >= budget {
            break;
        }
        if inc.len() != 2 {
            continue;
        }
        let [(t1, c), (t2, d)] = [inc[0], inc[1]];
        if touched.contains(&t1) || touched.contains(&t2) {
            continue;
        }
        // flipped configuration (kept CCW when the quad is convex)
        let new1 = orient_ccw(work, [a, d, c]);
        let new2 = orient_ccw(work, [b, c, d]);
        if !work.is_positive(new1) || !work.is_positive(new2) {
            continue;
        }
        if existing.contains(&tri_key(new1)) || existing.contains(&tri_key(new2)) {
            continue;
        }
        let do_flip = match rule {
            FlipRule::Alignment => {
                let before = work.residual(work.triangles[t1]) + work.residual(work.triangles[t2]);
                let after = work.residual(new1) + work.residual(new2);
                after < before - 1e-12
            }
            FlipRule::MetricDelaunay => {
                // mean metric of the quad, angles at c and d facing (a, b)
                let logm = (sym_log(&work.metrics[a])
                    + sym_log(&work.metrics[b])
                    + sym_log(&work.metrics[c])
                    + sym_log(&work.metrics[d]))
                    / 4.0;
                let m = sym_exp(&logm);
                let alpha = metric_angle(work, c, a, b, &m);
                let beta = metric_angle(work, d, a, b, &m);
                alpha + beta > std::f64::consts::PI + 1e-12
            }
        };
        if do_flip {
            existing.remove(&tri_key(work.triangles[t1]));
            existing.remove(&tri_key(work.triangles[t2]));
            existing.insert(tri_key(new1));
            existing.insert(tri_key(new2));
            work.triangles[t1] = new1;
            work.triangles[t2] = new2;
            touched.insert(t1);
            touched.insert(t2);
            ops += 1;
        }
    }
    let _ = tri;
    ops
}

fn tri_key(t: [usize; 3]) -> [usize; 3] {
    let mut k = t;
    k.sort_unstable();
    k
}

fn orient_ccw(work: &WorkMesh, t: [usize; 3]) -> [usize; 3] {
    let det = signed_area2(
        &work.vertices[t[0]],
        &work.vertices[t[1]],
        &work.vertices[t[2]],
    );
    if det < 0.0 {
        [t[0], t[2], t[1]]
    } else {
        t
    }
}

/// Interior angle at `apex` between rays to `a` and `b`, measured under the
/// metric m (as the Dbar^{-1} of an implied diffusivity, m itself is the
/// measuring inner product here).
fn metric_angle(work: &WorkMesh, apex: usize, a: usize, b: usize, m: &Mat2) -> f64 {
    let u = work.vertices[a] - work.vertices[apex];
    let w = work.vertices[b] - work.vertices[apex];
    let dot = (u.transpose() * m * w)[(0, 0)];
    let cross = (u.x * w.y - u.y * w.x).abs() * m.determinant().sqrt();
    cross.atan2(dot)
}

/// Metric-aware local remeshing; `vertex_metrics[v]` is the SPD metric at
/// input vertex v.
pub fn builtin_remesh(
    tri: &Triangulation,
    vertex_metrics: &[Mat2],
    opts: &BuiltinOptions,
) -> Result<Triangulation> {
    Ok(builtin_remesh_full(tri, vertex_metrics, opts)?.mesh)
}

pub fn builtin_remesh_full(
    tri: &Triangulation,
    vertex_metrics: &[Mat2],
    opts: &BuiltinOptions,
) -> Result<RemeshOutcome> {
    if vertex_metrics.len() != tri.num_vertices() {
        return Err(crate::Error::Mismatch(format!(
            "metric covers {} vertices, mesh has {}",
            vertex_metrics.len(),
            tri.num_vertices()
        )));
    }
    for m in vertex_metrics {
        crate::linalg2::check_spd(m)?;
    }
    let mut work = WorkMesh::from_triangulation(tri, vertex_metrics);
    let mut current = work.rebuild()?;
    let mut total_ops = 0usize;
    let mut complete = false;
    for _cycle in 0..opts.max_cycles {
        let remaining = opts.operation_budget.saturating_sub(total_ops);
        if remaining == 0 {
            break;
        }
        let mut cycle_ops = 0;
        cycle_ops += split_pass(&mut work, &current, opts.split_threshold, remaining);
        current = work.rebuild()?;
        cycle_ops += collapse_pass(
            &mut work,
            &current,
            opts.collapse_threshold,
            opts.operation_budget.saturating_sub(total_ops + cycle_ops),
        );
        current = work.rebuild()?;
        if opts.smooth {
            cycle_ops += smooth_pass(&mut work, &current);
            current = work.rebuild()?;
        }
        cycle_ops += flip_pass(
            &mut work,
            &current,
            FlipRule::Alignment,
            opts.operation_budget.saturating_sub(total_ops + cycle_ops),
        );
        current = work.rebuild()?;
        if opts.delaunay_pass {
            cycle_ops += flip_pass(
                &mut work,
                &current,
                FlipRule::MetricDelaunay,
                opts.operation_budget.saturating_sub(total_ops + cycle_ops),
            );
            current = work.rebuild()?;
        }
        total_ops += cycle_ops;
        if cycle_ops == 0 {
            complete = true;
            break;
        }
    }
    Ok(RemeshOutcome {
        mesh: current,
        vertex_metrics: work.metrics,
        complete,
        operations: total_ops,
    })
}

#[cfg(test)]
mod tests;
