//! Mesh file I/O.
//!
//! Readers for the Gmsh MSH 2.2 ASCII subset (nodes + line/triangle elements
//! with physical tags) and Triangle-style .node/.ele pairs, plus matching
//! writers. Only MSH 2.2 is accepted; other versions are rejected outright.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::Triangulation;
use crate::{Error, Result, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshFormat {
    /// Gmsh MSH 2.2 ASCII subset
    Msh2,
    /// Triangle-style .node/.ele pair (path points at either file)
    NodeEle,
}

/// Loads a mesh, dispatching on `format`.
pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<Triangulation> {
    match format {
        MeshFormat::Msh2 => read_msh2(&std::fs::read_to_string(path)?),
        MeshFormat::NodeEle => {
            let base = path.with_extension("");
            let node = std::fs::read_to_string(base.with_extension("node"))?;
            let ele = std::fs::read_to_string(base.with_extension("ele"))?;
            read_node_ele(&node, &ele)
        }
    }
}

/// Guesses the format from the file extension (.msh vs .node/.ele).
pub fn format_from_path(path: &Path) -> Result<MeshFormat> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("msh") => Ok(MeshFormat::Msh2),
        Some("node") | Some("ele") => Ok(MeshFormat::NodeEle),
        other => Err(Error::Config(format!(
            "cannot infer mesh format from extension {other:?}; expected .msh, .node or .ele"
        ))),
    }
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            iter: text.lines().enumerate(),
        }
    }

    /// Next non-empty, non-comment line with its 1-based number.
    fn next_content(&mut self) -> Option<(usize, &'a str)> {
        for (i, line) in self.iter.by_ref() {
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Some((i + 1, t));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next_content()
            .ok_or_else(|| Error::parse(0, format!("unexpected end of file, expected {what}")))
    }
}

fn parse_field<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("cannot parse {what} from {tok:?}")))
}

/// Parses the MSH 2.2 ASCII subset: $MeshFormat (must be "2.2 0 8"),
/// $Nodes, $Elements with types 1 (2-node line) and 2 (3-node triangle).
/// The first tag of an element is its physical tag; line-element tags become
/// boundary-vertex markers, other tags are ignored.
pub fn read_msh2(text: &str) -> Result<Triangulation> {
    let mut lines = Lines::new(text);
    let (ln, header) = lines.expect("$MeshFormat")?;
    if header != "$MeshFormat" {
        return Err(Error::parse(
            ln,
            format!("expected $MeshFormat, got {header:?}"),
        ));
    }
    let (ln, ver) = lines.expect("version line")?;
    let mut it = ver.split_whitespace();
    let version = it.next().unwrap_or("");
    let file_type = it.next().unwrap_or("");
    if version != "2.2" || file_type != "0" {
        return Err(Error::parse(
            ln,
            format!("only MSH 2.2 ASCII is supported, got version {ver:?}"),
        ));
    }
    let (ln, end) = lines.expect("$EndMeshFormat")?;
    if end != "$EndMeshFormat" {
        return Err(Error::parse(
            ln,
            format!("expected $EndMeshFormat, got {end:?}"),
        ));
    }

    let (ln, nodes_tag) = lines.expect("$Nodes")?;
    if nodes_tag != "$Nodes" {
        return Err(Error::parse(
            ln,
            format!("expected $Nodes, got {nodes_tag:?}"),
        ));
    }
    let (ln, n_str) = lines.expect("node count")?;
    let n_nodes: usize = parse_field(ln, n_str, "node count")?;
    let mut id_map: BTreeMap<usize, usize> = BTreeMap::new();
    let mut vertices = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (ln, line) = lines.expect("node line")?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(Error::parse(ln, "node line needs: id x y [z]"));
        }
        let id: usize = parse_field(ln, toks[0], "node id")?;
        let x: f64 = parse_field(ln, toks[1], "x coordinate")?;
        let y: f64 = parse_field(ln, toks[2], "y coordinate")?;
        if id_map.insert(id, vertices.len()).is_some() {
            return Err(Error::parse(ln, format!("duplicate node id {id}")));
        }
        vertices.push(Vec2::new(x, y));
    }
    let (ln, end) = lines.expect("$EndNodes")?;
    if end != "$EndNodes" {
        return Err(Error::parse(ln, format!("expected $EndNodes, got {end:?}")));
    }

    let (ln, elems_tag) = lines.expect("$Elements")?;
    if elems_tag != "$Elements" {
        return Err(Error::parse(
            ln,
            format!("expected $Elements, got {elems_tag:?}"),
        ));
    }
    let (ln, m_str) = lines.expect("element count")?;
    let n_elems: usize = parse_field(ln, m_str, "element count")?;
    let mut triangles = Vec::new();
    let mut markers: BTreeMap<usize, i32> = BTreeMap::new();
    for _ in 0..n_elems {
        let (ln, line) = lines.expect("element line")?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(Error::parse(ln, "element line needs: id type ntags ..."));
        }
        let ty: usize = parse_field(ln, toks[1], "element type")?;
        let ntags: usize = parse_field(ln, toks[2], "tag count")?;
        let node_toks = &toks[3 + ntags..];
        let phys: i32 = if ntags > 0 {
            parse_field(ln, toks[3], "physical tag")?
        } else {
            0
        };
        let resolve = |tok: &str| -> Result<usize> {
            let id: usize = parse_field(ln, tok, "node reference")?;
            id_map
                .get(&id)
                .copied()
                .ok_or_else(|| Error::parse(ln, format!("element references unknown node {id}")))
        };
        match ty {
            1 => {
                if node_toks.len() != 2 {
                    return Err(Error::parse(ln, "2-node line element needs 2 nodes"));
                }
                for tok in node_toks {
                    let v = resolve(tok)?;
                    if phys != 0 {
                        markers.insert(v, phys);
                    } else {
                        markers.entry(v).or_insert(1);
                    }
                }
            }
            2 => {
                if node_toks.len() != 3 {
                    return Err(Error::parse(ln, "3-node triangle needs 3 nodes"));
                }
                triangles.push([
                    resolve(node_toks[0])?,
                    resolve(node_toks[1])?,
                    resolve(node_toks[2])?,
                ]);
            }
            other => {
                return Err(Error::parse(
                    ln,
                    format!("unsupported element type {other}; only types 1 and 2 are accepted"),
                ));
            }
        }
    }
    let (ln, end) = lines.expect("$EndElements")?;
    if end != "$EndElements" {
        return Err(Error::parse(
            ln,
            format!("expected $EndElements, got {end:?}"),
        ));
    }

    Triangulation::new(vertices, triangles, markers)
}

/// Parses a Triangle-style .node/.ele pair. Indexing base (0 or 1) is
/// auto-detected from the first node index. A trailing marker column in the
/// .node file tags boundary vertices (marker 0 means untagged, per the
/// Triangle convention).
pub fn read_node_ele(node_text: &str, ele_text: &str) -> Result<Triangulation> {
    let mut nl = Lines::new(node_text);
    let (ln, header) = nl.expect(".node header")?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() < 2 {
        return Err(Error::parse(
            ln,
            ".node header needs: count dim [nattr] [nmarker]",
        ));
    }
    let n_nodes: usize = parse_field(ln, toks[0], "node count")?;
    let dim: usize = parse_field(ln, toks[1], "dimension")?;
    if dim != 2 {
        return Err(Error::parse(
            ln,
            format!("only 2D .node files supported, got dim {dim}"),
        ));
    }
    let n_attr: usize = if toks.len() > 2 {
        parse_field(ln, toks[2], "attribute count")?
    } else {
        0
    };
    let has_marker = toks.len() > 3 && toks[3] != "0";

    let mut first_index: Option<usize> = None;
    let mut vertices = Vec::with_capacity(n_nodes);
    let mut raw_markers: Vec<i32> = Vec::with_capacity(n_nodes);
    for k in 0..n_nodes {
        let (ln, line) = nl.expect("node line")?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let need = 3 + n_attr + usize::from(has_marker);
        if toks.len() < need {
            return Err(Error::parse(ln, format!("node line needs {need} fields")));
        }
        let idx: usize = parse_field(ln, toks[0], "node index")?;
        let base = *first_index.get_or_insert(idx);
        if idx != base + k {
            return Err(Error::parse(ln, format!("non-contiguous node index {idx}")));
        }
        let x: f64 = parse_field(ln, toks[1], "x coordinate")?;
        let y: f64 = parse_field(ln, toks[2], "y coordinate")?;
        vertices.push(Vec2::new(x, y));
        raw_markers.push(if has_marker {
            parse_field(ln, toks[3 + n_attr], "boundary marker")?
        } else {
            0
        });
    }
    let base = first_index.unwrap_or(0);
    if base > 1 {
        return Err(Error::parse(
            1,
            format!("first node index must be 0 or 1, got {base}"),
        ));
    }

    let mut el = Lines::new(ele_text);
    let (ln, header) = el.expect(".ele header")?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() < 2 {
        return Err(Error::parse(
            ln,
            ".ele header needs: count nodes-per-tri [nattr]",
        ));
    }
    let n_elems: usize = parse_field(ln, toks[0], "element count")?;
    let npt: usize = parse_field(ln, toks[1], "nodes per triangle")?;
    if npt != 3 {
        return Err(Error::parse(
            ln,
            format!("only 3-node triangles supported, got {npt}"),
        ));
    }
    let mut triangles = Vec::with_capacity(n_elems);
    for _ in 0..n_elems {
        let (ln, line) = el.expect("element line")?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 4 {
            return Err(Error::parse(ln, "element line needs: idx v1 v2 v3"));
        }
        let mut conn = [0usize; 3];
        for (slot, tok) in conn.iter_mut().zip(&toks[1..4]) {
            let raw: usize = parse_field(ln, tok, "vertex index")?;
            if raw < base {
                return Err(Error::parse(
                    ln,
                    format!("vertex index {raw} below base {base}"),
                ));
            }
            *slot = raw - base;
        }
        triangles.push(conn);
    }

    // Triangle convention: marker 0 = unmarked
    let markers: BTreeMap<usize, i32> = raw_markers
        .iter()
        .enumerate()
        .filter(|(_, &m)| m != 0)
        .map(|(v, &m)| (v, m))
        .collect();
    Triangulation::new(vertices, triangles, markers)
}

fn fmt_f64(x: f64) -> String {
    // shortest round-trip representation; deterministic
    format!("{x}")
}

/// Writes a .node/.ele pair next to `base` (extensions appended).
pub fn write_node_ele(tri: &Triangulation, base: &Path) -> Result<()> {
    let mut node = String::new();
    writeln!(node, "{} 2 0 1", tri.num_vertices()).unwrap();
    for (i, v) in tri.vertices().iter().enumerate() {
        let marker = tri.boundary_marker(i).unwrap_or(0);
        writeln!(node, "{} {} {} {}", i, fmt_f64(v.x), fmt_f64(v.y), marker).unwrap();
    }
    std::fs::write(base.with_extension("node"), node)?;

    let mut ele = String::new();
    writeln!(ele, "{} 3 0", tri.num_elements()).unwrap();
    for (e, conn) in tri.elements().iter().enumerate() {
        writeln!(ele, "{} {} {} {}", e, conn[0], conn[1], conn[2]).unwrap();
    }
    std::fs::write(base.with_extension("ele"), ele)?;
    Ok(())
}

/// Writes the MSH 2.2 ASCII subset. Boundary edges are emitted as 2-node
/// line elements carrying the marker of their lower-indexed vertex.
pub fn write_msh2(tri: &Triangulation, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    writeln!(out, "{}", tri.num_vertices()).unwrap();
    for (i, v) in tri.vertices().iter().enumerate() {
        writeln!(out, "{} {} {} 0", i + 1, fmt_f64(v.x), fmt_f64(v.y)).unwrap();
    }
    out.push_str("$EndNodes\n$Elements\n");
    let boundary_edges: Vec<_> = tri
        .edge_adjacency()
        .iter()
        .filter(|(_, inc)| inc.len() == 1)
        .map(|(&k, _)| k)
        .collect();
    writeln!(out, "{}", boundary_edges.len() + tri.num_elements()).unwrap();
    let mut id = 1;
    for (a, b) in boundary_edges {
        let marker = tri.boundary_marker(a).unwrap_or(1);
        writeln!(out, "{id} 1 2 {marker} 0 {} {}", a + 1, b + 1).unwrap();
        id += 1;
    }
    for conn in tri.elements() {
        writeln!(
            out,
            "{id} 2 2 0 0 {} {} {}",
            conn[0] + 1,
            conn[1] + 1,
            conn[2] + 1
        )
        .unwrap();
        id += 1;
    }
    out.push_str("$EndElements\n");
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SINGLE_NODE: &str = "3 2 0 1\n0 0.0 0.0 1\n1 1.0 0.0 1\n2 0.0 1.0 1\n";
    const SINGLE_ELE: &str = "1 3 0\n0 0 1 2\n";

    #[test]
    fn single_triangle_node_ele() {
        let tri = read_node_ele(SINGLE_NODE, SINGLE_ELE).unwrap();
        assert_eq!(tri.num_vertices(), 3);
        assert_eq!(tri.num_elements(), 1);
        assert_eq!(tri.boundary_vertices().len(), 3);
        assert_eq!(tri.num_interior_vertices(), 0);
    }

    #[test]
    fn one_based_indexing_autodetected() {
        let node = "3 2 0 0\n1 0.0 0.0\n2 1.0 0.0\n3 0.0 1.0\n";
        let ele = "1 3 0\n1 1 2 3\n";
        let tri = read_node_ele(node, ele).unwrap();
        assert_eq!(tri.element(0), [0, 1, 2]);
    }

    #[test]
    fn out_of_range_vertex_is_error() {
        let ele_bad = "1 3 0\n0 0 1 3\n";
        let err = read_node_ele(SINGLE_NODE, ele_bad).unwrap_err();
        assert!(err.to_string().contains("references vertex 3"));
    }

    #[test]
    fn msh2_roundtrip() {
        let tri = super::super::structured_unit(2, 2, 1.0, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mesh.msh");
        write_msh2(&tri, &path).unwrap();
        let back = read_msh2(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back.num_vertices(), tri.num_vertices());
        assert_eq!(back.num_elements(), tri.num_elements());
        assert_eq!(back.boundary_vertices(), tri.boundary_vertices());
    }

    #[test]
    fn msh_version_rejected() {
        let text = "$MeshFormat\n4.1 0 8\n$EndMeshFormat\n";
        let err = read_msh2(text).unwrap_err();
        assert!(err.to_string().contains("2.2"));
    }

    #[test]
    fn msh_unsupported_type_rejected() {
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n1\n1 0 0 0\n$EndNodes\n$Elements\n1\n1 15 2 0 0 1\n$EndElements\n";
        let err = read_msh2(text).unwrap_err();
        assert!(err.to_string().contains("element type 15"));
    }

    #[test]
    fn node_ele_roundtrip() {
        let tri = super::super::structured_unit(3, 2, 1.0, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("mesh");
        write_node_ele(&tri, &base).unwrap();
        let back = load_mesh(&base.with_extension("node"), MeshFormat::NodeEle).unwrap();
        assert_eq!(back.num_vertices(), tri.num_vertices());
        assert_eq!(back.num_elements(), tri.num_elements());
    }
}
