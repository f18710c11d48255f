//! Legacy VTK ASCII writer/reader for triangle meshes with point and cell
//! data. Floats are written with 17 significant digits so that re-exporting
//! an imported file is byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use crate::mesh::Triangulation;
use crate::{Error, Result, Vec2};

#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    NodalScalar(Vec<f64>),
    NodalVector(Vec<Vec2>),
    CellScalar(Vec<f64>),
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the mesh and named fields as a legacy VTK unstructured grid.
pub fn export_vtk(tri: &Triangulation, fields: &[(String, Field)], path: &Path) -> Result<()> {
    std::fs::write(path, vtk_string(tri, fields)?)?;
    Ok(())
}

pub fn vtk_string(tri: &Triangulation, fields: &[(String, Field)]) -> Result<String> {
    let nv = tri.num_vertices();
    let ne = tri.num_elements();
    for (name, field) in fields {
        let (len, want) = match field {
            Field::NodalScalar(v) => (v.len(), nv),
            Field::NodalVector(v) => (v.len(), nv),
            Field::CellScalar(v) => (v.len(), ne),
        };
        if len != want {
            return Err(Error::Mismatch(format!(
                "field {name:?} has length {len}, expected {want}"
            )));
        }
        if name.contains(char::is_whitespace) {
            return Err(Error::Config(format!(
                "VTK field name {name:?} must not contain whitespace"
            )));
        }
    }

    let mut out = String::new();
    out.push_str("# vtk DataFile Version 2.0\ndmpmesh output\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(out, "POINTS {nv} double").unwrap();
    for v in tri.vertices() {
        writeln!(out, "{} {} 0", fmt17(v.x), fmt17(v.y)).unwrap();
    }
    writeln!(out, "CELLS {ne} {}", 4 * ne).unwrap();
    for conn in tri.elements() {
        writeln!(out, "3 {} {} {}", conn[0], conn[1], conn[2]).unwrap();
    }
    writeln!(out, "CELL_TYPES {ne}").unwrap();
    for _ in 0..ne {
        out.push_str("5\n");
    }

    let nodal: Vec<_> = fields
        .iter()
        .filter(|(_, f)| !matches!(f, Field::CellScalar(_)))
        .collect();
    if !nodal.is_empty() {
        writeln!(out, "POINT_DATA {nv}").unwrap();
        for (name, field) in nodal {
            match field {
                Field::NodalScalar(values) => {
                    writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
                    for v in values {
                        writeln!(out, "{}", fmt17(*v)).unwrap();
                    }
                }
                Field::NodalVector(values) => {
                    writeln!(out, "VECTORS {name} double").unwrap();
                    for v in values {
                        writeln!(out, "{} {} 0", fmt17(v.x), fmt17(v.y)).unwrap();
                    }
                }
                Field::CellScalar(_) => unreachable!(),
            }
        }
    }
    let cell: Vec<_> = fields
        .iter()
        .filter(|(_, f)| matches!(f, Field::CellScalar(_)))
        .collect();
    if !cell.is_empty() {
        writeln!(out, "CELL_DATA {ne}").unwrap();
        for (name, field) in cell {
            if let Field::CellScalar(values) = field {
                writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
                for v in values {
                    writeln!(out, "{}", fmt17(*v)).unwrap();
                }
            }
        }
    }
    Ok(out)
}

/// Reads back the subset of legacy VTK written by [`export_vtk`].
pub fn import_vtk(text: &str) -> Result<(Triangulation, Vec<(String, Field)>)> {
    let mut lines = text.lines().enumerate().peekable();
    let mut next = |what: &str| -> Result<(usize, &str)> {
        for (i, line) in lines.by_ref() {
            if !line.trim().is_empty() {
                return Ok((i + 1, line.trim()));
            }
        }
        Err(Error::parse(
            0,
            format!("unexpected end of file, expected {what}"),
        ))
    };

    for expect in ["# vtk", "dmpmesh", "ASCII", "DATASET"] {
        let (ln, line) = next(expect)?;
        if !line.starts_with(expect) {
            return Err(Error::parse(
                ln,
                format!("expected {expect:?}, got {line:?}"),
            ));
        }
    }
    let (ln, points_line) = next("POINTS")?;
    let n: usize = points_line
        .strip_prefix("POINTS ")
        .and_then(|s| s.split_whitespace().next())
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(ln, "bad POINTS header"))?;
    let mut vertices = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, line) = next("point")?;
        let mut it = line.split_whitespace();
        let x: f64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(ln, "bad point"))?;
        let y: f64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(ln, "bad point"))?;
        vertices.push(Vec2::new(x, y));
    }
    let (ln, cells_line) = next("CELLS")?;
    let m: usize = cells_line
        .strip_prefix("CELLS ")
        .and_then(|s| s.split_whitespace().next())
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(ln, "bad CELLS header"))?;
    let mut elements = Vec::with_capacity(m);
    for _ in 0..m {
        let (ln, line) = next("cell")?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 4 || toks[0] != "3" {
            return Err(Error::parse(ln, "only 3-node triangle cells supported"));
        }
        let mut conn = [0usize; 3];
        for (slot, t) in conn.iter_mut().zip(&toks[1..]) {
            *slot = t.parse().map_err(|_| Error::parse(ln, "bad cell index"))?;
        }
        elements.push(conn);
    }
    let (_, _types) = next("CELL_TYPES")?;
    for _ in 0..m {
        next("cell type")?;
    }

    let mut fields = Vec::new();
    let mut section = None;
    loop {
        let Ok((ln, line)) = next("data section") else {
            break;
        };
        if let Some(rest) = line.strip_prefix("POINT_DATA ") {
            let k: usize = rest
                .parse()
                .map_err(|_| Error::parse(ln, "bad POINT_DATA count"))?;
            section = Some(("point", k));
        } else if let Some(rest) = line.strip_prefix("CELL_DATA ") {
            let k: usize = rest
                .parse()
                .map_err(|_| Error::parse(ln, "bad CELL_DATA count"))?;
            section = Some(("cell", k));
        } else if let Some(rest) = line.strip_prefix("SCALARS ") {
            let (kind, k) =
                section.ok_or_else(|| Error::parse(ln, "SCALARS outside a data section"))?;
            let name = rest
                .split_whitespace()
                .next()
                .ok_or_else(|| Error::parse(ln, "bad SCALARS header"))?
                .to_string();
            next("LOOKUP_TABLE")?;
            let mut values = Vec::with_capacity(k);
            for _ in 0..k {
                let (ln, line) = next("scalar value")?;
                values.push(
                    line.parse()
                        .map_err(|_| Error::parse(ln, "bad scalar value"))?,
                );
            }
            fields.push((
                name,
                if kind == "point" {
                    Field::NodalScalar(values)
                } else {
                    Field::CellScalar(values)
                },
            ));
        } else if let Some(rest) = line.strip_prefix("VECTORS ") {
            let (kind, k) =
                section.ok_or_else(|| Error::parse(ln, "VECTORS outside a data section"))?;
            if kind != "point" {
                return Err(Error::parse(ln, "cell vectors not supported"));
            }
            let name = rest
                .split_whitespace()
                .next()
                .ok_or_else(|| Error::parse(ln, "bad VECTORS header"))?
                .to_string();
            let mut values = Vec::with_capacity(k);
            for _ in 0..k {
                let (ln, line) = next("vector value")?;
                let mut it = line.split_whitespace();
                let x: f64 = it
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::parse(ln, "bad vector"))?;
                let y: f64 = it
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::parse(ln, "bad vector"))?;
                values.push(Vec2::new(x, y));
            }
            fields.push((name, Field::NodalVector(values)));
        } else {
            return Err(Error::parse(ln, format!("unexpected line {line:?}")));
        }
    }

    let tri = Triangulation::new(vertices, elements, std::collections::BTreeMap::new())?;
    Ok((tri, fields))
}
