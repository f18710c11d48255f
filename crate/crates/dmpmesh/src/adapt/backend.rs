//! External remesher backend: runs a user-supplied command with
//! {background_mesh}, {metric_file} and {output_mesh} placeholders, then
//! validates whatever mesh comes back.
//!
//! The background mesh is written both as MSH 2.2 (.msh) and as a
//! .node/.ele pair next to it; the metric is written in the BAMG .mtr
//! format. The output is read according to its extension.

use std::path::Path;
use std::process::Command;

use crate::mesh::io::{format_from_path, load_mesh, write_msh2, write_node_ele};
use crate::mesh::Triangulation;
use crate::{Error, Result};

use super::{export_metric, MetricField, MetricFormat};

/// Runs the external command template; any nonzero exit status or invalid
/// output mesh is an error with the captured output attached.
pub fn external_remesh(
    tri: &Triangulation,
    metric: &MetricField,
    command_template: &str,
) -> Result<Triangulation> {
    let dir = std::env::temp_dir().join(format!(
        "dmpmesh-remesh-{}-{:x}",
        std::process::id(),
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or(0)
    ));
    std::fs::create_dir_all(&dir)?;
    let background = dir.join("background.msh");
    let metric_file = dir.join("metric.mtr");
    let output = dir.join("adapted.msh");

    write_msh2(tri, &background)?;
    write_node_ele(tri, &dir.join("background"))?;
    export_metric(&metric.vertex_metrics, &metric_file, MetricFormat::BamgMtr)?;

    let tokens: Vec<String> = command_template
        .split_whitespace()
        .map(|t| {
            t.replace("{background_mesh}", &background.to_string_lossy())
                .replace("{metric_file}", &metric_file.to_string_lossy())
                .replace("{output_mesh}", &output.to_string_lossy())
        })
        .collect();
    if tokens.is_empty() {
        return Err(Error::Config("empty external remesher command".into()));
    }
    let run = Command::new(&tokens[0]).args(&tokens[1..]).output();
    let out = match run {
        Ok(out) => out,
        Err(err) => {
            return Err(Error::Backend {
                status: None,
                output: format!("failed to launch {:?}: {err}", tokens[0]),
            });
        }
    };
    if !out.status.success() {
        return Err(Error::Backend {
            status: out.status.code(),
            output: format!(
                "{}{}",
                String::from_utf8_lossy(&out.stdout),
                String::from_utf8_lossy(&out.stderr)
            ),
        });
    }
    let mesh = read_output_mesh(&output).map_err(|err| Error::Backend {
        status: out.status.code(),
        output: format!("backend produced an invalid mesh: {err}"),
    })?;
    let _ = std::fs::remove_dir_all(&dir);
    Ok(mesh)
}

fn read_output_mesh(path: &Path) -> Result<Triangulation> {
    let format = format_from_path(path)?;
    load_mesh(path, format)
}
