//! Run manifest embedded in every report: command, input paths, a stable
//! hash of the problem-spec file, config values, tool version and timestamp.
//! Identical inputs and config produce an identical manifest; the timestamp
//! honors DMPMESH_TIMESTAMP so pipelines can pin it for byte-identical
//! reports.

use std::path::Path;

use serde::Serialize;

/// Report schema version, bumped on breaking changes.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Clone)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub mesh_path: String,
    pub spec_path: String,
    pub spec_hash: String,
    pub config: serde_json::Value,
    pub tool_version: &'static str,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(
        command: &str,
        mesh_path: &Path,
        spec_path: &Path,
        config: serde_json::Value,
    ) -> std::io::Result<RunManifest> {
        let spec_bytes = std::fs::read(spec_path)?;
        Ok(RunManifest {
            schema_version: REPORT_SCHEMA_VERSION,
            command: command.to_string(),
            mesh_path: mesh_path.display().to_string(),
            spec_path: spec_path.display().to_string(),
            spec_hash: format!("{:016x}", fnv1a(&spec_bytes)),
            config,
            tool_version: env!("CARGO_PKG_VERSION"),
            timestamp: timestamp(),
        })
    }
}

/// FNV-1a, stable across platforms.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn timestamp() -> String {
    if let Ok(fixed) = std::env::var("DMPMESH_TIMESTAMP") {
        return fixed;
    }
    match std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH) {
        Ok(d) => d.as_secs().to_string(),
        Err(_) => "0".to_string(),
    }
}

/// Verbosity from DMPMESH_LOG (any nonempty value enables progress lines).
pub fn verbose() -> bool {
    std::env::var("DMPMESH_LOG")
        .map(|v| !v.is_empty())
        .unwrap_or(false)
}
