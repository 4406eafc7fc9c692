//! Deterministic result artifacts: CSV dumps, the JSON run summary and the
//! run id that ties output files to the exact configuration that made them.

use crate::gaussian::TemporalPath;
use crate::grid::TimeGrid;
use crate::solver::FieldState;
use crate::Result;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Short content id of an experiment configuration, stable across runs and
/// machines: reruns of the same config share the id.
pub fn run_id(experiment: &str, config: &BTreeMap<String, String>) -> String {
    let mut hasher = Sha256::new();
    hasher.update(experiment.as_bytes());
    for (k, v) in config {
        hasher.update([0u8]);
        hasher.update(k.as_bytes());
        hasher.update([1u8]);
        hasher.update(v.as_bytes());
    }
    let digest = hasher.finalize();
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

/// Summary written next to every experiment's CSV.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunSummary {
    pub experiment: String,
    pub config: BTreeMap<String, String>,
    pub passed: bool,
    pub wall_seconds: f64,
    pub run_id: String,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary is plain data")
    }
}

/// Writes `body` under `dir`, creating the directory if needed.
pub fn write_text(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, body)?;
    Ok(path)
}

/// Trajectories on a shared grid as `replication,i,t,u` rows.
pub fn paths_to_csv(grid: &TimeGrid, paths: &[TemporalPath]) -> String {
    let mut out = String::from("replication,i,t,u\n");
    for path in paths {
        for (i, (&t, &u)) in grid.points().iter().zip(&path.values).enumerate() {
            out.push_str(&format!("{},{},{},{}\n", path.replication, i, t, u));
        }
    }
    out
}

/// One field snapshot as `t,x,u` rows.
pub fn field_to_csv(state: &FieldState) -> String {
    let mut out = String::from("t,x,u\n");
    for (&x, &u) in state.x_grid.iter().zip(&state.values) {
        out.push_str(&format!("{},{},{}\n", state.time, x, u));
    }
    out
}
