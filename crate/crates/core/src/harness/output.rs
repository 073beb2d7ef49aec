use std::io::Write;
use std::path::Path;

use serde::Serialize;
use tempfile::NamedTempFile;

use super::run::Trajectory;
use crate::error::{Error, Result};

/// Shortest decimal string that parses back to the same f64.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

pub fn csv_header(dim: usize, tasks: usize) -> Vec<String> {
    let mut h = vec!["step".to_string()];
    h.extend((1..=dim).map(|i| format!("theta_{i}")));
    h.extend((1..=tasks).map(|i| format!("L_{i}")));
    h.extend(["L0", "g0_norm", "pareto_stat", "min_dot", "constraint_norm"].map(String::from));
    h
}

pub fn trajectory_csv(tr: &Trajectory, dim: usize, tasks: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(csv_header(dim, tasks)).map_err(io)?;
    for r in &tr.rows {
        let mut rec = vec![r.step.to_string()];
        rec.extend(r.theta.iter().chain(&r.losses).map(|v| format_float(*v)));
        rec.extend([r.l0, r.g0_norm, r.pareto_stat, r.min_dot, r.constraint_norm].map(format_float));
        w.write_record(&rec).map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

/// One `run_<i>.csv` per trajectory under `dir`.
pub fn write_trajectories(dir: &Path, trajectories: &[Trajectory], dim: usize, tasks: usize) -> Result<()> {
    for tr in trajectories {
        let bytes = trajectory_csv(tr, dim, tasks)?;
        write_atomic(&dir.join(format!("run_{}.csv", tr.summary.init_index)), &bytes)?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}
