//! JSON, CSV and DOT writers for experiment results.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::pathways::TransitionGraph;
use crate::dynamics::{Trajectory, NODE_DIM};
use crate::error::{Error, Result};
use crate::measure::SyncErrorSeries;
use crate::stability::{ClusterExponents, StabilityMap};

const COMPONENTS: [&str; NODE_DIM] = ["v", "w", "z"];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    create_parent(path)?;
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    create_parent(path)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Column names `t, x1_v, .., xN_z, y1_v, .., yN_z`.
pub fn trajectory_header(n_nodes: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for layer in ["x", "y"] {
        for i in 1..=n_nodes {
            h.extend(COMPONENTS.iter().map(|c| format!("{layer}{i}_{c}")));
        }
    }
    h
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(trajectory_header(traj.dim / (2 * NODE_DIM)))
        .map_err(|e| csv_err(path, e))?;
    for (t, row) in traj.rows() {
        let rec = std::iter::once(t).chain(row.iter().copied()).map(|v| v.to_string());
        w.write_record(rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_error_csv(path: &Path, series: &SyncErrorSeries) -> Result<()> {
    let mut w = csv_writer(path)?;
    let header = std::iter::once("t".to_string()).chain(series.labels.iter().map(|l| format!("e_{l}")));
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for (k, t) in series.times.iter().enumerate() {
        let rec = std::iter::once(*t).chain(series.errors.iter().map(|e| e[k])).map(|v| v.to_string());
        w.write_record(rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn cluster_name(layer: crate::symmetry::Layer, nodes: &[usize]) -> String {
    let ids: Vec<String> = nodes.iter().map(|n| n.to_string()).collect();
    format!("{}{{{}}}", layer.suffix(), ids.join(" "))
}

/// One row per (alpha, sigma, pattern, cluster).
pub fn write_stability_csv(path: &Path, map: &StabilityMap) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["alpha", "sigma", "pattern", "cluster", "lambda", "own_lambda", "stable", "converged"])
        .map_err(|e| csv_err(path, e))?;
    for r in &map.records {
        for c in &r.exponents {
            w.write_record([
                r.alpha.to_string(),
                r.sigma.to_string(),
                r.pattern.clone(),
                cluster_name(c.cluster.layer, &c.cluster.nodes),
                c.lambda.to_string(),
                c.own_lambda.to_string(),
                (c.lambda < 0.0).to_string(),
                c.converged.to_string(),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_exponents_csv(path: &Path, exps: &ClusterExponents) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["cluster", "lambda", "own_lambda", "stable", "converged"])
        .map_err(|e| csv_err(path, e))?;
    for c in &exps.clusters {
        w.write_record([
            cluster_name(c.cluster.layer, &c.cluster.nodes),
            c.lambda.to_string(),
            c.own_lambda.to_string(),
            (c.lambda < 0.0).to_string(),
            c.converged.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Graphviz rendering of a transition graph, edges labelled with the
/// couplings that produced them.
pub fn transition_dot(graph: &TransitionGraph) -> String {
    let mut s = String::from("digraph transitions {\n  rankdir=LR;\n");
    for n in &graph.nodes {
        s.push_str(&format!("  \"{n}\";\n"));
    }
    for e in &graph.edges {
        s.push_str(&format!(
            "  \"{}\" -> \"{}\" [label=\"alpha={} sigma={}\"];\n",
            e.from, e.to, e.alpha, e.sigma
        ));
    }
    s.push_str("}\n");
    s
}

pub fn write_dot(path: &Path, graph: &TransitionGraph) -> Result<()> {
    create_parent(path)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(transition_dot(graph).as_bytes()).map_err(|e| Error::io(path, e))
}

/// Output file paths for a config: `<dir>/<stem><suffix>`.
pub struct OutputPaths {
    dir: PathBuf,
    stem: String,
}

impl OutputPaths {
    pub fn new(config: &ExperimentConfig) -> Self {
        OutputPaths {
            dir: config.output.dir.clone(),
            stem: config.file_stem(),
        }
    }

    pub fn file(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}", self.stem))
    }
}
