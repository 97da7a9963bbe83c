//! Synchronization errors along trajectories and pattern detection.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Trajectory, NODE_DIM};
use crate::error::{Error, Result};
use crate::symmetry::{Layer, Partition, PatternState};

/// Default "close to zero" threshold for pattern errors.
pub const DEFAULT_THRESHOLD: f64 = 1e-3;
/// Default fraction of the recorded trajectory used for detection.
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.2;

fn layer_offset(layer: Layer, dim: usize) -> usize {
    match layer {
        Layer::Top => 0,
        Layer::Bottom => dim / 2,
    }
}

/// Mean ℓ1 distance over ordered pairs of distinct cluster members in a
/// single flat state.
pub fn cluster_error_at(state: &[f64], layer: Layer, cluster: &[usize]) -> f64 {
    let off = layer_offset(layer, state.len());
    let m = cluster.len();
    let mut sum = 0.0;
    for (a, &i) in cluster.iter().enumerate() {
        for &j in &cluster[a + 1..] {
            let (xi, xj) = (off + NODE_DIM * i, off + NODE_DIM * j);
            sum += (0..NODE_DIM).map(|k| (state[xi + k] - state[xj + k]).abs()).sum::<f64>();
        }
    }
    // Each unordered pair stands for two ordered pairs.
    2.0 * sum / (m * (m - 1)) as f64
}

fn check_cluster(cluster: &[usize], n: usize) -> Result<()> {
    if cluster.len() < 2 {
        return Err(Error::InvalidArgument(
            "synchronization error is only defined for clusters of two or more nodes".into(),
        ));
    }
    if let Some(&i) = cluster.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: i + 1, n });
    }
    Ok(())
}

/// Error series of one cluster (0-based node indices).
pub fn cluster_error(traj: &Trajectory, cluster: &[usize], layer: Layer) -> Result<Vec<f64>> {
    check_cluster(cluster, traj.dim / (2 * NODE_DIM))?;
    Ok((0..traj.len())
        .map(|k| cluster_error_at(traj.row(k), layer, cluster))
        .collect())
}

/// Mean cluster error over the nontrivial clusters of `p` in one state.
pub fn pattern_error_at(state: &[f64], layer: Layer, p: &Partition) -> f64 {
    let (sum, count) = p
        .nontrivial()
        .fold((0.0, 0usize), |(s, c), (_, cl)| (s + cluster_error_at(state, layer, cl), c + 1));
    sum / count as f64
}

pub fn pattern_error(traj: &Trajectory, p: &Partition, layer: Layer) -> Result<Vec<f64>> {
    if p.n_nontrivial() == 0 {
        return Err(Error::InvalidArgument(
            "pattern error needs at least one nontrivial cluster".into(),
        ));
    }
    if p.n_nodes() * 2 * NODE_DIM != traj.dim {
        return Err(Error::SizeMismatch {
            what: "pattern",
            expected: traj.dim / (2 * NODE_DIM),
            found: p.n_nodes(),
        });
    }
    Ok((0..traj.len()).map(|k| pattern_error_at(traj.row(k), layer, p)).collect())
}

/// Pattern error series for a set of candidates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncErrorSeries {
    pub layer: Layer,
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    /// `errors[c][k]`: candidate `c` at sample `k`.
    pub errors: Vec<Vec<f64>>,
}

pub fn error_series(traj: &Trajectory, candidates: &[PatternState], layer: Layer) -> Result<SyncErrorSeries> {
    let errors = candidates
        .iter()
        .map(|c| pattern_error(traj, &c.partition, layer))
        .collect::<Result<Vec<_>>>()?;
    Ok(SyncErrorSeries {
        layer,
        times: traj.times.clone(),
        labels: candidates.iter().map(|c| c.label.clone()).collect(),
        errors,
    })
}

/// Samples making up the final `fraction` of a trajectory.
pub fn final_window(traj: &Trajectory, fraction: f64) -> Range<usize> {
    let n = traj.len();
    let take = ((n as f64 * fraction).ceil() as usize).clamp(1.min(n), n);
    n - take..n
}

pub fn window_mean(series: &[f64], window: Range<usize>) -> f64 {
    let s = &series[window];
    s.iter().sum::<f64>() / s.len() as f64
}

/// Time-averaged error of one candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateError {
    pub label: String,
    pub mean_error: f64,
    pub nontrivial_clusters: usize,
    pub nontrivial_size: usize,
}

impl CandidateError {
    pub fn new(pattern: &PatternState, mean_error: f64) -> Self {
        let p = &pattern.partition;
        CandidateError {
            label: pattern.label.clone(),
            mean_error,
            nontrivial_clusters: p.n_nontrivial(),
            nontrivial_size: p.nontrivial().map(|(_, c)| c.len()).sum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionVerdict {
    /// Label of the detected pattern, or the incoherent label.
    pub label: String,
    pub incoherent: bool,
    pub threshold: f64,
    pub errors: Vec<CandidateError>,
}

/// Applies the detection rules to precomputed mean errors: no candidate
/// below threshold means incoherent; otherwise the below-threshold
/// candidate with most nontrivial clusters wins, then the larger total
/// size of nontrivial clusters, then list order.
pub fn detect_from_errors(errors: Vec<CandidateError>, threshold: f64, incoherent_label: &str) -> Result<DetectionVerdict> {
    if errors.is_empty() {
        return Err(Error::InvalidArgument("no candidate patterns to detect".into()));
    }
    let best = errors
        .iter()
        .enumerate()
        .filter(|(_, e)| e.mean_error < threshold)
        .min_by_key(|(i, e)| (std::cmp::Reverse((e.nontrivial_clusters, e.nontrivial_size)), *i))
        .map(|(_, e)| e.label.clone());
    Ok(DetectionVerdict {
        incoherent: best.is_none(),
        label: best.unwrap_or_else(|| incoherent_label.to_string()),
        threshold,
        errors,
    })
}

/// Detects which candidate pattern a trajectory window sits on.
pub fn detect_pattern(
    traj: &Trajectory,
    window: Range<usize>,
    candidates: &[PatternState],
    layer: Layer,
    threshold: f64,
) -> Result<DetectionVerdict> {
    if window.is_empty() || window.end > traj.len() {
        return Err(Error::InvalidArgument("detection window is empty or out of range".into()));
    }
    let errors = candidates
        .iter()
        .map(|c| {
            if c.partition.n_nontrivial() == 0 {
                return Err(Error::InvalidArgument(format!(
                    "candidate {} has no nontrivial cluster",
                    c.label
                )));
            }
            let sum: f64 = window
                .clone()
                .map(|k| pattern_error_at(traj.row(k), layer, &c.partition))
                .sum();
            Ok(CandidateError::new(c, sum / window.len() as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    detect_from_errors(errors, threshold, &format!("P0_{}", layer.suffix()))
}
