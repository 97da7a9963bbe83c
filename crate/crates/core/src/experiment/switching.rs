//! Single runs with an optional sigma switch-on, verdicts before and after.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::{incoherent_label, Experiment};
use crate::compat::{FailureReason, Invariance};
use crate::dynamics::{integrate, sigma_schedule, DuplexField, Trajectory};
use crate::error::Result;
use crate::measure::{detect_pattern, error_series, DetectionVerdict, SyncErrorSeries};
use crate::quotient::{quotient_matrices, QuotientReport};
use crate::symmetry::{Layer, PatternState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchInfo {
    pub requested: f64,
    /// Step-aligned switch-on time; absent when sigma is on from the start.
    pub effective: Option<f64>,
    pub warning: Option<String>,
}

/// Detection on one time segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentVerdict {
    /// `[start, end)` of the samples averaged.
    pub window: [f64; 2],
    pub bottom: DetectionVerdict,
    pub top: DetectionVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternInvariance {
    pub label: String,
    pub clusters: Vec<Vec<usize>>,
    pub invariant: bool,
    /// Top partitions (1-based clusters) that keep the pattern invariant.
    pub witnesses: Vec<Vec<Vec<usize>>>,
    pub reason: Option<FailureReason>,
}

impl PatternInvariance {
    pub fn new(label: &str, clusters: Vec<Vec<usize>>, inv: Invariance) -> Self {
        let (invariant, witnesses, reason) = match inv {
            Invariance::Invariant { witnesses } => {
                (true, witnesses.iter().map(|w| w.to_one_based()).collect(), None)
            }
            Invariance::NotInvariant(r) => (false, Vec::new(), Some(r)),
        };
        PatternInvariance {
            label: label.to_string(),
            clusters,
            invariant,
            witnesses,
            reason,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchingReport {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub switch: SwitchInfo,
    pub initial_top: Vec<Vec<usize>>,
    pub initial_bottom: Vec<Vec<usize>>,
    pub pre: Option<SegmentVerdict>,
    pub post: SegmentVerdict,
    /// Mean error of the pre-switch bottom verdict over the post-switch
    /// window (absent when there is no pre-switch segment or it was
    /// incoherent).
    pub pre_pattern_post_error: Option<f64>,
    pub expect_pre_met: Option<bool>,
    pub expect_post_met: Option<bool>,
    pub bottom_invariance: Vec<PatternInvariance>,
    pub quotient: QuotientReport,
}

/// Everything a switching run produces.
#[derive(Clone, Debug)]
pub struct SwitchingRun {
    pub trajectory: Trajectory,
    pub bottom_errors: SyncErrorSeries,
    pub top_errors: SyncErrorSeries,
    pub report: SwitchingReport,
}

/// Final `fraction` of the samples in `[t0, t1)`.
pub(crate) fn tail(traj: &Trajectory, t0: f64, t1: f64, fraction: f64) -> Range<usize> {
    let seg = traj.window(t0, t1);
    let n = seg.len();
    let take = ((n as f64 * fraction).ceil() as usize).min(n);
    seg.end - take..seg.end
}

pub(crate) fn window_bounds(traj: &Trajectory, w: &Range<usize>) -> [f64; 2] {
    if w.is_empty() {
        return [f64::NAN, f64::NAN];
    }
    [traj.times[w.start], traj.times[w.end - 1]]
}

pub(crate) fn segment(
    traj: &Trajectory,
    window: Range<usize>,
    bottom: &[PatternState],
    top: &[PatternState],
    threshold: f64,
) -> Result<SegmentVerdict> {
    Ok(SegmentVerdict {
        window: window_bounds(traj, &window),
        bottom: detect_pattern(traj, window.clone(), bottom, Layer::Bottom, threshold)?,
        top: detect_pattern(traj, window, top, Layer::Top, threshold)?,
    })
}

/// Integrates the configured run and detects the bottom and top patterns
/// before and after sigma switches on.
pub fn run_switching(exp: &Experiment) -> Result<SwitchingRun> {
    let cfg = &exp.config;
    let span = cfg.integration.span();
    let (schedule, warning) = sigma_schedule(cfg.coupling.sigma_on, cfg.coupling.sigma, 0.0, span.dt)?;
    let switch_time = schedule.effective_t_on(0.0, span.dt);
    let switched = cfg.coupling.sigma_on > 0.0;

    let (top0, bottom0) = exp.initial_partitions()?;
    let init = exp.initial_state()?;
    let mut field = DuplexField::new(&exp.model, schedule);
    let trajectory = integrate(&mut field, &init, 0.0, &span)?;

    let bottom_c = exp.candidates(Layer::Bottom)?;
    let top_c = exp.candidates(Layer::Top)?;
    let threshold = cfg.detection.threshold;
    let frac = cfg.detection.window_fraction;

    let pre_window = (switched && switch_time > span.transient)
        .then(|| tail(&trajectory, span.transient, switch_time, frac))
        .filter(|w| !w.is_empty());
    let post_start = if switched { switch_time.max(span.transient) } else { span.transient };
    let post_window = tail(&trajectory, post_start, f64::INFINITY, frac);

    let pre = pre_window
        .clone()
        .map(|w| segment(&trajectory, w, &bottom_c, &top_c, threshold))
        .transpose()?;
    let post = segment(&trajectory, post_window.clone(), &bottom_c, &top_c, threshold)?;

    let bottom_errors = error_series(&trajectory, &bottom_c, Layer::Bottom)?;
    let top_errors = error_series(&trajectory, &top_c, Layer::Top)?;

    let pre_pattern_post_error = pre.as_ref().and_then(|p| {
        let idx = bottom_errors.labels.iter().position(|l| *l == p.bottom.label)?;
        let s = &bottom_errors.errors[idx][post_window.clone()];
        Some(s.iter().sum::<f64>() / s.len() as f64)
    });

    let p0 = incoherent_label(Layer::Bottom);
    let label_of = |spec: &str| -> Result<String> {
        if spec == p0 {
            return Ok(p0.clone());
        }
        let p = exp.resolve_pattern(Layer::Bottom, spec)?;
        Ok(exp
            .analysis
            .bottom
            .patterns
            .iter()
            .find(|s| s.partition == p)
            .map(|s| s.label.clone())
            .unwrap_or_else(|| spec.to_string()))
    };
    let expect_pre_met = match (&cfg.detection.expect_pre, &pre) {
        (Some(e), Some(p)) => Some(label_of(e)? == p.bottom.label),
        (Some(_), None) => Some(false),
        _ => None,
    };
    let expect_post_met = cfg
        .detection
        .expect_post
        .as_ref()
        .map(|e| label_of(e).map(|l| l == post.bottom.label))
        .transpose()?;

    let bottom_invariance = exp
        .analysis
        .bottom
        .patterns
        .iter()
        .map(|p| {
            Ok(PatternInvariance::new(
                &p.label,
                p.partition.to_one_based(),
                exp.invariance(&p.partition)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let quotient = quotient_matrices(exp.duplex(), &exp.analysis.duplex_clusters())?.report();

    let report = SwitchingReport {
        config: cfg.clone(),
        seed: cfg.integration.seed,
        switch: SwitchInfo {
            requested: cfg.coupling.sigma_on,
            effective: switched.then_some(switch_time),
            warning,
        },
        initial_top: top0.to_one_based(),
        initial_bottom: bottom0.to_one_based(),
        pre,
        post,
        pre_pattern_post_error,
        expect_pre_met,
        expect_post_met,
        bottom_invariance,
        quotient,
    };
    Ok(SwitchingRun {
        trajectory,
        bottom_errors,
        top_errors,
        report,
    })
}
