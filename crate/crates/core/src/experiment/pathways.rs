//! Transition pathways between bottom patterns: prepare the bottom layer
//! in a source pattern, switch the couplings, detect where it lands.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::switching::tail;
use super::{incoherent_label, Experiment};
use crate::dynamics::{integrate, DuplexField, IntegrationSpan};
use crate::error::{Error, Result};
use crate::measure::detect_pattern;
use crate::symmetry::{Layer, PatternState};
use crate::topology::CouplingStrengths;

/// Observed transition with the switched-to couplings that caused it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionEdge {
    pub from: String,
    pub to: String,
    pub alpha: f64,
    pub sigma: f64,
}

/// Outcome of preparing one source pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preparation {
    pub source: String,
    pub alpha: f64,
    pub sigma: f64,
    /// Bottom verdict at the end of the preparation stage.
    pub reached: String,
}

/// One second-stage run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub from: String,
    pub alpha: f64,
    pub sigma: f64,
    pub reached: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionGraph {
    pub nodes: Vec<String>,
    /// At most one edge per ordered pair: the first candidate, in list
    /// order, that produced it.
    pub edges: Vec<TransitionEdge>,
    /// Ordered pairs with no observed transition.
    pub missing: Vec<[String; 2]>,
    pub preparations: Vec<Preparation>,
    pub attempts: Vec<Attempt>,
}

impl TransitionGraph {
    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges.iter().any(|e| e.from == from && e.to == to)
    }

    pub fn is_complete(&self) -> bool {
        self.missing.is_empty()
    }
}

/// Report for the `pathways` subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathwaysReport {
    pub config: ExperimentConfig,
    pub graph: TransitionGraph,
}

fn strengths(beta: f64, [alpha, sigma]: [f64; 2]) -> Result<CouplingStrengths> {
    CouplingStrengths::new(alpha, beta, sigma)
}

/// Searches the configured candidate couplings for transitions between
/// every ordered pair of bottom patterns (incoherent state included).
pub fn find_pathways(exp: &Experiment) -> Result<TransitionGraph> {
    let cfg = &exp.config;
    let spec = cfg
        .pathways
        .as_ref()
        .ok_or_else(|| Error::Config("the pathways section is missing".into()))?;
    let p0 = incoherent_label(Layer::Bottom);
    let candidates: Vec<PatternState> = exp.candidates(Layer::Bottom)?;
    let mut nodes = vec![p0.clone()];
    nodes.extend(candidates.iter().map(|c| c.label.clone()));

    let threshold = cfg.detection.threshold;
    let frac = cfg.detection.window_fraction;
    let dt = cfg.integration.dt;
    let beta = cfg.coupling.beta;
    let init = exp.initial_state()?;
    let stage1 = IntegrationSpan {
        dt,
        t_end: spec.switch_time,
        transient: cfg.integration.transient,
        stride: cfg.integration.stride,
    };

    let sources: Vec<(String, [f64; 2])> = nodes
        .iter()
        .filter_map(|n| spec.prepare.get(n).map(|p| (n.clone(), *p)))
        .collect();

    let prepared = sources
        .par_iter()
        .map(|(label, params)| {
            let model = exp.model.with_strengths(strengths(beta, *params)?);
            let traj = integrate(&mut DuplexField::constant(&model), &init, 0.0, &stage1)?;
            let w = tail(&traj, stage1.transient, stage1.t_end + dt, frac);
            let verdict = detect_pattern(&traj, w, &candidates, Layer::Bottom, threshold)?;
            Ok((
                Preparation {
                    source: label.clone(),
                    alpha: params[0],
                    sigma: params[1],
                    reached: verdict.label,
                },
                traj.final_state,
                traj.final_time,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..prepared.len())
        .filter(|&s| prepared[s].0.reached == prepared[s].0.source)
        .flat_map(|s| (0..spec.candidates.len()).map(move |c| (s, c)))
        .collect();

    let attempts = jobs
        .par_iter()
        .map(|&(s, c)| {
            let (prep, state, t0) = &prepared[s];
            let params = spec.candidates[c];
            let model = exp.model.with_strengths(strengths(beta, params)?);
            let span = IntegrationSpan {
                dt,
                t_end: cfg.integration.t_end,
                transient: *t0,
                stride: cfg.integration.stride,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.integration.seed);
            rng.set_stream((s * spec.candidates.len() + c) as u64);
            let kicked: Vec<f64> = state
                .iter()
                .map(|v| v + spec.kick * rng.gen_range(-1.0..=1.0))
                .collect();
            let traj = integrate(&mut DuplexField::constant(&model), &kicked, *t0, &span)?;
            let w = tail(&traj, *t0, f64::INFINITY, frac);
            let verdict = detect_pattern(&traj, w, &candidates, Layer::Bottom, threshold)?;
            Ok(Attempt {
                from: prep.source.clone(),
                alpha: params[0],
                sigma: params[1],
                reached: verdict.label,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut edges: Vec<TransitionEdge> = Vec::new();
    for a in &attempts {
        if a.reached != a.from && !edges.iter().any(|e| e.from == a.from && e.to == a.reached) {
            edges.push(TransitionEdge {
                from: a.from.clone(),
                to: a.reached.clone(),
                alpha: a.alpha,
                sigma: a.sigma,
            });
        }
    }
    let order = |l: &str| nodes.iter().position(|n| n == l).unwrap_or(usize::MAX);
    edges.sort_by_key(|e| (order(&e.from), order(&e.to)));
    let missing = nodes
        .iter()
        .flat_map(|f| nodes.iter().map(move |t| (f, t)))
        .filter(|(f, t)| f != t && !edges.iter().any(|e| &e.from == *f && &e.to == *t))
        .map(|(f, t)| [f.clone(), t.clone()])
        .collect();

    Ok(TransitionGraph {
        nodes,
        edges,
        missing,
        preparations: prepared.into_iter().map(|(p, _, _)| p).collect(),
        attempts,
    })
}
