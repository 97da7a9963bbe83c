//! Reports for the symmetry, Lyapunov and sweep subcommands.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::switching::PatternInvariance;
use super::Experiment;
use crate::compat::complete_sync_excluded;
use crate::error::Result;
use crate::quotient::{quotient_matrices, QuotientReport};
use crate::stability::{stability_map, transverse_lyapunov, ClusterExponents, MapPattern, StabilityMap};
use crate::symmetry::{Layer, Partition, PatternCatalogue};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternEntry {
    pub label: String,
    pub letters: String,
    pub clusters: Vec<Vec<usize>>,
    /// Orders of the subgroups whose orbits give this pattern.
    pub realizer_orders: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerPatterns {
    pub layer: Layer,
    pub group_order: usize,
    pub generators: Vec<String>,
    pub patterns: Vec<PatternEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternsReport {
    pub config: ExperimentConfig,
    pub top: LayerPatterns,
    pub bottom: LayerPatterns,
}

fn layer_patterns(cat: &PatternCatalogue) -> LayerPatterns {
    // Non-identity elements in cycle notation; groups here are small.
    let generators = cat.group.elements().iter().filter(|p| !p.is_identity()).map(|p| p.to_string()).collect();
    LayerPatterns {
        layer: cat.layer,
        group_order: cat.group.order(),
        generators,
        patterns: cat
            .patterns
            .iter()
            .zip(&cat.realizers)
            .map(|(p, r)| PatternEntry {
                label: p.label.clone(),
                letters: p.partition.letters(),
                clusters: p.partition.to_one_based(),
                realizer_orders: r.iter().map(|&k| cat.subgroups[k].order()).collect(),
            })
            .collect(),
    }
}

pub fn patterns_report(exp: &Experiment) -> PatternsReport {
    PatternsReport {
        config: exp.config.clone(),
        top: layer_patterns(&exp.analysis.top),
        bottom: layer_patterns(&exp.analysis.bottom),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub top: Vec<String>,
    pub bottom: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatReport {
    pub config: ExperimentConfig,
    pub h_top_order: usize,
    pub h_bottom_order: usize,
    pub classes: Vec<ClassEntry>,
    pub duplex_top: Vec<Vec<usize>>,
    pub duplex_bottom: Vec<Vec<usize>>,
    pub count_bound_holds: bool,
    pub complete_sync_excluded: bool,
    pub bottom_patterns: Vec<PatternInvariance>,
    pub quotient: QuotientReport,
}

pub fn compat_report(exp: &Experiment) -> Result<CompatReport> {
    let a = &exp.analysis;
    let d = a.duplex_clusters();
    let bottom_patterns = a
        .bottom
        .patterns
        .iter()
        .map(|p| {
            Ok(PatternInvariance::new(
                &p.label,
                p.partition.to_one_based(),
                a.invariance(&p.partition)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CompatReport {
        config: exp.config.clone(),
        h_top_order: a.classes.h_top.order(),
        h_bottom_order: a.classes.h_bottom.order(),
        classes: a
            .classes
            .classes
            .iter()
            .map(|c| ClassEntry {
                top: c.top.iter().map(|p| p.to_string()).collect(),
                bottom: c.bottom.iter().map(|p| p.to_string()).collect(),
            })
            .collect(),
        duplex_top: d.top.to_one_based(),
        duplex_bottom: d.bottom.to_one_based(),
        count_bound_holds: d.satisfies_count_bound(),
        complete_sync_excluded: complete_sync_excluded(exp.duplex()),
        bottom_patterns,
        quotient: quotient_matrices(exp.duplex(), &d)?.report(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub config: ExperimentConfig,
    pub pattern: String,
    pub top_clusters: Vec<Vec<usize>>,
    pub bottom_clusters: Vec<Vec<usize>>,
    pub quotient: QuotientReport,
    pub exponents: ClusterExponents,
}

fn label_for(exp: &Experiment, p: &Partition) -> String {
    exp.analysis
        .bottom
        .patterns
        .iter()
        .find(|s| s.partition == *p)
        .map(|s| s.label.clone())
        .unwrap_or_else(|| p.letters())
}

/// Transverse exponents of the configured bottom pattern (the duplex
/// clusters by default) at the configured couplings.
pub fn lyapunov_report(exp: &Experiment) -> Result<LyapunovReport> {
    let clusters = match &exp.config.lyapunov.pattern {
        Some(spec) => exp.duplex_pattern(&exp.resolve_pattern(Layer::Bottom, spec)?)?,
        None => exp.analysis.duplex_clusters(),
    };
    let exponents = transverse_lyapunov(&exp.model, &clusters, &exp.config.lyapunov_settings())?;
    Ok(LyapunovReport {
        config: exp.config.clone(),
        pattern: label_for(exp, &clusters.bottom),
        top_clusters: clusters.top.to_one_based(),
        bottom_clusters: clusters.bottom.to_one_based(),
        quotient: quotient_matrices(exp.duplex(), &clusters)?.report(),
        exponents,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPattern {
    pub label: String,
    pub bottom_clusters: Vec<Vec<usize>>,
    pub top_clusters: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: ExperimentConfig,
    pub patterns: Vec<SweepPattern>,
    pub map: StabilityMap,
}

/// Stability map over the configured `(alpha, sigma)` grid for every
/// selected invariant bottom pattern with a nontrivial cluster.
pub fn sweep(exp: &Experiment) -> Result<SweepReport> {
    let spec = exp
        .config
        .sweep
        .as_ref()
        .ok_or_else(|| crate::error::Error::Config("the sweep section is missing".into()))?;
    let bottoms: Vec<Partition> = match &spec.patterns {
        Some(labels) => labels
            .iter()
            .map(|l| exp.resolve_pattern(Layer::Bottom, l))
            .collect::<Result<_>>()?,
        None => exp
            .analysis
            .invariant_bottom_patterns()?
            .into_iter()
            .filter(|(p, _)| p.partition.n_nontrivial() > 0)
            .map(|(p, _)| p.partition.clone())
            .collect(),
    };
    let patterns = bottoms
        .iter()
        .map(|b| {
            Ok(MapPattern {
                label: label_for(exp, b),
                clusters: exp.duplex_pattern(b)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let map = stability_map(
        &exp.model,
        &patterns,
        &spec.alphas,
        &spec.sigmas,
        &exp.config.lyapunov_settings(),
    )?;
    Ok(SweepReport {
        config: exp.config.clone(),
        patterns: patterns
            .iter()
            .map(|p| SweepPattern {
                label: p.label.clone(),
                bottom_clusters: p.clusters.bottom.to_one_based(),
                top_clusters: p.clusters.top.to_one_based(),
            })
            .collect(),
        map,
    })
}
