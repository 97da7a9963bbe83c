//! Config-driven experiments: switching runs, pathway searches, Lyapunov
//! analyses and stability sweeps, plus their file outputs.

pub mod analysis;
pub mod config;
pub mod output;
pub mod pathways;
pub mod presets;
pub mod switching;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::compat::{CompatAnalysis, DuplexClusters, Invariance};
use crate::dynamics::{cluster_bases, pattern_initial_condition, DuplexModel, NodeModel};
use crate::error::{Error, Result};
use crate::symmetry::{orbit_partition, Layer, Partition, PatternCatalogue, PatternState};
use crate::topology::{build_duplex, build_graph, DuplexTopology};

pub use analysis::{compat_report, lyapunov_report, patterns_report, sweep, CompatReport, LyapunovReport, PatternsReport, SweepReport};
pub use config::{ExperimentConfig, Overrides};
pub use pathways::{find_pathways, PathwaysReport, TransitionEdge, TransitionGraph};
pub use switching::{run_switching, SegmentVerdict, SwitchingReport, SwitchingRun};

/// Label of the incoherent state of a layer.
pub fn incoherent_label(layer: Layer) -> String {
    format!("P0_{}", layer.suffix())
}

/// A validated config with its topology, model and symmetry data.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub analysis: CompatAnalysis,
    pub model: DuplexModel,
}

fn config_err(context: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Config(_) => e,
        other => Error::Config(format!("{context}: {other}")),
    }
}

fn build_topology(config: &ExperimentConfig) -> Result<DuplexTopology> {
    let t = &config.topology;
    if let Some(name) = &t.preset {
        return presets::preset(name)?.duplex();
    }
    let n = t.n_nodes.unwrap_or(0);
    let top = build_graph(n, t.top_edges.as_deref().unwrap_or(&[])).map_err(config_err("topology.top_edges"))?;
    let bottom =
        build_graph(n, t.bottom_edges.as_deref().unwrap_or(&[])).map_err(config_err("topology.bottom_edges"))?;
    build_duplex(top, bottom, t.kappa.as_deref().unwrap_or(&[])).map_err(config_err("topology.kappa"))
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let duplex = build_topology(&config)?;
        let analysis = CompatAnalysis::new(&duplex).map_err(config_err("topology"))?;
        let model = DuplexModel::new(
            duplex,
            config.coupling.strengths()?,
            NodeModel::HindmarshRose(config.hr_top),
            NodeModel::HindmarshRose(config.hr_bottom),
            config.coupling.inter_matrix(),
        );
        let exp = Experiment {
            config,
            analysis,
            model,
        };
        exp.check_references()?;
        Ok(exp)
    }

    pub fn from_path(path: &std::path::Path, overrides: &Overrides) -> Result<Self> {
        let mut config = ExperimentConfig::load(path)?;
        config.apply(overrides)?;
        Self::new(config)
    }

    pub fn duplex(&self) -> &DuplexTopology {
        &self.model.duplex
    }

    pub fn n_nodes(&self) -> usize {
        self.model.n_nodes()
    }

    pub fn catalogue(&self, layer: Layer) -> &PatternCatalogue {
        match layer {
            Layer::Top => &self.analysis.top,
            Layer::Bottom => &self.analysis.bottom,
        }
    }

    /// A catalogue label such as `P2_B` or a letter string such as
    /// `abcdd`.
    pub fn resolve_pattern(&self, layer: Layer, spec: &str) -> Result<Partition> {
        let cat = self.catalogue(layer);
        if let Some(p) = cat.find(spec) {
            return Ok(p.partition.clone());
        }
        let n = self.n_nodes();
        if spec.len() == n && spec.chars().all(|c| c.is_ascii_lowercase()) {
            return Ok(Partition::from_letters(spec));
        }
        Err(Error::Config(format!(
            "{spec:?} is neither a {} catalogue label nor a {n}-letter pattern",
            match layer {
                Layer::Top => "top",
                Layer::Bottom => "bottom",
            }
        )))
    }

    fn pattern_state(&self, layer: Layer, spec: &str) -> Result<PatternState> {
        let partition = self.resolve_pattern(layer, spec)?;
        let label = self
            .catalogue(layer)
            .patterns
            .iter()
            .find(|p| p.partition == partition)
            .map(|p| p.label.clone())
            .unwrap_or_else(|| spec.to_string());
        Ok(PatternState {
            label,
            layer,
            partition,
        })
    }

    /// Nontrivial candidate patterns for detection.
    pub fn candidates(&self, layer: Layer) -> Result<Vec<PatternState>> {
        match (&self.config.detection.candidates, layer) {
            (Some(labels), Layer::Bottom) => labels
                .iter()
                .map(|l| {
                    let p = self.pattern_state(Layer::Bottom, l)?;
                    if p.partition.n_nontrivial() == 0 {
                        return Err(Error::Config(format!("candidate {l} has no nontrivial cluster")));
                    }
                    Ok(p)
                })
                .collect(),
            _ => Ok(self
                .catalogue(layer)
                .patterns
                .iter()
                .filter(|p| p.partition.n_nontrivial() > 0)
                .cloned()
                .collect()),
        }
    }

    /// Top and bottom partitions for the initial condition.
    pub fn initial_partitions(&self) -> Result<(Partition, Partition)> {
        let i = &self.config.integration;
        let top = match &i.initial_top {
            Some(s) => self.resolve_pattern(Layer::Top, s)?,
            None => orbit_partition(&self.analysis.top.group),
        };
        let bottom = match &i.initial_bottom {
            Some(s) => self.resolve_pattern(Layer::Bottom, s)?,
            None => self.analysis.duplex_clusters().bottom,
        };
        Ok((top, bottom))
    }

    /// Flat initial state near the initial partitions, reproducible from
    /// the seed.
    pub fn initial_state(&self) -> Result<Vec<f64>> {
        let (top, bottom) = self.initial_partitions()?;
        let i = &self.config.integration;
        let mut rng = ChaCha8Rng::seed_from_u64(i.seed);
        let tb = cluster_bases(top.n_clusters(), &mut rng);
        let bb = cluster_bases(bottom.n_clusters(), &mut rng);
        let x = pattern_initial_condition(&top, &tb, i.epsilon, &mut rng)?;
        let y = pattern_initial_condition(&bottom, &bb, i.epsilon, &mut rng)?;
        Ok(x.into_iter().chain(y).flatten().collect())
    }

    /// Invariance of a bottom pattern, with the incoherent label treated
    /// as trivially invariant.
    pub fn invariance(&self, bottom: &Partition) -> Result<Invariance> {
        self.analysis.invariance(bottom)
    }

    /// The duplex pattern used to analyse a bottom pattern: the witness
    /// top partition with the fewest clusters.
    pub fn duplex_pattern(&self, bottom: &Partition) -> Result<DuplexClusters> {
        match self.invariance(bottom)? {
            Invariance::Invariant { witnesses } => {
                let top = witnesses
                    .into_iter()
                    .min_by_key(|w| w.n_clusters())
                    .expect("invariant patterns have a witness");
                DuplexClusters::new(top, bottom.clone())
            }
            Invariance::NotInvariant(reason) => Err(Error::Config(format!(
                "bottom pattern {bottom} is not invariant: {reason:?}"
            ))),
        }
    }

    fn check_references(&self) -> Result<()> {
        self.initial_partitions()?;
        self.candidates(Layer::Bottom)?;
        let d = &self.config.detection;
        let p0 = incoherent_label(Layer::Bottom);
        for (what, label) in [("detection.expect_pre", &d.expect_pre), ("detection.expect_post", &d.expect_post)] {
            let Some(label) = label else { continue };
            if *label == p0 {
                continue;
            }
            let p = self.resolve_pattern(Layer::Bottom, label).map_err(config_err(what))?;
            if what == "detection.expect_post" {
                let inv = self.invariance(&p).map_err(config_err(what))?;
                if !inv.is_invariant() {
                    return Err(Error::Config(format!(
                        "{what}: {label} is not invariant under the configured duplex"
                    )));
                }
            }
        }
        if let Some(lp) = &self.config.lyapunov.pattern {
            let p = self.resolve_pattern(Layer::Bottom, lp)?;
            self.duplex_pattern(&p)?;
        }
        if let Some(s) = &self.config.sweep {
            for l in s.patterns.iter().flatten() {
                let p = self.resolve_pattern(Layer::Bottom, l)?;
                self.duplex_pattern(&p)?;
            }
        }
        if let Some(pw) = &self.config.pathways {
            for l in pw.prepare.keys() {
                if *l != p0 {
                    self.resolve_pattern(Layer::Bottom, l)?;
                }
            }
        }
        Ok(())
    }
}
