//! JSON experiment configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{HRParams, InterCouplingMatrix, IntegrationSpan, Mat3};
use crate::error::{Error, Result};
use crate::stability::LyapunovSettings;
use crate::topology::CouplingStrengths;

/// Graphs and inter-layer coupling, either a named preset or explicit.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_nodes: Option<usize>,
    /// 1-based undirected edges.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_edges: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bottom_edges: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    /// Time at which `sigma` switches on; zero means always on.
    #[serde(default)]
    pub sigma_on: f64,
    /// Inter-layer coupling matrix; defaults to the second component only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inter_matrix: Option<Mat3>,
}

impl CouplingSpec {
    pub fn strengths(&self) -> Result<CouplingStrengths> {
        CouplingStrengths::new(self.alpha, self.beta, self.sigma).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn inter_matrix(&self) -> InterCouplingMatrix {
        self.inter_matrix.map(InterCouplingMatrix).unwrap_or_default()
    }
}

fn default_dt() -> f64 {
    0.01
}
fn default_transient() -> f64 {
    1000.0
}
fn default_t_end() -> f64 {
    3000.0
}
fn default_stride() -> usize {
    10
}
fn default_epsilon() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSpec {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_transient")]
    pub transient: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub seed: u64,
    /// Half-width of the uniform within-cluster spread of initial states.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Initial top pattern: a catalogue label or a letter string. Defaults
    /// to the top clusters of the duplex symmetry group.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_top: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_bottom: Option<String>,
}

impl Default for IntegrationSpec {
    fn default() -> Self {
        IntegrationSpec {
            dt: default_dt(),
            transient: default_transient(),
            t_end: default_t_end(),
            stride: default_stride(),
            seed: 0,
            epsilon: default_epsilon(),
            initial_top: None,
            initial_bottom: None,
        }
    }
}

impl IntegrationSpec {
    pub fn span(&self) -> IntegrationSpan {
        IntegrationSpan {
            dt: self.dt,
            t_end: self.t_end,
            transient: self.transient,
            stride: self.stride,
        }
    }
}

fn default_threshold() -> f64 {
    crate::measure::DEFAULT_THRESHOLD
}
fn default_window() -> f64 {
    crate::measure::DEFAULT_WINDOW_FRACTION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSpec {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Fraction of each recorded segment used for detection.
    #[serde(default = "default_window")]
    pub window_fraction: f64,
    /// Bottom candidate labels; all nontrivial catalogued patterns if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<String>>,
    /// Expected verdict before the switch, checked and reported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_pre: Option<String>,
    /// Expected verdict after the switch; must be an invariant pattern or
    /// the incoherent label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_post: Option<String>,
}

impl Default for DetectionSpec {
    fn default() -> Self {
        DetectionSpec {
            threshold: default_threshold(),
            window_fraction: default_window(),
            candidates: None,
            expect_pre: None,
            expect_post: None,
        }
    }
}

fn default_horizon() -> f64 {
    5000.0
}
fn default_renorm() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSpec {
    #[serde(default = "default_transient")]
    pub transient: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_renorm")]
    pub renorm_interval: f64,
    /// Bottom pattern to analyse; the duplex clusters if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
}

impl Default for LyapunovSpec {
    fn default() -> Self {
        LyapunovSpec {
            transient: default_transient(),
            horizon: default_horizon(),
            renorm_interval: default_renorm(),
            pattern: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub alphas: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// Bottom pattern labels; every invariant nontrivial pattern if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patterns: Option<Vec<String>>,
}

fn default_switch_time() -> f64 {
    1500.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathwaySpec {
    /// `(alpha, sigma)` that drives the bottom layer into each source
    /// pattern, keyed by label.
    pub prepare: BTreeMap<String, [f64; 2]>,
    /// `(alpha, sigma)` values tried after the switch.
    pub candidates: Vec<[f64; 2]>,
    /// End of the preparation stage; the second stage runs to `t_end`.
    #[serde(default = "default_switch_time")]
    pub switch_time: f64,
    /// Half-width of the uniform kick added to every state component at
    /// the switch. Exactly synchronized nodes stay bitwise equal under
    /// identical equations, so without it an unstable cluster never splits.
    #[serde(default = "default_kick")]
    pub kick: f64,
}

fn default_kick() -> f64 {
    1e-6
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    /// File name stem; the config name if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
    #[serde(default = "yes")]
    pub trajectory: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: default_out_dir(),
            prefix: None,
            trajectory: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub topology: TopologySpec,
    pub hr_top: HRParams,
    pub hr_bottom: HRParams,
    pub coupling: CouplingSpec,
    #[serde(default)]
    pub integration: IntegrationSpec,
    #[serde(default)]
    pub detection: DetectionSpec,
    #[serde(default)]
    pub lyapunov: LyapunovSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pathways: Option<PathwaySpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
    pub seed: Option<u64>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be non-negative and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(a) = o.alpha {
            self.coupling.alpha = a;
        }
        if let Some(s) = o.sigma {
            self.coupling.sigma = s;
        }
        if let Some(seed) = o.seed {
            self.integration.seed = seed;
        }
        self.validate()
    }

    /// Schema checks that do not need the topology.
    pub fn validate(&self) -> Result<()> {
        let t = &self.topology;
        let explicit = t.n_nodes.is_some() || t.top_edges.is_some() || t.bottom_edges.is_some() || t.kappa.is_some();
        match (&t.preset, explicit) {
            (Some(_), true) => {
                return Err(Error::Config(
                    "topology: give either a preset or explicit graphs, not both".into(),
                ))
            }
            (None, false) => return Err(Error::Config("topology: missing preset or explicit graphs".into())),
            (None, true) => {
                if t.n_nodes.is_none() || t.top_edges.is_none() || t.bottom_edges.is_none() || t.kappa.is_none() {
                    return Err(Error::Config(
                        "topology: explicit graphs need n_nodes, top_edges, bottom_edges and kappa".into(),
                    ));
                }
            }
            (Some(_), false) => {}
        }
        self.hr_top.validate().map_err(|e| Error::Config(format!("hr_top: {e}")))?;
        self.hr_bottom.validate().map_err(|e| Error::Config(format!("hr_bottom: {e}")))?;
        self.coupling.strengths()?;
        non_negative("coupling.sigma_on", self.coupling.sigma_on)?;
        if let Some(m) = &self.coupling.inter_matrix {
            if m.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Config("coupling.inter_matrix must be finite".into()));
            }
        }

        let i = &self.integration;
        positive("integration.dt", i.dt)?;
        non_negative("integration.transient", i.transient)?;
        non_negative("integration.epsilon", i.epsilon)?;
        if !(i.t_end.is_finite() && i.t_end > i.transient) {
            return Err(Error::Config(format!(
                "integration.t_end ({}) must exceed integration.transient ({})",
                i.t_end, i.transient
            )));
        }
        if i.stride == 0 {
            return Err(Error::Config("integration.stride must be at least 1".into()));
        }

        let d = &self.detection;
        positive("detection.threshold", d.threshold)?;
        if !(d.window_fraction > 0.0 && d.window_fraction <= 1.0) {
            return Err(Error::Config("detection.window_fraction must lie in (0, 1]".into()));
        }

        let l = &self.lyapunov;
        non_negative("lyapunov.transient", l.transient)?;
        positive("lyapunov.horizon", l.horizon)?;
        if !(l.renorm_interval.is_finite() && l.renorm_interval >= i.dt) {
            return Err(Error::Config("lyapunov.renorm_interval must be at least integration.dt".into()));
        }

        if let Some(s) = &self.sweep {
            for (name, axis) in [("sweep.alphas", &s.alphas), ("sweep.sigmas", &s.sigmas)] {
                if axis.is_empty() || axis.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config(format!("{name} must be nonempty and strictly increasing")));
                }
                for &v in axis.iter() {
                    non_negative(name, v)?;
                }
            }
        }
        if let Some(p) = &self.pathways {
            if !(p.switch_time > i.transient && p.switch_time < i.t_end) {
                return Err(Error::Config(
                    "pathways.switch_time must lie between integration.transient and integration.t_end".into(),
                ));
            }
            for &[a, s] in p.prepare.values().chain(p.candidates.iter()) {
                non_negative("pathways alpha", a)?;
                non_negative("pathways sigma", s)?;
            }
            non_negative("pathways.kick", p.kick)?;
        }
        Ok(())
    }

    pub fn lyapunov_settings(&self) -> LyapunovSettings {
        LyapunovSettings {
            dt: self.integration.dt,
            transient: self.lyapunov.transient,
            horizon: self.lyapunov.horizon,
            renorm_interval: self.lyapunov.renorm_interval,
            seed: self.integration.seed,
        }
    }

    pub fn file_stem(&self) -> String {
        self.output
            .prefix
            .clone()
            .filter(|s| !s.is_empty())
            .or_else(|| Some(self.name.clone()).filter(|s| !s.is_empty()))
            .unwrap_or_else(|| "run".to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "topology": {"preset": "five_node_switching"},
        "hr_top": {"I": 3.2, "r": 0.01},
        "hr_bottom": {"I": 3.27, "r": 0.01},
        "coupling": {"alpha": 0.225, "beta": 0.3, "sigma": 0.5, "sigma_on": 1500}
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.integration.dt, 0.01);
        assert_eq!(c.integration.stride, 10);
        assert_eq!(c.detection.threshold, 1e-3);
        assert_eq!(c.hr_top.a, 1.0);
        assert_eq!(c.file_stem(), "run");
    }

    #[test]
    fn round_trip() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        let again = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn schema_errors() {
        let bad = MINIMAL.replace("\"sigma\": 0.5", "\"sigma\": -0.5");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(Error::Config(_))));
        let unknown = MINIMAL.replace("\"beta\"", "\"gamma\": 1, \"beta\"");
        assert!(matches!(ExperimentConfig::from_json(&unknown), Err(Error::Config(_))));
        let both = MINIMAL.replace("\"preset\": \"five_node_switching\"", "\"preset\": \"x\", \"n_nodes\": 3");
        assert!(matches!(ExperimentConfig::from_json(&both), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_json("{"), Err(Error::Config(_))));
    }

    #[test]
    fn overrides() {
        let mut c = ExperimentConfig::from_json(MINIMAL).unwrap();
        c.apply(&Overrides {
            alpha: Some(0.1),
            sigma: None,
            seed: Some(9),
        })
        .unwrap();
        assert_eq!(c.coupling.alpha, 0.1);
        assert_eq!(c.coupling.sigma, 0.5);
        assert_eq!(c.integration.seed, 9);
        assert!(c
            .apply(&Overrides {
                alpha: Some(f64::NAN),
                ..Default::default()
            })
            .is_err());
    }
}
