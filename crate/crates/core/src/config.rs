//! Experiment configuration: a human-editable TOML document with defaults
//! matching the reference experiment settings.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::WeightingPolicy;
use crate::graph::GraphSpec;
use crate::lms::{LmsConfig, NoiseProfile};
use crate::marl::{CombinationScope, DivergenceMode, LearningParams, VotingConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("config kind is `{kind}` but the `[{block}]` block is for a different kind")]
    KindMismatch { kind: ExperimentKind, block: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Paths,
    Diffusion,
    Marl,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExperimentKind::Paths => "paths",
            ExperimentKind::Diffusion => "diffusion",
            ExperimentKind::Marl => "marl",
        })
    }
}

/// Top-level experiment configuration. Unknown keys are rejected everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<PathsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<DiffusionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marl: Option<MarlConfig>,
}

/// Path-count experiment: a grid of graph sizes, link probabilities and walk
/// lengths compared formula-vs-Monte-Carlo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub n_nodes: Vec<usize>,
    pub link_probability: Vec<f64>,
    pub lengths: Vec<usize>,
    pub trials: u64,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            n_nodes: vec![6, 10, 20],
            link_probability: vec![0.3, 0.5, 1.0],
            lengths: vec![1, 2, 3],
            trials: 100_000,
        }
    }
}

impl PathsConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_nodes.is_empty() || self.n_nodes.iter().any(|&n| n < 2) {
            return Err(invalid("paths.n_nodes", "need at least one value, all >= 2"));
        }
        if self.link_probability.is_empty()
            || self.link_probability.iter().any(|p| !(0.0..=1.0).contains(p))
        {
            return Err(invalid(
                "paths.link_probability",
                "need at least one value, all in [0, 1]",
            ));
        }
        if self.lengths.is_empty() || self.lengths.iter().any(|&k| k < 1) {
            return Err(invalid("paths.lengths", "need at least one value, all >= 1"));
        }
        if self.trials < 1 {
            return Err(invalid("paths.trials", "must be >= 1"));
        }
        Ok(())
    }
}

/// Diffusion LMS experiment. Defaults reproduce the dense-graph reference
/// run: L=100, sparsity 0.5, mu=0.001, T_a=10, sigma=0.04 with a 10^2-noisier
/// node and soft weighting (zeta=0.015, e=8).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionConfig {
    pub n_nodes: usize,
    pub link_probability: f64,
    pub signal_length: usize,
    pub sparsity: f64,
    pub step_size: f64,
    pub adaptation_window: usize,
    pub iterations: usize,
    pub zeta: f64,
    pub exponent: f64,
    pub sigma_noise: f64,
    pub impaired: bool,
    pub impaired_node: usize,
    pub impaired_exponent: f64,
    pub n_simulations: usize,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            n_nodes: 10,
            link_probability: 1.0,
            signal_length: 100,
            sparsity: 0.5,
            step_size: 0.001,
            adaptation_window: 10,
            iterations: 2000,
            zeta: 0.015,
            exponent: 8.0,
            sigma_noise: 0.04,
            impaired: true,
            impaired_node: 0,
            impaired_exponent: 2.0,
            n_simulations: 1000,
        }
    }
}

impl DiffusionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_nodes < 2 {
            return Err(invalid("diffusion.n_nodes", "must be >= 2"));
        }
        if !(0.0..=1.0).contains(&self.link_probability) {
            return Err(invalid("diffusion.link_probability", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return Err(invalid("diffusion.sparsity", "must lie in [0, 1]"));
        }
        if !(self.step_size > 0.0) {
            return Err(invalid("diffusion.step_size", "must be > 0"));
        }
        if self.adaptation_window < 1 {
            return Err(invalid("diffusion.adaptation_window", "must be >= 1"));
        }
        if self.iterations < 1 {
            return Err(invalid("diffusion.iterations", "must be >= 1"));
        }
        if self.n_simulations < 1 {
            return Err(invalid("diffusion.n_simulations", "must be >= 1"));
        }
        if !(self.zeta > 0.0) {
            return Err(invalid("diffusion.zeta", "must be > 0"));
        }
        if !(self.exponent >= 0.0) {
            return Err(invalid("diffusion.exponent", "must be >= 0"));
        }
        if !(self.sigma_noise >= 0.0) {
            return Err(invalid("diffusion.sigma_noise", "must be >= 0"));
        }
        if self.impaired && self.impaired_node >= self.n_nodes {
            return Err(invalid("diffusion.impaired_node", "out of range"));
        }
        Ok(())
    }

    pub fn to_lms_config(&self) -> LmsConfig {
        LmsConfig {
            graph_spec: GraphSpec::new(self.n_nodes, self.link_probability)
                .expect("validated spec"),
            signal_length: self.signal_length,
            sparsity: self.sparsity,
            step_size: self.step_size,
            adaptation_window: self.adaptation_window,
            iterations: self.iterations,
            weighting: WeightingPolicy::new(self.zeta, self.exponent).expect("validated policy"),
            noise: NoiseProfile {
                sigma_noise: self.sigma_noise,
                impaired_node: self.impaired.then_some(self.impaired_node),
                impaired_exponent: self.impaired_exponent,
            },
            n_simulations: self.n_simulations,
        }
    }
}

/// Multi-agent Q-learning experiment. Defaults match the reference case-1
/// column: 3 agents, alpha=0.8, gamma=0.97, lambda=0.7, 10^6 episodes,
/// max 1000 steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarlConfig {
    pub n_agents: usize,
    pub broken_agent: usize,
    pub n_episodes: usize,
    pub max_steps: usize,
    pub learning_rate: f64,
    pub discount: f64,
    pub eps_min: f64,
    pub eps_max: f64,
    pub decay_rate: f64,
    pub lambda: f64,
    pub window: usize,
    pub corruption_kappa: f64,
    pub divergence: DivergenceMode,
    pub scope: CombinationScope,
    pub eval_episodes: usize,
    pub n_seeds: usize,
    pub warmup_episodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layout: Option<String>,
}

impl Default for MarlConfig {
    fn default() -> Self {
        Self {
            n_agents: 3,
            broken_agent: 2,
            n_episodes: 1_000_000,
            max_steps: 1000,
            learning_rate: 0.8,
            discount: 0.97,
            eps_min: 0.001,
            eps_max: 1.0,
            decay_rate: 0.001,
            lambda: 0.7,
            window: 10,
            corruption_kappa: 10.0,
            divergence: DivergenceMode::VisitedSum,
            scope: CombinationScope::VisitedEntries,
            eval_episodes: 1000,
            n_seeds: 20,
            warmup_episodes: 100,
            layout: None,
        }
    }
}

impl MarlConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_agents < 2 {
            return Err(invalid("marl.n_agents", "must be >= 2"));
        }
        if self.broken_agent >= self.n_agents {
            return Err(invalid("marl.broken_agent", "out of range"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(invalid("marl.learning_rate", "must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(invalid("marl.discount", "must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.eps_min)
            || !(0.0..=1.0).contains(&self.eps_max)
            || self.eps_min > self.eps_max
        {
            return Err(invalid("marl.eps_min", "need 0 <= eps_min <= eps_max <= 1"));
        }
        if !(self.decay_rate > 0.0) {
            return Err(invalid("marl.decay_rate", "must be > 0"));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(invalid("marl.lambda", "must lie in (0, 1)"));
        }
        if self.window < 1 {
            return Err(invalid("marl.window", "must be >= 1"));
        }
        if !(self.corruption_kappa >= 0.0) {
            return Err(invalid("marl.corruption_kappa", "must be >= 0"));
        }
        if self.n_episodes < 1 || self.max_steps < 1 {
            return Err(invalid("marl.n_episodes", "episodes and max_steps must be >= 1"));
        }
        if self.eval_episodes < 1 {
            return Err(invalid("marl.eval_episodes", "must be >= 1"));
        }
        if self.n_seeds < 1 {
            return Err(invalid("marl.n_seeds", "must be >= 1"));
        }
        Ok(())
    }

    pub fn learning_params(&self) -> LearningParams {
        LearningParams {
            learning_rate: self.learning_rate,
            discount: self.discount,
            eps_min: self.eps_min,
            eps_max: self.eps_max,
            decay_rate: self.decay_rate,
            max_steps: self.max_steps,
            n_episodes: self.n_episodes,
        }
    }

    pub fn voting_config(&self) -> VotingConfig {
        VotingConfig {
            window: self.window,
            lambda: self.lambda,
            corruption_kappa: self.corruption_kappa,
            divergence: self.divergence,
            scope: self.scope,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.kind {
            ExperimentKind::Paths => {
                if self.diffusion.is_some() {
                    return Err(ConfigError::KindMismatch {
                        kind: self.kind,
                        block: "diffusion".into(),
                    });
                }
                if self.marl.is_some() {
                    return Err(ConfigError::KindMismatch { kind: self.kind, block: "marl".into() });
                }
                self.paths.clone().unwrap_or_default().validate()
            }
            ExperimentKind::Diffusion => {
                if self.paths.is_some() {
                    return Err(ConfigError::KindMismatch { kind: self.kind, block: "paths".into() });
                }
                if self.marl.is_some() {
                    return Err(ConfigError::KindMismatch { kind: self.kind, block: "marl".into() });
                }
                self.diffusion.clone().unwrap_or_default().validate()
            }
            ExperimentKind::Marl => {
                if self.paths.is_some() {
                    return Err(ConfigError::KindMismatch { kind: self.kind, block: "paths".into() });
                }
                if self.diffusion.is_some() {
                    return Err(ConfigError::KindMismatch {
                        kind: self.kind,
                        block: "diffusion".into(),
                    });
                }
                self.marl.clone().unwrap_or_default().validate()
            }
        }
    }

    /// Resolved kind-specific blocks with defaults applied.
    pub fn paths_config(&self) -> PathsConfig {
        self.paths.clone().unwrap_or_default()
    }

    pub fn diffusion_config(&self) -> DiffusionConfig {
        self.diffusion.clone().unwrap_or_default()
    }

    pub fn marl_config(&self) -> MarlConfig {
        self.marl.clone().unwrap_or_default()
    }

    /// Fills in the kind-specific block explicitly so the config echoes
    /// losslessly with every default visible.
    pub fn resolved(&self) -> ExperimentConfig {
        let mut out = self.clone();
        match self.kind {
            ExperimentKind::Paths => out.paths = Some(self.paths_config()),
            ExperimentKind::Diffusion => out.diffusion = Some(self.diffusion_config()),
            ExperimentKind::Marl => out.marl = Some(self.marl_config()),
        }
        out
    }
}

/// Parses and validates a TOML configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let config: ExperimentConfig = toml::from_str(text)?;
    config.validate()?;
    Ok(config)
}
