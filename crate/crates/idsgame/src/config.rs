//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use idsgame_core::neural::DEFAULT_HIDDEN;
use idsgame_core::{Algo, Hyperparams, Role};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid config field `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StaticRole {
    None,
    Attacker,
    Defender,
}

impl StaticRole {
    pub fn role(self) -> Option<Role> {
        match self {
            StaticRole::None => None,
            StaticRole::Attacker => Some(Role::Attacker),
            StaticRole::Defender => Some(Role::Defender),
        }
    }
}

/// When the defense values are shuffled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Permute {
    Off,
    /// Once per seed, before training starts.
    Run,
    /// At the start of every training episode.
    Episode,
}

/// Built-in scenario id or a path to a scenario file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Builtin(u8),
    File(PathBuf),
}

impl std::str::FromStr for ScenarioRef {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.parse::<u8>() {
            Ok(id) => ScenarioRef::Builtin(id),
            Err(_) => ScenarioRef::File(PathBuf::from(s)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioRef,
    pub attacker_algo: Algo,
    pub defender_algo: Algo,
    pub static_role: StaticRole,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub hyperparams: Hyperparams,
    pub hidden: Vec<usize>,
    pub eval_games: u32,
    pub permute: Permute,
    /// Evaluate on the training (possibly permuted) defenses instead of the canonical scenario.
    pub eval_on_training_scenario: bool,
    pub out_dir: PathBuf,
    /// Write checkpoints every this many iterations; 0 keeps only the final one.
    pub checkpoint_interval: usize,
    /// Seeds trained concurrently; 0 uses every available core.
    pub parallelism: usize,
    /// Record elapsed seconds in the CSV. Off makes CSVs byte-reproducible.
    pub wallclock: bool,
}

pub const OUT_DIR_ENV: &str = "IDSGAME_OUT";

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioRef::Builtin(1),
            attacker_algo: Algo::PpoAr,
            defender_algo: Algo::PpoAr,
            static_role: StaticRole::None,
            iterations: 500,
            seeds: vec![0, 1, 2, 3, 4],
            hyperparams: Hyperparams::default(),
            hidden: DEFAULT_HIDDEN.to_vec(),
            eval_games: 100,
            permute: Permute::Run,
            eval_on_training_scenario: false,
            out_dir: default_out_dir(),
            checkpoint_interval: 100,
            parallelism: 0,
            wallclock: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let config: Self = serde_json::from_str(text)
            .map_err(|e| ConfigError::new(field_of(&e), e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let ScenarioRef::Builtin(id) = self.scenario {
            if !(1..=3).contains(&id) {
                return Err(ConfigError::new("scenario", format!("unknown scenario {id}, expected 1, 2 or 3")));
            }
        }
        if self.iterations == 0 {
            return Err(ConfigError::new("iterations", "must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::new("seeds", "must not be empty"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(ConfigError::new("seeds", "must be distinct"));
        }
        if self.eval_games == 0 {
            return Err(ConfigError::new("eval_games", "must be at least 1"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(ConfigError::new("hidden", "layer widths must be positive"));
        }
        self.hyperparams
            .validate()
            .map_err(|msg| ConfigError::new("hyperparams", msg))?;
        Ok(())
    }

    /// The algorithm a learning role trains with, or `None` for the static role.
    pub fn learner_algo(&self, role: Role) -> Option<Algo> {
        if self.static_role.role() == Some(role) {
            return None;
        }
        Some(match role {
            Role::Attacker => self.attacker_algo,
            Role::Defender => self.defender_algo,
        })
    }
}

fn field_of(e: &serde_json::Error) -> String {
    let text = e.to_string();
    for marker in ["unknown field `", "missing field `", "field `"] {
        if let Some(rest) = text.split(marker).nth(1) {
            if let Some(name) = rest.split('`').next() {
                return name.to_string();
            }
        }
    }
    "<document>".to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        assert_eq!(c.hyperparams.batch_size, 2000);
        assert_eq!(c.eval_games, 100);
        assert_eq!(c.seeds.len(), 5);
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let c = ExperimentConfig::from_json(r#"{"scenario": 3, "static_role": "defender", "attacker_algo": "ppo"}"#)
            .unwrap();
        assert_eq!(c.scenario, ScenarioRef::Builtin(3));
        assert_eq!(c.learner_algo(Role::Attacker), Some(Algo::Ppo));
        assert_eq!(c.learner_algo(Role::Defender), None);
        let c = ExperimentConfig::from_json(r#"{"scenario": "my/file.json"}"#).unwrap();
        assert_eq!(c.scenario, ScenarioRef::File("my/file.json".into()));
    }

    #[test]
    fn errors_name_the_field() {
        let field = |json: &str| {
            ExperimentConfig::from_json(json)
                .unwrap_err()
                .downcast::<ConfigError>()
                .unwrap()
                .field
        };
        assert_eq!(field(r#"{"iterations": 0}"#), "iterations");
        assert_eq!(field(r#"{"seeds": [1, 1]}"#), "seeds");
        assert_eq!(field(r#"{"seeds": []}"#), "seeds");
        assert_eq!(field(r#"{"scenario": 7}"#), "scenario");
        assert_eq!(field(r#"{"eval_games": 0}"#), "eval_games");
        assert_eq!(field(r#"{"bogus": 0}"#), "bogus");
        assert_eq!(field(r#"{"hyperparams": {"gamma": 2.0}}"#), "hyperparams");
    }
}
