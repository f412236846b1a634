//! On-disk formats: canonical state JSON and hashes, scenario files,
//! policy checkpoints and training-curve CSV.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use idsgame_core::{Algo, GameConstants, GameState, Policy, Role, ScenarioSpec, Topology};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CHECKPOINT_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Compact JSON with fields in declaration order and sets sorted.
pub fn state_json(state: &GameState) -> String {
    serde_json::to_string(state).expect("game state serializes")
}

pub fn state_hash(state: &GameState) -> String {
    sha256_hex(state_json(state).as_bytes())
}

pub fn policy_hash(policy: &Policy) -> String {
    sha256_hex(&serde_json::to_vec(policy).expect("policy serializes"))
}

/// A scenario stored as a file: topology, constants and one defense row per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub topology: Topology,
    pub m: usize,
    pub w: u32,
    pub defense_rows: Vec<Vec<u32>>,
}

impl ScenarioFile {
    pub fn from_spec(spec: &ScenarioSpec) -> Self {
        Self {
            topology: spec.topology.clone(),
            m: spec.constants.m,
            w: spec.constants.w,
            defense_rows: spec.initial_defense.clone(),
        }
    }

    pub fn into_spec(self) -> anyhow::Result<ScenarioSpec> {
        let constants = GameConstants::new(self.m, self.w)?;
        Ok(ScenarioSpec::new(self.topology, constants, self.defense_rows)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<ScenarioSpec> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read scenario file {}", path.display()))?;
        let file: ScenarioFile = serde_json::from_str(&text)
            .with_context(|| format!("malformed scenario file {}", path.display()))?;
        file.into_spec()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub role: Role,
    pub algo: Option<Algo>,
    pub iteration: usize,
    pub policy: Policy,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, serde_json::to_vec(self)?)
            .with_context(|| format!("cannot write checkpoint {}", path.display()))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let bytes =
            fs::read(path).with_context(|| format!("missing checkpoint {}", path.display()))?;
        let cp: Checkpoint = serde_json::from_slice(&bytes)
            .with_context(|| format!("malformed checkpoint {}", path.display()))?;
        if cp.version != CHECKPOINT_VERSION {
            bail!("checkpoint {} has unsupported version {}", path.display(), cp.version);
        }
        Ok(cp)
    }
}

/// Resolves a heuristic name (`defend-minimal`, `attack-maximal`, `random`,
/// `recon-only`) or a checkpoint path to a policy for `role`.
pub fn resolve_policy(spec: &str, role: Role, node_count: usize, m: usize) -> anyhow::Result<Policy> {
    let policy = match Policy::from_heuristic_name(spec) {
        Some(p) => p,
        None => {
            let cp = Checkpoint::load(Path::new(spec))?;
            if cp.role != role {
                bail!("checkpoint {spec} holds a {:?} policy, expected {:?}", cp.role, role);
            }
            cp.policy
        }
    };
    if !policy.supports(role) {
        bail!("policy `{spec}` cannot play the {role:?} role");
    }
    policy.check_dimensions(role, node_count, m)?;
    Ok(policy)
}

/// One training iteration. Losses of a non-learning agent are NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub iteration: usize,
    pub attacker_win_ratio: f64,
    pub defender_win_ratio: f64,
    pub draw_ratio: f64,
    pub mean_episode_len: f64,
    pub attacker_policy_loss: f64,
    pub attacker_value_loss: f64,
    pub attacker_entropy: f64,
    pub defender_policy_loss: f64,
    pub defender_value_loss: f64,
    pub defender_entropy: f64,
    pub wallclock_s: f64,
}

pub const CSV_COLUMNS: [&str; 12] = [
    "iteration",
    "attacker_win_ratio",
    "defender_win_ratio",
    "draw_ratio",
    "mean_episode_len",
    "attacker_policy_loss",
    "attacker_value_loss",
    "attacker_entropy",
    "defender_policy_loss",
    "defender_value_loss",
    "defender_entropy",
    "wallclock_s",
];

pub fn curve_to_csv(rows: &[CurveRow]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn write_curve_csv(path: &Path, rows: &[CurveRow]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, curve_to_csv(rows)?).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_curve_csv(path: &Path) -> anyhow::Result<Vec<CurveRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let headers: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if headers != CSV_COLUMNS {
        bail!("{} does not have the training-curve columns", path.display());
    }
    r.deserialize()
        .map(|row| row.with_context(|| format!("malformed row in {}", path.display())))
        .collect()
}
