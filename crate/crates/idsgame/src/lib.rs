//! Experiment harness for the intrusion prevention game: configuration,
//! training loops, evaluation, file formats and plots.

pub mod config;
pub mod formats;
pub mod plot;
pub mod run;
pub mod seeding;
pub mod simulate;
pub mod summary;
pub mod trainer;

pub use idsgame_core as core;

use anyhow::Context;
use config::ScenarioRef;
use idsgame_core::{build_scenario, ScenarioSpec};

pub fn load_scenario(scenario: &ScenarioRef) -> anyhow::Result<ScenarioSpec> {
    match scenario {
        ScenarioRef::Builtin(id) => build_scenario(*id).with_context(|| format!("scenario {id}")),
        ScenarioRef::File(path) => formats::ScenarioFile::load(path),
    }
}
