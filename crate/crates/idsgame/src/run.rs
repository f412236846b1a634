//! Multi-seed experiment execution and artifact layout:
//!
//! ```text
//! out/config.json
//! out/seed-S/curve.csv
//! out/seed-S/iter-N/{attacker,defender}.json
//! out/summary.json
//! out/attacker_win_ratio.svg
//! out/errors.json            (only when a seed failed)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use idsgame_core::{Role, ScenarioSpec};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, StaticRole};
use crate::formats::{read_curve_csv, Checkpoint, CurveRow, CHECKPOINT_VERSION};
use crate::plot::{render_svg, Series};
use crate::summary::{summarize, Summary};
use crate::trainer::Trainer;

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

pub fn curve_path(out: &Path, seed: u64) -> PathBuf {
    seed_dir(out, seed).join("curve.csv")
}

pub fn checkpoint_path(out: &Path, seed: u64, iteration: usize, role: Role) -> PathBuf {
    let name = match role {
        Role::Attacker => "attacker.json",
        Role::Defender => "defender.json",
    };
    seed_dir(out, seed).join(format!("iter-{iteration}")).join(name)
}

fn write_checkpoints(trainer: &Trainer, out: &Path) -> anyhow::Result<()> {
    for role in [Role::Attacker, Role::Defender] {
        let agent = trainer.agent(role);
        Checkpoint {
            version: CHECKPOINT_VERSION,
            role,
            algo: agent.algo(),
            iteration: trainer.iteration(),
            policy: agent.policy().clone(),
        }
        .save(&checkpoint_path(out, trainer.seed(), trainer.iteration(), role))?;
    }
    Ok(())
}

/// Trains one seed, streaming rows to its CSV and writing checkpoints.
pub fn run_seed(config: &ExperimentConfig, spec: &ScenarioSpec, seed: u64) -> anyhow::Result<Vec<CurveRow>> {
    let out = &config.out_dir;
    let path = curve_path(out, seed);
    fs::create_dir_all(seed_dir(out, seed))?;
    let mut writer = csv::Writer::from_path(&path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut trainer = Trainer::new(config, spec, seed)?;
    let mut rows = Vec::with_capacity(config.iterations);
    for it in 1..=config.iterations {
        let row = trainer
            .step()
            .with_context(|| format!("seed {seed}, iteration {it}"))?;
        writer.serialize(row)?;
        writer.flush()?;
        rows.push(row);
        let due = config.checkpoint_interval > 0 && it % config.checkpoint_interval == 0;
        if due || it == config.iterations {
            write_checkpoints(&trainer, out)?;
        }
        log::info!(
            "seed {seed} iteration {it}: attacker win ratio {:.2}",
            row.attacker_win_ratio
        );
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
struct SeedError {
    seed: u64,
    error: String,
}

#[derive(Debug)]
pub struct Outcome {
    pub curves: Vec<(u64, Vec<CurveRow>)>,
    pub summary: Summary,
}

pub fn series_label(config: &ExperimentConfig) -> String {
    match config.static_role {
        StaticRole::Defender => format!("attacker {} vs defend-minimal", config.attacker_algo.name()),
        StaticRole::Attacker => format!("defender {} vs attack-maximal", config.defender_algo.name()),
        StaticRole::None => format!(
            "self-play {} / {}",
            config.attacker_algo.name(),
            config.defender_algo.name()
        ),
    }
}

pub fn summary_series(label: &str, summary: &Summary) -> Series {
    let rows = &summary.rows;
    Series {
        label: label.to_string(),
        x: rows.iter().map(|r| r.iteration as f64).collect(),
        y: rows.iter().map(|r| r.attacker_win_ratio.mean.unwrap_or(f64::NAN)).collect(),
        band: Some(rows.iter().map(|r| r.attacker_win_ratio.std.unwrap_or(f64::NAN)).collect()),
    }
}

pub fn win_ratio_svg(series: &[Series]) -> String {
    render_svg("Attacker win ratio", "attacker win ratio", (0.0, 1.0), series)
}

/// Runs every seed (in parallel up to `config.parallelism`), then writes the
/// summary and plot. Failed seeds are listed in `errors.json` and make the
/// call fail after the artifacts of the other seeds are written.
pub fn run_experiment(config: &ExperimentConfig) -> anyhow::Result<Outcome> {
    config.validate()?;
    let spec = crate::load_scenario(&config.scenario)?;
    let out = &config.out_dir;
    fs::create_dir_all(out).with_context(|| format!("output directory {} is not writable", out.display()))?;
    fs::write(out.join("config.json"), config.to_json())?;

    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()?;
    let results: Vec<(u64, anyhow::Result<Vec<CurveRow>>)> = threads.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| (seed, run_seed(config, &spec, seed)))
            .collect()
    });

    let mut curves = Vec::new();
    let mut errors = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(rows) => curves.push((seed, rows)),
            Err(e) => errors.push(SeedError {
                seed,
                error: format!("{e:#}"),
            }),
        }
    }

    let seeds: Vec<u64> = curves.iter().map(|(s, _)| *s).collect();
    let rows: Vec<Vec<CurveRow>> = curves.iter().map(|(_, c)| c.clone()).collect();
    let summary = summarize(&seeds, &rows);
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    fs::write(
        out.join("attacker_win_ratio.svg"),
        win_ratio_svg(&[summary_series(&series_label(config), &summary)]),
    )?;

    if !errors.is_empty() {
        fs::write(out.join("errors.json"), serde_json::to_string_pretty(&errors)?)?;
        bail!(
            "{} of {} seeds failed, see {}",
            errors.len(),
            config.seeds.len(),
            out.join("errors.json").display()
        );
    }
    Ok(Outcome { curves, summary })
}

/// A plot input: a single curve CSV, or a run directory whose seed CSVs are
/// averaged with a ±1 std band.
pub fn load_series(path: &Path) -> anyhow::Result<Series> {
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    if path.is_dir() {
        let mut seeds = Vec::new();
        let mut curves = Vec::new();
        let mut entries: Vec<_> = fs::read_dir(path)?.collect::<Result<_, _>>()?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(seed) = name.strip_prefix("seed-").and_then(|s| s.parse::<u64>().ok()) {
                let csv = entry.path().join("curve.csv");
                if csv.exists() {
                    seeds.push(seed);
                    curves.push(read_curve_csv(&csv)?);
                }
            }
        }
        if curves.is_empty() {
            bail!("{} contains no seed-*/curve.csv files", path.display());
        }
        Ok(summary_series(&label, &summarize(&seeds, &curves)))
    } else {
        let rows = read_curve_csv(path)?;
        Ok(Series {
            label,
            x: rows.iter().map(|r| r.iteration as f64).collect(),
            y: rows.iter().map(|r| r.attacker_win_ratio).collect(),
            band: None,
        })
    }
}
