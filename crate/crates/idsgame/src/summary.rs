//! Mean and population standard deviation of training curves across seeds.

use serde::{Deserialize, Serialize};

use crate::formats::CurveRow;

/// `None` when any input is NaN (for example the losses of a static agent).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Self { mean: None, std: None };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            mean: Some(mean),
            std: Some(var.sqrt()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub iteration: usize,
    pub attacker_win_ratio: Stat,
    pub defender_win_ratio: Stat,
    pub draw_ratio: Stat,
    pub mean_episode_len: Stat,
    pub attacker_policy_loss: Stat,
    pub attacker_value_loss: Stat,
    pub attacker_entropy: Stat,
    pub defender_policy_loss: Stat,
    pub defender_value_loss: Stat,
    pub defender_entropy: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seeds: Vec<u64>,
    pub rows: Vec<SummaryRow>,
}

/// Aggregates per-seed curves row by row. Curves are truncated to the
/// shortest one.
pub fn summarize(seeds: &[u64], curves: &[Vec<CurveRow>]) -> Summary {
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    let rows = (0..len)
        .map(|i| {
            let col = |f: fn(&CurveRow) -> f64| {
                Stat::of(&curves.iter().map(|c| f(&c[i])).collect::<Vec<_>>())
            };
            SummaryRow {
                iteration: curves[0][i].iteration,
                attacker_win_ratio: col(|r| r.attacker_win_ratio),
                defender_win_ratio: col(|r| r.defender_win_ratio),
                draw_ratio: col(|r| r.draw_ratio),
                mean_episode_len: col(|r| r.mean_episode_len),
                attacker_policy_loss: col(|r| r.attacker_policy_loss),
                attacker_value_loss: col(|r| r.attacker_value_loss),
                attacker_entropy: col(|r| r.attacker_entropy),
                defender_policy_loss: col(|r| r.defender_policy_loss),
                defender_value_loss: col(|r| r.defender_value_loss),
                defender_entropy: col(|r| r.defender_entropy),
            }
        })
        .collect();
    Summary {
        seeds: seeds.to_vec(),
        rows,
    }
}

/// Mean of `f` over the last `window` rows.
pub fn tail_mean(rows: &[CurveRow], window: usize, f: fn(&CurveRow) -> f64) -> f64 {
    let tail = &rows[rows.len().saturating_sub(window)..];
    tail.iter().map(f).sum::<f64>() / tail.len() as f64
}
