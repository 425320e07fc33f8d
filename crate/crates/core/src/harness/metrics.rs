//! Run filtering and per-run / across-run metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::StepRecord;
use crate::model::Action;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("trace is empty")]
    EmptyTrace,
}

/// Keeps a run only if food and friend each appeared at least `min_count`
/// times in the first `window` steps. Truncated traces are judged on what
/// they contain.
pub fn filter_valid_run(trace: &[StepRecord], window: usize, min_count: usize) -> bool {
    let head = &trace[..trace.len().min(window)];
    let food = head.iter().filter(|r| r.obs.food).count();
    let friend = head.iter().filter(|r| r.obs.friend).count();
    food >= min_count && friend >= min_count
}

/// Percentages of eat / play / explore.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionDistribution {
    pub eat: f64,
    pub play: f64,
    pub explore: f64,
}

impl ActionDistribution {
    pub fn get(&self, a: Action) -> f64 {
        match a {
            Action::Eat => self.eat,
            Action::Play => self.play,
            Action::Explore => self.explore,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub steps_survived: usize,
    pub viability_pct: f64,
    pub action_distribution: ActionDistribution,
    pub median_comfort_pct: f64,
    pub energy_comfort_pct: f64,
    pub mean_cortisol: f64,
    pub final_d_energy: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Table-style metrics for one run. Aggregates run over the steps that ended
/// with Energy > 0; comfort uses each step's own set point.
pub fn compute_metrics(
    trace: &[StepRecord],
    seed: u64,
    steps_configured: usize,
) -> Result<RunSummary, MetricsError> {
    let last = trace.last().ok_or(MetricsError::EmptyTrace)?;
    let alive: Vec<&StepRecord> = trace.iter().filter(|r| r.energy > 0.0).collect();
    // An agent that died on its first step still gets defined statistics.
    let rows: Vec<&StepRecord> = if alive.is_empty() {
        trace.iter().collect()
    } else {
        alive.clone()
    };
    let n = rows.len() as f64;

    let energy_ratio = |r: &StepRecord| 100.0 * r.energy / r.d_energy;
    let social_ratio = |r: &StepRecord| 100.0 * r.socialness / r.d_socialness;

    let mut counts = [0usize; 3];
    for r in &rows {
        counts[r.action.index()] += 1;
    }
    let pct = |c: usize| 100.0 * c as f64 / n;

    Ok(RunSummary {
        seed,
        steps_survived: alive.len(),
        viability_pct: 100.0 * alive.len() as f64 / steps_configured as f64,
        action_distribution: ActionDistribution {
            eat: pct(counts[0]),
            play: pct(counts[1]),
            explore: pct(counts[2]),
        },
        median_comfort_pct: median(
            rows.iter()
                .map(|r| 0.5 * (energy_ratio(r) + social_ratio(r)))
                .collect(),
        ),
        energy_comfort_pct: median(rows.iter().map(|r| energy_ratio(r)).collect()),
        mean_cortisol: rows.iter().map(|r| r.cortisol).sum::<f64>() / n,
        final_d_energy: last.d_energy,
    })
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSem {
    pub mean: f64,
    pub sem: f64,
}

/// SEM uses the sample standard deviation (n − 1); a single value has SEM 0.
pub fn mean_sem(values: &[f64]) -> MeanSem {
    let n = values.len();
    if n == 0 {
        return MeanSem {
            mean: f64::NAN,
            sem: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanSem { mean, sem: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    MeanSem {
        mean,
        sem: (var / n as f64).sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub viability_pct: MeanSem,
    pub action_eat_pct: MeanSem,
    pub action_play_pct: MeanSem,
    pub action_explore_pct: MeanSem,
    pub median_comfort_pct: MeanSem,
    pub energy_comfort_pct: MeanSem,
    pub mean_cortisol: MeanSem,
    pub final_d_energy: MeanSem,
}

impl Aggregate {
    pub fn from_runs(runs: &[RunSummary]) -> Self {
        let col = |f: fn(&RunSummary) -> f64| mean_sem(&runs.iter().map(f).collect::<Vec<_>>());
        Self {
            viability_pct: col(|r| r.viability_pct),
            action_eat_pct: col(|r| r.action_distribution.eat),
            action_play_pct: col(|r| r.action_distribution.play),
            action_explore_pct: col(|r| r.action_distribution.explore),
            median_comfort_pct: col(|r| r.median_comfort_pct),
            energy_comfort_pct: col(|r| r.energy_comfort_pct),
            mean_cortisol: col(|r| r.mean_cortisol),
            final_d_energy: col(|r| r.final_d_energy),
        }
    }
}
