//! Seed management, parallel episodes, and the filtered run set.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::agent::{run_episode_with, StepRecord};
use crate::config::{ExperimentConfig, Preset, VariantSpec};
use crate::harness::metrics::{compute_metrics, filter_valid_run, Aggregate, MeanSem, RunSummary};
use crate::harness::output::{
    io_err, trace_path, write_belief_raster, write_json, write_timeseries, ExploreCheck, Metadata,
    Summary, TraceWriter,
};
use crate::harness::HarnessError;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
    /// Where traces and summaries go; `None` keeps everything in memory.
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// Valid runs in seed order.
    pub runs: Vec<RunSummary>,
    pub traces: Vec<(u64, Vec<StepRecord>)>,
    pub aggregate: Aggregate,
    pub discarded_seeds: Vec<u64>,
    pub attempts: usize,
}

impl ExperimentResult {
    pub fn explore_check(&self) -> ExploreCheck {
        ExploreCheck::new(
            self.config.variant.variant().learning,
            self.aggregate.action_explore_pct.mean,
        )
    }

    pub fn write_outputs(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let summary = Summary {
            metadata: Metadata::now(),
            variant: self.config.variant.label(),
            config: &self.config,
            runs: &self.runs,
            aggregate: &self.aggregate,
            discarded_seed_count: self.discarded_seeds.len(),
            discarded_seeds: &self.discarded_seeds,
            explore_check: self.explore_check(),
        };
        write_json(&dir.join("summary.json"), &summary)?;
        let traces: Vec<(u64, &[StepRecord])> = self
            .traces
            .iter()
            .map(|(s, t)| (*s, t.as_slice()))
            .collect();
        write_timeseries(&dir.join("plot_timeseries.csv"), &traces)?;
        write_belief_raster(&dir.join("plot_beliefs.csv"), &traces)
    }
}

fn run_one(
    config: &ExperimentConfig,
    seed: u64,
    dir: Option<&Path>,
) -> Result<Vec<StepRecord>, HarnessError> {
    match dir {
        Some(dir) => {
            let mut w = TraceWriter::create(&trace_path(dir, seed))?;
            run_episode_with(config, seed, |r| w.write(r))
        }
        None => run_episode_with(config, seed, |_| Ok::<(), HarnessError>(())),
    }
}

fn build_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, HarnessError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        b = b.num_threads(n.max(1));
    }
    Ok(b.build()?)
}

/// Draws seeds `base_seed, base_seed + 1, …` until `runs` of them pass the
/// filter. Each batch asks for exactly the number of runs still missing, so
/// the seeds tried never depend on the number of workers.
pub fn run_experiment(
    config: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<ExperimentResult, HarnessError> {
    config.validate()?;
    let dir = opts.out_dir.as_deref();
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let pool = build_pool(opts.jobs)?;
    let cap = config.runs * config.max_attempts_factor;

    let mut valid: Vec<(u64, Vec<StepRecord>)> = Vec::with_capacity(config.runs);
    let mut discarded = Vec::new();
    let mut attempts = 0;
    while valid.len() < config.runs {
        if attempts >= cap {
            return Err(HarnessError::FilterExhausted {
                valid: valid.len(),
                requested: config.runs,
                attempts,
            });
        }
        let batch = (config.runs - valid.len()).min(cap - attempts);
        let seeds: Vec<u64> = (attempts..attempts + batch)
            .map(|i| config.base_seed.wrapping_add(i as u64))
            .collect();
        let outcomes: Vec<Result<Vec<StepRecord>, HarnessError>> =
            pool.install(|| seeds.par_iter().map(|&s| run_one(config, s, dir)).collect());
        for (seed, outcome) in seeds.into_iter().zip(outcomes) {
            let trace = outcome?;
            if filter_valid_run(&trace, config.filter_window, config.filter_min_count) {
                valid.push((seed, trace));
            } else {
                info!("seed {seed} filtered out");
                discarded.push(seed);
                if let Some(dir) = dir {
                    let path = trace_path(dir, seed);
                    fs::remove_file(&path).map_err(io_err(&path))?;
                }
            }
        }
        attempts += batch;
    }

    let runs = valid
        .iter()
        .map(|(seed, trace)| compute_metrics(trace, *seed, config.steps))
        .collect::<Result<Vec<_>, _>>()
        .expect("filtered traces are never empty");
    let result = ExperimentResult {
        config: config.clone(),
        aggregate: Aggregate::from_runs(&runs),
        runs,
        traces: valid,
        discarded_seeds: discarded,
        attempts,
    };
    if let Some(dir) = dir {
        result.write_outputs(dir)?;
    }
    Ok(result)
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub results: Vec<(Preset, ExperimentResult)>,
}

#[derive(Debug, Serialize)]
struct ComparisonRow {
    preset: String,
    viability_mean: f64,
    viability_sem: f64,
    eat_pct: f64,
    play_pct: f64,
    explore_pct: f64,
    median_comfort_mean: f64,
    median_comfort_sem: f64,
    cortisol_mean: f64,
    cortisol_sem: f64,
    final_d_energy_mean: f64,
    discarded_seeds: usize,
    explore_target_met: bool,
}

impl SweepResult {
    pub fn get(&self, preset: Preset) -> Option<&ExperimentResult> {
        self.results
            .iter()
            .find(|(p, _)| *p == preset)
            .map(|(_, r)| r)
    }

    fn rows(&self) -> Vec<ComparisonRow> {
        self.results
            .iter()
            .map(|(p, r)| {
                let a = &r.aggregate;
                ComparisonRow {
                    preset: p.name().into(),
                    viability_mean: a.viability_pct.mean,
                    viability_sem: a.viability_pct.sem,
                    eat_pct: a.action_eat_pct.mean,
                    play_pct: a.action_play_pct.mean,
                    explore_pct: a.action_explore_pct.mean,
                    median_comfort_mean: a.median_comfort_pct.mean,
                    median_comfort_sem: a.median_comfort_pct.sem,
                    cortisol_mean: a.mean_cortisol.mean,
                    cortisol_sem: a.mean_cortisol.sem,
                    final_d_energy_mean: a.final_d_energy.mean,
                    discarded_seeds: r.discarded_seeds.len(),
                    explore_target_met: r.explore_check().met,
                }
            })
            .collect()
    }

    pub fn table(&self) -> String {
        summary_table(self.results.iter().map(|(_, r)| r))
    }

    pub fn write_comparison(&self, path: &Path) -> Result<(), HarnessError> {
        let csv_err = |source| HarnessError::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        for row in self.rows() {
            w.serialize(row).map_err(csv_err)?;
        }
        w.flush().map_err(io_err(path))
    }
}

/// Plain-text comparison, one row per experiment.
pub fn summary_table<'a>(results: impl IntoIterator<Item = &'a ExperimentResult>) -> String {
    let pm = |m: &MeanSem, digits: usize| format!("{:.*} ± {:.*}", digits, m.mean, digits, m.sem);
    let mut s = format!(
        "{:<6} {:>15} {:>20} {:>17} {:>15} {:>8}\n",
        "model", "viability %", "eat/play/explore %", "median comfort %", "cortisol", "final d"
    );
    for r in results {
        let a = &r.aggregate;
        let _ = writeln!(
            s,
            "{:<6} {:>15} {:>20} {:>17} {:>15} {:>8.3}",
            r.config.variant.label(),
            pm(&a.viability_pct, 1),
            format!(
                "{:.0}/{:.0}/{:.0}",
                a.action_eat_pct.mean, a.action_play_pct.mean, a.action_explore_pct.mean
            ),
            pm(&a.median_comfort_pct, 1),
            pm(&a.mean_cortisol, 3),
            a.final_d_energy.mean,
        );
    }
    s
}

/// Runs every preset with otherwise identical settings. With an output
/// directory, each preset writes into `model_<x>/` and a `comparison.csv`
/// sits next to them.
pub fn run_sweep(
    config: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<SweepResult, HarnessError> {
    let mut results = Vec::with_capacity(Preset::ALL.len());
    for preset in Preset::ALL {
        let cfg = ExperimentConfig {
            variant: VariantSpec::Preset(preset),
            ..config.clone()
        };
        let sub = RunOptions {
            jobs: opts.jobs,
            out_dir: opts
                .out_dir
                .as_ref()
                .map(|d| d.join(format!("model_{}", preset.name().to_ascii_lowercase()))),
        };
        info!("sweep: model {preset}");
        results.push((preset, run_experiment(&cfg, &sub)?));
    }
    let sweep = SweepResult { results };
    if let Some(dir) = &opts.out_dir {
        sweep.write_comparison(&dir.join("comparison.csv"))?;
    }
    Ok(sweep)
}
