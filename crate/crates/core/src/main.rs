use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use allostasis::agent::run_episode_with;
use allostasis::config::{ConfigError, ExperimentConfig, Preset, VariantSpec};
use allostasis::harness::output::{trace_row, write_trace, TRACE_HEADER};
use allostasis::harness::{run_experiment, run_sweep, summary_table, HarnessError, RunOptions};
use allostasis::model::Action;

#[derive(Parser)]
#[command(
    name = "allostasis",
    version,
    about = "Allostatic active-inference agent simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one model for the configured number of valid seeds.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
    },
    /// Run models A, B, C and D with identical settings.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
    },
    /// Run a single episode with per-stage debug logging.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
    },
    /// Print the effective configuration, arrays included, as TOML.
    Config {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<Preset>,
    /// Output directory (`trace`: output CSV file, default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    resource_probability: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    initial_energy: Option<f64>,
    #[arg(long)]
    initial_socialness: Option<f64>,
    #[arg(long)]
    initial_set_point: Option<f64>,
    #[arg(long)]
    consumption_gain: Option<f64>,
    #[arg(long)]
    filter_window: Option<usize>,
    #[arg(long)]
    filter_min_count: Option<usize>,
    #[arg(long)]
    max_attempts_factor: Option<usize>,
    #[arg(long)]
    preference_tummy: Option<f64>,
    #[arg(long)]
    preference_lonely: Option<f64>,
    #[arg(long)]
    dirichlet_c0: Option<f64>,
    /// Debug only: take this action every step.
    #[arg(long)]
    forced_action: Option<Action>,
}

macro_rules! apply {
    ($cfg:expr, $src:expr, $($field:ident),+) => {
        $(if let Some(v) = $src.$field { $cfg.$field = v; })+
    };
}

impl Common {
    fn config(&self, seed: Option<u64>) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = self.preset {
            cfg.variant = VariantSpec::Preset(p);
        }
        if let Some(s) = seed {
            cfg.base_seed = s;
        }
        apply!(
            cfg,
            self,
            steps,
            runs,
            resource_probability,
            gamma,
            lambda,
            initial_energy,
            initial_socialness,
            initial_set_point,
            consumption_gain,
            filter_window,
            filter_min_count,
            max_attempts_factor
        );
        apply!(
            cfg.model,
            self,
            preference_tummy,
            preference_lonely,
            dirichlet_c0
        );
        if self.forced_action.is_some() {
            cfg.forced_action = self.forced_action;
        }
        if self.out.is_some() {
            cfg.output_dir = self.out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn options(&self, cfg: &ExperimentConfig) -> RunOptions {
        RunOptions {
            jobs: self.jobs,
            out_dir: cfg.output_dir.clone(),
        }
    }
}

fn init_logging(default: &str) {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default))
        .format_timestamp(None)
        .init();
}

fn trace(cfg: &ExperimentConfig, out: Option<&PathBuf>) -> Result<(), HarnessError> {
    let seed = cfg.base_seed;
    match out {
        Some(path) => {
            let trace = run_episode_with(cfg, seed, |_| Ok::<(), HarnessError>(()))?;
            write_trace(path, &trace)
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = csv::Writer::from_writer(stdout.lock());
            let csv_err = |source| HarnessError::Csv {
                path: "<stdout>".into(),
                source,
            };
            w.write_record(TRACE_HEADER).map_err(csv_err)?;
            run_episode_with(cfg, seed, |r| w.write_record(trace_row(r)).map_err(csv_err))?;
            w.flush().map_err(|source| HarnessError::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { common, seed } => {
            init_logging("info");
            let cfg = common.config(Some(seed))?;
            let r = run_experiment(&cfg, &common.options(&cfg))?;
            print!("{}", summary_table([&r]));
            if let Some(gap) = r.explore_check().deviation {
                eprintln!("note: {gap}");
            }
        }
        Command::Sweep { common, seed } => {
            init_logging("info");
            let cfg = common.config(Some(seed))?;
            let s = run_sweep(&cfg, &common.options(&cfg))?;
            print!("{}", s.table());
        }
        Command::Trace { common, seed } => {
            init_logging("allostasis=debug");
            let cfg = common.config(Some(seed))?;
            trace(&cfg, common.out.as_ref())?;
        }
        Command::Config { common } => {
            init_logging("warn");
            let cfg = common.config(None)?.with_explicit_arrays()?;
            let mut out = std::io::stdout().lock();
            out.write_all(cfg.to_toml().as_bytes())
                .map_err(|source| HarnessError::Io {
                    path: "<stdout>".into(),
                    source,
                })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
