//! File formats: per-step traces, summaries, and plot-ready tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::agent::StepRecord;
use crate::config::ExperimentConfig;
use crate::harness::metrics::{Aggregate, RunSummary};
use crate::harness::HarnessError;
use crate::model::Motivation;

pub const TRACE_HEADER: [&str; 21] = [
    "t",
    "energy",
    "socialness",
    "d_energy",
    "cortisol",
    "lr_effective",
    "surprisal",
    "surprisal_delta",
    "q_hungry",
    "q_playful",
    "q_satisfied",
    "qu_eat",
    "qu_play",
    "qu_explore",
    "action",
    "action_succeeded",
    "food",
    "friend",
    "tummy",
    "lonely",
    "alive",
];

fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

pub fn trace_row(r: &StepRecord) -> Vec<String> {
    let q = r.q_s.probs();
    let u = r.q_u.probs();
    vec![
        r.t.to_string(),
        r.energy.to_string(),
        r.socialness.to_string(),
        r.d_energy.to_string(),
        r.cortisol.to_string(),
        r.lr_effective.to_string(),
        r.surprisal.to_string(),
        r.surprisal_delta.to_string(),
        q[0].to_string(),
        q[1].to_string(),
        q[2].to_string(),
        u[0].to_string(),
        u[1].to_string(),
        u[2].to_string(),
        r.action.name().to_string(),
        flag(r.action_succeeded),
        flag(r.obs.food),
        flag(r.obs.friend),
        flag(r.obs.tummy_rumble),
        flag(r.obs.lonely),
        flag(r.alive),
    ]
}

pub fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("trace_{seed}.csv"))
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Trace CSV that is flushed after every row, so a crash leaves a readable
/// prefix on disk.
pub struct TraceWriter {
    path: PathBuf,
    inner: csv::Writer<BufWriter<File>>,
}

impl TraceWriter {
    pub fn create(path: &Path) -> Result<Self, HarnessError> {
        let file = File::create(path).map_err(io_err(path))?;
        let mut inner = csv::Writer::from_writer(BufWriter::new(file));
        inner.write_record(TRACE_HEADER).map_err(csv_err(path))?;
        inner.flush().map_err(io_err(path))?;
        Ok(Self {
            path: path.to_path_buf(),
            inner,
        })
    }

    pub fn write(&mut self, r: &StepRecord) -> Result<(), HarnessError> {
        self.inner
            .write_record(trace_row(r))
            .map_err(csv_err(&self.path))?;
        self.inner.flush().map_err(io_err(&self.path))
    }
}

pub fn write_trace(path: &Path, trace: &[StepRecord]) -> Result<(), HarnessError> {
    let mut w = TraceWriter::create(path)?;
    for r in trace {
        w.write(r)?;
    }
    Ok(())
}

/// Observed explore rate against the band expected for the variant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExploreCheck {
    pub learning: bool,
    /// `"< 5"` without learning, `"> 15"` with it.
    pub expected_pct: String,
    pub observed_pct: f64,
    pub met: bool,
    /// Set when the observed rate is outside the band.
    pub deviation: Option<String>,
}

impl ExploreCheck {
    pub const MAX_WITHOUT_LEARNING: f64 = 5.0;
    pub const MIN_WITH_LEARNING: f64 = 15.0;

    pub fn new(learning: bool, observed_pct: f64) -> Self {
        let (expected_pct, met) = if learning {
            (
                format!("> {}", Self::MIN_WITH_LEARNING),
                observed_pct > Self::MIN_WITH_LEARNING,
            )
        } else {
            (
                format!("< {}", Self::MAX_WITHOUT_LEARNING),
                observed_pct < Self::MAX_WITHOUT_LEARNING,
            )
        };
        let deviation = (!met).then(|| {
            format!(
                "calibration gap: explore selected in {observed_pct:.1}% of steps, expected {expected_pct}%"
            )
        });
        Self {
            learning,
            expected_pct,
            observed_pct,
            met,
            deviation,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub generated_unix_s: u64,
}

impl Metadata {
    pub fn now() -> Self {
        let generated_unix_s = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self { generated_unix_s }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary<'a> {
    /// The only field that differs between identical re-runs.
    pub metadata: Metadata,
    pub variant: String,
    pub config: &'a ExperimentConfig,
    pub runs: &'a [RunSummary],
    pub aggregate: &'a Aggregate,
    pub discarded_seed_count: usize,
    pub discarded_seeds: &'a [u64],
    pub explore_check: ExploreCheck,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Long-format time series: `seed,t,series,value`.
pub fn write_timeseries(path: &Path, traces: &[(u64, &[StepRecord])]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["seed", "t", "series", "value"])
        .map_err(csv_err(path))?;
    for (seed, trace) in traces {
        for r in trace.iter() {
            let series = [
                ("energy", r.energy),
                ("d_energy", r.d_energy),
                ("socialness", r.socialness),
                ("d_socialness", r.d_socialness),
                ("valence", r.surprisal_delta),
                ("cortisol", r.cortisol),
            ];
            for (name, value) in series {
                w.write_record([
                    seed.to_string(),
                    r.t.to_string(),
                    name.into(),
                    value.to_string(),
                ])
                .map_err(csv_err(path))?;
            }
        }
    }
    w.flush().map_err(io_err(path))
}

/// Belief raster with the selected action repeated on every state row.
pub fn write_belief_raster(
    path: &Path,
    traces: &[(u64, &[StepRecord])],
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["seed", "t", "state", "belief", "action", "action_succeeded"])
        .map_err(csv_err(path))?;
    for (seed, trace) in traces {
        for r in trace.iter() {
            for s in Motivation::ALL {
                w.write_record([
                    seed.to_string(),
                    r.t.to_string(),
                    s.name().into(),
                    r.q_s[s.index()].to_string(),
                    r.action.name().into(),
                    flag(r.action_succeeded),
                ])
                .map_err(csv_err(path))?;
            }
        }
    }
    w.flush().map_err(io_err(path))
}
