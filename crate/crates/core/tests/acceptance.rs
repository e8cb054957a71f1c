//! Acceptance checks. Runs as a plain binary so every criterion prints one
//! PASS/FAIL line; exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use regionsel::estimators::{empirical_ci, margin_of_error, point_estimate, sampled_means};
use regionsel::experiments::{
    load_pools, run_experiment, run_on_pools, Cell, ExperimentConfig, ExperimentName, PoolSource,
    SchemeKind, Table,
};
use regionsel::population::{
    generate_synthetic, pool_summary, true_mean, RegionPool, SyntheticSpec,
};
use regionsel::samplers::{ranking_accuracy, Scheme};
use regionsel::seed::{derive_seed, Purpose};
use regionsel::stats::{mean, sample_std};
use regionsel::subsampling::{select_from_means, SelectionCriterion};

const PANEL: std::ops::RangeInclusive<u64> = 1..=10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn default_pool(seed: u64) -> RegionPool {
    generate_synthetic(&SyntheticSpec::default_suite(), seed).unwrap()
}

/// Seven configurations with ranking fidelity varying by configuration.
fn heterogeneous_suite() -> SyntheticSpec {
    SyntheticSpec {
        coupling: vec![0.80, 0.90, 1.00, 1.00, 0.99, 0.98, 0.97],
        ..SyntheticSpec::default_suite()
    }
}

fn float_col(t: &Table, name: &str) -> Vec<f64> {
    let i = t.column_index(name).unwrap();
    t.rows
        .iter()
        .map(|r| match &r[i] {
            Cell::Float(v) => *v,
            Cell::Int(v) => *v as f64,
            Cell::Text(s) => panic!("unexpected text {s}"),
        })
        .collect()
}

fn text_col(t: &Table, name: &str) -> Vec<String> {
    let i = t.column_index(name).unwrap();
    t.rows.iter().map(|r| r[i].to_string()).collect()
}

fn walkthrough() -> Outcome {
    // Truth of 100 keeps every relative error an exact decimal.
    let errors = [
        [8.0, -2.0, 5.0, 9.0, -6.0, 4.0, 7.0],
        [-3.0, 7.0, -1.0, 2.0, 8.0, -5.0, 3.0],
        [4.0, -2.0, 3.0, 5.0, 2.0, -3.0, 1.0],
    ];
    let truth = vec![100.0; 7];
    let cands: Vec<Vec<f64>> = errors
        .iter()
        .map(|row| row.iter().map(|e| 100.0 + e).collect())
        .collect();
    let criterion = SelectionCriterion::ChebyshevRelative {
        training_configs: vec![0, 1, 2],
    };
    let training_max: Vec<f64> = cands
        .iter()
        .map(|c| regionsel::subsampling::criterion_value(&truth, c, &criterion).unwrap())
        .collect();
    let sel = select_from_means(&truth, &cands, &criterion).unwrap();
    let max_test = sel.max_test_error().unwrap();
    outcome(
        training_max == [0.08, 0.07, 0.04] && sel.winner_index == 2 && max_test == 0.05,
        format!(
            "training max errors {training_max:?}, winner candidate {}, max test error {max_test}",
            sel.winner_index + 1
        ),
    )
}

fn margin_spot_value() -> Outcome {
    let rel = margin_of_error(0.7143, 100, 0.95).unwrap() / 1.0;
    outcome(
        (rel - 0.14).abs() <= 0.0005,
        format!("relative margin {:.4}%", rel * 100.0),
    )
}

fn enumeration_oracle() -> Outcome {
    let values = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
    let pool = RegionPool::new(
        "six",
        vec!["c".into()],
        values.iter().map(|&v| vec![v]).collect(),
    )
    .unwrap();
    // Exact distribution: 15 equally likely pairs, all with distinct means.
    let mut exact = BTreeMap::new();
    for i in 0..6 {
        for j in i + 1..6 {
            *exact
                .entry(((values[i] + values[j]) / 2.0).to_bits())
                .or_insert(0.0) += 1.0 / 15.0;
        }
    }
    let trials = 60_000;
    let means = sampled_means(&pool, &Scheme::Srs { n: 2 }, 0, trials, 2024).unwrap();
    let mut counts: BTreeMap<u64, f64> = BTreeMap::new();
    for m in &means {
        *counts.entry(m.to_bits()).or_insert(0.0) += 1.0;
    }
    let unknown = counts.keys().any(|k| !exact.contains_key(k));
    let worst_z = exact
        .iter()
        .map(|(k, &p)| {
            let n = trials as f64;
            let sd = (n * p * (1.0 - p)).sqrt();
            (counts.get(k).copied().unwrap_or(0.0) - n * p).abs() / sd
        })
        .fold(0.0, f64::max);

    let quantile = |p: f64| {
        let mut acc = 0.0;
        for (k, q) in &exact {
            acc += q;
            if acc >= p - 1e-12 {
                return f64::from_bits(*k);
            }
        }
        unreachable!()
    };
    let exact_half = (quantile(0.975) - quantile(0.025)) / 2.0;
    let ci = empirical_ci(&pool, &Scheme::Srs { n: 2 }, 0, trials, 0.95, 2024).unwrap();
    let rel_diff = (ci.half_width - exact_half).abs() / exact_half;
    outcome(
        !unknown && worst_z <= 3.0 && rel_diff <= 0.02,
        format!(
            "worst cell {worst_z:.2} sigma, half-width {} vs exact {exact_half} ({:.2}% apart)",
            ci.half_width,
            rel_diff * 100.0
        ),
    )
}

fn unbiasedness() -> Outcome {
    let pool = default_pool(derive_seed(4, Purpose::Population, 0));
    let target = 6;
    let truth = true_mean(&pool, target).unwrap();
    let schemes = [
        ("srs", Scheme::Srs { n: 30 }),
        (
            "rss perfect",
            Scheme::Rss {
                cycles: 1,
                set_size: 30,
                ranking_config: target,
            },
        ),
        (
            "rss noisy",
            Scheme::Rss {
                cycles: 1,
                set_size: 30,
                ranking_config: 0,
            },
        ),
        (
            "rss M=3",
            Scheme::Rss {
                cycles: 3,
                set_size: 10,
                ranking_config: 0,
            },
        ),
    ];
    let trials = 20_000;
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (name, scheme)) in schemes.iter().enumerate() {
        let means = sampled_means(
            &pool,
            scheme,
            target,
            trials,
            derive_seed(4, Purpose::Interval, i as u64),
        )
        .unwrap();
        let se = sample_std(&means).unwrap() / (trials as f64).sqrt();
        let z = (mean(&means) - truth) / se;
        pass &= z.abs() <= 4.0;
        parts.push(format!("{name} {z:+.2} SE"));
    }
    outcome(pass, parts.join(", "))
}

fn variance_reduction() -> Outcome {
    let pool = default_pool(derive_seed(5, Purpose::Population, 0));
    let target = 6;
    let seed = derive_seed(5, Purpose::Interval, 0);
    let width = |scheme: Scheme| {
        empirical_ci(&pool, &scheme, target, 2_000, 0.95, seed)
            .unwrap()
            .relative_half_width
    };
    let srs = width(Scheme::Srs { n: 30 });
    let perfect = width(Scheme::Rss {
        cycles: 1,
        set_size: 30,
        ranking_config: target,
    }) / srs;
    let cross = width(Scheme::Rss {
        cycles: 1,
        set_size: 30,
        ranking_config: 0,
    }) / srs;
    outcome(
        perfect <= 0.8 && cross <= 0.9,
        format!("rss/srs width ratio {perfect:.3} perfect ranking, {cross:.3} ranked on config 0"),
    )
}

fn analytical_vs_empirical() -> Outcome {
    let pool = default_pool(derive_seed(6, Purpose::Population, 0));
    let target = 6;
    let summary = &pool_summary(&pool).configs[target];
    let analytical =
        margin_of_error(summary.true_std.unwrap(), 30, 0.95).unwrap() / summary.true_mean;
    let empirical = empirical_ci(
        &pool,
        &Scheme::Srs { n: 30 },
        target,
        1_000,
        0.95,
        derive_seed(6, Purpose::Interval, 0),
    )
    .unwrap()
    .relative_half_width;
    let rel = (analytical - empirical).abs() / empirical;
    outcome(
        rel <= 0.15 && analytical >= 0.85 * empirical,
        format!(
            "analytical {analytical:.4}, empirical {empirical:.4} ({:.1}% apart)",
            rel * 100.0
        ),
    )
}

fn panel_config(spec: SyntheticSpec, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        pools: vec![PoolSource::Synthetic { spec }],
        sample_size: 30,
        trials: 1_000,
        schemes: vec![SchemeKind::Srs],
        baseline_config: 0,
        ..ExperimentConfig::new(seed)
    }
}

fn max_where(t: &Table, key: &str, want: &[(&str, &str)]) -> f64 {
    let errs = float_col(t, key);
    let cols: Vec<(Vec<String>, &str)> = want.iter().map(|(c, v)| (text_col(t, c), *v)).collect();
    (0..t.rows.len())
        .filter(|&i| cols.iter().all(|(col, v)| col[i] == *v))
        .map(|i| errs[i])
        .fold(f64::NEG_INFINITY, f64::max)
}

fn repeated_subsampling_headline() -> Outcome {
    let mut repeated = Vec::new();
    let mut once = Vec::new();
    for seed in PANEL {
        let cfg = panel_config(SyntheticSpec::default_suite(), seed);
        let out = run_experiment(ExperimentName::Fig10, &cfg, Path::new(".")).unwrap();
        let t = &out.tables[0];
        repeated.push(max_where(
            t,
            "relative_error",
            &[("role", "test"), ("scheme", "srs-repeated")],
        ));
        once.push(max_where(
            t,
            "relative_error",
            &[("role", "test"), ("scheme", "srs-once")],
        ));
    }
    let rep_max = repeated.iter().copied().fold(0.0, f64::max);
    let once_max = once.iter().copied().fold(0.0, f64::max);
    outcome(
        rep_max <= 0.10 && once_max > rep_max,
        format!(
            "repeated max test error {:.2}% (cap 10%), single-draw max {:.2}%",
            rep_max * 100.0,
            once_max * 100.0
        ),
    )
}

fn multi_config_generalization() -> Outcome {
    let mut cheb = Vec::new();
    let mut base = Vec::new();
    for seed in PANEL {
        let cfg = ExperimentConfig {
            train_configs: vec![0, 1, 2],
            ..panel_config(heterogeneous_suite(), seed)
        };
        let out = run_experiment(ExperimentName::Fig12, &cfg, Path::new(".")).unwrap();
        let t = &out.tables[0];
        cheb.push(max_where(
            t,
            "relative_error",
            &[("criterion", "chebyshev")],
        ));
        base.push(max_where(t, "relative_error", &[("criterion", "baseline")]));
    }
    let (mc, mb) = (mean(&cheb), mean(&base));
    let worst = cheb.iter().copied().fold(0.0, f64::max);
    outcome(
        mc <= mb && worst <= 0.05,
        format!(
            "mean max test error chebyshev {:.2}% vs baseline {:.2}%, chebyshev worst {:.2}% (cap 5%)",
            mc * 100.0,
            mb * 100.0,
            worst * 100.0
        ),
    )
}

fn coverage() -> Outcome {
    let pool = default_pool(derive_seed(9, Purpose::Population, 0));
    let truth = true_mean(&pool, 0).unwrap();
    let scheme = Scheme::Srs { n: 30 };
    let trials = 10_000u64;
    let covered = (0..trials)
        .filter(|&t| {
            let draw = scheme
                .draw(&pool, derive_seed(9, Purpose::Trial, t))
                .unwrap();
            point_estimate(&pool, &draw, 0, 0.95)
                .unwrap()
                .contains(truth)
                .unwrap()
        })
        .count();
    let rate = covered as f64 / trials as f64;
    outcome(
        (0.93..=0.97).contains(&rate),
        format!("coverage {:.2}% over {trials} trials", rate * 100.0),
    )
}

fn run_cli(args: &[&str], threads: Option<&str>) -> Vec<u8> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_regionsel"));
    cmd.args(args);
    if let Some(n) = threads {
        cmd.env("RAYON_NUM_THREADS", n);
    }
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn dir_contents(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    files
}

fn cli_session(root: &Path, threads: Option<&str>) -> BTreeMap<PathBuf, Vec<u8>> {
    std::fs::create_dir_all(root).unwrap();
    let spec = root.join("spec.json");
    std::fs::write(
        &spec,
        r#"{"config_means":[0.6,0.5,0.45,0.4],"std_slope":0.3,"coupling":[0.9,0.95,1.0,0.98],"region_count":500}"#,
    )
    .unwrap();
    let cfg = root.join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"master_seed":77,"pools":[{"source":"csv","path":"pool.csv"}],"sample_size":12,"trials":200,"rss_cycles":[1,2,3],"train_configs":[0,1]}"#,
    )
    .unwrap();
    let s = |p: &Path| p.to_str().unwrap().to_owned();
    let pool = s(&root.join("pool.csv"));
    run_cli(
        &["gen", "--spec", &s(&spec), "--seed", "7", "--out", &pool],
        threads,
    );
    run_cli(
        &[
            "summary",
            "--pool",
            &pool,
            "--out",
            &s(&root.join("summary.csv")),
        ],
        threads,
    );
    let captures = [
        (
            "sample_srs.json",
            vec!["sample", "--pool", &pool, "--srs", "20", "--seed", "3"],
        ),
        (
            "sample_rss.json",
            vec![
                "sample",
                "--pool",
                &pool,
                "--rss",
                "2",
                "5",
                "--rank-config",
                "1",
                "--seed",
                "3",
            ],
        ),
        (
            "select_baseline.json",
            vec![
                "select", "--pool", &pool, "--srs", "15", "--trials", "300", "--seed", "5",
            ],
        ),
        (
            "select_chebyshev.json",
            vec![
                "select",
                "--pool",
                &pool,
                "--rss",
                "3",
                "5",
                "--trials",
                "300",
                "--criterion",
                "chebyshev",
                "--train-configs",
                "0,1",
                "--seed",
                "5",
            ],
        ),
        (
            "select_correlation.json",
            vec![
                "select",
                "--pool",
                &pool,
                "--srs",
                "15",
                "--trials",
                "300",
                "--criterion",
                "correlation",
                "--train-configs",
                "0,1,2",
                "--seed",
                "5",
            ],
        ),
    ];
    for (file, args) in captures {
        std::fs::write(root.join(file), run_cli(&args, threads)).unwrap();
    }
    for name in ExperimentName::ALL {
        run_cli(
            &[
                "experiment",
                name.as_str(),
                "--config",
                &s(&cfg),
                "--out-dir",
                &s(&root.join("out")),
            ],
            threads,
        );
    }
    dir_contents(root)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let a = cli_session(&tmp.path().join("a"), None);
    let b = cli_session(&tmp.path().join("b"), None);
    let serial = cli_session(&tmp.path().join("serial"), Some("1"));
    let wide = cli_session(&tmp.path().join("wide"), Some("8"));
    let cli_same = a == b && a == serial && a == wide;

    // In-process: the same experiment on a one-thread pool and on the global pool.
    let cfg = ExperimentConfig {
        sample_size: 12,
        trials: 300,
        ..ExperimentConfig::new(31)
    };
    let pools = load_pools(&cfg, Path::new(".")).unwrap();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let mut lib_same = true;
    for name in ExperimentName::ALL {
        let serial = one.install(|| run_on_pools(name, &cfg, &pools).unwrap().files().unwrap());
        let parallel = run_on_pools(name, &cfg, &pools).unwrap().files().unwrap();
        lib_same &= serial == parallel;
    }
    outcome(
        cli_same && lib_same && a.len() >= 16,
        format!(
            "{} CLI output files identical across reruns and thread counts: {cli_same}; library experiments identical on 1 thread: {lib_same}",
            a.len()
        ),
    )
}

fn ranking_identity() -> Outcome {
    let pool = default_pool(derive_seed(11, Purpose::Population, 0));
    let mut points = 0;
    let mut mismatches = 0;
    for c in 0..pool.config_count() {
        for (m, k) in [(1, 30), (3, 10), (2, 7)] {
            let scheme = Scheme::Rss {
                cycles: m,
                set_size: k,
                ranking_config: c,
            };
            for t in 0..5 {
                let draw = scheme
                    .draw(&pool, derive_seed(11, Purpose::Trial, t))
                    .unwrap();
                for p in ranking_accuracy(&draw, &pool, c).unwrap() {
                    points += 1;
                    mismatches += usize::from(p.true_rank != p.position);
                }
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("{points} ranked units, {mismatches} off the identity line"),
    )
}

type Check = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Check; 11] = [
        ("walkthrough selection", walkthrough),
        ("margin of error spot value", margin_spot_value),
        ("srs enumeration oracle", enumeration_oracle),
        ("unbiasedness", unbiasedness),
        ("rss variance reduction", variance_reduction),
        ("analytical vs empirical interval", analytical_vs_empirical),
        ("repeated subsampling cap", repeated_subsampling_headline),
        ("multi-config generalization", multi_config_generalization),
        ("interval coverage", coverage),
        ("determinism", determinism),
        ("ranking identity", ranking_identity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| (*s).to_owned()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!result.pass);
        println!(
            "acceptance {:>2} {:<34} {} ({}; {:.2}s)",
            i + 1,
            name,
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
