//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Runs without the libtest harness so the lines always
//! reach the console.

mod common;

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use relstab::annotation::Pairing;
use relstab::association::{compare_item_groups, Axis, ItemGroup};
use relstab::reliability::{bootstrap_ci, Distance, IccModel};
use relstab::stability::{PermutationOptions, DEFAULT_BUCKET_EDGES};
use relstab::{
    build_repeat_pairs, classify_dataset, classify_items, cohens_kappa, fleiss_kappa, icc,
    interval_profile, krippendorff_alpha, permutation_p, phi, simulate, validate_dataset,
    BootstrapOptions, ContingencyTable, ItemCause, LabelSchema, MetricSpec, QuadrantThresholds,
    RawRecord, RoundSelector, SimConfig,
};
use serde_json::Value;

const R1: RoundSelector = RoundSelector::Round(1);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn close(a: relstab::Result<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Ok(x), Some(y)) => (x - y).abs() <= tol,
        (Err(e), None) => e.is_degenerate(),
        _ => false,
    }
}

fn criterion_1() -> Outcome {
    let tol = 1e-9;
    let mut checked = 0;
    let mut mismatches = 0;
    for items in 1..=3 {
        for annotators in 1..=3 {
            for grid in all_grids(items, annotators, 2) {
                let set = set_from_grid(&grid, 2);
                let units = units_of(&grid);
                let mut ok = close(
                    krippendorff_alpha(&set, R1, Some(Distance::Nominal)).map(|r| r.value),
                    oracle_alpha_nominal(&units),
                    tol,
                );
                if annotators >= 2 {
                    ok &= close(
                        fleiss_kappa(&set, R1).map(|r| r.value),
                        oracle_fleiss(&units, 2),
                        tol,
                    );
                }
                if annotators == 2 {
                    ok &= close(
                        cohens_kappa(&set, "a0", "a1", R1).map(|r| r.value),
                        oracle_cohen(&column(&grid, 0), &column(&grid, 1), 2),
                        tol,
                    );
                }
                checked += 1;
                mismatches += usize::from(!ok);
            }
        }
    }
    let mut rng = rng(1);
    for _ in 0..200 {
        let (grid, k) = random_sparse_grid(&mut rng);
        let set = set_from_grid(&grid, k);
        let ok = close(
            krippendorff_alpha(&set, R1, Some(Distance::Nominal)).map(|r| r.value),
            oracle_alpha_nominal(&units_of(&grid)),
            tol,
        );
        checked += 1;
        mismatches += usize::from(!ok);
    }
    outcome(
        mismatches == 0,
        format!("{mismatches} mismatches over {checked} datasets (tol 1e-9)"),
    )
}

fn two_raters(a: &[&str], b: &[&str], categories: &[&str]) -> relstab::AnnotationSet {
    let schema = LabelSchema::nominal("t", categories).unwrap();
    let recs = [("A", a), ("B", b)].into_iter().flat_map(|(ann, labels)| {
        labels
            .iter()
            .enumerate()
            .map(move |(i, l)| RawRecord::new("t", &format!("i{i}"), ann, 1, l))
    });
    validate_dataset(recs, &schema).unwrap()
}

fn criterion_2() -> Outcome {
    let tol = 1e-9;
    let kappa = cohens_kappa(
        &two_raters(&["x", "x", "y", "y"], &["x", "x", "y", "x"], &["x", "y"]),
        "A",
        "B",
        R1,
    )
    .unwrap()
    .value;

    let schema = LabelSchema::nominal("t", ["x", "y"]).unwrap();
    let recs = [("i1", ["x", "x", "y"]), ("i2", ["y", "y", "y"])]
        .into_iter()
        .flat_map(|(item, labels)| {
            labels
                .into_iter()
                .enumerate()
                .map(move |(j, l)| RawRecord::new("t", item, &format!("r{j}"), 1, l))
        });
    let fleiss = fleiss_kappa(&validate_dataset(recs, &schema).unwrap(), R1)
        .unwrap()
        .value;

    let alpha = krippendorff_alpha(
        &two_raters(&["a", "a", "b", "b"], &["a", "a", "b", "a"], &["a", "b"]),
        R1,
        None,
    )
    .unwrap()
    .value;

    let schema = LabelSchema::interval("t", (1..=4).map(|v| (v.to_string(), v as f64))).unwrap();
    let recs = [("i1", ["1", "2"]), ("i2", ["3", "4"])]
        .into_iter()
        .flat_map(|(item, labels)| {
            labels
                .into_iter()
                .enumerate()
                .map(move |(j, l)| RawRecord::new("t", item, &format!("r{j}"), 1, l))
        });
    let icc11 = icc(
        &validate_dataset(recs, &schema).unwrap(),
        R1,
        IccModel::OnewayRandom,
    )
    .unwrap()
    .value;

    let checks = [
        (kappa, 0.5),
        (fleiss, 0.25),
        (alpha, 8.0 / 15.0),
        (icc11, 3.5 / 4.5),
    ];
    let pass = checks.iter().all(|(v, want)| (v - want).abs() <= tol);
    outcome(
        pass,
        format!("kappa={kappa:.12} fleiss={fleiss:.12} alpha={alpha:.12} (8/15) icc11={icc11:.12} (tol 1e-9)"),
    )
}

fn criterion_3() -> Outcome {
    let neg = phi(&ContingencyTable::new(10, 0, 0, 10)).unwrap().phi;
    let pos = phi(&ContingencyTable::new(0, 10, 10, 0)).unwrap().phi;
    let mut rng = rng(3);
    let mut worst: f64 = 0.0;
    let mut tables = 0;
    while tables < 200 {
        use rand::Rng;
        let [a, b, c, d] = [(); 4].map(|_| rng.random_range(0..40u64));
        let t = ContingencyTable::new(a, b, c, d);
        if t.margins().contains(&0) {
            continue;
        }
        tables += 1;
        let diff = (phi(&t).unwrap().phi.abs() - pearson_of_table(a, b, c, d).abs()).abs();
        worst = worst.max(diff);
    }
    outcome(
        neg == -1.0 && pos == 1.0 && worst <= 1e-9,
        format!("phi(10,0,0,10)={neg} phi(0,10,10,0)={pos} max||phi|-|r||={worst:.2e} over {tables} tables"),
    )
}

fn criterion_4() -> Outcome {
    let thresholds = QuadrantThresholds::default();
    let mut lines = Vec::new();
    let mut pass = true;
    for cause in ItemCause::ALL {
        let hits: usize = (0..100u64)
            .map(|seed| {
                let cfg = SimConfig::single_cause(cause, 40, 100)
                    .with_error(0.02)
                    .with_seed(seed);
                let (set, _) = simulate(&cfg).unwrap();
                usize::from(
                    classify_dataset(&set, &thresholds).unwrap().quadrant
                        == cause.expected_quadrant(),
                )
            })
            .sum();
        pass &= hits >= 95;
        lines.push(format!("{cause}={hits}/100"));
    }
    outcome(pass, format!("{} (need >= 95 each)", lines.join(" ")))
}

fn criterion_5() -> Outcome {
    let mut subj_rel = 0;
    let mut subj_stab = 0;
    let seeds = 20u64;
    let mut worst = (f64::INFINITY, f64::INFINITY);
    for seed in 0..seeds {
        let cfg = SimConfig::new(
            20,
            [
                (ItemCause::Straightforward, 40),
                (ItemCause::Subjective, 40),
                (ItemCause::Ambiguous, 40),
            ],
        )
        .with_error(0.02)
        .with_seed(seed);
        let (set, truth) = simulate(&cfg).unwrap();
        let items = classify_items(
            &set,
            &QuadrantThresholds::for_metrics(
                relstab::reliability::MetricName::PercentAgreement,
                relstab::quadrant::StabilityMetric::ExactRate,
            ),
        )
        .unwrap();
        let groups: BTreeMap<String, ItemGroup> = truth
            .causes
            .iter()
            .filter_map(|(id, c)| c.item_group().map(|g| (id.clone(), g)))
            .collect();
        let opts = BootstrapOptions::with_seed(seed);
        let rel = compare_item_groups(
            &items.assignments,
            &groups,
            ItemGroup::Straightforward,
            ItemGroup::Subjective,
            Axis::Reliability,
            &opts,
        )
        .unwrap();
        let stab = compare_item_groups(
            &items.assignments,
            &groups,
            ItemGroup::Subjective,
            ItemGroup::AmbiguousDifficult,
            Axis::Stability,
            &opts,
        )
        .unwrap();
        subj_rel += usize::from(rel.difference > 0.0 && rel.ci.0 > 0.0);
        subj_stab += usize::from(stab.difference > 0.0 && stab.ci.0 > 0.0);
        worst = (worst.0.min(rel.ci.0), worst.1.min(stab.ci.0));
    }
    outcome(
        subj_rel == seeds as usize && subj_stab == seeds as usize,
        format!(
            "lower reliability than straightforward: {subj_rel}/{seeds}; higher stability than ambiguous: {subj_stab}/{seeds}; smallest CI lower bounds {:.3}, {:.3}",
            worst.0, worst.1
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut cfg = SimConfig::single_cause(ItemCause::Straightforward, 20, 100);
    cfg.rounds = 4;
    cfg.interval_per_round = vec![600, 172_800, 1_814_400];
    cfg.drift = 0.05;
    let seeds = 50u64;
    let mut rho = 0.0;
    let mut monotone = 0;
    for seed in 0..seeds {
        let (set, _) = simulate(&cfg.clone().with_seed(seed)).unwrap();
        let pairs = build_repeat_pairs(&set, Pairing::Consecutive).unwrap();
        let profile = interval_profile(
            &pairs,
            &DEFAULT_BUCKET_EDGES,
            &PermutationOptions {
                replicates: 200,
                seed,
            },
        )
        .unwrap();
        rho += profile.trend.rho;
        monotone += usize::from(profile.is_non_increasing());
    }
    let mean = rho / seeds as f64;
    outcome(
        mean < 0.0 && monotone * 10 >= seeds as usize * 9,
        format!("mean rho={mean:.3}; non-increasing in {monotone}/{seeds} seeds (need >= 90%)"),
    )
}

fn criterion_7() -> Outcome {
    let mut failures = Vec::new();
    // perfect agreement, every chance-corrected metric
    let truth = ["1", "2", "3", "1", "3", "2"];
    let schema = LabelSchema::interval("t", [("1", 1.0), ("2", 2.0), ("3", 3.0)]).unwrap();
    let recs = truth.iter().enumerate().flat_map(|(i, l)| {
        (0..3).map(move |j| RawRecord::new("t", &format!("i{i}"), &format!("a{j}"), 1, l))
    });
    let set = validate_dataset(recs, &schema).unwrap();
    let values = [
        ("cohen", cohens_kappa(&set, "a0", "a1", R1).map(|r| r.value)),
        ("fleiss", fleiss_kappa(&set, R1).map(|r| r.value)),
        (
            "alpha_nominal",
            krippendorff_alpha(&set, R1, Some(Distance::Nominal)).map(|r| r.value),
        ),
        (
            "alpha_ordinal",
            krippendorff_alpha(&set, R1, Some(Distance::Ordinal)).map(|r| r.value),
        ),
        (
            "alpha_interval",
            krippendorff_alpha(&set, R1, Some(Distance::Interval)).map(|r| r.value),
        ),
        (
            "icc_oneway",
            icc(&set, R1, IccModel::OnewayRandom).map(|r| r.value),
        ),
        (
            "icc_twoway",
            icc(&set, R1, IccModel::TwowayRandomSingle).map(|r| r.value),
        ),
    ];
    for (name, v) in values {
        if !matches!(v, Ok(x) if (x - 1.0).abs() <= 1e-12) {
            failures.push(format!("{name}={v:?}"));
        }
    }
    // determinism
    let cfg = SimConfig::new(8, ItemCause::ALL.map(|c| (c, 6)))
        .with_error(0.1)
        .with_seed(5);
    let (a, _) = simulate(&cfg).unwrap();
    let (b, _) = simulate(&cfg).unwrap();
    if a.to_csv_string().unwrap() != b.to_csv_string().unwrap() {
        failures.push("simulation bytes differ".into());
    }
    let opts = BootstrapOptions::with_seed(9);
    let spec = MetricSpec::default();
    if bootstrap_ci(&spec, &a, R1, &opts).unwrap() != bootstrap_ci(&spec, &a, R1, &opts).unwrap() {
        failures.push("bootstrap differs".into());
    }
    let t = ContingencyTable::new(7, 3, 2, 9);
    if permutation_p(&t, 5000, 4).unwrap() != permutation_p(&t, 5000, 4).unwrap() {
        failures.push("permutation differs".into());
    }
    let dir = tempfile::tempdir().unwrap();
    let ann = dir.path().join("a.csv");
    std::fs::write(&ann, a.to_csv_string().unwrap()).unwrap();
    let sch = dir.path().join("s.json");
    std::fs::write(&sch, serde_json::to_string(a.schema()).unwrap()).unwrap();
    let config = relstab::cli::RunConfig {
        annotations: Some(ann),
        schema: Some(sch),
        seed: Some(2),
        replicates: 300,
        ..Default::default()
    };
    let render = || {
        let out = relstab::cli::execute(relstab::cli::Command::Reliability, &config).unwrap();
        relstab::report::to_json_string(&out.report)
    };
    if render() != render() {
        failures.push("report bytes differ".into());
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "7 chance-corrected metrics = 1.0 (tol 1e-12); simulation, bootstrap, permutation, report bytes identical"
                .to_string()
        } else {
            failures.join("; ")
        },
    )
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sim = d.join("sim.json");
    std::fs::write(
        &sim,
        r#"{"n_annotators": 30, "items_per_cause": {"straightforward": 40, "subjective": 40, "ambiguous": 40, "difficult": 40, "value_shift": 40}, "base_error": 0.02, "seed": 8}"#,
    )
    .unwrap();
    let out = d.join("out");
    let p = |name: &str| out.join(name).display().to_string();
    let start = Instant::now();
    let steps: [Vec<String>; 4] = [
        vec![
            "simulate".into(),
            "--simulation".into(),
            sim.display().to_string(),
            "--recovery".into(),
        ],
        vec![
            "matrix".into(),
            "--annotations".into(),
            p("annotations.csv"),
            "--schema".into(),
            p("schema.json"),
        ],
        vec![
            "phi".into(),
            "--annotations".into(),
            p("annotations.csv"),
            "--schema".into(),
            p("schema.json"),
            "--rationalisations".into(),
            p("rationalisations.csv"),
            "--seed".into(),
            "1".into(),
        ],
        vec!["report".into()],
    ];
    for args in steps {
        let o = Command::new(env!("CARGO_BIN_EXE_relstab"))
            .args(&args)
            .arg("--out-dir")
            .arg(&out)
            .output()
            .unwrap();
        if !o.status.success() {
            return outcome(
                false,
                format!(
                    "{} exited {:?}: {}",
                    args[0],
                    o.status.code(),
                    String::from_utf8_lossy(&o.stderr)
                ),
            );
        }
    }
    let elapsed = start.elapsed();
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let schema: Value = serde_json::from_str(relstab::report::REPORT_SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(&report)
        .map(|e| e.to_string())
        .collect();
    let sections = report["result"]["sections"].as_array().map_or(0, Vec::len);
    outcome(
        errors.is_empty() && elapsed < Duration::from_secs(60) && sections == 3,
        format!(
            "exit 0 for all steps in {:.2}s (limit 60s); {sections} sections; schema errors: {}",
            elapsed.as_secs_f64(),
            if errors.is_empty() {
                "none".to_string()
            } else {
                errors.join(" | ")
            }
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() {
    let criteria: [Criterion; 8] = [
        (
            "1 metric oracle equivalence",
            criterion_1,
            Some(Duration::from_secs(30)),
        ),
        ("2 hand-derived fixtures", criterion_2, None),
        ("3 phi conformance", criterion_3, None),
        (
            "4 quadrant recovery",
            criterion_4,
            Some(Duration::from_secs(120)),
        ),
        ("5 item hypotheses in silico", criterion_5, None),
        ("6 interval degradation", criterion_6, None),
        ("7 trivial exactness and determinism", criterion_7, None),
        (
            "8 end-to-end CLI",
            criterion_8,
            Some(Duration::from_secs(60)),
        ),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let mut o = run();
        let took = start.elapsed();
        if let Some(limit) = limit {
            if took > limit {
                o.pass = false;
                o.detail
                    .push_str(&format!("; over runtime limit {}s", limit.as_secs()));
            }
        }
        failed += usize::from(!o.pass);
        println!(
            "{} criterion {name}: {} [{:.2}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
