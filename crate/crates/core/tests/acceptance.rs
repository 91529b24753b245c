//! Acceptance suite: every criterion at its stated tolerance, one PASS/FAIL
//! line each. Runs without the libtest harness so the lines are always shown:
//! `cargo test -p equidist --test acceptance`.
//!
//! Exits non-zero if a criterion cannot be run, or if a criterion fails that
//! is not listed in KNOWN_FAILURES. Run records go to target/tmp/acceptance/.

use std::path::PathBuf;
use std::time::Instant;

use equidist::harness::{self, ExperimentConfig, ExperimentRecord};

/// Criteria that fail at their stated tolerance for understood reasons (see README).
const KNOWN_FAILURES: &[u32] = &[9];

struct Outcome {
    id: u32,
    pass: bool,
    seconds: f64,
    budget: f64,
    detail: String,
}

fn out_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR"))
        .join("acceptance")
        .join(name)
}

fn record(rec: &ExperimentRecord, name: &str) {
    harness::write_record(rec, &out_dir(name)).expect("write run record");
}

fn checks(rec: &ExperimentRecord, names: &[&str]) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in names {
        let c = rec
            .check_named(n)
            .unwrap_or_else(|| panic!("{} has no check {n}", rec.theorem));
        pass &= c.pass;
        parts.push(format!(
            "{}={} ({})",
            n,
            if c.pass { "ok" } else { "FAIL" },
            c.detail
        ));
    }
    (pass, parts.join("; "))
}

fn base() -> ExperimentConfig {
    ExperimentConfig {
        seed: 20170704,
        ..ExperimentConfig::default()
    }
}

fn main() {
    let mut outcomes = Vec::new();
    // `shared` is time spent in a run whose record several criteria read
    let mut run = |id: u32, budget: f64, shared: f64, f: &mut dyn FnMut() -> (bool, String)| {
        let t0 = Instant::now();
        let (pass, detail) = f();
        let seconds = t0.elapsed().as_secs_f64() + shared;
        let o = Outcome {
            id,
            pass,
            seconds,
            budget,
            detail,
        };
        println!(
            "{} criterion {:>2} [{:.1} s / budget {:.0} s]: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.id,
            o.seconds,
            o.budget,
            o.detail
        );
        outcomes.push(o);
    };

    let selftest = harness::run_selftest(&base()).expect("selftest");
    record(&selftest, "selftest");
    let part = |name: &str| {
        selftest
            .check_named(name)
            .and_then(|c| c.seconds)
            .unwrap_or(selftest.wall_clock_s)
    };
    let (t1, t2) = (part("szego-closed-form"), part("gram-reproducing"));
    run(1, 10.0, t1, &mut || {
        checks(&selftest, &["szego-closed-form"])
    });
    run(2, 60.0, t2, &mut || {
        checks(&selftest, &["gram-reproducing"])
    });

    run(3, 300.0, 0.0, &mut || {
        let cfg = ExperimentConfig {
            weights: vec![1, 2],
            m_grid: (1..=30).map(|j| 2 * j).collect(),
            ..base()
        };
        let rec = harness::run_szego_report(&cfg).expect("szego-report");
        record(&rec, "c3_szego_report");
        checks(&rec, &["certificate", "singular-vanishing"])
    });

    run(4, 600.0, 0.0, &mut || {
        let cfg = ExperimentConfig {
            weights: vec![1, 1],
            m_grid: vec![10, 20, 40],
            trials: Some(50),
            selfcheck: true,
            ..base()
        };
        let rec = harness::run_equidist_cr(&cfg).expect("equidist-cr --selfcheck");
        record(&rec, "c4_selfcheck");
        checks(&rec, &["agreement"])
    });

    run(5, 1800.0, 0.0, &mut || {
        let mut pass = true;
        let mut detail = Vec::new();
        for f in ["one", "re_z1_zbar2"] {
            let cfg = ExperimentConfig {
                weights: vec![1, 1],
                m_grid: vec![10, 20, 40, 80],
                trials: Some(200),
                tolerance: Some(0.05),
                path_tolerance: 0.15,
                test_function: Some(f.into()),
                ..base()
            };
            let rec = harness::run_equidist_cr(&cfg).expect("equidist-cr");
            record(&rec, &format!("c5_free_{f}"));
            let (p, d) = checks(&rec, &["gap-decreasing", "final-gap", "fixed-path"]);
            pass &= p;
            detail.push(format!("f={f}: {d}"));
        }
        (pass, detail.join(" | "))
    });

    run(6, 3600.0, 0.0, &mut || {
        let cfg = ExperimentConfig {
            weights: vec![1, 2],
            m_grid: vec![8, 16, 32],
            trials: Some(100),
            tolerance: Some(0.10),
            test_function: Some("one".into()),
            ..base()
        };
        let rec = harness::run_equidist_cr(&cfg).expect("equidist-cr weighted");
        record(&rec, "c6_weighted");
        checks(&rec, &["final-gap", "expected-within-4se"])
    });

    let t0 = Instant::now();
    let certify = harness::run_bergman_certify(&ExperimentConfig {
        k_grid: (4..=9).collect(),
        ..base()
    })
    .expect("bergman-certify");
    let t_cert = t0.elapsed().as_secs_f64();
    record(&certify, "c7_c8_bergman_certify");
    run(7, 300.0, t_cert, &mut || checks(&certify, &["closed-form"]));
    run(8, 600.0, t_cert, &mut || {
        checks(&certify, &["beta-certificate"])
    });

    run(9, 2700.0, 0.0, &mut || {
        let cfg = ExperimentConfig {
            k_grid: vec![4, 8, 16],
            trials: Some(100),
            tolerance: Some(0.10),
            test_function: Some("one".into()),
            ..base()
        };
        let rec = harness::run_equidist_boundary(&cfg).expect("equidist-boundary");
        record(&rec, "c9_boundary");
        checks(&rec, &["final-gap", "z1-oracle"])
    });

    run(10, 3600.0, 0.0, &mut || {
        let cfg = ExperimentConfig {
            k_grid: vec![4, 6, 8, 12, 16, 24],
            trials: Some(100),
            variance: true,
            test_function: Some("one".into()),
            ..base()
        };
        let rec = harness::run_equidist_boundary(&cfg).expect("equidist-boundary --variance");
        record(&rec, "c10_variance");
        checks(&rec, &["slope"])
    });

    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} criteria pass", outcomes.len());
    let unexpected: Vec<u32> = outcomes
        .iter()
        .filter(|o| !o.pass && !KNOWN_FAILURES.contains(&o.id))
        .map(|o| o.id)
        .collect();
    let over_budget: Vec<u32> = outcomes
        .iter()
        .filter(|o| o.seconds > o.budget)
        .map(|o| o.id)
        .collect();
    if !over_budget.is_empty() {
        println!("over runtime budget: {over_budget:?}");
    }
    assert!(
        unexpected.is_empty(),
        "unexpected failing criteria: {unexpected:?}"
    );
}
