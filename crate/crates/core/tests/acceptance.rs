//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::strategy::Strategy as _;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use thoughtprune::condense::{condense_dataset, plan_indices, CondenseConfig, Strategy};
use thoughtprune::mi::{digamma, estimate_mi, mi_from_stats, neighbor_stats, validate_gaussian, MiError, MiOptions};
use thoughtprune::perturb::{perturb_dataset, select_perturb_indices, PerturbationConfig, Region, SentencePool};
use thoughtprune::rng::streams;
use thoughtprune::trace::{
    join, read_dataset, segment, write_dataset, FieldMapping, ReadMode, ReflectionLexicon,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn formula_fidelity() -> Outcome {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut fallbacks = 0usize;
    for n in 1..=200 {
        for tau in RATIO_GRID {
            for strategy in Strategy::ALL {
                let seed = (n as u64) * 1_000 + tau.num as u64;
                let plan = plan_indices(n, tau.as_f64(), strategy, Some(seed)).map_err(|e| e.to_string())?;
                let (want, want_fallback) = match strategy {
                    Strategy::Random => oracle_random(n, tau, seed, streams::CONDENSE),
                    _ => oracle_positional(n, tau, strategy),
                };
                ensure!(
                    plan.omega == want,
                    "{strategy} n={n} tau={}: got {:?}, want {:?}",
                    tau.as_f64(),
                    plan.omega,
                    want
                );
                ensure!(
                    plan.fallback == want_fallback,
                    "{strategy} n={n} tau={}: fallback flag {} want {}",
                    tau.as_f64(),
                    plan.fallback,
                    want_fallback
                );
                ensure!(plan.nominal_retained == tau.num * n / tau.den, "nominal count n={n}");
                fallbacks += usize::from(plan.fallback);
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}, limit 5 s");
    Ok(format!("{checked} plans exact, {fallbacks} flagged fallbacks, {elapsed:.2?}"))
}

fn worked_examples() -> Outcome {
    let cases: [(Strategy, Vec<usize>); 4] = [
        (Strategy::Epic, vec![1, 2, 9, 10]),
        (Strategy::Hoc, (1..=5).collect()),
        (Strategy::Toc, (6..=10).collect()),
        (Strategy::Moc, (3..=8).collect()),
    ];
    for (s, want) in cases {
        let got = plan_indices(10, 0.5, s, None).map_err(|e| e.to_string())?.omega;
        ensure!(got == want, "{s}: got {got:?}, want {want:?}");
    }
    Ok("epic {1,2,9,10}, hoc {1..5}, toc {6..10}, moc {3..8}".into())
}

fn token_budget() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mapping = FieldMapping::default();
    let cfg = CondenseConfig { strategy: Strategy::Epic, tau: 0.5, ..Default::default() };
    let mut sizes = 0;
    for n in 4..=64 {
        let examples: Vec<_> = (0..50).map(|i| uniform_example(i, n)).collect();
        let input = dir.path().join(format!("in_{n}.jsonl"));
        let output = dir.path().join(format!("out_{n}.jsonl"));
        write_dataset(&input, &examples, &mapping).map_err(|e| e.to_string())?;
        let report = condense_dataset(&input, &output, &cfg).map_err(|e| e.to_string())?;
        let back = read_dataset(&output, &mapping, ReadMode::FailFast).map_err(|e| e.to_string())?;
        let want = 2 * (n / 4);
        let mut kept = 0usize;
        for ex in &back.examples {
            let t = segment(&ex.trace, "\n\n").map_err(|e| e.to_string())?;
            ensure!(t.len() == want, "n={n}: kept {} thoughts, want {want}", t.len());
            kept += t.len();
        }
        let recomputed = kept as f64 / (n * examples.len()) as f64;
        ensure!(
            (report.retention - recomputed).abs() <= 1e-12,
            "n={n}: reported retention {} vs recomputed {recomputed}",
            report.retention
        );
        ensure!(report.fallback_count == 0, "n={n}: unexpected fallback");
        sizes += 1;
    }

    // Mixed lengths: retention must equal sum |omega_i| / sum n_i from the literal formula.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let ns: Vec<usize> = (0..300).map(|_| rng.random_range(1..=60)).collect();
    let examples: Vec<_> = ns.iter().enumerate().map(|(i, &n)| uniform_example(i, n)).collect();
    let input = dir.path().join("mixed.jsonl");
    let output = dir.path().join("mixed_out.jsonl");
    write_dataset(&input, &examples, &mapping).map_err(|e| e.to_string())?;
    let report = condense_dataset(&input, &output, &cfg).map_err(|e| e.to_string())?;
    let kept: usize = ns.iter().map(|&n| oracle_positional(n, Ratio::new(1, 2), Strategy::Epic).0.len()).sum();
    let total: usize = ns.iter().sum();
    let want = kept as f64 / total as f64;
    ensure!((report.retention - want).abs() <= 1e-12, "mixed: {} vs {want}", report.retention);
    Ok(format!("{sizes} uniform sizes keep 2*floor(n/4); mixed retention {want:.6} matches"))
}

fn kraskov_gaussian() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    for rho in [0.0, 0.5, 0.9] {
        for seed in 1..=5 {
            let start = Instant::now();
            let r = validate_gaussian(2000, 5, rho, seed, Some(0.1)).map_err(|e| e.to_string())?;
            let elapsed = start.elapsed();
            ensure!(r.pass, "rho={rho} seed={seed}: estimate {} truth {} error {}", r.estimate, r.truth, r.error);
            ensure!(elapsed < Duration::from_secs(30), "rho={rho} seed={seed} took {elapsed:?}");
            worst = worst.max(r.error.abs());
            slowest = slowest.max(elapsed);
        }
    }
    Ok(format!("15 cases within 0.1 nats (worst {worst:.4}), slowest {slowest:.2?}"))
}

fn kraskov_brute_force() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut degenerate = 0;
    for case in 0..50 {
        let m = rng.random_range(6..=50);
        let d_a = rng.random_range(1..=8);
        let d_b = rng.random_range(1..=8);
        let k = rng.random_range(1..=5.min(m - 1));
        let quantized = case % 2 == 1;
        let ra = random_rows(&mut rng, m, d_a, quantized);
        let rb = random_rows(&mut rng, m, d_b, quantized);
        let (a, b) = (matrix(&ra), matrix(&rb));
        let brute = brute_force_rows(&ra, &rb, k);
        let has_zero = brute.iter().any(|r| r.radius == 0.0);
        match neighbor_stats(&a, &b, k) {
            Err(MiError::Degenerate { .. }) if has_zero => {
                degenerate += 1;
                continue;
            }
            Err(e) => return Err(format!("case {case}: {e}")),
            Ok(_) if has_zero => return Err(format!("case {case}: zero radius not reported")),
            Ok(stats) => {
                for (i, (s, r)) in stats.iter().zip(&brute).enumerate() {
                    ensure!(
                        s.radius.to_bits() == r.radius.to_bits(),
                        "case {case} row {i}: radius {} vs {}",
                        s.radius,
                        r.radius
                    );
                    ensure!(
                        (s.count_a, s.count_b) == (r.count_a, r.count_b),
                        "case {case} row {i}: counts {:?} vs {:?}",
                        (s.count_a, s.count_b),
                        (r.count_a, r.count_b)
                    );
                }
                let value = mi_from_stats(&stats, k);
                let want = brute_force_mi(&brute, k);
                ensure!((value - want).abs() <= 1e-12, "case {case}: value {value} vs {want}");
                let opts = MiOptions { k, allow_dim_mismatch: true, ..Default::default() };
                let est = estimate_mi(&a, &b, &opts).map_err(|e| e.to_string())?;
                ensure!(est.value.to_bits() == value.to_bits(), "case {case}: estimate_mi differs from its stats");
                worst = worst.max((value - want).abs());
            }
        }
    }
    Ok(format!("50 pairs: radii and counts bit-identical, max value gap {worst:.1e}, {degenerate} degenerate"))
}

fn digamma_values() -> Outcome {
    const GAMMA: f64 = 0.577_215_664_901_532_9;
    let known = [
        (1.0, -GAMMA),
        (2.0, 1.0 - GAMMA),
        (0.5, -GAMMA - 2.0 * std::f64::consts::LN_2),
    ];
    for (x, want) in known {
        let got = digamma(x).map_err(|e| e.to_string())?;
        ensure!((got - want).abs() <= 1e-10, "psi({x}) = {got}, want {want}");
    }
    let mut worst: f64 = 0.0;
    for x in [0.5, 1.0, 2.0, 10.0, 100.0] {
        let r = (digamma(x + 1.0).unwrap() - digamma(x).unwrap() - 1.0 / x).abs();
        ensure!(r <= 1e-10, "recurrence residual at {x} is {r}");
        worst = worst.max(r);
    }
    Ok(format!("psi(1), psi(2), psi(0.5) within 1e-10; max recurrence residual {worst:.1e}"))
}

fn is_subsequence(needle: &[String], hay: &[String]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

fn perturbation_invariants() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mapping = FieldMapping::default();
    let lexicon = ReflectionLexicon::default();
    let pool = SentencePool::from_file(data_dir().join("sample_pool.txt"), &lexicon).map_err(|e| e.to_string())?;
    let examples = synthetic_dataset(7, 1000, 1..=16);
    let input = dir.path().join("in.jsonl");
    write_dataset(&input, &examples, &mapping).map_err(|e| e.to_string())?;
    let cfg = PerturbationConfig::new(Region::Middle, 0.5, lexicon.clone(), pool, 1234);

    let out1 = dir.path().join("p1.jsonl");
    let out2 = dir.path().join("p2.jsonl");
    let out3 = dir.path().join("p3.jsonl");
    let report = perturb_dataset(&input, &out1, &cfg, "\n\n", &mapping, ReadMode::FailFast).map_err(|e| e.to_string())?;
    perturb_dataset(&input, &out2, &cfg, "\n\n", &mapping, ReadMode::FailFast).map_err(|e| e.to_string())?;
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    single
        .install(|| perturb_dataset(&input, &out3, &cfg, "\n\n", &mapping, ReadMode::FailFast))
        .map_err(|e| e.to_string())?;

    let bytes1 = std::fs::read(&out1).map_err(|e| e.to_string())?;
    ensure!(bytes1 == std::fs::read(&out2).unwrap(), "two runs with one seed differ");
    ensure!(bytes1 == std::fs::read(&out3).unwrap(), "single-thread run differs");

    let back = read_dataset(&out1, &mapping, ReadMode::FailFast).map_err(|e| e.to_string())?;
    ensure!(back.examples.len() == examples.len(), "example count changed");
    let labels = |text: &str| -> Vec<String> { lexicon.find(text).iter().map(|m| lexicon.marker_label(m.marker)).collect() };
    let mut markers = 0usize;
    let mut perturbed = 0usize;
    for (i, (orig, new)) in examples.iter().zip(&back.examples).enumerate() {
        ensure!(orig.question == new.question && orig.answer == new.answer, "example {i}: question/answer changed");
        let a = segment(&orig.trace, "\n\n").unwrap();
        let b = segment(&new.trace, "\n\n").map_err(|e| format!("example {i}: {e}"))?;
        ensure!(a.len() == b.len(), "example {i}: {} thoughts became {}", a.len(), b.len());
        ensure!(a.wrapper() == b.wrapper(), "example {i}: think wrapper changed");
        let selected = select_perturb_indices(a.len(), Region::Middle, 0.5).unwrap();
        for t in 1..=a.len() {
            let (x, y) = (&a.thoughts()[t - 1], &b.thoughts()[t - 1]);
            if selected.contains(&t) {
                let before = labels(x);
                ensure!(is_subsequence(&before, &labels(y)), "example {i} thought {t}: markers lost\n{x}\n{y}");
                markers += before.len();
                perturbed += 1;
            } else {
                ensure!(x == y, "example {i} thought {t}: unselected thought changed");
            }
        }
    }
    ensure!(report.markers_after >= report.markers_before, "report marker counts dropped");
    ensure!(report.thoughts_perturbed == perturbed, "report perturbed count mismatch");
    Ok(format!("1000 examples, {perturbed} thoughts perturbed, {markers} markers preserved, byte-reproducible"))
}

fn canonical_trace() -> impl proptest::strategy::Strategy<Value = (String, String)> {
    let thought = "[a-zA-Z0-9 ,.?!()=+*-]{0,12}(\n[a-zA-Z0-9 ,.?!]{1,12}){0,2}";
    let delimiter = prop_oneof![4 => Just("\n\n".to_owned()), 1 => Just("|".to_owned()), 1 => Just("###".to_owned())];
    (proptest::collection::vec(thought, 1..24), delimiter).prop_filter_map("canonical", |(thoughts, d)| {
        let text = thoughts.join(&d);
        let canonical = !text.contains("<think>")
            && !text.contains("</think>")
            && text.split(d.as_str()).all(|s| !s.trim().is_empty());
        canonical.then_some((text, d))
    })
}

fn segmentation_round_trip() -> Outcome {
    let mut runner = TestRunner::new(PropConfig {
        cases: 10_000,
        failure_persistence: None,
        rng_algorithm: proptest::test_runner::RngAlgorithm::ChaCha,
        ..PropConfig::default()
    });
    runner
        .run(&canonical_trace(), |(text, d)| {
            let trace = segment(&text, &d).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(join(&trace), text);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("10000 randomized canonical traces round-trip".into())
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("condensation formula fidelity", formula_fidelity),
        ("worked index examples", worked_examples),
        ("token-budget property", token_budget),
        ("kraskov analytic oracle", kraskov_gaussian),
        ("kraskov brute-force oracle", kraskov_brute_force),
        ("digamma", digamma_values),
        ("perturbation invariants", perturbation_invariants),
        ("segmentation round trip", segmentation_round_trip),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail} ({secs:.2}s)"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name}: {why} ({secs:.2}s)");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
