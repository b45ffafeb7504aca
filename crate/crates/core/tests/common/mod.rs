//! Independent oracles and synthetic data shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thoughtprune::condense::Strategy;
use thoughtprune::mi::EmbeddingMatrix;
use thoughtprune::trace::CoTExample;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// Ratio as an exact fraction `num / den`.
#[derive(Debug, Clone, Copy)]
pub struct Ratio {
    pub num: usize,
    pub den: usize,
}

impl Ratio {
    pub const fn new(num: usize, den: usize) -> Self {
        Self { num, den }
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

pub const RATIO_GRID: [Ratio; 7] = [
    Ratio::new(1, 100),
    Ratio::new(5, 100),
    Ratio::new(10, 100),
    Ratio::new(25, 100),
    Ratio::new(50, 100),
    Ratio::new(75, 100),
    Ratio::new(99, 100),
];

/// Expected plan from the set definitions, evaluated in integer arithmetic.
/// Returns the index set and whether the min-keep rule had to supply it.
pub fn oracle_positional(n: usize, tau: Ratio, strategy: Strategy) -> (Vec<usize>, bool) {
    if tau.num == tau.den {
        return ((1..=n).collect(), false);
    }
    let floor_tau_n = tau.num * n / tau.den;
    let set: BTreeSet<usize> = match strategy {
        Strategy::Epic => {
            let h = tau.num * n / (2 * tau.den);
            (1..=n).filter(|&i| i <= h || i >= n + 1 - h).collect()
        }
        Strategy::Hoc => (1..=n).filter(|&i| i <= floor_tau_n).collect(),
        Strategy::Toc => (1..=n).filter(|&i| i + floor_tau_n > n).collect(),
        Strategy::Moc => {
            let h = (tau.den - tau.num) * n / (2 * tau.den);
            (1..=n).filter(|&i| i > h && i <= n - h).collect()
        }
        Strategy::Random => unreachable!("random plans are checked separately"),
    };
    if !set.is_empty() {
        return (set.into_iter().collect(), false);
    }
    let fallback = match strategy {
        Strategy::Epic if n == 1 => vec![1],
        Strategy::Epic => vec![1, n],
        Strategy::Hoc => vec![1],
        Strategy::Toc => vec![n],
        Strategy::Moc => vec![n.div_ceil(2)],
        Strategy::Random => unreachable!(),
    };
    (fallback, true)
}

/// Partial Fisher-Yates over 1..=n driven by a raw ChaCha8 stream, written
/// from the documented procedure rather than the library code.
pub fn oracle_random(n: usize, tau: Ratio, seed: u64, stream: u64) -> (Vec<usize>, bool) {
    if tau.num == tau.den {
        return ((1..=n).collect(), false);
    }
    let floor_tau_n = tau.num * n / tau.den;
    let count = floor_tau_n.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut bounded = |range: u64| -> u64 {
        // Accept x only above 2^64 mod range.
        let reject_below = ((u128::from(u64::MAX) + 1) % u128::from(range)) as u64;
        loop {
            let x = rng.next_u64();
            if x >= reject_below {
                return x % range;
            }
        }
    };
    let mut slots: Vec<usize> = (1..=n).collect();
    for i in 0..count {
        let j = i + bounded((n - i) as u64) as usize;
        slots.swap(i, j);
    }
    let mut chosen = slots[..count].to_vec();
    chosen.sort();
    (chosen, floor_tau_n == 0)
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// psi at a positive integer via harmonic numbers: psi(n) = H_{n-1} - gamma.
pub fn digamma_int(n: usize) -> f64 {
    assert!(n >= 1);
    let mut h = 0.0;
    for j in (1..n).rev() {
        h += 1.0 / j as f64;
    }
    h - EULER_GAMMA
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteRow {
    pub radius: f64,
    pub count_a: usize,
    pub count_b: usize,
}

/// Nested-loop KSG statistics: full sort for the k-th joint distance, strict
/// counts in each marginal space.
pub fn brute_force_rows(a: &[Vec<f64>], b: &[Vec<f64>], k: usize) -> Vec<BruteRow> {
    let m = a.len();
    let cheb = |x: &[f64], y: &[f64]| -> f64 {
        let mut d = 0.0f64;
        for (p, q) in x.iter().zip(y) {
            let diff = (p - q).abs();
            if diff > d {
                d = diff;
            }
        }
        d
    };
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let mut joint = Vec::new();
        for j in 0..m {
            if j != i {
                joint.push(cheb(&a[i], &a[j]).max(cheb(&b[i], &b[j])));
            }
        }
        joint.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let radius = joint[k - 1];
        let mut count_a = 0;
        let mut count_b = 0;
        for j in 0..m {
            if j == i {
                continue;
            }
            if cheb(&a[i], &a[j]) < radius {
                count_a += 1;
            }
            if cheb(&b[i], &b[j]) < radius {
                count_b += 1;
            }
        }
        rows.push(BruteRow { radius, count_a, count_b });
    }
    rows
}

pub fn brute_force_mi(rows: &[BruteRow], k: usize) -> f64 {
    let m = rows.len();
    let sum: f64 = rows.iter().map(|r| digamma_int(r.count_a + 1) + digamma_int(r.count_b + 1)).sum();
    digamma_int(k) + digamma_int(m) - sum / m as f64
}

pub fn random_rows(rng: &mut ChaCha8Rng, m: usize, d: usize, quantized: bool) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| {
            (0..d)
                .map(|_| {
                    let v: f64 = rng.random_range(-2.0..2.0);
                    if quantized {
                        (v * 4.0).round() / 4.0
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect()
}

pub fn matrix(rows: &[Vec<f64>]) -> EmbeddingMatrix {
    EmbeddingMatrix::from_rows(rows).unwrap()
}

const WORDS: &[&str] = &[
    "compute", "the", "sum", "of", "both", "sides", "so", "x", "equals", "four", "check", "term", "factor", "next",
    "value", "is", "seven", "divide", "by", "two", "square", "root", "then", "answer",
];

const CUES: &[&str] = &["Wait,", "Hmm.", "But wait,", "wait", "Actually,", "let me check:", "Therefore", "however"];

/// A reasoning trace with `n` thoughts, some carrying reflection cues.
pub fn synthetic_trace(rng: &mut ChaCha8Rng, n: usize, wrap: bool) -> String {
    let thoughts: Vec<String> = (0..n)
        .map(|t| {
            let mut words: Vec<String> = Vec::new();
            if rng.random_bool(0.4) {
                words.push(CUES[rng.random_range(0..CUES.len())].to_owned());
            }
            let len = rng.random_range(3..12);
            for _ in 0..len {
                words.push(WORDS[rng.random_range(0..WORDS.len())].to_owned());
                if rng.random_bool(0.08) {
                    words.push(CUES[rng.random_range(0..CUES.len())].to_owned());
                }
            }
            format!("{} (step {t}).", words.join(" "))
        })
        .collect();
    let body = thoughts.join("\n\n");
    if wrap {
        format!("<think>\n{body}\n</think>\n\nThe answer is 4.")
    } else {
        body
    }
}

pub fn synthetic_dataset(seed: u64, count: usize, n_range: std::ops::RangeInclusive<usize>) -> Vec<CoTExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = rng.random_range(n_range.clone());
            let wrap = rng.random_bool(0.5);
            let mut ex = CoTExample::new(format!("Question {i}?"), synthetic_trace(&mut rng, n, wrap), format!("{i}")).unwrap();
            ex.id = Some(format!("ex-{i}"));
            ex
        })
        .collect()
}

/// A trace of exactly `n` plain thoughts.
pub fn uniform_example(i: usize, n: usize) -> CoTExample {
    let trace = (1..=n).map(|t| format!("Trace {i} thought {t}: reduce the term.")).collect::<Vec<_>>().join("\n\n");
    CoTExample::new(format!("Q{i}"), trace, "A").unwrap()
}
