//! Acceptance suite. Each test prints one PASS/FAIL line to stderr, which
//! bypasses the harness's output capture, and then asserts.

use std::io::Write;
use std::process::Command;

use nikdef::sim::sweep_runs;
use nikdef::{
    default_alpha_grid, run, threshold_sweep, ActionId, AttackerKind, Block, BlockId, ForkSet,
    LearningAutomaton, LearningScheme, Owner, Policy, ReinforcementSignal, SimConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

/// (reward, penalty) of pure chance, L_RI, L_PI, L_RP and L_RεP.
const SCHEMES: [(f64, f64); 5] = [
    (0.0, 0.0),
    (0.01, 0.0),
    (0.0, 0.01),
    (0.01, 0.01),
    (0.1, 0.01),
];

fn report(criterion: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "{verdict} {criterion}: {detail}");
    assert!(pass, "{criterion}: {detail}");
}

fn nik(scheme: (f64, f64)) -> SimConfig {
    SimConfig {
        scheme: LearningScheme::new(scheme.0, scheme.1).unwrap(),
        ..SimConfig::default()
    }
}

fn tie() -> SimConfig {
    SimConfig {
        defense: Policy::TieBreaking,
        attacker: AttackerKind::ClassicSm1,
        ..SimConfig::default()
    }
}

fn mean_revenue(base: &SimConfig, alpha: f64) -> f64 {
    let runs = sweep_runs(base, &[alpha], &SEEDS).unwrap();
    runs.iter()
        .map(|(_, r)| r.selfish_relative_revenue)
        .sum::<f64>()
        / runs.len() as f64
}

fn threshold_criterion(name: &str, base: SimConfig, target: f64, tolerance: f64) {
    let sweep = threshold_sweep(&base, &default_alpha_grid(), &SEEDS).unwrap();
    let last = sweep.points.last().unwrap();
    let (pass, detail) = match sweep.threshold {
        Some(t) => (
            (t - target).abs() <= tolerance,
            format!("threshold {t:.4}, expected {target} ± {tolerance}"),
        ),
        None => (
            false,
            format!(
                "no crossing of the fair-share line in (0, 0.5]; mean revenue {:.4} at α = {}, expected {target} ± {tolerance}",
                last.mean, last.alpha
            ),
        ),
    };
    report(name, pass, &detail);
}

#[test]
fn tie_breaking_threshold() {
    threshold_criterion(
        "tie-breaking threshold (classic SM1, γ=0.5)",
        tie(),
        0.25,
        0.03,
    );
}

#[test]
fn nik_threshold_reward_epsilon_penalty() {
    threshold_criterion(
        "Nik threshold, L_RεP a=0.1 b=0.01, K∈[1,3], τ=5, θ=10τ",
        nik((0.1, 0.01)),
        0.45,
        0.04,
    );
}

#[test]
fn nik_threshold_pure_chance() {
    threshold_criterion("Nik threshold, pure chance", nik((0.0, 0.0)), 0.43, 0.04);
}

#[test]
fn nik_never_worse_than_tie_breaking() {
    let mut pass = true;
    let mut detail = Vec::new();
    for alpha in [0.30, 0.35, 0.40] {
        let t = mean_revenue(&tie(), alpha);
        for scheme in SCHEMES {
            let n = mean_revenue(&nik(scheme), alpha);
            pass &= n <= t;
            if scheme == (0.1, 0.01) || n > t {
                detail.push(format!("α={alpha}: nik{scheme:?} {n:.4} vs tie {t:.4}"));
            }
        }
    }
    report(
        "Nik revenue ≤ tie-breaking revenue at α ∈ {0.30, 0.35, 0.40}",
        pass,
        &detail.join("; "),
    );
}

#[test]
fn widest_k_interval_defends_at_least_as_well() {
    let r13 = mean_revenue(&nik((0.1, 0.01)), 0.4);
    let r15 = mean_revenue(
        &SimConfig {
            k_max: 5,
            ..nik((0.1, 0.01))
        },
        0.4,
    );
    report(
        "K∈[1,5] revenue ≤ K∈[1,3] revenue at α=0.4",
        r15 <= r13,
        &format!("[1,5] {r15:.4} vs [1,3] {r13:.4}"),
    );
}

#[test]
fn honest_pool_earns_fair_share() {
    let mut worst: f64 = 0.0;
    for alpha in [0.1, 0.3] {
        for defense in [Policy::Nik, Policy::TieBreaking] {
            for seed in SEEDS {
                let r = run(&SimConfig {
                    alpha,
                    defense,
                    attacker: AttackerKind::None,
                    seed,
                    ..SimConfig::default()
                })
                .unwrap();
                worst = worst.max((r.selfish_relative_revenue - alpha).abs());
            }
        }
    }
    report(
        "fair share without an attacker at α ∈ {0.1, 0.3}",
        worst <= 0.02,
        &format!("max |revenue − α| = {worst:.4} over 5 seeds × 2 defenses, limit 0.02"),
    );
}

/// Closed-form update over the whole action set.
fn reference_update(p: &[f64], chosen: usize, a: f64, b: f64, beta: f64) -> Vec<f64> {
    let m = p.len() as f64;
    p.iter()
        .enumerate()
        .map(|(i, &pi)| {
            if i == chosen {
                pi + a * beta * (1.0 - pi) - b * (1.0 - beta) * pi
            } else {
                pi - a * beta * pi + b * (1.0 - beta) * (1.0 / (m - 1.0) - pi)
            }
        })
        .collect()
}

#[test]
fn learning_automaton_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);
    let mut failures = Vec::new();
    let updates = 100_000;
    let mut automata: Vec<LearningAutomaton> = SCHEMES
        .iter()
        .flat_map(|&(a, b)| {
            (2..=5).map(move |m| {
                LearningAutomaton::new(m, LearningScheme::new(a, b).unwrap()).unwrap()
            })
        })
        .collect();

    for step in 0..updates {
        let la = &mut automata[step % SCHEMES.len() * 4 + rng.gen_range(0..4)];
        let m = la.actions();
        let before = la.probabilities().to_vec();
        let beta = if rng.gen_bool(0.2) {
            f64::from(rng.gen_range(0..=1))
        } else {
            rng.gen::<f64>()
        };
        let signal = ReinforcementSignal::new(beta).unwrap();
        let full = rng.gen_bool(0.5);
        let available: Vec<ActionId> = if full {
            la.all_actions()
        } else {
            let mut s: Vec<ActionId> = (0..m).filter(|_| rng.gen_bool(0.6)).map(ActionId).collect();
            if s.is_empty() {
                s.push(ActionId(rng.gen_range(0..m)));
            }
            s
        };
        let chosen = match la.select_action(&available, &mut rng) {
            Ok(a) => a,
            Err(_) => continue,
        };
        la.update_restricted(&available, chosen, signal).unwrap();
        let after = la.probabilities();

        let sum: f64 = after.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || after.iter().any(|p| !(0.0..=1.0).contains(p)) {
            failures.push(format!("update {step}: not a distribution {after:?}"));
        }
        for i in 0..m {
            if !available.contains(&ActionId(i)) && (after[i] - before[i]).abs() > 1e-12 {
                failures.push(format!("update {step}: unavailable action {i} moved"));
            }
        }
        let s = la.scheme();
        if s.is_pure_chance()
            && after
                .iter()
                .zip(&before)
                .any(|(x, y)| x.to_bits() != y.to_bits())
        {
            failures.push(format!("update {step}: pure-chance vector changed"));
        }
        if full {
            let expected = reference_update(&before, chosen.0, s.reward, s.penalty, beta);
            if after
                .iter()
                .zip(&expected)
                .any(|(x, y)| (x - y).abs() > 1e-12)
            {
                failures.push(format!(
                    "update {step}: {after:?} vs closed form {expected:?}"
                ));
            }
        }
        if failures.len() > 5 {
            break;
        }
    }
    report(
        "learning automaton invariants over 10^5 randomized updates, 5 schemes",
        failures.is_empty(),
        &if failures.is_empty() {
            format!("{updates} updates")
        } else {
            failures.join("; ")
        },
    );
}

/// Per-height contest computed from block heights. Ties draw from `rng`
/// over the tied branches in index order.
fn weight_oracle<R: Rng>(fork: &ForkSet, max_length: u64, rng: &mut R) -> Vec<u64> {
    let base = fork.base_height();
    let mut weights = vec![0u64; fork.branch_count()];
    for h in 1..=max_length {
        let at_h: Vec<(usize, u64)> = fork
            .branches()
            .iter()
            .enumerate()
            .filter_map(|(i, b)| {
                b.blocks()
                    .iter()
                    .find(|blk| blk.height == base + h)
                    .map(|blk| (i, blk.timestamp))
            })
            .collect();
        let Some(top) = at_h.iter().map(|&(_, t)| t).max() else {
            continue;
        };
        let tied: Vec<usize> = at_h
            .iter()
            .filter(|&&(_, t)| t == top)
            .map(|&(i, _)| i)
            .collect();
        let w = if tied.len() == 1 {
            tied[0]
        } else {
            tied[rng.gen_range(0..tied.len())]
        };
        weights[w] += 1;
    }
    weights
}

fn random_fork<R: Rng>(rng: &mut R) -> ForkSet {
    let base = Block {
        id: BlockId(0),
        parent: BlockId(0),
        height: 500,
        timestamp: 0,
        owner: Owner::Honest,
    };
    let mut fork = ForkSet::new(base);
    let mut next = 1;
    for _ in 0..rng.gen_range(1..=4) {
        let mut parent = base;
        if fork.branch_count() > 0 && rng.gen_bool(0.4) {
            let b = &fork.branches()[rng.gen_range(0..fork.branch_count())];
            let pos = rng.gen_range(0..b.len());
            if pos + 1 < b.len() {
                parent = b.blocks()[pos];
            }
        }
        let length = rng.gen_range(1..=6u64);
        while parent.height - base.height < length {
            let block = Block {
                id: BlockId(next),
                parent: parent.id,
                height: parent.height + 1,
                timestamp: rng.gen_range(1..=8),
                owner: Owner::Honest,
            };
            next += 1;
            fork.append_block(block).unwrap();
            parent = block;
        }
    }
    fork
}

#[test]
fn fork_weights_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF0A4);
    let cases = 10_000;
    let mut mismatches = 0;
    let mut ties = 0;
    for _ in 0..cases {
        let fork = random_fork(&mut rng);
        let l = fork.max_length();
        let tie_seed = rng.gen::<u64>();
        let mut a = ChaCha8Rng::seed_from_u64(tie_seed);
        let mut b = ChaCha8Rng::seed_from_u64(tie_seed);
        let got = fork.fork_weights(l, &mut a);
        let want = weight_oracle(&fork, l, &mut b);
        if a.get_word_pos() > 0 {
            ties += 1;
        }
        if got != want || a.gen::<u64>() != b.gen::<u64>() {
            mismatches += 1;
        }
    }
    report(
        "fork weights equal the oracle on 10^4 random fork sets (N ≤ 4, L ≤ 6)",
        mismatches == 0,
        &format!("{mismatches} mismatches, {ties} sets with tie draws"),
    );
}

#[test]
fn experiment_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let invoke = |name: &str, jobs: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_nikdef"))
            .args([
                "--experiment",
                "2",
                "--jobs",
                jobs,
                "--out",
                out.to_str().unwrap(),
            ])
            .env_remove("NIKDEF_SEED")
            .status()
            .unwrap();
        assert!(status.success());
        (
            std::fs::read(&out).unwrap(),
            std::fs::read(out.with_extension("thresholds.csv")).unwrap(),
        )
    };
    let first = invoke("a.csv", "2");
    let second = invoke("b.csv", "2");
    let serial = invoke("c.csv", "1");
    report(
        "byte-identical CSV across identical experiment invocations",
        first == second && first == serial,
        &format!(
            "{} row bytes, {} threshold bytes; identical: {}, identical with --jobs 1: {}",
            first.0.len(),
            first.1.len(),
            first == second,
            first == serial
        ),
    );
}
