use std::io::Write;

use nikdef::{AttackerKind, Policy, RunResult, SimConfig};

pub const ROW_HEADER: [&str; 19] = [
    "experiment",
    "defense",
    "attacker",
    "scheme_a",
    "scheme_b",
    "k_min",
    "k_max",
    "tau_blocks",
    "theta_taus",
    "alpha",
    "gamma",
    "seed",
    "n_blocks",
    "honest_won",
    "selfish_won",
    "honest_relrev",
    "selfish_relrev",
    "height_decisions",
    "weight_decisions",
];

pub const THRESHOLD_HEADER: [&str; 9] = [
    "experiment",
    "defense",
    "scheme_a",
    "scheme_b",
    "k_min",
    "k_max",
    "tau_blocks",
    "theta_taus",
    "threshold",
];

fn decimal(x: f64) -> String {
    format!("{x:.6}")
}

pub fn defense_name(p: Policy) -> &'static str {
    match p {
        Policy::Nik => "nik",
        Policy::TieBreaking => "tie",
        Policy::LongestChain => "longest",
    }
}

pub fn attacker_name(a: AttackerKind) -> &'static str {
    match a {
        AttackerKind::None => "none",
        AttackerKind::ClassicSm1 => "sm1",
        AttackerKind::ModifiedSm1 => "modified-sm1",
    }
}

pub fn run_record(experiment: &str, c: &SimConfig, r: &RunResult) -> Vec<String> {
    vec![
        experiment.to_string(),
        defense_name(c.defense).to_string(),
        attacker_name(c.attacker).to_string(),
        decimal(c.scheme.reward),
        decimal(c.scheme.penalty),
        c.k_min.to_string(),
        c.k_max.to_string(),
        c.tau_blocks.to_string(),
        c.theta_taus.to_string(),
        decimal(c.alpha),
        decimal(c.gamma),
        c.seed.to_string(),
        c.n_blocks.to_string(),
        r.honest_accepted.to_string(),
        r.selfish_accepted.to_string(),
        decimal(r.honest_relative_revenue),
        decimal(r.selfish_relative_revenue),
        r.height_decisions.to_string(),
        r.weight_decisions.to_string(),
    ]
}

/// An absent threshold is written as an empty field.
pub fn threshold_record(experiment: &str, c: &SimConfig, threshold: Option<f64>) -> Vec<String> {
    vec![
        experiment.to_string(),
        defense_name(c.defense).to_string(),
        decimal(c.scheme.reward),
        decimal(c.scheme.penalty),
        c.k_min.to_string(),
        c.k_max.to_string(),
        c.tau_blocks.to_string(),
        c.theta_taus.to_string(),
        threshold.map(decimal).unwrap_or_default(),
    ]
}

pub fn write_csv<W: Write>(
    out: W,
    header: Option<&[&str]>,
    records: &[Vec<String>],
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for r in records {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}
