use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use nikdef::{AttackerKind, LearningScheme, Policy, SimConfig};

use crate::CliError;

pub const SEED_ENV: &str = "NIKDEF_SEED";

/// Simulate selfish mining against timestamp-weighted fork resolution.
///
/// Without `--experiment`, runs one simulation per seed and prints a CSV row
/// for each. With `--experiment`, sweeps the preset grid over α and writes
/// per-run rows to `--out` and per-configuration thresholds next to it.
#[derive(Debug, Parser)]
#[command(name = "nikdef", version)]
pub struct Args {
    /// Preset sweep to run.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub experiment: Option<u8>,

    /// Selfish pool's share of the mining power.
    #[arg(long, default_value_t = 0.3, conflicts_with = "experiment")]
    pub alpha: f64,

    /// Share of honest miners that extend the selfish branch during a tie.
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,

    /// Block-discovery events per run.
    #[arg(long, default_value_t = 10_000)]
    pub blocks: u64,

    /// Block events between fork-decision times.
    #[arg(long, default_value_t = 5, conflicts_with = "experiment")]
    pub tau: u64,

    /// Fork-decision times per time window.
    #[arg(long, default_value_t = 10, conflicts_with = "experiment")]
    pub theta_taus: u64,

    #[arg(long, default_value_t = 1, conflicts_with = "experiment")]
    pub k_min: u32,

    #[arg(long, default_value_t = 3, conflicts_with = "experiment")]
    pub k_max: u32,

    /// Reward step of the learning scheme.
    #[arg(long, default_value_t = 0.1, conflicts_with = "experiment")]
    pub scheme_a: f64,

    /// Penalty step of the learning scheme.
    #[arg(long, default_value_t = 0.01, conflicts_with = "experiment")]
    pub scheme_b: f64,

    #[arg(long, value_enum, default_value_t = DefenseArg::Nik, conflicts_with = "experiment")]
    pub defense: DefenseArg,

    #[arg(long, value_enum, default_value_t = AttackerArg::ModifiedSm1, conflicts_with = "experiment")]
    pub attacker: AttackerArg,

    /// Comma-separated seeds. Defaults to $NIKDEF_SEED (or 1) for single
    /// runs and five consecutive seeds starting there for experiments.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,

    /// Output CSV. Required with `--experiment`; single runs print to
    /// standard output otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,

    /// Print the CSV header before a single-run row.
    #[arg(long, conflicts_with = "experiment")]
    pub header: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DefenseArg {
    Nik,
    Tie,
    Longest,
}

impl From<DefenseArg> for Policy {
    fn from(d: DefenseArg) -> Self {
        match d {
            DefenseArg::Nik => Policy::Nik,
            DefenseArg::Tie => Policy::TieBreaking,
            DefenseArg::Longest => Policy::LongestChain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttackerArg {
    None,
    Sm1,
    ModifiedSm1,
}

impl From<AttackerArg> for AttackerKind {
    fn from(a: AttackerArg) -> Self {
        match a {
            AttackerArg::None => AttackerKind::None,
            AttackerArg::Sm1 => AttackerKind::ClassicSm1,
            AttackerArg::ModifiedSm1 => AttackerKind::ModifiedSm1,
        }
    }
}

impl Args {
    /// Configuration for a single run, seeded with `seed`.
    pub fn config(&self, seed: u64) -> Result<SimConfig, CliError> {
        let scheme = LearningScheme::new(self.scheme_a, self.scheme_b)
            .map_err(|e| CliError::Usage(format!("--scheme-a/--scheme-b: {e}")))?;
        let config = SimConfig {
            alpha: self.alpha,
            gamma: self.gamma,
            n_blocks: self.blocks,
            tau_blocks: self.tau,
            theta_taus: self.theta_taus,
            k_min: self.k_min,
            k_max: self.k_max,
            scheme,
            defense: self.defense.into(),
            attacker: self.attacker.into(),
            seed,
        };
        check(&config)?;
        Ok(config)
    }

    pub fn seeds(&self, count: u64, env_seed: Option<&str>) -> Result<Vec<u64>, CliError> {
        if let Some(seeds) = &self.seeds {
            if seeds.is_empty() {
                return Err(CliError::Usage(
                    "--seeds: at least one seed is required".into(),
                ));
            }
            return Ok(seeds.clone());
        }
        let base = match env_seed {
            Some(s) => s.trim().parse::<u64>().map_err(|_| {
                CliError::Usage(format!("{SEED_ENV}: not an unsigned integer: {s:?}"))
            })?,
            None => 1,
        };
        Ok((0..count).map(|i| base.wrapping_add(i)).collect())
    }
}

/// Validates `config`, naming the offending flag on failure.
pub fn check(config: &SimConfig) -> Result<(), CliError> {
    let flag = if !(0.0..=0.5).contains(&config.alpha) {
        Some("--alpha")
    } else if !(0.0..=1.0).contains(&config.gamma) {
        Some("--gamma")
    } else if config.n_blocks == 0 {
        Some("--blocks")
    } else if config.tau_blocks == 0 {
        Some("--tau")
    } else if config.theta_taus == 0 {
        Some("--theta-taus")
    } else if config.k_min < 1 {
        Some("--k-min")
    } else if config.k_min > config.k_max {
        Some("--k-min/--k-max")
    } else {
        None
    };
    match (flag, config.validate()) {
        (_, Ok(())) => Ok(()),
        (Some(flag), Err(e)) => Err(CliError::Usage(format!("{flag}: {e}"))),
        (None, Err(e)) => Err(CliError::Usage(e.to_string())),
    }
}
