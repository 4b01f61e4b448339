use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use nikdef::sim::{summarize, sweep_runs};
use nikdef::{default_alpha_grid, AttackerKind, LearningScheme, Policy, SimConfig};

use crate::args::check;
use crate::output::{run_record, threshold_record, write_csv, ROW_HEADER, THRESHOLD_HEADER};
use crate::CliError;

/// (reward, penalty) pairs of the first experiment.
pub const EXP1_SCHEMES: [(f64, f64); 5] = [
    (0.0, 0.0),
    (0.01, 0.0),
    (0.0, 0.01),
    (0.01, 0.01),
    (0.1, 0.01),
];

fn nik(n_blocks: u64, gamma: f64) -> SimConfig {
    SimConfig {
        n_blocks,
        gamma,
        ..SimConfig::default()
    }
}

/// Configurations swept by preset `id`; α and seed are filled in per run.
pub fn preset(id: u8, n_blocks: u64, gamma: f64) -> Result<Vec<SimConfig>, CliError> {
    let base = nik(n_blocks, gamma);
    let cells = match id {
        1 => EXP1_SCHEMES
            .iter()
            .flat_map(|&(a, b)| {
                let scheme = LearningScheme::new(a, b).expect("preset schemes are valid");
                [
                    SimConfig {
                        scheme,
                        ..base.clone()
                    },
                    SimConfig {
                        scheme,
                        defense: Policy::TieBreaking,
                        attacker: AttackerKind::ClassicSm1,
                        ..base.clone()
                    },
                ]
            })
            .collect(),
        2 => [(1, 3), (2, 4), (1, 5)]
            .iter()
            .map(|&(k_min, k_max)| SimConfig {
                k_min,
                k_max,
                ..base.clone()
            })
            .collect(),
        3 => [5, 9, 15]
            .iter()
            .map(|&tau_blocks| SimConfig {
                tau_blocks,
                ..base.clone()
            })
            .collect(),
        4 => [6, 12, 18]
            .iter()
            .map(|&theta_taus| SimConfig {
                theta_taus,
                ..base.clone()
            })
            .collect(),
        _ => {
            return Err(CliError::Usage(format!(
                "--experiment: unknown preset {id}"
            )))
        }
    };
    Ok(cells)
}

pub fn thresholds_path(out: &Path) -> PathBuf {
    out.with_extension("thresholds.csv")
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn run_experiment(
    id: u8,
    n_blocks: u64,
    gamma: f64,
    seeds: &[u64],
    out: &Path,
) -> Result<(), CliError> {
    if seeds.is_empty() {
        return Err(CliError::Usage(
            "--seeds: at least one seed is required".into(),
        ));
    }
    let cells = preset(id, n_blocks, gamma)?;
    for c in &cells {
        check(c)?;
    }
    let rows_file = create(out)?;
    let thresholds_out = thresholds_path(out);
    let thresholds_file = create(&thresholds_out)?;

    let label = id.to_string();
    let alphas = default_alpha_grid();
    let mut rows = Vec::new();
    let mut thresholds = Vec::new();
    for cell in &cells {
        let runs = sweep_runs(cell, &alphas, seeds)?;
        rows.extend(runs.iter().map(|(c, r)| run_record(&label, c, r)));
        thresholds.push(threshold_record(&label, cell, summarize(&runs).threshold));
    }

    let io = |path: &Path, e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    write_csv(rows_file, Some(&ROW_HEADER), &rows).map_err(|e| io(out, e))?;
    write_csv(thresholds_file, Some(&THRESHOLD_HEADER), &thresholds)
        .map_err(|e| io(&thresholds_out, e))?;
    Ok(())
}
