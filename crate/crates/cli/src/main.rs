mod args;
mod experiment;
mod output;

use std::fs::File;
use std::io::{self, BufWriter};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use rayon::prelude::*;

use args::{Args, SEED_ENV};
use output::{run_record, write_csv, ROW_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Sim(#[from] nikdef::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Sim(nikdef::Error::InvalidConfiguration(_)) => 1,
            CliError::Io(_) | CliError::Sim(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nikdef: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(args: &Args) -> Result<(), CliError> {
    let env_seed = std::env::var(SEED_ENV).ok();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    pool.install(|| match args.experiment {
        Some(id) => {
            let out = args
                .out
                .as_deref()
                .ok_or_else(|| CliError::Usage("--out is required with --experiment".into()))?;
            let seeds = args.seeds(5, env_seed.as_deref())?;
            experiment::run_experiment(id, args.blocks, args.gamma, &seeds, out)
        }
        None => single(args, env_seed.as_deref()),
    })
}

fn single(args: &Args, env_seed: Option<&str>) -> Result<(), CliError> {
    let configs = args
        .seeds(1, env_seed)?
        .into_iter()
        .map(|seed| args.config(seed))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = configs
        .par_iter()
        .map(|c| nikdef::run(c).map(|r| run_record("0", c, &r)))
        .collect::<Result<Vec<_>, _>>()?;

    let result = match &args.out {
        Some(path) => {
            let file =
                File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            write_csv(BufWriter::new(file), Some(&ROW_HEADER), &rows)
        }
        None => write_csv(
            io::stdout().lock(),
            args.header.then_some(&ROW_HEADER[..]),
            &rows,
        ),
    };
    result.map_err(|e| CliError::Io(e.to_string()))
}
