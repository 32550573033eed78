use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use lintest::harness::{execute, with_jobs, Command, ExperimentSpec, Format, Overrides, SEED_ENV};
use lintest::{Error, Result};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    TestAdditivity,
    TestLinearity,
    Calibrate,
    LowerBound,
    QueryScaling,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::TestAdditivity => Command::TestAdditivity,
            Cmd::TestLinearity => Command::TestLinearity,
            Cmd::Calibrate => Command::Calibrate,
            Cmd::LowerBound => Command::LowerBound,
            Cmd::QueryScaling => Command::QueryScaling,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Fmt {
    Json,
    Csv,
}

/// Distribution-free additivity and linearity testers and the lower-bound game.
#[derive(Debug, Parser)]
#[command(name = "lintest", version)]
struct Cli {
    command: Cmd,
    /// Experiment spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Falls back to the spec, then $LINTEST_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Fmt>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let diag = serde_json::json!({
                "error": e.kind(),
                "message": e.to_string(),
            });
            eprintln!("{diag}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut spec = ExperimentSpec::load(&cli.spec)?;
    let requested = Command::from(cli.command);
    if spec.command != requested {
        return Err(Error::Config(format!(
            "spec is for `{}` but `{}` was requested",
            spec.command.name(),
            requested.name()
        )));
    }
    spec.apply(&Overrides {
        epsilon: cli.epsilon,
        trials: cli.trials,
        seed: cli.seed,
        output: cli.output.clone(),
        format: cli.format.map(|f| match f {
            Fmt::Json => Format::Json,
            Fmt::Csv => Format::Csv,
        }),
    });
    spec.resolve_seed(std::env::var(SEED_ENV).ok().as_deref())?;
    spec.validate()?;

    let report = with_jobs(cli.jobs, || execute(&spec))??;
    let text = report.render(spec.format)?;
    match &spec.output {
        Some(path) => std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}
