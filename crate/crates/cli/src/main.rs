use std::path::PathBuf;
use std::process::ExitCode;

use afs_core::experiment::{run_experiment, ExperimentConfig, RunOptions, Stage};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "afs", version, about = "Argument facet similarity experiment runner")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true, default_value = "experiment.toml")]
    config: PathBuf,
    /// With `run`, execute only this stage.
    #[arg(long, global = true)]
    stage: Option<String>,
    /// Skip stages whose artifact already exists.
    #[arg(long, global = true)]
    resume: bool,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Use cached STS scores only.
    #[arg(long, global = true)]
    offline: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    Select,
    Pyramid,
    Propositions,
    Cluster,
    Pairs,
    IngestJudgments,
    Featurize,
    Train,
    Evaluate,
    Compare,
    /// Full pipeline.
    Run,
}

impl Command {
    fn stage(self) -> Option<Stage> {
        Some(match self {
            Command::Select => Stage::Select,
            Command::Pyramid => Stage::Pyramid,
            Command::Propositions => Stage::Propositions,
            Command::Cluster => Stage::Cluster,
            Command::Pairs => Stage::Pairs,
            Command::IngestJudgments => Stage::IngestJudgments,
            Command::Featurize => Stage::Featurize,
            Command::Train => Stage::Train,
            Command::Evaluate => Stage::Evaluate,
            Command::Compare => Stage::Compare,
            Command::Run => return None,
        })
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn execute(cli: &Cli) -> Result<(), (u8, String)> {
    let stage = match (cli.command.stage(), &cli.stage) {
        (Some(_), Some(_)) => return Err((1, "--stage only applies to `run`".into())),
        (Some(s), None) => Some(s),
        (None, Some(name)) => Some(name.parse::<Stage>().map_err(|e| (1, e.to_string()))?),
        (None, None) => None,
    };
    let fail = |e: afs_core::experiment::ExperimentError| (e.exit_code() as u8, e.to_string());
    let mut config = ExperimentConfig::load(&cli.config).map_err(fail)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let opts = RunOptions { stage, resume: cli.resume, offline: cli.offline };
    if let Some(report) = run_experiment(&config, &opts).map_err(fail)? {
        if stage.is_none() || stage == Some(Stage::Compare) {
            print!("{}", report.render());
        }
    }
    Ok(())
}
