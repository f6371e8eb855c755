use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use egoqa_cli::{run, Command, RunOptions};

/// Builds spatial QA datasets from egocentric reconstructions and scores
/// model predictions.
#[derive(Parser)]
#[command(name = "egoqa", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Allow calls to the chat endpoint named by EGOQA_LLM_* variables.
    #[arg(long)]
    live_llm: bool,
    /// Scene workers; 0 uses every logical core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let opts = RunOptions {
        seed: args.seed,
        live_llm: args.live_llm,
        jobs: args.jobs,
    };
    match run(args.command, &args.config, &opts) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("egoqa {}: {e}", args.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
