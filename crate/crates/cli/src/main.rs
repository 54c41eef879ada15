use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use riskflow_cli::{manifest, pipeline, CliError, Command, Overrides, Resolved};
use riskflow_core::model::Direction;

/// Crime-count prediction from directed mobility graphs.
#[derive(Debug, Parser)]
#[command(name = "riskflow", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `paths.output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overriding `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Write `<input>.rejects.csv` next to each input file.
    #[arg(long)]
    rejects: bool,
    /// Minimum total movement for a node to become a sample.
    #[arg(long)]
    min_moves: Option<u64>,
    /// Ablation significance direction.
    #[arg(long, value_parser = ["wo_greater", "all_greater"])]
    direction: Option<String>,
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    let line = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{line}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return fail("usage", first, 2);
        }
    };
    let overrides = Overrides {
        out: cli.out,
        seed: cli.seed,
        rejects: cli.rejects,
        min_moves: cli.min_moves,
        direction: cli.direction.map(|d| d.parse::<Direction>().expect("validated by clap")),
    };
    let result = Resolved::load(&cli.config, &overrides).and_then(|cfg| {
        let outcome = pipeline::run(cli.command, &cfg)?;
        manifest::record(&cfg, cli.command, &outcome)?;
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            for note in &outcome.notes {
                println!("{note}");
            }
            for w in &outcome.warnings {
                println!("warning: {w}");
            }
            for p in &outcome.outputs {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), &one_line(&e), 1),
    }
}

fn one_line(e: &CliError) -> String {
    e.to_string().split_whitespace().collect::<Vec<_>>().join(" ")
}
