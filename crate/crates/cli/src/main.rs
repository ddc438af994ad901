use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pilotwave::scenario::{self, ErrorRecord, ScenarioConfig, LIBRARY};
use pilotwave::Error;

/// Scenario runner for the pilot-wave price model.
#[derive(Parser)]
#[command(name = "pilotwave", version, about)]
struct Cli {
    /// Cap on worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario and write its artifacts.
    Run {
        #[command(flatten)]
        source: Source,
        /// Output directory (overrides the scenario's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed (overrides the scenario's `seed`).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a scenario without running it.
    Validate {
        #[command(flatten)]
        source: Source,
    },
    /// List built-in scenarios.
    ListScenarios {
        /// Print the full JSON of one scenario instead.
        #[arg(long)]
        show: Option<String>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Name of a built-in scenario.
    #[arg(long)]
    scenario: Option<String>,
}

impl Source {
    fn load(&self) -> pilotwave::Result<ScenarioConfig> {
        match (&self.config, &self.scenario) {
            (Some(path), _) => ScenarioConfig::load(path),
            (None, Some(name)) => scenario::builtin(name),
            (None, None) => Err(Error::Config("either --config or --scenario is required".into())),
        }
    }
}

fn fail(e: &Error) -> ExitCode {
    let record = ErrorRecord::from(e);
    eprintln!("{}", serde_json::to_string(&record).unwrap_or_else(|_| e.to_string()));
    match e {
        Error::Validation(_) | Error::Config(_) | Error::Json(_) => ExitCode::from(2),
        _ => ExitCode::FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            return fail(&Error::Config(format!("cannot size thread pool: {e}")));
        }
    }
    match cli.command {
        Command::Run { source, out, seed } => {
            let mut cfg = match source.load() {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dir = out
                .or_else(|| cfg.output.clone())
                .unwrap_or_else(|| PathBuf::from("runs").join(if cfg.name.is_empty() { "scenario" } else { &cfg.name }));
            match scenario::run(&cfg, &dir) {
                Ok(outcome) => {
                    let files: Vec<&str> = outcome.manifest.files.iter().map(|f| f.name.as_str()).collect();
                    println!(
                        "{}",
                        serde_json::json!({
                            "directory": outcome.directory,
                            "files": files,
                            "wall_clock_seconds": outcome.manifest.wall_clock_seconds,
                        })
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Validate { source } => {
            let cfg = match source.load() {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let errors = cfg.violations();
            println!("{}", serde_json::json!({ "valid": errors.is_empty(), "errors": errors }));
            if errors.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Command::ListScenarios { show } => {
            if let Some(name) = show {
                return match LIBRARY.iter().find(|(n, _)| *n == name) {
                    Some((_, text)) => {
                        print!("{text}");
                        ExitCode::SUCCESS
                    }
                    None => fail(&Error::Config(format!("no built-in scenario named {name}"))),
                };
            }
            for (name, _) in LIBRARY {
                let description = scenario::builtin(name).map(|c| c.description).unwrap_or_default();
                println!("{name:<32} {description}");
            }
            ExitCode::SUCCESS
        }
    }
}
