//! Command-line driver: reads a JSON config, runs one pipeline stage and writes its
//! artifacts plus a `manifest.json` into the output directory.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde_json::json;
use sha2::{Digest, Sha256};

use porohom::{Error, ErrorClass, Result};

use commands::Outcome;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "porohom", version, about = "Periodic homogenization toolkit")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON config, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Upper bound on mesh nodes; larger runs are refused with exit code 4.
    #[arg(long = "budget-nodes", global = true)]
    budget_nodes: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Validate,
    Mesh,
    CellTensor,
    Btable,
    Macro,
    Micro,
    Sweep,
    TensorSuite,
}

impl Command {
    fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Validation => 2,
        ErrorClass::Solver => 3,
        ErrorClass::Budget => 4,
        ErrorClass::Io => 1,
    }
}

fn io(e: std::io::Error, what: &std::path::Path) -> Error {
    Error::Io(format!("{}: {e}", what.display()))
}

fn fingerprint(command: &str, config: &serde_json::Value) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    h.update(config.to_string().as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| io(e, p))?,
        None => "{}".into(),
    };
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    let budget = cli.budget_nodes;
    let mut outcome = match cli.command {
        Command::Validate => commands::run_validate(&cfg),
        Command::Mesh => commands::run_mesh(&cfg, budget),
        Command::CellTensor => commands::run_cell_tensor(&cfg),
        Command::Btable => commands::run_btable(&cfg),
        Command::Macro => commands::run_macro(&cfg, budget),
        Command::Micro => commands::run_micro(&cfg, budget),
        Command::Sweep => commands::run_sweep_command(&cfg, budget),
        Command::TensorSuite => {
            commands::resolve_suite(&mut cfg);
            commands::run_tensor_suite(&cfg)
        }
    }?;

    let name = cli.command.name();
    let resolved = serde_json::to_value(&cfg).expect("config serializes");
    let manifest = json!({
        "command": name,
        "version": env!("CARGO_PKG_VERSION"),
        "fingerprint": fingerprint(&name, &resolved),
        "outputs": outcome.files.iter().map(|(f, _)| f).collect::<Vec<_>>(),
        "config": resolved,
    });
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    outcome.files.push(("manifest.json".into(), text));

    std::fs::create_dir_all(&cli.out).map_err(|e| io(e, &cli.out))?;
    for (file, contents) in &outcome.files {
        let path = cli.out.join(file);
        std::fs::write(&path, contents).map_err(|e| io(e, &path))?;
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(Outcome { files, failure }) => {
            for (f, _) in &files {
                println!("wrote {}", cli.out.join(f).display());
            }
            match failure {
                None => ExitCode::SUCCESS,
                Some((code, msg)) => {
                    eprintln!("{msg}");
                    ExitCode::from(code as u8)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
