//! `consensus-lab` command line: `run`, `validate` and `list-tasks`.
//!
//! Exit codes: 0 success (flags such as non-convergence live in the JSON),
//! 1 I/O failure, 2 usage or schema error, 3 math-domain error.

pub mod scenario;
pub mod tasks;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

/// Overrides the scenario's `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "CONSENSUS_LAB_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("math error: {0}")]
    Math(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io(_) => 1,
            Self::Schema(_) => 2,
            Self::Math(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "consensus-lab", version, about = "Consensus over time-varying and signed graphs")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every task of a scenario and write its outputs.
    Run { scenario: PathBuf },
    /// Check a scenario without running it.
    Validate { scenario: PathBuf },
    /// Describe the available tasks.
    #[command(disable_help_flag = true)]
    ListTasks {
        #[arg(long)]
        task: Option<String>,
        #[arg(long, short = 'h')]
        help: bool,
    },
}

pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("consensus-lab: {e}");
            e.exit_code()
        }
    }
}

fn output_override() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { scenario } => run(&scenario),
        Command::Validate { scenario } => {
            let sc = scenario::load(&scenario, output_override().as_deref())?;
            println!(
                "{}: ok ({} nodes, {} tasks, output to {})",
                sc.name,
                sc.schedule.node_count(),
                sc.tasks.len(),
                sc.output_dir.display()
            );
            Ok(())
        }
        Command::ListTasks { task, help } => list_tasks(task.as_deref(), help),
    }
}

pub fn run(path: &Path) -> Result<(), CliError> {
    let sc = scenario::load(path, output_override().as_deref())?;
    let artifacts = tasks::execute(&sc)?;
    std::fs::create_dir_all(&sc.output_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", sc.output_dir.display())))?;
    for a in &artifacts {
        let target = sc.output_dir.join(&a.file);
        std::fs::write(&target, &a.bytes).map_err(|e| CliError::Io(format!("{}: {e}", target.display())))?;
    }
    println!("{}: wrote {} files to {}", sc.name, artifacts.len(), sc.output_dir.display());
    Ok(())
}

fn list_tasks(task: Option<&str>, help: bool) -> Result<(), CliError> {
    match task {
        None => {
            if help {
                println!("usage: consensus-lab list-tasks [--task NAME]\n");
            }
            print!("{}", tasks::list_text());
            Ok(())
        }
        Some(name) => match tasks::doc(name) {
            Some(d) => {
                print!("{}", tasks::doc_text(d));
                Ok(())
            }
            None => {
                let best = tasks::TASKS
                    .iter()
                    .map(|d| (strsim::jaro_winkler(name, d.name), d.name))
                    .max_by(|a, b| a.0.total_cmp(&b.0))
                    .filter(|(score, _)| *score > 0.7);
                let hint = best.map_or(String::new(), |(_, n)| format!("; did you mean \"{n}\"?"));
                Err(CliError::Schema(format!("unknown task \"{name}\"{hint}")))
            }
        },
    }
}
