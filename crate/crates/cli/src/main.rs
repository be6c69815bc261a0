use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use progresscounts::envs::{build_task, TASK_NAMES};
use progresscounts::llmgen::{extract_code, CandidateSet};

mod candidates;
mod compare;
mod config;
mod run;

use config::{ConfigError, ExperimentConfig};

/// Count-based exploration experiments over progress programs.
#[derive(Debug, Parser)]
#[command(name = "progresscounts", version)]
struct Cli {
    /// Never contact the completion endpoint; read candidates from fixtures.
    #[arg(long, global = true)]
    offline: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train every (candidate, seed) pair of an experiment config.
    Run {
        config: PathBuf,
        /// Parallel training runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Override the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Summarize finished run directories by mode.
    Compare {
        #[arg(required = true, num_args = 2..)]
        run_dirs: Vec<PathBuf>,
        /// Write long-format per-iteration metrics here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Parse and probe-evaluate every `.prog` file in a directory.
    ValidateCandidates {
        #[arg(long)]
        task: String,
        dir: PathBuf,
    },
    /// Generate candidate programs and write the valid ones as `.prog` files.
    Gen {
        #[arg(long)]
        task: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(short, long, default_value_t = 4)]
        n: usize,
        /// Fixture directory used with --offline (default fixtures/<task>).
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
}

/// Invalid input; maps to exit status 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some()
                || e.downcast_ref::<ConfigError>().is_some()
                || e.downcast_ref::<compare::TaskMismatch>().is_some()
            {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run { config, jobs, output_dir } => cmd_run(&config, jobs, output_dir, cli.offline),
        Command::Compare { run_dirs, csv } => cmd_compare(&run_dirs, csv.as_deref()),
        Command::ValidateCandidates { task, dir } => cmd_validate(&task, &dir),
        Command::Gen { task, out, n, fixtures } => cmd_gen(&task, &out, n, fixtures, cli.offline),
    }
}

fn task_or_usage(name: &str) -> anyhow::Result<progresscounts::envs::Task> {
    build_task(name).map_err(|_| usage(format!("unknown task `{name}`; expected one of {}", TASK_NAMES.join(", "))))
}

fn cmd_run(path: &Path, jobs: usize, output_dir: Option<PathBuf>, offline: bool) -> anyhow::Result<ExitCode> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    if jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let task = cfg.task();
    let cands = candidates::resolve(&cfg.candidates, &task, offline)?;
    let outcome = run::run_all(&cfg, &cands, jobs)?;
    for f in &outcome.failures {
        eprintln!("failed: {f}");
    }
    if outcome.failures.is_empty() {
        println!("{} runs written to {}", outcome.summaries.len(), cfg.output_dir.display());
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

fn cmd_compare(dirs: &[PathBuf], csv: Option<&Path>) -> anyhow::Result<ExitCode> {
    if dirs.is_empty() {
        return Err(usage("compare needs at least one run directory"));
    }
    let runs = compare::load_all(dirs)?;
    let stats = compare::group_stats(&runs);
    print!("{}", compare::render_table(&stats));
    if let Some(path) = csv {
        compare::write_long_csv(&runs, path)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn report(set: &CandidateSet) {
    for c in &set.candidates {
        match &c.result {
            Ok(_) => println!("{}: valid", c.label),
            Err(e) => println!("{}: invalid: {e}", c.label),
        }
    }
    println!("{}/{} valid", set.valid_count(), set.candidates.len());
}

fn cmd_validate(task: &str, dir: &Path) -> anyhow::Result<ExitCode> {
    let task = task_or_usage(task)?;
    let set = candidates::fixture_set(&task, dir, None)?;
    if set.candidates.is_empty() {
        eprintln!("warning: no .prog files in {}", dir.display());
    } else {
        report(&set);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen(task: &str, out: &Path, n: usize, fixtures: Option<PathBuf>, offline: bool) -> anyhow::Result<ExitCode> {
    let task = task_or_usage(task)?;
    if n == 0 {
        return Err(usage("-n must be at least 1"));
    }
    let set = if offline {
        let dir = fixtures.unwrap_or_else(|| candidates::default_fixture_dir(&task.spec.name));
        candidates::fixture_set(&task, &dir, Some(n))?
    } else {
        candidates::endpoint_set(&task, n)?
    };
    report(&set);
    std::fs::create_dir_all(out)?;
    for (i, c) in set.candidates.iter().enumerate().filter(|(_, c)| c.is_valid()) {
        let mut code = extract_code(&c.raw_text);
        code.push('\n');
        std::fs::write(out.join(format!("{i}.prog")), code)?;
    }
    Ok(ExitCode::SUCCESS)
}
