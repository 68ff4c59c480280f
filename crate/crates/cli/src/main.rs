use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pacsynth::harness::{self, RunOptions};
use pacsynth::oracle::{read_examples, TaskError};
use pacsynth::{Error, Task};

#[derive(Parser)]
#[command(name = "pacsynth", version, about = "Example-driven string synthesis with sample-size guarantees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    step_k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_size: Option<usize>,
    #[arg(long)]
    max_nesting: Option<usize>,
    /// Directory for reports and traces.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions {
            epsilon: self.epsilon,
            delta: self.delta,
            step_k: self.step_k,
            seed: self.seed,
            max_size: self.max_size,
            max_nesting: self.max_nesting,
            ..RunOptions::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a program for one task.
    Run {
        task: PathBuf,
        /// Read examples from a JSON-lines file instead of sampling.
        #[arg(long)]
        examples: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate every task in a directory.
    Eval {
        suite: PathBuf,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        /// Also run the fixed-sample baseline with this many examples.
        #[arg(long)]
        baseline_n: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Print tier sizes after each example.
    TraceShrinkage {
        task: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Compare engine counts with exhaustive enumeration.
    VerifyCounts {
        task: PathBuf,
        #[arg(long, default_value_t = 3)]
        count: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Dump examples drawn from a task.
    Sample {
        task: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}

fn load(path: &Path) -> Result<Task, Error> {
    Ok(Task::load(path)?)
}

fn write_out(out: &Option<PathBuf>, name: &str, bytes: &[u8]) -> Result<(), Error> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), bytes)?;
        }
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn dispatch(cmd: Command) -> Result<u8, Error> {
    match cmd {
        Command::Run { task, examples, common } => {
            let task = load(&task)?;
            let opts = common.options();
            let report = match examples {
                Some(path) => {
                    let file =
                        fs::File::open(&path).map_err(|source| TaskError::Read { path: path.clone(), source })?;
                    let ex = read_examples(BufReader::new(file), &task.signature, task.output_sort)?;
                    harness::cmd_run_examples(&task, &opts, &ex)?
                }
                None => harness::cmd_run(&task, &opts)?,
            };
            if let Some(dir) = &common.out {
                report.write(dir)?;
            }
            eprintln!("wall time: {:.3}s", report.wall_time.as_secs_f64());
            match &report.program {
                Some(p) => {
                    println!("{p}");
                    Ok(0)
                }
                None => {
                    println!("None");
                    Ok(2)
                }
            }
        }
        Command::Eval { suite, trials, baseline_n, common } => {
            let report = harness::cmd_eval(&suite, trials, baseline_n, &common.options())?;
            if let Some(dir) = &common.out {
                fs::create_dir_all(dir)?;
                fs::write(dir.join("suite.json"), serde_json::to_string_pretty(&report)? + "\n")?;
            }
            for s in &report.summary {
                println!(
                    "{:?}: {}/{} runs correct, {} tasks correct in every trial, mean samples {:.1}, mean held-out error {:.4}",
                    s.mode, s.correct_rows, s.rows, s.tasks_all_correct, s.mean_samples, s.mean_held_out_error
                );
            }
            for r in report.rows.iter().filter(|r| r.error.is_some()) {
                println!("{} trial {} {:?} failed: {}", r.task, r.trial, r.mode, r.error.as_deref().unwrap_or(""));
            }
            Ok(0)
        }
        Command::TraceShrinkage { task, count, common } => {
            let task = load(&task)?;
            let rows = harness::cmd_trace_shrinkage(&task, &common.options(), count)?;
            let mut buf = Vec::new();
            harness::write_shrinkage_csv(&rows, &mut buf)?;
            write_out(&common.out, "shrinkage.csv", &buf)?;
            Ok(0)
        }
        Command::VerifyCounts { task, count, common } => {
            let task = load(&task)?;
            let lines = harness::cmd_verify_counts(&task, &common.options(), count)?;
            for l in &lines {
                println!("{l}");
            }
            Ok(if lines.is_empty() { 0 } else { 1 })
        }
        Command::Sample { task, count, common } => {
            let task = load(&task)?;
            let examples = harness::cmd_sample(&task, common.seed, count)?;
            let mut buf = Vec::new();
            for e in &examples {
                writeln!(buf, "{}", e.to_json(&task.signature))?;
            }
            write_out(&common.out, "examples.jsonl", &buf)?;
            Ok(0)
        }
    }
}
