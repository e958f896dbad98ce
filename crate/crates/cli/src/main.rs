use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use mas_design::envs::contest::ContestParams;
use mas_design::experiment::{self, ExperimentConfig, ExperimentError};
use mas_design::record::DEFAULT_CURVE_WINDOW;
use mas_design::validation;

#[derive(Parser)]
#[command(name = "mas-design", version, about = "Design optimization for simulated multi-agent systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment block from a TOML/JSON config or a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replace the configured seed list with this single seed.
        #[arg(long)]
        seed_override: Option<u64>,
        /// Validate and print the plan without running.
        #[arg(long)]
        dry_run: bool,
        /// Write artifacts here instead of the configured directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Closed-form reference tables.
    Oracle {
        #[command(subcommand)]
        which: Oracle,
    },
    /// Run the built-in property suites and print a JSON report.
    Validate {
        /// Suite to run; repeat for several. All suites when omitted.
        #[arg(long)]
        suite: Vec<String>,
        #[arg(long, default_value_t = validation::Options::default().seed)]
        seed: u64,
        /// Multiplies every tolerance.
        #[arg(long, default_value_t = 1.0, hide = true)]
        tolerance_scale: f64,
    },
    /// Aggregate the per-seed JSONL files of a run directory into one CSV.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CURVE_WINDOW)]
        window: usize,
    },
}

#[derive(Subcommand)]
enum Oracle {
    /// Optimal contest design for each liability `K`.
    Contest {
        /// Comma-separated liabilities.
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<f64>,
        /// Output CSV; `-` for standard output.
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
}

fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run {
            config,
            seed_override,
            dry_run,
            output_dir,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(seed) = seed_override {
                cfg.seeds = vec![seed];
            }
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            let plan = cfg.validate()?;
            if dry_run {
                println!("{}", serde_json::to_string_pretty(&plan)?);
                return Ok(ExitCode::SUCCESS);
            }
            let manifest = experiment::run_experiment(&cfg)?;
            for o in &manifest.outputs {
                println!(
                    "seed {}: {} iterations, {} env steps, {} queries -> {}",
                    o.seed,
                    manifest.iterations,
                    o.total_env_steps,
                    o.total_queries,
                    cfg.output_dir.join(&o.jsonl).display()
                );
            }
            println!("manifest: {}", cfg.output_dir.join("manifest.json").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle {
            which: Oracle::Contest { k, out },
        } => {
            let rows = experiment::contest_oracle(&k, &ContestParams::default())?;
            if out.as_os_str() == "-" {
                experiment::write_oracle_csv(&rows, io::stdout().lock())?;
            } else {
                if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                    fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
                }
                let file = fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
                experiment::write_oracle_csv(&rows, file)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate {
            suite,
            seed,
            tolerance_scale,
        } => {
            if !(tolerance_scale >= 0.0) {
                bail!("--tolerance-scale must be nonnegative");
            }
            let opts = validation::Options { tolerance_scale, seed };
            let report = validation::run(&suite, &opts).map_err(anyhow::Error::msg)?;
            let mut stdout = io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, &report)?;
            writeln!(stdout)?;
            for c in report.failures() {
                eprintln!("FAIL [{}] {}: observed {} expected {} (tol {})", c.suite, c.name, c.observed, c.expected, c.tolerance);
            }
            eprintln!("{} passed, {} failed", report.passed, report.failed);
            Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Report { input, out, window } => {
            let rows = experiment::report(&input, &out, window)?;
            println!("{} iterations aggregated into {}", rows.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            // Library errors already embed their source, so drop repeated causes.
            let mut message = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !message.contains(&cause) {
                    if !message.is_empty() {
                        message.push_str(": ");
                    }
                    message.push_str(&cause);
                }
            }
            eprintln!("error: {message}");
            let config_error = e.downcast_ref::<ExperimentError>().is_some_and(|x| {
                matches!(
                    x,
                    ExperimentError::Parse { .. } | ExperimentError::Invalid { .. } | ExperimentError::Incompatible { .. }
                )
            });
            ExitCode::from(if config_error { 2 } else { 1 })
        }
    }
}
