use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use isofol_core::scenarios::{
    builtin, builtin_names, emit_leaves, list_scenarios, load_scenario, run, write_leaves_csv, Overrides, RunOptions,
    Scenario,
};

#[derive(Parser)]
#[command(name = "isofol", version, about = "Totally geodesic foliations from holomorphic Grassmannian maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every applicable check on a scenario and print a summary.
    Run {
        /// Builtin scenario name or path to a scenario JSON file.
        scenario: String,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Tolerance override, `check=value`; may be repeated.
        #[arg(long = "tol", value_name = "CHECK=VALUE")]
        tol: Vec<String>,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Export sampled leaves of a builder scenario as CSV.
    Leaves {
        scenario: String,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Parameter step along each leaf direction.
        #[arg(long, default_value_t = 0.5)]
        step: f64,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the builtin scenarios.
    List,
}

fn resolve(name: &str) -> Result<Scenario> {
    if builtin_names().contains(&name) {
        return Ok(builtin(name, &Overrides::default())?);
    }
    let path = PathBuf::from(name);
    if !path.exists() {
        bail!(
            "`{name}` is neither a builtin scenario ({}) nor an existing file",
            builtin_names().join(", ")
        );
    }
    Ok(load_scenario(&path)?)
}

fn parse_tol(items: &[String]) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in items {
        let (name, value) = item
            .split_once('=')
            .with_context(|| format!("--tol `{item}`: expected CHECK=VALUE"))?;
        let value: f64 = value
            .trim()
            .parse()
            .with_context(|| format!("--tol `{item}`: `{value}` is not a number"))?;
        out.insert(name.trim().to_string(), value);
    }
    Ok(out)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            print!("{}", list_scenarios());
            Ok(true)
        }
        Command::Run {
            scenario,
            samples,
            seed,
            tol,
            report,
        } => {
            let s = resolve(&scenario)?;
            let opts = RunOptions {
                samples,
                seed,
                tol_overrides: parse_tol(&tol)?,
                ..RunOptions::default()
            };
            let r = run(&s, &opts)?;
            print!("{}", r.summary());
            if let Some(path) = report {
                std::fs::write(&path, r.to_json() + "\n")
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
            // negative controls succeed when they fail
            Ok(r.pass != s.is_negative_control())
        }
        Command::Leaves {
            scenario,
            count,
            step,
            out,
        } => {
            let s = resolve(&scenario)?;
            let records = emit_leaves(&s, count, step)?;
            let skipped = records.iter().filter(|r| r.is_skip()).count();
            match out {
                Some(path) => {
                    let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
                    write_leaves_csv(BufWriter::new(f), &s, &records)?;
                }
                None => {
                    let stdout = io::stdout();
                    write_leaves_csv(stdout.lock(), &s, &records)?;
                    io::stdout().flush()?;
                }
            }
            if skipped > 0 {
                eprintln!("{skipped} of {count} leaves skipped");
            }
            Ok(true)
        }
    }
}
