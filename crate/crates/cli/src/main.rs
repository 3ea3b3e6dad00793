use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cat0_vip::scenario::{self, Scenario};
use cat0_vip::verify::{self, Tolerances};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "cat0-vip",
    version,
    about = "Picard-S solver for VIPs on CAT(0) model spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a builtin scenario by name.
    Run {
        scenario: String,
        /// Output directory for summary.json, trace.csv and report.txt.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the property suites.
    Verify {
        #[arg(long)]
        suite: Option<String>,
    },
    /// List builtin scenarios.
    List {
        #[arg(long)]
        json: bool,
        /// Keep names containing this substring.
        #[arg(long)]
        filter: Option<String>,
    },
    /// Print a builtin scenario as JSON.
    Show { name: String },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            scenario,
            out,
            seed,
        } => run(&scenario, out, seed),
        Command::Verify { suite } => verify(suite.as_deref()),
        Command::List { json, filter } => list(json, filter.as_deref()),
        Command::Show { name } => match scenario::builtin(&name) {
            Some(s) => {
                println!("{}", s.to_json());
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: no builtin scenario named {name:?}");
                ExitCode::from(2)
            }
        },
    }
}

fn load(arg: &str) -> Result<Scenario, String> {
    let path = Path::new(arg);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{arg}: {e}"))?;
        return Scenario::from_json(&text)
            .map_err(|e| format!("{arg}:{}:{}: {e}", e.line(), e.column()));
    }
    scenario::builtin(arg).ok_or_else(|| format!("{arg}: no such file or builtin scenario"))
}

fn run(arg: &str, out: Option<PathBuf>, seed: Option<u64>) -> ExitCode {
    let mut scenario = match load(arg) {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = seed {
        scenario.set_seed(seed);
    }
    if let Err(e) = scenario.validate() {
        eprintln!("error: {arg}: invalid scenario: {e}");
        return ExitCode::from(2);
    }
    let outcome = match scenario::run(&scenario) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {}: {e}", scenario.name);
            return ExitCode::from(1);
        }
    };
    let dir = out
        .or_else(|| scenario.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&scenario.name));
    if let Err(e) = outcome.write_to(&dir) {
        eprintln!("error: writing {}: {e}", dir.display());
        return ExitCode::from(1);
    }
    print!("{}", outcome.report);
    println!("artifacts  {}", dir.display());
    if outcome.passed {
        ExitCode::SUCCESS
    } else {
        eprintln!("certificate not obtained for {}", scenario.name);
        ExitCode::from(1)
    }
}

fn verify(filter: Option<&str>) -> ExitCode {
    let suites: Vec<_> = verify::suites()
        .into_iter()
        .filter(|s| filter.is_none_or(|f| s.name == f))
        .collect();
    if suites.is_empty() {
        let names: Vec<_> = verify::suites().iter().map(|s| s.name).collect();
        eprintln!(
            "error: unknown suite {:?}; available: {}",
            filter.unwrap_or(""),
            names.join(", ")
        );
        return ExitCode::from(2);
    }
    let tol = Tolerances::from_env();
    let mut ok = true;
    for s in suites {
        let outcome = s.run(&tol);
        println!("{outcome}");
        ok &= outcome.passed();
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn list(json: bool, filter: Option<&str>) -> ExitCode {
    let all: Vec<Scenario> = scenario::builtins()
        .into_iter()
        .filter(|s| filter.is_none_or(|f| s.name.contains(f)))
        .collect();
    if json {
        let rows: Vec<_> = all
            .iter()
            .map(|s| serde_json::json!({ "name": s.name, "kind": s.kind(), "description": s.description }))
            .collect();
        println!("{}", serde_json::Value::Array(rows));
    } else {
        let width = all.iter().map(|s| s.name.len()).max().unwrap_or(0);
        for s in &all {
            println!("{:<width$}  {}", s.name, s.description);
        }
    }
    ExitCode::SUCCESS
}
