use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qriccati::scenario::{self, Overrides, BUILTINS};

/// Quaternionic Riccati equations: scenario runner and example catalog.
#[derive(Parser)]
#[command(name = "qr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or a builtin by name) and write CSVs plus report.json.
    Run {
        /// Scenario file path or builtin name.
        scenario: String,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        rtol: Option<f64>,
        #[arg(long)]
        atol: Option<f64>,
        /// Output root; results go to `<out>/<scenario name>/`. Defaults to $QR_OUT_DIR, then ./qr-out.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the builtin scenarios.
    ListBuiltins,
    /// Print the configuration of a builtin scenario.
    Show { name: String },
}

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_SCHEMA: u8 = 2;

fn out_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("QR_OUT_DIR").filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("qr-out"))
}

fn run(source: &str, overrides: Overrides, out: Option<PathBuf>) -> ExitCode {
    let mut sc = match scenario::load(source) {
        Ok(sc) => sc,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_SCHEMA);
        }
    };
    if let Err(e) = sc.apply(&overrides) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_SCHEMA);
    }
    let dir = out_root(out).join(&sc.name);
    let report = match scenario::run(&sc, &dir) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CHECK_FAILED);
        }
    };
    for s in &report.seeds {
        match (&s.status, &s.error) {
            (_, Some(e)) => println!("seed {} {}: integration failed: {e}", s.index, s.seed),
            (Some(st), None) => println!("seed {} {}: {st:?}, {} steps", s.index, s.seed, s.steps),
            (None, None) => {}
        }
    }
    for c in &report.checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        match &c.error {
            Some(e) => println!("{verdict} {}: {e}", c.check),
            None => println!("{verdict} {}", c.check),
        }
    }
    if let Some(cl) = &report.classification {
        println!("classification: {:?}", cl.verdict);
    }
    println!("wrote {} files to {}", report.files.len() + 1, dir.display());
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, horizon, rtol, atol, out } => run(&scenario, Overrides { horizon, rtol, atol }, out),
        Command::ListBuiltins => {
            let width = BUILTINS.iter().map(|b| b.name.len()).max().unwrap_or(0);
            for b in BUILTINS {
                println!("{:width$}  {}", b.name, b.reproduces);
            }
            ExitCode::SUCCESS
        }
        Command::Show { name } => match scenario::builtin(&name) {
            Ok(b) => {
                print!("{}", b.text);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_SCHEMA)
            }
        },
    }
}
