//! Command-line scenario runner and fuzzer.
//!
//! Exit codes: 0 pass, 1 expectation failure, 2 invariant violation,
//! 3 parse error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use noteswap_core::fuzz::{run_random_schedules_at_depth, ExecutionMode, FUZZ_DEPTH};
use noteswap_core::scenario::{parse_scenario, Engine};

#[derive(Parser)]
#[command(name = "noteswap", version, about = "Multi-asset shielded ledger with atomic note exchange")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Merkle tree depth (overrides a scenario's `depth` header).
    #[arg(long, global = true)]
    depth: Option<usize>,

    /// Print the full event trace.
    #[arg(long, global = true)]
    verbose: bool,

    /// Write the final ledger dump (one line per tree leaf) to this path.
    #[arg(long, global = true, value_name = "PATH")]
    dump_ledger: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scripted scenario file.
    Run {
        /// Scenario script (one action per line, `#` comments).
        file: PathBuf,
    },
    /// Run randomized exchange schedules and report fairness statistics.
    Fuzz {
        /// Number of randomized sessions.
        #[arg(long, default_value_t = 100)]
        count: u64,
        /// Master seed; a fixed seed reproduces the report exactly.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run sessions on one core instead of the rayon pool.
        #[arg(long)]
        sequential: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { file } => run_file(&file, cli.depth, cli.verbose, cli.dump_ledger.as_deref()),
        Command::Fuzz {
            count,
            seed,
            sequential,
        } => fuzz(count, seed, cli.depth, sequential),
    }
}

fn run_file(
    file: &std::path::Path,
    depth: Option<usize>,
    verbose: bool,
    dump_path: Option<&std::path::Path>,
) -> ExitCode {
    let source = match std::fs::read_to_string(file) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", file.display());
            return ExitCode::from(3);
        }
    };
    let mut scenario = match parse_scenario(&source) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    if let Some(d) = depth {
        scenario.depth = d;
    }
    match Engine::new(&scenario).run(&scenario) {
        Ok(report) => {
            if verbose {
                print!("{}", report.trace);
            }
            if let Some(path) = dump_path {
                if let Err(e) = std::fs::write(path, &report.ledger_dump) {
                    eprintln!("error: cannot write ledger dump: {e}");
                    return ExitCode::from(1);
                }
            }
            println!("PASS {} ({} steps)", file.display(), scenario.steps.len());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("FAIL {}: {e}", file.display());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn fuzz(count: u64, seed: u64, depth: Option<usize>, sequential: bool) -> ExitCode {
    let mode = if sequential {
        ExecutionMode::Sequential
    } else {
        ExecutionMode::Parallel
    };
    let report = run_random_schedules_at_depth(count, seed, depth.unwrap_or(FUZZ_DEPTH), mode);
    println!("{report}");
    if report.is_fair() {
        println!("PASS fuzz count={count} seed={seed}");
        ExitCode::SUCCESS
    } else {
        eprintln!("FAIL fuzz count={count} seed={seed}");
        ExitCode::from(2)
    }
}
