//! Command-line frontend: parse an integer transition system, run the
//! bound analysis, optionally validate the result against the exhaustive
//! interpreter, and print the report.
//!
//! Exit codes: 0 success, 1 input error, 2 internal error, 3 oracle check
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use polybound_core::analysis::{analyze_program, AnalysisConfig, Technique};
use polybound_core::interp::{check_bound_soundness, state_grid, ExploreCaps, Verdict};
use polybound_core::its::{parse_its_with, NeMode, ParseOptions};
use polybound_core::report::{render_json, render_report};
use polybound_core::smt::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Plain,
    Json,
}

#[derive(Parser, Debug)]
#[command(
    name = "polybound",
    about = "Runtime-complexity analysis for integer transition systems"
)]
struct Cli {
    /// Input file in the ITS format.
    input: PathBuf,

    /// Local-bound techniques: twn, rf, or twn+rf.
    #[arg(long, default_value = "twn+rf")]
    technique: String,

    /// External SMT solver command line; "none" disables it.
    #[arg(long, default_value = "z3 -in")]
    solver: String,

    /// Per-query timeout for the external solver.
    #[arg(long, default_value_t = 5000)]
    solver_timeout_ms: u64,

    /// Maximum length of simple cycles considered for chaining.
    #[arg(long, default_value_t = 6)]
    cycle_max_len: usize,

    /// Chain loops with the full guard instead of the original one.
    #[arg(long)]
    full_chained_guard: bool,

    /// Validate the computed bounds with the exhaustive interpreter.
    #[arg(long)]
    check: bool,

    /// Component range for oracle initial states and temporaries.
    #[arg(long, default_value_t = 2)]
    check_range: i64,

    /// Per-run depth cap for the oracle.
    #[arg(long, default_value_t = 10_000)]
    check_depth: usize,

    /// Desugar `!=` by splitting rules instead of in-guard disjunction.
    #[arg(long)]
    ne_split: bool,

    /// Include the derivation log in the report.
    #[arg(long)]
    proof: bool,

    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Plain)]
    format: Format,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(code) => code,
        Err(_) => {
            eprintln!("internal error");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> ExitCode {
    let technique: Technique = match cli.technique.parse() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let text = match std::fs::read_to_string(&cli.input) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: {e}", cli.input.display());
            return ExitCode::from(1);
        }
    };
    let options = ParseOptions {
        ne_mode: if cli.ne_split {
            NeMode::SplitRules
        } else {
            NeMode::InGuard
        },
    };
    let program = match parse_its_with(&text, options) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{}: {e}", cli.input.display());
            return ExitCode::from(1);
        }
    };
    let config = AnalysisConfig {
        technique,
        solver: SolverConfig {
            command: (cli.solver != "none").then(|| cli.solver.clone()),
            timeout_ms: cli.solver_timeout_ms,
        },
        cycle_max_len: cli.cycle_max_len,
        full_chained_guard: cli.full_chained_guard,
        proof: cli.proof,
    };
    let result = analyze_program(&program, &config);

    let rendered = match cli.format {
        Format::Plain => render_report(&program, &result, cli.proof),
        Format::Json => render_json(&program, &result, cli.proof),
    };
    print!("{rendered}");

    if cli.check {
        let caps = ExploreCaps {
            temp_min: -cli.check_range,
            temp_max: cli.check_range,
            depth_cap: cli.check_depth,
            ..ExploreCaps::default()
        };
        let mut inconclusive = 0usize;
        for sigma0 in state_grid(&program, cli.check_range) {
            match check_bound_soundness(&program, &result.rbglo, &sigma0, caps) {
                Verdict::Pass => {}
                Verdict::Inconclusive => inconclusive += 1,
                Verdict::Fail {
                    transition,
                    observed,
                } => {
                    eprintln!(
                        "check failed: transition {} fired {} times from {:?}, above its bound",
                        program.transition(transition).name,
                        observed,
                        sigma0
                    );
                    return ExitCode::from(3);
                }
            }
        }
        if inconclusive > 0 {
            eprintln!("check: {inconclusive} explorations hit a cap and were inconclusive");
        } else {
            eprintln!("check: all explorations within bounds");
        }
    }
    ExitCode::SUCCESS
}
