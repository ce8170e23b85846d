//! Command-line surface of the grammar toolkit.
//!
//! Exit codes: 0 success, 1 verification mismatch, 2 usage or input error,
//! 3 resource or overflow failure. Results go to standard output,
//! diagnostics to standard error.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use recomp::{
    build_from_bytes_with_log, build_from_slp_full, lce, lce_with_stats, lz77_factorize_bytes,
    size_bound_report, write_level_log, Error, LevelContext, Rlslp, Schedule, Slp,
};

#[derive(Parser)]
#[command(name = "recomp", about = "Grammar-compressed LCE toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScheduleArg {
    Simttog,
    Gtog,
}

#[derive(Subcommand)]
enum Command {
    /// Build a grammar from a text file or an SLP file.
    Build {
        /// Input text (raw bytes).
        #[arg(long)]
        text: Option<PathBuf>,
        /// Input SLP file.
        #[arg(long)]
        slp: Option<PathBuf>,
        /// Build schedule for the SLP path (default gtog).
        #[arg(long, value_enum)]
        schedule: Option<ScheduleArg>,
        /// Write the per-level log to this file.
        #[arg(long)]
        log_levels: Option<PathBuf>,
        /// Output grammar file.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Longest common extension of the suffixes at positions i and j.
    Lce {
        grammar: PathBuf,
        i: u64,
        j: u64,
        /// Append the instrumented step count.
        #[arg(long)]
        stats: bool,
    },
    /// Print text[i..i+len-1] as raw bytes.
    Extract { grammar: PathBuf, i: u64, len: u64 },
    /// Print `N z g ratio height` (z and ratio need --text).
    Stats {
        grammar: PathBuf,
        #[arg(long)]
        text: Option<PathBuf>,
    },
    /// Check that the grammar expands to exactly the given text.
    Verify {
        grammar: PathBuf,
        #[arg(long)]
        text: PathBuf,
    },
    /// Factor count of the text; factors themselves with --print-factors.
    Lz77 {
        file: PathBuf,
        #[arg(long)]
        print_factors: bool,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("recomp: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Overflow(_) | Error::ExpansionBudget { .. } | Error::Internal(_) => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Build {
            text,
            slp,
            schedule,
            log_levels,
            output,
        } => cmd_build(text, slp, schedule, log_levels, output),
        Command::Lce {
            grammar,
            i,
            j,
            stats,
        } => {
            let g = load_grammar(&grammar)?;
            if stats {
                let (len, s) = lce_with_stats(&g, i, j)?;
                println!("{len} steps={}", s.steps);
            } else {
                println!("{}", lce(&g, i, j)?);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Extract { grammar, i, len } => {
            let g = load_grammar(&grammar)?;
            let bytes = g.extract_bytes(i, len)?;
            let mut out = std::io::stdout().lock();
            out.write_all(&bytes).map_err(io_error)?;
            out.flush().map_err(io_error)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Stats { grammar, text } => {
            let g = load_grammar(&grammar)?;
            let (z, ratio) = match text {
                Some(path) => {
                    let data = read_bytes(&path)?;
                    let fz = lz77_factorize_bytes(&data)?;
                    let report = size_bound_report(&g, &fz)?;
                    (report.factor_count.to_string(), format!("{:.4}", report.ratio))
                }
                None => ("-".into(), "-".into()),
            };
            println!(
                "{}\t{}\t{}\t{}\t{}",
                g.text_len(),
                z,
                g.symbol_count(),
                ratio,
                g.height()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { grammar, text } => {
            let g = load_grammar(&grammar)?;
            let data = read_bytes(&text)?;
            if g.text_len() != data.len() as u64 {
                println!("mismatch at offset {}", g.text_len().min(data.len() as u64));
                return Ok(ExitCode::from(1));
            }
            let expanded = g.extract_bytes(1, g.text_len())?;
            if let Some(offset) = expanded.iter().zip(&data).position(|(a, b)| a != b) {
                println!("mismatch at offset {offset}");
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Lz77 {
            file,
            print_factors,
        } => {
            let data = read_bytes(&file)?;
            let fz = lz77_factorize_bytes(&data)?;
            println!("{}", fz.factor_count());
            if print_factors {
                for (start, len) in fz.factors() {
                    println!("{start} {len}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn cmd_build(
    text: Option<PathBuf>,
    slp: Option<PathBuf>,
    schedule: Option<ScheduleArg>,
    log_levels: Option<PathBuf>,
    output: PathBuf,
) -> Result<ExitCode, Error> {
    let (g, contexts): (Rlslp, Vec<LevelContext>) = match (text, slp) {
        (Some(path), None) => {
            if schedule.is_some() {
                return Err(Error::Invalid(
                    "--schedule applies to --slp builds only".into(),
                ));
            }
            let data = read_bytes(&path)?;
            build_from_bytes_with_log(&data)?
        }
        (None, Some(path)) => {
            let input = read_string(&path)?;
            let slp = Slp::parse_str(&input)?;
            let schedule = match schedule.unwrap_or(ScheduleArg::Gtog) {
                ScheduleArg::Simttog => Schedule::Simulate,
                ScheduleArg::Gtog => Schedule::Alternate,
            };
            let (g, contexts, _report) = build_from_slp_full(&slp, schedule, true)?;
            (g, contexts)
        }
        _ => {
            return Err(Error::Invalid(
                "exactly one of --text or --slp is required".into(),
            ))
        }
    };
    if let Some(path) = log_levels {
        let mut buf = Vec::new();
        write_level_log(&contexts, &mut buf).map_err(io_error)?;
        fs::write(&path, buf).map_err(io_error)?;
    }
    let mut buf = Vec::new();
    g.write_to(&mut buf).map_err(io_error)?;
    fs::write(&output, buf).map_err(io_error)?;
    println!("g={} h={} N={}", g.symbol_count(), g.height(), g.text_len());
    Ok(ExitCode::SUCCESS)
}

fn load_grammar(path: &PathBuf) -> Result<Rlslp, Error> {
    let input = read_string(path)?;
    let g = Rlslp::parse_str(&input)?;
    let violations = g.validate();
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("recomp: {v}");
        }
        return Err(Error::Invalid(format!(
            "grammar file has {} violation(s)",
            violations.len()
        )));
    }
    Ok(g)
}

fn read_bytes(path: &PathBuf) -> Result<Vec<u8>, Error> {
    fs::read(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn read_string(path: &PathBuf) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn io_error(e: std::io::Error) -> Error {
    Error::Invalid(format!("i/o error: {e}"))
}
