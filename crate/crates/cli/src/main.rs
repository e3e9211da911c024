use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dcbound_core::abstractor::{self, AbstractError, AbstractOptions, DEFAULT_DEPTH_LIMIT};
use dcbound_core::engine::{AnalysisError, AnalysisMode, AnalysisOptions, Report};
use dcbound_core::local_bounds::{CycleOverflow, DEFAULT_MAX_CYCLES};
use dcbound_core::oracle::{self, VerdictKind, DEFAULT_STEP_CAP};
use dcbound_core::reset_graph::{ResetGraph, ResetPathOverflow, DEFAULT_MAX_RESET_PATHS};
use dcbound_core::{parse_dcp, Dcp, Valuation};

mod exit {
    pub const OK: u8 = 0;
    pub const USAGE: u8 = 1;
    pub const UNDEFINED: u8 = 2;
    pub const FAIL: u8 = 3;
    pub const PARTIAL: u8 = 4;
    pub const OVERFLOW: u8 = 5;
}

/// Symbolic worst-case bounds for difference constraint programs.
///
/// Exit codes: 0 success or PASS, 1 usage or parse error, 2 complexity is
/// undef, 3 validation FAIL, 4 validation PASS-PARTIAL, 5 an enumeration
/// cap was exceeded.
#[derive(Parser, Debug)]
#[command(name = "dcbound", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute transition bounds and the overall complexity.
    Analyze {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        limits: Limits,
        #[arg(long, default_value_t = AnalysisMode::Ctx)]
        mode: AnalysisMode,
        /// Also print a variable bound for every variable.
        #[arg(long)]
        vb: bool,
        /// Write the reset graph in DOT format to this file.
        #[arg(long, value_name = "PATH")]
        dot: Option<PathBuf>,
    },
    /// Abstract a concrete program to a DCP.
    Abstract {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        limits: Limits,
        /// Output file (stdout when absent).
        #[arg(short, long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Check bounds against exhaustive execution of the DCP.
    Validate {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        limits: Limits,
        #[arg(long, default_value_t = AnalysisMode::Ctx)]
        mode: AnalysisMode,
        /// Constant values, `n=3` or `n=0..4`. Repeatable. Constants not
        /// assigned range over 0..4.
        #[arg(long = "assign", value_name = "NAME=VALUES")]
        assigns: Vec<String>,
        /// State limit per valuation.
        #[arg(long, default_value_t = DEFAULT_STEP_CAP)]
        max_steps: usize,
        /// Validate the bounds in this report file instead of computing them.
        #[arg(long, value_name = "REPORT")]
        bounds: Option<PathBuf>,
    },
    /// Print the optimal reset paths of every variable, or the reset graph.
    Resets {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        limits: Limits,
        /// Write the reset graph in DOT format to this file (`-` for stdout)
        /// instead of listing paths.
        #[arg(long, value_name = "PATH")]
        dot: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Input {
    /// A `.dcp` or `.prog` file.
    file: PathBuf,
    /// Input format; guessed from the extension or first keyword when absent.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Print the abstracted DCP of a program to stderr.
    #[arg(short, long)]
    verbose: bool,
    /// Name abstracted variables after their norms, e.g. `(l-i)`.
    #[arg(long)]
    keep_names: bool,
}

#[derive(Args, Debug)]
struct Limits {
    #[arg(long, default_value_t = DEFAULT_MAX_CYCLES)]
    max_cycles: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_RESET_PATHS)]
    max_reset_paths: usize,
    #[arg(long, default_value_t = DEFAULT_DEPTH_LIMIT)]
    abstraction_depth: usize,
}

impl Limits {
    fn analysis(&self, mode: AnalysisMode) -> AnalysisOptions {
        AnalysisOptions {
            mode,
            max_cycles: self.max_cycles,
            max_reset_paths: self.max_reset_paths,
            ..AnalysisOptions::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Dcp,
    Prog,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_of(&err))
        }
    }
}

fn exit_code_of(err: &anyhow::Error) -> u8 {
    let overflow = err.chain().any(|e| {
        e.is::<AnalysisError>()
            || e.is::<ResetPathOverflow>()
            || e.is::<CycleOverflow>()
            || matches!(
                e.downcast_ref::<AbstractError>(),
                Some(AbstractError::Cycles(_))
            )
    });
    if overflow {
        exit::OVERFLOW
    } else {
        exit::USAGE
    }
}

fn run(cli: Cli) -> Result<u8> {
    let mut out = io::stdout().lock();
    match cli.command {
        Command::Analyze {
            input,
            limits,
            mode,
            vb,
            dot,
        } => {
            let dcp = load(&input, &limits)?;
            if let Some(path) = dot {
                write_file(&path, &ResetGraph::build(&dcp).to_dot(&dcp))?;
            }
            let report = dcbound_core::analyze(&dcp, &limits.analysis(mode))?;
            out.write_all(report.render(vb).as_bytes())?;
            Ok(if report.complexity.is_undefined() {
                exit::UNDEFINED
            } else {
                exit::OK
            })
        }
        Command::Abstract {
            input,
            limits,
            output,
        } => {
            if format_of(&input)? != Format::Prog {
                bail!("`abstract` expects a program file");
            }
            let abstraction = abstract_file(&input, &limits)?;
            let text = abstraction.render();
            match output {
                Some(path) => write_file(&path, &text)?,
                None => out.write_all(text.as_bytes())?,
            }
            Ok(exit::OK)
        }
        Command::Validate {
            input,
            limits,
            mode,
            assigns,
            max_steps,
            bounds,
        } => {
            let dcp = load(&input, &limits)?;
            let report = match bounds {
                Some(path) => {
                    let text = read(&path)?;
                    Report::parse(&text).map_err(|e| anyhow!("{}:{e}", path.display()))?
                }
                None => dcbound_core::analyze(&dcp, &limits.analysis(mode))?,
            };
            let valuations = valuations(&dcp, &assigns)?;
            let verdict = oracle::check_soundness(&dcp, &report, &valuations, max_steps)?;
            for check in &verdict.checks {
                out.write_all(check.table().as_bytes())?;
            }
            for (val, row) in verdict.counterexamples() {
                writeln!(
                    out,
                    "counterexample {val}: {} observed {} exceeds bound {}",
                    row.subject,
                    row.observed
                        .as_ref()
                        .map_or("-".into(), ToString::to_string),
                    row.bound
                        .as_ref()
                        .map_or("undef".into(), ToString::to_string),
                )?;
            }
            writeln!(out, "{}", verdict.kind)?;
            Ok(match verdict.kind {
                VerdictKind::Pass => exit::OK,
                VerdictKind::PassPartial => exit::PARTIAL,
                VerdictKind::Fail => exit::FAIL,
            })
        }
        Command::Resets { input, limits, dot } => {
            let dcp = load(&input, &limits)?;
            if let Some(path) = dot {
                let text = ResetGraph::build(&dcp).to_dot(&dcp);
                if path.as_os_str() == "-" {
                    out.write_all(text.as_bytes())?;
                } else {
                    write_file(&path, &text)?;
                }
                return Ok(exit::OK);
            }
            let removed = ResetGraph::build(&dcp).removed().clone();
            let working = dcp.without_vars(&removed);
            let graph = ResetGraph::build(&working);
            for v in dcp.vars() {
                if removed.contains(v) {
                    writeln!(out, "R({v}): removed (reset cycle)")?;
                    continue;
                }
                let paths = graph.optimal_reset_paths(&working, v, limits.max_reset_paths)?;
                writeln!(out, "R({v}): {} path(s)", paths.len())?;
                for p in &paths {
                    writeln!(out, "  {}", p.display(&working))?;
                }
            }
            Ok(exit::OK)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn format_of(input: &Input) -> Result<Format> {
    if let Some(f) = input.format {
        return Ok(f);
    }
    match input.file.extension().and_then(|e| e.to_str()) {
        Some("dcp") => return Ok(Format::Dcp),
        Some("prog") => return Ok(Format::Prog),
        _ => {}
    }
    let text = read(&input.file)?;
    let first = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .find(|l| !l.is_empty())
        .and_then(|l| l.split_whitespace().next());
    match first {
        Some("prog") => Ok(Format::Prog),
        Some("dcp") => Ok(Format::Dcp),
        _ => bail!(
            "cannot tell the format of {}; use --format dcp|prog",
            input.file.display()
        ),
    }
}

fn abstract_file(input: &Input, limits: &Limits) -> Result<abstractor::Abstraction> {
    let text = read(&input.file)?;
    let program =
        abstractor::parse_program(&text).map_err(|e| anyhow!("{}:{e}", input.file.display()))?;
    let opts = AbstractOptions {
        depth_limit: limits.abstraction_depth,
        max_cycles: limits.max_cycles,
        keep_names: input.keep_names,
    };
    let abstraction = abstractor::abstract_program(&program, &opts)?;
    for w in &abstraction.warnings {
        eprintln!("warning: {w}");
    }
    Ok(abstraction)
}

/// Reads a DCP, abstracting first when the input is a program.
fn load(input: &Input, limits: &Limits) -> Result<Dcp> {
    match format_of(input)? {
        Format::Dcp => {
            let text = read(&input.file)?;
            parse_dcp(&text).map_err(|e| anyhow!("{}:{e}", input.file.display()))
        }
        Format::Prog => {
            let abstraction = abstract_file(input, limits)?;
            if input.verbose {
                eprint!("{}", abstraction.render());
            }
            Ok(abstraction.dcp)
        }
    }
}

/// Parses `name=3` or `name=0..4`.
fn parse_assign(text: &str) -> Result<(String, Vec<u64>)> {
    let (name, values) = text
        .split_once('=')
        .ok_or_else(|| anyhow!("--assign expects NAME=VALUE or NAME=LO..HI, got `{text}`"))?;
    let num = |s: &str| {
        s.trim()
            .parse::<u64>()
            .map_err(|_| anyhow!("--assign {text}: `{s}` is not a non-negative integer"))
    };
    let values = match values.split_once("..") {
        Some((lo, hi)) => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            if lo > hi {
                bail!("--assign {text}: empty range");
            }
            (lo..=hi).collect()
        }
        None => vec![num(values)?],
    };
    Ok((name.trim().to_string(), values))
}

fn valuations(dcp: &Dcp, assigns: &[String]) -> Result<Vec<Valuation>> {
    let mut ranges: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for a in assigns {
        let (name, values) = parse_assign(a)?;
        if !dcp.is_const(&name) {
            bail!("--assign {a}: `{name}` is not a symbolic constant of the program");
        }
        let entry = ranges.entry(name).or_default();
        for v in values {
            if !entry.contains(&v) {
                entry.push(v);
            }
        }
    }
    for k in dcp.consts() {
        ranges.entry(k.clone()).or_insert_with(|| (0..=4).collect());
    }
    let ranges: Vec<(String, Vec<u64>)> = ranges.into_iter().collect();
    Ok(oracle::valuation_grid(&ranges))
}
