//! Command-line front end: check cells, render transition diagrams,
//! generate constant-size test sets, and verify them by fault
//! simulation.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 generation
//! infeasible (no vertical successor, or enumeration over the
//! `ILA_ENUM_LIMIT` budget), 3 verification failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};

use ila::{
    atomic_fault_universe, canonical_x_decomposition, check_agreement, enumerate_x_decompositions,
    find_vertical_successor, gen_1d, gen_2d_atpg, gen_2d_euler, gen_nd, parse_cell_spec,
    random_cell, random_table_fault_campaign, run_campaign, search_grid_decomposition,
    state_cycles, BijectiveCell, Decomposition, DiagramKind, Error, GridShape, IlaGrid, TestSet,
    TransitionDiagram,
};

const ENUM_LIMIT_VAR: &str = "ILA_ENUM_LIMIT";
const DEFAULT_ENUM_LIMIT: u64 = 1_000_000;

#[derive(Parser)]
#[command(
    name = "ila",
    version,
    about = "Model iterative logic arrays of bijective cells: transition diagrams, \
             constant-size test sets, and fault-simulation verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a cell spec and print its basic invariants
    Check {
        /// Cell spec JSON (truth table or netlist form)
        cell_spec: PathBuf,
    },
    /// Render a transition diagram as DOT
    Diagram {
        cell_spec: PathBuf,
        /// Which diagram to render
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Output path for the DOT text
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a constant-size test set for an array of this cell
    Gen {
        cell_spec: PathBuf,
        /// Number of array dimensions
        #[arg(long)]
        dims: usize,
        /// Cells per dimension, e.g. --sizes 4 4
        #[arg(long, num_args = 1.., required = true)]
        sizes: Vec<usize>,
        /// Generation method
        #[arg(long, value_enum, default_value_t = MethodArg::Atpg)]
        method: MethodArg,
        /// Force a specific x-diagram decomposition (enumeration index)
        /// instead of the canonical or searched one
        #[arg(long)]
        decomp_index: Option<u64>,
        /// Wire-group widths for n-dimensional arrays, e.g. --widths 1 1 1
        /// (defaults to the cell's h and v groups)
        #[arg(long, num_args = 1..)]
        widths: Option<Vec<usize>>,
        /// Render codes as per-group bit strings instead of integers
        #[arg(long)]
        pretty: bool,
        /// Output path for the test-set JSON
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify a test set: digest, fault-free agreement, and campaigns
    Verify {
        cell_spec: PathBuf,
        /// Test-set JSON produced by `gen`
        testset: PathBuf,
        /// Additionally run this many random whole-table faults
        #[arg(long, default_value_t = 0)]
        random_trials: usize,
        /// Seed for the random fault campaign
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print a one-line verdict instead of the JSON report
        #[arg(long)]
        summary: bool,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a uniformly random bijective cell spec
    RandomCell {
        h: usize,
        v: usize,
        seed: u64,
        /// Output path for the cell spec JSON
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    X,
    Y,
    State,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Euler,
    Atpg,
}

/// A command failure: message for stderr plus the process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::CombinatoricsOverLimit { .. } => 2,
            _ => 1,
        };
        Failure::new(code, err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Check { cell_spec } => cmd_check(&cell_spec),
        Command::Diagram {
            cell_spec,
            kind,
            out,
        } => cmd_diagram(&cell_spec, kind, &out),
        Command::Gen {
            cell_spec,
            dims,
            sizes,
            method,
            decomp_index,
            widths,
            pretty,
            out,
        } => cmd_gen(
            &cell_spec,
            dims,
            sizes,
            method,
            decomp_index,
            widths,
            pretty,
            &out,
        ),
        Command::Verify {
            cell_spec,
            testset,
            random_trials,
            seed,
            summary,
            out,
        } => cmd_verify(
            &cell_spec,
            &testset,
            random_trials,
            seed,
            summary,
            out.as_deref(),
        ),
        Command::RandomCell { h, v, seed, out } => cmd_random_cell(h, v, seed, &out),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|err| Failure::new(1, format!("{}: {err}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|err| Failure::new(1, format!("{}: {err}", path.display())))
}

fn load_cell(path: &Path) -> Result<BijectiveCell, Failure> {
    Ok(parse_cell_spec(&read_text(path)?)?)
}

fn enum_limit() -> Result<u64, Failure> {
    match std::env::var(ENUM_LIMIT_VAR) {
        Ok(text) => text.trim().parse().map_err(|_| {
            Failure::new(
                1,
                format!("{ENUM_LIMIT_VAR} must be an unsigned integer, got {text:?}"),
            )
        }),
        Err(_) => Ok(DEFAULT_ENUM_LIMIT),
    }
}

fn cmd_check(cell_spec: &Path) -> Result<(), Failure> {
    let cell = load_cell(cell_spec)?;
    println!("({},{})-cell", cell.h(), cell.v());
    let lengths: Vec<String> = state_cycles(&cell)
        .cycle_lengths()
        .iter()
        .map(ToString::to_string)
        .collect();
    let mut line = format!("bijective; state cycles: {}", lengths.join(","));
    let mut all_balanced = true;
    for (kind, label) in [(DiagramKind::X, "X"), (DiagramKind::Y, "Y")] {
        let report = TransitionDiagram::build(&cell, kind).check_degrees();
        all_balanced &= report.balanced;
        line.push_str(&format!(
            "; {label} degrees {}/{} {}",
            report.expected,
            report.expected,
            if report.balanced { "OK" } else { "FAIL" }
        ));
    }
    println!("{line}");
    if all_balanced {
        Ok(())
    } else {
        Err(Failure::new(1, "transition diagram degrees are unbalanced"))
    }
}

fn cmd_diagram(cell_spec: &Path, kind: KindArg, out: &Path) -> Result<(), Failure> {
    let cell = load_cell(cell_spec)?;
    let kind = match kind {
        KindArg::X => DiagramKind::X,
        KindArg::Y => DiagramKind::Y,
        KindArg::State => DiagramKind::State,
    };
    let dot = TransitionDiagram::build(&cell, kind).to_dot()?;
    write_text(out, &dot)
}

fn pick_decomposition(cell: &BijectiveCell, index: u64) -> Result<Decomposition, Failure> {
    let enumeration = enumerate_x_decompositions(cell, enum_limit()?)?;
    let count = enumeration.total();
    enumeration.get(index).ok_or_else(|| {
        Failure::new(
            1,
            format!("decomposition index {index} out of range; this cell has {count}"),
        )
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(
    cell_spec: &Path,
    dims: usize,
    sizes: Vec<usize>,
    method: MethodArg,
    decomp_index: Option<u64>,
    widths: Option<Vec<usize>>,
    pretty: bool,
    out: &Path,
) -> Result<(), Failure> {
    let cell = load_cell(cell_spec)?;
    if sizes.len() != dims {
        return Err(Failure::new(
            1,
            format!("--dims {dims} but --sizes lists {} dimensions", sizes.len()),
        ));
    }
    let default_widths = vec![cell.h(), cell.v()];
    if method == MethodArg::Euler {
        if let Some(w) = &widths {
            if *w != default_widths {
                return Err(Failure::new(
                    1,
                    "the euler methods chain the cell's own (h, v) wire groups; \
                     --widths only applies to --method atpg",
                ));
            }
        }
    }
    let (set, provenance) = match (method, dims) {
        (MethodArg::Euler, 1) => {
            let index = decomp_index.unwrap_or(0);
            let d = if index == 0 {
                canonical_x_decomposition(&cell)
            } else {
                pick_decomposition(&cell, index)?
            };
            let set = gen_1d(&cell, sizes[0], &d)?;
            (set, format!("decomposition {index}"))
        }
        (MethodArg::Euler, 2) => {
            let (index, d, vertical) = match decomp_index {
                Some(index) => {
                    let d = pick_decomposition(&cell, index)?;
                    let vertical = find_vertical_successor(&cell, &d).ok_or_else(|| {
                        Failure::new(
                            2,
                            format!(
                                "decomposition {index} admits no vertical successor; \
                                 omit --decomp-index to search, or use --method atpg"
                            ),
                        )
                    })?;
                    (index, d, vertical)
                }
                None => {
                    let found =
                        search_grid_decomposition(&cell, enum_limit()?)?.ok_or_else(|| {
                            Failure::new(
                                2,
                                "no x-diagram decomposition of this cell admits a vertical \
                                 successor; use --method atpg",
                            )
                        })?;
                    (found.index, found.decomposition, found.vertical)
                }
            };
            let set = gen_2d_euler(&cell, sizes[0], sizes[1], &d, &vertical)?;
            (set, format!("decomposition {index}"))
        }
        (MethodArg::Euler, _) => {
            return Err(Failure::new(
                2,
                "euler tiling supports 1 or 2 dimensions; use --method atpg",
            ));
        }
        (MethodArg::Atpg, _) => {
            if decomp_index.is_some() {
                return Err(Failure::new(
                    1,
                    "--decomp-index only applies to --method euler",
                ));
            }
            let widths = widths.unwrap_or(default_widths);
            if dims == 2 && widths == vec![cell.h(), cell.v()] {
                let set = gen_2d_atpg(&cell, sizes[0], sizes[1])?;
                (set, "state cycles".to_string())
            } else {
                let shape = GridShape::new(widths, sizes)?;
                let set = gen_nd(&cell, shape)?;
                (set, "state cycles".to_string())
            }
        }
    };
    let text = if pretty {
        set.to_json_pretty()
    } else {
        set.to_json()
    };
    write_text(out, &text)?;
    println!(
        "{} vectors ({}, {provenance})",
        set.vectors.len(),
        set.method.as_str()
    );
    Ok(())
}

fn cmd_verify(
    cell_spec: &Path,
    testset: &Path,
    random_trials: usize,
    seed: u64,
    summary: bool,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let cell = load_cell(cell_spec)?;
    let set = TestSet::from_json(&read_text(testset)?)?;
    if set.cell_digest != cell.digest() {
        return Err(Error::DigestMismatch {
            expected: set.cell_digest.clone(),
            got: cell.digest(),
        }
        .into());
    }
    let grid = IlaGrid::new(cell, set.shape.clone())?;
    let agreement = match check_agreement(&grid, &set) {
        Ok(()) => None,
        Err(Error::VectorMismatch(msg)) => Some(msg),
        Err(other) => return Err(other.into()),
    };
    let atomic = run_campaign(&grid, &set, &atomic_fault_universe(&grid))?;
    let random = if random_trials > 0 {
        Some(random_table_fault_campaign(
            &grid,
            &set,
            random_trials,
            seed,
        )?)
    } else {
        None
    };
    let pass =
        agreement.is_none() && atomic.passed() && random.as_ref().is_none_or(|r| r.all_detected());

    if summary {
        let mut parts = vec![
            format!(
                "agreement {}",
                if agreement.is_none() { "ok" } else { "FAILED" }
            ),
            format!("atomic {}/{} detected", atomic.detected, atomic.total),
        ];
        if let Some(r) = &random {
            parts.push(format!("random {}/{} detected", r.detected, r.total));
        }
        parts.push(format!(
            "coverage {}",
            if atomic.coverage.all_exhaustive {
                "exhaustive"
            } else {
                "incomplete"
            }
        ));
        println!(
            "{}: {}",
            if pass { "PASS" } else { "FAIL" },
            parts.join("; ")
        );
    } else {
        let mut root = Map::new();
        root.insert("pass".into(), pass.into());
        root.insert(
            "agreement".into(),
            match &agreement {
                None => "ok".into(),
                Some(msg) => Value::String(msg.clone()),
            },
        );
        root.insert("atomic".into(), atomic.to_json_value());
        root.insert(
            "random".into(),
            random.as_ref().map_or(Value::Null, |r| r.to_json_value()),
        );
        let mut text = serde_json::to_string(&Value::Object(root)).expect("report serializes");
        text.push('\n');
        match out {
            Some(path) => write_text(path, &text)?,
            None => print!("{text}"),
        }
    }
    if pass {
        Ok(())
    } else {
        Err(Failure::new(3, "verification failed"))
    }
}

fn cmd_random_cell(h: usize, v: usize, seed: u64, out: &Path) -> Result<(), Failure> {
    let cell = random_cell(h, v, seed)?;
    write_text(out, &ila::cell_spec_json(&cell))?;
    println!("{}", cell.digest());
    Ok(())
}
