//! Command-line front end: solve, membership, bench and gen.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use trilin::baselines::Preconditioner;
use trilin::bench::{self, Dim, Grid, Method, RowWriter};
use trilin::instance::{self, InstanceKind, InstanceSpec};
use trilin::membership::{self, MembershipConfig, MembershipTag, PivotMode};
use trilin::solver::{self, OutcomeTag, SolverConfig};
use trilin::trace::{CsvTrace, NoTrace, TraceSink};
use trilin::{mm, Error};

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_NORMAL_EQ: u8 = 2;
const EXIT_UNSOLVABLE: u8 = 3;
const EXIT_WITNESS: u8 = 4;

#[derive(Parser)]
#[command(name = "trilin", version, about = "Triangle Algorithm solver for dense linear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve Ax = b from Matrix Market files
    Solve(SolveArgs),
    /// Test whether b lies in {Ax : |x| <= radius}
    Membership(MembershipArgs),
    /// Run an experiment grid and write CSV rows
    Bench(BenchArgs),
    /// Write a generated instance as Matrix Market files plus a JSON sidecar
    Gen(GenArgs),
}

#[derive(Args)]
struct SystemArgs {
    /// Matrix A (Matrix Market)
    matrix: PathBuf,
    /// Right-hand side b (Matrix Market, one column)
    rhs: PathBuf,
    #[arg(long, default_value_t = 1e-2)]
    epsilon: f64,
    #[arg(long, value_parser = parse_pivot_mode, default_value = "standard")]
    pivot_mode: PivotMode,
    /// Per-iteration CSV trace (iter,gap,radius,alpha,event)
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the computed x here (Matrix Market)
    #[arg(long)]
    x_out: Option<PathBuf>,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long)]
    radius_cap: Option<f64>,
    /// Total pivot-step budget across radii
    #[arg(long)]
    max_iters: Option<u64>,
    #[arg(long)]
    normal_eq_tol: Option<f64>,
    /// Tolerance of the unsolvability side conditions; 0 disables the verdict
    #[arg(long)]
    unsolvable_tol: Option<f64>,
    #[arg(long)]
    sigma_star: Option<f64>,
}

#[derive(Args)]
struct MembershipArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long)]
    radius: f64,
    #[arg(long)]
    max_iters: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated instance kinds: uniform, gaussian, lowrank, illcond
    #[arg(long, value_delimiter = ',', default_value = "uniform,gaussian,lowrank,illcond")]
    kinds: Vec<InstanceKind>,
    /// Comma-separated sizes, N or MxN
    #[arg(long, value_delimiter = ',', default_value = "100")]
    dims: Vec<Dim>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001,0.0001")]
    eps: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seeds: Vec<u64>,
    /// Comma-separated methods: ta, bicgstab, sd
    #[arg(long, value_delimiter = ',', default_value = "ta,bicgstab")]
    methods: Vec<Method>,
    /// CSV output; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON summary with medians over seeds
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Low-rank instances with b outside the range of A
    #[arg(long)]
    inconsistent: bool,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = solver::DEFAULT_MAX_ITERS_TOTAL)]
    max_iters: u64,
    #[arg(long, default_value = "none")]
    precond: Preconditioner,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    kind: InstanceKind,
    /// N or MxN
    #[arg(long)]
    dim: Dim,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    inconsistent: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// File name prefix; defaults to <kind>_<dim>_s<seed>
    #[arg(long)]
    stem: Option<String>,
}

fn parse_pivot_mode(s: &str) -> Result<PivotMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn create(path: &Path) -> trilin::Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> trilin::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Runs `f` with a CSV trace sink when a path is given.
fn with_trace<R>(
    path: Option<&Path>,
    f: impl FnOnce(&mut dyn TraceSink) -> trilin::Result<R>,
) -> trilin::Result<R> {
    match path {
        Some(p) => {
            let mut sink = CsvTrace::new(create(p)?);
            let out = f(&mut sink);
            let mut file = sink.finish()?;
            file.flush().map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
            out
        }
        None => f(&mut NoTrace),
    }
}

fn run_solve(args: SolveArgs) -> trilin::Result<u8> {
    let sys = &args.system;
    let a = mm::read_matrix(&sys.matrix)?;
    let b = mm::read_vector(&sys.rhs)?;
    let mut cfg = SolverConfig::new(sys.epsilon).with_pivot_mode(sys.pivot_mode);
    cfg.r0 = args.r0;
    cfg.radius_cap = args.radius_cap;
    cfg.normal_eq_tol = args.normal_eq_tol;
    cfg.unsolvable_tol = args.unsolvable_tol;
    cfg.sigma_star_hint = args.sigma_star;
    if let Some(n) = args.max_iters {
        cfg.max_iters_total = n;
    }

    let start = Instant::now();
    let outcome = with_trace(sys.trace.as_deref(), |sink| solver::solve_with(&a, &b, &cfg, sink))?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    if let Some(p) = &sys.x_out {
        mm::write_vector(p, &outcome.x)?;
    }
    emit_json(&outcome.report(wall_ms), sys.json.as_deref())?;
    Ok(match outcome.tag {
        OutcomeTag::EpsSolution => EXIT_OK,
        OutcomeTag::NormalEqEpsSolution => EXIT_NORMAL_EQ,
        OutcomeTag::Unsolvable => EXIT_UNSOLVABLE,
    })
}

#[derive(Serialize)]
struct MembershipReport {
    tag: MembershipTag,
    radius: f64,
    gap: f64,
    iterations: u64,
    /// Present for witnesses: `gap / 2 <= distance <= gap`.
    distance_lower: Option<f64>,
    distance_upper: Option<f64>,
    radius_lower_bound: Option<f64>,
    wall_time_ms: f64,
}

fn run_membership(args: MembershipArgs) -> trilin::Result<u8> {
    let sys = &args.system;
    let a = mm::read_matrix(&sys.matrix)?;
    let b = mm::read_vector(&sys.rhs)?;
    let mut cfg = MembershipConfig::new(args.radius, sys.epsilon);
    cfg.pivot_mode = sys.pivot_mode;
    cfg.max_iters = args.max_iters;

    let start = Instant::now();
    let res = with_trace(sys.trace.as_deref(), |sink| membership::run_membership_with(&a, &b, &cfg, sink))?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    if let Some(p) = &sys.x_out {
        mm::write_vector(p, &res.state.x_prime)?;
    }
    let cert = res.certificate.as_ref();
    let report = MembershipReport {
        tag: res.tag,
        radius: res.state.r,
        gap: res.state.gap,
        iterations: res.state.iterations,
        distance_lower: cert.map(|c| c.delta_lower),
        distance_upper: cert.map(|c| c.delta_upper),
        radius_lower_bound: cert.map(|c| c.radius_lower_bound),
        wall_time_ms: wall_ms,
    };
    emit_json(&report, sys.json.as_deref())?;
    Ok(match res.tag {
        MembershipTag::NearPoint => EXIT_OK,
        MembershipTag::Witness => EXIT_WITNESS,
        MembershipTag::IterationCapReached => EXIT_ERROR,
    })
}

fn run_bench(args: BenchArgs) -> trilin::Result<u8> {
    let mut grid = Grid::new(args.kinds, args.dims, args.eps, args.seeds, args.methods);
    grid.consistent = !args.inconsistent;
    grid.threads = args.threads;
    grid.ta_max_iters = args.max_iters;
    grid.precond = args.precond;

    let out: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut writer = RowWriter::new(out)?;
    let mut write_err = None;
    let rows = bench::run_grid_with(&grid, |row| {
        if write_err.is_none() {
            if let Err(e) = writer.write(row) {
                write_err = Some(e);
            }
        }
        eprintln!(
            "{:>8} {:>8} {:>9} eps={:<7} seed={:<3} {:>10.1} ms  {}",
            row.method,
            row.kind,
            Dim { m: row.m, n: row.n },
            row.epsilon,
            row.seed,
            row.wall_time_ms,
            row.outcome
        );
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    writer.finish()?.flush().map_err(|e| Error::Io {
        path: args.out.clone().unwrap_or_else(|| PathBuf::from("-")),
        source: e,
    })?;

    let summary = bench::summarize(&rows);
    for s in &summary {
        eprintln!(
            "median {:>8} {:>8} {:>9} eps={:<7} {:>10.1} ms {:>10} iters  ({} runs)",
            s.method,
            s.kind,
            Dim { m: s.m, n: s.n },
            s.epsilon,
            s.median_wall_time_ms,
            s.median_iterations,
            s.runs
        );
    }
    if let Some(p) = &args.summary {
        emit_json(&summary, Some(p))?;
    }
    Ok(EXIT_OK)
}

fn run_gen(args: GenArgs) -> trilin::Result<u8> {
    let mut spec = InstanceSpec::new(args.kind, args.dim.m, args.dim.n, args.seed);
    spec.consistent = !args.inconsistent;
    let inst = instance::generate(&spec)?;
    let stem = args
        .stem
        .unwrap_or_else(|| format!("{}_{}_s{}", args.kind, args.dim, args.seed));
    let paths = inst.export(&args.out_dir, &stem)?;
    emit_json(&paths, None)?;
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    // usage errors exit with EXIT_ERROR
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Membership(a) => run_membership(a),
        Command::Bench(a) => run_bench(a),
        Command::Gen(a) => run_gen(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
