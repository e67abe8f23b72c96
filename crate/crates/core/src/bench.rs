//! Experiment grid: instance kind x dimension x epsilon x seed x method.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{self, BaselineReport, Preconditioner};
use crate::error::{Error, Result};
use crate::instance::{self, Instance, InstanceKind, InstanceSpec};
use crate::solver::{self, OutcomeTag, SolverConfig, DEFAULT_MAX_ITERS_TOTAL};

pub const DEFAULT_EPSILONS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

pub const CSV_HEADER: [&str; 11] = [
    "method",
    "kind",
    "m",
    "n",
    "epsilon",
    "seed",
    "wall_time_ms",
    "iterations",
    "residual",
    "normal_residual",
    "outcome",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ta")]
    Triangle,
    #[serde(rename = "bicgstab")]
    BiCgStab,
    #[serde(rename = "sd")]
    SteepestDescent,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Triangle => "ta",
            Method::BiCgStab => "bicgstab",
            Method::SteepestDescent => "sd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ta" | "triangle" => Ok(Method::Triangle),
            "bicgstab" => Ok(Method::BiCgStab),
            "sd" | "steepest" | "steepest-descent" => Ok(Method::SteepestDescent),
            other => Err(Error::InvalidArgument(format!(
                "unknown method `{other}` (expected ta, bicgstab or sd)"
            ))),
        }
    }
}

/// Matrix shape; parses `300` (square) or `300x200`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Dim {
    pub m: usize,
    pub n: usize,
}

impl Dim {
    pub fn square(n: usize) -> Self {
        Dim { m: n, n }
    }
}

impl FromStr for Dim {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad dimension `{s}` (expected N or MxN)"));
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        match s.split_once(['x', 'X']) {
            Some((m, n)) => Ok(Dim { m: parse(m)?, n: parse(n)? }),
            None => Ok(Dim::square(parse(s)?)),
        }
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.m == self.n {
            write!(f, "{}", self.n)
        } else {
            write!(f, "{}x{}", self.m, self.n)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub method: Method,
    pub kind: InstanceKind,
    pub m: usize,
    pub n: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub wall_time_ms: f64,
    pub iterations: u64,
    pub residual: f64,
    pub normal_residual: f64,
    pub outcome: String,
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub kinds: Vec<InstanceKind>,
    pub dims: Vec<Dim>,
    pub epsilons: Vec<f64>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub consistent: bool,
    pub threads: usize,
    pub ta_max_iters: u64,
    pub precond: Preconditioner,
}

impl Grid {
    pub fn new(kinds: Vec<InstanceKind>, dims: Vec<Dim>, epsilons: Vec<f64>, seeds: Vec<u64>, methods: Vec<Method>) -> Self {
        Grid {
            kinds,
            dims,
            epsilons,
            seeds,
            methods,
            consistent: true,
            threads: 1,
            ta_max_iters: DEFAULT_MAX_ITERS_TOTAL,
            precond: Preconditioner::None,
        }
    }

    pub fn len(&self) -> usize {
        self.kinds.len() * self.dims.len() * self.epsilons.len() * self.seeds.len() * self.methods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        let empty = [
            ("kinds", self.kinds.is_empty()),
            ("dims", self.dims.is_empty()),
            ("epsilons", self.epsilons.is_empty()),
            ("seeds", self.seeds.is_empty()),
            ("methods", self.methods.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::InvalidArgument(format!("grid needs at least one entry in {name}")));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {e}")));
        }
        if let Some(d) = self.dims.iter().find(|d| d.m == 0 || d.n == 0) {
            return Err(Error::InvalidArgument(format!("dimension {d} has a zero side")));
        }
        Ok(())
    }

    /// Position of a cell in grid order.
    fn index(&self, k: usize, d: usize, e: usize, s: usize, m: usize) -> usize {
        (((k * self.dims.len() + d) * self.epsilons.len() + e) * self.seeds.len() + s) * self.methods.len() + m
    }
}

fn ta_outcome(tag: OutcomeTag) -> &'static str {
    match tag {
        OutcomeTag::EpsSolution => "eps_solution",
        OutcomeTag::NormalEqEpsSolution => "normal_eq_eps_solution",
        OutcomeTag::Unsolvable => "unsolvable",
    }
}

fn baseline_outcome(rep: &BaselineReport) -> &'static str {
    if rep.converged {
        "converged"
    } else if rep.breakdown.is_some() {
        "breakdown"
    } else {
        "not_converged"
    }
}

/// Solves one instance with one method; only the solve is timed.
pub fn run_cell(inst: &Instance, method: Method, epsilon: f64, grid: &Grid) -> ExperimentRow {
    let spec = inst.spec;
    let mut row = ExperimentRow {
        method,
        kind: spec.kind,
        m: spec.m,
        n: spec.n,
        epsilon,
        seed: spec.seed,
        wall_time_ms: f64::NAN,
        iterations: 0,
        residual: f64::NAN,
        normal_residual: f64::NAN,
        outcome: "error".to_string(),
    };
    let (a, b) = (&inst.a, inst.b.as_slice());
    let start = Instant::now();
    let result: Result<(u64, f64, f64, &str)> = match method {
        Method::Triangle => {
            let cfg = SolverConfig::new(epsilon).with_max_iters(grid.ta_max_iters);
            match solver::solve(a, b, &cfg) {
                Ok(o) => Ok((o.iterations, o.residual, o.normal_residual, ta_outcome(o.tag))),
                Err(Error::Inconclusive {
                    iterations, x, ..
                }) => solver::residuals(a, &x, b).map(|(r, nr)| (iterations, r, nr, "inconclusive")),
                Err(e) => Err(e),
            }
        }
        Method::BiCgStab => {
            let tol = baselines::relative_tol_for(b, epsilon);
            baselines::bicgstab(a, b, tol, 10 * spec.n as u64, grid.precond)
                .map(|r| (r.iterations, r.residual, r.normal_residual, baseline_outcome(&r)))
        }
        Method::SteepestDescent => baselines::steepest_descent_normal(a, b, epsilon, grid.ta_max_iters)
            .map(|r| (r.iterations, r.residual, r.normal_residual, baseline_outcome(&r))),
    };
    row.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    if let Ok((iterations, residual, normal_residual, outcome)) = result {
        row.iterations = iterations;
        row.residual = residual;
        row.normal_residual = normal_residual;
        row.outcome = outcome.to_string();
    }
    row
}

/// Runs every cell, handing rows to `on_row` in grid order as they become
/// available. Cells that fail are recorded with outcome `error`.
pub fn run_grid_with(grid: &Grid, mut on_row: impl FnMut(&ExperimentRow)) -> Result<Vec<ExperimentRow>> {
    grid.validate()?;
    // One unit per generated instance; all epsilons and methods share it.
    let units: Vec<(usize, usize, usize)> = (0..grid.kinds.len())
        .flat_map(|k| (0..grid.dims.len()).flat_map(move |d| (0..grid.seeds.len()).map(move |s| (k, d, s))))
        .collect();
    let work = |&(k, d, s): &(usize, usize, usize)| -> Vec<(usize, ExperimentRow)> {
        let dim = grid.dims[d];
        let mut spec = InstanceSpec::new(grid.kinds[k], dim.m, dim.n, grid.seeds[s]);
        spec.consistent = grid.consistent;
        let inst = instance::generate(&spec);
        let mut out = Vec::new();
        for (e, &eps) in grid.epsilons.iter().enumerate() {
            for (mi, &method) in grid.methods.iter().enumerate() {
                let row = match &inst {
                    Ok(inst) => run_cell(inst, method, eps, grid),
                    Err(_) => ExperimentRow {
                        method,
                        kind: spec.kind,
                        m: spec.m,
                        n: spec.n,
                        epsilon: eps,
                        seed: spec.seed,
                        wall_time_ms: f64::NAN,
                        iterations: 0,
                        residual: f64::NAN,
                        normal_residual: f64::NAN,
                        outcome: "error".to_string(),
                    },
                };
                out.push((grid.index(k, d, e, s, mi), row));
            }
        }
        out
    };

    let total = grid.len();
    let mut slots: Vec<Option<ExperimentRow>> = vec![None; total];
    let mut next = 0;
    let mut flush = |slots: &mut Vec<Option<ExperimentRow>>, next: &mut usize| {
        while *next < total {
            match &slots[*next] {
                Some(row) => on_row(row),
                None => break,
            }
            *next += 1;
        }
    };

    let threads = grid.threads.max(1).min(units.len());
    if threads == 1 {
        for u in &units {
            for (i, row) in work(u) {
                slots[i] = Some(row);
            }
            flush(&mut slots, &mut next);
        }
    } else {
        let cursor = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel();
        std::thread::scope(|scope| {
            for _ in 0..threads {
                let tx = tx.clone();
                let (cursor, units, work) = (&cursor, &units, &work);
                scope.spawn(move || loop {
                    let i = cursor.fetch_add(1, Ordering::Relaxed);
                    let Some(u) = units.get(i) else { break };
                    if tx.send(work(u)).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            for batch in rx {
                for (i, row) in batch {
                    slots[i] = Some(row);
                }
                flush(&mut slots, &mut next);
            }
        });
    }
    Ok(slots.into_iter().map(|r| r.expect("every cell produces a row")).collect())
}

pub fn run_grid(grid: &Grid) -> Result<Vec<ExperimentRow>> {
    run_grid_with(grid, |_| {})
}

/// Streaming CSV writer for experiment rows.
pub struct RowWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RowWriter<W> {
    pub fn new(inner: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(inner);
        inner.write_record(CSV_HEADER)?;
        Ok(RowWriter { inner })
    }

    pub fn write(&mut self, row: &ExperimentRow) -> Result<()> {
        self.inner.serialize(row)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush().map_err(csv::Error::from)?;
        self.inner
            .into_inner()
            .map_err(|e| csv::Error::from(e.into_error()).into())
    }
}

pub fn write_csv<W: Write>(rows: &[ExperimentRow], out: W) -> Result<W> {
    let mut w = RowWriter::new(out)?;
    for row in rows {
        w.write(row)?;
    }
    w.finish()
}

pub fn emit_csv(rows: &[ExperimentRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut file = write_csv(rows, std::io::BufWriter::new(file))?;
    file.flush().map_err(|e| Error::io(path, e))
}

/// Medians over seeds for one (method, kind, shape, epsilon) group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: Method,
    pub kind: InstanceKind,
    pub m: usize,
    pub n: usize,
    pub epsilon: f64,
    pub runs: usize,
    pub median_wall_time_ms: f64,
    pub median_iterations: f64,
    pub max_residual: f64,
    pub outcomes: BTreeMap<String, usize>,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Groups rows in first-seen order and takes medians over seeds.
pub fn summarize(rows: &[ExperimentRow]) -> Vec<SummaryRow> {
    let mut order: Vec<(Method, InstanceKind, usize, usize, u64)> = Vec::new();
    let mut groups: BTreeMap<(Method, InstanceKind, usize, usize, u64), Vec<&ExperimentRow>> = BTreeMap::new();
    for row in rows {
        let key = (row.method, row.kind, row.m, row.n, row.epsilon.to_bits());
        groups
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(row);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let mut times: Vec<f64> = g.iter().map(|r| r.wall_time_ms).collect();
            let mut iters: Vec<f64> = g.iter().map(|r| r.iterations as f64).collect();
            let mut outcomes = BTreeMap::new();
            for r in g {
                *outcomes.entry(r.outcome.clone()).or_insert(0) += 1;
            }
            SummaryRow {
                method: key.0,
                kind: key.1,
                m: key.2,
                n: key.3,
                epsilon: f64::from_bits(key.4),
                runs: g.len(),
                median_wall_time_ms: median(&mut times),
                median_iterations: median(&mut iters),
                max_residual: g.iter().map(|r| r.residual).fold(f64::NEG_INFINITY, f64::max),
                outcomes,
            }
        })
        .collect()
}
