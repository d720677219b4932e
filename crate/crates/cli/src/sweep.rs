//! Grid sweeps: one ensemble per cell, trajectories spread over a worker
//! pool, rows written by the calling thread in grid order.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use fermiladder_core::rng::derive_seed;
use fermiladder_core::trajectory::{self, TrajectoryOptions};
use fermiladder_core::{Bipartition, EnsembleResult, ModelParams, Propagator};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Cell, ExperimentConfig};
use crate::table::{read_results, ResultRow, TableWriter, RESULT_HEADER};

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn pool(threads: Option<usize>) -> Result<ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n.max(1));
    }
    b.build().context("starting the worker pool")
}

/// Seed of a cell's ensemble: the master seed mixed with a digest of the
/// cell's parameters, so a cell keeps its seed when the grid around it
/// changes.
pub fn cell_seed(master: u64, cell: &Cell) -> u64 {
    let p = &cell.params;
    let mut h = Sha256::new();
    for x in [p.t1, p.t2, p.t12, p.tau_u, p.p1, p.p2] {
        h.update(x.to_bits().to_le_bytes());
    }
    for n in [p.l, cell.l_a, p.n_st, p.m] {
        h.update((n as u64).to_le_bytes());
    }
    let d = h.finalize();
    derive_seed(master, u64::from_le_bytes(d[..8].try_into().expect("8 bytes")))
}

/// `run_ensemble_with` with the trajectories distributed over `pool`.
/// Results are collected by trajectory index, so the outcome does not
/// depend on the number of threads.
pub fn run_ensemble_parallel(
    params: &ModelParams,
    part: Bipartition,
    n_traj: usize,
    master_seed: u64,
    options: TrajectoryOptions,
    pool: &ThreadPool,
) -> fermiladder_core::Result<EnsembleResult> {
    if n_traj == 0 {
        return Err(fermiladder_core::Error::InvalidParams { field: "n_traj", reason: "must be at least 1".into() });
    }
    params.validate()?;
    let propagator = Propagator::with_geometry(params, options.geometry)?;
    let results = pool.install(|| {
        (0..n_traj)
            .into_par_iter()
            .map(|i| trajectory::run_indexed(params, part, master_seed, i, &propagator, options))
            .collect()
    });
    trajectory::aggregate(params, part, results)
}

/// Runs one cell; failures end up in the row's `error` column.
pub fn run_cell(cfg: &ExperimentConfig, cell: &Cell, pool: &ThreadPool) -> ResultRow {
    let p = &cell.params;
    let seed = cell_seed(cfg.protocol.master_seed, cell);
    let options = TrajectoryOptions { geometry: cfg.geometry(), filling: cfg.filling(), ..Default::default() };
    let start = Instant::now();
    let outcome = Bipartition::new(cell.l_a, p.l)
        .and_then(|part| run_ensemble_parallel(p, part, cfg.protocol.n_traj, seed, options, pool));
    let wall_time_s = start.elapsed().as_secs_f64();
    let (e_mean, e_sem, n_traj, error) = match outcome {
        Ok(e) => (e.mean, e.sem, e.n_traj, String::new()),
        Err(e) => (f64::NAN, f64::NAN, cfg.protocol.n_traj, e.to_string()),
    };
    ResultRow {
        l: p.l,
        t1: p.t1,
        t2: p.t2,
        t12: p.t12,
        tau_u: p.tau_u,
        p1: p.p1,
        p2: p.p2,
        l_a: cell.l_a,
        n_traj,
        master_seed: seed,
        e_mean,
        e_sem,
        n_st: p.n_st,
        m: p.m,
        wall_time_s,
        error,
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub threads: Option<usize>,
    /// Keep the existing table and skip cells it already holds.
    pub resume: bool,
    /// No progress lines on stderr.
    pub quiet: bool,
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub table: PathBuf,
    /// Rows written by this run.
    pub rows: Vec<ResultRow>,
    pub skipped: usize,
}

impl SweepSummary {
    pub fn failed(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_ok()).count()
    }
}

/// Identity of a cell in a table, independent of its outcome.
fn cell_key(r: &ResultRow) -> Vec<String> {
    let mut f = r.fields();
    // L .. master_seed, then N_st and m.
    let tail = [f[12].clone(), f[13].clone()];
    f.truncate(10);
    f.extend(tail);
    f
}

#[derive(Serialize)]
struct CellEntry {
    #[serde(rename = "L")]
    l: usize,
    t2: f64,
    p1: f64,
    p2: f64,
    #[serde(rename = "lA")]
    l_a: usize,
    #[serde(rename = "N_st")]
    n_st: usize,
    master_seed: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_hash: String,
    config: &'a ExperimentConfig,
    config_toml: String,
    master_seed: u64,
    seed_derivation: &'static str,
    cells: Vec<CellEntry>,
    table: &'static str,
    versions: Versions,
}

#[derive(Serialize)]
struct Versions {
    fermiladder: &'static str,
    arch: &'static str,
}

pub fn write_manifest(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let cells = cfg
        .cells()?
        .iter()
        .map(|c| CellEntry {
            l: c.params.l,
            t2: c.params.t2,
            p1: c.params.p1,
            p2: c.params.p2,
            l_a: c.l_a,
            n_st: c.params.n_st,
            master_seed: cell_seed(cfg.protocol.master_seed, c),
        })
        .collect();
    let manifest = Manifest {
        config_hash: cfg.hash(),
        config: cfg,
        config_toml: cfg.to_toml(),
        master_seed: cfg.protocol.master_seed,
        seed_derivation: "cell: derive_seed(master, sha256(cell)[..8]); trajectory i: derive_seed(cell, i); \
                          stream: ChaCha20 keyed by SplitMix64",
        cells,
        table: RESULTS_FILE,
        versions: Versions { fermiladder: env!("CARGO_PKG_VERSION"), arch: std::env::consts::ARCH },
    };
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).with_context(|| format!("writing {}", path.display()))
}

/// Config hash recorded next to a table, if any.
pub fn manifest_hash(dir: &Path) -> Option<String> {
    let text = std::fs::read_to_string(dir.join(MANIFEST_FILE)).ok()?;
    let v: serde_json::Value = serde_json::from_str(&text).ok()?;
    v.get("config_hash")?.as_str().map(str::to_string)
}

/// Runs every cell of the grid into `<output.dir>/results.csv`.
pub fn run_sweep(cfg: &ExperimentConfig, opts: &SweepOptions) -> Result<SweepSummary> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let table = dir.join(RESULTS_FILE);
    let cells = cfg.cells()?;
    let pool = pool(opts.threads)?;

    let (mut writer, done) = if opts.resume {
        let w = TableWriter::resume(&table, &RESULT_HEADER)?;
        let done: HashSet<Vec<String>> =
            read_results(&table)?.iter().filter(|r| r.is_ok()).map(cell_key).collect();
        (w, done)
    } else {
        (TableWriter::create(&table, &RESULT_HEADER)?, HashSet::new())
    };
    write_manifest(cfg, dir)?;

    let mut rows = Vec::new();
    let mut skipped = 0;
    for (i, cell) in cells.iter().enumerate() {
        let probe = ResultRow {
            master_seed: cell_seed(cfg.protocol.master_seed, cell),
            ..placeholder(cfg, cell)
        };
        if done.contains(&cell_key(&probe)) {
            skipped += 1;
            continue;
        }
        let row = run_cell(cfg, cell, &pool);
        writer.append(&row.fields())?;
        if !opts.quiet {
            let status = if row.is_ok() { format!("E = {:.6} +- {:.6}", row.e_mean, row.e_sem) } else { row.error.clone() };
            eprintln!(
                "[{}/{}] L={} t2={} p1={} p2={}: {} ({:.1}s)",
                i + 1,
                cells.len(),
                row.l,
                row.t2,
                row.p1,
                row.p2,
                status,
                row.wall_time_s
            );
        }
        rows.push(row);
    }
    Ok(SweepSummary { table, rows, skipped })
}

fn placeholder(cfg: &ExperimentConfig, cell: &Cell) -> ResultRow {
    let p = &cell.params;
    ResultRow {
        l: p.l,
        t1: p.t1,
        t2: p.t2,
        t12: p.t12,
        tau_u: p.tau_u,
        p1: p.p1,
        p2: p.p2,
        l_a: cell.l_a,
        n_traj: cfg.protocol.n_traj,
        master_seed: 0,
        e_mean: 0.0,
        e_sem: 0.0,
        n_st: p.n_st,
        m: p.m,
        wall_time_s: 0.0,
        error: String::new(),
    }
}
