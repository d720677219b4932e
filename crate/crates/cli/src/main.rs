use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fermiladder::config::{sha256_hex, ExperimentConfig};
use fermiladder::pipeline::{self, COLLAPSE_FILE, FITS_FILE};
use fermiladder::plot::{self, Kind};
use fermiladder::sweep::{self, SweepOptions, RESULTS_FILE};
use fermiladder::table;
use fermiladder_core::trajectory::TrajectoryOptions;
use fermiladder_core::Bipartition;

#[derive(Parser)]
#[command(name = "fermiladder", version, about = "Monitored free-fermion ladder simulations and analysis")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set grid.p2=[0.1,0.5]`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Master seed (protocol.master_seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one ensemble and print its mean negativity.
    Simulate,
    /// Run the grid into results.csv.
    Sweep {
        /// Keep the existing table and skip completed cells.
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        quiet: bool,
    },
    /// Fit c_eff over windows, extrapolate in 1/L, locate crossings.
    Fit {
        /// Result table; <out>/results.csv by default.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Finite-size-scaling collapse of the fitted c_eff curves.
    Collapse {
        /// Fit table; <out>/fits.csv by default.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Write SVG figures.
    Plot {
        /// heatmap, scaling, ceff, collapse or all.
        #[arg(long, default_value = "all")]
        kind: String,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut overrides = common.overrides.clone();
    if let Some(s) = common.seed {
        overrides.push(format!("protocol.master_seed={s}"));
    }
    if let Some(o) = &common.out {
        overrides.push(format!("output.dir={}", toml::Value::String(o.display().to_string())));
    }
    ExperimentConfig::load(common.config.as_deref(), &overrides)
}

/// The manifest's config hash next to `table`, else the digest of the table.
fn provenance(dir: &Path, table: &Path) -> Result<String> {
    if let Some(h) = sweep::manifest_hash(dir) {
        return Ok(h);
    }
    let bytes = std::fs::read(table).with_context(|| format!("reading {}", table.display()))?;
    Ok(format!("table-sha256:{}", sha256_hex(&bytes)))
}

fn simulate(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<()> {
    let cells = cfg.cells()?;
    let [cell] = cells.as_slice() else {
        bail!("simulate runs a single grid cell; the grid has {} (narrow it with --set grid.<key>=<value>)", cells.len());
    };
    let pool = sweep::pool(threads)?;
    let seed = sweep::cell_seed(cfg.protocol.master_seed, cell);
    let options = TrajectoryOptions { geometry: cfg.geometry(), filling: cfg.filling(), ..Default::default() };
    let part = Bipartition::new(cell.l_a, cell.params.l)?;
    let e = sweep::run_ensemble_parallel(&cell.params, part, cfg.protocol.n_traj, seed, options, &pool)?;
    let p = &cell.params;
    println!(
        "L={} t1={} t2={} t12={} tau_u={} p1={} p2={} lA={} N_st={} m={} n_traj={} seed={}",
        p.l, p.t1, p.t2, p.t12, p.tau_u, p.p1, p.p2, cell.l_a, p.n_st, p.m, e.n_traj, seed
    );
    println!("E_mean = {:.10} +- {:.10}", e.mean, e.sem);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load(&cli.common)?;
    let dir = cfg.output.dir.clone();
    match cli.command {
        Command::Simulate => simulate(&cfg, cli.common.threads)?,
        Command::Sweep { resume, quiet } => {
            let s = sweep::run_sweep(&cfg, &SweepOptions { threads: cli.common.threads, resume, quiet })?;
            println!("{}: {} rows written, {} skipped, {} failed", s.table.display(), s.rows.len(), s.skipped, s.failed());
        }
        Command::Fit { input } => {
            let input = input.unwrap_or_else(|| dir.join(RESULTS_FILE));
            let rows = table::read_results(&input)?;
            std::fs::create_dir_all(&dir)?;
            let out = pipeline::fit_rows(&rows, &cfg.fit)?;
            pipeline::write_fit_output(&out, &dir)?;
            for s in &out.series {
                for f in &s.fits {
                    println!("t2={} p1={} p2={} L<={}: c_eff = {:.6} +- {:.6}", s.family.t2, s.family.p1, s.p2, f.l_max(), f.c_eff, f.c_err);
                }
                if let Some(e) = &s.extrapolation {
                    println!("t2={} p1={} p2={}: c0 = {:.6} +- {:.6}", s.family.t2, s.family.p1, s.p2, e.c[0], e.err[0]);
                }
            }
            for (fam, c) in &out.crossings {
                match c {
                    Some(c) => println!("t2={} p1={}: crossing at p2 = {:.4} in [{}, {}]", fam.t2, fam.p1, c.p, c.below, c.above),
                    None => println!("t2={} p1={}: no crossing", fam.t2, fam.p1),
                }
            }
        }
        Command::Collapse { input } => {
            let input = input.unwrap_or_else(|| dir.join(FITS_FILE));
            let fits = pipeline::read_fits(&input)?;
            let hash = provenance(&dir, &input)?;
            let report = pipeline::collapse_fits(&fits, cfg.collapse.options(), hash)?;
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join(COLLAPSE_FILE), serde_json::to_string_pretty(&report)?)?;
            for r in &report.results {
                println!(
                    "t2={} p1={}: p2c = {:.4} +- {:.4}, nu = {:.3} +- {:.3}, zeta = {:.4} +- {:.4}, cost {:.4}",
                    r.family.t2, r.family.p1, r.p2c, r.p2c_err, r.nu, r.nu_err, r.zeta, r.zeta_err, r.quality
                );
            }
            for (fam, why) in &report.skipped {
                println!("t2={} p1={}: skipped ({why})", fam.t2, fam.p1);
            }
        }
        Command::Plot { kind } => {
            let kinds: Vec<Kind> = if kind == "all" {
                vec![Kind::Heatmap, Kind::Scaling, Kind::Ceff, Kind::Collapse]
            } else {
                vec![kind.parse()?]
            };
            let mut written = Vec::new();
            for k in kinds {
                written.extend(plot_kind(k, &cfg, &dir, kind != "all")?);
            }
            for p in written {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

/// With `strict`, a missing input is an error; otherwise the kind is skipped.
fn plot_kind(kind: Kind, cfg: &ExperimentConfig, dir: &Path, strict: bool) -> Result<Vec<PathBuf>> {
    let input = match kind {
        Kind::Heatmap | Kind::Scaling => dir.join(RESULTS_FILE),
        Kind::Ceff | Kind::Collapse => dir.join(FITS_FILE),
    };
    if !input.exists() && !strict {
        return Ok(Vec::new());
    }
    let hash = provenance(dir, &input)?;
    match kind {
        Kind::Heatmap => plot::heatmaps(&table::read_results(&input)?, cfg.plot.contour, dir, &hash),
        Kind::Scaling => plot::scaling(&table::read_results(&input)?, dir, &hash),
        Kind::Ceff => plot::ceff(&pipeline::read_fits(&input)?, dir, &hash),
        Kind::Collapse => {
            let fits = pipeline::read_fits(&input)?;
            let path = dir.join(COLLAPSE_FILE);
            if !path.exists() && !strict {
                return Ok(Vec::new());
            }
            let report: serde_json::Value = serde_json::from_str(
                &std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?,
            )?;
            let results: Vec<pipeline::CollapseEntry> = serde_json::from_value(report["results"].clone()).context("collapse.json: results")?;
            plot::collapse(&fits, &results, dir, &hash)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
