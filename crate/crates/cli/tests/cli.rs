use std::path::Path;
use std::process::{Command, Output};

use fermiladder::pipeline::{read_fits, CollapseEntry, FitRow};
use fermiladder::sweep::{self, SweepOptions};
use fermiladder::table::{read_results, ResultRow, TableWriter, RESULT_HEADER};
use fermiladder::{plot, ExperimentConfig};
use fermiladder_core::trajectory;
use fermiladder_core::{Bipartition, ModelParams};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fermiladder")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/synthetic_results.csv"))
}

fn small_config(dir: &Path, extra: &[&str]) -> ExperimentConfig {
    let mut o: Vec<String> = vec![
        format!("output.dir={:?}", dir.display().to_string()),
        "protocol.n_traj=4".into(),
        "protocol.N_st=20".into(),
        "grid.L=6".into(),
    ];
    o.extend(extra.iter().map(|s| s.to_string()));
    ExperimentConfig::load(None, &o).unwrap()
}

#[test]
fn simulate_prints_the_mean() {
    let o = bin(&["simulate", "--set", "protocol.n_traj=16", "--threads", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("L=8") && out.contains("E_mean = "), "{out}");
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[protocol]\nn_trajectories = 5\n").unwrap();
    let o = bin(&["simulate", "--config", path.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("n_trajectories"), "{}", stderr(&o));

    let o = bin(&["simulate", "--set", "grid.p1=2.0"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("grid.p1"), "{}", stderr(&o));
}

#[test]
fn simulate_rejects_a_multi_cell_grid() {
    let o = bin(&["simulate", "--set", "grid.p2=[0.1,0.2]"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("single grid cell"));
}

#[test]
fn fit_reproduces_the_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["fit", "--input", fixture().to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fits: Vec<FitRow> = read_fits(&dir.path().join("fits.csv")).unwrap();
    assert_eq!(fits.len(), 10);
    for f in &fits {
        let expected = if f.p2 < 0.5 { 2.0 } else { 1.0 };
        assert!((f.c_eff - expected).abs() < 1e-12, "{f:?}");
    }
    let extra = std::fs::read_to_string(dir.path().join("extrapolation.csv")).unwrap();
    assert_eq!(extra.lines().count(), 3);
}

#[test]
fn one_cell_sweep_matches_a_direct_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), &["grid.p2=0.4"]);
    let s = sweep::run_sweep(&cfg, &SweepOptions { quiet: true, ..Default::default() }).unwrap();
    let rows = read_results(&s.table).unwrap();
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    let p = ModelParams { l: 6, p1: 0.2, p2: 0.4, n_st: 20, ..ModelParams::default() };
    let direct = trajectory::run_ensemble(&p, Bipartition::half(6).unwrap(), 4, r.master_seed).unwrap();
    assert_eq!(r.e_mean.to_bits(), direct.mean.to_bits());
    assert_eq!(r.e_sem.to_bits(), direct.sem.to_bits());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn reruns_and_resumes_give_the_same_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), &["grid.p2=[0.0, 0.5, 1.0]", "grid.p1=[0.3, 0.6]"]);
    let quiet = SweepOptions { quiet: true, ..Default::default() };
    let first = sweep::run_sweep(&cfg, &quiet).unwrap();
    let a = read_results(&first.table).unwrap();
    assert_eq!(a.len(), 6);

    let second = sweep::run_sweep(&cfg, &SweepOptions { threads: Some(3), ..quiet.clone() }).unwrap();
    let b = read_results(&second.table).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.same_result(y)));

    // An interrupted run: two whole rows and a torn third.
    let text = std::fs::read_to_string(&first.table).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let torn = format!("{}\n{}\n{}\n{}", lines[0], lines[1], lines[2], &lines[3][..20]);
    std::fs::write(&first.table, torn).unwrap();
    let resumed = sweep::run_sweep(&cfg, &SweepOptions { resume: true, ..quiet }).unwrap();
    assert_eq!(resumed.skipped, 2);
    let c = read_results(&resumed.table).unwrap();
    assert_eq!(c.len(), 6);
    assert!(a.iter().zip(&c).all(|(x, y)| x.same_result(y)));
}

#[test]
fn figures_render_for_empty_and_single_row_tables() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let files = plot::heatmaps(&[], 2.5, &empty, "h0").unwrap();
    let svg = std::fs::read_to_string(&files[0]).unwrap();
    assert!(svg.contains("config-hash: h0") && svg.contains("p1") && svg.contains("p2"));
    plot::scaling(&[], &empty, "h0").unwrap();
    plot::ceff(&[], &empty, "h0").unwrap();
    plot::collapse(&[], &[], &empty, "h0").unwrap();

    let one = dir.path().join("one");
    std::fs::create_dir_all(&one).unwrap();
    let cfg = small_config(&one, &["protocol.n_traj=2"]);
    sweep::run_sweep(&cfg, &SweepOptions { quiet: true, ..Default::default() }).unwrap();
    let o = bin(&["plot", "--out", one.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let hash = cfg.hash();
    for name in ["heatmap_L6_t2_1.svg", "scaling_t2_1_p1_0.2.svg"] {
        let svg = std::fs::read_to_string(one.join(name)).unwrap();
        assert!(svg.contains(&format!("config-hash: {hash}")), "{name}");
        assert!(svg.contains("<circle"), "{name} has no marker");
    }
}

#[test]
fn fit_collapse_plot_pipeline_on_synthetic_tables() {
    // c_eff(p2, L) = f(L^(1/2) (p2 - 0.3)) with f linear, written as an
    // already fitted table.
    let dir = tempfile::tempdir().unwrap();
    let mut w = TableWriter::create(&dir.path().join("fits.csv"), &fermiladder::pipeline::FIT_HEADER).unwrap();
    for l in [16usize, 32, 64, 128] {
        for i in 0..=20 {
            let p2 = i as f64 * 0.05;
            let c = 1.0 - 0.3 * (l as f64).sqrt() * (p2 - 0.3);
            let f = |x: f64| format!("{x:.16e}");
            w.append(&[f(1.0), f(1.0), f(1.5), f(1.0), f(0.2), f(p2), l.to_string(), "".into(), "".into(), f(c), f(0.01), f(0.0), f(0.0), f(0.0)])
                .unwrap();
        }
    }
    drop(w);
    let o = bin(&["collapse", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("collapse.json")).unwrap()).unwrap();
    let results: Vec<CollapseEntry> = serde_json::from_value(report["results"].clone()).unwrap();
    assert_eq!(results.len(), 1);
    assert!((results[0].p2c - 0.3).abs() < 1e-3 && (results[0].nu - 2.0).abs() < 1e-3, "{:?}", results[0]);

    let o = bin(&["plot", "--kind", "collapse", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("collapse_t2_1_p1_0.2.svg").exists());
}

#[test]
fn failed_cells_keep_the_sweep_going() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let mut w = TableWriter::create(&path, &RESULT_HEADER).unwrap();
    let cfg = small_config(dir.path(), &[]);
    let cell = cfg.cells().unwrap()[0];
    let pool = sweep::pool(Some(1)).unwrap();
    // lA = L is not a valid bipartition; the row records the error.
    let bad = fermiladder::config::Cell { l_a: 6, ..cell };
    let row: ResultRow = sweep::run_cell(&cfg, &bad, &pool);
    assert!(!row.is_ok() && row.e_mean.is_nan());
    w.append(&row.fields()).unwrap();
    let back = read_results(&path).unwrap();
    assert!(back[0].error.contains("bipartition"));
}
