//! `c_eff` fits, extrapolation, crossing detection and scaling collapse
//! over result tables.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Result};
use fermiladder_core::analysis::{
    self, CeffPoint, CollapseCurve, CollapseOptions, CollapseResult, FitResult, ScalingPoint, ScalingSeries,
};
use serde::{Deserialize, Serialize};

use crate::config::FitSection;
use crate::table::{float, ResultRow, TableWriter};

pub const FITS_FILE: &str = "fits.csv";
pub const EXTRAPOLATION_FILE: &str = "extrapolation.csv";
pub const CROSSINGS_FILE: &str = "crossings.csv";
pub const SUSCEPTIBILITY_FILE: &str = "susceptibility.csv";
pub const COLLAPSE_FILE: &str = "collapse.json";

pub const FIT_HEADER: [&str; 14] =
    ["t1", "t2", "t12", "tau_u", "p1", "p2", "L_max", "window", "sizes", "c_eff", "c_err", "a0", "a_err", "chi2"];
pub const EXTRAPOLATION_HEADER: [&str; 13] =
    ["t1", "t2", "t12", "tau_u", "p1", "p2", "windows", "c0", "c0_err", "c1", "c1_err", "c2", "c2_err"];
pub const CROSSING_HEADER: [&str; 8] = ["t1", "t2", "t12", "tau_u", "p1", "p2_cross", "below", "above"];
pub const SUSCEPTIBILITY_HEADER: [&str; 9] = ["t1", "t2", "t12", "tau_u", "p1", "L", "p2", "chi2", "chi2_err"];

/// Couplings and ancilla rate shared by the points of one scaling series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub t1: f64,
    pub t2: f64,
    pub t12: f64,
    pub tau_u: f64,
    pub p1: f64,
}

impl Family {
    fn key(&self) -> [i64; 5] {
        [self.t1, self.t2, self.t12, self.tau_u, self.p1].map(sort_key)
    }

    fn fields(&self) -> [String; 5] {
        [self.t1, self.t2, self.t12, self.tau_u, self.p1].map(float)
    }
}

/// Ordering key that sorts finite floats numerically.
fn sort_key(x: f64) -> i64 {
    let b = x.to_bits() as i64;
    b ^ (((b >> 63) as u64) >> 1) as i64
}

/// Series of successful rows, grouped by family and then by `p2`, both
/// ascending.
pub fn scaling_series(rows: &[ResultRow]) -> Result<Vec<(Family, Vec<(f64, ScalingSeries)>)>> {
    let mut groups: BTreeMap<[i64; 5], (Family, BTreeMap<i64, (f64, Vec<ScalingPoint>)>)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.is_ok()) {
        let fam = Family { t1: r.t1, t2: r.t2, t12: r.t12, tau_u: r.tau_u, p1: r.p1 };
        let entry = groups.entry(fam.key()).or_insert_with(|| (fam, BTreeMap::new()));
        entry.1.entry(sort_key(r.p2)).or_insert_with(|| (r.p2, Vec::new())).1.push(ScalingPoint {
            l: r.l,
            mean: r.e_mean,
            sem: r.e_sem,
        });
    }
    groups
        .into_values()
        .map(|(fam, by_p2)| {
            let series = by_p2
                .into_values()
                .map(|(p2, pts)| Ok((p2, ScalingSeries::new(pts)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok((fam, series))
        })
        .collect()
}

/// Windows selected by the fit section for a series with these sizes.
pub fn windows_for(fit: &FitSection, sizes: &[usize]) -> Vec<Vec<usize>> {
    if let Some(w) = &fit.windows {
        return w.clone();
    }
    if let Some(width) = fit.moving_width {
        return analysis::moving_windows(sizes, width);
    }
    analysis::registered_windows().iter().map(|w| w.to_vec()).collect()
}

#[derive(Debug, Clone)]
pub struct SeriesFits {
    pub family: Family,
    pub p2: f64,
    pub fits: Vec<FitResult>,
    pub extrapolation: Option<analysis::Extrapolation>,
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub series: Vec<SeriesFits>,
    pub crossings: Vec<(Family, Option<analysis::Crossing>)>,
    /// `dE/dp2` per family and size, on grids with at least three
    /// uniformly spaced `p2` values.
    pub susceptibility: Vec<(Family, usize, Vec<(f64, analysis::Derivative)>)>,
}

fn susceptibilities(rows: &[ResultRow]) -> Result<Vec<(Family, usize, Vec<(f64, analysis::Derivative)>)>> {
    // (p2, mean, sem) per family and size, p2 ascending.
    let mut by_size: BTreeMap<([i64; 5], usize), (Family, Vec<(f64, f64, f64)>)> = BTreeMap::new();
    for (family, by_p2) in scaling_series(rows)? {
        for (p2, s) in by_p2 {
            for pt in s.points() {
                let entry = by_size.entry((family.key(), pt.l)).or_insert_with(|| (family, Vec::new()));
                entry.1.push((p2, pt.mean, pt.sem));
            }
        }
    }
    let mut out = Vec::new();
    for ((_, l), (family, pts)) in by_size {
        let grid: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let mean: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let sem: Vec<f64> = pts.iter().map(|p| p.2).collect();
        if let Ok(d) = analysis::susceptibility(&grid, &mean, &sem) {
            out.push((family, l, grid.into_iter().zip(d).collect()));
        }
    }
    Ok(out)
}

/// Fits every series, extrapolates when at least three windows fitted, and
/// looks for a crossing along `p2` in every family.
pub fn fit_rows(rows: &[ResultRow], fit: &FitSection) -> Result<FitOutput> {
    let mut series = Vec::new();
    let mut crossings = Vec::new();
    for (family, by_p2) in scaling_series(rows)? {
        let mut grid = Vec::new();
        let mut curves = Vec::new();
        for (p2, s) in by_p2 {
            let windows = windows_for(fit, &s.sizes());
            let refs: Vec<&[usize]> = windows.iter().map(Vec::as_slice).collect();
            let fits = analysis::fit_windows(&s, &refs);
            let points: Vec<CeffPoint> = fits.iter().map(CeffPoint::from).collect();
            let extrapolation = analysis::extrapolate_ceff(&points).ok();
            if points.len() >= 2 {
                grid.push(p2);
                curves.push(points);
            }
            series.push(SeriesFits { family, p2, fits, extrapolation });
        }
        if grid.len() >= 2 {
            crossings.push((family, analysis::detect_crossing(&grid, &curves)?));
        }
    }
    Ok(FitOutput { series, crossings, susceptibility: susceptibilities(rows)? })
}

fn join(sizes: &[usize]) -> String {
    sizes.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

/// Writes `fits.csv`, `extrapolation.csv`, `crossings.csv` and
/// `susceptibility.csv` into `dir`.
pub fn write_fit_output(out: &FitOutput, dir: &Path) -> Result<()> {
    let mut fits = TableWriter::create(&dir.join(FITS_FILE), &FIT_HEADER)?;
    let mut extra = TableWriter::create(&dir.join(EXTRAPOLATION_FILE), &EXTRAPOLATION_HEADER)?;
    for s in &out.series {
        for f in &s.fits {
            let mut row: Vec<String> = s.family.fields().into();
            row.extend([
                float(s.p2),
                f.l_max().to_string(),
                join(&f.window),
                join(&f.sizes),
                float(f.c_eff),
                float(f.c_err),
                float(f.a0),
                float(f.a_err),
                float(f.chi2),
            ]);
            fits.append(&row)?;
        }
        if let Some(e) = &s.extrapolation {
            let mut row: Vec<String> = s.family.fields().into();
            row.extend([float(s.p2), s.fits.len().to_string()]);
            for k in 0..3 {
                row.extend([float(e.c[k]), float(e.err[k])]);
            }
            extra.append(&row)?;
        }
    }
    let mut cross = TableWriter::create(&dir.join(CROSSINGS_FILE), &CROSSING_HEADER)?;
    for (family, c) in &out.crossings {
        let mut row: Vec<String> = family.fields().into();
        match c {
            Some(c) => row.extend([float(c.p), float(c.below), float(c.above)]),
            None => row.extend([String::new(), String::new(), String::new()]),
        }
        cross.append(&row)?;
    }
    let mut chi = TableWriter::create(&dir.join(SUSCEPTIBILITY_FILE), &SUSCEPTIBILITY_HEADER)?;
    for (family, l, points) in &out.susceptibility {
        for (p2, d) in points {
            let mut row: Vec<String> = family.fields().into();
            row.extend([l.to_string(), float(*p2), float(d.value), float(d.err)]);
            chi.append(&row)?;
        }
    }
    Ok(())
}

/// A row of `fits.csv`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct FitRow {
    pub t1: f64,
    pub t2: f64,
    pub t12: f64,
    pub tau_u: f64,
    pub p1: f64,
    pub p2: f64,
    #[serde(rename = "L_max")]
    pub l_max: usize,
    pub window: String,
    pub sizes: String,
    pub c_eff: f64,
    pub c_err: f64,
    pub a0: f64,
    pub a_err: f64,
    pub chi2: f64,
}

impl FitRow {
    pub fn family(&self) -> Family {
        Family { t1: self.t1, t2: self.t2, t12: self.t12, tau_u: self.tau_u, p1: self.p1 }
    }
}

pub fn read_fits(path: &Path) -> Result<Vec<FitRow>> {
    crate::table::read_rows(path, &FIT_HEADER)
}

/// `c_eff(p2)` curves per window label, per family.
pub fn collapse_curves(fits: &[FitRow]) -> Vec<(Family, Vec<CollapseCurve>)> {
    let mut groups: BTreeMap<[i64; 5], (Family, BTreeMap<usize, Vec<(f64, f64, f64)>>)> = BTreeMap::new();
    for f in fits {
        let fam = f.family();
        let entry = groups.entry(fam.key()).or_insert_with(|| (fam, BTreeMap::new()));
        entry.1.entry(f.l_max).or_default().push((f.p2, f.c_eff, f.c_err));
    }
    groups
        .into_values()
        .map(|(fam, by_l)| {
            let curves = by_l.into_iter().map(|(l, points)| CollapseCurve { l: l as f64, points }).collect();
            (fam, curves)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollapseEntry {
    pub family: Family,
    pub sizes: Vec<f64>,
    pub p2c: f64,
    pub p2c_err: f64,
    pub nu: f64,
    pub nu_err: f64,
    pub zeta: f64,
    pub zeta_err: f64,
    pub quality: f64,
    pub pairs: usize,
    pub fixed_zeta: Option<f64>,
}

impl CollapseEntry {
    fn new(family: Family, curves: &[CollapseCurve], r: &CollapseResult, options: &CollapseOptions) -> Self {
        CollapseEntry {
            family,
            sizes: curves.iter().map(|c| c.l).collect(),
            p2c: r.p2c,
            p2c_err: r.p2c_err,
            nu: r.nu,
            nu_err: r.nu_err,
            zeta: r.zeta,
            zeta_err: r.zeta_err,
            quality: r.quality,
            pairs: r.pairs,
            fixed_zeta: options.fixed_zeta,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CollapseReport {
    pub source_hash: String,
    pub results: Vec<CollapseEntry>,
    /// Families that could not be collapsed, with the reason.
    pub skipped: Vec<(Family, String)>,
}

pub fn collapse_fits(fits: &[FitRow], options: CollapseOptions, source_hash: String) -> Result<CollapseReport> {
    if fits.is_empty() {
        bail!("no fits to collapse");
    }
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for (family, curves) in collapse_curves(fits) {
        match analysis::fss_collapse(&curves, options) {
            Ok(r) => results.push(CollapseEntry::new(family, &curves, &r, &options)),
            Err(e) => skipped.push((family, e.to_string())),
        }
    }
    Ok(CollapseReport { source_hash, results, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(l: usize, p2: f64, e: f64) -> ResultRow {
        ResultRow {
            l,
            t1: 1.0,
            t2: 1.0,
            t12: 1.5,
            tau_u: 1.0,
            p1: 0.2,
            p2,
            l_a: l / 2,
            n_traj: 10,
            master_seed: 1,
            e_mean: e,
            e_sem: 0.01,
            n_st: 10,
            m: 5,
            wall_time_s: 0.0,
            error: String::new(),
        }
    }

    #[test]
    fn sort_key_orders_floats() {
        let v = [-2.0, -0.5, 0.0, 0.1, 3.0];
        assert!(v.windows(2).all(|w| sort_key(w[0]) < sort_key(w[1])));
    }

    #[test]
    fn failed_rows_are_left_out() {
        let mut rows: Vec<ResultRow> = [8, 16, 24].iter().map(|&l| row(l, 0.1, (l as f64).ln())).collect();
        rows.push(ResultRow { error: "x".into(), ..row(32, 0.1, f64::NAN) });
        let s = scaling_series(&rows).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].1[0].1.sizes(), vec![8, 16, 24]);
    }

    #[test]
    fn moving_windows_follow_the_simulated_sizes() {
        let fit = FitSection { moving_width: Some(3), ..Default::default() };
        let rows: Vec<ResultRow> = [8, 16, 24, 32].iter().map(|&l| row(l, 0.1, 0.5 * (l as f64).ln())).collect();
        let out = fit_rows(&rows, &fit).unwrap();
        let ls: Vec<usize> = out.series[0].fits.iter().map(FitResult::l_max).collect();
        assert_eq!(ls, vec![24, 32]);
        assert!(out.series[0].fits.iter().all(|f| (f.c_eff - 2.0).abs() < 1e-10));
    }
}
