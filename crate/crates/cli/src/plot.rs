//! SVG figures: negativity heatmaps over `(p1, p2)` with a contour line,
//! negativity against `L` on a log axis, `c_eff` against `p2` per window
//! and collapsed `c_eff` curves.
//!
//! Every figure carries the hash of the configuration (or the input table)
//! that produced it, both in a `<metadata>` element and in a footer line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Result};
use plotters::prelude::*;
use plotters::style::colors::colormaps::ViridisRGB;

use crate::pipeline::{CollapseEntry, FitRow};
use crate::table::ResultRow;

const WIDTH: u32 = 800;
const HEIGHT: u32 = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Heatmap,
    Scaling,
    Ceff,
    Collapse,
}

impl std::str::FromStr for Kind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "heatmap" => Kind::Heatmap,
            "scaling" => Kind::Scaling,
            "ceff" => Kind::Ceff,
            "collapse" => Kind::Collapse,
            _ => bail!("unknown figure kind `{s}` (heatmap, scaling, ceff, collapse)"),
        })
    }
}

type DrawResult<T> = Result<T, Box<dyn std::error::Error>>;

fn draw_err(e: Box<dyn std::error::Error>) -> anyhow::Error {
    anyhow!("drawing failed: {e}")
}

/// Places provenance into a rendered SVG document.
fn embed_hash(svg: String, hash: &str) -> String {
    let tag = format!("<metadata>config-hash: {hash}</metadata>");
    match svg.find("<svg").and_then(|i| svg[i..].find('>').map(|j| i + j + 1)) {
        Some(at) => format!("{}\n{}{}", &svg[..at], tag, &svg[at..]),
        None => svg,
    }
}

fn render(path: &Path, hash: &str, draw: impl FnOnce(&DrawingArea<SVGBackend, plotters::coord::Shift>) -> DrawResult<()>) -> Result<PathBuf> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (WIDTH, HEIGHT)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| draw_err(Box::new(e)))?;
        let (body, footer) = root.split_vertically(HEIGHT - 20);
        draw(&body).map_err(draw_err)?;
        let short: String = hash.chars().take(16).collect();
        footer
            .draw_text(&format!("config {short}"), &("sans-serif", 12).into_font().color(&BLACK.mix(0.6)), (10, 2))
            .map_err(|e| draw_err(Box::new(e)))?;
        root.present().map_err(|e| draw_err(Box::new(e)))?;
    }
    std::fs::write(path, embed_hash(svg, hash))?;
    Ok(path.to_path_buf())
}

/// Axis range covering `values` with some padding; `(0, 1)` when empty.
fn span(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5f64.max(0.05 * lo.abs()) };
    (lo - pad, hi + pad)
}

fn palette(i: usize) -> RGBColor {
    let c = Palette99::pick(i).to_rgba();
    RGBColor(c.0, c.1, c.2)
}

fn tag(x: f64) -> String {
    format!("{x}").replace('-', "m")
}

/// Segments of the `level` contour of `z[i][j]` sampled at `(xs[i], ys[j])`
/// by marching squares; squares with a non-finite corner are skipped.
pub fn contour_segments(xs: &[f64], ys: &[f64], z: &[Vec<f64>], level: f64) -> Vec<[(f64, f64); 2]> {
    let mut out = Vec::new();
    for i in 0..xs.len().saturating_sub(1) {
        for j in 0..ys.len().saturating_sub(1) {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let v: Vec<f64> = corners.iter().map(|&(a, b)| z[a][b]).collect();
            if v.iter().any(|x| !x.is_finite()) {
                continue;
            }
            let above: Vec<bool> = v.iter().map(|&x| x >= level).collect();
            let cross = |e: usize| -> Option<(f64, f64)> {
                let (a, b) = (e, (e + 1) % 4);
                if above[a] == above[b] {
                    return None;
                }
                let t = (level - v[a]) / (v[b] - v[a]);
                let (pa, pb) = (corners[a], corners[b]);
                let (xa, ya) = (xs[pa.0], ys[pa.1]);
                let (xb, yb) = (xs[pb.0], ys[pb.1]);
                Some((xa + t * (xb - xa), ya + t * (yb - ya)))
            };
            let e: Vec<Option<(f64, f64)>> = (0..4).map(cross).collect();
            let hits: Vec<(f64, f64)> = e.iter().flatten().copied().collect();
            match hits.len() {
                2 => out.push([hits[0], hits[1]]),
                4 => {
                    let center = v.iter().sum::<f64>() / 4.0 >= level;
                    let [e0, e1, e2, e3] = [e[0].unwrap(), e[1].unwrap(), e[2].unwrap(), e[3].unwrap()];
                    if center == above[0] {
                        out.push([e0, e1]);
                        out.push([e2, e3]);
                    } else {
                        out.push([e3, e0]);
                        out.push([e1, e2]);
                    }
                }
                _ => {}
            }
        }
    }
    out
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Groups rows by `key`, keeping first-seen order of the groups.
fn group_by<T: Clone, K: PartialEq>(items: &[T], key: impl Fn(&T) -> K) -> Vec<(K, Vec<T>)> {
    let mut groups: Vec<(K, Vec<T>)> = Vec::new();
    for it in items {
        let k = key(it);
        match groups.iter_mut().find(|(g, _)| *g == k) {
            Some((_, v)) => v.push(it.clone()),
            None => groups.push((k, vec![it.clone()])),
        }
    }
    groups
}

/// One heatmap of `E_mean` over `(p1, p2)` per `(L, t2)`.
pub fn heatmaps(rows: &[ResultRow], level: f64, dir: &Path, hash: &str) -> Result<Vec<PathBuf>> {
    let ok: Vec<ResultRow> = rows.iter().filter(|r| r.is_ok()).cloned().collect();
    if ok.is_empty() {
        return Ok(vec![heatmap(&[], level, &dir.join("heatmap.svg"), hash, "heatmap (no data)")?]);
    }
    let groups = group_by(&ok, |r| (r.l, r.t2.to_bits(), r.t1.to_bits(), r.t12.to_bits(), r.tau_u.to_bits()));
    groups
        .iter()
        .map(|(_, g)| {
            let r = &g[0];
            let name = format!("heatmap_L{}_t2_{}.svg", r.l, tag(r.t2));
            heatmap(g, level, &dir.join(name), hash, &format!("E over (p1, p2), L = {}, t2 = {}", r.l, r.t2))
        })
        .collect()
}

fn heatmap(rows: &[ResultRow], level: f64, path: &Path, hash: &str, title: &str) -> Result<PathBuf> {
    let xs = sorted_unique(rows.iter().map(|r| r.p1).collect());
    let ys = sorted_unique(rows.iter().map(|r| r.p2).collect());
    let mut z = vec![vec![f64::NAN; ys.len()]; xs.len()];
    for r in rows {
        let i = xs.iter().position(|&x| x == r.p1).expect("p1 on the grid");
        let j = ys.iter().position(|&y| y == r.p2).expect("p2 on the grid");
        z[i][j] = r.e_mean;
    }
    let half = |v: &[f64], k: usize| -> (f64, f64) {
        let d = if v.len() > 1 { v[1] - v[0] } else { 0.1 };
        let lo = if k > 0 { 0.5 * (v[k] - v[k - 1]) } else { 0.5 * d };
        let hi = if k + 1 < v.len() { 0.5 * (v[k + 1] - v[k]) } else { 0.5 * d };
        (v[k] - lo, v[k] + hi)
    };
    let (zlo, zhi) = span(rows.iter().map(|r| r.e_mean));
    let x_range = if xs.is_empty() { (0.0, 1.0) } else { (half(&xs, 0).0, half(&xs, xs.len() - 1).1) };
    let y_range = if ys.is_empty() { (0.0, 1.0) } else { (half(&ys, 0).0, half(&ys, ys.len() - 1).1) };
    let segments = contour_segments(&xs, &ys, &z, level);

    render(path, hash, |area| {
        let (main, bar) = area.split_horizontally(WIDTH - 100);
        let mut chart = ChartBuilder::on(&main)
            .caption(title, ("sans-serif", 20))
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(50)
            .build_cartesian_2d(x_range.0..x_range.1, y_range.0..y_range.1)?;
        chart.configure_mesh().disable_mesh().x_desc("p1").y_desc("p2").draw()?;
        let colour = |v: f64| ViridisRGB.get_color_normalized(v, zlo, zhi);
        for (i, _) in xs.iter().enumerate() {
            for (j, _) in ys.iter().enumerate() {
                if !z[i][j].is_finite() {
                    continue;
                }
                let (x0, x1) = half(&xs, i);
                let (y0, y1) = half(&ys, j);
                chart.draw_series(std::iter::once(Rectangle::new([(x0, y0), (x1, y1)], colour(z[i][j]).filled())))?;
            }
        }
        if xs.len() * ys.len() == 1 {
            chart.draw_series(std::iter::once(Circle::new((xs[0], ys[0]), 5, BLACK.filled())))?;
        }
        for s in &segments {
            chart.draw_series(std::iter::once(PathElement::new(vec![s[0], s[1]], RED.stroke_width(2))))?;
        }

        let mut legend = ChartBuilder::on(&bar)
            .margin_top(40)
            .margin_bottom(40)
            .margin_right(10)
            .y_label_area_size(45)
            .build_cartesian_2d(0.0..1.0, zlo..zhi)?;
        legend.configure_mesh().disable_mesh().disable_x_axis().y_desc("E").draw()?;
        let steps = 64;
        legend.draw_series((0..steps).map(|k| {
            let a = zlo + (zhi - zlo) * k as f64 / steps as f64;
            let b = zlo + (zhi - zlo) * (k + 1) as f64 / steps as f64;
            Rectangle::new([(0.0, a), (1.0, b)], colour(0.5 * (a + b)).filled())
        }))?;
        if (zlo..=zhi).contains(&level) {
            legend.draw_series(std::iter::once(PathElement::new(vec![(0.0, level), (1.0, level)], RED.stroke_width(2))))?;
        }
        Ok(())
    })
}

struct Series {
    label: String,
    points: Vec<(f64, f64, f64)>,
}

/// Markers with error bars joined by lines.
fn line_chart(path: &Path, hash: &str, title: &str, x_desc: &str, y_desc: &str, log_x: bool, series: &[Series]) -> Result<PathBuf> {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = if log_x {
        let (lo, hi) = all().filter(|p| p.0 > 0.0).fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.0), b.max(p.0)));
        if lo.is_finite() { (lo / 1.2, hi * 1.2) } else { (1.0, 10.0) }
    } else {
        span(all().map(|p| p.0))
    };
    let (y0, y1) = span(all().flat_map(|p| [p.1 - p.2, p.1 + p.2]));
    render(path, hash, |area| {
        let mut builder = ChartBuilder::on(area);
        builder.caption(title, ("sans-serif", 20)).margin(15).x_label_area_size(40).y_label_area_size(60);
        if log_x {
            let mut chart = builder.build_cartesian_2d((x0..x1).log_scale(), y0..y1)?;
            chart.configure_mesh().x_desc(x_desc).y_desc(y_desc).draw()?;
            draw_series_on(&mut chart, series)?;
            if !series.is_empty() {
                chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
            }
        } else {
            let mut chart = builder.build_cartesian_2d(x0..x1, y0..y1)?;
            chart.configure_mesh().x_desc(x_desc).y_desc(y_desc).draw()?;
            draw_series_on(&mut chart, series)?;
            if !series.is_empty() {
                chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
            }
        }
        Ok(())
    })
}

fn draw_series_on<'a, X>(
    chart: &mut ChartContext<'a, SVGBackend<'a>, Cartesian2d<X, plotters::coord::types::RangedCoordf64>>,
    series: &[Series],
) -> DrawResult<()>
where
    X: Ranged<ValueType = f64>,
{
    for (k, s) in series.iter().enumerate() {
        let c = palette(k);
        let mut pts = s.points.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        chart
            .draw_series(LineSeries::new(pts.iter().map(|p| (p.0, p.1)), c.stroke_width(1)))?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], c.stroke_width(2)));
        chart.draw_series(pts.iter().map(|p| Circle::new((p.0, p.1), 4, c.filled())))?;
        chart.draw_series(
            pts.iter().filter(|p| p.2 > 0.0).map(|p| ErrorBar::new_vertical(p.0, p.1 - p.2, p.1, p.1 + p.2, c.stroke_width(1), 6)),
        )?;
    }
    Ok(())
}

/// `E_mean` against `L` (log axis), one curve per `p2`, per family.
pub fn scaling(rows: &[ResultRow], dir: &Path, hash: &str) -> Result<Vec<PathBuf>> {
    let ok: Vec<ResultRow> = rows.iter().filter(|r| r.is_ok()).cloned().collect();
    if ok.is_empty() {
        return Ok(vec![line_chart(&dir.join("scaling.svg"), hash, "E against L (no data)", "L", "E", true, &[])?]);
    }
    let families = group_by(&ok, |r| (r.t1.to_bits(), r.t2.to_bits(), r.t12.to_bits(), r.tau_u.to_bits(), r.p1.to_bits()));
    families
        .iter()
        .map(|(_, g)| {
            let mut by_p2: BTreeMap<u64, Series> = BTreeMap::new();
            for r in g {
                by_p2
                    .entry(sortable(r.p2))
                    .or_insert_with(|| Series { label: format!("p2 = {}", r.p2), points: Vec::new() })
                    .points
                    .push((r.l as f64, r.e_mean, r.e_sem));
            }
            let series: Vec<Series> = by_p2.into_values().collect();
            let r = &g[0];
            let name = format!("scaling_t2_{}_p1_{}.svg", tag(r.t2), tag(r.p1));
            line_chart(&dir.join(name), hash, &format!("E against L, t2 = {}, p1 = {}", r.t2, r.p1), "L", "E", true, &series)
        })
        .collect()
}

fn sortable(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 { !b } else { b | 1 << 63 }
}

/// `c_eff` against `p2`, one curve per window label, per family.
pub fn ceff(fits: &[FitRow], dir: &Path, hash: &str) -> Result<Vec<PathBuf>> {
    if fits.is_empty() {
        return Ok(vec![line_chart(&dir.join("ceff.svg"), hash, "c_eff against p2 (no data)", "p2", "c_eff", false, &[])?]);
    }
    let families = group_by(fits, |f| (f.t1.to_bits(), f.t2.to_bits(), f.t12.to_bits(), f.tau_u.to_bits(), f.p1.to_bits()));
    families
        .iter()
        .map(|(_, g)| {
            let mut by_l: BTreeMap<usize, Series> = BTreeMap::new();
            for f in g {
                by_l.entry(f.l_max)
                    .or_insert_with(|| Series { label: format!("L <= {}", f.l_max), points: Vec::new() })
                    .points
                    .push((f.p2, f.c_eff, f.c_err));
            }
            let series: Vec<Series> = by_l.into_values().collect();
            let f = &g[0];
            let name = format!("ceff_t2_{}_p1_{}.svg", tag(f.t2), tag(f.p1));
            line_chart(&dir.join(name), hash, &format!("c_eff, t2 = {}, p1 = {}", f.t2, f.p1), "p2", "c_eff", false, &series)
        })
        .collect()
}

/// Rescaled `c_eff` curves for every collapsed family.
pub fn collapse(fits: &[FitRow], results: &[CollapseEntry], dir: &Path, hash: &str) -> Result<Vec<PathBuf>> {
    if results.is_empty() {
        return Ok(vec![line_chart(
            &dir.join("collapse.svg"),
            hash,
            "collapse (no data)",
            "L^(1/nu) (p2 - p2c)",
            "c_eff L^(-zeta/nu)",
            false,
            &[],
        )?]);
    }
    results
        .iter()
        .map(|c| {
            let fam = c.family;
            let mut by_l: BTreeMap<usize, Series> = BTreeMap::new();
            for f in fits.iter().filter(|f| f.family() == fam) {
                let l = f.l_max as f64;
                let scale = l.powf(-c.zeta / c.nu);
                by_l.entry(f.l_max)
                    .or_insert_with(|| Series { label: format!("L <= {}", f.l_max), points: Vec::new() })
                    .points
                    .push((l.powf(1.0 / c.nu) * (f.p2 - c.p2c), f.c_eff * scale, f.c_err * scale));
            }
            let series: Vec<Series> = by_l.into_values().collect();
            let title = format!("collapse, t2 = {}, p1 = {}: p2c = {:.3} +- {:.3}, nu = {:.2}", fam.t2, fam.p1, c.p2c, c.p2c_err, c.nu);
            let name = format!("collapse_t2_{}_p1_{}.svg", tag(fam.t2), tag(fam.p1));
            line_chart(&dir.join(name), hash, &title, "L^(1/nu) (p2 - p2c)", "c_eff L^(-zeta/nu)", false, &series)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contour_of_a_plane_lies_on_the_level_line() {
        let xs: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let z: Vec<Vec<f64>> = xs.iter().map(|&x| xs.iter().map(|&y| x + 2.0 * y).collect()).collect();
        let segs = contour_segments(&xs, &xs, &z, 1.25);
        assert!(!segs.is_empty());
        for s in segs {
            for (x, y) in s {
                assert!((x + 2.0 * y - 1.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn saddle_squares_give_two_segments() {
        let xs = [0.0, 1.0];
        let z = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(contour_segments(&xs, &xs, &z, 0.5).len(), 2);
    }

    #[test]
    fn hash_goes_into_the_document() {
        let svg = embed_hash("<?xml?>\n<svg width=\"1\">\n</svg>".into(), "abc");
        assert!(svg.contains("<svg width=\"1\">\n<metadata>config-hash: abc</metadata>"));
    }
}
