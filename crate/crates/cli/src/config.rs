//! Experiment configuration.
//!
//! A TOML document with the sections `model`, `grid`, `protocol`,
//! `bipartition`, `output`, `fit`, `collapse` and `plot`. Every key has a
//! default, so an empty file is a valid configuration. Grids are written as
//! a single value, an explicit list, or an inclusive `{ start, stop, step }`
//! range.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fermiladder_core::analysis::{CollapseBox, CollapseOptions};
use fermiladder_core::{Filling, Geometry, ModelParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub protocol: ProtocolSection,
    pub bipartition: BipartitionSection,
    pub output: OutputSection,
    pub fit: FitSection,
    pub collapse: CollapseSection,
    pub plot: PlotSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FillingChoice {
    #[default]
    Global,
    PerChain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryChoice {
    #[default]
    Ladder,
    SingleChain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub t1: f64,
    pub t12: f64,
    pub tau_u: f64,
    pub filling: FillingChoice,
    pub geometry: GeometryChoice,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            t1: 1.0,
            t12: FRAC_PI_2,
            tau_u: 1.0,
            filling: FillingChoice::Global,
            geometry: GeometryChoice::Ladder,
        }
    }
}

/// One value, a list, or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid<T> {
    One(T),
    List(Vec<T>),
    Range { start: T, stop: T, step: T },
}

impl Grid<f64> {
    /// Range points are rounded to 12 decimals so that `0.1 * 3` reads
    /// back as `0.3`.
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            Grid::One(v) => Ok(vec![*v]),
            Grid::List(v) => Ok(v.clone()),
            &Grid::Range { start, stop, step } => {
                if !(step > 0.0) || !(stop >= start) {
                    bail!("range needs step > 0 and stop >= start (got {start}..={stop} step {step})");
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect())
            }
        }
    }
}

impl Grid<usize> {
    pub fn values(&self) -> Result<Vec<usize>> {
        match self {
            Grid::One(v) => Ok(vec![*v]),
            Grid::List(v) => Ok(v.clone()),
            &Grid::Range { start, stop, step } => {
                if step == 0 || stop < start {
                    bail!("range needs step > 0 and stop >= start (got {start}..={stop} step {step})");
                }
                Ok((start..=stop).step_by(step).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    #[serde(rename = "L")]
    pub l: Grid<usize>,
    pub t2: Grid<f64>,
    pub p1: Grid<f64>,
    pub p2: Grid<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { l: Grid::One(8), t2: Grid::One(1.0), p1: Grid::One(0.2), p2: Grid::One(0.5) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub n_traj: usize,
    pub master_seed: u64,
    /// Relaxation cycles; 150 for `L <= 64` and 250 above when absent.
    #[serde(rename = "N_st", skip_serializing_if = "Option::is_none")]
    pub n_st: Option<usize>,
    pub m: usize,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection { n_traj: 150, master_seed: 1, n_st: None, m: 5 }
    }
}

impl ProtocolSection {
    pub fn n_st_for(&self, l: usize) -> usize {
        self.n_st.unwrap_or(if l <= 64 { 150 } else { 250 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct BipartitionSection {
    /// Sites in block A; half the chain when absent.
    #[serde(rename = "lA", skip_serializing_if = "Option::is_none")]
    pub l_a: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    /// Explicit windows; take precedence over `moving_width`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub windows: Option<Vec<Vec<usize>>>,
    /// Runs of this many consecutive simulated sizes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moving_width: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollapseSection {
    pub p_c: [f64; 2],
    pub nu: [f64; 2],
    pub zeta: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_zeta: Option<f64>,
}

impl Default for CollapseSection {
    fn default() -> Self {
        let b = CollapseBox::default();
        CollapseSection { p_c: [b.p_c.0, b.p_c.1], nu: [b.nu.0, b.nu.1], zeta: [b.zeta.0, b.zeta.1], fixed_zeta: None }
    }
}

impl CollapseSection {
    pub fn options(&self) -> CollapseOptions {
        CollapseOptions {
            bounds: CollapseBox {
                p_c: (self.p_c[0], self.p_c[1]),
                nu: (self.nu[0], self.nu[1]),
                zeta: (self.zeta[0], self.zeta[1]),
            },
            fixed_zeta: self.fixed_zeta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlotSection {
    /// Level of the heatmap contour line.
    pub contour: f64,
}

impl Default for PlotSection {
    fn default() -> Self {
        PlotSection { contour: 2.5 }
    }
}

/// One point of the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub params: ModelParams,
    pub l_a: usize,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| anyhow::anyhow!("malformed config: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (defaults when `None`) and applies `key=value`
    /// overrides, where `key` is a dotted path such as `grid.p2` and
    /// `value` is a TOML value (bare words are taken as strings).
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?,
            None => String::new(),
        };
        let mut doc: toml::Table = toml::from_str(&text).map_err(|e| anyhow::anyhow!("malformed config: {e}"))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        Self::from_toml(&toml::to_string(&doc)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form, in hex.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_toml().as_bytes())
    }

    pub fn filling(&self) -> Filling {
        match self.model.filling {
            FillingChoice::Global => Filling::Global,
            FillingChoice::PerChain => Filling::PerChain,
        }
    }

    pub fn geometry(&self) -> Geometry {
        match self.model.geometry {
            GeometryChoice::Ladder => Geometry::Ladder,
            GeometryChoice::SingleChain => Geometry::SingleChain,
        }
    }

    /// Grid cells in row order: `L`, then `t2`, `p1`, `p2`.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let g = &self.grid;
        let (ls, t2s, p1s, p2s) = (g.l.values()?, g.t2.values()?, g.p1.values()?, g.p2.values()?);
        let mut out = Vec::with_capacity(ls.len() * t2s.len() * p1s.len() * p2s.len());
        for &l in &ls {
            for &t2 in &t2s {
                for &p1 in &p1s {
                    for &p2 in &p2s {
                        let params = ModelParams {
                            l,
                            t1: self.model.t1,
                            t2,
                            t12: self.model.t12,
                            tau_u: self.model.tau_u,
                            p1,
                            p2,
                            n_st: self.protocol.n_st_for(l),
                            m: self.protocol.m,
                        };
                        out.push(Cell { params, l_a: self.bipartition.l_a.unwrap_or(l / 2) });
                    }
                }
            }
        }
        Ok(out)
    }

    /// Checks every key against the model invariants; errors name the key.
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        let ls = g.l.values().context("grid.L")?;
        let named = [("grid.t2", &g.t2), ("grid.p1", &g.p1), ("grid.p2", &g.p2)];
        for (key, grid) in named {
            let v = grid.values().with_context(|| key.to_string())?;
            if v.is_empty() {
                bail!("{key}: grid is empty");
            }
            if let Some(x) = v.iter().find(|x| !x.is_finite()) {
                bail!("{key}: value {x} is not finite");
            }
            if key != "grid.t2" {
                if let Some(x) = v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                    bail!("{key}: probability {x} outside [0, 1]");
                }
            }
        }
        if ls.is_empty() {
            bail!("grid.L: grid is empty");
        }
        if let Some(l) = ls.iter().find(|&&l| l < 2 || l % 2 != 0) {
            bail!("grid.L: chain length {l} must be even and at least 2");
        }
        if let Some(la) = self.bipartition.l_a {
            if let Some(l) = ls.iter().find(|&&l| la == 0 || la >= l) {
                bail!("bipartition.lA: {la} must lie in 1..{l}");
            }
        }
        for (key, v) in [("model.t1", self.model.t1), ("model.t12", self.model.t12)] {
            if !v.is_finite() {
                bail!("{key}: value {v} is not finite");
            }
        }
        if !(self.model.tau_u > 0.0 && self.model.tau_u.is_finite()) {
            bail!("model.tau_u: must be positive, got {}", self.model.tau_u);
        }
        if self.protocol.n_traj == 0 {
            bail!("protocol.n_traj: need at least one trajectory");
        }
        if self.protocol.m == 0 {
            bail!("protocol.m: need at least one averaged cycle");
        }
        if self.protocol.n_st == Some(0) {
            bail!("protocol.N_st: need at least one cycle");
        }
        if self.protocol.master_seed > i64::MAX as u64 {
            bail!("protocol.master_seed: must fit in a TOML integer (<= {})", i64::MAX);
        }
        if let Some(w) = self.fit.moving_width {
            if w < 3 {
                bail!("fit.moving_width: a window needs at least 3 sizes, got {w}");
            }
        }
        for (key, [lo, hi]) in [("collapse.p_c", self.collapse.p_c), ("collapse.nu", self.collapse.nu), ("collapse.zeta", self.collapse.zeta)] {
            if !(lo < hi) {
                bail!("{key}: need lower < upper, got [{lo}, {hi}]");
            }
        }
        if !self.plot.contour.is_finite() {
            bail!("plot.contour: value is not finite");
        }
        for cell in self.cells()? {
            cell.params.validate().with_context(|| format!("grid cell L = {}", cell.params.l))?;
        }
        Ok(())
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_toml())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn apply_override(doc: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item.split_once('=').with_context(|| format!("override `{item}` is not key=value"))?;
    let key = key.trim();
    let value = parse_value(raw.trim());
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().filter(|s| !s.is_empty()).with_context(|| format!("override `{item}` has an empty key"))?;
    let mut table = doc;
    for part in parts {
        let entry = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().with_context(|| format!("override `{key}`: `{part}` is not a section"))?;
    }
    table.insert(leaf.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
