//! Finite-size-scaling collapse `c_eff(p, L) = L^{zeta/nu} f(L^{1/nu} (p - p_c))`.
//!
//! Each point is rescaled to `x = L^{1/nu} (p - p_c)`, `y = c_eff L^{-zeta/nu}`
//! and compared with the linear interpolation, at the same `x`, through the
//! rescaled points of every other size. The cost is the mean over all such
//! pairs of `(y - Y)^2 / (dy^2 + dY^2)`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// `c_eff` against `p` at one size.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseCurve {
    pub l: f64,
    /// `(p, c_eff, err)`, any order.
    pub points: Vec<(f64, f64, f64)>,
}

/// Search box for `(p_c, nu, zeta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseBox {
    pub p_c: (f64, f64),
    pub nu: (f64, f64),
    pub zeta: (f64, f64),
}

impl Default for CollapseBox {
    fn default() -> Self {
        CollapseBox { p_c: (0.0, 1.0), nu: (0.5, 10.0), zeta: (-1.0, 1.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CollapseOptions {
    pub bounds: CollapseBox,
    /// Holds `zeta` at this value and fits only `p_c` and `nu`.
    pub fixed_zeta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseResult {
    pub p2c: f64,
    pub nu: f64,
    pub zeta: f64,
    pub p2c_err: f64,
    pub nu_err: f64,
    /// Zero when `zeta` was fixed.
    pub zeta_err: f64,
    /// Cost at the optimum.
    pub quality: f64,
    /// Pairs entering the cost at the optimum.
    pub pairs: usize,
}

struct Scaled {
    x: f64,
    y: f64,
    dy: f64,
}

/// Sum of squared weighted residuals and the number of pairs.
fn residual_sum(curves: &[CollapseCurve], p_c: f64, nu: f64, zeta: f64) -> (f64, usize) {
    let rescaled: Vec<Vec<Scaled>> = curves
        .iter()
        .map(|c| {
            let sx = libm::pow(c.l, 1.0 / nu);
            let sy = libm::pow(c.l, -zeta / nu);
            let mut v: Vec<Scaled> =
                c.points.iter().map(|&(p, y, e)| Scaled { x: sx * (p - p_c), y: y * sy, dy: e * sy }).collect();
            v.sort_by(|a, b| a.x.total_cmp(&b.x));
            v
        })
        .collect();
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (i, own) in rescaled.iter().enumerate() {
        for pt in own {
            for (j, other) in rescaled.iter().enumerate() {
                if i == j || other.len() < 2 {
                    continue;
                }
                if pt.x < other[0].x || pt.x > other[other.len() - 1].x {
                    continue;
                }
                let k = other.partition_point(|q| q.x <= pt.x).clamp(1, other.len() - 1);
                let (a, b) = (&other[k - 1], &other[k]);
                let span = b.x - a.x;
                if !(span > 0.0) {
                    continue;
                }
                let t = (pt.x - a.x) / span;
                let y = a.y + t * (b.y - a.y);
                let dy2 = (1.0 - t) * (1.0 - t) * a.dy * a.dy + t * t * b.dy * b.dy;
                let w = pt.dy * pt.dy + dy2;
                let r = pt.y - y;
                sum += if w > 0.0 { r * r / w } else { r * r };
                pairs += 1;
            }
        }
    }
    (sum, pairs)
}

/// Collapse cost at `(p_c, nu, zeta)`; infinite when the rescaled curves
/// do not overlap at all.
pub fn collapse_cost(curves: &[CollapseCurve], p_c: f64, nu: f64, zeta: f64) -> f64 {
    match residual_sum(curves, p_c, nu, zeta) {
        (_, 0) => f64::INFINITY,
        (s, n) => s / n as f64,
    }
}

/// Deterministic multi-start downhill-simplex minimisation of the cost.
pub fn fss_collapse(curves: &[CollapseCurve], options: CollapseOptions) -> Result<CollapseResult> {
    let mut sizes: Vec<f64> = curves.iter().map(|c| c.l).collect();
    sizes.sort_by(f64::total_cmp);
    sizes.dedup();
    if sizes.len() < 3 || sizes.len() != curves.len() {
        return Err(Error::InsufficientData { what: "distinct sizes", needed: 3, got: sizes.len() });
    }
    if let Some(c) = curves.iter().find(|c| c.points.len() < 5) {
        return Err(Error::InsufficientData { what: "points per size", needed: 5, got: c.points.len() });
    }
    let b = options.bounds;
    let lo = [b.p_c.0, b.nu.0, b.zeta.0];
    let hi = [b.p_c.1, b.nu.1, b.zeta.1];
    let dims = if options.fixed_zeta.is_some() { 2 } else { 3 };
    let full = |v: &[f64]| -> [f64; 3] {
        let mut out = [0.0; 3];
        for k in 0..3 {
            let raw = if k < dims { v[k] } else { options.fixed_zeta.unwrap_or(0.0) };
            out[k] = if k < dims { raw.clamp(lo[k], hi[k]) } else { raw };
        }
        out
    };
    let cost = |v: &[f64]| {
        let q = full(v);
        let c = collapse_cost(curves, q[0], q[1], q[2]);
        // Push the simplex back into the box.
        let outside: f64 = (0..dims).map(|k| (v[k] - q[k]).abs()).sum();
        if c.is_finite() { c + 1e3 * outside } else { 1e30 }
    };

    let frac = |k: usize, t: f64| lo[k] + t * (hi[k] - lo[k]);
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(16);
    if dims == 3 {
        for a in [0.2, 0.4, 0.6, 0.8] {
            for n in [0.15, 0.45] {
                for z in [0.4, 0.6] {
                    starts.push([frac(0, a), frac(1, n), frac(2, z)].to_vec());
                }
            }
        }
    } else {
        for a in [0.2, 0.4, 0.6, 0.8] {
            for n in [0.05, 0.15, 0.3, 0.5] {
                starts.push([frac(0, a), frac(1, n)].to_vec());
            }
        }
    }
    let steps: Vec<f64> = (0..dims).map(|k| 0.1 * (hi[k] - lo[k])).collect();

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut any_converged = false;
    for s in &starts {
        let (x, _, converged) = nelder_mead(&cost, s, &steps, 4000, 1e-12);
        // A restart from the first optimum guards against premature collapse.
        let (x, f, converged2) = nelder_mead(&cost, &x, &steps.iter().map(|v| v * 0.1).collect::<Vec<_>>(), 4000, 1e-12);
        any_converged |= converged || converged2;
        if best.as_ref().map_or(true, |(_, bf)| f < *bf) {
            best = Some((x, f));
        }
    }
    if !any_converged {
        return Err(Error::NonConvergence { iterations: 8000 });
    }
    let (x, _) = best.expect("at least one start");
    let q = full(&x);
    let (sum, pairs) = residual_sum(curves, q[0], q[1], q[2]);
    let quality = if pairs > 0 { sum / pairs as f64 } else { f64::INFINITY };

    let errs = sandwich_errors(curves, &x[..dims], &lo[..dims], &hi[..dims], &full);
    Ok(CollapseResult {
        p2c: q[0],
        nu: q[1],
        zeta: q[2],
        p2c_err: errs[0],
        nu_err: errs[1],
        zeta_err: if dims == 3 { errs[2] } else { 0.0 },
        quality,
        pairs,
    })
}

/// Parameter errors from the curvature of the residual sum `S` at the
/// optimum, in sandwich form `H^-1 J H^-1` with
/// `J = sum_i (d grad S / d y_i)^2 err_i^2`.
///
/// Every datum enters many pairs, so `S` is not a plain chi-square and the
/// `2 H^-1` rule would understate the errors; the sandwich accounts for
/// that. `S` also jumps when pairs enter or leave the overlap, so parameter
/// steps are widened until they span a rise of about one unit.
fn sandwich_errors(
    curves: &[CollapseCurve],
    x: &[f64],
    lo: &[f64],
    hi: &[f64],
    full: &dyn Fn(&[f64]) -> [f64; 3],
) -> Vec<f64> {
    let n = x.len();
    let sum = |c: &[CollapseCurve], v: &[f64]| {
        let q = full(v);
        residual_sum(c, q[0], q[1], q[2]).0
    };
    let f0 = sum(curves, x);
    let shifted = |k: usize, by: f64| {
        let mut v = x.to_vec();
        v[k] += by;
        v
    };
    let h: Vec<f64> = (0..n)
        .map(|k| {
            let width = hi[k] - lo[k];
            let mut h = 1e-4 * width;
            while h < 0.25 * width {
                if 0.5 * (sum(curves, &shifted(k, h)) + sum(curves, &shifted(k, -h))) - f0 >= f0 {
                    break;
                }
                h *= 2.0;
            }
            h
        })
        .collect();
    let at = |c: &[CollapseCurve], d: &[(usize, f64)]| {
        let mut v = x.to_vec();
        for &(k, s) in d {
            v[k] += s * h[k];
        }
        sum(c, &v)
    };
    let gradient = |c: &[CollapseCurve]| -> DVector<f64> {
        DVector::from_fn(n, |k, _| (at(c, &[(k, 1.0)]) - at(c, &[(k, -1.0)])) / (2.0 * h[k]))
    };

    let mut hess = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        hess[(i, i)] = (at(curves, &[(i, 1.0)]) - 2.0 * f0 + at(curves, &[(i, -1.0)])) / (h[i] * h[i]);
        for j in 0..i {
            let v = (at(curves, &[(i, 1.0), (j, 1.0)]) - at(curves, &[(i, 1.0), (j, -1.0)])
                - at(curves, &[(i, -1.0), (j, 1.0)])
                + at(curves, &[(i, -1.0), (j, -1.0)]))
                / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    let Some(inv) = hess.try_inverse() else {
        return alloc::vec![f64::INFINITY; n];
    };

    // The gradient is quadratic in each y_i, so a central difference with
    // step err_i is exact.
    let mut j = DMatrix::<f64>::zeros(n, n);
    let mut work = curves.to_vec();
    for (ci, c) in curves.iter().enumerate() {
        for (pi, &(_, y, e)) in c.points.iter().enumerate() {
            if !(e > 0.0) {
                continue;
            }
            work[ci].points[pi].1 = y + e;
            let up = gradient(&work);
            work[ci].points[pi].1 = y - e;
            let down = gradient(&work);
            work[ci].points[pi].1 = y;
            // (d grad / d y_i) err_i
            let g = (up - down) * 0.5;
            j += &g * g.transpose();
        }
    }
    let cov = &inv * j * &inv;
    (0..n)
        .map(|k| {
            let v = cov[(k, k)];
            if v.is_finite() { libm::sqrt(v.abs()) } else { f64::INFINITY }
        })
        .collect()
}

/// Downhill simplex; returns the best vertex, its value and whether the
/// spread of values fell below `ftol` within `max_iter` iterations.
pub(crate) fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
    steps: &[f64],
    max_iter: usize,
    ftol: f64,
) -> (Vec<f64>, f64, bool) {
    let n = start.len();
    let mut simplex: Vec<DVector<f64>> = Vec::with_capacity(n + 1);
    simplex.push(DVector::from_column_slice(start));
    for k in 0..n {
        let mut v = DVector::from_column_slice(start);
        v[k] += steps[k];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v.as_slice())).collect();
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let spread = values[n] - values[0];
        if spread.abs() <= ftol * (values[0].abs() + ftol) {
            return (simplex[0].as_slice().to_vec(), values[0], true);
        }
        let centroid = simplex[..n].iter().fold(DVector::zeros(n), |acc, v| acc + v) / n as f64;
        let reflect = &centroid + (&centroid - &simplex[n]);
        let fr = f(reflect.as_slice());
        if fr < values[0] {
            let expand = &centroid + (&reflect - &centroid) * 2.0;
            let fe = f(expand.as_slice());
            if fe < fr {
                simplex[n] = expand;
                values[n] = fe;
            } else {
                simplex[n] = reflect;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflect;
            values[n] = fr;
            continue;
        }
        let (contract, fc) = if fr < values[n] {
            let c = &centroid + (&reflect - &centroid) * 0.5;
            let fc = f(c.as_slice());
            (c, fc)
        } else {
            let c = &centroid + (&simplex[n] - &centroid) * 0.5;
            let fc = f(c.as_slice());
            (c, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = contract;
            values[n] = fc;
            continue;
        }
        for i in 1..=n {
            simplex[i] = &simplex[0] + (&simplex[i] - &simplex[0]) * 0.5;
            values[i] = f(simplex[i].as_slice());
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    (simplex[best].as_slice().to_vec(), values[best], false)
}
