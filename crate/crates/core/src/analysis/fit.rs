use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Fit windows over chain lengths, each identified by its largest `L`.
pub fn registered_windows() -> [&'static [usize]; 5] {
    [
        &[8, 16, 24, 32, 48, 64, 80, 96],
        &[16, 24, 32, 48, 64, 80, 96, 128],
        &[24, 32, 48, 64, 80, 96, 128, 160],
        &[32, 48, 64, 80, 96, 128, 160, 192],
        &[48, 64, 80, 96, 128, 160, 192, 256],
    ]
}

/// Runs of `width` consecutive entries of `sizes`.
pub fn moving_windows(sizes: &[usize], width: usize) -> Vec<Vec<usize>> {
    if width == 0 || width > sizes.len() {
        return Vec::new();
    }
    sizes.windows(width).map(|w| w.to_vec()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPoint {
    pub l: usize,
    pub mean: f64,
    pub sem: f64,
}

/// Ensemble means against `L` at fixed couplings and probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSeries {
    points: Vec<ScalingPoint>,
}

impl ScalingSeries {
    /// Sorts by `L`; rejects repeated sizes and non-positive errors.
    pub fn new(mut points: Vec<ScalingPoint>) -> Result<Self> {
        points.sort_by_key(|p| p.l);
        for w in points.windows(2) {
            if w[0].l == w[1].l {
                return Err(Error::params("L", alloc::format!("size {} appears twice", w[0].l)));
            }
        }
        if let Some(p) = points.iter().find(|p| !(p.sem > 0.0) || !p.mean.is_finite()) {
            return Err(Error::params("E_sem", alloc::format!("need a finite mean and sem > 0 at L = {}", p.l)));
        }
        Ok(ScalingSeries { points })
    }

    pub fn points(&self) -> &[ScalingPoint] {
        &self.points
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.l).collect()
    }
}

/// Weighted polynomial least squares with absolute errors.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    /// Coefficients of `1, x, x^2, ...`.
    pub coeffs: Vec<f64>,
    pub cov: DMatrix<f64>,
    pub chi2: f64,
}

impl PolyFit {
    pub fn err(&self, k: usize) -> f64 {
        libm::sqrt(self.cov[(k, k)].max(0.0))
    }
}

/// Fits `y = sum_k c_k x^k` with weights `1/sigma^2` via QR of the weighted
/// design matrix. The covariance is `(A^T W A)^-1`.
pub fn weighted_polyfit(x: &[f64], y: &[f64], sigma: &[f64], degree: usize) -> Result<PolyFit> {
    let n = x.len();
    let p = degree + 1;
    if y.len() != n || sigma.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len().min(sigma.len()) });
    }
    if n < p {
        return Err(Error::InsufficientData { what: "fit points", needed: p, got: n });
    }
    if sigma.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::params("sigma", "errors must be positive"));
    }
    let a = DMatrix::from_fn(n, p, |i, k| libm::pow(x[i], k as f64) / sigma[i]);
    let b = DVector::from_fn(n, |i, _| y[i] / sigma[i]);
    let qr = a.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..p).map(|k| r[(k, k)].abs()).collect();
    let hi = diag.iter().copied().fold(0.0, f64::max);
    let lo = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if !(hi > 0.0) || lo / hi < 1e-13 {
        return Err(Error::SingularDesign { what: "polynomial fit" });
    }
    let qtb = qr.q().transpose() * &b;
    let coeffs = r.solve_upper_triangular(&qtb).ok_or(Error::SingularDesign { what: "polynomial fit" })?;
    let r_inv = r.try_inverse().ok_or(Error::SingularDesign { what: "polynomial fit" })?;
    let cov = &r_inv * r_inv.transpose();
    let resid = &a * &coeffs - &b;
    Ok(PolyFit { coeffs: coeffs.iter().copied().collect(), cov, chi2: resid.norm_squared() })
}

/// `E = (c_eff / 4) ln L + a0` over one window.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub c_eff: f64,
    pub a0: f64,
    pub c_err: f64,
    pub a_err: f64,
    /// The requested window.
    pub window: Vec<usize>,
    /// Sizes of the window present in the series and used in the fit.
    pub sizes: Vec<usize>,
    pub chi2: f64,
}

impl FitResult {
    /// Largest size actually fitted; labels the window.
    pub fn l_max(&self) -> usize {
        *self.sizes.last().expect("fit has at least three sizes")
    }
}

/// Weighted least squares in `ln L` over the sizes of `window` present in
/// `series`; needs at least three of them.
pub fn fit_ceff(series: &ScalingSeries, window: &[usize]) -> Result<FitResult> {
    let pts: Vec<&ScalingPoint> = series.points.iter().filter(|p| window.contains(&p.l)).collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData { what: "sizes in window", needed: 3, got: pts.len() });
    }
    let x: Vec<f64> = pts.iter().map(|p| libm::log(p.l as f64)).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.mean).collect();
    let s: Vec<f64> = pts.iter().map(|p| p.sem).collect();
    let fit = weighted_polyfit(&x, &y, &s, 1)?;
    Ok(FitResult {
        c_eff: 4.0 * fit.coeffs[1],
        a0: fit.coeffs[0],
        c_err: 4.0 * fit.err(1),
        a_err: fit.err(0),
        window: window.to_vec(),
        sizes: pts.iter().map(|p| p.l).collect(),
        chi2: fit.chi2,
    })
}

/// Fits every window that has enough sizes, in window order.
pub fn fit_windows(series: &ScalingSeries, windows: &[&[usize]]) -> Vec<FitResult> {
    windows.iter().filter_map(|w| fit_ceff(series, w).ok()).collect()
}

/// One `c_eff` value at window label `l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CeffPoint {
    pub l: f64,
    pub c_eff: f64,
    pub err: f64,
}

impl From<&FitResult> for CeffPoint {
    fn from(f: &FitResult) -> Self {
        CeffPoint { l: f.l_max() as f64, c_eff: f.c_eff, err: f.c_err }
    }
}

/// `c_eff = c0 + c1 / L + c2 / L^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrapolation {
    pub c: [f64; 3],
    pub err: [f64; 3],
    pub chi2: f64,
}

/// Weighted quadratic fit in `1/L`; `c[0]` is the infinite-size value.
pub fn extrapolate_ceff(points: &[CeffPoint]) -> Result<Extrapolation> {
    if points.len() < 3 {
        return Err(Error::InsufficientData { what: "c_eff values", needed: 3, got: points.len() });
    }
    let x: Vec<f64> = points.iter().map(|p| 1.0 / p.l).collect();
    let y: Vec<f64> = points.iter().map(|p| p.c_eff).collect();
    let s: Vec<f64> = points.iter().map(|p| p.err).collect();
    let fit = weighted_polyfit(&x, &y, &s, 2)?;
    Ok(Extrapolation {
        c: [fit.coeffs[0], fit.coeffs[1], fit.coeffs[2]],
        err: [fit.err(0), fit.err(1), fit.err(2)],
        chi2: fit.chi2,
    })
}

/// Unweighted slope of `c_eff` against `ln L` across window labels.
pub fn size_slope(points: &[CeffPoint]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InsufficientData { what: "window labels", needed: 2, got: points.len() });
    }
    let x: Vec<f64> = points.iter().map(|p| libm::log(p.l)).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = points.iter().map(|p| p.c_eff).sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::SingularDesign { what: "size slope" });
    }
    let sxy: f64 = x.iter().zip(points).map(|(v, p)| (v - mx) * (p.c_eff - my)).sum();
    Ok(sxy / sxx)
}

/// Where `dc_eff/dL` turns from positive to negative along the `p` grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    /// Linear interpolation of the zero of the slope.
    pub p: f64,
    /// Grid points bracketing it.
    pub below: f64,
    pub above: f64,
}

/// First sign change `+ -> -` of the size slope over an ascending `p` grid.
/// `curves[i]` holds the `c_eff` values at `grid[i]` for all window labels.
pub fn detect_crossing(grid: &[f64], curves: &[Vec<CeffPoint>]) -> Result<Option<Crossing>> {
    if grid.len() != curves.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), found: curves.len() });
    }
    let slopes = curves.iter().map(|c| size_slope(c)).collect::<Result<Vec<f64>>>()?;
    for i in 1..grid.len() {
        let (a, b) = (slopes[i - 1], slopes[i]);
        if a > 0.0 && b < 0.0 {
            let t = a / (a - b);
            let p = grid[i - 1] + t * (grid[i] - grid[i - 1]);
            return Ok(Some(Crossing { p, below: grid[i - 1], above: grid[i] }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn series(f: impl Fn(f64) -> f64, sizes: &[usize]) -> ScalingSeries {
        ScalingSeries::new(
            sizes.iter().map(|&l| ScalingPoint { l, mean: f(l as f64), sem: 0.01 }).collect(),
        )
        .unwrap()
    }

    #[test]
    fn noiseless_log_fit_is_exact() {
        let w = registered_windows()[4];
        let s = series(|l| 0.5 * libm::log(l) + 0.3, w);
        let f = fit_ceff(&s, w).unwrap();
        assert!((f.c_eff - 2.0).abs() < 1e-12);
        assert!((f.a0 - 0.3).abs() < 1e-12);
        assert!(f.c_err > 0.0 && f.chi2 < 1e-20);
        assert_eq!(f.l_max(), 256);
    }

    #[test]
    fn scaling_the_data_scales_the_fit() {
        let w = registered_windows()[0];
        let s = series(|l| 0.3 * libm::log(l) + 0.1 + 0.01 * libm::sin(l), w);
        let scaled = ScalingSeries::new(
            s.points().iter().map(|p| ScalingPoint { mean: 3.0 * p.mean, ..*p }).collect(),
        )
        .unwrap();
        let (a, b) = (fit_ceff(&s, w).unwrap(), fit_ceff(&scaled, w).unwrap());
        assert!((b.c_eff - 3.0 * a.c_eff).abs() < 1e-12);
        assert!((b.a0 - 3.0 * a.a0).abs() < 1e-12);
    }

    #[test]
    fn window_needs_three_sizes() {
        let s = series(|l| l, &[8, 16, 24, 32]);
        assert!(fit_ceff(&s, &[8, 16]).is_err());
        assert_eq!(fit_ceff(&s, registered_windows()[1]).unwrap().sizes, vec![16, 24, 32]);
        assert!(fit_ceff(&s, registered_windows()[4]).is_err());
        assert_eq!(fit_windows(&s, &registered_windows()).len(), 2);
    }

    #[test]
    fn series_invariants() {
        let p = |l, sem| ScalingPoint { l, mean: 1.0, sem };
        assert!(ScalingSeries::new(vec![p(8, 0.1), p(8, 0.1)]).is_err());
        assert!(ScalingSeries::new(vec![p(8, 0.0)]).is_err());
        assert_eq!(ScalingSeries::new(vec![p(16, 0.1), p(8, 0.1)]).unwrap().sizes(), vec![8, 16]);
    }

    #[test]
    fn extrapolation_exact() {
        let pts: Vec<CeffPoint> = [96.0, 128.0, 160.0, 192.0, 256.0]
            .iter()
            .map(|&l| CeffPoint { l, c_eff: 1.1 - 3.0 / l + 40.0 / (l * l), err: 0.05 })
            .collect();
        let e = extrapolate_ceff(&pts).unwrap();
        assert!((e.c[0] - 1.1).abs() < 1e-9);
        assert!((e.c[1] + 3.0).abs() < 1e-6);
        assert!((e.c[2] - 40.0).abs() < 1e-4);
        let flat: Vec<CeffPoint> = pts.iter().map(|p| CeffPoint { c_eff: 1.2, ..*p }).collect();
        let e = extrapolate_ceff(&flat).unwrap();
        assert!((e.c[0] - 1.2).abs() < 1e-12 && e.c[1].abs() < 1e-9 && e.c[2].abs() < 1e-7);
        assert!(extrapolate_ceff(&pts[..2]).is_err());
    }

    #[test]
    fn singular_design_is_reported() {
        assert!(matches!(
            weighted_polyfit(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], &[1.0; 3], 1),
            Err(Error::SingularDesign { .. })
        ));
    }

    #[test]
    fn crossing_on_synthetic_curves() {
        let labels = [40.0, 48.0, 56.0, 64.0];
        let grid: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let pc = 0.33;
        let curves: Vec<Vec<CeffPoint>> = grid
            .iter()
            .map(|&p| {
                labels
                    .iter()
                    .map(|&l| CeffPoint { l, c_eff: 1.0 - p + (pc - p) * libm::log(l), err: 0.1 })
                    .collect()
            })
            .collect();
        let c = detect_crossing(&grid, &curves).unwrap().unwrap();
        assert!((c.p - pc).abs() <= 0.1);
        assert!(c.below <= pc && pc <= c.above);
        let flat: Vec<Vec<CeffPoint>> = curves.iter().map(|c| c.iter().map(|x| CeffPoint { c_eff: 1.0, ..*x }).collect()).collect();
        assert_eq!(detect_crossing(&grid, &flat).unwrap(), None);
    }
}
