use alloc::vec::Vec;

use crate::{Error, Result};

/// A finite-difference derivative with its propagated standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub value: f64,
    pub err: f64,
}

/// `d mean / d p` on a uniform grid.
///
/// Central differences inside, second-order one-sided differences at the
/// two ends; errors assume independent points.
pub fn susceptibility(grid: &[f64], mean: &[f64], sem: &[f64]) -> Result<Vec<Derivative>> {
    let n = grid.len();
    if mean.len() != n || sem.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: mean.len().min(sem.len()) });
    }
    if n < 3 {
        return Err(Error::InsufficientData { what: "grid points", needed: 3, got: n });
    }
    let h = grid[1] - grid[0];
    if h <= 0.0 {
        return Err(Error::NonUniformGrid { expected: h, found: h, index: 1 });
    }
    for i in 1..n {
        let step = grid[i] - grid[i - 1];
        if (step - h).abs() > 1e-9 * h.abs().max(1.0) {
            return Err(Error::NonUniformGrid { expected: h, found: step, index: i });
        }
    }
    let two_h = 2.0 * h;
    let quad = |terms: &[(f64, f64)]| libm::sqrt(terms.iter().map(|(c, s)| c * c * s * s).sum::<f64>());
    let mut out = Vec::with_capacity(n);
    out.push(Derivative {
        value: (-3.0 * mean[0] + 4.0 * mean[1] - mean[2]) / two_h,
        err: quad(&[(3.0, sem[0]), (4.0, sem[1]), (1.0, sem[2])]) / two_h,
    });
    for i in 1..n - 1 {
        out.push(Derivative {
            value: (mean[i + 1] - mean[i - 1]) / two_h,
            err: quad(&[(1.0, sem[i + 1]), (1.0, sem[i - 1])]) / two_h,
        });
    }
    out.push(Derivative {
        value: (3.0 * mean[n - 1] - 4.0 * mean[n - 2] + mean[n - 3]) / two_h,
        err: quad(&[(3.0, sem[n - 1]), (4.0, sem[n - 2]), (1.0, sem[n - 3])]) / two_h,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 * 0.1).collect()
    }

    #[test]
    fn constant_curve() {
        let g = grid(6);
        let d = susceptibility(&g, &[1.5; 6], &[0.01; 6]).unwrap();
        assert!(d.iter().all(|x| x.value == 0.0 && x.err > 0.0));
    }

    #[test]
    fn linear_and_quadratic_are_exact() {
        let g = grid(11);
        let lin: Vec<f64> = g.iter().map(|p| 2.0 * p).collect();
        for d in &susceptibility(&g, &lin, &[0.0; 11]).unwrap()[1..10] {
            assert!((d.value - 2.0).abs() < 1e-12);
        }
        let quad: Vec<f64> = g.iter().map(|p| p * p - p).collect();
        let d = susceptibility(&g, &quad, &[0.0; 11]).unwrap();
        for (p, x) in g.iter().zip(&d) {
            assert!((x.value - (2.0 * p - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(
            susceptibility(&[0.0, 0.1, 0.3], &[0.0; 3], &[0.0; 3]),
            Err(Error::NonUniformGrid { index: 2, .. })
        ));
        assert!(susceptibility(&[0.0, 0.1], &[0.0; 2], &[0.0; 2]).is_err());
        assert!(susceptibility(&grid(3), &vec![0.0; 4], &[0.0; 3]).is_err());
    }
}
