//! Fermionic logarithmic negativity of a contiguous block of the system chain.
//!
//! With `G = 2 D1 - 1` split into blocks over `A | B`, the partial time
//! reversal of the reduced state has covariance matrices
//!
//! ```text
//! G+- = [[ G_AA,    +-i G_AB ],
//!        [ +-i G_BA,  -G_BB  ]]
//! ```
//!
//! and the normalised product `rho^R (rho^R)^dag` is Gaussian with a
//! correlation matrix isospectral to
//! `Gx = (1 - (1 + G+ G-)^-1 (G+ + G-)) / 2`. If `mu` is the spectrum of
//! `Gx` and `lambda` the spectrum of `D1`, the negativity in nats is
//!
//! ```text
//! E = sum_j ln(sqrt(mu_j) + sqrt(1 - mu_j)) + 1/2 sum_j ln((1 - lambda_j)^2 + lambda_j^2).
//! ```
//!
//! The spectrum of `Gx` is reported from a general eigensolver, but the
//! square roots entering `E` are taken from singular values (see
//! [`negativity_with_spectra`]) so that modes with `mu` at 0 or 1 to
//! rounding do not contribute `sqrt(eps)`.

use alloc::vec::Vec;

use crate::engine::CorrelationMatrix;
use crate::linalg::{self, CMatrix, I};
use crate::model::Geometry;
use crate::{Error, Result};

/// Spectra may leave `[0, 1]` (or pick up imaginary parts) by this much
/// before the result is rejected.
pub const SPECTRAL_TOLERANCE: f64 = 1e-6;

/// Smallest acceptable `min |u_ii| / max |u_ii|` in the LU factor of
/// `1 + G+ G-`.
pub const PIVOT_RATIO_FLOOR: f64 = 1e-12;

/// Block `A = 0..l_a` of a system chain of `l` sites, and its complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bipartition {
    l_a: usize,
    l: usize,
}

impl Bipartition {
    pub fn new(l_a: usize, l: usize) -> Result<Self> {
        if l_a == 0 || l_a >= l {
            return Err(Error::InvalidBipartition { l_a, l });
        }
        Ok(Bipartition { l_a, l })
    }

    /// `l_A = L / 2`; needs even `L`.
    pub fn half(l: usize) -> Result<Self> {
        if l % 2 != 0 {
            return Err(Error::params("L", "half bipartition needs even L"));
        }
        Self::new(l / 2, l)
    }

    pub fn l_a(&self) -> usize {
        self.l_a
    }

    pub fn l(&self) -> usize {
        self.l
    }

    /// `l_A -> L - l_A`. Evaluated on [`reverse_sites`] of the same state it
    /// exchanges the roles of `A` and `B`.
    pub fn complement(&self) -> Self {
        Bipartition { l_a: self.l - self.l_a, l: self.l }
    }
}

/// Spectra behind one negativity evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativitySpectra {
    /// Eigenvalues of `D1`, clamped to `[0, 1]`.
    pub lambda: Vec<f64>,
    /// Real parts of the eigenvalues of `Gx`, clamped to `[0, 1]`.
    pub mu: Vec<f64>,
    /// Largest `|Im mu_j|` encountered.
    pub max_imag: f64,
    /// Largest distance of any eigenvalue outside `[0, 1]` before clamping.
    pub max_excess: f64,
}

/// System-chain block `D1` of the ladder correlation matrix.
pub fn reduce_to_system(d: &CorrelationMatrix) -> CMatrix {
    let l = d.l();
    match d.geometry() {
        Geometry::SingleChain => d.matrix().clone(),
        Geometry::Ladder => CMatrix::from_fn(l, l, |i, j| d.matrix()[(2 * i, 2 * j)]),
    }
}

/// `D1` with site order reversed, so that block `A` of the reversed chain
/// is the last `l_A` sites of the original one.
pub fn reverse_sites(d1: &CMatrix) -> CMatrix {
    let n = d1.nrows();
    CMatrix::from_fn(n, n, |i, j| d1[(n - 1 - i, n - 1 - j)])
}

fn excess(x: f64) -> f64 {
    if x < 0.0 {
        -x
    } else if x > 1.0 {
        x - 1.0
    } else {
        0.0
    }
}

/// Negativity (nats) between `A` and `B` of the system state `d1`.
pub fn fermionic_negativity(d1: &CMatrix, part: Bipartition) -> Result<f64> {
    negativity_with_spectra(d1, part).map(|(e, _)| e)
}

/// Negativity together with the spectra it was computed from.
pub fn negativity_with_spectra(d1: &CMatrix, part: Bipartition) -> Result<(f64, NegativitySpectra)> {
    let l = part.l();
    if d1.nrows() != l || d1.ncols() != l {
        return Err(Error::DimensionMismatch { expected: l, found: d1.nrows() });
    }
    let la = part.l_a();

    let mut d1h = d1.clone();
    linalg::hermitize(&mut d1h);
    let identity = CMatrix::identity(l, l);
    let gamma = d1h.map(|z| z * 2.0) - &identity;

    let mut plus = gamma.clone();
    let mut minus = gamma;
    for j in 0..l {
        for i in 0..l {
            match (i < la, j < la) {
                (true, true) => {}
                (false, false) => {
                    plus[(i, j)] = -plus[(i, j)];
                    minus[(i, j)] = -minus[(i, j)];
                }
                _ => {
                    plus[(i, j)] *= I;
                    minus[(i, j)] *= -I;
                }
            }
        }
    }

    let lhs = &identity + linalg::matmul(&plus, &minus);
    let rhs = &plus + &minus;
    let lu = lhs.clone().lu();
    let u = lu.u();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..l {
        let p = u[(i, i)].norm();
        lo = lo.min(p);
        hi = hi.max(p);
    }
    let pivot_ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(pivot_ratio >= PIVOT_RATIO_FLOOR) {
        return Err(Error::Conditioning { pivot_ratio });
    }
    let solved = lu.solve(&rhs).ok_or(Error::Conditioning { pivot_ratio })?;
    let gamma_x = (&identity - solved).map(|z| z * 0.5);

    // With G- = G+^dag, Gx is similar to the Hermitian
    // (1 - S B S) / 2 with S = (1 + G+ G-)^{-1/2} and B = G+ + G-.
    let (w, v) = linalg::hermitian_eigen(&lhs);
    let inv_sqrt = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        l,
        w.iter().map(|&x| linalg::C64::new(1.0 / libm::sqrt(x), 0.0)),
    ));
    let half_root = linalg::matmul(&linalg::matmul(&v, &inv_sqrt), &v.adjoint());

    // The QR iteration can stall on nearly scalar Gx (all modes pure); the
    // similar Hermitian form then supplies the spectrum.
    let mu_raw = linalg::general_eigenvalues(&gamma_x).unwrap_or_else(|| {
        let mut h = (&identity - linalg::matmul(&linalg::matmul(&half_root, &rhs), &half_root)).map(|z| z * 0.5);
        linalg::hermitize(&mut h);
        linalg::hermitian_eigenvalues(&h).into_iter().map(|x| linalg::C64::new(x, 0.0)).collect()
    });
    let lambda_raw = linalg::hermitian_eigenvalues(&d1h);

    let mut max_imag = 0.0f64;
    let mut max_excess = 0.0f64;
    let mu: Vec<f64> = mu_raw
        .iter()
        .map(|z| {
            max_imag = max_imag.max(z.im.abs());
            max_excess = max_excess.max(excess(z.re));
            z.re.clamp(0.0, 1.0)
        })
        .collect();
    let lambda: Vec<f64> = lambda_raw
        .iter()
        .map(|&x| {
            max_excess = max_excess.max(excess(x));
            x.clamp(0.0, 1.0)
        })
        .collect();
    if max_imag > SPECTRAL_TOLERANCE || max_excess > SPECTRAL_TOLERANCE {
        return Err(Error::NumericalDegradation { max_imag, max_excess });
    }

    // Likewise 2 mu and 2 (1 - mu) are the squared singular values of
    // S (1 -+ G+). Taking sqrt(mu) from singular values avoids amplifying
    // rounding of mu near 0 or 1.
    let sorted_singular = |m: CMatrix| {
        let mut s: Vec<f64> = linalg::matmul(&half_root, &m).singular_values().iter().copied().collect();
        s.sort_by(f64::total_cmp);
        s
    };
    let root_mu = sorted_singular(&identity - &plus);
    let root_one_minus_mu = sorted_singular(&identity + &plus);
    let mu_part: f64 = (0..l)
        .map(|j| libm::log((root_mu[j] + root_one_minus_mu[l - 1 - j]) * core::f64::consts::FRAC_1_SQRT_2))
        .sum();
    let lambda_part: f64 =
        lambda.iter().map(|&x| 0.5 * libm::log((1.0 - x) * (1.0 - x) + x * x)).sum();
    let e = mu_part + lambda_part;
    if e < -1e-8 {
        return Err(Error::NumericalDegradation { max_imag, max_excess: -e });
    }
    Ok((e.max(0.0), NegativitySpectra { lambda, mu, max_imag, max_excess }))
}

/// Renyi-1/2 entropy `2 sum ln(sqrt(l) + sqrt(1 - l))` of a block with
/// correlation matrix `d_a`.
pub fn renyi_half_entropy(d_a: &CMatrix) -> Result<f64> {
    let mut h = d_a.clone();
    linalg::hermitize(&mut h);
    let mut max_excess = 0.0f64;
    let mut total = 0.0;
    for x in linalg::hermitian_eigenvalues(&h) {
        max_excess = max_excess.max(excess(x));
        let x = x.clamp(0.0, 1.0);
        total += 2.0 * libm::log(libm::sqrt(x) + libm::sqrt(1.0 - x));
    }
    if max_excess > SPECTRAL_TOLERANCE {
        return Err(Error::NumericalDegradation { max_imag: 0.0, max_excess });
    }
    Ok(total.max(0.0))
}

/// Upper-left `n x n` block.
pub fn leading_block(m: &CMatrix, n: usize) -> CMatrix {
    m.view((0, 0), (n, n)).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{C64, ONE, ZERO};
    use approx::assert_abs_diff_eq;
    use core::f64::consts::LN_2;

    fn diag(bits: &[u8]) -> CMatrix {
        let n = bits.len();
        CMatrix::from_fn(n, n, |i, j| if i == j && bits[i] == 1 { ONE } else { ZERO })
    }

    #[test]
    fn product_states_have_zero_negativity() {
        for bits in [&[0u8, 1, 1, 0][..], &[1, 1, 1, 1], &[0, 0, 0], &[1, 0, 1, 0, 1, 1]] {
            let d1 = diag(bits);
            for la in 1..bits.len() {
                let e = fermionic_negativity(&d1, Bipartition::new(la, bits.len()).unwrap()).unwrap();
                assert_abs_diff_eq!(e, 0.0, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn shared_fermion_gives_ln2() {
        let d1 = CMatrix::from_element(2, 2, C64::new(0.5, 0.0));
        let (e, spectra) = negativity_with_spectra(&d1, Bipartition::new(1, 2).unwrap()).unwrap();
        assert_abs_diff_eq!(e, LN_2, epsilon = 1e-12);
        for mu in spectra.mu {
            assert_abs_diff_eq!(mu, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn renyi_closed_forms() {
        assert_eq!(renyi_half_entropy(&diag(&[1, 0, 1])).unwrap(), 0.0);
        let half = CMatrix::from_element(1, 1, C64::new(0.5, 0.0));
        assert_abs_diff_eq!(renyi_half_entropy(&half).unwrap(), LN_2, epsilon = 1e-15);
    }

    #[test]
    fn bipartition_bounds() {
        assert!(Bipartition::new(0, 4).is_err());
        assert!(Bipartition::new(4, 4).is_err());
        assert!(Bipartition::half(5).is_err());
        assert_eq!(Bipartition::half(8).unwrap().l_a(), 4);
        assert_eq!(Bipartition::new(3, 8).unwrap().complement().l_a(), 5);
    }

    #[test]
    fn out_of_range_spectrum_is_rejected() {
        let bad = CMatrix::from_fn(2, 2, |i, j| if i == j { C64::new(1.2, 0.0) } else { ZERO });
        assert!(matches!(
            fermionic_negativity(&bad, Bipartition::new(1, 2).unwrap()),
            Err(Error::NumericalDegradation { .. })
        ));
    }
}
