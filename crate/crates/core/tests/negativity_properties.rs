use fermiladder_core::linalg::{self, CMatrix, C64, ONE, ZERO};
use fermiladder_core::negativity::{self, Bipartition};
use fermiladder_core::rng::RngStream;
use fermiladder_core::trajectory::Trajectory;
use fermiladder_core::{Filling, ModelParams, Propagator};
use proptest::prelude::*;

fn random_hermitian(n: usize, rng: &mut RngStream) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| C64::new(rng.uniform() - 0.5, rng.uniform() - 0.5));
    (&a + a.adjoint()).map(|z| z * 0.5)
}

/// Orthonormal orbitals `W` (`n x particles`) of a random Slater determinant.
fn random_orbitals(n: usize, particles: usize, rng: &mut RngStream) -> CMatrix {
    let u = linalg::expm_hermitian(&random_hermitian(n, rng).map(|z| z * 4.0), 1.0);
    u.columns(0, particles).into_owned()
}

/// `D = conj(W) W^T`, i.e. `<c_i^dag c_j> = sum_k conj(W_ik) W_jk`.
fn correlations(w: &CMatrix) -> CMatrix {
    linalg::matmul(&w.map(|z| z.conj()), &w.transpose())
}

fn random_pure_gaussian(n: usize, particles: usize, rng: &mut RngStream) -> CMatrix {
    correlations(&random_orbitals(n, particles, rng))
}

/// Singular values padded with zeros to `k` entries, ascending.
fn padded_singular_values(m: CMatrix, k: usize) -> Vec<f64> {
    let mut s: Vec<f64> = if m.nrows() == 0 { Vec::new() } else { m.singular_values().iter().copied().collect() };
    s.resize(k, 0.0);
    s.sort_by(f64::total_cmp);
    s
}

/// Renyi-1/2 entropy of the first `la` sites. `W_A^dag W_A` and
/// `W_B^dag W_B` have eigenvalues `lambda` and `1 - lambda`, so both square
/// roots come from singular values without cancellation.
fn renyi_from_orbitals(w: &CMatrix, la: usize) -> f64 {
    let k = w.ncols();
    if k == 0 {
        return 0.0;
    }
    let a = padded_singular_values(w.rows(0, la).into_owned(), k);
    let b = padded_singular_values(w.rows(la, w.nrows() - la).into_owned(), k);
    (0..k).map(|i| 2.0 * (a[i] + b[k - 1 - i]).ln()).sum()
}

/// System block of a trajectory midway through relaxation; mixed in general.
fn mixed_system_state(l: usize, seed: u64) -> CMatrix {
    let p = ModelParams { l, t2: 3.0, p1: 0.2, p2: 0.4, ..ModelParams::default() };
    let r = Propagator::new(&p).unwrap();
    let mut traj = Trajectory::new(&p, &r, Filling::Global, seed).unwrap();
    for _ in 0..8 {
        traj.step().unwrap();
    }
    negativity::reduce_to_system(traj.state())
}

#[test]
fn pure_states_match_renyi_half() {
    let mut rng = RngStream::new(99);
    let (mut worst, mut worst_ref) = (0.0f64, 0.0f64);
    for case in 0..100 {
        let n = 2 + case % 7;
        let particles = rng.below(n as u64 + 1) as usize;
        let w = random_orbitals(n, particles, &mut rng);
        let d = correlations(&w);
        for la in 1..n {
            let part = Bipartition::new(la, n).unwrap();
            let e = negativity::fermionic_negativity(&d, part).unwrap();
            let s = negativity::renyi_half_entropy(&negativity::leading_block(&d, la)).unwrap();
            let reference = renyi_from_orbitals(&w, la);
            worst = worst.max((e - s).abs());
            worst_ref = worst_ref.max((e - reference).abs());
        }
    }
    assert!(worst_ref < 1e-7, "against the orbital reference: {worst_ref:e}");
    // Eigenvalues of D_A within rounding of 0 or 1 enter as sqrt(eps) here.
    assert!(worst < 1e-6, "against renyi_half_entropy: {worst:e}");
}

#[test]
fn product_states_have_no_negativity() {
    for bits in 0u32..64 {
        let d = CMatrix::from_fn(6, 6, |i, j| if i == j && bits & (1 << i) != 0 { ONE } else { ZERO });
        for la in 1..6 {
            let e = negativity::fermionic_negativity(&d, Bipartition::new(la, 6).unwrap()).unwrap();
            assert!(e.abs() < 1e-8);
        }
    }
}

#[test]
fn spectra_stay_in_range_on_trajectory_states() {
    for seed in 0..20 {
        let d1 = mixed_system_state(8, seed);
        let (_, s) = negativity::negativity_with_spectra(&d1, Bipartition::half(8).unwrap()).unwrap();
        assert!(s.max_imag < 1e-6 && s.max_excess < 1e-6);
        assert_eq!(s.mu.len(), 8);
        assert_eq!(s.lambda.len(), 8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn swapping_the_blocks_leaves_negativity(seed in any::<u64>(), la in 1usize..8) {
        let d1 = mixed_system_state(8, seed);
        let part = Bipartition::new(la, 8).unwrap();
        let e = negativity::fermionic_negativity(&d1, part).unwrap();
        let swapped = negativity::fermionic_negativity(&negativity::reverse_sites(&d1), part.complement()).unwrap();
        prop_assert!((e - swapped).abs() < 1e-8, "{} vs {}", e, swapped);
    }

    #[test]
    fn negativity_is_nonnegative_and_finite(seed in any::<u64>(), n in 2usize..9) {
        let mut rng = RngStream::new(seed);
        // Convex mixture of two pure states keeps the spectrum in [0, 1].
        let a = random_pure_gaussian(n, n / 2, &mut rng);
        let b = random_pure_gaussian(n, n / 2, &mut rng);
        let d = (a + b).map(|z| z * 0.5);
        let e = negativity::fermionic_negativity(&d, Bipartition::new(n / 2, n).unwrap()).unwrap();
        prop_assert!(e.is_finite() && e >= 0.0);
    }
}
