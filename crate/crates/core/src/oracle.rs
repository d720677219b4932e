//! Brute-force Fock-space simulator of the ladder.
//!
//! States are dense amplitude vectors over the `2^(2L)` occupation basis;
//! bit `j` of a basis index is the occupation of mode `j = 2 * site + chain`
//! and fermionic signs follow the Jordan-Wigner string along that order.
//! Only meant for `L <= 4` and used as an independent check of the Gaussian
//! engine and of the correlation-matrix negativity.

use alloc::vec;
use alloc::vec::Vec;

use crate::engine::{MeasurementRecord, Outcome, DEGENERATE_PROBABILITY};
use crate::linalg::{self, CMatrix, C64, I, ONE, ZERO};
use crate::model::ModelParams;
use crate::negativity::Bipartition;
use crate::rng::RngStream;
use crate::{Error, Result};

/// Largest chain length for unitary evolution (`2^8 = 256` amplitudes).
pub const MAX_UNITARY_L: usize = 4;
/// Largest chain length for the Majorana-expansion negativity.
pub const MAX_NEGATIVITY_L: usize = 3;

/// Real-space single-particle Hamiltonian `h` of the ladder, `H = c^dag h c`.
pub fn single_particle_hamiltonian(params: &ModelParams) -> CMatrix {
    let l = params.l;
    let mut h = CMatrix::zeros(2 * l, 2 * l);
    for site in 0..l {
        let next = (site + 1) % l;
        for (chain, t) in [(0, params.t1), (1, params.t2)] {
            let a = 2 * site + chain;
            let b = 2 * next + chain;
            h[(a, b)] += C64::new(t, 0.0);
            h[(b, a)] += C64::new(t, 0.0);
        }
        h[(2 * site, 2 * site + 1)] += C64::new(params.t12, 0.0);
        h[(2 * site + 1, 2 * site)] += C64::new(params.t12, 0.0);
    }
    h
}

/// `exp(-i tau_u h)`, the single-particle propagator by dense exponentiation.
pub fn dense_propagator(params: &ModelParams) -> CMatrix {
    linalg::expm_hermitian(&single_particle_hamiltonian(params), params.tau_u)
}

fn parity_below(state: usize, mode: usize) -> bool {
    (state & ((1usize << mode) - 1)).count_ones() % 2 == 1
}

/// `c_mode |basis>` as `(new_basis, sign)`, or `None` if the mode is empty.
fn annihilate(basis: usize, mode: usize) -> Option<(usize, f64)> {
    if basis & (1 << mode) == 0 {
        return None;
    }
    let sign = if parity_below(basis, mode) { -1.0 } else { 1.0 };
    Some((basis ^ (1 << mode), sign))
}

/// `c_mode^dag |basis>` as `(new_basis, sign)`, or `None` if occupied.
fn create(basis: usize, mode: usize) -> Option<(usize, f64)> {
    if basis & (1 << mode) != 0 {
        return None;
    }
    let sign = if parity_below(basis, mode) { -1.0 } else { 1.0 };
    Some((basis | (1 << mode), sign))
}

/// Dense state vector over the ladder Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    l: usize,
    modes: usize,
    amplitudes: Vec<C64>,
}

impl FockState {
    /// Basis state with the given mode occupations.
    pub fn from_occupations(occupied: &[bool]) -> Result<Self> {
        let modes = occupied.len();
        if modes % 2 != 0 {
            return Err(Error::DimensionMismatch { expected: modes + 1, found: modes });
        }
        let l = modes / 2;
        guard(l, MAX_UNITARY_L)?;
        let mut amplitudes = vec![ZERO; 1 << modes];
        let index = occupied.iter().enumerate().fold(0usize, |acc, (i, &o)| acc | ((o as usize) << i));
        amplitudes[index] = ONE;
        Ok(FockState { l, modes, amplitudes })
    }

    /// Normalised state from raw amplitudes over `2^(2L)` basis states.
    pub fn from_amplitudes(l: usize, amplitudes: Vec<C64>) -> Result<Self> {
        guard(l, MAX_UNITARY_L)?;
        if amplitudes.len() != 1 << (2 * l) {
            return Err(Error::DimensionMismatch { expected: 1 << (2 * l), found: amplitudes.len() });
        }
        let mut s = FockState { l, modes: 2 * l, amplitudes };
        if !(s.norm() > 0.0) {
            return Err(Error::params("amplitudes", "zero vector"));
        }
        s.normalize();
        Ok(s)
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.amplitudes.iter().map(|a| a.norm_sqr()).sum())
    }

    fn normalize(&mut self) {
        let n = self.norm();
        for a in &mut self.amplitudes {
            *a /= n;
        }
    }

    /// `<n_mode>`.
    pub fn occupation(&self, mode: usize) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(b, _)| b & (1 << mode) != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// `<c_i^dag c_j>` for all mode pairs.
    pub fn correlation_matrix(&self) -> CMatrix {
        let mut d = CMatrix::zeros(self.modes, self.modes);
        for (basis, &amp) in self.amplitudes.iter().enumerate() {
            if amp == ZERO {
                continue;
            }
            for j in 0..self.modes {
                let Some((b1, s1)) = annihilate(basis, j) else { continue };
                for i in 0..self.modes {
                    let Some((b2, s2)) = create(b1, i) else { continue };
                    d[(i, j)] += self.amplitudes[b2].conj() * amp * (s1 * s2);
                }
            }
        }
        d
    }

    /// `<c_i^dag c_j^dag c_k c_l>`.
    pub fn four_point(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        let mut acc = ZERO;
        for (basis, &amp) in self.amplitudes.iter().enumerate() {
            if amp == ZERO {
                continue;
            }
            let chain = annihilate(basis, l)
                .and_then(|(b, s)| annihilate(b, k).map(|(b, s2)| (b, s * s2)))
                .and_then(|(b, s)| create(b, j).map(|(b, s2)| (b, s * s2)))
                .and_then(|(b, s)| create(b, i).map(|(b, s2)| (b, s * s2)));
            if let Some((b, s)) = chain {
                acc += self.amplitudes[b].conj() * amp * s;
            }
        }
        acc
    }

    /// Applies `n_mode` or `1 - n_mode` and renormalises; returns the Born
    /// probability of the outcome before projection.
    fn project(&mut self, mode: usize, outcome: Outcome) -> f64 {
        let keep = outcome == Outcome::Occupied;
        let p = self.occupation(mode);
        let prob = if keep { p } else { 1.0 - p };
        for (basis, a) in self.amplitudes.iter_mut().enumerate() {
            if (basis & (1 << mode) != 0) != keep {
                *a = ZERO;
            }
        }
        if prob > 0.0 {
            self.normalize();
        }
        prob
    }
}

fn guard(l: usize, max: usize) -> Result<()> {
    if l > max {
        return Err(Error::DimensionGuard { l, max });
    }
    Ok(())
}

/// Many-body Hamiltonian `sum_ab h_ab c_a^dag c_b` as a dense matrix.
pub fn many_body_hamiltonian(params: &ModelParams) -> Result<CMatrix> {
    guard(params.l, MAX_UNITARY_L)?;
    let h = single_particle_hamiltonian(params);
    let modes = 2 * params.l;
    let dim = 1usize << modes;
    let mut big = CMatrix::zeros(dim, dim);
    for basis in 0..dim {
        for b in 0..modes {
            let Some((b1, s1)) = annihilate(basis, b) else { continue };
            for a in 0..modes {
                if h[(a, b)] == ZERO {
                    continue;
                }
                let Some((b2, s2)) = create(b1, a) else { continue };
                big[(b2, basis)] += h[(a, b)] * (s1 * s2);
            }
        }
    }
    Ok(big)
}

/// Many-body `exp(-i tau_u H)`, computed once and applied to many states.
#[derive(Debug, Clone)]
pub struct FockPropagator {
    unitary: CMatrix,
}

impl FockPropagator {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let big = many_body_hamiltonian(params)?;
        Ok(FockPropagator { unitary: linalg::expm_hermitian(&big, params.tau_u) })
    }

    pub fn apply(&self, state: &mut FockState) -> Result<()> {
        if state.amplitudes.len() != self.unitary.nrows() {
            return Err(Error::DimensionMismatch { expected: self.unitary.nrows(), found: state.amplitudes.len() });
        }
        let v = CMatrix::from_column_slice(state.amplitudes.len(), 1, &state.amplitudes);
        let out = linalg::matmul(&self.unitary, &v);
        state.amplitudes.copy_from_slice(out.as_slice());
        Ok(())
    }
}

/// One unitary interval applied to `state`.
pub fn oracle_unitary(state: &FockState, params: &ModelParams) -> Result<FockState> {
    let mut out = state.clone();
    FockPropagator::new(params)?.apply(&mut out)?;
    Ok(out)
}

/// Replays a recorded measurement sweep, failing if a recorded outcome has
/// (numerically) zero Born probability in this state.
pub fn oracle_measure_record(state: &mut FockState, record: &MeasurementRecord) -> Result<()> {
    for m in &record.entries {
        let mode = 2 * m.site + m.chain;
        let prob = state.clone().project(mode, m.outcome);
        if prob < 1e-10 {
            return Err(Error::OracleDisagreement { mode, outcome: m.outcome as u8, probability: prob });
        }
        state.project(mode, m.outcome);
    }
    Ok(())
}

/// A measurement sweep driven by the random stream, consuming draws with
/// the same discipline as the Gaussian engine.
pub fn oracle_measure(state: &mut FockState, params: &ModelParams, rng: &mut RngStream) -> MeasurementRecord {
    use crate::engine::Measurement;
    let mut record = MeasurementRecord::default();
    for chain in 0..2 {
        let p = params.probability(chain);
        for site in 0..state.l {
            if rng.uniform() > p {
                continue;
            }
            let q = rng.uniform();
            let mode = 2 * site + chain;
            let n = state.occupation(mode).clamp(0.0, 1.0);
            let outcome = if n < DEGENERATE_PROBABILITY {
                Outcome::Empty
            } else if n > 1.0 - DEGENERATE_PROBABILITY || q <= n {
                Outcome::Occupied
            } else {
                Outcome::Empty
            };
            state.project(mode, outcome);
            record.entries.push(Measurement { site, chain, outcome });
        }
    }
    record
}

/// Operator on the system-only Fock space (`2^L`), JW order by site.
fn system_majorana(l: usize, index: usize) -> CMatrix {
    let dim = 1usize << l;
    let mode = index / 2;
    let mut m = CMatrix::zeros(dim, dim);
    for basis in 0..dim {
        // gamma_{2j} = c + c^dag, gamma_{2j+1} = i (c - c^dag)
        if let Some((b, s)) = annihilate(basis, mode) {
            m[(b, basis)] += if index % 2 == 0 { C64::new(s, 0.0) } else { I * s };
        }
        if let Some((b, s)) = create(basis, mode) {
            m[(b, basis)] += if index % 2 == 0 { C64::new(s, 0.0) } else { -I * s };
        }
    }
    m
}

/// Applies system Majorana `index` (system mode `index / 2`, full-space mode
/// `2 * (index / 2)`) to a full-space amplitude vector.
fn apply_full_majorana(amps: &[C64], index: usize) -> Vec<C64> {
    let mode = 2 * (index / 2);
    let mut out = vec![ZERO; amps.len()];
    for (basis, &a) in amps.iter().enumerate() {
        if a == ZERO {
            continue;
        }
        if let Some((b, s)) = annihilate(basis, mode) {
            out[b] += a * if index % 2 == 0 { C64::new(s, 0.0) } else { I * s };
        }
        if let Some((b, s)) = create(basis, mode) {
            out[b] += a * if index % 2 == 0 { C64::new(s, 0.0) } else { -I * s };
        }
    }
    out
}

/// Reduced system density matrix `2^-L sum_kappa <M_kappa^dag> M_kappa` in
/// Majorana monomials. With a bipartition each term also gets the factor
/// `i^{|kappa_A|}` of the partial time reversal on block `A`.
fn system_density_matrix(state: &FockState, part: Option<Bipartition>) -> CMatrix {
    let l = state.l;
    let n_maj = 2 * l;
    let dim = 1usize << l;
    let majoranas: Vec<CMatrix> = (0..n_maj).map(|x| system_majorana(l, x)).collect();
    let a_majoranas = part.map_or(0, |p| 2 * p.l_a());
    let mut rho = CMatrix::zeros(dim, dim);
    for kappa in 0usize..(1 << n_maj) {
        if kappa.count_ones() % 2 == 1 {
            // Number-conserving states have no odd monomials.
            continue;
        }
        // M = gamma_{x1} gamma_{x2} ... gamma_{xk} with x ascending; the
        // ket is hit by gamma_{xk} first.
        let mut monomial = CMatrix::identity(dim, dim);
        let mut applied = state.amplitudes.clone();
        for x in (0..n_maj).rev() {
            if kappa & (1 << x) != 0 {
                applied = apply_full_majorana(&applied, x);
            }
        }
        for x in 0..n_maj {
            if kappa & (1 << x) != 0 {
                monomial = linalg::matmul(&monomial, &majoranas[x]);
            }
        }
        let expectation_m: C64 =
            state.amplitudes.iter().zip(applied.iter()).map(|(a, b)| a.conj() * b).sum();
        // Coefficient of M in rho is 2^-L <M^dag> = 2^-L conj(<M>).
        let mut weight = expectation_m.conj() / dim as f64;
        if part.is_some() {
            let in_a = (kappa & ((1usize << a_majoranas) - 1)).count_ones();
            weight *= match in_a % 4 {
                0 => ONE,
                1 => I,
                2 => -ONE,
                _ => -I,
            };
        }
        if weight == ZERO {
            continue;
        }
        rho += monomial * weight;
    }
    rho
}

/// Reduced density matrix of the system chain (`2^L x 2^L`).
pub fn reduced_system_state(state: &FockState) -> Result<CMatrix> {
    guard(state.l, MAX_NEGATIVITY_L)?;
    Ok(system_density_matrix(state, None))
}

/// `Tr(rho c_i^dag c_j)` for a system-space density matrix with JW order by
/// site.
pub fn system_correlation(rho: &CMatrix, l: usize) -> CMatrix {
    let dim = 1usize << l;
    let mut d = CMatrix::zeros(l, l);
    for basis in 0..dim {
        for j in 0..l {
            let Some((b1, s1)) = annihilate(basis, j) else { continue };
            for i in 0..l {
                let Some((b2, s2)) = create(b1, i) else { continue };
                // <b2| c_i^dag c_j |basis> = s1 s2, contributes rho[basis, b2].
                d[(i, j)] += rho[(basis, b2)] * (s1 * s2);
            }
        }
    }
    d
}

/// `ln Tr sqrt(rho^R (rho^R)^dag)` from the dense partial time reversal of
/// the reduced system state.
pub fn oracle_negativity(state: &FockState, part: Bipartition) -> Result<f64> {
    guard(state.l, MAX_NEGATIVITY_L)?;
    if part.l() != state.l {
        return Err(Error::DimensionMismatch { expected: state.l, found: part.l() });
    }
    let rho_r = system_density_matrix(state, Some(part));
    let trace_norm: f64 = rho_r.singular_values().iter().sum();
    Ok(libm::log(trace_norm).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{LN_2, PI};

    #[test]
    fn guards_reject_large_systems() {
        let bits = vec![false; 10];
        assert!(matches!(FockState::from_occupations(&bits), Err(Error::DimensionGuard { .. })));
        let p = ModelParams { l: 5, ..ModelParams::default() };
        assert!(many_body_hamiltonian(&p).is_err());
        let s = FockState::from_occupations(&[true, false, false, true, true, false, false, true]).unwrap();
        assert!(oracle_negativity(&s, Bipartition::new(2, 4).unwrap()).is_err());
    }

    #[test]
    fn zero_time_leaves_state() {
        // exp(0 * H) = 1; tau_u = 0 is only reachable by building directly.
        let p = ModelParams { l: 2, tau_u: 1.0, t1: 0.0, t2: 0.0, t12: 0.0, ..ModelParams::default() };
        let s = FockState::from_occupations(&[true, false, false, true]).unwrap();
        let out = oracle_unitary(&s, &p).unwrap();
        assert!(out.amplitudes().iter().zip(s.amplitudes()).all(|(a, b)| (a - b).norm() < 1e-14));
    }

    #[test]
    fn basis_state_measurement_reads_occupations() {
        let p = ModelParams { l: 2, p1: 1.0, p2: 1.0, ..ModelParams::default() };
        let mut s = FockState::from_occupations(&[true, false, false, true]).unwrap();
        let before = s.clone();
        let mut rng = RngStream::new(9);
        let rec = oracle_measure(&mut s, &p, &mut rng);
        assert_eq!(s, before);
        let outs: Vec<u8> = rec.entries.iter().map(|m| m.outcome as u8).collect();
        assert_eq!(outs, vec![1, 0, 0, 1]);
    }

    #[test]
    fn single_particle_sector_matches_propagator() {
        let p = ModelParams { l: 3, t1: 1.0, t2: 2.3, t12: 0.8, tau_u: 0.9, ..ModelParams::default() };
        let u1 = dense_propagator(&p);
        let fp = FockPropagator::new(&p).unwrap();
        for start in 0..6 {
            let mut bits = vec![false; 6];
            bits[start] = true;
            let mut s = FockState::from_occupations(&bits).unwrap();
            fp.apply(&mut s).unwrap();
            for target in 0..6 {
                // <target| U |start> in one-particle sector = u1[target, start].
                let amp = s.amplitudes()[1 << target];
                assert!((amp - u1[(target, start)]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn shared_fermion_negativity_is_ln2() {
        // L = 2 ladder: state (c_{0,0}^dag + c_{1,0}^dag)/sqrt2 |0>, modes 0 and 2.
        let mut s = FockState::from_occupations(&[false; 4]).unwrap();
        s.amplitudes = vec![ZERO; 16];
        s.amplitudes[1 << 0] = C64::new(1.0 / libm::sqrt(2.0), 0.0);
        s.amplitudes[1 << 2] = C64::new(1.0 / libm::sqrt(2.0), 0.0);
        let e = oracle_negativity(&s, Bipartition::new(1, 2).unwrap()).unwrap();
        assert!((e - LN_2).abs() < 1e-12, "{e}");
        let product = FockState::from_occupations(&[true, false, false, true]).unwrap();
        assert!(oracle_negativity(&product, Bipartition::new(1, 2).unwrap()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn reduced_state_is_normalised_and_matches_correlations() {
        let p = ModelParams { l: 3, t1: 1.0, t2: 3.0, t12: PI / 2.0, ..ModelParams::default() };
        let mut s = FockState::from_occupations(&[true, false, true, true, false, false]).unwrap();
        s = oracle_unitary(&s, &p).unwrap();
        let rho = reduced_system_state(&s).unwrap();
        let tr: C64 = (0..8).map(|i| rho[(i, i)]).sum();
        assert!((tr - ONE).norm() < 1e-12);
        // <n_site> from rho equals the full-state occupation of mode 2*site.
        for site in 0..3 {
            let n: f64 = (0..8usize).filter(|b| b & (1 << site) != 0).map(|b| rho[(b, b)].re).sum();
            assert!((n - s.occupation(2 * site)).abs() < 1e-12);
        }
    }
}
