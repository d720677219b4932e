//! Ladder parameters and the exact single-particle propagator of one unitary
//! interval.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::Matrix2;

use crate::linalg::{CMatrix, C64, ZERO};
use crate::{Error, Result};

/// Physical and protocol parameters of one ensemble.
///
/// Energies are in units of `t1`; `p1`/`p2` are the per-site, per-cycle
/// measurement probabilities of the system and ancilla chains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Sites per chain.
    pub l: usize,
    pub t1: f64,
    pub t2: f64,
    pub t12: f64,
    pub tau_u: f64,
    pub p1: f64,
    pub p2: f64,
    /// Cycles before the steady-state window.
    pub n_st: usize,
    /// Cycles averaged in the steady-state window.
    pub m: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            l: 8,
            t1: 1.0,
            t2: 1.0,
            t12: PI / 2.0,
            tau_u: 1.0,
            p1: 0.0,
            p2: 0.0,
            n_st: 150,
            m: 5,
        }
    }
}

impl ModelParams {
    /// Checks the parameter invariants.
    ///
    /// Odd `L` is accepted here (the dense oracle runs at `L = 3`); the
    /// half-chain bipartition used by experiments requires even `L` and is
    /// checked by [`crate::Bipartition::half`].
    pub fn validate(&self) -> Result<()> {
        if self.l < 2 {
            return Err(Error::params("L", format!("need at least 2 sites, got {}", self.l)));
        }
        for (name, p) in [("p1", self.p1), ("p2", self.p2)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::params(name, format!("probability {p} outside [0, 1]")));
            }
        }
        for (name, v) in [("t1", self.t1), ("t2", self.t2), ("t12", self.t12)] {
            if !v.is_finite() {
                return Err(Error::params(name, "hopping must be finite"));
            }
        }
        if !(self.tau_u > 0.0 && self.tau_u.is_finite()) {
            return Err(Error::params("tau_u", format!("must be positive, got {}", self.tau_u)));
        }
        if self.n_st < 1 {
            return Err(Error::params("N_st", "need at least one cycle"));
        }
        if self.m < 1 {
            return Err(Error::params("m", "need at least one averaged cycle"));
        }
        Ok(())
    }

    /// Measurement probability of a chain (0 = system, 1 = ancilla).
    pub fn probability(&self, chain: usize) -> f64 {
        if chain == 0 {
            self.p1
        } else {
            self.p2
        }
    }

    /// `t1 + t2`.
    pub fn hopping_sum(&self) -> f64 {
        self.t1 + self.t2
    }

    /// `t1 - t2`.
    pub fn hopping_difference(&self) -> f64 {
        self.t1 - self.t2
    }
}

/// Momentum grid `k_j = 2 pi j / L`, `j = 0..L`, matching periodic boundaries.
pub fn momenta(l: usize) -> Vec<f64> {
    (0..l).map(|j| 2.0 * PI * j as f64 / l as f64).collect()
}

/// Bloch Hamiltonian `[[2 t1 cos k, t12], [t12, 2 t2 cos k]]`.
pub fn bloch_hamiltonian(params: &ModelParams, k: f64) -> Matrix2<f64> {
    let c = libm::cos(k);
    Matrix2::new(2.0 * params.t1 * c, params.t12, params.t12, 2.0 * params.t2 * c)
}

/// Closed-form `exp(-i tau_u H_k)`.
///
/// With `t = t1 + t2`, `delta = t1 - t2` and `w = sqrt(t12^2 + delta^2 cos^2 k)`:
/// `U_k = e^{-i t tau_u cos k} [cos(w tau_u) - i tau_u sinc(w tau_u) (t12 sx + delta cos k sz)]`.
pub fn mode_propagator(params: &ModelParams, k: f64) -> Matrix2<C64> {
    let tau = params.tau_u;
    let c = libm::cos(k);
    let bx = params.t12;
    let bz = params.hopping_difference() * c;
    let w = libm::sqrt(bx * bx + bz * bz);
    let wt = w * tau;
    let cos_wt = libm::cos(wt);
    // sin(w tau) / w, continuous at w = 0.
    let sin_over_w = if wt.abs() < 1e-8 { tau * (1.0 - wt * wt / 6.0) } else { libm::sin(wt) / w };
    let phase = C64::from_polar(1.0, -params.hopping_sum() * tau * c);
    let minus_i = C64::new(0.0, -1.0);
    let diag0 = C64::new(cos_wt, 0.0) + minus_i * (sin_over_w * bz);
    let diag1 = C64::new(cos_wt, 0.0) - minus_i * (sin_over_w * bz);
    let off = minus_i * (sin_over_w * bx);
    Matrix2::new(diag0, off, off, diag1) * phase
}

/// Single-chain dispersion phase `exp(-i tau_u 2 t1 cos k)`.
fn single_chain_phase(params: &ModelParams, k: f64) -> C64 {
    C64::from_polar(1.0, -2.0 * params.t1 * params.tau_u * libm::cos(k))
}

/// Which mode layout a propagator or state refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Geometry {
    /// Both chains, `2L` modes indexed `2 * site + chain`.
    #[default]
    Ladder,
    /// The system chain alone with hopping `t1`, `L` modes. Used as the
    /// decoupled reference.
    SingleChain,
}

impl Geometry {
    pub fn chains(self) -> usize {
        match self {
            Geometry::Ladder => 2,
            Geometry::SingleChain => 1,
        }
    }

    pub fn modes(self, l: usize) -> usize {
        self.chains() * l
    }
}

/// Real-space one-cycle propagator `R`, with `D -> R^dag D R`.
///
/// `R_{(m,s),(n,s')} = (1/L) sum_k e^{-ik(m-n)} (U_k)_{s s'}`.
#[derive(Debug, Clone)]
pub struct Propagator {
    matrix: CMatrix,
    adjoint: CMatrix,
    geometry: Geometry,
    params_hash: u64,
}

impl Propagator {
    /// Ladder propagator for `params`.
    pub fn new(params: &ModelParams) -> Result<Self> {
        Self::with_geometry(params, Geometry::Ladder)
    }

    pub fn with_geometry(params: &ModelParams, geometry: Geometry) -> Result<Self> {
        params.validate()?;
        let l = params.l;
        let chains = geometry.chains();
        let ks = momenta(l);
        let blocks: Vec<Matrix2<C64>> = ks
            .iter()
            .map(|&k| match geometry {
                Geometry::Ladder => mode_propagator(params, k),
                Geometry::SingleChain => {
                    let p = single_chain_phase(params, k);
                    Matrix2::new(p, ZERO, ZERO, ZERO)
                }
            })
            .collect();

        // Displacement blocks B_d = (1/L) sum_k e^{-ikd} U_k.
        let inv_l = 1.0 / l as f64;
        let displacement: Vec<Matrix2<C64>> = (0..l)
            .map(|d| {
                let mut acc = Matrix2::<C64>::zeros();
                for (j, u) in blocks.iter().enumerate() {
                    // Reduce the phase index mod L so that angles stay small.
                    let angle = -2.0 * PI * ((j * d) % l) as f64 * inv_l;
                    acc += u * C64::from_polar(1.0, angle);
                }
                acc * C64::new(inv_l, 0.0)
            })
            .collect();

        let n = geometry.modes(l);
        let mut matrix = CMatrix::zeros(n, n);
        for m in 0..l {
            for nn in 0..l {
                let d = (m + l - nn) % l;
                let b = &displacement[d];
                for s in 0..chains {
                    for s2 in 0..chains {
                        matrix[(chains * m + s, chains * nn + s2)] = b[(s, s2)];
                    }
                }
            }
        }
        let adjoint = matrix.adjoint();
        Ok(Propagator { matrix, adjoint, geometry, params_hash: params_hash(params, geometry) })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn adjoint(&self) -> &CMatrix {
        &self.adjoint
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn params_hash(&self) -> u64 {
        self.params_hash
    }

    /// Whether this propagator was built from parameters with the same
    /// unitary content as `params`.
    pub fn matches(&self, params: &ModelParams) -> bool {
        self.params_hash == params_hash(params, self.geometry)
    }
}

/// FNV-1a over the parameters that determine `R`.
pub fn params_hash(params: &ModelParams, geometry: Geometry) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut feed = |x: u64| {
        for b in x.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    feed(params.l as u64);
    feed(params.t1.to_bits());
    feed(params.t2.to_bits());
    feed(params.t12.to_bits());
    feed(params.tau_u.to_bits());
    feed(match geometry {
        Geometry::Ladder => 2,
        Geometry::SingleChain => 1,
    });
    h
}
