//! Correlation-matrix state of one trajectory and its two update channels.

use alloc::vec::Vec;

use crate::linalg::{self, CMatrix, C64, ONE, ZERO};
use crate::model::{Geometry, ModelParams, Propagator};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Born probabilities closer than this to 0 or 1 are treated as certain.
pub const DEGENERATE_PROBABILITY: f64 = 1e-12;

/// How the initial product state distributes particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Filling {
    /// `L` particles among all `2L` ladder modes, uniformly.
    #[default]
    Global,
    /// `L/2` particles in each chain, uniformly within each chain.
    PerChain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Outcome {
    Empty = 0,
    Occupied = 1,
}

impl Outcome {
    pub fn as_f64(self) -> f64 {
        self as u8 as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Measurement {
    pub site: usize,
    pub chain: usize,
    pub outcome: Outcome,
}

/// Outcomes of one measurement sweep, in sweep order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MeasurementRecord {
    pub entries: Vec<Measurement>,
}

impl MeasurementRecord {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `D_{ij} = <c_i^dag c_j>` over all modes of the geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    matrix: CMatrix,
    l: usize,
    geometry: Geometry,
}

impl CorrelationMatrix {
    /// Product state with the given mode occupations.
    pub fn from_occupations(l: usize, geometry: Geometry, occupied: &[bool]) -> Result<Self> {
        let n = geometry.modes(l);
        if occupied.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: occupied.len() });
        }
        let mut matrix = CMatrix::zeros(n, n);
        for (i, &o) in occupied.iter().enumerate() {
            if o {
                matrix[(i, i)] = ONE;
            }
        }
        Ok(CorrelationMatrix { matrix, l, geometry })
    }

    /// Wraps an arbitrary matrix; the caller guarantees it is a valid
    /// correlation matrix.
    pub fn from_matrix(l: usize, geometry: Geometry, matrix: CMatrix) -> Result<Self> {
        let n = geometry.modes(l);
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: matrix.nrows() });
        }
        Ok(CorrelationMatrix { matrix, l, geometry })
    }

    /// Random ladder product state at global half filling: `L` of the `2L`
    /// modes occupied, uniformly among all such bitstrings.
    pub fn init_half_filling(l: usize, rng: &mut RngStream) -> Self {
        Self::init(l, Geometry::Ladder, Filling::Global, rng)
            .expect("global filling is defined for every L")
    }

    /// Random product state.
    ///
    /// For [`Geometry::SingleChain`] a ladder bitstring is drawn with the
    /// requested filling and its system-chain part is kept, so the single
    /// chain starts from the same marginal distribution as the ladder's
    /// system chain.
    pub fn init(l: usize, geometry: Geometry, filling: Filling, rng: &mut RngStream) -> Result<Self> {
        let ladder = sample_ladder_bitstring(l, filling, rng)?;
        let occupied: Vec<bool> = match geometry {
            Geometry::Ladder => ladder,
            Geometry::SingleChain => ladder.iter().step_by(2).copied().collect(),
        };
        Self::from_occupations(l, geometry, &occupied)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Sites per chain.
    pub fn l(&self) -> usize {
        self.l
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn modes(&self) -> usize {
        self.matrix.nrows()
    }

    /// Mode index of `(site, chain)`.
    pub fn mode(&self, site: usize, chain: usize) -> usize {
        self.geometry.chains() * site + chain
    }

    pub fn trace(&self) -> f64 {
        (0..self.modes()).map(|i| self.matrix[(i, i)].re).sum()
    }

    /// `||D^2 - D||_max`.
    pub fn purity_defect(&self) -> f64 {
        linalg::max_abs_diff(&linalg::matmul(&self.matrix, &self.matrix), &self.matrix)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(&self.matrix)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut h = self.matrix.clone();
        linalg::hermitize(&mut h);
        linalg::hermitian_eigenvalues(&h)
    }

    /// `<n_mode>` clamped to `[0, 1]`.
    pub fn occupation(&self, mode: usize) -> f64 {
        self.matrix[(mode, mode)].re.clamp(0.0, 1.0)
    }

    pub fn hermitize(&mut self) {
        linalg::hermitize(&mut self.matrix);
    }

    /// `D <- R^dag D R`.
    pub fn unitary_step(&mut self, propagator: &Propagator) -> Result<()> {
        if propagator.dim() != self.modes() || propagator.geometry() != self.geometry {
            return Err(Error::DimensionMismatch { expected: self.modes(), found: propagator.dim() });
        }
        let left = linalg::matmul(propagator.adjoint(), &self.matrix);
        self.matrix = linalg::matmul(&left, propagator.matrix());
        Ok(())
    }

    /// Applies the projector `n_mode` (occupied) or `1 - n_mode` (empty) and
    /// renormalises. Returns `false` when the Born probability of the
    /// requested outcome is below [`DEGENERATE_PROBABILITY`], in which case
    /// nothing is changed.
    pub fn project(&mut self, mode: usize, outcome: Outcome) -> bool {
        let n = self.occupation(mode);
        let weight = match outcome {
            Outcome::Occupied => n,
            Outcome::Empty => 1.0 - n,
        };
        if weight < DEGENERATE_PROBABILITY {
            return false;
        }
        let dim = self.modes();
        // Column m of D; row m is its conjugate for Hermitian D.
        let mut v: Vec<C64> = (0..dim).map(|i| self.matrix[(i, mode)]).collect();
        let scale = match outcome {
            // D - v v^dag / n
            Outcome::Occupied => -1.0 / weight,
            // D + u u^dag / (1 - n), u = e_m - v
            Outcome::Empty => {
                for (i, vi) in v.iter_mut().enumerate() {
                    *vi = if i == mode { ONE - *vi } else { -*vi };
                }
                1.0 / weight
            }
        };
        for j in 0..dim {
            let vj = v[j].conj() * scale;
            if vj == ZERO {
                continue;
            }
            for (i, vi) in v.iter().enumerate() {
                self.matrix[(i, j)] += vi * vj;
            }
        }
        // Row and column m are exactly outcome * e_m after either update.
        for i in 0..dim {
            self.matrix[(i, mode)] = ZERO;
            self.matrix[(mode, i)] = ZERO;
        }
        self.matrix[(mode, mode)] = C64::new(outcome.as_f64(), 0.0);
        true
    }

    /// One stochastic measurement sweep.
    ///
    /// Sites are visited chain by chain (system chain sites `0..L`, then the
    /// ancilla). Per site a draw `z` decides whether to measure (`z <= p`);
    /// if so a second draw `q` selects the outcome (`q <= <n>` means
    /// occupied). Born probabilities within [`DEGENERATE_PROBABILITY`] of 0
    /// or 1 fix the outcome and skip the update.
    pub fn measure_sweep(&mut self, params: &ModelParams, rng: &mut RngStream) -> MeasurementRecord {
        let mut record = MeasurementRecord::default();
        for chain in 0..self.geometry.chains() {
            let p = params.probability(chain);
            for site in 0..self.l {
                if rng.uniform() > p {
                    continue;
                }
                let q = rng.uniform();
                let mode = self.mode(site, chain);
                let n = self.occupation(mode);
                let outcome = if n < DEGENERATE_PROBABILITY {
                    Outcome::Empty
                } else if n > 1.0 - DEGENERATE_PROBABILITY {
                    Outcome::Occupied
                } else if q <= n {
                    Outcome::Occupied
                } else {
                    Outcome::Empty
                };
                let degenerate = !(DEGENERATE_PROBABILITY..=1.0 - DEGENERATE_PROBABILITY).contains(&n);
                if degenerate {
                    self.matrix[(mode, mode)] = C64::new(outcome.as_f64(), 0.0);
                } else {
                    self.project(mode, outcome);
                }
                record.entries.push(Measurement { site, chain, outcome });
            }
        }
        for m in &record.entries {
            let mode = self.mode(m.site, m.chain);
            self.matrix[(mode, mode)] = C64::new(m.outcome.as_f64(), 0.0);
        }
        record
    }
}

/// Uniformly random ladder occupation bitstring (length `2L`, mode order).
fn sample_ladder_bitstring(l: usize, filling: Filling, rng: &mut RngStream) -> Result<Vec<bool>> {
    let mut occupied = alloc::vec![false; 2 * l];
    match filling {
        Filling::Global => {
            for mode in choose(2 * l, l, rng) {
                occupied[mode] = true;
            }
        }
        Filling::PerChain => {
            if l % 2 != 0 {
                return Err(Error::params("L", "per-chain half filling needs even L"));
            }
            for chain in 0..2 {
                for site in choose(l, l / 2, rng) {
                    occupied[2 * site + chain] = true;
                }
            }
        }
    }
    Ok(occupied)
}

/// `k` distinct indices of `0..n` by a partial Fisher-Yates shuffle.
fn choose(n: usize, k: usize, rng: &mut RngStream) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.below((n - i) as u64) as usize;
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}
