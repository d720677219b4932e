//! Single trajectories and trajectory ensembles.
//!
//! A trajectory starts from a random half-filled product state and repeats
//! `N_st + m` cycles of unitary evolution followed by a measurement sweep.
//! The negativity of the system chain is evaluated at the end of each of
//! the final `m` cycles and averaged; the ensemble averages these steady
//! means over independently seeded trajectories.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::engine::{CorrelationMatrix, Filling, MeasurementRecord};
use crate::model::{Geometry, ModelParams, Propagator};
use crate::negativity::{self, Bipartition};
use crate::rng::{derive_seed, RngStream};
use crate::{Error, Result};

/// Which cycles get a negativity evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecordPolicy {
    /// Only the final `m` cycles.
    #[default]
    SteadyOnly,
    /// Every cycle; for debugging and relaxation studies.
    Full,
}

/// Knobs that do not belong to the physical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrajectoryOptions {
    pub geometry: Geometry,
    pub filling: Filling,
    pub record: RecordPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryResult {
    /// Negativity (nats) at the recorded cycles, in cycle order.
    pub negativity_series: Vec<f64>,
    /// Mean of the last `m` entries of the series.
    pub steady_mean: f64,
    pub seed: u64,
    pub record_policy: RecordPolicy,
}

/// Mutable state of one trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory<'a> {
    params: &'a ModelParams,
    propagator: &'a Propagator,
    state: CorrelationMatrix,
    rng: RngStream,
    cycles: usize,
}

impl<'a> Trajectory<'a> {
    /// Draws the initial bitstring from a fresh stream seeded with `seed`.
    pub fn new(
        params: &'a ModelParams,
        propagator: &'a Propagator,
        filling: Filling,
        seed: u64,
    ) -> Result<Self> {
        if !propagator.matches(params) {
            return Err(Error::params("propagator", "built for different parameters"));
        }
        let mut rng = RngStream::new(seed);
        let state = CorrelationMatrix::init(params.l, propagator.geometry(), filling, &mut rng)?;
        Ok(Trajectory { params, propagator, state, rng, cycles: 0 })
    }

    /// Starts from a given state; the stream is still seeded with `seed`.
    pub fn from_state(
        params: &'a ModelParams,
        propagator: &'a Propagator,
        state: CorrelationMatrix,
        seed: u64,
    ) -> Result<Self> {
        if !propagator.matches(params) {
            return Err(Error::params("propagator", "built for different parameters"));
        }
        if state.l() != params.l || state.geometry() != propagator.geometry() {
            return Err(Error::DimensionMismatch { expected: propagator.dim(), found: state.modes() });
        }
        Ok(Trajectory { params, propagator, state, rng: RngStream::new(seed), cycles: 0 })
    }

    pub fn state(&self) -> &CorrelationMatrix {
        &self.state
    }

    pub fn rng(&self) -> &RngStream {
        &self.rng
    }

    pub fn cycles(&self) -> usize {
        self.cycles
    }

    /// One cycle: unitary step, measurement sweep, re-Hermitization.
    pub fn step(&mut self) -> Result<MeasurementRecord> {
        self.state.unitary_step(self.propagator)?;
        let record = self.state.measure_sweep(self.params, &mut self.rng);
        self.state.hermitize();
        self.cycles += 1;
        Ok(record)
    }

    /// Negativity of the current system-chain state.
    pub fn negativity(&self, part: Bipartition) -> Result<f64> {
        negativity::fermionic_negativity(&negativity::reduce_to_system(&self.state), part)
    }
}

/// One trajectory of the ladder with default options.
pub fn run_trajectory(params: &ModelParams, part: Bipartition, seed: u64) -> Result<TrajectoryResult> {
    let propagator = Propagator::new(params)?;
    run_trajectory_with(params, part, seed, &propagator, TrajectoryOptions::default())
}

/// One trajectory with a prebuilt propagator, whose geometry must match
/// `options.geometry`.
pub fn run_trajectory_with(
    params: &ModelParams,
    part: Bipartition,
    seed: u64,
    propagator: &Propagator,
    options: TrajectoryOptions,
) -> Result<TrajectoryResult> {
    params.validate()?;
    if part.l() != params.l {
        return Err(Error::InvalidBipartition { l_a: part.l_a(), l: params.l });
    }
    if propagator.geometry() != options.geometry {
        return Err(Error::params("geometry", "propagator geometry differs from the requested one"));
    }
    let mut traj = Trajectory::new(params, propagator, options.filling, seed)?;
    let total = params.n_st + params.m;
    let mut series = Vec::with_capacity(match options.record {
        RecordPolicy::SteadyOnly => params.m,
        RecordPolicy::Full => total,
    });
    for cycle in 0..total {
        traj.step()?;
        let recorded = match options.record {
            RecordPolicy::Full => true,
            RecordPolicy::SteadyOnly => cycle >= params.n_st,
        };
        if recorded {
            series.push(traj.negativity(part)?);
        }
    }
    let tail = &series[series.len() - params.m..];
    let steady_mean = tail.iter().sum::<f64>() / params.m as f64;
    Ok(TrajectoryResult { negativity_series: series, steady_mean, seed, record_policy: options.record })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub mean: f64,
    pub sem: f64,
    /// Number of trajectories that entered the average.
    pub n_traj: usize,
    pub params: ModelParams,
    pub l_a: usize,
}

/// Mean and standard error over the steady means of `results`, given in
/// trajectory-index order.
///
/// Failed trajectories are dropped as long as they are at most 1% of the
/// total; otherwise the ensemble fails with the first error.
pub fn aggregate(
    params: &ModelParams,
    part: Bipartition,
    results: Vec<Result<TrajectoryResult>>,
) -> Result<EnsembleResult> {
    let total = results.len();
    if total == 0 {
        return Err(Error::InsufficientData { what: "trajectories", needed: 1, got: 0 });
    }
    let mut values = Vec::with_capacity(total);
    let mut failed = 0usize;
    let mut first = None;
    for r in results {
        match r {
            Ok(t) => values.push(t.steady_mean),
            Err(e) => {
                failed += 1;
                first.get_or_insert(e);
            }
        }
    }
    if let Some(first) = first {
        if failed * 100 > total || values.is_empty() {
            return Err(Error::EnsembleFailed { failed, total, first: Box::new(first) });
        }
    }
    let (mean, sem) = mean_sem(&values);
    Ok(EnsembleResult { mean, sem, n_traj: values.len(), params: *params, l_a: part.l_a() })
}

/// Arithmetic mean (kept within the sample range) and standard error.
pub fn mean_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = (values.iter().sum::<f64>() / n).clamp(lo, hi);
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var / n))
}

/// Trajectory `index` of an ensemble, with its seed and index attached to
/// any error.
pub fn run_indexed(
    params: &ModelParams,
    part: Bipartition,
    master_seed: u64,
    index: usize,
    propagator: &Propagator,
    options: TrajectoryOptions,
) -> Result<TrajectoryResult> {
    let seed = derive_seed(master_seed, index as u64);
    run_trajectory_with(params, part, seed, propagator, options)
        .map_err(|e| Error::Trajectory { index, seed, source: Box::new(e) })
}

/// Sequential ensemble of `n_traj` ladder trajectories.
pub fn run_ensemble(
    params: &ModelParams,
    part: Bipartition,
    n_traj: usize,
    master_seed: u64,
) -> Result<EnsembleResult> {
    run_ensemble_with(params, part, n_traj, master_seed, TrajectoryOptions::default())
}

pub fn run_ensemble_with(
    params: &ModelParams,
    part: Bipartition,
    n_traj: usize,
    master_seed: u64,
    options: TrajectoryOptions,
) -> Result<EnsembleResult> {
    if n_traj == 0 {
        return Err(Error::params("n_traj", "must be at least 1"));
    }
    params.validate()?;
    let propagator = Propagator::with_geometry(params, options.geometry)?;
    let results = (0..n_traj)
        .map(|i| run_indexed(params, part, master_seed, i, &propagator, options))
        .collect();
    aggregate(params, part, results)
}
