//! Gaussian engine against the dense Fock-space simulator.

use fermiladder_core::linalg::{self, CMatrix};
use fermiladder_core::negativity::{self, Bipartition};
use fermiladder_core::oracle::{self, FockPropagator, FockState};
use fermiladder_core::rng::RngStream;
use fermiladder_core::trajectory::Trajectory;
use fermiladder_core::{CorrelationMatrix, Filling, Geometry, ModelParams, Propagator};

fn random_params(rng: &mut RngStream, l: usize) -> ModelParams {
    ModelParams {
        l,
        t1: 2.0 * rng.uniform() - 0.5,
        t2: 6.0 * rng.uniform() - 1.0,
        t12: 3.0 * rng.uniform(),
        tau_u: 0.2 + 1.5 * rng.uniform(),
        p1: rng.uniform(),
        p2: rng.uniform(),
        n_st: 1,
        m: 1,
    }
}

fn occupations(d: &CorrelationMatrix) -> Vec<bool> {
    (0..d.modes()).map(|i| d.matrix()[(i, i)].re > 0.5).collect()
}

#[test]
fn replayed_trajectories_agree_cycle_by_cycle() {
    let mut meta = RngStream::new(2024);
    let cuts = [Bipartition::new(1, 3).unwrap(), Bipartition::new(2, 3).unwrap()];
    let (mut worst_d, mut worst_e) = (0.0f64, 0.0f64);
    for set in 0..50 {
        let p = random_params(&mut meta, 3);
        let r = Propagator::new(&p).unwrap();
        let fp = FockPropagator::new(&p).unwrap();
        let mut traj = Trajectory::new(&p, &r, Filling::Global, 1000 + set).unwrap();
        let mut state = FockState::from_occupations(&occupations(traj.state())).unwrap();
        for _ in 0..20 {
            let record = traj.step().unwrap();
            fp.apply(&mut state).unwrap();
            oracle::oracle_measure_record(&mut state, &record).unwrap();
            let diff = linalg::max_abs_diff(traj.state().matrix(), &state.correlation_matrix());
            worst_d = worst_d.max(diff);
            for cut in cuts {
                let e = traj.negativity(cut).unwrap();
                let e_oracle = oracle::oracle_negativity(&state, cut).unwrap();
                worst_e = worst_e.max((e - e_oracle).abs());
            }
        }
    }
    assert!(worst_d < 1e-10, "correlation matrices differ by {worst_d:e}");
    assert!(worst_e < 1e-8, "negativities differ by {worst_e:e}");
}

#[test]
fn shared_draws_give_identical_outcomes() {
    let mut meta = RngStream::new(31);
    for set in 0..20 {
        let p = random_params(&mut meta, 3);
        let r = Propagator::new(&p).unwrap();
        let fp = FockPropagator::new(&p).unwrap();
        let mut init = RngStream::new(set);
        let mut d = CorrelationMatrix::init_half_filling(3, &mut init);
        let mut state = FockState::from_occupations(&occupations(&d)).unwrap();
        let mut rng_engine = RngStream::new(500 + set);
        let mut rng_oracle = rng_engine.clone();
        for _ in 0..20 {
            d.unitary_step(&r).unwrap();
            fp.apply(&mut state).unwrap();
            let a = d.measure_sweep(&p, &mut rng_engine);
            d.hermitize();
            let b = oracle::oracle_measure(&mut state, &p, &mut rng_oracle);
            assert_eq!(a, b);
            assert_eq!(rng_engine.draws(), rng_oracle.draws());
            assert!(linalg::max_abs_diff(d.matrix(), &state.correlation_matrix()) < 1e-10);
        }
    }
}

#[test]
fn system_block_is_the_partial_trace() {
    let mut meta = RngStream::new(8);
    for set in 0..10 {
        let p = random_params(&mut meta, 3);
        let r = Propagator::new(&p).unwrap();
        let fp = FockPropagator::new(&p).unwrap();
        let mut traj = Trajectory::new(&p, &r, Filling::Global, set).unwrap();
        let mut state = FockState::from_occupations(&occupations(traj.state())).unwrap();
        for _ in 0..5 {
            let rec = traj.step().unwrap();
            fp.apply(&mut state).unwrap();
            oracle::oracle_measure_record(&mut state, &rec).unwrap();
        }
        let rho = oracle::reduced_system_state(&state).unwrap();
        let d1_oracle = oracle::system_correlation(&rho, 3);
        let d1 = negativity::reduce_to_system(traj.state());
        assert!(linalg::max_abs_diff(&d1, &d1_oracle) < 1e-10);
    }
}

#[test]
fn evolved_states_satisfy_wick() {
    let mut meta = RngStream::new(77);
    for set in 0..6 {
        let p = random_params(&mut meta, 3);
        let r = Propagator::new(&p).unwrap();
        let fp = FockPropagator::new(&p).unwrap();
        let mut traj = Trajectory::new(&p, &r, Filling::Global, set).unwrap();
        let mut state = FockState::from_occupations(&occupations(traj.state())).unwrap();
        for _ in 0..4 {
            let rec = traj.step().unwrap();
            fp.apply(&mut state).unwrap();
            oracle::oracle_measure_record(&mut state, &rec).unwrap();
        }
        let d = state.correlation_matrix();
        let mut pick = RngStream::new(set + 100);
        for _ in 0..30 {
            let ix: Vec<usize> = (0..4).map(|_| pick.below(6) as usize).collect();
            let (i, j, k, l) = (ix[0], ix[1], ix[2], ix[3]);
            let four = state.four_point(i, j, k, l);
            let wick = d[(i, l)] * d[(j, k)] - d[(i, k)] * d[(j, l)];
            assert!((four - wick).norm() < 1e-8, "({i},{j},{k},{l}) {four} vs {wick}");
        }
    }
}

#[test]
fn propagator_matches_dense_exponential() {
    let mut meta = RngStream::new(4);
    let mut worst = 0.0f64;
    let mut worst_unitarity = 0.0f64;
    for l in [3, 4, 6, 8] {
        for _ in 0..100 {
            let p = random_params(&mut meta, l);
            let r = Propagator::new(&p).unwrap();
            worst = worst.max(linalg::max_abs_diff(r.matrix(), &oracle::dense_propagator(&p)));
            worst_unitarity = worst_unitarity.max(linalg::unitarity_defect(r.matrix()));
        }
    }
    assert!(worst < 1e-9, "{worst:e}");
    assert!(worst_unitarity < 1e-10, "{worst_unitarity:e}");
}

#[test]
fn single_chain_reference_matches_its_own_exponential() {
    let p = ModelParams { l: 6, t1: 1.3, tau_u: 0.7, ..ModelParams::default() };
    let r = Propagator::with_geometry(&p, Geometry::SingleChain).unwrap();
    let mut h = CMatrix::zeros(6, 6);
    for s in 0..6 {
        h[(s, (s + 1) % 6)] += linalg::ONE * p.t1;
        h[((s + 1) % 6, s)] += linalg::ONE * p.t1;
    }
    assert!(linalg::max_abs_diff(r.matrix(), &linalg::expm_hermitian(&h, p.tau_u)) < 1e-12);
}
