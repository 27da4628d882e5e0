//! Invariants tying the attack constructions to the distinguisher stack:
//! alignment margins, realized advantages, and the scan objective as a
//! Helstrom distance.

mod common;

use common::{random_state, random_unit_vector, rng};
use num_complex::Complex64;
use qsv_core::algebra::{frobenius_inner, Matrix};
use qsv_core::attacks::{
    accept_effect_distinguisher, depolarized_attack_state, dishonest_distinguisher,
    honest_distinguisher, lambda_alignment, measurement_attack_construction, mixed_attack_state,
    pure_attack_state, AttackConstruction,
};
use qsv_core::channels::BlockState;
use qsv_core::metrics::{helstrom, trace_distance_half};
use qsv_core::protocols::{
    filtered_ideal, game_output_object, honest_game_output, iid_game_output, AcceptanceTest,
    RoundDistribution, TargetSpec,
};
use qsv_core::tol;
use qsv_core::verifier::dishonest_objective;
use rand_chacha::ChaCha8Rng;

fn random_pure_target(r: &mut ChaCha8Rng, d: usize) -> TargetSpec {
    TargetSpec::new(vec![d], BlockState::pure(&random_unit_vector(r, d)).unwrap(), 0).unwrap()
}

fn simulated_output(t: &TargetSpec, q: f64) -> BlockState {
    let accept = t.state().block(0).scale(Complex64::new(q, 0.0));
    let abort = Matrix::new(1, 1, vec![Complex64::new(1.0 - q, 0.0)]).unwrap();
    BlockState::new(game_output_object(t), vec![accept, abort]).unwrap()
}

/// The scan objective at `q` is exactly the Helstrom-achievable advantage
/// between the real game output and the simulated one.
#[test]
fn objective_is_the_helstrom_advantage() {
    let mut r = rng(0x0b7e);
    for trial in 0..15 {
        let d = 2 + (trial % 2);
        let t = random_pure_target(&mut r, d);
        let rho = random_state(&mut r, d);
        let test = AcceptanceTest::default_for(&t).unwrap();
        let tests = core::slice::from_ref(&test);
        let dist = RoundDistribution::point_mass(5, 4).unwrap();
        let game = iid_game_output(&t, &dist, tests, &rho).unwrap();
        let half = trace_distance_half(t.state(), &rho).unwrap();
        let atk = AttackConstruction::custom(rho.clone(), half);

        for q in [0.0, 0.31, 0.77, 1.0] {
            let sim = simulated_output(&t, q);
            let f = dishonest_objective(&t, &dist, tests, &atk, q).unwrap();
            let direct = trace_distance_half(&game, &sim).unwrap();
            let meas = helstrom(&game, &sim).unwrap();
            assert!((f - direct).abs() <= tol::REINDEX);
            assert!((meas.advantage() - f).abs() <= tol::METRIC);
        }
    }
}

/// The correctness readout (trace on accept, identity on abort) realizes the
/// honest advantage exactly for exact tests, where it is zero.
#[test]
fn honest_readout_sees_no_gap_for_exact_tests() {
    let mut r = rng(0x40e5);
    for d in [2usize, 3, 4] {
        let t = random_pure_target(&mut r, d);
        let test = AcceptanceTest::default_for(&t).unwrap();
        let dist = RoundDistribution::truncated_geometric(8.0, 60).unwrap();
        let game = honest_game_output(&t, &dist, core::slice::from_ref(&test)).unwrap();
        let ideal = filtered_ideal(&t).apply(&BlockState::unit()).unwrap();

        let readout = honest_distinguisher(&t);
        let a = readout.apply(&game).unwrap();
        let b = readout.apply(&ideal).unwrap();
        // Classical(2) outputs; outcome 0 carries the accept mass.
        let gap = (a.block(0).at(0, 0).re - b.block(0).at(0, 0).re).abs();
        assert!(gap <= tol::REINDEX, "leak at d={d}: {gap:.3e}");
    }
}

/// Every shipped attack construction fires the optimal accept effect at
/// least as often as the target does: the alignment margin is non-negative.
#[test]
fn constructed_attacks_have_nonnegative_alignment() {
    let mut r = rng(0xa119);
    for trial in 0..12 {
        let d = 2 + (trial % 3);
        let t = random_pure_target(&mut r, d);
        let n = [1.0, 4.0, 25.0, 400.0][trial % 4];

        let mut attacks = vec![pure_attack_state(&t, n).unwrap()];
        if d >= 3 {
            attacks.push(measurement_attack_construction(&t, n).unwrap());
        }
        attacks.push(depolarized_attack_state(&t, 0.4).unwrap());

        for atk in attacks {
            let gamma1 = helstrom(t.state(), atk.state()).unwrap().effect1()[0].clone();
            let lambda = lambda_alignment(&gamma1, t.state(), atk.state(), None).unwrap();
            assert!(lambda >= -1e-12, "{:?}: lambda = {lambda:.3e}", atk.kind());
        }
    }
}

/// Mixed-target attacks align too, provided the spectrum has room for the
/// construction.
#[test]
fn mixed_attack_alignment_and_distance() {
    let spectrum = Matrix::diag(&[0.75, 0.25]);
    let t = TargetSpec::new(vec![2], BlockState::single_block(spectrum).unwrap(), 0).unwrap();
    for n in [9.0, 27.0, 81.0] {
        let atk = mixed_attack_state(&t, n).unwrap();
        let gamma1 = helstrom(t.state(), atk.state()).unwrap().effect1()[0].clone();
        let lambda = lambda_alignment(&gamma1, t.state(), atk.state(), None).unwrap();
        assert!(lambda >= -1e-12, "n={n}: lambda = {lambda:.3e}");
        let dist = trace_distance_half(t.state(), atk.state()).unwrap();
        assert!((dist - atk.half_distance()).abs() <= tol::METRIC);
    }
}

/// The security readout built from the Helstrom effect never reports more
/// than the trace distance between the outputs it is fed, and the plain
/// objective dominates the readout's advantage at every scan point.
#[test]
fn readout_advantage_is_capped_by_the_objective() {
    let mut r = rng(0xcafd);
    for trial in 0..10 {
        let d = 2 + (trial % 2);
        let t = random_pure_target(&mut r, d);
        let rho = random_state(&mut r, d);
        let test = AcceptanceTest::default_for(&t).unwrap();
        let tests = core::slice::from_ref(&test);
        let dist = RoundDistribution::point_mass(4, 3).unwrap();
        let game = iid_game_output(&t, &dist, tests, &rho).unwrap();
        let readout = dishonest_distinguisher(&t, &rho).unwrap();
        let half = trace_distance_half(t.state(), &rho).unwrap();
        let atk = AttackConstruction::custom(rho.clone(), half);

        for k in 0..=10 {
            let q = k as f64 / 10.0;
            let f = dishonest_objective(&t, &dist, tests, &atk, q).unwrap();
            let real = readout.apply(&game).unwrap();
            let sim = readout.apply(&simulated_output(&t, q)).unwrap();
            // Outcome 1 fires the accept effect; its weight difference is
            // the realized advantage of this binary readout.
            let adv = (real.block(1).at(0, 0).re - sim.block(1).at(0, 0).re).abs();
            assert!(adv <= f + tol::METRIC, "q={q}: {adv} > {f}");
        }
    }
}

/// The measurement-attack geometry: readout direction `xi` distinguishes
/// attack from target with bias `sin(eta) sin(2 theta - eta)`, realized
/// through the full channel stack.
#[test]
fn measurement_geometry_bias_identity() {
    for (d, n) in [(3usize, 4.0f64), (3, 16.0), (4, 9.0), (5, 25.0)] {
        let mut amps = vec![Complex64::new(0.0, 0.0); d];
        amps[0] = Complex64::new(1.0, 0.0);
        let t = TargetSpec::new(vec![d], BlockState::pure(&amps).unwrap(), 0).unwrap();
        let atk = measurement_attack_construction(&t, n).unwrap();
        let geo = atk.geometry().unwrap();
        let gamma1 = Matrix::projector(geo.xi()).unwrap();

        let predicted = (geo.eta_angle()).sin() * (2.0 * geo.theta() - geo.eta_angle()).sin();
        let on_attack = frobenius_inner(&gamma1, atk.state().block(0)).unwrap().re;
        let on_target = frobenius_inner(&gamma1, t.state().block(0)).unwrap().re;
        assert!(((on_attack - on_target) - predicted).abs() <= tol::METRIC);

        // Through the stack: feed game outputs into the readout channel.
        let readout = accept_effect_distinguisher(&t, &gamma1).unwrap();
        let test = AcceptanceTest::default_for(&t).unwrap();
        let dist = RoundDistribution::point_mass(2, 1).unwrap();
        let game = iid_game_output(&t, &dist, core::slice::from_ref(&test), atk.state()).unwrap();
        let p_accept = frobenius_inner(test.effect(), atk.state().block(0)).unwrap().re;

        let out = readout.apply(&game).unwrap();
        let fired = out.block(1).at(0, 0).re;
        assert!((fired - p_accept * on_attack).abs() <= tol::METRIC);
    }
}

/// Constructor argument validation: sub-single-round counts and out-of-range
/// mixing weights are rejected.
#[test]
fn attack_constructors_reject_bad_parameters() {
    let mut r = rng(0xbad0);
    let t = random_pure_target(&mut r, 3);
    assert!(pure_attack_state(&t, 0.5).is_err());
    assert!(pure_attack_state(&t, f64::NAN).is_err());
    assert!(measurement_attack_construction(&t, 0.0).is_err());
    assert!(depolarized_attack_state(&t, 1.5).is_err());
    assert!(depolarized_attack_state(&t, -0.1).is_err());

    let qubit = random_pure_target(&mut r, 2);
    assert!(measurement_attack_construction(&qubit, 16.0).is_err());
}
