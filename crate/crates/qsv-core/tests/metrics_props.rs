//! Distance-measure properties on randomized states and channels.

mod common;

use common::{kron_power, random_channel, random_density, random_pure, random_state, rng};
use proptest::prelude::*;
use qsv_core::algebra::frobenius_inner;
use qsv_core::channels::BlockState;
use qsv_core::metrics::{
    advantage, fidelity, fvdg_bounds, helstrom, multicopy_bounds, pure_multicopy_distance,
    trace_distance_half,
};
use qsv_core::tol;
use rand::Rng;

#[test]
fn fidelity_is_symmetric_and_bounded() {
    let mut r = rng(0xf1de);
    for _ in 0..60 {
        let d = r.gen_range(2..=4);
        let a = random_state(&mut r, d);
        let b = random_state(&mut r, d);
        let fab = fidelity(&a, &b).unwrap();
        let fba = fidelity(&b, &a).unwrap();
        assert!((fab - fba).abs() <= tol::METRIC, "asymmetry {:.3e}", (fab - fba).abs());
        assert!((0.0..=1.0).contains(&fab));
        assert!((fidelity(&a, &a).unwrap() - 1.0).abs() <= tol::METRIC);
    }
}

#[test]
fn trace_distance_is_a_metric() {
    let mut r = rng(0x7d15);
    for _ in 0..40 {
        let d = r.gen_range(2..=4);
        let a = random_state(&mut r, d);
        let b = random_state(&mut r, d);
        let c = random_state(&mut r, d);
        let tab = trace_distance_half(&a, &b).unwrap();
        let tba = trace_distance_half(&b, &a).unwrap();
        let tac = trace_distance_half(&a, &c).unwrap();
        let tcb = trace_distance_half(&c, &b).unwrap();
        assert!((tab - tba).abs() <= tol::METRIC);
        assert!((0.0..=1.0 + tol::METRIC).contains(&tab));
        assert!(tab <= tac + tcb + tol::METRIC, "triangle violated");
        assert!(trace_distance_half(&a, &a).unwrap() <= tol::METRIC);
    }
}

/// `1 - sqrt(F) <= T <= sqrt(1 - F)`, and for pure pairs the upper bound is
/// an equality.
#[test]
fn fidelity_sandwiches_trace_distance() {
    let mut r = rng(0x5a4d);
    for trial in 0..60 {
        let d = r.gen_range(2..=4);
        let (a, b) = if trial % 3 == 0 {
            (random_pure(&mut r, d), random_pure(&mut r, d))
        } else {
            (random_state(&mut r, d), random_state(&mut r, d))
        };
        let t = trace_distance_half(&a, &b).unwrap();
        let (lo, hi) = fvdg_bounds(&a, &b).unwrap();
        assert!(lo - tol::METRIC <= t && t <= hi + tol::METRIC, "T={t} outside [{lo}, {hi}]");
        if trial % 3 == 0 {
            assert!((t - hi).abs() <= tol::METRIC, "pure pair not tight: {t} vs {hi}");
        }
    }
}

/// The Helstrom measurement attains the half trace distance, and no stored
/// two-outcome measurement beats it.
#[test]
fn helstrom_attains_the_trace_distance() {
    let mut r = rng(0x4e15);
    for _ in 0..50 {
        let d = r.gen_range(2..=4);
        let a = random_state(&mut r, d);
        let b = random_state(&mut r, d);
        let t = trace_distance_half(&a, &b).unwrap();
        let opt = helstrom(&a, &b).unwrap();
        assert!((opt.advantage() - t).abs() <= tol::METRIC);

        // A measurement optimized for a different pair can only do worse.
        let c = random_state(&mut r, d);
        let other = helstrom(&a, &c).unwrap();
        assert!(advantage(&other, &a, &b).unwrap() <= t + tol::METRIC);
    }
}

/// Trace distance contracts under every CPTP map.
#[test]
fn channels_contract_trace_distance() {
    let mut r = rng(0xc047);
    for _ in 0..50 {
        let d_in = r.gen_range(2..=3);
        let d_out = r.gen_range(2..=3);
        let kraus = r.gen_range(1..=3);
        let f = random_channel(&mut r, d_in, d_out, kraus);
        let a = random_state(&mut r, d_in);
        let b = random_state(&mut r, d_in);
        let before = trace_distance_half(&a, &b).unwrap();
        let after = trace_distance_half(&f.apply(&a).unwrap(), &f.apply(&b).unwrap()).unwrap();
        assert!(after <= before + tol::METRIC, "expanded: {after} > {before}");
    }
}

/// The multicopy sandwich brackets the distance of explicitly built tensor
/// powers for up to four copies.
#[test]
fn multicopy_bounds_bracket_explicit_tensors() {
    let mut r = rng(0x9a17);
    for trial in 0..40 {
        let d = 2 + (trial % 2);
        let n = 1 + (trial % 4) as u32;
        let a = random_density(&mut r, d);
        let b = random_density(&mut r, d);
        let sa = BlockState::single_block(a.clone()).unwrap();
        let sb = BlockState::single_block(b.clone()).unwrap();
        let bounds = multicopy_bounds(&sa, &sb, n).unwrap();

        let ta = BlockState::single_block(kron_power(&a, n as usize)).unwrap();
        let tb = BlockState::single_block(kron_power(&b, n as usize)).unwrap();
        let tn = trace_distance_half(&ta, &tb).unwrap();
        assert!(
            bounds.lower - tol::METRIC <= tn && tn <= bounds.upper + tol::METRIC,
            "n={n}: {tn} outside [{}, {}]",
            bounds.lower,
            bounds.upper
        );
    }
}

/// Pure-pair tensor powers against the closed form `sqrt(1 - c^n)`.
#[test]
fn pure_multicopy_closed_form_matches_tensor_oracle() {
    let mut r = rng(0x0e7a);
    for trial in 0..40 {
        let d = 2 + (trial % 2);
        let n = 1 + (trial % 4) as u32;
        let a = random_pure(&mut r, d);
        let b = random_pure(&mut r, d);
        let c = frobenius_inner(a.block(0), b.block(0)).unwrap().re;
        let ta = BlockState::single_block(kron_power(a.block(0), n as usize)).unwrap();
        let tb = BlockState::single_block(kron_power(b.block(0), n as usize)).unwrap();
        let oracle = trace_distance_half(&ta, &tb).unwrap();
        let closed = pure_multicopy_distance(c, n);
        assert!((closed - oracle).abs() <= tol::ORACLE, "{closed} vs {oracle}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    /// The closed form is monotone in copies and exact at the ends.
    #[test]
    fn pure_multicopy_scalar_shape(overlap in 0.0f64..=1.0, n in 1u32..=6) {
        let one = pure_multicopy_distance(overlap, 1);
        let many = pure_multicopy_distance(overlap, n);
        prop_assert!(many + 1e-12 >= one);
        prop_assert!((0.0..=1.0).contains(&many));
        prop_assert!((pure_multicopy_distance(1.0, n)).abs() == 0.0);
        prop_assert!((pure_multicopy_distance(0.0, n) - 1.0).abs() == 0.0);
    }

    /// Degenerate pairs: distance zero forces fidelity one and collapsed
    /// sandwich bounds.
    #[test]
    fn identical_states_have_degenerate_metrics(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.gen_range(2..=4);
        let a = random_state(&mut r, d);
        prop_assert!(trace_distance_half(&a, &a).unwrap() <= tol::METRIC);
        prop_assert!((fidelity(&a, &a).unwrap() - 1.0).abs() <= tol::METRIC);
        // The upper bound is sqrt(1 - F), which amplifies fidelity error
        // of eps into sqrt(eps); only the square is held to tol::METRIC.
        let (lo, hi) = fvdg_bounds(&a, &a).unwrap();
        prop_assert!(lo.abs() <= tol::METRIC && hi * hi <= 10.0 * tol::METRIC);
    }
}

/// Orthogonal pure states sit at the extreme of every bound.
#[test]
fn orthogonal_pures_are_extremal() {
    let zero = BlockState::pure(&[1.0.into(), 0.0.into()]).unwrap();
    let one = BlockState::pure(&[0.0.into(), 1.0.into()]).unwrap();
    assert_eq!(trace_distance_half(&zero, &one).unwrap(), 1.0);
    assert!(fidelity(&zero, &one).unwrap() <= tol::METRIC);
    let (lo, hi) = fvdg_bounds(&zero, &one).unwrap();
    assert!((lo - 1.0).abs() <= tol::METRIC && (hi - 1.0).abs() <= tol::METRIC);
    for n in [2, 3] {
        let b = multicopy_bounds(&zero, &one, n).unwrap();
        assert_eq!(b.lower, 1.0);
        assert_eq!(b.upper, 1.0);
    }
}
