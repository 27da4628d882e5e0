//! Algebraic laws of the channel combinators on randomized instances.
//!
//! Each law is checked on the dense action matrices, so equality here is
//! equality as linear maps, not just agreement on a few probe states.

mod common;

use common::{random_channel, random_state, rng};
use qsv_core::channels::{AlgebraObject, BlockState, Channel};
use qsv_core::tol;
use rand::Rng;

fn single(d: usize) -> AlgebraObject {
    AlgebraObject::single(d).unwrap()
}

fn assert_same_map(a: &Channel, b: &Channel, what: &str) {
    assert_eq!(a.domain(), b.domain(), "{what}: domains differ");
    assert_eq!(a.codomain(), b.codomain(), "{what}: codomains differ");
    let dev = a.action().max_abs_diff(b.action());
    assert!(dev <= tol::REINDEX, "{what}: actions differ by {dev:.3e}");
}

/// `(f (x) g) . (h (x) k) = (f . h) (x) (g . k)` whenever the composites
/// exist.
#[test]
fn tensor_and_composition_interchange() {
    let mut r = rng(0x1a71);
    for _ in 0..30 {
        let (a, b, c) = (r.gen_range(1..=3), r.gen_range(1..=3), r.gen_range(1..=3));
        let (d, e, w) = (r.gen_range(1..=3), r.gen_range(1..=3), r.gen_range(1..=3));
        let f = random_channel(&mut r, a, b, 2);
        let h = random_channel(&mut r, c, a, 2);
        let g = random_channel(&mut r, d, e, 2);
        let k = random_channel(&mut r, w, d, 2);
        let lhs = f.tensor(&g).compose(&h.tensor(&k)).unwrap();
        let rhs = f.compose(&h).unwrap().tensor(&g.compose(&k).unwrap());
        assert_same_map(&lhs, &rhs, "interchange");
    }
}

/// Swapping the same pair twice is the identity, exactly: the actions are
/// permutation matrices, so no rounding enters.
#[test]
fn swap_is_an_involution() {
    let mut r = rng(0x51a9);
    for _ in 0..20 {
        let d1 = r.gen_range(1..=3);
        let d2 = r.gen_range(1..=3);
        let objs = [single(d1), single(d2)];
        let fwd = Channel::swap_channel(1, 2, &objs).unwrap();
        let back = Channel::swap_channel(1, 2, &[single(d2), single(d1)]).unwrap();
        let square = back.compose(&fwd).unwrap();
        let id = Channel::identity(fwd.domain());
        assert_eq!(square.action().max_abs_diff(id.action()), 0.0);

        // And it does exchange the factors.
        let x = random_state(&mut r, d1);
        let y = random_state(&mut r, d2);
        let swapped = fwd.apply(&x.tensor(&y)).unwrap();
        assert!(common::max_block_diff(&swapped, &y.tensor(&x)) <= tol::REINDEX);
    }
}

/// `branch_down(n) . branch_up(n)` is the identity on the tagged object
/// `[1;n] (x) A`, exactly: both legs are re-indexings.
#[test]
fn branch_embedding_round_trips() {
    let mut r = rng(0xb0a7);
    for _ in 0..20 {
        let d = r.gen_range(1..=3);
        let n = r.gen_range(1..=3);
        let a = single(d);
        let up = Channel::branch_up(n, &a).unwrap();
        let down = Channel::branch_down(n, &a).unwrap();
        let round = down.compose(&up).unwrap();
        let tagged = AlgebraObject::classical(n).tensor(&a);
        let id = Channel::identity(&tagged);
        assert_eq!(round.action().max_abs_diff(id.action()), 0.0);

        let weights: Vec<f64> = {
            let raw: Vec<f64> = (0..n).map(|_| r.gen_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / total).collect()
        };
        let x = BlockState::classical(&weights).unwrap().tensor(&random_state(&mut r, d));
        assert!(common::max_block_diff(&round.apply(&x).unwrap(), &x) <= tol::REINDEX);
    }
}

/// Running the same channel in every branch and then erasing the tag is the
/// same as erasing the tag first: `forget . elif([f; n]) = f . forget`.
#[test]
fn uniform_elif_commutes_with_forgetting_the_tag() {
    let mut r = rng(0xe11f);
    for _ in 0..20 {
        let d_in = r.gen_range(1..=3);
        let d_out = r.gen_range(1..=3);
        let n = r.gen_range(1..=3);
        let f = random_channel(&mut r, d_in, d_out, 2);
        let branches = vec![f.clone(); n];
        let tagged = Channel::elif_channel(&branches).unwrap();

        let erase_out = Channel::forget_branch(n, tagged.codomain()).unwrap();
        let lhs = erase_out.compose(&tagged).unwrap();
        let erase_in = Channel::forget_branch(n, tagged.domain()).unwrap();
        let rhs = f.compose(&erase_in).unwrap();
        assert_same_map(&lhs, &rhs, "elif/forget");
    }
}

/// `move_back(k, n)` equals the chain of adjacent swaps it abbreviates, and
/// cycling a factor through every position returns it home.
#[test]
fn move_back_matches_adjacent_swap_chain() {
    let mut r = rng(0x3007);
    for _ in 0..15 {
        let n = r.gen_range(2..=4);
        let dims: Vec<usize> = (0..n).map(|_| r.gen_range(1..=3)).collect();
        let objs: Vec<AlgebraObject> = dims.iter().map(|&d| single(d)).collect();
        let k = r.gen_range(1..=n - 1);

        let mb = Channel::move_back(k, n, &objs).unwrap();
        let mut chain = Channel::identity(mb.domain());
        let mut order = objs.clone();
        for pos in k..n {
            let step = Channel::swap_channel(pos, pos + 1, &order).unwrap();
            order.swap(pos - 1, pos);
            chain = step.compose(&chain).unwrap();
        }
        assert_same_map(&mb, &chain, "move_back");

        // It really lands the factor at position n.
        let parts: Vec<BlockState> = dims.iter().map(|&d| random_state(&mut r, d)).collect();
        let mut input = BlockState::unit();
        for p in &parts {
            input = input.tensor(p);
        }
        let mut permuted = BlockState::unit();
        for (j, p) in parts.iter().enumerate() {
            if j + 1 != k {
                permuted = permuted.tensor(p);
            }
        }
        permuted = permuted.tensor(&parts[k - 1]);
        assert!(common::max_block_diff(&mb.apply(&input).unwrap(), &permuted) <= tol::REINDEX);
    }
}

/// Full-cycle sanity: moving the front factor back in an `n`-factor row
/// `n` times in a row is the identity.
#[test]
fn repeated_move_back_cycles_home() {
    let mut r = rng(0xc1c1);
    for _ in 0..10 {
        let n = r.gen_range(2..=4);
        let dims: Vec<usize> = (0..n).map(|_| r.gen_range(1..=2)).collect();
        let objs: Vec<AlgebraObject> = dims.iter().map(|&d| single(d)).collect();

        let mut order = objs.clone();
        let mut total = Channel::identity(&order.iter().fold(AlgebraObject::unit(), |acc, o| acc.tensor(o)));
        for _ in 0..n {
            let step = Channel::move_back(1, n, &order).unwrap();
            order.rotate_left(1);
            total = step.compose(&total).unwrap();
        }
        let id = Channel::identity(total.domain());
        assert_same_map(&total, &id, "cycle");
    }
}
