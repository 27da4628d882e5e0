//! Randomized builders shared by the integration suites.
//!
//! Everything is seeded through ChaCha8 so failures replay exactly.

#![allow(dead_code)]

use num_complex::Complex64;
use qsv_core::algebra::{hermitian_eig, kron, Matrix};
use qsv_core::channels::{BlockState, Channel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(r: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = r.gen_range(f64::EPSILON..1.0);
    let u2: f64 = r.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn complex_gaussian(r: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(gaussian(r), gaussian(r))
}

pub fn random_unit_vector(r: &mut ChaCha8Rng, d: usize) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = (0..d).map(|_| complex_gaussian(r)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut v {
        *z /= norm;
    }
    v
}

pub fn random_pure(r: &mut ChaCha8Rng, d: usize) -> BlockState {
    BlockState::pure(&random_unit_vector(r, d)).unwrap()
}

/// Full-rank density matrix `G G^dag / tr` from a square Ginibre sample.
pub fn random_density(r: &mut ChaCha8Rng, d: usize) -> Matrix {
    let g = Matrix::from_fn(d, d, |_, _| complex_gaussian(r));
    let h = g.mul(&g.dagger()).unwrap();
    let tr = h.trace().re;
    h.scale(Complex64::new(1.0 / tr, 0.0))
}

pub fn random_state(r: &mut ChaCha8Rng, d: usize) -> BlockState {
    BlockState::single_block(random_density(r, d)).unwrap()
}

/// Random CPTP map `[d_in] -> [d_out]` from Ginibre Kraus operators,
/// normalized through the inverse square root of `sum K^dag K`. At least
/// `ceil(d_in / d_out) + 1` operators are drawn so the sum is comfortably
/// full rank (trace preservation needs rank `d_in`).
pub fn random_channel(r: &mut ChaCha8Rng, d_in: usize, d_out: usize, k: usize) -> Channel {
    let k = k.max(d_in.div_ceil(d_out) + 1);
    let raw: Vec<Matrix> =
        (0..k).map(|_| Matrix::from_fn(d_out, d_in, |_, _| complex_gaussian(r))).collect();
    let mut s = Matrix::zeros(d_in, d_in);
    for a in &raw {
        s = s.add(&a.dagger().mul(a).unwrap()).unwrap();
    }
    let inv_root = hermitian_eig(&s).unwrap().map_eigenvalues(|l| 1.0 / l.sqrt());
    let kraus: Vec<Matrix> = raw.iter().map(|a| a.mul(&inv_root).unwrap()).collect();
    Channel::from_kraus(&kraus).unwrap()
}

pub fn kron_power(m: &Matrix, n: usize) -> Matrix {
    let mut out = Matrix::identity(1);
    for _ in 0..n {
        out = kron(&out, m);
    }
    out
}

/// `sum` over pass/fail patterns with at least `min_passes` passes of
/// `(x)_j (E or I - E)`; the tensor-space form of the threshold test.
pub fn explicit_threshold_effect(effect: &Matrix, copies: usize, min_passes: usize) -> Matrix {
    let d = effect.rows();
    let fail = Matrix::identity(d).sub(effect).unwrap();
    let total = d.pow(copies as u32);
    let mut out = Matrix::zeros(total, total);
    for mask in 0u32..(1 << copies) {
        if (mask.count_ones() as usize) < min_passes {
            continue;
        }
        let mut term = Matrix::identity(1);
        for j in 0..copies {
            term = kron(&term, if (mask >> j) & 1 == 1 { effect } else { &fail });
        }
        out = out.add(&term).unwrap();
    }
    out
}

pub fn max_block_diff(a: &BlockState, b: &BlockState) -> f64 {
    assert_eq!(a.object(), b.object());
    a.blocks()
        .iter()
        .zip(b.blocks())
        .map(|(x, y)| x.max_abs_diff(y))
        .fold(0.0, f64::max)
}
