//! Distances, fidelities, optimal distinguishers, and multi-copy bounds.
//!
//! Diamond distance is never computed exactly. The certification paths only
//! need state trace distances (the games have trivial input objects, where
//! the two coincide); [`diamond_lower_estimate`] provides a sampled lower
//! bound for the comb short-map check.

use alloc::vec::Vec;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{frobenius_inner, hermitian_eig, powi, psd_sqrt, Matrix};
use crate::channels::{AlgebraObject, BlockState, Channel};
use crate::error::{Error, Result};
use crate::tol;

/// A binary measurement together with the advantage it realizes on a fixed
/// state pair. Effects are stored blockwise, aligned with the object.
#[derive(Clone, Debug)]
pub struct DistinguisherResult {
    object: AlgebraObject,
    effect0: Vec<Matrix>,
    effect1: Vec<Matrix>,
    advantage: f64,
}

impl DistinguisherResult {
    /// Builds the measurement `{I - E1, E1}` and records its advantage on
    /// `(rho0, rho1)`. Effects must satisfy `0 <= E1 <= I` per block.
    pub fn from_effect(
        effect1: Vec<Matrix>,
        rho0: &BlockState,
        rho1: &BlockState,
    ) -> Result<Self> {
        if rho0.object() != rho1.object() {
            return Err(Error::ObjectMismatch);
        }
        let object = rho0.object().clone();
        if effect1.len() != object.num_blocks() {
            return Err(Error::WrongBlockCount {
                expected: object.num_blocks(),
                got: effect1.len(),
            });
        }
        let mut effect0 = Vec::with_capacity(effect1.len());
        for (b, e) in effect1.iter().enumerate() {
            let d = object.dims()[b];
            if e.rows() != d || e.cols() != d {
                return Err(Error::ShapeMismatch(e.rows(), e.cols(), d, d));
            }
            let eig = hermitian_eig(e).map_err(|_| Error::NotAPOVM(f64::NAN))?;
            let dev = (-eig.min_eigenvalue()).max(eig.max_eigenvalue() - 1.0).max(0.0);
            if dev > tol::POVM {
                return Err(Error::NotAPOVM(dev));
            }
            effect0.push(Matrix::identity(d).sub(e)?);
        }
        let mut me = Self { object, effect0, effect1, advantage: 0.0 };
        me.advantage = pairing(&me.effect1, rho1)? - pairing(&me.effect1, rho0)?;
        Ok(me)
    }

    pub fn advantage(&self) -> f64 {
        self.advantage
    }

    pub fn effect0(&self) -> &[Matrix] {
        &self.effect0
    }

    pub fn effect1(&self) -> &[Matrix] {
        &self.effect1
    }

    pub fn object(&self) -> &AlgebraObject {
        &self.object
    }
}

/// `sum_b <E_b, rho_b>`, real for Hermitian effects.
fn pairing(effects: &[Matrix], rho: &BlockState) -> Result<f64> {
    let mut acc = 0.0;
    for (e, b) in effects.iter().zip(rho.blocks()) {
        acc += frobenius_inner(e, b)?.re;
    }
    Ok(acc)
}

/// Half trace distance `1/2 sum_b ||rho0_b - rho1_b||_1`, in `[0, 1]`.
pub fn trace_distance_half(rho0: &BlockState, rho1: &BlockState) -> Result<f64> {
    if rho0.object() != rho1.object() {
        return Err(Error::ObjectMismatch);
    }
    let mut acc = 0.0;
    for (a, b) in rho0.blocks().iter().zip(rho1.blocks()) {
        let eig = hermitian_eig(&a.sub(b)?)?;
        acc += eig.eigenvalues().iter().map(|l| l.abs()).sum::<f64>();
    }
    Ok(0.5 * acc)
}

/// Uhlmann fidelity `Tr(sqrt(sqrt(rho0) rho1 sqrt(rho0)))^2` on a single
/// block.
pub fn fidelity(rho0: &BlockState, rho1: &BlockState) -> Result<f64> {
    if rho0.object() != rho1.object() {
        return Err(Error::ObjectMismatch);
    }
    if rho0.object().num_blocks() != 1 {
        return Err(Error::MultiBlockUnsupported);
    }
    let r0 = psd_sqrt(rho0.block(0))?;
    let inner = r0.mul(rho1.block(0))?.mul(&r0)?;
    let eig = hermitian_eig(&inner.hermitian_part())?;
    // Same spectral floor as `psd_sqrt`: phantom sqrt(round-off) on true
    // zeros would otherwise cost ~1e-9 per zero mode.
    let floor = eig.max_eigenvalue() * tol::EIG_FLOOR;
    let root_sum: f64 =
        eig.eigenvalues().iter().filter(|&&l| l > floor).map(|&l| libm::sqrt(l)).sum();
    Ok((root_sum * root_sum).clamp(0.0, 1.0))
}

/// Fidelity sandwich on the half trace distance:
/// `1 - sqrt(F) <= T <= sqrt(1 - F)`.
pub fn fvdg_bounds(rho0: &BlockState, rho1: &BlockState) -> Result<(f64, f64)> {
    let f = fidelity(rho0, rho1)?;
    Ok((1.0 - libm::sqrt(f), libm::sqrt(1.0 - f)))
}

/// Two-sided bounds on the `n`-copy half trace distance derived from the
/// single-copy distance.
#[derive(Clone, Copy, Debug)]
pub struct MulticopyBounds {
    /// `1 - (1 - T^2)^{n/2}`.
    pub lower: f64,
    /// Certified upper bound in `[0, 1]`; degenerates to 1 once `T > 1/2`
    /// with even `n` (see `upper_raw`).
    pub upper: f64,
    /// `sqrt(1 - (1 - 2T)^n)` before clamping; exceeds 1 for odd `n` once
    /// `T > 1/2`.
    pub upper_raw: f64,
}

/// Bounds on `1/2 ||rho0^{(x)n} - rho1^{(x)n}||_1` from the single-copy
/// distance `T`.
pub fn multicopy_bounds(rho0: &BlockState, rho1: &BlockState, n: u32) -> Result<MulticopyBounds> {
    let t = trace_distance_half(rho0, rho1)?;
    let lower = 1.0 - libm::pow(libm::sqrt((1.0 - t * t).max(0.0)), n as f64);
    let base = 1.0 - 2.0 * t;
    let upper_raw = libm::sqrt((1.0 - powi(base, n)).max(0.0));
    // F^2 >= 1 - 2T survives raising to the n-th power only while the base
    // is nonnegative or n is odd; for even n past T = 1/2 the sign flip
    // would fake a bound below 1.
    let upper = if base < 0.0 && n % 2 == 0 { 1.0 } else { upper_raw.min(1.0) };
    Ok(MulticopyBounds { lower, upper, upper_raw })
}

/// `1/2 ||psi^{(x)n} - phi^{(x)n}||_1 = sqrt(1 - overlap^n)` for pure states
/// with squared overlap `|<psi|phi>|^2`.
pub fn pure_multicopy_distance(overlap: f64, n: u32) -> f64 {
    debug_assert!((0.0..=1.0 + 1e-12).contains(&overlap));
    libm::sqrt((1.0 - powi(overlap.clamp(0.0, 1.0), n)).max(0.0))
}

/// Optimal binary measurement for `(rho0, rho1)`: effect 1 projects onto the
/// strictly positive eigenspace of `rho1 - rho0` per block (zero eigenvalues
/// go to effect 0), realizing advantage equal to the half trace distance.
pub fn helstrom(rho0: &BlockState, rho1: &BlockState) -> Result<DistinguisherResult> {
    if rho0.object() != rho1.object() {
        return Err(Error::ObjectMismatch);
    }
    let mut effect1 = Vec::with_capacity(rho0.blocks().len());
    for (a, b) in rho0.blocks().iter().zip(rho1.blocks()) {
        let diff = b.sub(a)?;
        let eig = hermitian_eig(&diff)?;
        let d = diff.rows();
        let mut proj = Matrix::zeros(d, d);
        for (k, &l) in eig.eigenvalues().iter().enumerate() {
            if l > 0.0 {
                let v = eig.eigenvector(k);
                proj = proj.add(&Matrix::projector(&v)?)?;
            }
        }
        effect1.push(proj);
    }
    DistinguisherResult::from_effect(effect1, rho0, rho1)
}

/// Advantage `<E1, rho1> - <E1, rho0>` of a stored measurement on a possibly
/// different state pair; never exceeds the Helstrom advantage.
pub fn advantage(
    meas: &DistinguisherResult,
    rho0: &BlockState,
    rho1: &BlockState,
) -> Result<f64> {
    if *rho0.object() != meas.object || *rho1.object() != meas.object {
        return Err(Error::ObjectMismatch);
    }
    for (e0, e1) in meas.effect0.iter().zip(&meas.effect1) {
        let dev = e0.add(e1)?.max_abs_diff(&Matrix::identity(e0.rows()));
        if dev > tol::POVM {
            return Err(Error::NotAPOVM(dev));
        }
    }
    Ok(pairing(&meas.effect1, rho1)? - pairing(&meas.effect1, rho0)?)
}

/// Standard normal sample via Box-Muller.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

fn normalize(v: &mut [Complex64]) {
    let norm = libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum::<f64>());
    for z in v.iter_mut() {
        *z /= norm;
    }
}

/// Lower estimate of the diamond distance `||f - g||_diamond` between
/// channels on a single-block domain `[n]`.
///
/// Evaluates `2 T((f (x) id)(P_v), (g (x) id)(P_v))` over a deterministic
/// candidate stream on `[n] (x) [n]`: the computational basis first, then
/// random pure probes interleaved with local perturbations of the incumbent.
/// The stream for a smaller budget is a prefix of the stream for a larger
/// one, so the estimate is monotone non-decreasing in `budget`.
pub fn diamond_lower_estimate(f: &Channel, g: &Channel, budget: usize, seed: u64) -> Result<f64> {
    if f.domain() != g.domain() || f.codomain() != g.codomain() {
        return Err(Error::DomainMismatch);
    }
    if f.domain().num_blocks() != 1 {
        return Err(Error::MultiBlockUnsupported);
    }
    let n = f.domain().dims()[0];
    let ref_obj = AlgebraObject::single(n)?;
    let fx = f.tensor(&Channel::identity(&ref_obj));
    let gx = g.tensor(&Channel::identity(&ref_obj));
    let dim = n * n;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    let mut best_vec: Vec<Complex64> = alloc::vec![Complex64::new(0.0, 0.0); dim];
    best_vec[0] = Complex64::new(1.0, 0.0);

    for step in 0..budget {
        let mut v: Vec<Complex64>;
        if step < dim {
            // Deterministic prefix: the computational basis.
            v = alloc::vec![Complex64::new(0.0, 0.0); dim];
            v[step] = Complex64::new(1.0, 0.0);
        } else if (step - dim) % 4 == 0 {
            v = (0..dim).map(|_| Complex64::new(gaussian(&mut rng), gaussian(&mut rng))).collect();
            normalize(&mut v);
        } else {
            // Shrinking local perturbation of the incumbent.
            let scale = 0.4 * libm::pow(0.97, ((step - dim) % 64) as f64);
            v = best_vec
                .iter()
                .map(|z| {
                    z + Complex64::new(scale * gaussian(&mut rng), scale * gaussian(&mut rng))
                })
                .collect();
            normalize(&mut v);
        }
        let probe = BlockState::pure(&v)?;
        let probe = BlockState::new(fx.domain().clone(), probe.blocks().to_vec())?;
        let t = trace_distance_half(&fx.apply(&probe)?, &gx.apply(&probe)?)?;
        if t > best {
            best = t;
            best_vec = v;
        }
    }
    Ok(2.0 * best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ket0() -> BlockState {
        BlockState::pure(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap()
    }

    fn ket1() -> BlockState {
        BlockState::pure(&[c(0.0, 0.0), c(1.0, 0.0)]).unwrap()
    }

    fn plus() -> BlockState {
        BlockState::pure(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap()
    }

    #[test]
    fn trace_distance_examples() {
        assert_eq!(trace_distance_half(&ket0(), &ket0()).unwrap(), 0.0);
        assert!((trace_distance_half(&ket0(), &ket1()).unwrap() - 1.0).abs() < 1e-12);
        // Pure pair with overlap 1/2: distance sqrt(1 - 1/2).
        let t = trace_distance_half(&ket0(), &plus()).unwrap();
        assert!((t - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        let bit = BlockState::classical(&[0.5, 0.5]).unwrap();
        assert!(matches!(
            trace_distance_half(&ket0(), &bit),
            Err(Error::ObjectMismatch)
        ));
    }

    #[test]
    fn fidelity_examples() {
        assert!((fidelity(&ket0(), &ket0()).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity(&ket0(), &ket1()).unwrap() < 1e-12);
        let mixed = BlockState::maximally_mixed(2).unwrap();
        assert!((fidelity(&ket0(), &mixed).unwrap() - 0.5).abs() < 1e-12);
        let bit = BlockState::classical(&[0.5, 0.5]).unwrap();
        assert!(matches!(fidelity(&bit, &bit), Err(Error::MultiBlockUnsupported)));
    }

    #[test]
    fn fvdg_examples() {
        let (lo, hi) = fvdg_bounds(&ket0(), &ket0()).unwrap();
        assert!(lo.abs() < 1e-9 && hi.abs() < 1e-7);
        let (lo, hi) = fvdg_bounds(&ket0(), &plus()).unwrap();
        assert!((lo - (1.0 - libm::sqrt(0.5))).abs() < 1e-12);
        assert!((hi - libm::sqrt(0.5)).abs() < 1e-12);
        let t = trace_distance_half(&ket0(), &plus()).unwrap();
        assert!(lo - 1e-9 <= t && t <= hi + 1e-9);
        let (lo, hi) = fvdg_bounds(&ket0(), &ket1()).unwrap();
        assert!((lo - 1.0).abs() < 1e-9 && (hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multicopy_two_copy_example() {
        // T = sqrt(1/2): lower 1 - 1/2 = 0.5, raw upper sqrt(1-(1-sqrt2)^2).
        let b = multicopy_bounds(&ket0(), &plus(), 2).unwrap();
        assert!((b.lower - 0.5).abs() < 1e-12);
        let expected_upper = libm::sqrt(1.0 - (1.0 - libm::sqrt(2.0)) * (1.0 - libm::sqrt(2.0)));
        assert!((b.upper_raw - expected_upper).abs() < 1e-12);
        // True two-copy distance sqrt(1 - (1/2)^2) = sqrt(3)/2 sits inside.
        let truth = libm::sqrt(3.0) / 2.0;
        assert!(b.lower <= truth + 1e-12 && truth <= b.upper + 1e-12);

        let same = multicopy_bounds(&ket0(), &ket0(), 5).unwrap();
        assert_eq!((same.lower, same.upper), (0.0, 0.0));

        // Odd copy count with T > 1/2 pushes the raw upper bound past 1.
        let odd = multicopy_bounds(&ket0(), &plus(), 3).unwrap();
        assert!(odd.upper_raw > 1.0 && odd.upper == 1.0);

        // Even copy count with T > 1/2: the raw formula squares the negative
        // base back below 1 and is no certificate; T = 1 makes it collapse
        // to 0 while the true two-copy distance stays 1.
        let even = multicopy_bounds(&ket0(), &ket1(), 2).unwrap();
        assert_eq!(even.upper_raw, 0.0);
        assert_eq!(even.upper, 1.0);
        assert!((even.lower - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pure_multicopy_examples() {
        assert_eq!(pure_multicopy_distance(1.0, 7), 0.0);
        assert_eq!(pure_multicopy_distance(0.0, 1), 1.0);
        let v = pure_multicopy_distance(15.0 / 16.0, 4);
        assert!((v - libm::sqrt(1.0 - powi(15.0 / 16.0, 4))).abs() < 1e-15);
    }

    #[test]
    fn helstrom_examples() {
        let m = helstrom(&ket0(), &ket1()).unwrap();
        assert!((m.advantage() - 1.0).abs() < 1e-12);
        assert!(m.effect1()[0].max_abs_diff(ket1().block(0)) < 1e-12);

        assert!(helstrom(&plus(), &plus()).unwrap().advantage().abs() < 1e-12);

        let m = helstrom(&ket0(), &plus()).unwrap();
        let t = trace_distance_half(&ket0(), &plus()).unwrap();
        assert!((m.advantage() - t).abs() < 1e-9);
    }

    #[test]
    fn advantage_examples() {
        // The identity effect cannot distinguish anything.
        let id_meas =
            DistinguisherResult::from_effect(alloc::vec![Matrix::identity(2)], &ket0(), &ket1())
                .unwrap();
        assert!(id_meas.advantage().abs() < 1e-12);
        // Helstrom effects reproduce the trace distance on their own pair.
        let m = helstrom(&ket0(), &plus()).unwrap();
        let adv = advantage(&m, &ket0(), &plus()).unwrap();
        assert!((adv - trace_distance_half(&ket0(), &plus()).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn estimator_examples() {
        let q = AlgebraObject::single(2).unwrap();
        let id = Channel::identity(&q);
        assert_eq!(diamond_lower_estimate(&id, &id, 20, 7).unwrap(), 0.0);

        // Replacing with |0><0| is diamond distance 2 from the identity;
        // the basis prefix contains the witness |1>|0>.
        let replace = Channel::prepare(&ket0()).compose(&Channel::trace_channel(&q)).unwrap();
        let est = diamond_lower_estimate(&id, &replace, 4, 3).unwrap();
        assert!((est - 2.0).abs() < 1e-9);

        let bit = Channel::identity(&AlgebraObject::classical(2));
        assert!(matches!(
            diamond_lower_estimate(&bit, &bit, 5, 0),
            Err(Error::MultiBlockUnsupported)
        ));
    }
}
