//! Explicit dishonest-source constructions and the distinguishers that
//! realize their advantage.
//!
//! Each constructor freezes a deterministic choice wherever the security
//! argument leaves freedom (perturbation directions, orthogonal completions,
//! global phases), so every derived quantity here is reproducible and
//! assertable.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::algebra::{frobenius_inner, hermitian_eig, Matrix};
use crate::channels::{AlgebraObject, BlockState, Channel};
use crate::combs::{Comb, ResourceTuple};
use crate::error::{Error, Result};
use crate::metrics::helstrom;
use crate::protocols::{ideal_channel, TargetSpec};
use crate::tol;

/// Distance budget `alpha` of the fixed-round mixed-state attack; the bound
/// it certifies is largest at this value.
pub const MIXED_ALPHA: f64 = 2.0 / 9.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum AttackKind {
    PureTau,
    MixedAlpha,
    #[cfg_attr(feature = "serde", serde(rename = "depolarized"))]
    DepolarizedMix,
    Measurement,
    Custom,
}

impl AttackKind {
    /// The name used in configs and reports.
    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::PureTau => "pure-tau",
            AttackKind::MixedAlpha => "mixed-alpha",
            AttackKind::DepolarizedMix => "depolarized",
            AttackKind::Measurement => "measurement",
            AttackKind::Custom => "custom",
        }
    }
}

impl core::fmt::Display for AttackKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Basis data of the measurement-channel attack: the readout direction, the
/// attack vector, and their angles against the target.
#[derive(Clone, Debug)]
pub struct MeasurementGeometry {
    xi: Vec<Complex64>,
    psi: Vec<Complex64>,
    theta: f64,
    eta_angle: f64,
}

impl MeasurementGeometry {
    pub fn xi(&self) -> &[Complex64] {
        &self.xi
    }

    pub fn psi(&self) -> &[Complex64] {
        &self.psi
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn eta_angle(&self) -> f64 {
        self.eta_angle
    }
}

/// A dishonest source state with its analytically known distances.
#[derive(Clone, Debug)]
pub struct AttackConstruction {
    kind: AttackKind,
    state: BlockState,
    half_distance: f64,
    overlap: Option<f64>,
    parameter: f64,
    geometry: Option<MeasurementGeometry>,
}

impl AttackConstruction {
    /// Wraps an arbitrary source state; the half-distance to the target must
    /// be supplied by the caller.
    pub fn custom(state: BlockState, half_distance: f64) -> Self {
        Self {
            kind: AttackKind::Custom,
            state,
            half_distance,
            overlap: None,
            parameter: half_distance,
            geometry: None,
        }
    }

    pub fn kind(&self) -> AttackKind {
        self.kind
    }

    pub fn state(&self) -> &BlockState {
        &self.state
    }

    /// Analytic `trace_distance_half(state, target)`.
    pub fn half_distance(&self) -> f64 {
        self.half_distance
    }

    /// `|<psi|phi>|^2` for the pure-state kinds.
    pub fn overlap(&self) -> Option<f64> {
        self.overlap
    }

    /// The kind's scalar knob: `tau`, `alpha`, `beta`, or `sin(eta)`.
    pub fn parameter(&self) -> f64 {
        self.parameter
    }

    pub fn geometry(&self) -> Option<&MeasurementGeometry> {
        self.geometry.as_ref()
    }
}

/// First Gram-Schmidt completion vector: the earliest basis vector with a
/// nonzero component orthogonal to `v`, normalized.
fn completion_vector(v: &[Complex64]) -> Result<Vec<Complex64>> {
    let d = v.len();
    for j in 0..d {
        // e_j - <v|e_j> v has squared norm 1 - |v_j|^2.
        let coeff = v[j].conj();
        let norm_sq = 1.0 - coeff.norm_sqr();
        if norm_sq > tol::SUPPORT {
            let scale = 1.0 / libm::sqrt(norm_sq);
            let mut w: Vec<Complex64> = v.iter().map(|&a| -coeff * a * scale).collect();
            w[j] += scale;
            return Ok(w);
        }
    }
    Err(Error::DimensionTooSmall(d, 2))
}

fn check_rounds(n: f64) -> Result<()> {
    if !(n >= 1.0) || !n.is_finite() {
        return Err(Error::InvalidParameter("expected round count must be at least 1"));
    }
    Ok(())
}

/// Attack on a pure target: a pure state tilted away from the target by
/// `tau = 1/(2 sqrt(N))`, so the overlap is `1 - 1/(4N)`. `N` is the
/// (expected) number of tested rounds.
pub fn pure_attack_state(t: &TargetSpec, n: f64) -> Result<AttackConstruction> {
    check_rounds(n)?;
    let phi = t.pure_vector()?;
    let perp = completion_vector(&phi)?;
    let tau = 0.5 / libm::sqrt(n);
    let keep = libm::sqrt(1.0 - tau * tau);
    let psi: Vec<Complex64> = phi
        .iter()
        .zip(&perp)
        .map(|(&a, &b)| a * keep + b * tau)
        .collect();
    Ok(AttackConstruction {
        kind: AttackKind::PureTau,
        state: BlockState::pure(&psi)?,
        half_distance: tau,
        overlap: Some(1.0 - tau * tau),
        parameter: tau,
        geometry: None,
    })
}

/// Attack on a mixed target: shifts weight `alpha/N = 2/(9N)` from the top
/// eigenvector to the bottom one, which keeps the spectrum inside `[0, 1]`
/// whenever `N >= alpha / lambda_max`.
pub fn mixed_attack_state(t: &TargetSpec, n: f64) -> Result<AttackConstruction> {
    let d = t.total_dim();
    if d < 2 {
        return Err(Error::DimensionTooSmall(d, 2));
    }
    check_rounds(n)?;
    let eig = hermitian_eig(t.state().block(0))?;
    let delta = MIXED_ALPHA / n;
    if eig.max_eigenvalue() < delta {
        return Err(Error::PerturbationBreaksPositivity {
            min_rounds: MIXED_ALPHA / eig.max_eigenvalue(),
        });
    }
    let top = Matrix::projector(&eig.eigenvector(0))?;
    let bottom = Matrix::projector(&eig.eigenvector(d - 1))?;
    let shift = Complex64::new(delta, 0.0);
    let rho = t
        .state()
        .block(0)
        .sub(&top.scale(shift))?
        .add(&bottom.scale(shift))?;
    Ok(AttackConstruction {
        kind: AttackKind::MixedAlpha,
        state: BlockState::single_block(rho)?,
        half_distance: delta,
        overlap: None,
        parameter: MIXED_ALPHA,
        geometry: None,
    })
}

/// `omega = (d/(d-1)) trace_distance_half(phi, I/d)`, the per-unit-`beta`
/// distance scale of the depolarized mix.
pub fn depolarizing_weight(t: &TargetSpec) -> Result<f64> {
    let d = t.total_dim();
    if d < 2 {
        return Err(Error::DimensionTooSmall(d, 2));
    }
    let uniform = BlockState::maximally_mixed(d)?;
    let dist = crate::metrics::trace_distance_half(t.state(), &uniform)?;
    Ok(dist * d as f64 / (d as f64 - 1.0))
}

/// Unital-channel attack state: the target mixed towards the normalized
/// complement, `rho = (1-beta) phi + beta (I-phi)/(d-1)`, at half-distance
/// `beta * omega` from the target.
pub fn depolarized_attack_state(t: &TargetSpec, beta: f64) -> Result<AttackConstruction> {
    if !(0.0..=1.0).contains(&beta) || !beta.is_finite() {
        return Err(Error::InvalidParameter("beta must lie in [0, 1]"));
    }
    let d = t.total_dim();
    if d < 2 {
        return Err(Error::DimensionTooSmall(d, 2));
    }
    let phi = t.state().block(0);
    let complement = Matrix::identity(d).sub(phi)?.scale(Complex64::new(
        beta / (d as f64 - 1.0),
        0.0,
    ));
    let rho = phi.scale(Complex64::new(1.0 - beta, 0.0)).add(&complement)?;
    Ok(AttackConstruction {
        kind: AttackKind::DepolarizedMix,
        state: BlockState::single_block(rho)?,
        half_distance: beta * depolarizing_weight(t)?,
        overlap: None,
        parameter: beta,
        geometry: None,
    })
}

/// Measurement-channel attack for pure targets in dimension at least 3: a
/// readout direction at angle `theta = arccos(1/sqrt(d))` from the target
/// and an attack vector tilted by `eta` with `sin(eta) = 1/(2 sqrt(N))`,
/// both in one real plane (phases fixed so the overlaps are non-negative).
pub fn measurement_attack_construction(t: &TargetSpec, n: f64) -> Result<AttackConstruction> {
    let d = t.total_dim();
    if d < 3 {
        return Err(Error::DimensionTooSmall(d, 3));
    }
    check_rounds(n)?;
    let phi = t.pure_vector()?;
    let b1 = completion_vector(&phi)?;
    let cos_theta = 1.0 / libm::sqrt(d as f64);
    let sin_theta = libm::sqrt(1.0 - cos_theta * cos_theta);
    let theta = libm::acos(cos_theta);
    let sin_eta = 0.5 / libm::sqrt(n);
    let eta = libm::asin(sin_eta);
    let cos_eta = libm::sqrt(1.0 - sin_eta * sin_eta);
    if libm::sin(2.0 * theta - eta) < sin_eta {
        return Err(Error::InvalidParameter("readout angle too shallow for this round count"));
    }
    let mix = |a: f64, b: f64| -> Vec<Complex64> {
        phi.iter()
            .zip(&b1)
            .map(|(&p, &q)| p * a + q * b)
            .collect()
    };
    let xi = mix(cos_theta, sin_theta);
    let psi = mix(cos_eta, sin_eta);
    Ok(AttackConstruction {
        kind: AttackKind::Measurement,
        state: BlockState::pure(&psi)?,
        half_distance: sin_eta,
        overlap: Some(cos_eta * cos_eta),
        parameter: sin_eta,
        geometry: Some(MeasurementGeometry { xi, psi, theta, eta_angle: eta }),
    })
}

/// The i.i.d. source: every hole of the protocol comb receives
/// `prepare(rho)`.
pub fn iid_attack(rho: &BlockState, protocol: &Comb) -> Result<Channel> {
    let source = Channel::prepare(rho);
    protocol.fill(&ResourceTuple::iid(&source, protocol.signature().len()))
}

/// Probability the simulator feeds `c = 0` into the ideal resource.
#[derive(Clone, Copy, Debug)]
pub struct SimulatorParam {
    q: f64,
}

impl SimulatorParam {
    pub fn new(q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) || !q.is_finite() {
            return Err(Error::InvalidParameter("simulator weight must lie in [0, 1]"));
        }
        Ok(Self { q })
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

/// The simulated game: the ideal resource driven with `(q, 1-q)`, producing
/// `q * target (+) (1 - q)`.
pub fn simulator_channel(t: &TargetSpec, param: SimulatorParam) -> Channel {
    let bit = BlockState::classical(&[param.q, 1.0 - param.q])
        .expect("simulator weights form a distribution");
    ideal_channel(t)
        .compose(&Channel::prepare(&bit))
        .expect("ideal resource accepts the classical bit")
}

/// Correctness readout `Tr (+) id`: outcome 0 collects the accept mass,
/// outcome 1 the abort mass.
pub fn honest_distinguisher(t: &TargetSpec) -> Channel {
    Channel::trace_channel(t.object()).dsum(&Channel::identity(&AlgebraObject::unit()))
}

/// Binary measurement `{gamma0 (+) 1, gamma1 (+) 0}` on the game output:
/// `gamma1` fires only on the accept branch, aborts count as outcome 0.
pub fn accept_effect_distinguisher(t: &TargetSpec, gamma1: &Matrix) -> Result<Channel> {
    let d = t.total_dim();
    if gamma1.rows() != d || gamma1.cols() != d {
        return Err(Error::ShapeMismatch(gamma1.rows(), gamma1.cols(), d, d));
    }
    let gamma0 = Matrix::identity(d).sub(gamma1)?;
    let on_accept = Channel::povm_channel(&[gamma0, gamma1.clone()], true)?;
    let on_abort = Channel::prepare(&BlockState::classical(&[1.0, 0.0])?);
    let branched = on_accept.dsum(&on_abort);
    Channel::forget_branch(2, branched.codomain())?.compose(&branched)
}

/// The security readout: the Holevo-Helstrom effect for target-versus-attack
/// applied on the accept branch, aborts counted as outcome 0.
pub fn dishonest_distinguisher(t: &TargetSpec, rho: &BlockState) -> Result<Channel> {
    if rho.object() != t.object() {
        return Err(Error::ObjectMismatch);
    }
    let optimal = helstrom(t.state(), rho)?;
    accept_effect_distinguisher(t, &optimal.effect1()[0])
}

/// Alignment margin `lambda` of an accept effect: how much more it fires on
/// the attack state (and the fallback, when present) than on the target.
/// The security argument needs this non-negative.
pub fn lambda_alignment(
    gamma1: &Matrix,
    target: &BlockState,
    attack: &BlockState,
    fallback: Option<&BlockState>,
) -> Result<f64> {
    let on_target = frobenius_inner(gamma1, target.block(0))?.re;
    let mut lambda = frobenius_inner(gamma1, attack.block(0))?.re - on_target;
    if let Some(chi) = fallback {
        let via_chi = frobenius_inner(gamma1, chi.block(0))?.re - on_target;
        lambda = lambda.min(via_chi);
    }
    Ok(lambda)
}
