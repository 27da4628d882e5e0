//! Verification protocols as client-side combs, the ideal resource they
//! target, and the analytic i.i.d. evaluation path.
//!
//! Two evaluation routes exist on purpose. The comb builders materialize the
//! protocol literally (effects on tensor powers, classical branching wires)
//! and are usable only at oracle scale; [`iid_game_output`] evaluates the same
//! game through scalar acceptance probabilities and handles round counts far
//! beyond anything representable as a dense channel.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::algebra::{frobenius_inner, hermitian_eig, kron, powi, Matrix};
use crate::channels::{AlgebraObject, BlockState, Channel};
use crate::combs::Comb;
use crate::error::{Error, Result};
use crate::tol;

/// Largest copy count for which per-round effects are materialized as dense
/// tensor-power matrices. Beyond this the analytic path must be used.
pub const EXPLICIT_COPY_CAP: usize = 4;

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

/// The state a verification protocol is supposed to certify, together with
/// the client partition the entanglement claim refers to.
#[derive(Clone, Debug)]
pub struct TargetSpec {
    client_dims: Vec<usize>,
    state: BlockState,
    pure: bool,
    cut: usize,
}

impl TargetSpec {
    /// `cut` splits clients `1..=cut` from `cut+1..=K`; it must satisfy
    /// `1 <= cut < K`, or be 0 when there is a single client.
    pub fn new(client_dims: Vec<usize>, state: BlockState, cut: usize) -> Result<Self> {
        if client_dims.is_empty() || client_dims.iter().any(|&d| d == 0) {
            return Err(Error::ZeroDim);
        }
        let k = client_dims.len();
        if (k == 1 && cut != 0) || (k > 1 && (cut == 0 || cut >= k)) {
            return Err(Error::InvalidParameter("cut must split the clients"));
        }
        let total: usize = client_dims.iter().product();
        if *state.object() != AlgebraObject::single(total)? {
            return Err(Error::ObjectMismatch);
        }
        let eig = hermitian_eig(state.block(0))?;
        let pure = eig.max_eigenvalue() >= 1.0 - tol::METRIC;
        Ok(Self { client_dims, state, pure, cut })
    }

    pub fn clients(&self) -> usize {
        self.client_dims.len()
    }

    pub fn client_dims(&self) -> &[usize] {
        &self.client_dims
    }

    pub fn state(&self) -> &BlockState {
        &self.state
    }

    pub fn is_pure(&self) -> bool {
        self.pure
    }

    pub fn cut(&self) -> usize {
        self.cut
    }

    pub fn total_dim(&self) -> usize {
        self.client_dims.iter().product()
    }

    /// The single-block object `[prod n_i]` the copies live on.
    pub fn object(&self) -> &AlgebraObject {
        self.state.object()
    }

    /// Unit eigenvector of the top eigenvalue; requires the purity flag.
    pub fn pure_vector(&self) -> Result<Vec<Complex64>> {
        if !self.pure {
            return Err(Error::TargetNotPure);
        }
        let eig = hermitian_eig(self.state.block(0))?;
        Ok(eig.eigenvector(0))
    }

    /// Projector onto the support of the target state.
    pub fn support_projector(&self) -> Result<Matrix> {
        let eig = hermitian_eig(self.state.block(0))?;
        let d = self.total_dim();
        let mut p = Matrix::zeros(d, d);
        for (k, &lambda) in eig.eigenvalues().iter().enumerate() {
            if lambda > tol::SUPPORT {
                p = p.add(&Matrix::projector(&eig.eigenvector(k))?)?;
            }
        }
        Ok(p)
    }
}

// ---------------------------------------------------------------------------
// Acceptance tests
// ---------------------------------------------------------------------------

/// The clients' accept/reject rule on the tested copies.
///
/// All-pass and threshold kinds apply one effect per copy and scale to any
/// copy count; the explicit kind fixes a collective effect on a declared
/// number of copies and exists for oracle comparisons.
#[derive(Clone, Debug)]
pub struct AcceptanceTest {
    kind: TestKind,
}

#[derive(Clone, Debug)]
enum TestKind {
    AllPass { effect: Matrix },
    Threshold { effect: Matrix, min_passes: usize },
    Explicit { effect: Matrix, copies: usize, copy_dim: usize },
}

fn validate_effect(e: &Matrix) -> Result<()> {
    if !e.is_square() {
        return Err(Error::NotSquare(e.rows(), e.cols()));
    }
    let dev = e.hermiticity_deviation();
    if dev > tol::HERMITIAN {
        return Err(Error::NotHermitian(dev));
    }
    let eig = hermitian_eig(e)?;
    let worst = (-eig.min_eigenvalue()).max(eig.max_eigenvalue() - 1.0);
    if worst > tol::POVM {
        return Err(Error::NotAPOVM(worst));
    }
    Ok(())
}

impl AcceptanceTest {
    /// Accept only when every tested copy passes the effect `e`.
    pub fn all_pass(effect: Matrix) -> Result<Self> {
        validate_effect(&effect)?;
        Ok(Self { kind: TestKind::AllPass { effect } })
    }

    /// Accept when at least `min_passes` of the tested copies pass.
    pub fn threshold(effect: Matrix, min_passes: usize) -> Result<Self> {
        validate_effect(&effect)?;
        Ok(Self { kind: TestKind::Threshold { effect, min_passes } })
    }

    /// Collective accept-effect on exactly `copies` copies of a
    /// `copy_dim`-dimensional system.
    pub fn explicit(effect: Matrix, copies: usize, copy_dim: usize) -> Result<Self> {
        validate_effect(&effect)?;
        if copies > EXPLICIT_COPY_CAP {
            return Err(Error::TooManyCopiesForExplicit(copies));
        }
        let want = powi_usize(copy_dim, copies);
        if effect.rows() != want {
            return Err(Error::ShapeMismatch(effect.rows(), effect.cols(), want, want));
        }
        Ok(Self { kind: TestKind::Explicit { effect, copies, copy_dim } })
    }

    /// Canonical test for a target: the rank-one projector for pure targets,
    /// the support projector otherwise. Both make the honest case accept with
    /// the largest possible probability.
    pub fn default_for(t: &TargetSpec) -> Result<Self> {
        let effect = if t.is_pure() {
            Matrix::projector(&t.pure_vector()?)?
        } else {
            t.support_projector()?
        };
        Self::all_pass(effect)
    }

    /// The stored effect: the per-copy effect, or the collective one for the
    /// explicit kind.
    pub fn effect(&self) -> &Matrix {
        match &self.kind {
            TestKind::AllPass { effect }
            | TestKind::Threshold { effect, .. }
            | TestKind::Explicit { effect, .. } => effect,
        }
    }

    /// Dimension of one copy as this test sees it.
    pub fn copy_dim(&self) -> usize {
        match &self.kind {
            TestKind::AllPass { effect } | TestKind::Threshold { effect, .. } => effect.rows(),
            TestKind::Explicit { copy_dim, .. } => *copy_dim,
        }
    }

    /// The accept effect materialized on `i` copies (row-major tensor order).
    ///
    /// Dense and exponential in `i`; guarded by [`EXPLICIT_COPY_CAP`].
    pub fn effect_on_copies(&self, i: usize) -> Result<Matrix> {
        if i > EXPLICIT_COPY_CAP {
            return Err(Error::TooManyCopiesForExplicit(i));
        }
        match &self.kind {
            TestKind::AllPass { effect } => {
                let mut out = Matrix::identity(1);
                for _ in 0..i {
                    out = kron(&out, effect);
                }
                Ok(out)
            }
            TestKind::Threshold { effect, min_passes } => {
                let d = effect.rows();
                let fail = Matrix::identity(d).sub(effect)?;
                let mut out = Matrix::zeros(powi_usize(d, i), powi_usize(d, i));
                // Sum over pass/fail patterns with enough passes.
                for mask in 0..(1usize << i) {
                    if (mask.count_ones() as usize) < *min_passes {
                        continue;
                    }
                    let mut term = Matrix::identity(1);
                    for b in (0..i).rev() {
                        let factor = if mask >> b & 1 == 1 { effect } else { &fail };
                        term = kron(&term, factor);
                    }
                    out = out.add(&term)?;
                }
                Ok(out)
            }
            TestKind::Explicit { effect, copies, .. } => {
                if i != *copies {
                    return Err(Error::InvalidParameter(
                        "explicit test fixed to a different copy count",
                    ));
                }
                Ok(effect.clone())
            }
        }
    }
}

fn powi_usize(base: usize, exp: usize) -> usize {
    let mut out = 1usize;
    for _ in 0..exp {
        out *= base;
    }
    out
}

/// Probability that the test accepts `i` i.i.d. copies of `rho`.
///
/// Per-copy kinds reduce to scalar powers and binomial tails, so `i` may be
/// large; the explicit kind contracts against the stored effect.
pub fn acceptance_probability(test: &AcceptanceTest, rho: &BlockState, i: usize) -> Result<f64> {
    if rho.object().num_blocks() != 1 {
        return Err(Error::MultiBlockUnsupported);
    }
    let block = rho.block(0);
    let d = test.copy_dim();
    if block.rows() != d {
        return Err(Error::ShapeMismatch(block.rows(), block.cols(), d, d));
    }
    match &test.kind {
        TestKind::AllPass { effect } => {
            let p = frobenius_inner(effect, block)?.re.clamp(0.0, 1.0);
            Ok(powi(p, i as u32))
        }
        TestKind::Threshold { effect, min_passes } => {
            let p = frobenius_inner(effect, block)?.re.clamp(0.0, 1.0);
            Ok(binomial_tail(i, *min_passes, p))
        }
        TestKind::Explicit { effect, copies, .. } => {
            if i != *copies {
                return Err(Error::InvalidParameter(
                    "explicit test fixed to a different copy count",
                ));
            }
            let mut power = Matrix::identity(1);
            for _ in 0..i {
                power = kron(&power, block);
            }
            Ok(frobenius_inner(effect, &power)?.re.clamp(0.0, 1.0))
        }
    }
}

/// `P[Bin(n, p) >= k]`, evaluated stably for large `n`.
fn binomial_tail(n: usize, k: usize, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let q = 1.0 - p;
    let (nf, kf) = (n as f64, k as f64);
    // First term in log space, then the ratio recurrence.
    let log_term = libm::lgamma(nf + 1.0) - libm::lgamma(kf + 1.0) - libm::lgamma(nf - kf + 1.0)
        + kf * libm::log(p)
        + (nf - kf) * libm::log(q);
    let mut term = libm::exp(log_term);
    let mut sum = term;
    for j in k..n {
        term *= (nf - j as f64) / (j as f64 + 1.0) * (p / q);
        sum += term;
        if term < 1e-300 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// Round distributions
// ---------------------------------------------------------------------------

/// Distribution over `(rounds r, tested i)` configurations with a hard round
/// cap, plus the separable fallback state prepared on `r = i` branches.
///
/// The fallback is stored as per-client parts, so separability across every
/// client cut holds by construction.
#[derive(Clone, Debug)]
pub struct RoundDistribution {
    cap: usize,
    entries: Vec<(usize, usize, f64)>,
    fallback: Option<Vec<BlockState>>,
}

impl RoundDistribution {
    pub fn from_table(entries: Vec<(usize, usize, f64)>, cap: usize) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParameter("empty round table"));
        }
        let mut total = 0.0;
        for &(r, i, w) in &entries {
            if i > r || r > cap {
                return Err(Error::IndexOutOfRange(r.max(i), cap));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::NonFinite);
            }
            total += w;
        }
        if (total - 1.0).abs() > tol::STATE_TRACE {
            return Err(Error::InvalidTrace(total));
        }
        Ok(Self { cap, entries, fallback: None })
    }

    /// All mass on a single `(rounds, tested)` configuration.
    pub fn point_mass(rounds: usize, tested: usize) -> Result<Self> {
        Self::from_table(alloc::vec![(rounds, tested, 1.0)], rounds)
    }

    /// Uniform over `(r, r-1)` for `r` in `1..=cap`: always test all but the
    /// output copy.
    pub fn uniform(cap: usize) -> Result<Self> {
        if cap == 0 {
            return Err(Error::InvalidParameter("cap must be positive"));
        }
        let w = 1.0 / cap as f64;
        Self::from_table((1..=cap).map(|r| (r, r - 1, w)).collect(), cap)
    }

    /// Truncated geometric over `(r, r-1)`, with the decay rate solved by
    /// bisection so the expected round count hits `mean_rounds`.
    pub fn truncated_geometric(mean_rounds: f64, cap: usize) -> Result<Self> {
        if cap == 0 || !(mean_rounds >= 1.0 && mean_rounds <= cap as f64) {
            return Err(Error::InvalidParameter("mean rounds outside [1, cap]"));
        }
        if cap == 1 || mean_rounds == 1.0 {
            return Self::point_mass(1, 0);
        }
        if mean_rounds == cap as f64 {
            return Self::point_mass(cap, cap - 1);
        }
        let mean_at = |gamma: f64| -> f64 {
            let (mut num, mut den, mut w) = (0.0, 0.0, 1.0);
            for r in 1..=cap {
                num += w * r as f64;
                den += w;
                w *= gamma;
            }
            num / den
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        while mean_at(hi) < mean_rounds {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mean_at(mid) < mean_rounds {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let gamma = 0.5 * (lo + hi);
        let mut weights: Vec<f64> = Vec::with_capacity(cap);
        let mut w = 1.0;
        for _ in 0..cap {
            weights.push(w);
            w *= gamma;
        }
        let total: f64 = weights.iter().sum();
        Self::from_table(
            weights.iter().enumerate().map(|(j, &w)| (j + 1, j, w / total)).collect(),
            cap,
        )
    }

    /// Sets the `r = i` fallback state as explicit per-client parts.
    pub fn with_fallback(mut self, per_client: Vec<BlockState>) -> Result<Self> {
        if per_client.is_empty() {
            return Err(Error::InvalidParameter("empty fallback part list"));
        }
        for part in &per_client {
            if part.object().num_blocks() != 1 {
                return Err(Error::MultiBlockUnsupported);
            }
        }
        self.fallback = Some(per_client);
        Ok(self)
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn fallback_parts(&self) -> Option<&[BlockState]> {
        self.fallback.as_deref()
    }

    /// The assembled fallback product state, if one was declared.
    pub fn fallback_state(&self) -> Option<BlockState> {
        self.fallback.as_ref().map(|parts| {
            let mut out = BlockState::unit();
            for p in parts {
                out = out.tensor(p);
            }
            out
        })
    }

    /// Expected number of rounds `sum p(r,i) r`.
    pub fn expected_rounds(&self) -> f64 {
        self.entries.iter().map(|&(r, _, w)| w * r as f64).sum()
    }

    /// Expected number of tested rounds `sum p(r,i) i`. This is the `N` the
    /// closed-form bounds are stated in: a fixed-round protocol that draws
    /// `N+1` copies and verifies `N` of them has `expected_tested() = N`.
    pub fn expected_tested(&self) -> f64 {
        self.entries.iter().map(|&(_, i, w)| w * i as f64).sum()
    }

    /// Whether any weight sits on an `r = i` (no output copy) branch.
    pub fn has_terminal_mass(&self) -> bool {
        self.entries.iter().any(|&(r, i, w)| r == i && w > 0.0)
    }
}

/// Checks distribution/target compatibility shared by the comb builder and
/// the analytic path; returns the fallback as a full state when needed.
fn check_dist(t: &TargetSpec, dist: &RoundDistribution) -> Result<Option<BlockState>> {
    if !dist.has_terminal_mass() {
        return Ok(None);
    }
    if t.clients() == 1 {
        // Single-client tables must satisfy p(l,l) = 0.
        return Err(Error::InvalidParameter("terminal branch requires several clients"));
    }
    let parts = dist
        .fallback_parts()
        .ok_or(Error::InvalidParameter("terminal branch without fallback state"))?;
    if parts.len() != t.clients() {
        return Err(Error::WrongBlockCount { expected: t.clients(), got: parts.len() });
    }
    for (part, &d) in parts.iter().zip(t.client_dims()) {
        if part.block(0).rows() != d {
            return Err(Error::ShapeMismatch(part.block(0).rows(), part.block(0).cols(), d, d));
        }
    }
    Ok(dist.fallback_state())
}

fn tests_for<'a>(tests: &'a [AcceptanceTest], m: usize) -> Result<impl Fn(usize) -> &'a AcceptanceTest> {
    if tests.is_empty() || (tests.len() != 1 && tests.len() != m) {
        return Err(Error::WrongEntryCount { expected: m, got: tests.len() });
    }
    let broadcast = tests.len() == 1;
    Ok(move |j: usize| if broadcast { &tests[0] } else { &tests[j] })
}

// ---------------------------------------------------------------------------
// Ideal resource
// ---------------------------------------------------------------------------

/// Output object `[prod n_i] (+) [1]`: certified state or abort flag.
pub fn game_output_object(t: &TargetSpec) -> AlgebraObject {
    t.object().dsum(&AlgebraObject::unit())
}

fn accept_output(t: &TargetSpec, accept: Matrix, abort_mass: f64) -> Result<BlockState> {
    BlockState::new(
        game_output_object(t),
        alloc::vec![accept, Matrix::diag(&[abort_mass])],
    )
}

/// The ideal verification resource: classical bit in, target state or abort
/// out. Input weight on `c = 0` releases the target, weight on `c = 1`
/// aborts.
pub fn ideal_channel(t: &TargetSpec) -> Channel {
    let release = accept_output(t, t.state().block(0).clone(), 0.0)
        .expect("target state is a valid accept branch");
    let abort = accept_output(t, Matrix::zeros(t.total_dim(), t.total_dim()), 1.0)
        .expect("abort branch is a valid state");
    let branches = Channel::prepare(&release).dsum(&Channel::prepare(&abort));
    Channel::forget_branch(2, branches.codomain())
        .expect("two identical branch chunks")
        .compose(&branches)
        .expect("forget-branch composes with the branch pair")
}

/// The ideal resource together with its target.
#[derive(Clone, Debug)]
pub struct IdealResource {
    target: TargetSpec,
    channel: Channel,
}

impl IdealResource {
    pub fn new(target: TargetSpec) -> Self {
        let channel = ideal_channel(&target);
        Self { target, channel }
    }

    pub fn target(&self) -> &TargetSpec {
        &self.target
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }
}

/// The ideal resource with its filter attached: the source bit is forced to
/// `c = 0`, leaving the constant channel `[1] -> (target, 0)`.
pub fn filtered_ideal(t: &TargetSpec) -> Channel {
    let release = accept_output(t, t.state().block(0).clone(), 0.0)
        .expect("target state is a valid accept branch");
    Channel::prepare(&release)
}

/// Ideal resource with `lambda` applied on the accept branch only.
pub fn post_composed_ideal(t: &TargetSpec, lambda: &Channel) -> Result<Channel> {
    if lambda.domain() != t.object() {
        return Err(Error::DomainMismatch);
    }
    lambda
        .dsum(&Channel::identity(&AlgebraObject::unit()))
        .compose(&ideal_channel(t))
}

// ---------------------------------------------------------------------------
// Client combs
// ---------------------------------------------------------------------------

/// Measurement finisher on `i + 1` copies with the output copy last: tests
/// the leading `i` copies with `mu0` and either releases the last copy or
/// aborts. `[d^(i+1)] -> [d] (+) [1]`.
fn test_and_release(mu0: &Matrix, i: usize, copy: &AlgebraObject) -> Result<Channel> {
    let d = copy.dims()[0];
    let full = copy.tensor_power(i + 1);
    let id_copy = Matrix::identity(d);
    let mu1 = Matrix::identity(mu0.rows()).sub(mu0)?;
    let lift = Channel::povm_channel(&[kron(mu0, &id_copy), kron(&mu1, &id_copy)], false)?;
    let acceptor = if i == 0 {
        Channel::identity(copy)
    } else {
        Channel::partial_trace(1, &[copy.tensor_power(i), copy.clone()])?
    };
    let aborter = Channel::trace_channel(&full);
    acceptor.dsum(&aborter).compose(&lift)
}

/// Cut-and-choose client comb for a fixed round count: `n + 1` source holes,
/// an output position sampled from `eta` (over arrival order), the sampling
/// tag erased, the remaining `n` copies tested, and the chosen copy released
/// on accept.
///
/// Dense in `d^(n+1)`; intended as an oracle for the analytic path.
pub fn simple_client_comb(
    t: &TargetSpec,
    n: usize,
    test: &AcceptanceTest,
    eta: &[f64],
) -> Result<Comb> {
    let d = t.total_dim();
    if test.copy_dim() != d {
        return Err(Error::ShapeMismatch(test.copy_dim(), test.copy_dim(), d, d));
    }
    if eta.len() != n + 1 {
        return Err(Error::WrongEntryCount { expected: n + 1, got: eta.len() });
    }
    let eta_state = BlockState::classical(eta)?;
    let copy = t.object().clone();
    let unit = AlgebraObject::unit();
    let received = copy.tensor_power(n + 1);

    // Memory after t holes holds the copies newest-first; arrival copy k
    // sits at factor position n + 2 - k. Branch k moves it to the back.
    let factors = alloc::vec![copy.clone(); n + 1];
    let mut branches = Vec::with_capacity(n + 1);
    for k in 1..=n + 1 {
        branches.push(Channel::move_back(n + 2 - k, n + 1, &factors)?);
    }
    let chooser = Channel::elif_channel(&branches)?;
    let sampler = Channel::prepare(&eta_state).tensor(&Channel::identity(&received));
    let eraser = Channel::forget_branch(n + 1, chooser.codomain())?;
    let mu0 = test.effect_on_copies(n)?;
    let finisher = test_and_release(&mu0, n, &copy)?;
    let last_stage = finisher.compose(&eraser.compose(&chooser.compose(&sampler)?)?)?;

    let mut signature = Vec::with_capacity(n + 1);
    let mut injection = Vec::with_capacity(n + 1);
    let mut stages = Vec::with_capacity(n + 2);
    let mut memories = Vec::with_capacity(n + 1);
    stages.push(Channel::identity(&unit));
    for h in 0..=n {
        signature.push((unit.clone(), copy.clone()));
        injection.push(h);
        memories.push(copy.tensor_power(h));
        if h < n {
            stages.push(Channel::identity(&copy.tensor(&copy.tensor_power(h))));
        }
    }
    stages.push(last_stage);
    Comb::new(signature, injection, stages, memories)
}

/// General cut-and-choose comb: the `(r, i)` configuration is sampled up
/// front and rides the classical memory wire; every branch consumes all
/// `cap` holes and traces the copies it does not use. On `r = i` branches
/// the fallback state is released instead of a received copy.
///
/// The marginalized output choice is the first copy after the tested block.
pub fn general_client_comb(
    t: &TargetSpec,
    dist: &RoundDistribution,
    tests: &[AcceptanceTest],
) -> Result<Comb> {
    let d = t.total_dim();
    let m = dist.entries().len();
    let pick = tests_for(tests, m)?;
    for j in 0..m {
        if pick(j).copy_dim() != d {
            return Err(Error::ShapeMismatch(pick(j).copy_dim(), pick(j).copy_dim(), d, d));
        }
    }
    let fallback = check_dist(t, dist)?;
    let copy = t.object().clone();
    let unit = AlgebraObject::unit();
    let cap = dist.cap();
    let weights: Vec<f64> = dist.entries().iter().map(|&(_, _, w)| w).collect();
    let tag_state = BlockState::classical(&weights)?;

    let mut branches = Vec::with_capacity(m);
    for (j, &(r, i, _)) in dist.entries().iter().enumerate() {
        branches.push(config_branch(pick(j), fallback.as_ref(), r, i, cap, &copy)?);
    }

    if cap == 0 {
        // Zero-cap tables never touch the source: a 0-hole comb.
        let chooser = Channel::elif_channel(&branches)?;
        let eraser = Channel::forget_branch(m, chooser.codomain())?;
        let ch = eraser.compose(&chooser.compose(&Channel::prepare(&tag_state))?)?;
        return Ok(Comb::from_channel(ch));
    }

    let chooser = Channel::elif_channel(&branches)?;
    let eraser = Channel::forget_branch(m, chooser.codomain())?;
    let last_stage = eraser.compose(&chooser)?;

    let tag = AlgebraObject::classical(m);
    let mut signature = Vec::with_capacity(cap);
    let mut injection = Vec::with_capacity(cap);
    let mut stages = Vec::with_capacity(cap + 1);
    let mut memories = Vec::with_capacity(cap);
    stages.push(Channel::prepare(&tag_state));
    for h in 0..cap {
        signature.push((unit.clone(), copy.clone()));
        injection.push(h);
        memories.push(tag.tensor(&copy.tensor_power(h)));
        if h + 1 < cap {
            stages.push(Channel::identity(&copy.tensor(&tag.tensor(&copy.tensor_power(h)))));
        }
    }
    stages.push(last_stage);
    Comb::new(signature, injection, stages, memories)
}

/// One `(r, i)` configuration on the full `cap`-copy register
/// (newest-first): trace the unused tail, test, and release or abort.
fn config_branch(
    test: &AcceptanceTest,
    fallback: Option<&BlockState>,
    r: usize,
    i: usize,
    cap: usize,
    copy: &AlgebraObject,
) -> Result<Channel> {
    let unused = cap - r;
    let drop_unused = if r == 0 {
        Channel::trace_channel(&copy.tensor_power(cap))
    } else if unused > 0 {
        Channel::partial_trace(1, &[copy.tensor_power(unused), copy.tensor_power(r)])?
    } else {
        Channel::identity(&copy.tensor_power(cap))
    };

    let core = if r == i {
        // No output copy: test everything, release the fallback on accept.
        let chi = fallback.ok_or(Error::InvalidParameter("terminal branch without fallback state"))?;
        let mu0 = test.effect_on_copies(r)?;
        let mu1 = Matrix::identity(mu0.rows()).sub(&mu0)?;
        let verdict = Channel::povm_channel(&[mu0, mu1], true)?;
        Channel::prepare(chi)
            .dsum(&Channel::identity(&AlgebraObject::unit()))
            .compose(&verdict)?
    } else {
        // Output copy is arrival i + 1; arrivals i+2..=r are spectators.
        let spectators = r - i - 1;
        let drop_spectators = if spectators > 0 {
            Channel::partial_trace(1, &[copy.tensor_power(spectators), copy.tensor_power(i + 1)])?
        } else {
            Channel::identity(&copy.tensor_power(i + 1))
        };
        let reorder = if i > 0 {
            Channel::move_back(1, i + 1, &alloc::vec![copy.clone(); i + 1])?
        } else {
            Channel::identity(copy)
        };
        let mu0 = test.effect_on_copies(i)?;
        test_and_release(&mu0, i, copy)?
            .compose(&reorder.compose(&drop_spectators)?)?
    };
    core.compose(&drop_unused)
}

// ---------------------------------------------------------------------------
// Analytic i.i.d. evaluation
// ---------------------------------------------------------------------------

/// Game output when every hole is filled with `prepare(rho)`: the accept
/// block collects `p(r,i) P_i(rho)` times the released state, the abort block
/// the rest. Scales to round counts far beyond the dense builders.
pub fn iid_game_output(
    t: &TargetSpec,
    dist: &RoundDistribution,
    tests: &[AcceptanceTest],
    rho: &BlockState,
) -> Result<BlockState> {
    if rho.object() != t.object() {
        return Err(Error::ObjectMismatch);
    }
    let pick = tests_for(tests, dist.entries().len())?;
    let fallback = check_dist(t, dist)?;
    let d = t.total_dim();
    let mut accept = Matrix::zeros(d, d);
    let mut mass = 0.0;
    for (j, &(r, i, w)) in dist.entries().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let p = acceptance_probability(pick(j), rho, i)?;
        let released = if r == i {
            fallback.as_ref().expect("check_dist guarantees a fallback").block(0)
        } else {
            rho.block(0)
        };
        accept = accept.add(&released.scale(Complex64::new(w * p, 0.0)))?;
        mass += w * p;
    }
    accept_output(t, accept, 1.0 - mass)
}

/// [`iid_game_output`] at the target state itself.
pub fn honest_game_output(
    t: &TargetSpec,
    dist: &RoundDistribution,
    tests: &[AcceptanceTest],
) -> Result<BlockState> {
    iid_game_output(t, dist, tests, t.state())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combs::ResourceTuple;
    use crate::metrics::trace_distance_half;

    const ONE: Complex64 = Complex64::new(1.0, 0.0);

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn qubit_zero_target() -> TargetSpec {
        let state = BlockState::pure(&[ONE, c(0.0, 0.0)]).unwrap();
        TargetSpec::new(alloc::vec![2], state, 0).unwrap()
    }

    fn apply_classical(ch: &Channel, weights: &[f64]) -> BlockState {
        ch.apply(&BlockState::classical(weights).unwrap()).unwrap()
    }

    #[test]
    fn ideal_channel_branches() {
        let t = qubit_zero_target();
        let ideal = ideal_channel(&t);
        let release = apply_classical(&ideal, &[1.0, 0.0]);
        assert_eq!(release.block(0).at(0, 0), ONE);
        assert_eq!(release.block(1).at(0, 0), c(0.0, 0.0));
        let abort = apply_classical(&ideal, &[0.0, 1.0]);
        assert_eq!(abort.block(0).max_abs_diff(&Matrix::zeros(2, 2)), 0.0);
        assert_eq!(abort.block(1).at(0, 0), ONE);
        let mixed = apply_classical(&ideal, &[0.3, 0.7]);
        assert!((mixed.block(0).at(0, 0).re - 0.3).abs() < 1e-15);
        assert!((mixed.block(1).at(0, 0).re - 0.7).abs() < 1e-15);
    }

    #[test]
    fn filtered_ideal_always_releases() {
        let t = qubit_zero_target();
        let filtered = filtered_ideal(&t);
        let out = filtered.apply(&BlockState::unit()).unwrap();
        assert_eq!(out.block(0).at(0, 0), ONE);
        assert_eq!(out.block(1).at(0, 0), c(0.0, 0.0));
        // Reading out the accept flag gives outcome 0 with certainty.
        let readout = Channel::trace_channel(t.object())
            .dsum(&Channel::identity(&AlgebraObject::unit()))
            .compose(&filtered)
            .unwrap();
        let flag = readout.apply(&BlockState::unit()).unwrap();
        assert!((flag.block(0).at(0, 0).re - 1.0).abs() < 1e-15);
        assert_eq!(flag.block(1).at(0, 0), c(0.0, 0.0));
    }

    #[test]
    fn post_composition_acts_on_accept_branch_only() {
        let t = qubit_zero_target();
        let same = post_composed_ideal(&t, &Channel::identity(t.object())).unwrap();
        assert_eq!(same.action().max_abs_diff(ideal_channel(&t).action()), 0.0);

        let plus = BlockState::pure(&[c(0.5f64.sqrt(), 0.0), c(0.5f64.sqrt(), 0.0)]).unwrap();
        let replace = Channel::prepare(&plus).compose(&Channel::trace_channel(t.object())).unwrap();
        let replaced = post_composed_ideal(&t, &replace).unwrap();
        let out = apply_classical(&replaced, &[1.0, 0.0]);
        assert!(out.block(0).max_abs_diff(plus.block(0)) < 1e-12);
        let abort = apply_classical(&replaced, &[0.0, 1.0]);
        assert_eq!(abort.block(1).at(0, 0), ONE);

        let wrong = Channel::identity(&AlgebraObject::single(3).unwrap());
        assert!(matches!(post_composed_ideal(&t, &wrong), Err(Error::DomainMismatch)));
    }

    #[test]
    fn acceptance_probability_examples() {
        let t = qubit_zero_target();
        let test = AcceptanceTest::default_for(&t).unwrap();
        for i in 0..5 {
            assert_eq!(acceptance_probability(&test, t.state(), i).unwrap(), 1.0);
        }

        let rho = BlockState::single_block(Matrix::diag(&[15.0 / 16.0, 1.0 / 16.0])).unwrap();
        let p4 = acceptance_probability(&test, &rho, 4).unwrap();
        assert_eq!(p4, 50625.0 / 65536.0);
        let explicit =
            AcceptanceTest::explicit(test.effect_on_copies(4).unwrap(), 4, 2).unwrap();
        assert_eq!(acceptance_probability(&explicit, &rho, 4).unwrap(), p4);

        let zero_threshold =
            AcceptanceTest::threshold(Matrix::projector(&[ONE, c(0.0, 0.0)]).unwrap(), 0).unwrap();
        assert_eq!(acceptance_probability(&zero_threshold, &rho, 7).unwrap(), 1.0);
    }

    #[test]
    fn threshold_tail_matches_direct_sum() {
        let e = Matrix::projector(&[ONE, c(0.0, 0.0)]).unwrap();
        let test = AcceptanceTest::threshold(e, 2).unwrap();
        let rho = BlockState::single_block(Matrix::diag(&[0.75, 0.25])).unwrap();
        let got = acceptance_probability(&test, &rho, 3).unwrap();
        // P[Bin(3, 3/4) >= 2] = 3 (3/4)^2 (1/4) + (3/4)^3.
        let want = 3.0 * 0.75 * 0.75 * 0.25 + 0.75f64.powi(3);
        assert!((got - want).abs() < 1e-15);
        // Large-n tail stays in range and is monotone in p.
        let tail_low = binomial_tail(100_000, 50_000, 0.49);
        let tail_high = binomial_tail(100_000, 50_000, 0.51);
        assert!(tail_low < 1e-9);
        assert!(tail_high > 1.0 - 1e-9);
    }

    #[test]
    fn explicit_test_guards() {
        assert!(matches!(
            AcceptanceTest::explicit(Matrix::identity(32), 5, 2),
            Err(Error::TooManyCopiesForExplicit(5))
        ));
        let exp = AcceptanceTest::explicit(Matrix::identity(4), 2, 2).unwrap();
        let rho = BlockState::maximally_mixed(2).unwrap();
        assert!(matches!(
            acceptance_probability(&exp, &rho, 3),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn round_distribution_validation() {
        assert!(matches!(
            RoundDistribution::from_table(alloc::vec![(2, 1, 0.5)], 2),
            Err(Error::InvalidTrace(_))
        ));
        assert!(matches!(
            RoundDistribution::from_table(alloc::vec![(3, 1, 1.0)], 2),
            Err(Error::IndexOutOfRange(3, 2))
        ));
        assert!(matches!(
            RoundDistribution::from_table(alloc::vec![(1, 2, 1.0)], 2),
            Err(Error::IndexOutOfRange(2, 2))
        ));
        let u = RoundDistribution::uniform(4).unwrap();
        assert!((u.expected_rounds() - 2.5).abs() < 1e-12);

        let g = RoundDistribution::truncated_geometric(10.0, 1000).unwrap();
        assert!((g.expected_rounds() - 10.0).abs() < 1e-9);
        assert_eq!(g.entries().len(), 1000);
        let edge = RoundDistribution::truncated_geometric(1.0, 5).unwrap();
        assert_eq!(edge.entries(), &[(1, 0, 1.0)]);
    }

    #[test]
    fn honest_simple_comb_releases_target_exactly() {
        let t = qubit_zero_target();
        let test = AcceptanceTest::default_for(&t).unwrap();
        let comb = simple_client_comb(&t, 2, &test, &[0.25, 0.25, 0.5]).unwrap();
        assert_eq!(comb.holes(), 3);
        let source = Channel::prepare(t.state());
        let filled = comb.fill(&ResourceTuple::iid(&source, 3)).unwrap();
        let out = filled.apply(&BlockState::unit()).unwrap();
        assert_eq!(out.block(0).max_abs_diff(t.state().block(0)), 0.0);
        assert_eq!(out.block(1).at(0, 0), c(0.0, 0.0));
        let filtered_out = filtered_ideal(&t).apply(&BlockState::unit()).unwrap();
        assert_eq!(trace_distance_half(&out, &filtered_out).unwrap(), 0.0);
    }

    #[test]
    fn filled_simple_comb_matches_analytic_path() {
        let t = qubit_zero_target();
        let test = AcceptanceTest::default_for(&t).unwrap();
        let n = 2;
        let comb = simple_client_comb(&t, n, &test, &[0.2, 0.3, 0.5]).unwrap();
        let mut rho_block = Matrix::diag(&[0.8, 0.2]);
        rho_block.set(0, 1, c(0.1, 0.05));
        rho_block.set(1, 0, c(0.1, -0.05));
        let rho = BlockState::single_block(rho_block).unwrap();
        let filled = comb.fill(&ResourceTuple::iid(&Channel::prepare(&rho), n + 1)).unwrap();
        let got = filled.apply(&BlockState::unit()).unwrap();
        let dist = RoundDistribution::point_mass(n + 1, n).unwrap();
        let want = iid_game_output(&t, &dist, core::slice::from_ref(&test), &rho).unwrap();
        assert!(got.max_abs_diff(&want) < 1e-10);
    }

    #[test]
    fn zero_test_comb_forwards_received_state() {
        let t = qubit_zero_target();
        let test = AcceptanceTest::default_for(&t).unwrap();
        let comb = simple_client_comb(&t, 0, &test, &[1.0]).unwrap();
        let rho = BlockState::maximally_mixed(2).unwrap();
        let filled = comb.fill(&ResourceTuple::iid(&Channel::prepare(&rho), 1)).unwrap();
        let out = filled.apply(&BlockState::unit()).unwrap();
        assert!(out.block(0).max_abs_diff(rho.block(0)) < 1e-14);
        assert!(out.block(1).at(0, 0).norm() < 1e-14);
    }

    #[test]
    fn point_mass_general_comb_reproduces_simple_comb() {
        let t = qubit_zero_target();
        let test = AcceptanceTest::default_for(&t).unwrap();
        let n = 1;
        // Simple comb with the output forced to the newest arrival matches
        // the general builder's marginalized choice.
        let mut eta = alloc::vec![0.0; n + 1];
        eta[n] = 1.0;
        let simple = simple_client_comb(&t, n, &test, &eta).unwrap();
        let dist = RoundDistribution::point_mass(n + 1, n).unwrap();
        let general = general_client_comb(&t, &dist, core::slice::from_ref(&test)).unwrap();
        assert_eq!(general.holes(), simple.holes());
        let rho = BlockState::single_block(Matrix::diag(&[0.9, 0.1])).unwrap();
        let r = ResourceTuple::iid(&Channel::prepare(&rho), n + 1);
        let a = simple.fill(&r).unwrap();
        let b = general.fill(&r).unwrap();
        assert!(a.action().max_abs_diff(b.action()) < 1e-12);
    }

    #[test]
    fn single_client_terminal_mass_rejected() {
        let t = qubit_zero_target();
        let test = AcceptanceTest::default_for(&t).unwrap();
        let dist = RoundDistribution::from_table(alloc::vec![(2, 2, 1.0)], 2).unwrap();
        assert!(matches!(
            general_client_comb(&t, &dist, core::slice::from_ref(&test)),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            iid_game_output(&t, &dist, core::slice::from_ref(&test), t.state()),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn terminal_branch_requires_fallback() {
        let bell = BlockState::pure(&[
            c(0.5f64.sqrt(), 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(0.5f64.sqrt(), 0.0),
        ])
        .unwrap();
        let t = TargetSpec::new(alloc::vec![2, 2], bell, 1).unwrap();
        let test = AcceptanceTest::default_for(&t).unwrap();
        let dist = RoundDistribution::from_table(alloc::vec![(1, 1, 0.4), (2, 1, 0.6)], 2).unwrap();
        assert!(matches!(
            iid_game_output(&t, &dist, core::slice::from_ref(&test), t.state()),
            Err(Error::InvalidParameter(_))
        ));
        let zero = BlockState::pure(&[ONE, c(0.0, 0.0)]).unwrap();
        let dist = dist.with_fallback(alloc::vec![zero.clone(), zero]).unwrap();
        let out = iid_game_output(&t, &dist, core::slice::from_ref(&test), t.state()).unwrap();
        // Accept mass is 1 (projective test passes the target), split between
        // the Bell release and the |00> fallback.
        assert!((out.block(1).at(0, 0).re - 0.0).abs() < 1e-12);
        assert!((out.block(0).at(0, 0).re - (0.4 + 0.6 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn honest_distance_matches_rejection_mass() {
        let t = qubit_zero_target();
        // Damped test: accepts the target only with probability 0.9 per copy.
        let test = AcceptanceTest::all_pass(Matrix::diag(&[0.9, 0.0])).unwrap();
        let dist = RoundDistribution::from_table(
            alloc::vec![(2, 1, 0.5), (3, 2, 0.5)],
            3,
        )
        .unwrap();
        let honest = honest_game_output(&t, &dist, core::slice::from_ref(&test)).unwrap();
        let filtered_out = filtered_ideal(&t).apply(&BlockState::unit()).unwrap();
        let eps = trace_distance_half(&honest, &filtered_out).unwrap();
        let expected = 1.0 - (0.5 * 0.9 + 0.5 * 0.81);
        assert!((eps - expected).abs() < 1e-12);
    }

    #[test]
    fn target_spec_validation() {
        let state = BlockState::maximally_mixed(2).unwrap();
        assert!(matches!(
            TargetSpec::new(alloc::vec![2], state.clone(), 1),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            TargetSpec::new(alloc::vec![2, 2], state, 1),
            Err(Error::ObjectMismatch)
        ));
        let mixed = TargetSpec::new(alloc::vec![2], BlockState::maximally_mixed(2).unwrap(), 0)
            .unwrap();
        assert!(!mixed.is_pure());
        assert!(matches!(mixed.pure_vector(), Err(Error::TargetNotPure)));
        let support = mixed.support_projector().unwrap();
        assert!(support.max_abs_diff(&Matrix::identity(2)) < 1e-10);
    }
}
