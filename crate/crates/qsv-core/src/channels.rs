//! States and channels over direct sums of matrix algebras, plus the
//! combinator calculus used to assemble protocols.
//!
//! A system is an [`AlgebraObject`]: a list of block dimensions `[n1..nk]`
//! naming `M_n1 (+) ... (+) M_nk`. All-1 lists are classical registers; `[1]`
//! is the tensor unit; the empty list is the zero object. A [`Channel`] is a
//! trace-preserving linear map stored as a dense action matrix on the
//! vectorized block operator space (dimension `sum n_i^2`, row-major vec per
//! block). Complete positivity is guaranteed by construction from a closed
//! generator set (prepare, POVMs, Kraus sets, partial traces, re-indexings,
//! and their compositions); tests additionally verify Choi positivity per
//! single-block component.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::algebra::{kron, Matrix};
use crate::error::{Error, Result};
use crate::tol;

// ---------------------------------------------------------------------------
// Objects
// ---------------------------------------------------------------------------

/// A direct sum of matrix algebras, named by its block dimensions.
///
/// `[1]` is the tensor unit, `[]` the zero object, `[1,1,..]` a classical
/// register. Block dimensions are strictly positive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlgebraObject {
    dims: Vec<usize>,
}

impl AlgebraObject {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::ZeroDim);
        }
        Ok(Self { dims })
    }

    /// The tensor unit `[1]`.
    pub fn unit() -> Self {
        Self { dims: vec![1] }
    }

    /// The zero object `[]` (the unit for direct sums).
    pub fn zero() -> Self {
        Self { dims: Vec::new() }
    }

    /// Single matrix block `[n]`.
    pub fn single(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    /// Classical register with `n` outcomes: `[1; n]`.
    pub fn classical(n: usize) -> Self {
        Self { dims: vec![1; n] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_blocks(&self) -> usize {
        self.dims.len()
    }

    pub fn is_zero(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn is_classical(&self) -> bool {
        self.dims.iter().all(|&d| d == 1)
    }

    /// Dimension of the vectorized operator space, `sum n_i^2`.
    pub fn op_dim(&self) -> usize {
        self.dims.iter().map(|&d| d * d).sum()
    }

    /// Start of block `b` in the vectorized operator space.
    pub fn op_offset(&self, b: usize) -> usize {
        self.dims[..b].iter().map(|&d| d * d).sum()
    }

    /// Decomposes a flat operator-space index into `(block, row, col)`.
    pub fn split_op_index(&self, flat: usize) -> (usize, usize, usize) {
        let mut rest = flat;
        for (b, &d) in self.dims.iter().enumerate() {
            if rest < d * d {
                return (b, rest / d, rest % d);
            }
            rest -= d * d;
        }
        panic!("operator index {flat} out of range");
    }

    /// Inverse of [`split_op_index`](Self::split_op_index).
    pub fn flat_op_index(&self, block: usize, row: usize, col: usize) -> usize {
        self.op_offset(block) + row * self.dims[block] + col
    }

    /// Direct sum: concatenation of the dimension lists.
    pub fn dsum(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { dims }
    }

    /// Tensor product: all pairwise products in row-major pair order.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = Vec::with_capacity(self.dims.len() * other.dims.len());
        for &a in &self.dims {
            for &b in &other.dims {
                dims.push(a * b);
            }
        }
        Self { dims }
    }

    /// `n`-fold tensor power; `n = 0` gives the unit.
    pub fn tensor_power(&self, n: usize) -> Self {
        let mut out = Self::unit();
        for _ in 0..n {
            out = out.tensor(self);
        }
        out
    }
}

/// Free-function alias for [`AlgebraObject::tensor`].
pub fn object_tensor(a: &AlgebraObject, b: &AlgebraObject) -> AlgebraObject {
    a.tensor(b)
}

/// Free-function alias for [`AlgebraObject::dsum`].
pub fn object_dsum(a: &AlgebraObject, b: &AlgebraObject) -> AlgebraObject {
    a.dsum(b)
}

// ---------------------------------------------------------------------------
// States
// ---------------------------------------------------------------------------

/// A density operator over an [`AlgebraObject`]: one PSD block per dimension,
/// total trace 1.
#[derive(Clone, Debug)]
pub struct BlockState {
    object: AlgebraObject,
    blocks: Vec<Matrix>,
}

impl BlockState {
    /// Validates block shapes, Hermiticity, positivity, and total trace.
    pub fn new(object: AlgebraObject, blocks: Vec<Matrix>) -> Result<Self> {
        if blocks.len() != object.num_blocks() {
            return Err(Error::WrongBlockCount {
                expected: object.num_blocks(),
                got: blocks.len(),
            });
        }
        let mut total = 0.0;
        for (b, block) in blocks.iter().enumerate() {
            let d = object.dims[b];
            if block.rows() != d || block.cols() != d {
                return Err(Error::ShapeMismatch(block.rows(), block.cols(), d, d));
            }
            let eig = crate::algebra::hermitian_eig(block)?;
            if eig.min_eigenvalue() < tol::STATE_PSD {
                return Err(Error::NotPSD(eig.min_eigenvalue()));
            }
            total += block.trace().re;
        }
        if (total - 1.0).abs() > tol::STATE_TRACE {
            return Err(Error::InvalidTrace(total));
        }
        Ok(Self { object, blocks })
    }

    /// Pure state `|v><v|` on the single block `[len(v)]`.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let object = AlgebraObject::single(amplitudes.len())?;
        let block = Matrix::projector(amplitudes)?;
        Ok(Self { object, blocks: vec![block] })
    }

    /// Probability distribution on the classical register `[1; len(probs)]`.
    pub fn classical(probs: &[f64]) -> Result<Self> {
        let object = AlgebraObject::classical(probs.len());
        let blocks = probs.iter().map(|&p| Matrix::diag(&[p])).collect();
        Self::new(object, blocks)
    }

    /// The unique state on the tensor unit `[1]`.
    pub fn unit() -> Self {
        Self { object: AlgebraObject::unit(), blocks: vec![Matrix::identity(1)] }
    }

    /// `I/n` on `[n]`.
    pub fn maximally_mixed(n: usize) -> Result<Self> {
        let object = AlgebraObject::single(n)?;
        let block = Matrix::identity(n).scale(Complex64::new(1.0 / n as f64, 0.0));
        Ok(Self { object, blocks: vec![block] })
    }

    /// Single-block state from a density matrix.
    pub fn single_block(block: Matrix) -> Result<Self> {
        let object = AlgebraObject::single(block.rows())?;
        Self::new(object, vec![block])
    }

    pub fn object(&self) -> &AlgebraObject {
        &self.object
    }

    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &Matrix {
        &self.blocks[i]
    }

    /// Total trace; 1 within tolerance by the constructor invariant.
    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(|b| b.trace().re).sum()
    }

    /// Concatenated row-major vectorizations of the blocks.
    pub fn vectorize(&self) -> Vec<Complex64> {
        let mut v = Vec::with_capacity(self.object.op_dim());
        for block in &self.blocks {
            v.extend_from_slice(block.entries());
        }
        v
    }

    /// Product state on the tensored object, blocks in row-major pair order.
    pub fn tensor(&self, other: &Self) -> Self {
        let object = self.object.tensor(&other.object);
        let mut blocks = Vec::with_capacity(self.blocks.len() * other.blocks.len());
        for a in &self.blocks {
            for b in &other.blocks {
                blocks.push(kron(a, b));
            }
        }
        Self { object, blocks }
    }

    /// `n`-fold tensor power; `n = 0` gives the unit state.
    pub fn tensor_power(&self, n: usize) -> Self {
        let mut out = Self::unit();
        for _ in 0..n {
            out = out.tensor(self);
        }
        out
    }

    /// Largest entry-wise deviation across blocks; objects must agree.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        debug_assert!(self.object == other.object);
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Channels
// ---------------------------------------------------------------------------

/// Construction tree of a channel, for diagnostics.
#[derive(Clone, Debug)]
pub enum Provenance {
    Generator(&'static str),
    Compose(Box<Provenance>, Box<Provenance>),
    Tensor(Box<Provenance>, Box<Provenance>),
    Dsum(Box<Provenance>, Box<Provenance>),
}

impl core::fmt::Display for Provenance {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Provenance::Generator(name) => write!(f, "{name}"),
            Provenance::Compose(a, b) => write!(f, "({a} . {b})"),
            Provenance::Tensor(a, b) => write!(f, "({a} (x) {b})"),
            Provenance::Dsum(a, b) => write!(f, "({a} (+) {b})"),
        }
    }
}

/// A trace-preserving linear map between block operator spaces.
///
/// Invariant: the dual applied to the codomain identity returns the domain
/// identity within [`tol::TRACE_PRESERVING`] (checked at construction).
#[derive(Clone, Debug)]
pub struct Channel {
    domain: AlgebraObject,
    codomain: AlgebraObject,
    action: Matrix,
    provenance: Provenance,
}

/// Covector picking out the diagonal positions of the vectorized space:
/// its pairing with vec(X) is the total trace of X.
fn trace_covector(obj: &AlgebraObject) -> Vec<f64> {
    let mut t = vec![0.0; obj.op_dim()];
    for b in 0..obj.num_blocks() {
        for i in 0..obj.dims()[b] {
            t[obj.flat_op_index(b, i, i)] = 1.0;
        }
    }
    t
}

impl Channel {
    /// Wraps a raw action matrix, validating shape and trace preservation.
    /// Complete positivity is not checked here; use the generator
    /// constructors for maps that must be CPTP by construction.
    pub fn from_action(
        domain: AlgebraObject,
        codomain: AlgebraObject,
        action: Matrix,
    ) -> Result<Self> {
        if action.rows() != codomain.op_dim() || action.cols() != domain.op_dim() {
            return Err(Error::ShapeMismatch(
                action.rows(),
                action.cols(),
                codomain.op_dim(),
                domain.op_dim(),
            ));
        }
        let ch = Self { domain, codomain, action, provenance: Provenance::Generator("action") };
        ch.check_trace_preserving()?;
        Ok(ch)
    }

    fn tagged(
        domain: AlgebraObject,
        codomain: AlgebraObject,
        action: Matrix,
        provenance: Provenance,
    ) -> Result<Self> {
        let ch = Self { domain, codomain, action, provenance };
        ch.check_trace_preserving()?;
        Ok(ch)
    }

    fn check_trace_preserving(&self) -> Result<()> {
        let t_cod = trace_covector(&self.codomain);
        let t_dom = trace_covector(&self.domain);
        let mut worst = 0.0f64;
        for q in 0..self.domain.op_dim() {
            let mut acc = Complex64::new(0.0, 0.0);
            for p in 0..self.codomain.op_dim() {
                if t_cod[p] != 0.0 {
                    acc += self.action.at(p, q);
                }
            }
            worst = worst.max((acc - t_dom[q]).norm());
        }
        if worst > tol::TRACE_PRESERVING {
            return Err(Error::NotTracePreserving(worst));
        }
        Ok(())
    }

    pub fn domain(&self) -> &AlgebraObject {
        &self.domain
    }

    pub fn codomain(&self) -> &AlgebraObject {
        &self.codomain
    }

    pub fn action(&self) -> &Matrix {
        &self.action
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Identity channel.
    pub fn identity(a: &AlgebraObject) -> Self {
        Self {
            domain: a.clone(),
            codomain: a.clone(),
            action: Matrix::identity(a.op_dim()),
            provenance: Provenance::Generator("identity"),
        }
    }

    /// `self . earlier` (apply `earlier` first).
    pub fn compose(&self, earlier: &Self) -> Result<Self> {
        if earlier.codomain != self.domain {
            return Err(Error::DomainMismatch);
        }
        let action = self.action.mul(&earlier.action)?;
        Self::tagged(
            earlier.domain.clone(),
            self.codomain.clone(),
            action,
            Provenance::Compose(
                Box::new(self.provenance.clone()),
                Box::new(earlier.provenance.clone()),
            ),
        )
    }

    /// Parallel composition on the tensored objects.
    pub fn tensor(&self, other: &Self) -> Self {
        let domain = self.domain.tensor(&other.domain);
        let codomain = self.codomain.tensor(&other.codomain);
        let mut action = Matrix::zeros(codomain.op_dim(), domain.op_dim());
        // (f (x) g) on basis operators: entry at the combined indices is the
        // product of the component entries. Zero entries are skipped; the
        // combinators this multiplies are permutation-sparse.
        let f = &self.action;
        let g = &other.action;
        for pf in 0..f.rows() {
            let (cbf, crf, ccf) = self.codomain.split_op_index(pf);
            for qf in 0..f.cols() {
                let fv = f.at(pf, qf);
                if fv.re == 0.0 && fv.im == 0.0 {
                    continue;
                }
                let (dbf, drf, dcf) = self.domain.split_op_index(qf);
                for pg in 0..g.rows() {
                    let (cbg, crg, ccg) = other.codomain.split_op_index(pg);
                    for qg in 0..g.cols() {
                        let gv = g.at(pg, qg);
                        if gv.re == 0.0 && gv.im == 0.0 {
                            continue;
                        }
                        let (dbg, drg, dcg) = other.domain.split_op_index(qg);
                        let cod_dim = other.codomain.dims()[cbg];
                        let dom_dim = other.domain.dims()[dbg];
                        let p = codomain.flat_op_index(
                            cbf * other.codomain.num_blocks() + cbg,
                            crf * cod_dim + crg,
                            ccf * cod_dim + ccg,
                        );
                        let q = domain.flat_op_index(
                            dbf * other.domain.num_blocks() + dbg,
                            drf * dom_dim + drg,
                            dcf * dom_dim + dcg,
                        );
                        action.set(p, q, fv * gv);
                    }
                }
            }
        }
        Self {
            domain,
            codomain,
            action,
            provenance: Provenance::Tensor(
                Box::new(self.provenance.clone()),
                Box::new(other.provenance.clone()),
            ),
        }
    }

    /// Blockwise parallel composition on the direct sums.
    pub fn dsum(&self, other: &Self) -> Self {
        let domain = self.domain.dsum(&other.domain);
        let codomain = self.codomain.dsum(&other.codomain);
        let (ro, co) = (self.codomain.op_dim(), self.domain.op_dim());
        let mut action = Matrix::zeros(codomain.op_dim(), domain.op_dim());
        for p in 0..self.action.rows() {
            for q in 0..self.action.cols() {
                action.set(p, q, self.action.at(p, q));
            }
        }
        for p in 0..other.action.rows() {
            for q in 0..other.action.cols() {
                action.set(ro + p, co + q, other.action.at(p, q));
            }
        }
        Self {
            domain,
            codomain,
            action,
            provenance: Provenance::Dsum(
                Box::new(self.provenance.clone()),
                Box::new(other.provenance.clone()),
            ),
        }
    }

    /// Constant channel `[1] -> target.object` emitting `target`.
    pub fn prepare(target: &BlockState) -> Self {
        let action = Matrix::from_fn(target.object().op_dim(), 1, |i, _| target.vectorize()[i]);
        Self {
            domain: AlgebraObject::unit(),
            codomain: target.object().clone(),
            action,
            provenance: Provenance::Generator("prepare"),
        }
    }

    /// Full trace, `A -> [1]`.
    pub fn trace_channel(a: &AlgebraObject) -> Self {
        let t = trace_covector(a);
        let action = Matrix::from_fn(1, a.op_dim(), |_, q| Complex64::new(t[q], 0.0));
        Self {
            domain: a.clone(),
            codomain: AlgebraObject::unit(),
            action,
            provenance: Provenance::Generator("trace"),
        }
    }

    /// Channel from a Kraus set `{K_i: n -> m}` with `sum K_i^dag K_i = I`.
    pub fn from_kraus(kraus: &[Matrix]) -> Result<Self> {
        let first = kraus.first().ok_or(Error::InvalidParameter("empty Kraus set"))?;
        let (m, n) = (first.rows(), first.cols());
        let mut sum = Matrix::zeros(n, n);
        for k in kraus {
            if k.rows() != m || k.cols() != n {
                return Err(Error::ShapeMismatch(k.rows(), k.cols(), m, n));
            }
            sum = sum.add(&k.dagger().mul(k)?)?;
        }
        let dev = sum.max_abs_diff(&Matrix::identity(n));
        if dev > tol::TRACE_PRESERVING {
            return Err(Error::NotTracePreserving(dev));
        }
        // vec(K X K^dag) = (K (x) conj(K)) vec(X) for row-major vec.
        let mut action = Matrix::zeros(m * m, n * n);
        for k in kraus {
            let conj = Matrix::from_fn(m, n, |i, j| k.at(i, j).conj());
            action = action.add(&kron(k, &conj))?;
        }
        Self::tagged(
            AlgebraObject::single(n)?,
            AlgebraObject::single(m)?,
            action,
            Provenance::Generator("kraus"),
        )
    }

    /// Measurement channel on a single block `[n]`.
    ///
    /// Destructive: `[n] -> [1;k]`, outcome weight `<E_j, rho>`.
    /// Non-destructive: `[n] -> [n;k]`, outcome block `sqrt(E_j) rho sqrt(E_j)`.
    pub fn povm_channel(effects: &[Matrix], destructive: bool) -> Result<Self> {
        let first = effects.first().ok_or(Error::InvalidParameter("empty effect list"))?;
        let n = first.rows();
        let mut sum = Matrix::zeros(n, n);
        let mut worst = 0.0f64;
        for e in effects {
            if e.rows() != n || e.cols() != n {
                return Err(Error::ShapeMismatch(e.rows(), e.cols(), n, n));
            }
            let eig = crate::algebra::hermitian_eig(e).map_err(|_| Error::NotAPOVM(f64::NAN))?;
            worst = worst.max((-eig.min_eigenvalue()).max(0.0));
            sum = sum.add(e)?;
        }
        worst = worst.max(sum.max_abs_diff(&Matrix::identity(n)));
        if worst > tol::POVM {
            return Err(Error::NotAPOVM(worst));
        }
        let domain = AlgebraObject::single(n)?;
        let k = effects.len();
        if destructive {
            let codomain = AlgebraObject::classical(k);
            let mut action = Matrix::zeros(k, n * n);
            for (j, e) in effects.iter().enumerate() {
                for r in 0..n {
                    for c in 0..n {
                        action.set(j, r * n + c, e.at(r, c).conj());
                    }
                }
            }
            Self::tagged(domain, codomain, action, Provenance::Generator("povm"))
        } else {
            let codomain = AlgebraObject::new(vec![n; k])?;
            let mut action = Matrix::zeros(k * n * n, n * n);
            for (j, e) in effects.iter().enumerate() {
                let s = crate::algebra::psd_sqrt(e)?;
                let st = Matrix::from_fn(n, n, |r, c| s.at(c, r));
                let block = kron(&s, &st);
                for p in 0..n * n {
                    for q in 0..n * n {
                        action.set(j * n * n + p, q, block.at(p, q));
                    }
                }
            }
            Self::tagged(domain, codomain, action, Provenance::Generator("povm"))
        }
    }

    /// Re-indexing `[1;n] (x) A -> A^{(+)n}`. The two objects have literally
    /// equal dimension lists, so the action is the identity.
    pub fn branch_up(n: usize, a: &AlgebraObject) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("branch count must be positive"));
        }
        let domain = AlgebraObject::classical(n).tensor(a);
        let mut codomain = AlgebraObject::zero();
        for _ in 0..n {
            codomain = codomain.dsum(a);
        }
        debug_assert!(domain.dims() == codomain.dims());
        let action = Matrix::identity(domain.op_dim());
        Ok(Self { domain, codomain, action, provenance: Provenance::Generator("branch-up") })
    }

    /// Inverse re-indexing `A^{(+)n} -> [1;n] (x) A`.
    pub fn branch_down(n: usize, a: &AlgebraObject) -> Result<Self> {
        let up = Self::branch_up(n, a)?;
        Ok(Self {
            domain: up.codomain,
            codomain: up.domain,
            action: up.action,
            provenance: Provenance::Generator("branch-down"),
        })
    }

    /// Classically controlled branch: on tag weight `p_i` and payload `rho`,
    /// output block `i` is `p_i f_i(rho)`. Equals `((+)_i f_i) . branch_up`.
    pub fn elif_channel(branches: &[Self]) -> Result<Self> {
        let first = branches.first().ok_or(Error::InvalidParameter("empty branch list"))?;
        if branches.iter().any(|b| b.domain != first.domain) {
            return Err(Error::DomainMismatch);
        }
        let n = branches.len();
        let domain = AlgebraObject::classical(n).tensor(&first.domain);
        let mut codomain = AlgebraObject::zero();
        let mut action = Matrix::zeros(
            branches.iter().map(|b| b.codomain.op_dim()).sum(),
            domain.op_dim(),
        );
        let (mut ro, mut co) = (0, 0);
        for b in branches {
            codomain = codomain.dsum(&b.codomain);
            for p in 0..b.action.rows() {
                for q in 0..b.action.cols() {
                    action.set(ro + p, co + q, b.action.at(p, q));
                }
            }
            ro += b.codomain.op_dim();
            co += b.domain.op_dim();
        }
        Self::tagged(domain, codomain, action, Provenance::Generator("elif"))
    }

    /// Permutation of tensor factors: output factor `i` is input factor
    /// `perm[i]` (0-indexed, `perm` a permutation of `0..objects.len()`).
    pub fn permute_factors(objects: &[AlgebraObject], perm: &[usize]) -> Result<Self> {
        let m = objects.len();
        if perm.len() != m {
            return Err(Error::InvalidParameter("permutation length mismatch"));
        }
        let mut seen = vec![false; m];
        for &p in perm {
            if p >= m || seen[p] {
                return Err(Error::InvalidParameter("not a permutation"));
            }
            seen[p] = true;
        }
        let tensor_all = |order: &[usize]| -> AlgebraObject {
            let mut out = AlgebraObject::unit();
            for &i in order {
                out = out.tensor(&objects[i]);
            }
            out
        };
        let id_order: Vec<usize> = (0..m).collect();
        let domain = tensor_all(&id_order);
        let codomain = tensor_all(perm);
        let mut action = Matrix::zeros(codomain.op_dim(), domain.op_dim());
        let one = Complex64::new(1.0, 0.0);
        for flat in 0..domain.op_dim() {
            let (blocks, rows, cols) = decompose_index(objects, &domain, flat);
            let pb: Vec<usize> = perm.iter().map(|&i| blocks[i]).collect();
            let pr: Vec<usize> = perm.iter().map(|&i| rows[i]).collect();
            let pc: Vec<usize> = perm.iter().map(|&i| cols[i]).collect();
            let pobjs: Vec<AlgebraObject> = perm.iter().map(|&i| objects[i].clone()).collect();
            let p = compose_index(&pobjs, &codomain, &pb, &pr, &pc);
            action.set(p, flat, one);
        }
        Ok(Self { domain, codomain, action, provenance: Provenance::Generator("permute") })
    }

    /// Swaps tensor factors `k` and `l` (1-indexed, `1 <= k < l <= n`).
    pub fn swap_channel(k: usize, l: usize, objects: &[AlgebraObject]) -> Result<Self> {
        let n = objects.len();
        if k == 0 || l == 0 || k >= l || l > n {
            return Err(Error::IndexOutOfRange(l, n));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.swap(k - 1, l - 1);
        let mut ch = Self::permute_factors(objects, &perm)?;
        ch.provenance = Provenance::Generator("swap");
        Ok(ch)
    }

    /// Moves factor `k` to position `n` (1-indexed), shifting the factors in
    /// between forward: the composition of adjacent swaps `k..n`.
    pub fn move_back(k: usize, n: usize, objects: &[AlgebraObject]) -> Result<Self> {
        let m = objects.len();
        if k == 0 || n == 0 || k > n || n > m {
            return Err(Error::IndexOutOfRange(n.max(k), m));
        }
        let mut perm: Vec<usize> = (0..m).collect();
        let moved = perm.remove(k - 1);
        perm.insert(n - 1, moved);
        let mut ch = Self::permute_factors(objects, &perm)?;
        ch.provenance = Provenance::Generator("move-back");
        Ok(ch)
    }

    /// Marginalizes a branching tag: `A^{(+)n} -> A`, summing the blocks.
    /// `domain` must consist of `n` identical consecutive chunks.
    pub fn forget_branch(n: usize, domain: &AlgebraObject) -> Result<Self> {
        if n == 0 || domain.num_blocks() % n != 0 {
            return Err(Error::HeterogeneousSummands);
        }
        let chunk = domain.num_blocks() / n;
        let summand = AlgebraObject::new(domain.dims()[..chunk].to_vec())?;
        for i in 1..n {
            if domain.dims()[i * chunk..(i + 1) * chunk] != *summand.dims() {
                return Err(Error::HeterogeneousSummands);
            }
        }
        let od = summand.op_dim();
        let mut action = Matrix::zeros(od, domain.op_dim());
        let one = Complex64::new(1.0, 0.0);
        for i in 0..n {
            for j in 0..od {
                action.set(j, i * od + j, one);
            }
        }
        Self::tagged(domain.clone(), summand, action, Provenance::Generator("forget-branch"))
    }

    /// Traces out tensor factor `which` (1-indexed) of the factored object.
    pub fn partial_trace(which: usize, objects: &[AlgebraObject]) -> Result<Self> {
        let m = objects.len();
        if which == 0 || which > m {
            return Err(Error::IndexOutOfRange(which, m));
        }
        let f = which - 1;
        let mut domain = AlgebraObject::unit();
        let mut kept = AlgebraObject::unit();
        let mut kept_objs: Vec<AlgebraObject> = Vec::new();
        for (i, o) in objects.iter().enumerate() {
            domain = domain.tensor(o);
            if i != f {
                kept = kept.tensor(o);
                kept_objs.push(o.clone());
            }
        }
        let mut action = Matrix::zeros(kept.op_dim(), domain.op_dim());
        let one = Complex64::new(1.0, 0.0);
        for flat in 0..domain.op_dim() {
            let (blocks, rows, cols) = decompose_index(objects, &domain, flat);
            if rows[f] != cols[f] {
                continue;
            }
            let kb: Vec<usize> = (0..m).filter(|&i| i != f).map(|i| blocks[i]).collect();
            let kr: Vec<usize> = (0..m).filter(|&i| i != f).map(|i| rows[i]).collect();
            let kc: Vec<usize> = (0..m).filter(|&i| i != f).map(|i| cols[i]).collect();
            let p = compose_index(&kept_objs, &kept, &kb, &kr, &kc);
            action.set(p, flat, one);
        }
        Self::tagged(domain, kept, action, Provenance::Generator("partial-trace"))
    }

    /// Applies the channel to a state, validating the output.
    pub fn apply(&self, s: &BlockState) -> Result<BlockState> {
        if *s.object() != self.domain {
            return Err(Error::DomainMismatch);
        }
        let out = self.action.mul_vec(&s.vectorize())?;
        let mut blocks = Vec::with_capacity(self.codomain.num_blocks());
        let mut off = 0;
        for &d in self.codomain.dims() {
            let entries = out[off..off + d * d].to_vec();
            // Symmetrize to stop round-off drift; the PSD/trace checks below
            // still catch genuinely malformed channels.
            blocks.push(Matrix::new(d, d, entries)?.hermitian_part());
            off += d * d;
        }
        BlockState::new(self.codomain.clone(), blocks).map_err(|_| Error::OutputNotState)
    }

    /// Choi matrix of the component map from domain block `i` to codomain
    /// block `j`; PSD for every completely positive component.
    pub fn component_choi(&self, dom_block: usize, cod_block: usize) -> Result<Matrix> {
        if dom_block >= self.domain.num_blocks() {
            return Err(Error::IndexOutOfRange(dom_block, self.domain.num_blocks()));
        }
        if cod_block >= self.codomain.num_blocks() {
            return Err(Error::IndexOutOfRange(cod_block, self.codomain.num_blocks()));
        }
        let n = self.domain.dims()[dom_block];
        let m = self.codomain.dims()[cod_block];
        let mut choi = Matrix::zeros(n * m, n * m);
        for r in 0..n {
            for c in 0..n {
                let q = self.domain.flat_op_index(dom_block, r, c);
                for p in 0..m {
                    for s in 0..m {
                        let v = self.action.at(self.codomain.flat_op_index(cod_block, p, s), q);
                        choi.set(r * m + p, c * m + s, v);
                    }
                }
            }
        }
        Ok(choi)
    }
}

/// Splits a flat operator index of the tensored object into per-factor
/// block/row/col tuples.
fn decompose_index(
    objects: &[AlgebraObject],
    tensored: &AlgebraObject,
    flat: usize,
) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let m = objects.len();
    let (block, row, col) = tensored.split_op_index(flat);
    let mut blocks = vec![0; m];
    let mut b = block;
    for i in (0..m).rev() {
        let k = objects[i].num_blocks();
        blocks[i] = b % k;
        b /= k;
    }
    let mut rows = vec![0; m];
    let mut cols = vec![0; m];
    let (mut r, mut c) = (row, col);
    for i in (0..m).rev() {
        let d = objects[i].dims()[blocks[i]];
        rows[i] = r % d;
        cols[i] = c % d;
        r /= d;
        c /= d;
    }
    (blocks, rows, cols)
}

/// Inverse of [`decompose_index`] for the given factor list.
fn compose_index(
    objects: &[AlgebraObject],
    tensored: &AlgebraObject,
    blocks: &[usize],
    rows: &[usize],
    cols: &[usize],
) -> usize {
    let mut block = 0;
    let mut row = 0;
    let mut col = 0;
    for i in 0..objects.len() {
        let k = objects[i].num_blocks();
        let d = objects[i].dims()[blocks[i]];
        block = block * k + blocks[i];
        row = row * d + rows[i];
        col = col * d + cols[i];
    }
    tensored.flat_op_index(block, row, col)
}
