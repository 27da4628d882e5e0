use core::fmt;

/// Crate-wide result type.
pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong while building or evaluating states,
/// channels, combs, protocols, attacks, or bounds.
///
/// Numeric payloads carry the offending quantity (deviation, eigenvalue,
/// trace, ...) so callers can report how badly a check failed.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Matrix expected to be square.
    NotSquare(usize, usize),
    /// Hermiticity deviation `‖M − M†‖_F` exceeded its tolerance.
    NotHermitian(f64),
    /// Minimum eigenvalue fell below the PSD tolerance.
    NotPSD(f64),
    /// Operand shapes differ; payloads are (rows, cols) of both sides.
    ShapeMismatch(usize, usize, usize, usize),
    /// A matrix entry is NaN or infinite.
    NonFinite,
    /// Entry buffer length does not match rows × cols.
    WrongEntryCount { expected: usize, got: usize },
    /// An algebra object dimension is zero.
    ZeroDim,
    /// Block list length does not match the object.
    WrongBlockCount { expected: usize, got: usize },
    /// Total trace of a state is not 1; payload is the actual trace.
    InvalidTrace(f64),
    /// Channel domain does not match the object it is applied to or
    /// composed with.
    DomainMismatch,
    /// A channel produced something that fails the state invariants.
    OutputNotState,
    /// Effects are not PSD or do not sum to the identity; payload is the
    /// worst deviation found.
    NotAPOVM(f64),
    /// Index outside the valid range; payloads are (index, length).
    IndexOutOfRange(usize, usize),
    /// Direct-sum summands expected to be equal are not.
    HeterogeneousSummands,
    /// The action matrix does not preserve the trace; payload is the worst
    /// deviation of the dual identity condition.
    NotTracePreserving(f64),
    /// States live on different algebra objects.
    ObjectMismatch,
    /// Operation defined only for single-block objects.
    MultiBlockUnsupported,
    /// Resource tuple or filler does not match a comb signature.
    SignatureMismatch,
    /// Explicit tensor materialization requested for too many copies.
    TooManyCopiesForExplicit(usize),
    /// Attack construction requires a pure target.
    TargetNotPure,
    /// Perturbing the target by the requested amount would leave the PSD
    /// cone (or destabilize the eigen-ordering); payload is the minimal
    /// admissible round count.
    PerturbationBreaksPositivity { min_rounds: f64 },
    /// Construction needs a larger Hilbert space; payloads are (dim, min).
    DimensionTooSmall(usize, usize),
    /// Unrecognized theorem tag.
    UnknownTag,
    /// A scalar parameter is outside its documented range.
    InvalidParameter(&'static str),
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotSquare(r, c) => write!(f, "matrix is not square: {r}x{c}"),
            Error::NotHermitian(dev) => {
                write!(f, "matrix is not Hermitian (deviation {dev:.3e})")
            }
            Error::NotPSD(min) => {
                write!(f, "matrix is not positive semidefinite (min eigenvalue {min:.3e})")
            }
            Error::ShapeMismatch(r0, c0, r1, c1) => {
                write!(f, "shape mismatch: {r0}x{c0} vs {r1}x{c1}")
            }
            Error::NonFinite => write!(f, "matrix entries must be finite"),
            Error::WrongEntryCount { expected, got } => {
                write!(f, "expected {expected} entries, got {got}")
            }
            Error::ZeroDim => write!(f, "algebra object dimensions must be positive"),
            Error::WrongBlockCount { expected, got } => {
                write!(f, "expected {expected} blocks, got {got}")
            }
            Error::InvalidTrace(t) => write!(f, "total trace is {t}, expected 1"),
            Error::DomainMismatch => write!(f, "channel domain mismatch"),
            Error::OutputNotState => write!(f, "channel output is not a valid state"),
            Error::NotAPOVM(dev) => write!(f, "effects do not form a POVM (deviation {dev:.3e})"),
            Error::IndexOutOfRange(i, n) => write!(f, "index {i} out of range for length {n}"),
            Error::HeterogeneousSummands => write!(f, "direct-sum summands are not all equal"),
            Error::NotTracePreserving(dev) => {
                write!(f, "map is not trace-preserving (deviation {dev:.3e})")
            }
            Error::ObjectMismatch => write!(f, "states live on different algebra objects"),
            Error::MultiBlockUnsupported => {
                write!(f, "operation supports single-block objects only")
            }
            Error::SignatureMismatch => write!(f, "resource signature mismatch"),
            Error::TooManyCopiesForExplicit(n) => {
                write!(f, "explicit tensor requested for {n} copies (maximum 4)")
            }
            Error::TargetNotPure => write!(f, "construction requires a pure target state"),
            Error::PerturbationBreaksPositivity { min_rounds } => write!(
                f,
                "perturbation leaves the PSD cone; needs at least {min_rounds} expected rounds"
            ),
            Error::DimensionTooSmall(d, min) => {
                write!(f, "dimension {d} too small, need at least {min}")
            }
            Error::UnknownTag => write!(f, "unknown theorem tag"),
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
        }
    }
}
