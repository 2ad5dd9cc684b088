use thiserror::Error;

/// Errors raised by the evaluators.
///
/// Degeneracy errors are not failures of an identity: the sampler treats them
/// as a signal to draw a new parameter point.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("theta function evaluated at zero argument")]
    ZeroArgument,

    #[error("infinite product diverges: |base| = {0} >= 1")]
    Divergent(f64),

    #[error("q is numerically a root of unity of order {order} (|1 - q^{order}| = {magnitude:e})")]
    RootOfUnity { order: usize, magnitude: f64 },

    #[error("degenerate parameters: {0} vanishes")]
    Degenerate(&'static str),

    #[error("h-condition violated: {0}")]
    HCondition(String),

    #[error("step from ({i}, {j}) leaves the region of size ({m}, {n})")]
    OutOfRegion { i: usize, j: usize, m: usize, n: usize },

    #[error("brute-force enumeration cap exceeded: m + n = {size} > {cap}")]
    CapExceeded { size: usize, cap: usize },

    #[error("unknown identity family `{0}`")]
    UnknownFamily(String),

    #[error("polynomials share a root numerically (pivot ratio {0:e})")]
    CommonRoot(f64),

    #[error("singular linear system")]
    Singular,

    #[error("algebra mismatch: {0} vs {1}")]
    TagMismatch(&'static str, &'static str),

    #[error("no generic parameter point after {0} attempts")]
    Exhausted(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// True for errors caused by the parameter point rather than the request.
    pub fn is_degeneracy(&self) -> bool {
        matches!(
            self,
            Error::ZeroArgument
                | Error::RootOfUnity { .. }
                | Error::Degenerate(_)
                | Error::HCondition(_)
                | Error::CommonRoot(_)
                | Error::Singular
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
