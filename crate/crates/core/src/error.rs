//! Error type shared by all book and strategy operations.

/// Errors produced by book operations and the analyses built on them.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A market order asked for more shares than the side holds.
    #[error("insufficient depth: requested {requested} shares, side holds {available}")]
    InsufficientDepth { requested: f64, available: f64 },

    /// A limit order was placed on the wrong side of the reference price.
    #[error("limit price {price} crosses the reference price {reference}")]
    PriceInsideSpread { price: f64, reference: f64 },

    /// A point mass rests at the reference price, so the local expansion of
    /// cost and marginal price around zero volume does not exist.
    #[error("atom at the reference price; local expansion undefined")]
    AtomAtTouch,

    /// The density vanishes at the reference price, so 1/rho blows up.
    #[error("zero density at the reference price; local expansion undefined")]
    ZeroDensityAtTouch,

    /// A closed form that assumes a constant-density side was asked to run on
    /// a side that is not constant (or carries atoms).
    #[error("operation requires a constant-density book side")]
    NonconstantDensity,

    /// The two sides must share one density for the impact-factor identity.
    #[error("operation requires symmetric densities (ask {ask_rho}, bid {bid_rho})")]
    AsymmetricBook { ask_rho: f64, bid_rho: f64 },

    /// Tax rates must keep the overall rate inside [0, 1).
    #[error("tax rate out of range: {0}")]
    RateOutOfRange(String),

    /// A uniform prior needs a strictly positive width.
    #[error("prior width must be positive, got {0}")]
    NonpositiveTheta(f64),

    /// Demand exceeds the book everywhere; there is no crossing quantity.
    #[error("demand exceeds book depth everywhere; no crossing exists")]
    NoRoot,

    /// An iterative routine ran out of iterations.
    #[error("numeric routine failed to converge: {0}")]
    NoConvergence(String),

    /// An ask-only (or bid-only) operation was called on the other side.
    #[error("operation expects the {expected} side")]
    WrongSide { expected: &'static str },

    /// A structural invariant of the inputs was violated.
    #[error("invalid input: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
