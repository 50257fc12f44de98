//! Single-instant limit order book model.
//!
//! The crate models one trading instant on a two-sided limit order book:
//!
//! * [`book`] — book sides as analytic densities plus point masses, with
//!   depth, marginal-price (quasi-inverse) and sweep-cost curves;
//! * [`strategies`] — slippage, the fast trader's front-running round trip,
//!   its optimal size, shape invariance of the book, portfolio acquisition
//!   and churn accounting;
//! * [`tax`] — a two-sided transaction tax, the taxed round-trip profit and
//!   its participation threshold, and tax revenue;
//! * [`belief`] — the fast trader's optimal size under a prior over the slow
//!   trader's quantity;
//! * [`equilibrium`] — the slow trader's best response with and without the
//!   fast trader and the tax, surpluses, deadweight loss and policy bands;
//! * [`oracle`] — a brute-force tick-discretized book, kept as an
//!   independent reference implementation for the test suites;
//! * [`numeric`] — golden-section search, bisection and adaptive Simpson.
//!
//! All values are immutable and all functions are pure, so everything here
//! can be shared and called concurrently without coordination.

pub mod belief;
pub mod book;
pub mod equilibrium;
pub mod error;
pub mod numeric;
pub mod oracle;
pub mod strategies;
pub mod tax;

pub use book::{
    AtomLevel, BookSide, Cash, ConstantBook, DensityBand, DensitySpec, LimitOrderBook,
    Orientation, Price, Shares, TaylorExpansion, TaylorOrder,
};
pub use error::{Error, Result};
