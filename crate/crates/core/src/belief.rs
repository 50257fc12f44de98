//! Alice's sizing when she only knows a distribution for Bob's quantity.
//!
//! She buys `x`, re-offers it at the shifted ask, and whatever Bob does not
//! lift she must dump on the bid side at a loss. Under an atomless prior `P`
//! over Bob's buy size and constant densities on both sides, her realised
//! profit is
//!
//! ```text
//! pi(x, y) = (x ∧ y)² / (2 rho+) - (s* - s_*) (x - y)⁺
//!            - (1/rho+ + 1/rho-) ((x - y)⁺)² / 2
//! ```
//!
//! and the expectation over `y` is an exact expression in the prior's cdf
//! `p`, lower partial expectation `q` and lower partial second moment.
//! A stationary size solves `x = G(x)` with
//! `G(x) = [k E[y | y < x] - spread] / (2/rho+ + 1/rho- - 1/(rho+ p(x)))`,
//! `k = 1/rho+ + 1/rho-`; the solver treats that fixed-point equation as a
//! candidate generator only, never as a sufficient condition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::book::{Cash, LimitOrderBook, Shares};
use crate::error::{Error, Result};
use crate::numeric::bisect_root;
use crate::strategies::front_run_profit;

/// Probability below which the fixed-point map is considered singular
/// (its denominator carries a `1/(rho p(x))` term).
const MIN_CDF: f64 = 1e-6;

/// Atomless prior over the slow trader's buy quantity.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    /// Uniform on `[0, theta]`.
    Uniform { theta: f64 },
    /// Piecewise-linear cdf through `(y, cdf)` knots; atomless by
    /// construction.
    Tabulated { points: Vec<(f64, f64)> },
}

impl Prior {
    /// Uniform prior on `[0, theta]`.
    pub fn uniform(theta: f64) -> Result<Prior> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::NonpositiveTheta(theta));
        }
        Ok(Prior::Uniform { theta })
    }

    /// Tabulated prior from `(y, cdf)` knots. The knots must be strictly
    /// increasing in `y`, start at cdf 0, end at cdf 1, and never decrease.
    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Prior> {
        if points.len() < 2 {
            return Err(Error::validation("tabulated prior needs at least 2 knots"));
        }
        for w in points.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(Error::validation(
                    "tabulated prior knots must be strictly increasing in y",
                ));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::validation("tabulated prior cdf must be monotone"));
            }
        }
        let first = points.first().unwrap();
        let last = points.last().unwrap();
        if first.0 < 0.0 {
            return Err(Error::validation("prior support must be nonnegative"));
        }
        if first.1 != 0.0 || last.1 != 1.0 {
            return Err(Error::validation(
                "tabulated prior cdf must run from 0 to 1",
            ));
        }
        if points.iter().any(|(y, f)| !y.is_finite() || !f.is_finite()) {
            return Err(Error::validation("tabulated prior knots must be finite"));
        }
        Ok(Prior::Tabulated { points })
    }

    /// `P(y < x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Prior::Uniform { theta } => (x / theta).clamp(0.0, 1.0),
            Prior::Tabulated { points } => {
                let first = points[0];
                let last = points[points.len() - 1];
                if x <= first.0 {
                    return 0.0;
                }
                if x >= last.0 {
                    return 1.0;
                }
                for w in points.windows(2) {
                    if x < w[1].0 {
                        let t = (x - w[0].0) / (w[1].0 - w[0].0);
                        return w[0].1 + t * (w[1].1 - w[0].1);
                    }
                }
                1.0
            }
        }
    }

    /// Lower partial expectation `E[y 1_{y < x}]`.
    pub fn partial_expectation(&self, x: f64) -> f64 {
        self.partial_moment(x, 2) / 2.0
    }

    /// Lower partial second moment `E[y² 1_{y < x}]`.
    pub fn partial_second_moment(&self, x: f64) -> f64 {
        self.partial_moment(x, 3) / 3.0
    }

    /// `n * E[y^(n-1) 1_{y<x}]` for n = 2, 3: sums `f * (b^n - a^n)` over
    /// density segments `[a, b]` clipped at `x`.
    fn partial_moment(&self, x: f64, n: i32) -> f64 {
        match self {
            Prior::Uniform { theta } => {
                let hi = x.clamp(0.0, *theta);
                hi.powi(n) / theta
            }
            Prior::Tabulated { points } => {
                let mut acc = 0.0;
                for w in points.windows(2) {
                    let (a, fa) = w[0];
                    let (b, fb) = w[1];
                    let hi = b.min(x);
                    if hi <= a {
                        break;
                    }
                    let density = (fb - fa) / (b - a);
                    acc += density * (hi.powi(n) - a.powi(n));
                }
                acc
            }
        }
    }

    /// Upper end of the support.
    pub fn support_hi(&self) -> f64 {
        match self {
            Prior::Uniform { theta } => *theta,
            Prior::Tabulated { points } => points[points.len() - 1].0,
        }
    }

    /// Inverse-cdf sample from a uniform draw in `[0, 1)`.
    pub fn sample(&self, u: f64) -> f64 {
        match self {
            Prior::Uniform { theta } => u * theta,
            Prior::Tabulated { points } => {
                for w in points.windows(2) {
                    let (a, fa) = w[0];
                    let (b, fb) = w[1];
                    if u < fb {
                        if fb > fa {
                            return a + (u - fa) / (fb - fa) * (b - a);
                        }
                        return a;
                    }
                }
                points[points.len() - 1].0
            }
        }
    }
}

struct FlatPair {
    ask_rho: f64,
    inv_sum: f64, // 1/rho+ + 1/rho-
    spread: f64,
}

fn flat_pair(book: &LimitOrderBook) -> Result<FlatPair> {
    let flat = book.as_constant()?;
    Ok(FlatPair {
        ask_rho: flat.ask_rho,
        inv_sum: 1.0 / flat.ask_rho + 1.0 / flat.bid_rho,
        spread: flat.spread(),
    })
}

/// Expected profit of a front run of size `x` under the prior, with forced
/// liquidation of whatever Bob leaves behind. Requires constant densities on
/// both sides.
pub fn expected_profit(book: &LimitOrderBook, prior: &Prior, x: Shares) -> Result<Cash> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::validation(format!(
            "size must be finite and nonnegative, got {x}"
        )));
    }
    let f = flat_pair(book)?;
    let p = prior.cdf(x);
    let q = prior.partial_expectation(x);
    let m2 = prior.partial_second_moment(x);
    Ok(x * x / (2.0 * f.ask_rho) * (1.0 - p) + m2 / (2.0 * f.ask_rho)
        - f.spread * (x * p - q)
        - 0.5 * f.inv_sum * (x * x * p - 2.0 * x * q + m2))
}

/// One-sided derivative of [`expected_profit`] in `x`.
pub fn expected_profit_gradient(book: &LimitOrderBook, prior: &Prior, x: Shares) -> Result<f64> {
    let f = flat_pair(book)?;
    let p = prior.cdf(x);
    let q = prior.partial_expectation(x);
    Ok(x / f.ask_rho * (1.0 - p) - (f.spread + f.inv_sum * x) * p + f.inv_sum * q)
}

/// Stationarity candidate examined by the prior optimizer.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Candidate {
    pub x: f64,
    pub expected_profit: f64,
    /// One-sided derivative of the expected profit at `x`.
    pub gradient: f64,
    /// `|x - G(x)|` for the fixed-point map, where defined.
    pub fixed_point_residual: Option<f64>,
}

/// Result of [`optimal_under_prior`] with solver diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct PriorOptimum {
    pub x: f64,
    pub expected_profit: f64,
    pub candidates: Vec<Candidate>,
}

fn fixed_point_map(f: &FlatPair, prior: &Prior, x: f64) -> Option<f64> {
    let p = prior.cdf(x);
    if p < MIN_CDF {
        return None;
    }
    let q = prior.partial_expectation(x);
    let denom = 2.0 / f.ask_rho + (f.inv_sum - 1.0 / f.ask_rho) - 1.0 / (f.ask_rho * p);
    if denom.abs() < 1e-14 {
        return None;
    }
    Some((f.inv_sum * q / p - f.spread) / denom)
}

/// Global maximiser of the expected profit over `[0, support_hi]`.
///
/// Candidate set: zero, sign changes of the gradient found on a 1000-point
/// bracket scan (refined by bisection), and any limit of the damped
/// fixed-point iteration `x <- x/2 + G(x)/2`. The region where
/// `p(x) < 1e-6` is left to the zero candidate, since the fixed-point map is
/// singular there. Ties break toward smaller sizes.
pub fn optimal_under_prior(book: &LimitOrderBook, prior: &Prior) -> Result<PriorOptimum> {
    let f = flat_pair(book)?;
    let hi = prior.support_hi();
    let mut xs: Vec<f64> = Vec::new();

    // Leftmost size with enough prior mass below it for G to be defined.
    let floor = if prior.cdf(hi) < MIN_CDF {
        hi
    } else {
        bisect_root(|x| prior.cdf(x) - MIN_CDF, 0.0, hi, 1e-14 * hi).unwrap_or(hi)
    };

    // Bracket scan on the gradient.
    if floor < hi {
        let n = 1000;
        let step = (hi - floor) / n as f64;
        let mut prev_x = floor;
        let mut prev_g = expected_profit_gradient(book, prior, prev_x)?;
        for i in 1..=n {
            let x = floor + step * i as f64;
            let g = expected_profit_gradient(book, prior, x)?;
            if prev_g == 0.0 {
                xs.push(prev_x);
            } else if prev_g.signum() != g.signum() {
                if let Some(root) = bisect_root(
                    |t| expected_profit_gradient(book, prior, t).unwrap_or(f64::NAN),
                    prev_x,
                    x,
                    1e-13 * hi,
                ) {
                    xs.push(root);
                }
            }
            prev_x = x;
            prev_g = g;
        }
    }

    // Damped fixed-point iteration from mid-support.
    let mut x = 0.5 * hi;
    for _ in 0..300 {
        match fixed_point_map(&f, prior, x) {
            Some(gx) if gx.is_finite() => {
                let next = 0.5 * x + 0.5 * gx.clamp(0.0, hi);
                if (next - x).abs() <= 1e-12 * hi {
                    x = next;
                    if x > floor {
                        xs.push(x);
                    }
                    break;
                }
                x = next;
            }
            _ => break,
        }
    }

    xs.retain(|v| v.is_finite() && *v > 0.0 && *v <= hi);
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-8 * hi);
    xs.insert(0, 0.0);

    let mut candidates = Vec::with_capacity(xs.len());
    for &cx in &xs {
        let value = expected_profit(book, prior, cx)?;
        let gradient = expected_profit_gradient(book, prior, cx)?;
        let fixed_point_residual = fixed_point_map(&f, prior, cx).map(|g| (cx - g).abs());
        candidates.push(Candidate {
            x: cx,
            expected_profit: value,
            gradient,
            fixed_point_residual,
        });
    }

    let best_value = candidates
        .iter()
        .map(|c| c.expected_profit)
        .fold(f64::NEG_INFINITY, f64::max);
    let tie = 1e-12 * (1.0 + best_value.abs());
    let chosen = candidates
        .iter()
        .find(|c| c.expected_profit >= best_value - tie)
        .expect("candidate list is never empty");
    let (x, value) = if chosen.expected_profit <= 0.0 {
        (0.0, 0.0)
    } else {
        (chosen.x, chosen.expected_profit)
    };
    Ok(PriorOptimum {
        x,
        expected_profit: value,
        candidates,
    })
}

/// Closed-form optimum for the uniform prior, clamped at zero:
/// `x* = max(0, 2 (theta - spread * rho+) / (3 + rho+ / rho-))`.
pub fn uniform_optimal_closed_form(book: &LimitOrderBook, theta: f64) -> Result<Shares> {
    let flat = book.as_constant()?;
    let raw = 2.0 * (theta - flat.spread() * flat.ask_rho) / (3.0 + flat.ask_rho / flat.bid_rho);
    Ok(raw.max(0.0))
}

/// Seeded Monte Carlo estimate of the expected profit: draws `y` from the
/// prior and replays the realised round trip through the book operations.
/// Returns `(mean, standard_error)`. Independent of [`expected_profit`]'s
/// moment algebra, which is why the test suites use it as an oracle.
pub fn monte_carlo_expected_profit(
    book: &LimitOrderBook,
    prior: &Prior,
    x: Shares,
    draws: u32,
    seed: u64,
) -> Result<(f64, f64)> {
    if draws == 0 {
        return Err(Error::validation("draw count must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 1..=draws {
        let y = prior.sample(rng.gen::<f64>());
        let profit = front_run_profit(book, x, y)?;
        let delta = profit - mean;
        mean += delta / i as f64;
        m2 += delta * (profit - mean);
    }
    let var = m2 / (draws as f64 - 1.0).max(1.0);
    Ok((mean, (var / draws as f64).sqrt()))
}
