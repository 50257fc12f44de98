//! The fast trader's round trip and its accounting.
//!
//! Alice sees Bob's incoming market buy of `y` shares an instant early. Her
//! round trip: buy `x` by market order, re-offer `x ∧ y` at the shifted ask
//! with price priority, let Bob's order lift it, and liquidate any excess
//! `(x - y)⁺` against the untouched bid side. Everything below prices that
//! recipe, sizes it, and measures its footprint on the tape.

use serde::Serialize;

use crate::book::{Cash, LimitOrderBook, Price, Shares};
use crate::error::{Error, Result};
use crate::numeric::grid_then_golden_max;

/// Direction of a slow trader's intended trade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Buy,
    Sell,
}

/// The slow trader's intended trade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeIntent {
    pub direction: Direction,
    pub quantity: Shares,
}

impl TradeIntent {
    pub fn buy(quantity: Shares) -> Result<Self> {
        if !(quantity.is_finite() && quantity >= 0.0) {
            return Err(Error::validation(format!(
                "trade quantity must be finite and nonnegative, got {quantity}"
            )));
        }
        Ok(TradeIntent {
            direction: Direction::Buy,
            quantity,
        })
    }
}

/// Extra cost Bob pays because Alice's market buy of `x` executes first:
/// `H(x + y) - H(x) - H(y)`. Nonnegative for convex sweep cost; equals
/// `x y / rho` on a constant-density ask.
pub fn slippage_cost(book: &LimitOrderBook, x: Shares, y: Shares) -> Result<Cash> {
    let ask = book.ask();
    Ok(ask.cost_buy(x + y)? - ask.cost_buy(x)? - ask.cost_buy(y)?)
}

/// Alice's round-trip profit from front-running `y` with `x`:
/// `-H(x) + (x ∧ y) D(x) + revenue_sell((x - y)⁺)`.
pub fn front_run_profit(book: &LimitOrderBook, x: Shares, y: Shares) -> Result<Cash> {
    let ask = book.ask();
    let cost = ask.cost_buy(x)?;
    let resale = x.min(y) * ask.marginal_price(x)?;
    let excess = (x - y).max(0.0);
    let liquidation = if excess > 0.0 {
        book.bid().revenue_sell(excess)?
    } else {
        0.0
    };
    Ok(-cost + resale + liquidation)
}

/// Full record of one front-running round trip.
#[derive(Debug, Clone)]
pub struct StrategyOutcome {
    /// Alice's market-buy size `x`.
    pub alice_trade: Shares,
    /// Bob's market-buy size `y`.
    pub bob_quantity: Shares,
    /// Alice's net cash at the end of the instant.
    pub alice_profit: Cash,
    /// What Bob paid for his `y` shares.
    pub bob_cost: Cash,
    /// Market-buy volume printed on the tape: Alice's `x` plus Bob's `y`.
    /// (Alice's re-offer is the passive side of Bob's print and her excess
    /// liquidation prints as sell volume, so neither adds here.)
    pub total_buy_volume: Shares,
    /// Buy volume in excess of what the ask move implies.
    pub churn: Shares,
    /// Book after all of Alice's orders, before Bob's.
    pub intermediate_book: LimitOrderBook,
    /// Book after Bob's order.
    pub post_book: LimitOrderBook,
}

/// Execute the front-running recipe as explicit book transformations.
///
/// The returned outcome's `alice_profit` reproduces [`front_run_profit`]
/// exactly; here it is assembled from the replayed cash flows instead of the
/// closed formula.
pub fn run_front_run(book: &LimitOrderBook, y: Shares, x: Shares) -> Result<StrategyOutcome> {
    // Step 1: Alice buys x, clearing the ask to its new touch.
    let (ask_after_buy, alice_cost) = book.ask().execute_market(x)?;
    let relist_price = ask_after_buy.reference_price();
    let relist_qty = x.min(y);

    // Step 2: Alice re-offers x ∧ y at the shifted ask, with priority.
    let ask_with_offer = if relist_qty > 0.0 {
        ask_after_buy.insert_limit(relist_price, relist_qty)?
    } else {
        ask_after_buy
    };

    // Step 3: Alice liquidates any excess against the untouched bid side.
    let excess = (x - y).max(0.0);
    let (bid_after, liquidation_revenue) = book.bid().execute_market(excess)?;

    let intermediate_book = LimitOrderBook::new(ask_with_offer.clone(), bid_after.clone())?;

    // Bob's market buy executes against the intermediate book; Alice's
    // re-offer fills first, paying her the re-list price per share.
    let (ask_post, bob_cost) = ask_with_offer.execute_market(y)?;
    let post_book = LimitOrderBook::new(ask_post, bid_after)?;

    let alice_resale = relist_qty * relist_price;
    let alice_profit = -alice_cost + alice_resale + liquidation_revenue;

    let total_buy_volume = x + y;
    let churn = churn(total_buy_volume, book, post_book.ask().reference_price());

    Ok(StrategyOutcome {
        alice_trade: x,
        bob_quantity: y,
        alice_profit,
        bob_cost,
        total_buy_volume,
        churn,
        intermediate_book,
        post_book,
    })
}

/// Buy volume in excess of what the ask move implies:
/// `C = V - F_before(ask_after)`. Meaningless if limit orders were cancelled
/// during the instant; the caller asserts none were.
pub fn churn(volume: Shares, book_before: &LimitOrderBook, ask_after: Price) -> Shares {
    volume - book_before.ask().depth(ask_after)
}

/// Does the book after the round trip match the book had Alice been absent?
/// Holds exactly whenever `x <= y`; fails for `x > y` (the bid side gets hit
/// and the ask clears deeper than Bob alone would have).
pub fn book_invariance_holds(book: &LimitOrderBook, y: Shares, x: Shares) -> Result<bool> {
    let with_alice = run_front_run(book, y, x)?.post_book;
    let without_alice = LimitOrderBook::new(
        book.ask().apply_market_buy(y)?,
        book.bid().clone(),
    )?;
    Ok(with_alice.approx_eq(&without_alice, 1e-9))
}

/// Alice's best front-running size against a known `y`.
///
/// With `cap_at_y` the search is restricted to `[0, y]`; otherwise it runs a
/// global scan over everything the two sides can absorb. Constant-density
/// books are maximised at `x = y` exactly. Returns 0 when no size makes a
/// positive profit; ties resolve to the smallest size.
pub fn optimal_front_run(book: &LimitOrderBook, y: Shares, cap_at_y: bool) -> Result<Shares> {
    if y < 0.0 || !y.is_finite() {
        return Err(Error::validation(format!(
            "bob quantity must be finite and nonnegative, got {y}"
        )));
    }
    let hi = if cap_at_y {
        y
    } else {
        search_ceiling(book, y)
    };
    if hi <= 0.0 {
        return Ok(0.0);
    }
    let objective = |x: f64| match front_run_profit(book, x, y) {
        Ok(p) => p,
        Err(_) => f64::NEG_INFINITY,
    };
    let (x_best, profit_best) = grid_then_golden_max(objective, 0.0, hi, 1000, 1e-10);
    if profit_best <= 0.0 {
        Ok(0.0)
    } else {
        Ok(x_best)
    }
}

/// Upper bound for the uncapped search: the ask can only supply so much, the
/// excess can only go into the bid, and past those caps profit is undefined.
/// With both sides unbounded the profit eventually decays linearly, so a
/// generous multiple of `y` suffices.
fn search_ceiling(book: &LimitOrderBook, y: Shares) -> f64 {
    let ask_cap = book.ask().total_mass();
    let bid_cap = if book.bid().total_mass().is_finite() {
        y + book.bid().total_mass()
    } else {
        f64::INFINITY
    };
    let cap = ask_cap.min(bid_cap);
    if cap.is_finite() {
        // Stay strictly inside the book so the quasi-inverse exists.
        cap * (1.0 - 1e-9)
    } else {
        8.0 * y.max(1.0)
    }
}

/// Cost split when Alice wants to end the instant holding `x` shares while
/// Bob buys `y`: she buys `x + y` and re-offers `y` at the shifted ask.
/// Returns `(alice_cost, bob_cost) = (H(x+y) - y D(x+y), y D(x+y))`.
pub fn acquisition_cost(book: &LimitOrderBook, x: Shares, y: Shares) -> Result<(Cash, Cash)> {
    let ask = book.ask();
    let total_cost = ask.cost_buy(x + y)?;
    let bob_cost = if y > 0.0 {
        y * ask.marginal_price(x + y)?
    } else {
        0.0
    };
    Ok((total_cost - bob_cost, bob_cost))
}

/// Both sides of the optional-integration profit identity of Jarrow and
/// Protter, evaluated on this book.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct JpReconciliation {
    /// Alice's mark-to-book profit from acquiring `alpha * y` alongside
    /// Bob's `y`.
    pub profit: Cash,
    /// The impact-squared benefit `(ΔS_book)² / eta`.
    pub impact_sq_term: Cash,
    /// Price impact factor implied by `rho = (1 + alpha) / (2 eta)`.
    pub eta: f64,
    /// Book-value move: change in the mid price over the instant.
    pub delta_s_book: f64,
}

/// Evaluate Alice's mark-to-book acquisition profit and the impact-squared
/// term it should reproduce. Requires constant, symmetric densities. With
/// `alpha = 1`, zero pre-trade spread and the mid price as book value the two
/// returned values coincide.
///
/// `book_value` is the price at which Alice marks her inventory; `None`
/// marks at the post-trade mid.
pub fn jp_reconcile(
    book: &LimitOrderBook,
    y: Shares,
    alpha: f64,
    book_value: Option<Price>,
) -> Result<JpReconciliation> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::validation(format!(
            "alpha must be finite and positive, got {alpha}"
        )));
    }
    let flat = book.as_constant()?;
    if (flat.ask_rho - flat.bid_rho).abs() > 1e-12 * flat.ask_rho.max(flat.bid_rho) {
        return Err(Error::AsymmetricBook {
            ask_rho: flat.ask_rho,
            bid_rho: flat.bid_rho,
        });
    }
    let x = alpha * y;
    let ask_after = book.ask().marginal_price(x + y)?;
    let mid_before = book.mid_price();
    let mid_after = 0.5 * (ask_after + flat.bid_price);
    let delta_s_book = mid_after - mid_before;
    let s_book = book_value.unwrap_or(mid_after);

    let (alice_cost, _) = acquisition_cost(book, x, y)?;
    let profit = x * s_book - alice_cost;

    let eta = (1.0 + alpha) / (2.0 * flat.ask_rho);
    let impact_sq_term = delta_s_book * delta_s_book / eta;
    Ok(JpReconciliation {
        profit,
        impact_sq_term,
        eta,
        delta_s_book,
    })
}
