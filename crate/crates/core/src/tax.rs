//! Two-sided transaction tax on executed trades.
//!
//! A trade of nominal value `M` costs the market-order party `(1 + r_m) M`
//! and pays the limit-order party `(1 - r_l) M`. The wedge between the two,
//! `R = (1 + r_m) / (1 - r_l) - 1`, is the overall rate; it is what decides
//! whether a round trip can still turn a profit.

use serde::{Deserialize, Serialize};

use crate::book::{Cash, LimitOrderBook, Shares};
use crate::error::{Error, Result};
use crate::numeric::bisect_root;

/// Tax rates on the two sides of an execution. `limit_rate` may be negative
/// (a liquidity rebate) as long as the overall rate stays in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaxSchedule {
    pub market_rate: f64,
    pub limit_rate: f64,
}

impl TaxSchedule {
    pub const ZERO: TaxSchedule = TaxSchedule {
        market_rate: 0.0,
        limit_rate: 0.0,
    };

    pub fn new(market_rate: f64, limit_rate: f64) -> Result<Self> {
        overall_rate(market_rate, limit_rate)?;
        Ok(TaxSchedule {
            market_rate,
            limit_rate,
        })
    }

    /// Overall rate `R = (1 + r_m) / (1 - r_l) - 1`.
    pub fn overall(&self) -> f64 {
        (1.0 + self.market_rate) / (1.0 - self.limit_rate) - 1.0
    }
}

/// Overall taxation rate for market-side rate `r_m` and limit-side rate
/// `r_l`; rejects combinations with `R` outside `[0, 1)`.
pub fn overall_rate(r_m: f64, r_l: f64) -> Result<f64> {
    if !(r_m.is_finite() && r_l.is_finite() && r_m < 1.0 && r_l < 1.0) {
        return Err(Error::RateOutOfRange(format!(
            "rates must be finite and below 1, got r_m={r_m}, r_l={r_l}"
        )));
    }
    let r = (1.0 + r_m) / (1.0 - r_l) - 1.0;
    if !(0.0..1.0).contains(&r) {
        return Err(Error::RateOutOfRange(format!(
            "overall rate {r} outside [0, 1)"
        )));
    }
    Ok(r)
}

/// Alice's net-of-tax profit from a front run of size `x` (with `x <= y`, so
/// the whole position resells to Bob):
/// `(1 - r_l) x D(x) - (1 + r_m) H(x)`.
///
/// Evaluated from the exact cash flows, so it applies to any ask shape; on a
/// constant-density ask it reduces to the quadratic
/// `-(r_m + r_l) s* x + (1 - r_l - (1 + r_m)/2) x² / rho`.
pub fn taxed_front_run_profit(book: &LimitOrderBook, tax: &TaxSchedule, x: Shares) -> Result<Cash> {
    let ask = book.ask();
    let resale = x * ask.marginal_price(x)?;
    let cost = ask.cost_buy(x)?;
    Ok((1.0 - tax.limit_rate) * resale - (1.0 + tax.market_rate) * cost)
}

/// Smallest slow-trader quantity at which the taxed front run breaks even:
/// `y_min = 2 R / (1 - R) * s* rho`. Requires a constant-density ask; use
/// [`y_min_numeric`] for other shapes.
pub fn y_min(book: &LimitOrderBook, tax: &TaxSchedule) -> Result<Shares> {
    let ask = book.ask();
    let rho = ask.constant_density()?;
    let r = tax.overall();
    Ok(2.0 * r / (1.0 - r) * ask.reference_price() * rho)
}

/// Break-even size found by bisection on the exact taxed cash flows. Works
/// for any ask shape with positive depth. Returns 0 when the tax is zero.
pub fn y_min_numeric(book: &LimitOrderBook, tax: &TaxSchedule) -> Result<Shares> {
    if tax.overall() == 0.0 {
        return Ok(0.0);
    }
    let profit = |x: f64| taxed_front_run_profit(book, tax, x).unwrap_or(f64::NAN);
    // The profit is negative just past zero (the trivial root at x = 0 is
    // not the one we want); expand until it turns positive.
    let mut lo = 1e-9;
    if !(profit(lo) < 0.0) {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    let mut seen_positive = false;
    for _ in 0..80 {
        let p = profit(hi);
        if p.is_nan() {
            // Ran past the book's depth without a sign change.
            break;
        }
        if p > 0.0 {
            seen_positive = true;
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    if !seen_positive {
        return Err(Error::NoConvergence(
            "taxed profit never turns positive within the book's depth".into(),
        ));
    }
    bisect_root(profit, lo, hi, 1e-12 * hi.max(1.0))
        .ok_or_else(|| Error::NoConvergence("no sign change bracket for break-even size".into()))
}

/// Alice's optimal taxed front-run size: stay out for `y <= y_min` (she also
/// abstains exactly at the threshold, where her profit is zero), otherwise
/// trade as if untaxed, `x = y`. Requires a constant-density ask.
pub fn optimal_front_run_taxed(
    book: &LimitOrderBook,
    tax: &TaxSchedule,
    y: Shares,
) -> Result<Shares> {
    let threshold = y_min(book, tax)?;
    if y <= threshold {
        Ok(0.0)
    } else {
        Ok(y)
    }
}

/// Revenue the tax collects on Bob's trade of `y`.
///
/// Without Alice the book turns over once: `(r_m + r_l) H(y)`. With Alice
/// present and `y` above her threshold every share turns over twice:
/// `(r_m + r_l) (H(y) + y D(y))`. Only the sum `r_m + r_l` matters.
pub fn tax_revenue(
    book: &LimitOrderBook,
    tax: &TaxSchedule,
    y: Shares,
    alice_present: bool,
) -> Result<Cash> {
    let ask = book.ask();
    let rate_sum = tax.market_rate + tax.limit_rate;
    let single_pass = rate_sum * ask.cost_buy(y)?;
    if alice_present && y > y_min(book, tax)? {
        Ok(single_pass + rate_sum * y * ask.marginal_price(y)?)
    } else {
        Ok(single_pass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::LimitOrderBook;
    use crate::strategies::front_run_profit;
    use approx::assert_relative_eq;

    fn canonical_book() -> LimitOrderBook {
        LimitOrderBook::constant(100.0, 10.0, 99.0, 10.0).unwrap()
    }

    #[test]
    fn overall_rate_zero() {
        assert_eq!(overall_rate(0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn overall_rate_symmetric_millis() {
        let r = overall_rate(0.001, 0.001).unwrap();
        assert_relative_eq!(r, 1.001 / 0.999 - 1.0, max_relative = 1e-15);
        assert_relative_eq!(r, 2.002002002002e-3, max_relative = 1e-9);
    }

    #[test]
    fn limit_side_rebate_is_valid() {
        let tax = TaxSchedule::new(0.002, -0.0005).unwrap();
        assert!(tax.overall() > 0.0);
    }

    #[test]
    fn out_of_range_rates_rejected() {
        assert!(overall_rate(-0.5, 0.0).is_err()); // R < 0
        assert!(overall_rate(1.5, 0.0).is_err());
        assert!(overall_rate(0.0, 0.9).is_err()); // R >= 1
    }

    #[test]
    fn zero_tax_reduces_to_untaxed_profit() {
        let book = canonical_book();
        for &x in &[1.0, 5.0, 10.0] {
            let taxed = taxed_front_run_profit(&book, &TaxSchedule::ZERO, x).unwrap();
            let untaxed = front_run_profit(&book, x, x).unwrap();
            assert_relative_eq!(taxed, untaxed, max_relative = 1e-12);
        }
    }

    #[test]
    fn taxed_profit_negative_for_small_trades() {
        let tax = TaxSchedule::new(0.001, 0.001).unwrap();
        let p = taxed_front_run_profit(&canonical_book(), &tax, 2.0).unwrap();
        assert!(p < 0.0, "got {p}");
        // Quadratic closed form on a constant book.
        let expected = -(0.002) * 100.0 * 2.0 + (1.0 - 0.001 - 1.001 / 2.0) * 4.0 / 10.0;
        assert_relative_eq!(p, expected, max_relative = 1e-12);
    }

    #[test]
    fn y_min_closed_form_values() {
        let tax = TaxSchedule::new(0.001, 0.001).unwrap();
        let t = y_min(&canonical_book(), &tax).unwrap();
        let r = tax.overall();
        assert_relative_eq!(t, 2.0 * r / (1.0 - r) * 1000.0, max_relative = 1e-12);
        assert_relative_eq!(t, 4.012, max_relative = 1e-3);

        // Illiquid book: threshold shrinks tenfold.
        let illiquid = LimitOrderBook::constant(100.0, 1.0, 99.0, 1.0).unwrap();
        let t = y_min(&illiquid, &tax).unwrap();
        assert_relative_eq!(t, 0.4012, max_relative = 1e-3);
    }

    #[test]
    fn y_min_zero_without_tax() {
        assert_eq!(y_min(&canonical_book(), &TaxSchedule::ZERO).unwrap(), 0.0);
    }

    #[test]
    fn taxed_profit_has_root_at_y_min() {
        let tax = TaxSchedule::new(0.001, 0.001).unwrap();
        let book = canonical_book();
        let t = y_min(&book, &tax).unwrap();
        let p = taxed_front_run_profit(&book, &tax, t).unwrap();
        assert!(p.abs() < 1e-10, "profit at threshold: {p}");
        let numeric = y_min_numeric(&book, &tax).unwrap();
        assert_relative_eq!(numeric, t, max_relative = 1e-9);
    }

    #[test]
    fn optimal_taxed_size_switches_at_threshold() {
        let tax = TaxSchedule::new(0.001, 0.001).unwrap();
        let book = canonical_book();
        let t = y_min(&book, &tax).unwrap();
        assert_eq!(optimal_front_run_taxed(&book, &tax, 0.0).unwrap(), 0.0);
        assert_eq!(optimal_front_run_taxed(&book, &tax, t).unwrap(), 0.0);
        assert_eq!(
            optimal_front_run_taxed(&book, &tax, 2.0 * t).unwrap(),
            2.0 * t
        );
    }

    #[test]
    fn revenue_examples() {
        let tax = TaxSchedule::new(0.001, 0.001).unwrap();
        let book = canonical_book();
        assert_eq!(tax_revenue(&book, &tax, 0.0, false).unwrap(), 0.0);
        let absent = tax_revenue(&book, &tax, 10.0, false).unwrap();
        assert_relative_eq!(absent, 0.002 * 1005.0, max_relative = 1e-12);
        let present = tax_revenue(&book, &tax, 10.0, true).unwrap();
        assert_relative_eq!(present, 0.002 * (1005.0 + 1010.0), max_relative = 1e-12);
    }

    #[test]
    fn revenue_depends_only_on_rate_sum() {
        let book = canonical_book();
        let a = TaxSchedule::new(0.0015, 0.0005).unwrap();
        let b = TaxSchedule::new(0.0005, 0.0015).unwrap();
        let ra = tax_revenue(&book, &a, 10.0, true).unwrap();
        let rb = tax_revenue(&book, &b, 10.0, true).unwrap();
        assert_relative_eq!(ra, rb, max_relative = 1e-12);
        // But the deterrence threshold moves: taxing the limit side harder
        // scares Alice off at larger sizes.
        assert!(y_min(&book, &b).unwrap() > y_min(&book, &a).unwrap());
    }
}
