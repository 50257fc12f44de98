//! The slow trader's best response and market efficiency.
//!
//! Bob has a weakly decreasing linear marginal demand `B(y)`. Without Alice
//! he trades to the crossing `B(y*) = D(y*)`; with Alice front-running every
//! order he faces the marginal price of a doubled impact and trades
//! `y_A = (1 + b rho) / (2 + b rho) * y*`; with a transaction tax on top his
//! cost schedule develops a kink at Alice's participation threshold and his
//! optimum comes from a four-candidate comparison.
//!
//! Policy bands come in two flavours throughout: the `closed_form` interval,
//! the analytic expression derived alongside the model, and the `exact`
//! interval implied by directly comparing the quantities the band
//! summarises. For the deadweight loss the two differ by a factor of two at
//! `b = 0`; for the improves-Bob bands the exact comparison turns out to be
//! empty (the taxed no-Alice cost `(1+R) H(y)` and the untaxed front-run
//! cost `y D(y)` cross exactly at the participation threshold, so the tax
//! never strictly helps Bob). Reports carry both, and the tests hold the
//! exact intervals to the direct comparisons.

use serde::Serialize;

use crate::book::{Cash, LimitOrderBook, Price, Shares};
use crate::error::{Error, Result};
use crate::numeric::{adaptive_simpson, bisect_root};
use crate::tax::{self, TaxSchedule};

/// Bob's marginal demand line `B(y) = intercept - slope * y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearDemand {
    intercept: Price,
    slope: f64,
}

impl LinearDemand {
    /// Demand from its price intercept `B(0)` and nonnegative slope.
    pub fn from_intercept(intercept: Price, slope: f64) -> Result<Self> {
        if !(intercept.is_finite() && slope.is_finite() && slope >= 0.0) {
            return Err(Error::validation(format!(
                "demand needs finite intercept and nonnegative slope, got ({intercept}, {slope})"
            )));
        }
        Ok(LinearDemand { intercept, slope })
    }

    /// Demand anchored so that `B(y_ref) = D(y_ref)` on the given book.
    pub fn anchored(book: &LimitOrderBook, y_ref: Shares, slope: f64) -> Result<Self> {
        let price = book.ask().marginal_price(y_ref)?;
        LinearDemand::from_intercept(price + slope * y_ref, slope)
    }

    pub fn intercept(&self) -> Price {
        self.intercept
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    /// Marginal price Bob will pay for one more share after `y`.
    pub fn value(&self, y: Shares) -> Price {
        self.intercept - self.slope * y
    }

    /// `∫_0^y B(u) du`.
    pub fn integral(&self, y: Shares) -> Cash {
        self.intercept * y - 0.5 * self.slope * y * y
    }
}

/// Bob's surplus-maximising quantity without Alice: the unique root of
/// `B(y) = D(y)`, or 0 when demand starts below the ask.
pub fn y_star(book: &LimitOrderBook, demand: &LinearDemand) -> Result<Shares> {
    let ask = book.ask();
    if demand.value(0.0) <= ask.reference_price() {
        return Ok(0.0);
    }
    if let Ok(rho) = ask.constant_density() {
        return Ok((demand.intercept() - ask.reference_price()) / (demand.slope() + 1.0 / rho));
    }
    // General strictly-positive density: expand until the gap turns negative,
    // erroring out if the book runs dry first.
    let gap = |y: f64| match ask.marginal_price(y) {
        Ok(d) => demand.value(y) - d,
        Err(_) => f64::NAN,
    };
    let mass = ask.total_mass();
    let mut hi = 1.0;
    loop {
        if mass.is_finite() && hi >= mass {
            let edge = mass * (1.0 - 1e-12);
            if gap(edge) > 0.0 {
                return Err(Error::NoRoot);
            }
            hi = edge;
            break;
        }
        let g = gap(hi);
        if g.is_nan() {
            return Err(Error::NoRoot);
        }
        if g < 0.0 {
            break;
        }
        hi *= 2.0;
        if hi > 1e18 {
            return Err(Error::NoConvergence("demand crossing ran away".into()));
        }
    }
    bisect_root(gap, 0.0, hi, 1e-13 * hi.max(1.0))
        .ok_or_else(|| Error::NoConvergence("no bracket for the demand crossing".into()))
}

/// Bob's surplus-maximising quantity when Alice front-runs every order:
/// `y_A = (1 + b rho) / (2 + b rho) * y*`. Constant-density ask only.
pub fn y_with_alice(book: &LimitOrderBook, demand: &LinearDemand) -> Result<Shares> {
    let rho = book.ask().constant_density()?;
    let ys = y_star(book, demand)?;
    let b_rho = demand.slope() * rho;
    Ok((1.0 + b_rho) / (2.0 + b_rho) * ys)
}

/// Bob's surplus trading `y` without Alice: `∫B - H(y)`.
pub fn surplus_no_alice(book: &LimitOrderBook, demand: &LinearDemand, y: Shares) -> Result<Cash> {
    Ok(demand.integral(y) - book.ask().cost_buy(y)?)
}

/// Bob's surplus trading `y` with Alice front-running: `∫B - y D(y)`.
pub fn surplus_alice(book: &LimitOrderBook, demand: &LinearDemand, y: Shares) -> Result<Cash> {
    Ok(demand.integral(y) - y * book.ask().marginal_price(y)?)
}

/// Bob's surplus trading `y` with Alice and the tax in force. Below Alice's
/// threshold she abstains and Bob pays the grossed-up book,
/// `(1 + R) H(y)`; above it she trades and he pays `(1 + R) y D(y)`.
pub fn surplus_alice_taxed(
    book: &LimitOrderBook,
    demand: &LinearDemand,
    tax: &TaxSchedule,
    y: Shares,
) -> Result<Cash> {
    let r = tax.overall();
    let threshold = tax::y_min(book, tax)?;
    let cost = if y <= threshold {
        (1.0 + r) * book.ask().cost_buy(y)?
    } else {
        (1.0 + r) * y * book.ask().marginal_price(y)?
    };
    Ok(demand.integral(y) - cost)
}

/// Deadweight loss of Alice's presence, both ways of writing it.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DeadweightLoss {
    /// `∫_{y_A}^{y*} (B - D)` by quadrature — the definition-level value.
    /// Equals `gamma*(y*) - gamma*(y_A)` and, at `b = 0`, Alice's profit.
    pub integral: Cash,
    /// The bracketed closed form `(b + 1/rho) [(c - 1/2)² + 1/4] (y*)²`
    /// with `c = (1 + b rho)/(2 + b rho)`. Disagrees with the integral (by a
    /// factor of 2 at `b = 0`); reported for comparison, not used.
    pub closed_form: Cash,
    pub y_star: Shares,
    pub y_alice: Shares,
}

/// Surplus destroyed by Alice relative to the no-Alice benchmark.
pub fn deadweight_loss(book: &LimitOrderBook, demand: &LinearDemand) -> Result<DeadweightLoss> {
    let rho = book.ask().constant_density()?;
    let ys = y_star(book, demand)?;
    let ya = y_with_alice(book, demand)?;
    let ask = book.ask();
    let integrand = |u: f64| {
        demand.value(u)
            - ask
                .marginal_price(u)
                .expect("quantities up to y* stay within the book")
    };
    let scale = (demand.intercept().abs() + ys.abs()).max(1.0);
    let integral = adaptive_simpson(integrand, ya, ys, 1e-13 * scale);
    let b_rho = demand.slope() * rho;
    let c = (1.0 + b_rho) / (2.0 + b_rho);
    let closed_form =
        (demand.slope() + 1.0 / rho) * ((c - 0.5).powi(2) + 0.25) * ys * ys;
    Ok(DeadweightLoss {
        integral,
        closed_form,
        y_star: ys,
        y_alice: ya,
    })
}

/// Deadweight relative to the no-Alice, no-tax benchmark when the market
/// trades `q`: `gamma*(y*) - gamma*(q)`, the surplus never realised on the
/// trades between `q` and `y*`.
fn deadweight_at_quantity(
    book: &LimitOrderBook,
    demand: &LinearDemand,
    y_star_value: Shares,
    q: Shares,
) -> Result<Cash> {
    Ok(surplus_no_alice(book, demand, y_star_value)? - surplus_no_alice(book, demand, q)?)
}

/// Bob's optimum with both Alice and the tax present, by exact candidate
/// enumeration: `{0, y1 (left-branch vertex, if it lands at or below the
/// threshold), y_min itself, y2 (right-branch vertex, if it clears the
/// threshold)}`. Ties break toward the smaller quantity.
pub fn y_with_alice_and_tax(
    book: &LimitOrderBook,
    demand: &LinearDemand,
    tax: &TaxSchedule,
) -> Result<Shares> {
    let rho = book.ask().constant_density()?;
    let s_ask = book.ask().reference_price();
    let r = tax.overall();
    let threshold = tax::y_min(book, tax)?;
    let b = demand.slope();

    // gamma_{A,T}(y) = A y - B_branch y²/2 with A = B(0) - (1+R) s*.
    let a = demand.intercept() - (1.0 + r) * s_ask;
    let b_left = b + (1.0 + r) / rho;
    let b_right = b + 2.0 * (1.0 + r) / rho;
    let gamma_left = |y: f64| a * y - 0.5 * b_left * y * y;
    let gamma_right = |y: f64| a * y - 0.5 * b_right * y * y;

    let mut candidates: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    let y1 = a / b_left;
    if y1 > 0.0 && y1 <= threshold {
        candidates.push((y1, gamma_left(y1)));
    }
    if threshold > 0.0 {
        candidates.push((threshold, gamma_left(threshold)));
    }
    let y2 = a / b_right;
    if y2 > threshold {
        candidates.push((y2, gamma_right(y2)));
    }

    let best = candidates
        .iter()
        .map(|&(_, g)| g)
        .fold(f64::NEG_INFINITY, f64::max);
    candidates.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let tie = 1e-12 * (1.0 + best.abs());
    Ok(candidates
        .iter()
        .find(|&&(_, g)| g >= best - tie)
        .map(|&(y, _)| y)
        .unwrap_or(0.0))
}

/// Open interval of quantities (or of `y*` values, depending on the band).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const EMPTY: Interval = Interval { lo: 0.0, hi: 0.0 };

    pub fn is_empty(&self) -> bool {
        !(self.lo < self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo < v && v < self.hi
    }
}

/// An analytic policy band next to the band the exact comparison yields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolicyBand {
    /// The closed-form interval derived with the model.
    pub closed_form: Interval,
    /// The interval on which the direct comparison actually favors the tax.
    pub exact: Interval,
}

/// Band of *fixed* trade sizes on which introducing the tax would raise
/// Bob's surplus.
///
/// Closed form: `(0, 2R/(2-R) s* rho)`. The exact comparison is empty: for
/// `y` at or below the threshold the taxed cost `(1+R) H(y)` exceeds the
/// front-run cost `y D(y)` strictly until they meet at `y_min` itself, and
/// beyond the threshold the tax is a pure surcharge.
pub fn bob_benefit_band(book: &LimitOrderBook, tax: &TaxSchedule) -> Result<PolicyBand> {
    let rho = book.ask().constant_density()?;
    let s_ask = book.ask().reference_price();
    let r = tax.overall();
    Ok(PolicyBand {
        closed_form: Interval {
            lo: 0.0,
            hi: 2.0 * r / (2.0 - r) * s_ask * rho,
        },
        exact: Interval::EMPTY,
    })
}

/// Band of `y*` values on which introducing the tax would raise Bob's
/// *optimal* surplus.
///
/// Closed form: `(R s* rho/(1+R+b rho), (2/(2-R) + 1/(b rho+1+R)) R s* rho)`.
/// The exact comparison is empty for the same reason as
/// [`bob_benefit_band`]: the taxed surplus is dominated pointwise, so its
/// maximum can never exceed the untaxed one.
pub fn bob_benefit_band_optimal(
    book: &LimitOrderBook,
    demand: &LinearDemand,
    tax: &TaxSchedule,
) -> Result<PolicyBand> {
    let rho = book.ask().constant_density()?;
    let s_ask = book.ask().reference_price();
    let r = tax.overall();
    let b_rho = demand.slope() * rho;
    let base = r * s_ask * rho;
    Ok(PolicyBand {
        closed_form: Interval {
            lo: base / (1.0 + r + b_rho),
            hi: (2.0 / (2.0 - r) + 1.0 / (b_rho + 1.0 + r)) * base,
        },
        exact: Interval::EMPTY,
    })
}

/// Band of `y*` values on which the tax lowers the deadweight loss
/// (equivalently, raises the traded quantity: more stocks traded is less
/// deadweight at fixed demand slope).
///
/// Exact interval: `(c, 2c)` with
/// `c = (2 + b rho)/(1 + b rho) * R/(1-R) * s* rho` — the lower endpoint is
/// where Bob's taxed vertex `y1` overtakes `y_A`, the upper where `y_A`
/// reaches the threshold. The closed form replaces the lower endpoint by
/// `(2 + b rho) R s* rho / (1 + R + b rho)`, which drops an order-`R` term.
pub fn tobin_effective_band(
    book: &LimitOrderBook,
    demand: &LinearDemand,
    tax: &TaxSchedule,
) -> Result<PolicyBand> {
    let rho = book.ask().constant_density()?;
    let s_ask = book.ask().reference_price();
    let r = tax.overall();
    let b_rho = demand.slope() * rho;
    let c = (2.0 + b_rho) / (1.0 + b_rho) * r / (1.0 - r) * s_ask * rho;
    Ok(PolicyBand {
        closed_form: Interval {
            lo: (2.0 + b_rho) * r * s_ask * rho / (1.0 + r + b_rho),
            hi: 2.0 * c,
        },
        exact: Interval { lo: c, hi: 2.0 * c },
    })
}

/// Total executed buy volume at the equilibrium quantity. With Alice every
/// share Bob buys is bought once by her as well, so volume doubles; with
/// `b = 0` the two regimes print exactly the same volume.
pub fn volume_report(
    book: &LimitOrderBook,
    demand: &LinearDemand,
    alice_present: bool,
) -> Result<Shares> {
    if alice_present {
        Ok(2.0 * y_with_alice(book, demand)?)
    } else {
        y_star(book, demand)
    }
}

/// Everything the equilibrium analysis produces for one scenario.
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub y_star: Shares,
    pub y_alice: Shares,
    pub y_alice_taxed: Shares,
    /// Bob's optimal surplus without Alice, `gamma*(y*)`.
    pub surplus_no_alice: Cash,
    /// Bob's optimal surplus with Alice, `gamma_A(y_A)`.
    pub surplus_alice: Cash,
    /// Bob's optimal surplus with Alice and the tax, `gamma_{A,T}(y_{A,T})`.
    pub surplus_alice_taxed: Cash,
    /// Alice's profit at the untaxed equilibrium, `y_A² / (2 rho)`.
    pub alice_profit: Cash,
    pub deadweight: DeadweightLoss,
    /// Deadweight with the tax in force, measured the same way:
    /// surplus never realised between `y_{A,T}` and `y*`.
    pub deadweight_taxed: Cash,
    /// Tax collected at the taxed equilibrium quantity.
    pub tax_revenue: Cash,
    pub volume_no_alice: Shares,
    pub volume_with_alice: Shares,
    pub bob_benefit_band: PolicyBand,
    pub bob_benefit_band_optimal: PolicyBand,
    pub tobin_effective_band: PolicyBand,
    /// Direct comparison: does the tax raise the traded quantity (and so
    /// lower the deadweight loss)?
    pub tax_effective: bool,
    /// Direct comparison: does the tax raise Bob's optimal surplus?
    pub tax_benefits_bob: bool,
}

/// Run the full equilibrium analysis. A missing tax means a zero tax.
pub fn equilibrium_report(
    book: &LimitOrderBook,
    demand: &LinearDemand,
    tax: Option<&TaxSchedule>,
) -> Result<EquilibriumReport> {
    let zero = TaxSchedule::ZERO;
    let tax = tax.unwrap_or(&zero);
    let rho = book.ask().constant_density()?;
    let ys = y_star(book, demand)?;
    let ya = y_with_alice(book, demand)?;
    let yat = y_with_alice_and_tax(book, demand, tax)?;
    let deadweight = deadweight_loss(book, demand)?;
    let threshold = tax::y_min(book, tax)?;
    let surplus_star = surplus_no_alice(book, demand, ys)?;
    let surplus_a = surplus_alice(book, demand, ya)?;
    let surplus_at = surplus_alice_taxed(book, demand, tax, yat)?;
    let tie = 1e-12 * (1.0 + surplus_a.abs());
    Ok(EquilibriumReport {
        y_star: ys,
        y_alice: ya,
        y_alice_taxed: yat,
        surplus_no_alice: surplus_star,
        surplus_alice: surplus_a,
        surplus_alice_taxed: surplus_at,
        alice_profit: ya * ya / (2.0 * rho),
        deadweight,
        deadweight_taxed: deadweight_at_quantity(book, demand, ys, yat)?,
        tax_revenue: tax::tax_revenue(book, tax, yat, yat > threshold)?,
        volume_no_alice: ys,
        volume_with_alice: 2.0 * ya,
        bob_benefit_band: bob_benefit_band(book, tax)?,
        bob_benefit_band_optimal: bob_benefit_band_optimal(book, demand, tax)?,
        tobin_effective_band: tobin_effective_band(book, demand, tax)?,
        tax_effective: yat > ya + tie,
        tax_benefits_bob: surplus_at > surplus_a + tie,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn book() -> LimitOrderBook {
        LimitOrderBook::constant(100.0, 10.0, 99.0, 10.0).unwrap()
    }

    #[test]
    fn y_star_zero_when_demand_below_ask() {
        let d = LinearDemand::from_intercept(99.5, 0.0).unwrap();
        assert_eq!(y_star(&book(), &d).unwrap(), 0.0);
    }

    #[test]
    fn y_star_flat_demand() {
        let d = LinearDemand::from_intercept(101.0, 0.0).unwrap();
        assert_relative_eq!(y_star(&book(), &d).unwrap(), 10.0, max_relative = 1e-12);
    }

    #[test]
    fn y_star_sloped_demand() {
        let d = LinearDemand::from_intercept(101.0, 0.1).unwrap();
        assert_relative_eq!(y_star(&book(), &d).unwrap(), 5.0, max_relative = 1e-12);
    }

    #[test]
    fn y_star_errors_when_demand_clears_book() {
        // Truncated affine ask: 25 shares in total, demand above the top.
        let ask = crate::book::BookSide::affine(crate::book::Orientation::Ask, 100.0, 10.0, -2.0)
            .unwrap();
        let bid = crate::book::BookSide::constant(crate::book::Orientation::Bid, 99.0, 10.0)
            .unwrap();
        let b = LimitOrderBook::new(ask, bid).unwrap();
        let d = LinearDemand::from_intercept(1000.0, 0.0).unwrap();
        assert!(matches!(y_star(&b, &d), Err(Error::NoRoot)));
    }

    #[test]
    fn y_with_alice_halves_flat_demand() {
        let d = LinearDemand::from_intercept(101.0, 0.0).unwrap();
        assert_relative_eq!(y_with_alice(&book(), &d).unwrap(), 5.0, max_relative = 1e-12);
    }

    #[test]
    fn y_with_alice_sloped() {
        // b = 0.1, rho = 10, y* = 5: (1 + 1)/(2 + 1) * 5 = 10/3.
        let d = LinearDemand::from_intercept(101.0, 0.1).unwrap();
        assert_relative_eq!(
            y_with_alice(&book(), &d).unwrap(),
            10.0 / 3.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn deep_book_leaves_bob_unmoved() {
        // b rho -> infinity: ratio -> 1.
        let deep = LimitOrderBook::constant(100.0, 1e9, 99.0, 1e9).unwrap();
        let d = LinearDemand::anchored(&deep, 5.0, 1.0).unwrap();
        let ys = y_star(&deep, &d).unwrap();
        let ya = y_with_alice(&deep, &d).unwrap();
        assert_relative_eq!(ya / ys, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn surpluses_vanish_at_zero() {
        let d = LinearDemand::from_intercept(101.0, 0.0).unwrap();
        assert_eq!(surplus_no_alice(&book(), &d, 0.0).unwrap(), 0.0);
        assert_eq!(surplus_alice(&book(), &d, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn surplus_identity_gamma_a_plus_profit() {
        // gamma_A(y) + pi(y) = gamma*(y) for arbitrary y.
        let d = LinearDemand::from_intercept(101.0, 0.07).unwrap();
        let b = book();
        for &y in &[0.5, 3.0, 10.0, 17.0] {
            let pi = y * b.ask().marginal_price(y).unwrap() - b.ask().cost_buy(y).unwrap();
            let lhs = surplus_alice(&b, &d, y).unwrap() + pi;
            let rhs = surplus_no_alice(&b, &d, y).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn canonical_surplus_value() {
        let d = LinearDemand::from_intercept(101.0, 0.0).unwrap();
        assert_relative_eq!(
            surplus_no_alice(&book(), &d, 10.0).unwrap(),
            5.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn deadweight_flat_demand() {
        let d = LinearDemand::from_intercept(101.0, 0.0).unwrap();
        let dw = deadweight_loss(&book(), &d).unwrap();
        assert_relative_eq!(dw.integral, 1.25, max_relative = 1e-9);
        // Matches the surplus difference...
        let diff = surplus_no_alice(&book(), &d, dw.y_star).unwrap()
            - surplus_no_alice(&book(), &d, dw.y_alice).unwrap();
        assert_relative_eq!(dw.integral, diff, max_relative = 1e-9);
        // ...and equals Alice's profit at b = 0, while the bracket form is
        // exactly twice that.
        assert_relative_eq!(dw.integral, 5.0_f64.powi(2) / 20.0, max_relative = 1e-9);
        assert_relative_eq!(dw.closed_form, 2.0 * dw.integral, max_relative = 1e-9);
    }

    #[test]
    fn deadweight_zero_when_quantities_agree() {
        let d = LinearDemand::from_intercept(101.0, 0.1).unwrap();
        let dw = deadweight_loss(&book(), &d).unwrap();
        let same = deadweight_at_quantity(&book(), &d, dw.y_star, dw.y_star).unwrap();
        assert!(same.abs() < 1e-12);
        assert!(dw.integral > 0.0);
    }

    #[test]
    fn deadweight_sloped_cross_check() {
        let d = LinearDemand::from_intercept(101.0, 0.1).unwrap();
        let dw = deadweight_loss(&book(), &d).unwrap();
        let diff = surplus_no_alice(&book(), &d, dw.y_star).unwrap()
            - surplus_no_alice(&book(), &d, dw.y_alice).unwrap();
        assert_relative_eq!(dw.integral, diff, max_relative = 1e-9);
    }

    #[test]
    fn taxed_quantity_reduces_to_y_alice_without_tax() {
        let d = LinearDemand::from_intercept(101.0, 0.1).unwrap();
        let yat = y_with_alice_and_tax(&book(), &d, &TaxSchedule::ZERO).unwrap();
        let ya = y_with_alice(&book(), &d).unwrap();
        assert_relative_eq!(yat, ya, max_relative = 1e-14);
    }

    #[test]
    fn taxed_quantity_large_demand_takes_right_branch() {
        // b = 0, y* far above the threshold: y2 = y*/(2(1+R)) - R s* rho/(2(1+R)).
        let tax = TaxSchedule::new(0.001, 0.001).unwrap();
        let r = tax.overall();
        let d = LinearDemand::from_intercept(110.0, 0.0).unwrap(); // y* = 100
        let yat = y_with_alice_and_tax(&book(), &d, &tax).unwrap();
        let expected = 100.0 / (2.0 * (1.0 + r)) - 0.5 * r / (1.0 + r) * 1000.0;
        assert_relative_eq!(yat, expected, max_relative = 1e-12);
        assert!(yat > tax::y_min(&book(), &tax).unwrap());
    }

    #[test]
    fn taxed_quantity_small_demand_takes_left_branch() {
        let tax = TaxSchedule::new(0.001, 0.001).unwrap();
        let r = tax.overall();
        // y* = 3 < threshold region
        let d = LinearDemand::from_intercept(100.3, 0.0).unwrap();
        let yat = y_with_alice_and_tax(&book(), &d, &tax).unwrap();
        let a = 100.3 - (1.0 + r) * 100.0;
        let expected = a / ((1.0 + r) / 10.0);
        assert_relative_eq!(yat, expected, max_relative = 1e-12);
        assert!(yat <= tax::y_min(&book(), &tax).unwrap());
    }

    #[test]
    fn bands_empty_at_zero_tax() {
        let d = LinearDemand::from_intercept(101.0, 0.0).unwrap();
        let b = book();
        assert!(bob_benefit_band(&b, &TaxSchedule::ZERO)
            .unwrap()
            .closed_form
            .is_empty());
        assert!(bob_benefit_band_optimal(&b, &d, &TaxSchedule::ZERO)
            .unwrap()
            .closed_form
            .is_empty());
        let t = tobin_effective_band(&b, &d, &TaxSchedule::ZERO).unwrap();
        assert!(t.closed_form.is_empty() && t.exact.is_empty());
    }

    #[test]
    fn bob_benefit_closed_form_endpoint() {
        let tax = TaxSchedule::new(0.001, 0.001).unwrap();
        let r = tax.overall();
        let band = bob_benefit_band(&book(), &tax).unwrap();
        assert_relative_eq!(
            band.closed_form.hi,
            2.0 * r / (2.0 - r) * 1000.0,
            max_relative = 1e-12
        );
        assert!((band.closed_form.hi - 2.002).abs() < 1e-2);
        assert!(band.exact.is_empty());
    }

    #[test]
    fn taxed_surplus_never_beats_untaxed_pointwise() {
        // The exact comparison behind the empty benefit bands.
        let tax = TaxSchedule::new(0.001, 0.001).unwrap();
        let d = LinearDemand::from_intercept(101.0, 0.0).unwrap();
        let b = book();
        let threshold = tax::y_min(&b, &tax).unwrap();
        for i in 0..200 {
            let y = 1e-3 + i as f64 * 0.05;
            let taxed = surplus_alice_taxed(&b, &d, &tax, y).unwrap();
            let untaxed = surplus_alice(&b, &d, y).unwrap();
            assert!(
                taxed <= untaxed + 1e-12,
                "taxed {taxed} > untaxed {untaxed} at y = {y}"
            );
        }
        // Equality exactly at the threshold.
        let at = surplus_alice_taxed(&b, &d, &tax, threshold).unwrap();
        let ut = surplus_alice(&b, &d, threshold).unwrap();
        assert_relative_eq!(at, ut, max_relative = 1e-12);
    }

    #[test]
    fn tobin_band_is_octave_above_threshold_scale() {
        let tax = TaxSchedule::new(0.001, 0.001).unwrap();
        let r = tax.overall();
        let d = LinearDemand::from_intercept(101.0, 0.0).unwrap();
        let band = tobin_effective_band(&book(), &d, &tax).unwrap();
        let c = 2.0 * r / (1.0 - r) * 1000.0; // (2+0)/(1+0) * R/(1-R) * s* rho
        assert_relative_eq!(band.exact.lo, c, max_relative = 1e-12);
        assert_relative_eq!(band.exact.hi, 2.0 * c, max_relative = 1e-12);
        // Closed-form upper endpoint coincides with the exact one.
        assert_relative_eq!(band.closed_form.hi, band.exact.hi, max_relative = 1e-12);
        // Lower endpoints differ at order R.
        assert!(band.closed_form.lo < band.exact.lo);
        assert_relative_eq!(band.closed_form.lo, band.exact.lo, max_relative = 3.0 * r);
    }

    #[test]
    fn volume_invariance_flat_demand() {
        let d = LinearDemand::from_intercept(101.0, 0.0).unwrap();
        let with = volume_report(&book(), &d, true).unwrap();
        let without = volume_report(&book(), &d, false).unwrap();
        assert_eq!(with, without);
        // Sloped demand breaks the invariance.
        let d = LinearDemand::from_intercept(101.0, 0.1).unwrap();
        let with = volume_report(&book(), &d, true).unwrap();
        let without = volume_report(&book(), &d, false).unwrap();
        assert!(with > without);
    }

    #[test]
    fn report_is_internally_consistent() {
        let tax = TaxSchedule::new(0.001, 0.001).unwrap();
        let d = LinearDemand::from_intercept(101.0, 0.05).unwrap();
        let rep = equilibrium_report(&book(), &d, Some(&tax)).unwrap();
        assert!(rep.y_alice <= rep.y_star);
        assert!(rep.deadweight.integral >= 0.0);
        assert!(!rep.tax_benefits_bob);
        assert_eq!(rep.tax_effective, rep.y_alice_taxed > rep.y_alice);
        assert_eq!(
            rep.tax_effective,
            rep.tobin_effective_band.exact.contains(rep.y_star)
        );
        // Effectiveness means exactly that the taxed market destroys less
        // surplus than the untaxed one with Alice.
        assert_eq!(
            rep.tax_effective,
            rep.deadweight_taxed < rep.deadweight.integral - 1e-12
        );
    }
}
