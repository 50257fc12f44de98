//! One side of a limit order book as an analytic density plus point masses.
//!
//! A side is stored in *distance* coordinates: `delta >= 0` measures how far a
//! price sits from the reference price, moving away from the spread (upward
//! for the ask side, downward for the bid side). Mass is held in two kinds of
//! elements: `Band`s carry a linear density `rho + slope * (delta - lo)` over
//! `[lo, hi)`, and `Atom`s carry a point mass. Elements are kept sorted in
//! execution order; an atom at a price always fills before density at the
//! same price, which is how a limit order "placed infinitesimally below" the
//! resting orders is modelled.
//!
//! Everything here is exact closed-form segment arithmetic; no quadrature.
//! All values are immutable and every operation returns new values, so the
//! types are freely shareable across threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Price in currency per share.
pub type Price = f64;
/// Quantity in shares.
pub type Shares = f64;
/// Currency amount.
pub type Cash = f64;

/// Which side of the book a [`BookSide`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Ask,
    Bid,
}

impl Orientation {
    /// +1 for ask (prices grow away from the spread), -1 for bid.
    fn sign(self) -> f64 {
        match self {
            Orientation::Ask => 1.0,
            Orientation::Bid => -1.0,
        }
    }
}

/// Density profile of one side, anchored at the reference price and extending
/// away from the spread. For the bid side, `slope` is taken with respect to
/// the distance from the reference price (positive slope means the book gets
/// deeper at prices further below the bid).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensitySpec {
    Constant {
        rho: f64,
    },
    Affine {
        rho0: f64,
        slope: f64,
    },
    /// Segments in absolute prices `(price_lo, price_hi, rho)`, sorted and
    /// non-overlapping, all lying on the side's half-line.
    PiecewiseConstant {
        segments: Vec<(f64, f64, f64)>,
    },
}

/// Mass element in distance coordinates. Bands use density
/// `rho + slope * (d - lo)` for `d` in `[lo, hi)`; `hi` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Element {
    Atom { delta: f64, qty: f64 },
    Band { lo: f64, hi: f64, rho: f64, slope: f64 },
}

impl Element {
    fn start(&self) -> f64 {
        match *self {
            Element::Atom { delta, .. } => delta,
            Element::Band { lo, .. } => lo,
        }
    }

    fn mass(&self) -> f64 {
        match *self {
            Element::Atom { qty, .. } => qty,
            Element::Band { lo, hi, rho, slope } => band_mass(lo, hi, rho, slope),
        }
    }

    fn is_atom(&self) -> bool {
        matches!(self, Element::Atom { .. })
    }
}

fn band_mass(lo: f64, hi: f64, rho: f64, slope: f64) -> f64 {
    if hi.is_infinite() {
        if rho > 0.0 || slope > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        let w = hi - lo;
        w * (rho + 0.5 * slope * w)
    }
}

/// Width of the leading portion of a band holding `amount` shares:
/// solves `rho*w + slope*w^2/2 = amount` for the smallest nonnegative root.
fn band_width_for(rho: f64, slope: f64, amount: f64) -> f64 {
    if amount <= 0.0 {
        return 0.0;
    }
    if slope == 0.0 {
        amount / rho
    } else {
        let disc = (rho * rho + 2.0 * slope * amount).max(0.0);
        2.0 * amount / (rho + disc.sqrt())
    }
}

/// `(width, integral of delta over the consumed mass)` for the first
/// `amount` shares of a band starting at `lo`.
fn band_take(lo: f64, rho: f64, slope: f64, amount: f64) -> (f64, f64) {
    let w = band_width_for(rho, slope, amount);
    let integral = lo * amount + 0.5 * rho * w * w + slope * w * w * w / 3.0;
    (w, integral)
}

/// Density band of a side, in absolute prices (`price_hi` may be infinite and,
/// for a bid side stretching to arbitrarily low prices, `price_lo` may be
/// `-inf`). `rho_lo` is the density at `price_lo`; `slope` is per unit price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityBand {
    pub price_lo: f64,
    pub price_hi: f64,
    pub rho_lo: f64,
    pub slope: f64,
}

/// Resting point mass at a single price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AtomLevel {
    pub price: f64,
    pub qty: f64,
}

/// Truncation order for the local expansion of cost and marginal price.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaylorOrder {
    /// Cost to x^2, price to x^1. Exact for constant density.
    Two,
    /// Cost to x^3, price to x^2; remainder is O(x^4) for smooth densities.
    Three,
}

/// Truncated local expansion around zero volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorExpansion {
    /// Cost of buying (ask) or revenue from selling (bid) `x` shares.
    pub cost: Cash,
    /// Post-trade touch price after `x` shares.
    pub price: Price,
}

/// One side of the book: reference price plus sorted mass elements.
#[derive(Debug, Clone, PartialEq)]
pub struct BookSide {
    orientation: Orientation,
    reference_price: Price,
    elems: Vec<Element>,
}

impl BookSide {
    /// Build a side from a density spec and a list of `(price, qty)` atoms.
    pub fn new(
        orientation: Orientation,
        reference_price: Price,
        density: &DensitySpec,
        atoms: &[(Price, Shares)],
    ) -> Result<Self> {
        if !reference_price.is_finite() || reference_price < 0.0 {
            return Err(Error::validation(format!(
                "reference price must be finite and nonnegative, got {reference_price}"
            )));
        }
        let sign = orientation.sign();
        let mut elems = Vec::new();
        match density {
            DensitySpec::Constant { rho } => {
                check_density(*rho)?;
                if *rho > 0.0 {
                    elems.push(Element::Band {
                        lo: 0.0,
                        hi: f64::INFINITY,
                        rho: *rho,
                        slope: 0.0,
                    });
                }
            }
            DensitySpec::Affine { rho0, slope } => {
                check_density(*rho0)?;
                if !slope.is_finite() {
                    return Err(Error::validation("affine slope must be finite"));
                }
                if *slope < 0.0 {
                    // Clamp at zero beyond the root; density never negative.
                    let hi = rho0 / -slope;
                    if hi > 0.0 {
                        elems.push(Element::Band {
                            lo: 0.0,
                            hi,
                            rho: *rho0,
                            slope: *slope,
                        });
                    }
                } else if *rho0 > 0.0 || *slope > 0.0 {
                    elems.push(Element::Band {
                        lo: 0.0,
                        hi: f64::INFINITY,
                        rho: *rho0,
                        slope: *slope,
                    });
                }
            }
            DensitySpec::PiecewiseConstant { segments } => {
                for &(lo, hi, rho) in segments {
                    check_density(rho)?;
                    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                        return Err(Error::validation(format!(
                            "segment ({lo}, {hi}) must satisfy price_lo < price_hi"
                        )));
                    }
                    let (d_lo, d_hi) = match orientation {
                        Orientation::Ask => (lo - reference_price, hi - reference_price),
                        Orientation::Bid => (reference_price - hi, reference_price - lo),
                    };
                    if d_lo < 0.0 {
                        return Err(Error::validation(format!(
                            "segment ({lo}, {hi}) lies on the wrong side of the reference price {reference_price}"
                        )));
                    }
                    if rho > 0.0 {
                        elems.push(Element::Band {
                            lo: d_lo,
                            hi: d_hi,
                            rho,
                            slope: 0.0,
                        });
                    }
                }
            }
        }
        for &(price, qty) in atoms {
            if !(qty.is_finite() && qty > 0.0) {
                return Err(Error::validation(format!(
                    "atom quantity must be strictly positive, got {qty}"
                )));
            }
            let delta = sign * (price - reference_price);
            if delta < 0.0 {
                return Err(Error::validation(format!(
                    "atom at {price} lies on the wrong side of the reference price {reference_price}"
                )));
            }
            elems.push(Element::Atom { delta, qty });
        }
        let elems = normalize(elems)?;
        if let Some(first) = elems.first() {
            if first.start() != 0.0 {
                return Err(Error::validation(format!(
                    "reference price {reference_price} is not the touch: first resting order sits {} away",
                    first.start()
                )));
            }
        }
        Ok(BookSide {
            orientation,
            reference_price,
            elems,
        })
    }

    /// Constant-density side anchored at `reference_price`.
    pub fn constant(orientation: Orientation, reference_price: Price, rho: f64) -> Result<Self> {
        Self::new(orientation, reference_price, &DensitySpec::Constant { rho }, &[])
    }

    /// Affine-density side; negative slopes are truncated at the root.
    pub fn affine(
        orientation: Orientation,
        reference_price: Price,
        rho0: f64,
        slope: f64,
    ) -> Result<Self> {
        Self::new(
            orientation,
            reference_price,
            &DensitySpec::Affine { rho0, slope },
            &[],
        )
    }

    fn from_elems(orientation: Orientation, reference_price: Price, elems: Vec<Element>) -> Self {
        BookSide {
            orientation,
            reference_price,
            elems,
        }
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Touch price: best ask (lowest sell) or best bid (highest buy).
    pub fn reference_price(&self) -> Price {
        self.reference_price
    }

    /// Total resting mass; may be infinite.
    pub fn total_mass(&self) -> Shares {
        self.elems.iter().map(Element::mass).sum()
    }

    fn delta_of(&self, price: Price) -> f64 {
        self.orientation.sign() * (price - self.reference_price)
    }

    fn price_of(&self, delta: f64) -> Price {
        self.reference_price + self.orientation.sign() * delta
    }

    /// Cumulative depth: shares resting between the reference price and
    /// `price` inclusive. Prices on the spread side of the reference give 0.
    pub fn depth(&self, price: Price) -> Shares {
        let dmax = self.delta_of(price);
        if dmax < 0.0 {
            return 0.0;
        }
        let mut total = 0.0;
        for e in &self.elems {
            match *e {
                Element::Atom { delta, qty } => {
                    if delta <= dmax {
                        total += qty;
                    }
                }
                Element::Band { lo, hi, rho, slope } => {
                    if lo > dmax {
                        break;
                    }
                    let w = (hi.min(dmax) - lo).max(0.0);
                    total += w * (rho + 0.5 * slope * w);
                }
            }
        }
        total
    }

    /// Post-trade touch price after `x` shares execute against this side:
    /// the right quasi-inverse of depth (mirrored for the bid side). Constant
    /// while an atom is being consumed; jumps across zero-density gaps.
    pub fn marginal_price(&self, x: Shares) -> Result<Price> {
        Ok(self.price_of(self.marginal_delta(x)?))
    }

    fn marginal_delta(&self, x: Shares) -> Result<f64> {
        check_quantity(x)?;
        let mut rem = x;
        for e in &self.elems {
            match *e {
                Element::Atom { delta, qty } => {
                    if rem < qty {
                        return Ok(delta);
                    }
                    rem -= qty;
                }
                Element::Band { lo, hi, rho, slope } => {
                    let m = band_mass(lo, hi, rho, slope);
                    if rem < m {
                        return Ok(lo + band_width_for(rho, slope, rem));
                    }
                    rem -= m;
                }
            }
        }
        Err(Error::InsufficientDepth {
            requested: x,
            available: x - rem,
        })
    }

    /// Cash swept by executing `x` shares at the front of this side:
    /// cost paid on the ask, revenue received on the bid. Both nonnegative.
    fn sweep_cash(&self, x: Shares) -> Result<Cash> {
        check_quantity(x)?;
        let sign = self.orientation.sign();
        let mut rem = x;
        let mut cash = 0.0;
        for e in &self.elems {
            if rem <= 0.0 {
                break;
            }
            match *e {
                Element::Atom { delta, qty } => {
                    let take = rem.min(qty);
                    cash += take * (self.reference_price + sign * delta);
                    rem -= take;
                }
                Element::Band { lo, hi, rho, slope } => {
                    let m = band_mass(lo, hi, rho, slope);
                    let take = rem.min(m);
                    let integral = if take == m {
                        let w = hi - lo;
                        lo * m + 0.5 * rho * w * w + slope * w * w * w / 3.0
                    } else {
                        band_take(lo, rho, slope, take).1
                    };
                    cash += self.reference_price * take + sign * integral;
                    rem -= take;
                }
            }
        }
        if rem > 0.0 {
            return Err(Error::InsufficientDepth {
                requested: x,
                available: x - rem,
            });
        }
        Ok(cash)
    }

    /// Total cost of buying `x` shares by market order (ask side only).
    pub fn cost_buy(&self, x: Shares) -> Result<Cash> {
        if self.orientation != Orientation::Ask {
            return Err(Error::WrongSide { expected: "ask" });
        }
        self.sweep_cash(x)
    }

    /// Total revenue from selling `x` shares by market order (bid side only).
    pub fn revenue_sell(&self, x: Shares) -> Result<Cash> {
        if self.orientation != Orientation::Bid {
            return Err(Error::WrongSide { expected: "bid" });
        }
        self.sweep_cash(x)
    }

    /// Density and its one-sided slope at the reference price.
    pub fn touch_density(&self) -> Result<(f64, f64)> {
        match self.elems.first() {
            Some(&Element::Atom { delta, .. }) if delta == 0.0 => Err(Error::AtomAtTouch),
            Some(&Element::Band { lo, rho, slope, .. }) if lo == 0.0 && rho > 0.0 => {
                Ok((rho, slope))
            }
            _ => Err(Error::ZeroDensityAtTouch),
        }
    }

    /// Truncated expansion of sweep cash and marginal price around zero
    /// volume. Exact for constant density at order two; for other densities
    /// the cost remainder is `O(x^4)` (`O(x^3)` at order two).
    pub fn taylor_expansion(&self, x: Shares, order: TaylorOrder) -> Result<TaylorExpansion> {
        check_quantity(x)?;
        let (rho, slope) = self.touch_density()?;
        let sign = self.orientation.sign();
        let mut cost = self.reference_price * x + sign * x * x / (2.0 * rho);
        let mut price = self.reference_price + sign * x / rho;
        if order == TaylorOrder::Three {
            cost -= sign * slope * x.powi(3) / (6.0 * rho.powi(3));
            price -= sign * slope * x * x / (2.0 * rho.powi(3));
        }
        Ok(TaylorExpansion { cost, price })
    }

    /// Execute `x` shares against the front of this side. Returns the
    /// remaining side (reference price moved to the new touch) and the cash
    /// swept. Atoms at a price fill before density at the same price.
    pub fn execute_market(&self, x: Shares) -> Result<(BookSide, Cash)> {
        check_quantity(x)?;
        if x == 0.0 {
            return Ok((self.clone(), 0.0));
        }
        let sign = self.orientation.sign();
        let mut rem = x;
        let mut cash = 0.0;
        let mut remaining: Vec<Element> = Vec::with_capacity(self.elems.len());
        let mut stop_delta: Option<f64> = None;
        for (i, e) in self.elems.iter().enumerate() {
            match *e {
                Element::Atom { delta, qty } => {
                    if rem < qty {
                        cash += rem * (self.reference_price + sign * delta);
                        remaining.push(Element::Atom {
                            delta,
                            qty: qty - rem,
                        });
                        remaining.extend_from_slice(&self.elems[i + 1..]);
                        stop_delta = Some(delta);
                        rem = 0.0;
                        break;
                    }
                    cash += qty * (self.reference_price + sign * delta);
                    rem -= qty;
                }
                Element::Band { lo, hi, rho, slope } => {
                    let m = band_mass(lo, hi, rho, slope);
                    if rem < m {
                        let (w, integral) = band_take(lo, rho, slope, rem);
                        cash += self.reference_price * rem + sign * integral;
                        remaining.push(Element::Band {
                            lo: lo + w,
                            hi,
                            rho: rho + slope * w,
                            slope,
                        });
                        remaining.extend_from_slice(&self.elems[i + 1..]);
                        stop_delta = Some(lo + w);
                        rem = 0.0;
                        break;
                    }
                    let w = hi - lo;
                    cash += self.reference_price * m + sign * (lo * m + 0.5 * rho * w * w + slope * w * w * w / 3.0);
                    rem -= m;
                }
            }
        }
        if rem > 0.0 || stop_delta.is_none() {
            return Err(Error::InsufficientDepth {
                requested: x,
                available: x - rem,
            });
        }
        let shift = stop_delta.unwrap();
        let new_ref = self.price_of(shift);
        let rebased = remaining
            .into_iter()
            .map(|e| match e {
                Element::Atom { delta, qty } => Element::Atom {
                    delta: delta - shift,
                    qty,
                },
                Element::Band { lo, hi, rho, slope } => Element::Band {
                    lo: lo - shift,
                    hi: if hi.is_infinite() { hi } else { hi - shift },
                    rho,
                    slope,
                },
            })
            .collect();
        Ok((
            BookSide::from_elems(self.orientation, new_ref, rebased),
            cash,
        ))
    }

    /// Remove the first `x` shares in price priority (ask side market buy).
    pub fn apply_market_buy(&self, x: Shares) -> Result<BookSide> {
        if self.orientation != Orientation::Ask {
            return Err(Error::WrongSide { expected: "ask" });
        }
        Ok(self.execute_market(x)?.0)
    }

    /// Remove the first `x` shares in price priority (bid side market sell).
    pub fn apply_market_sell(&self, x: Shares) -> Result<BookSide> {
        if self.orientation != Orientation::Bid {
            return Err(Error::WrongSide { expected: "bid" });
        }
        Ok(self.execute_market(x)?.0)
    }

    /// Rest a new limit order of `qty` shares at `price`, with priority over
    /// anything already at that price. Ask side: the order must not cross the
    /// reference price.
    pub fn insert_limit(&self, price: Price, qty: Shares) -> Result<BookSide> {
        if !(qty.is_finite() && qty > 0.0) {
            return Err(Error::validation(format!(
                "limit order quantity must be strictly positive, got {qty}"
            )));
        }
        let delta = self.delta_of(price);
        if delta < 0.0 {
            return Err(Error::PriceInsideSpread {
                price,
                reference: self.reference_price,
            });
        }
        let mut elems = self.elems.clone();
        elems.push(Element::Atom { delta, qty });
        let elems = normalize(elems).expect("re-normalizing a valid side cannot fail");
        Ok(BookSide::from_elems(
            self.orientation,
            self.reference_price,
            elems,
        ))
    }

    /// Density bands in absolute prices, nearest the spread first.
    pub fn bands(&self) -> Vec<DensityBand> {
        self.elems
            .iter()
            .filter_map(|e| match *e {
                Element::Band { lo, hi, rho, slope } => Some(match self.orientation {
                    Orientation::Ask => DensityBand {
                        price_lo: self.reference_price + lo,
                        price_hi: self.reference_price + hi,
                        rho_lo: rho,
                        slope,
                    },
                    Orientation::Bid => DensityBand {
                        price_lo: if hi.is_infinite() {
                            f64::NEG_INFINITY
                        } else {
                            self.reference_price - hi
                        },
                        price_hi: self.reference_price - lo,
                        rho_lo: if hi.is_infinite() {
                            f64::NAN
                        } else {
                            rho + slope * (hi - lo)
                        },
                        slope: -slope,
                    },
                }),
                Element::Atom { .. } => None,
            })
            .collect()
    }

    /// Point masses in absolute prices, nearest the spread first.
    pub fn atom_levels(&self) -> Vec<AtomLevel> {
        self.elems
            .iter()
            .filter_map(|e| match *e {
                Element::Atom { delta, qty } => Some(AtomLevel {
                    price: self.price_of(delta),
                    qty,
                }),
                Element::Band { .. } => None,
            })
            .collect()
    }

    /// Structural equality within a relative tolerance, element by element.
    pub fn approx_eq(&self, other: &BookSide, tol: f64) -> bool {
        if self.orientation != other.orientation || self.elems.len() != other.elems.len() {
            return false;
        }
        let close = |a: f64, b: f64| {
            if a == b {
                return true; // covers shared infinities
            }
            (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
        };
        if !close(self.reference_price, other.reference_price) {
            return false;
        }
        self.elems.iter().zip(&other.elems).all(|(a, b)| match (*a, *b) {
            (Element::Atom { delta: d1, qty: q1 }, Element::Atom { delta: d2, qty: q2 }) => {
                close(d1, d2) && close(q1, q2)
            }
            (
                Element::Band { lo: l1, hi: h1, rho: r1, slope: s1 },
                Element::Band { lo: l2, hi: h2, rho: r2, slope: s2 },
            ) => close(l1, l2) && close(h1, h2) && close(r1, r2) && close(s1, s2),
            _ => false,
        })
    }

    /// Constant density of this side, if it is a single untruncated constant
    /// band with no atoms.
    pub fn constant_density(&self) -> Result<f64> {
        match self.elems.as_slice() {
            [Element::Band { lo, hi, rho, slope }]
                if *lo == 0.0 && hi.is_infinite() && *slope == 0.0 && *rho > 0.0 =>
            {
                Ok(*rho)
            }
            _ => Err(Error::NonconstantDensity),
        }
    }
}

fn check_density(rho: f64) -> Result<()> {
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::validation(format!(
            "density must be finite and nonnegative, got {rho}"
        )));
    }
    Ok(())
}

fn check_quantity(x: f64) -> Result<()> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::validation(format!(
            "quantity must be finite and nonnegative, got {x}"
        )));
    }
    Ok(())
}

/// Sort elements into execution order, split bands around interior atoms,
/// merge atoms at equal distance and reject overlapping bands.
fn normalize(mut elems: Vec<Element>) -> Result<Vec<Element>> {
    for e in &elems {
        match *e {
            Element::Atom { delta, qty } => {
                if !delta.is_finite() || !qty.is_finite() {
                    return Err(Error::validation("atom fields must be finite"));
                }
            }
            Element::Band { lo, hi, rho, slope } => {
                if !lo.is_finite() || !rho.is_finite() || !slope.is_finite() || hi.is_nan() {
                    return Err(Error::validation("band fields must be finite"));
                }
            }
        }
    }
    // Atoms strictly inside a band split it.
    let atom_deltas: Vec<f64> = elems
        .iter()
        .filter_map(|e| match *e {
            Element::Atom { delta, .. } => Some(delta),
            _ => None,
        })
        .collect();
    let mut split: Vec<Element> = Vec::with_capacity(elems.len());
    for e in elems.drain(..) {
        match e {
            Element::Band { mut lo, hi, mut rho, slope } => {
                let mut cuts: Vec<f64> = atom_deltas
                    .iter()
                    .copied()
                    .filter(|d| *d > lo && *d < hi)
                    .collect();
                cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                cuts.dedup();
                for cut in cuts {
                    split.push(Element::Band { lo, hi: cut, rho, slope });
                    rho += slope * (cut - lo);
                    lo = cut;
                }
                split.push(Element::Band { lo, hi, rho, slope });
            }
            atom => split.push(atom),
        }
    }
    // Drop empty elements, order by start with atoms ahead of bands.
    let mut out: Vec<Element> = split
        .into_iter()
        .filter(|e| match *e {
            Element::Atom { qty, .. } => qty > 0.0,
            Element::Band { lo, hi, rho, slope } => hi > lo && (rho > 0.0 || slope > 0.0),
        })
        .collect();
    out.sort_by(|a, b| {
        a.start()
            .partial_cmp(&b.start())
            .unwrap()
            .then_with(|| b.is_atom().cmp(&a.is_atom()))
    });
    // Merge atoms sharing a price.
    let mut merged: Vec<Element> = Vec::with_capacity(out.len());
    for e in out {
        if let (Some(Element::Atom { delta: d0, qty: q0 }), Element::Atom { delta, qty }) =
            (merged.last_mut(), &e)
        {
            if *d0 == *delta {
                *q0 += *qty;
                continue;
            }
        }
        merged.push(e);
    }
    // Bands must not overlap.
    let mut prev_hi = f64::NEG_INFINITY;
    for e in &merged {
        if let Element::Band { lo, hi, .. } = *e {
            if lo < prev_hi {
                return Err(Error::validation(format!(
                    "density segments overlap at distance {lo}"
                )));
            }
            prev_hi = hi;
        }
    }
    Ok(merged)
}

/// Two-sided book. The bid reference never exceeds the ask reference
/// (equality, a crossed-out spread, is permitted).
#[derive(Debug, Clone, PartialEq)]
pub struct LimitOrderBook {
    ask: BookSide,
    bid: BookSide,
}

impl LimitOrderBook {
    pub fn new(ask: BookSide, bid: BookSide) -> Result<Self> {
        if ask.orientation() != Orientation::Ask {
            return Err(Error::WrongSide { expected: "ask" });
        }
        if bid.orientation() != Orientation::Bid {
            return Err(Error::WrongSide { expected: "bid" });
        }
        if bid.reference_price() > ask.reference_price() {
            return Err(Error::validation(format!(
                "bid {} above ask {}",
                bid.reference_price(),
                ask.reference_price()
            )));
        }
        Ok(LimitOrderBook { ask, bid })
    }

    /// Constant densities on both sides.
    pub fn constant(ask_price: Price, ask_rho: f64, bid_price: Price, bid_rho: f64) -> Result<Self> {
        LimitOrderBook::new(
            BookSide::constant(Orientation::Ask, ask_price, ask_rho)?,
            BookSide::constant(Orientation::Bid, bid_price, bid_rho)?,
        )
    }

    pub fn ask(&self) -> &BookSide {
        &self.ask
    }

    pub fn bid(&self) -> &BookSide {
        &self.bid
    }

    pub fn with_ask(&self, ask: BookSide) -> Result<Self> {
        LimitOrderBook::new(ask, self.bid.clone())
    }

    /// Mid price between the two touches.
    pub fn mid_price(&self) -> Price {
        0.5 * (self.ask.reference_price() + self.bid.reference_price())
    }

    /// View of a constant-density book; errors if either side is not constant.
    pub fn as_constant(&self) -> Result<ConstantBook> {
        Ok(ConstantBook {
            ask_price: self.ask.reference_price(),
            ask_rho: self.ask.constant_density()?,
            bid_price: self.bid.reference_price(),
            bid_rho: self.bid.constant_density()?,
        })
    }

    pub fn approx_eq(&self, other: &LimitOrderBook, tol: f64) -> bool {
        self.ask.approx_eq(&other.ask, tol) && self.bid.approx_eq(&other.bid, tol)
    }
}

/// Flat view of a constant-density book used by the closed-form analyses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantBook {
    pub ask_price: Price,
    pub ask_rho: f64,
    pub bid_price: Price,
    pub bid_rho: f64,
}

impl ConstantBook {
    pub fn spread(&self) -> f64 {
        self.ask_price - self.bid_price
    }
}

/// Parse a book snapshot from CSV rows.
///
/// The header is `side,price_lo,price_hi,rho`. Density rows follow that
/// shape; atom rows use `side,price,qty,atom` with the literal marker `atom`
/// in the last column. Each side's reference price is the touch implied by
/// its rows.
pub fn parse_book_csv(text: &str) -> Result<LimitOrderBook> {
    let mut ask_segments: Vec<(f64, f64, f64)> = Vec::new();
    let mut bid_segments: Vec<(f64, f64, f64)> = Vec::new();
    let mut ask_atoms: Vec<(f64, f64)> = Vec::new();
    let mut bid_atoms: Vec<(f64, f64)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if lineno == 0 && fields.first() == Some(&"side") {
            continue; // header
        }
        if fields.len() != 4 {
            return Err(Error::validation(format!(
                "line {}: expected 4 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let side = fields[0].to_ascii_lowercase();
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| {
                Error::validation(format!("line {}: bad {what} value {s:?}", lineno + 1))
            })
        };
        if fields[3] == "atom" {
            let price = parse(fields[1], "price")?;
            let qty = parse(fields[2], "qty")?;
            match side.as_str() {
                "ask" => ask_atoms.push((price, qty)),
                "bid" => bid_atoms.push((price, qty)),
                other => {
                    return Err(Error::validation(format!(
                        "line {}: unknown side {other:?}",
                        lineno + 1
                    )))
                }
            }
        } else {
            let lo = parse(fields[1], "price_lo")?;
            let hi = parse(fields[2], "price_hi")?;
            let rho = parse(fields[3], "rho")?;
            match side.as_str() {
                "ask" => ask_segments.push((lo, hi, rho)),
                "bid" => bid_segments.push((lo, hi, rho)),
                other => {
                    return Err(Error::validation(format!(
                        "line {}: unknown side {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
    }

    let ask_ref = ask_segments
        .iter()
        .map(|s| s.0)
        .chain(ask_atoms.iter().map(|a| a.0))
        .fold(f64::INFINITY, f64::min);
    let bid_ref = bid_segments
        .iter()
        .map(|s| s.1)
        .chain(bid_atoms.iter().map(|a| a.0))
        .fold(f64::NEG_INFINITY, f64::max);
    if !ask_ref.is_finite() || !bid_ref.is_finite() {
        return Err(Error::validation(
            "book csv must contain at least one ask row and one bid row",
        ));
    }
    ask_segments.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    bid_segments.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let ask = BookSide::new(
        Orientation::Ask,
        ask_ref,
        &DensitySpec::PiecewiseConstant {
            segments: ask_segments,
        },
        &ask_atoms,
    )?;
    let bid = BookSide::new(
        Orientation::Bid,
        bid_ref,
        &DensitySpec::PiecewiseConstant {
            segments: bid_segments,
        },
        &bid_atoms,
    )?;
    LimitOrderBook::new(ask, bid)
}
