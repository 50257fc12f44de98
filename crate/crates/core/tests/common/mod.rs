//! Shared helpers for the integration suites: seeded random books and a
//! tick-oracle replay of the front-running recipe.

use bookarb_core::book::{BookSide, DensitySpec, LimitOrderBook, Orientation};
use bookarb_core::oracle::TickBook;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Distance horizon used when discretizing random books.
pub const ORACLE_SPAN: f64 = 4.0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random side: one of the three density shapes, with a few atoms.
pub fn random_side(rng: &mut ChaCha8Rng, orientation: Orientation, reference: f64) -> BookSide {
    let density = match rng.gen_range(0..4) {
        0 => DensitySpec::Constant {
            rho: rng.gen_range(2.0..50.0),
        },
        1 => {
            let rho0: f64 = rng.gen_range(5.0..50.0);
            // Keep truncated books deep enough for the sizes tests draw.
            let slope = rng.gen_range(-rho0 / 8.0..10.0);
            DensitySpec::Affine { rho0, slope }
        }
        _ => {
            let mut segments = Vec::new();
            let mut lo = 0.0;
            for _ in 0..rng.gen_range(1..=4) {
                let width = rng.gen_range(0.2..1.5);
                segments.push((lo, lo + width, rng.gen_range(2.0..50.0)));
                lo += width + if rng.gen_bool(0.3) {
                    rng.gen_range(0.0..0.5)
                } else {
                    0.0
                };
            }
            let segments = segments
                .into_iter()
                .map(|(a, b, r)| match orientation {
                    Orientation::Ask => (reference + a, reference + b, r),
                    Orientation::Bid => (reference - b, reference - a, r),
                })
                .collect();
            DensitySpec::PiecewiseConstant { segments }
        }
    };
    let mut atoms = Vec::new();
    for _ in 0..rng.gen_range(0..=3) {
        let delta = rng.gen_range(0.0..2.0);
        let price = match orientation {
            Orientation::Ask => reference + delta,
            Orientation::Bid => reference - delta,
        };
        atoms.push((price, rng.gen_range(0.5..5.0)));
    }
    BookSide::new(orientation, reference, &density, &atoms).unwrap()
}

pub fn random_book(rng: &mut ChaCha8Rng) -> LimitOrderBook {
    let ask_ref = rng.gen_range(80.0..150.0);
    let spread = rng.gen_range(0.0..2.0);
    let ask = random_side(rng, Orientation::Ask, ask_ref);
    let bid = random_side(rng, Orientation::Bid, ask_ref - spread);
    LimitOrderBook::new(ask, bid).unwrap()
}

/// Random constant-density book with the sampling ranges the policy suites
/// use: log-uniform depth and price.
pub fn random_constant_book(rng: &mut ChaCha8Rng) -> LimitOrderBook {
    let rho: f64 = log_uniform(rng, 0.1, 100.0);
    let s_ask: f64 = log_uniform(rng, 1.0, 1000.0);
    let spread = rng.gen_range(0.0..0.02) * s_ask;
    LimitOrderBook::constant(s_ask, rho, s_ask - spread, rho).unwrap()
}

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Largest size safely executable against a side, as seen by both the
/// analytic walk and a span-limited tick oracle.
pub fn usable_mass(side: &BookSide, span: f64) -> f64 {
    let far = match side.orientation() {
        Orientation::Ask => side.reference_price() + span,
        Orientation::Bid => side.reference_price() - span,
    };
    side.depth(far) * 0.9
}

/// Cash flows of the front-running recipe replayed on tick-discretized
/// sides: buy `x`, re-offer `x ∧ y` at the shifted ask, absorb Bob's `y`,
/// liquidate the excess on the bid. Returns Alice's profit.
pub fn tick_replay_front_run(book: &LimitOrderBook, x: f64, y: f64) -> f64 {
    let mut ask = TickBook::from_side(book.ask(), ORACLE_SPAN);
    let mut bid = TickBook::from_side(book.bid(), ORACLE_SPAN);
    let cost = ask.execute(x).expect("ask depth");
    let relist = x.min(y);
    let relist_price = if relist > 0.0 {
        let p = ask.touch().expect("post-trade touch");
        ask.insert_front_atom(p, relist);
        p
    } else {
        0.0
    };
    let excess = (x - y).max(0.0);
    let liquidation = if excess > 0.0 {
        bid.execute(excess).expect("bid depth")
    } else {
        0.0
    };
    ask.execute(y).expect("bob's buy");
    -cost + relist * relist_price + liquidation
}
