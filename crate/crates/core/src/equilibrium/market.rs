//! Clearing one blockspace market.
//!
//! Every bidder's demand comes from a first-order condition of the form
//! `u'(a) = (1 + tax) * p * wedge`, where the wedge is 1 in states where the
//! bidder's token budget is slack and exceeds 1 in the state where it binds.
//! Validators supply `c'^{-1}(p)` up to capacity.

use crate::econ::{CostFn, StateUtility, BLOCKSPACE_CAPACITY};
use crate::error::{Error, Result};
use crate::roots::{bisect, bracket_positive, RootOptions};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Bidder {
    pub mass: f64,
    pub utility: StateUtility,
    pub wedge: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Cleared {
    pub price: f64,
    pub activities: Vec<f64>,
    pub total: f64,
    pub congested: bool,
}

/// Tries the congested branch first (total = capacity, `p >= c'(1)`) and
/// falls back to marginal-cost pricing below capacity.
pub(crate) fn clear_market(bidders: &[Bidder], tax: f64, cost: &CostFn) -> Result<Cleared> {
    if bidders.iter().any(|b| !(b.wedge > 0.0 && b.wedge.is_finite())) {
        return Err(Error::Inconsistent(
            "non-positive marginal wedge in market clearing".into(),
        ));
    }
    let active: Vec<&Bidder> = bidders
        .iter()
        .filter(|b| b.mass > 0.0 && !b.utility.is_zero())
        .collect();
    if active.is_empty() {
        return Ok(Cleared {
            price: 0.0,
            activities: vec![0.0; bidders.len()],
            total: 0.0,
            congested: false,
        });
    }

    let markup = 1.0 + tax;
    let demand = |p: f64| -> f64 {
        active
            .iter()
            .map(|b| b.mass * b.utility.marginal_inv(markup * p * b.wedge))
            .sum()
    };
    let opts = RootOptions::default();
    let capacity_price = cost.marginal(BLOCKSPACE_CAPACITY);

    let (price, congested) = if demand(capacity_price) >= BLOCKSPACE_CAPACITY {
        let excess = |p: f64| demand(p) - BLOCKSPACE_CAPACITY;
        let (lo, hi) = bracket_positive(excess, capacity_price, 2.0 * capacity_price, 400)
            .map_err(Error::solver("congested clearing price"))?;
        let p = bisect(excess, lo.max(capacity_price), hi, opts)
            .map_err(Error::solver("congested clearing price"))?;
        (p, true)
    } else {
        let s = bisect(
            |s| demand(cost.marginal(s)) - s,
            0.0,
            BLOCKSPACE_CAPACITY,
            opts,
        )
        .map_err(Error::solver("uncongested clearing quantity"))?;
        (cost.marginal(s), false)
    };

    let activities: Vec<f64> = bidders
        .iter()
        .map(|b| {
            if b.mass > 0.0 && !b.utility.is_zero() {
                b.utility.marginal_inv(markup * price * b.wedge)
            } else {
                0.0
            }
        })
        .collect();
    let total = bidders
        .iter()
        .zip(&activities)
        .map(|(b, a)| b.mass * a)
        .sum();
    Ok(Cleared {
        price,
        activities,
        total,
        congested,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econ::UtilityFn;

    fn bidder(mass: f64, scale: f64, wedge: f64) -> Bidder {
        Bidder {
            mass,
            utility: UtilityFn::new(scale, 0.5).unwrap().into(),
            wedge,
        }
    }

    #[test]
    fn uncongested_price_equals_marginal_cost() {
        let cost = CostFn::new(1.0, 1.0).unwrap();
        let out = clear_market(&[bidder(1.0, 0.5, 1.0)], 0.0, &cost).unwrap();
        assert!(!out.congested);
        assert!((out.price - cost.marginal(out.total)).abs() < 1e-12);
        assert!((out.total - 0.5f64.powf(2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn congested_market_fills_capacity() {
        let cost = CostFn::new(1.0, 1.0).unwrap();
        let out = clear_market(
            &[bidder(0.5, 2.0, 1.0), bidder(0.5, 1.0, 1.0)],
            0.0,
            &cost,
        )
        .unwrap();
        assert!(out.congested);
        assert!((out.total - 1.0).abs() < 1e-12);
        assert!((out.price - 2.0 / 1.6f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn tax_scales_out_of_the_price_but_not_activities() {
        let cost = CostFn::new(1.0, 1.0).unwrap();
        let a = clear_market(&[bidder(1.0, 3.0, 1.2)], 0.0, &cost).unwrap();
        let b = clear_market(&[bidder(1.0, 3.0, 1.2)], 0.3, &cost).unwrap();
        assert!(a.congested && b.congested);
        assert!((a.activities[0] - b.activities[0]).abs() < 1e-12);
        assert!((a.price - 1.3 * b.price).abs() < 1e-12);
    }

    #[test]
    fn empty_market_clears_at_zero() {
        let cost = CostFn::new(1.0, 1.0).unwrap();
        let out = clear_market(
            &[Bidder {
                mass: 1.0,
                utility: StateUtility::Zero,
                wedge: 1.0,
            }],
            0.1,
            &cost,
        )
        .unwrap();
        assert_eq!(out.price, 0.0);
        assert_eq!(out.total, 0.0);
    }
}
