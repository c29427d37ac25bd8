//! Socially optimal per-state allocations.
//!
//! The planner maximizes `sum_k mass_k u_k(a_k) - c(sum_k mass_k a_k)` subject
//! to the blockspace capacity. Without the capacity constraint every active
//! type sets `u_k'(a_k) = c'(total)`. When that total would exceed capacity,
//! blockspace is rationed so that all active types share a common marginal
//! utility `C` and the chain runs exactly full.

use serde::{Deserialize, Serialize};

use crate::econ::{CostFn, EconomyConfig, ShockState, StateUtility, BLOCKSPACE_CAPACITY};
use crate::error::{Error, Result};
use crate::roots::{bisect, solve_positive, RootOptions};

/// One participant population in a single state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub mass: f64,
    pub utility: StateUtility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// Activity per member, in the order the members were given.
    pub activities: Vec<f64>,
    pub total: f64,
    pub congested: bool,
    /// Common marginal utility under rationing; zero when uncongested.
    pub shadow_marginal: f64,
}

impl Allocation {
    fn zero(n: usize) -> Self {
        Self {
            activities: vec![0.0; n],
            total: 0.0,
            congested: false,
            shadow_marginal: 0.0,
        }
    }
}

pub fn first_best_allocation(cfg: &EconomyConfig, state: ShockState) -> Result<Allocation> {
    first_best_for(&cfg.members(state), &cfg.cost)
}

/// First best for an arbitrary population; used directly by the welfare
/// module for aggregated markets.
pub fn first_best_for(members: &[Member], cost: &CostFn) -> Result<Allocation> {
    let active: Vec<_> = members
        .iter()
        .filter(|m| m.mass > 0.0 && !m.utility.is_zero())
        .collect();
    if active.is_empty() {
        return Ok(Allocation::zero(members.len()));
    }
    let demand = |x: f64| -> f64 {
        active
            .iter()
            .map(|m| m.mass * m.utility.marginal_inv(x))
            .sum()
    };

    let opts = RootOptions::default();
    let excess_at_capacity = demand(cost.marginal(BLOCKSPACE_CAPACITY)) - BLOCKSPACE_CAPACITY;
    let (marginal, congested) = if excess_at_capacity <= 0.0 {
        let total = bisect(
            |s| demand(cost.marginal(s)) - s,
            0.0,
            BLOCKSPACE_CAPACITY,
            opts,
        )
        .map_err(Error::solver("first-best total activity"))?;
        (cost.marginal(total), false)
    } else {
        let c = solve_positive(
            |x| demand(x) - BLOCKSPACE_CAPACITY,
            cost.marginal(BLOCKSPACE_CAPACITY),
            opts,
        )
        .map_err(Error::solver("first-best rationing marginal"))?;
        (c, true)
    };

    let activities: Vec<f64> = members
        .iter()
        .map(|m| {
            if m.mass > 0.0 {
                m.utility.marginal_inv(marginal)
            } else {
                0.0
            }
        })
        .collect();
    let total = members
        .iter()
        .zip(&activities)
        .map(|(m, a)| m.mass * a)
        .sum();
    Ok(Allocation {
        activities,
        total,
        congested,
        shadow_marginal: if congested { marginal } else { 0.0 },
    })
}

/// `sum_k mass_k u_k(a_k) - c(total)` for the members of one state.
pub fn surplus_for(members: &[Member], cost: &CostFn, activities: &[f64]) -> f64 {
    let mut utility = 0.0;
    let mut total = 0.0;
    for (m, &a) in members.iter().zip(activities) {
        utility += m.mass * m.utility.value(a);
        total += m.mass * a;
    }
    utility - cost.value(total)
}

pub fn flow_surplus(cfg: &EconomyConfig, alloc: &Allocation, state: ShockState) -> f64 {
    surplus_for(&cfg.members(state), &cfg.cost, &alloc.activities)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econ::{AgentTypeSpec, ShockProcess, UtilityByState, UtilityFn};
    use proptest::prelude::*;

    fn iso(scale: f64, eta: f64) -> StateUtility {
        UtilityFn::new(scale, eta).unwrap().into()
    }

    fn config(types: &[(f64, StateUtility)]) -> EconomyConfig {
        EconomyConfig {
            r: 0.05,
            gamma: 0.0,
            agent_types: types
                .iter()
                .map(|&(mass, high)| AgentTypeSpec {
                    mass,
                    utility_by_state: UtilityByState {
                        low: StateUtility::Zero,
                        high,
                    },
                })
                .collect(),
            cost: CostFn::new(1.0, 1.0).unwrap(),
            shocks: ShockProcess::deterministic(),
        }
    }

    #[test]
    fn single_type_matches_fine_grid_search() {
        let cfg = config(&[(1.0, iso(0.5, 0.5))]);
        let alloc = first_best_allocation(&cfg, ShockState::High).unwrap();
        assert!(!alloc.congested);
        assert!((alloc.activities[0] - 0.5f64.powf(2.0 / 3.0)).abs() < 1e-12);

        // Brute force over [0, 1] with step 1e-5.
        let u = iso(0.5, 0.5);
        let (mut best_a, mut best_v) = (0.0, f64::NEG_INFINITY);
        for i in 0..=100_000 {
            let a = i as f64 * 1e-5;
            let v = u.value(a) - cfg.cost.value(a);
            if v > best_v {
                best_a = a;
                best_v = v;
            }
        }
        assert!((alloc.activities[0] - best_a).abs() <= 1e-5);
        let s = flow_surplus(&cfg, &alloc, ShockState::High);
        assert!(s >= best_v - 1e-12 && s - best_v < 1e-9);
    }

    #[test]
    fn rationed_two_type_example() {
        let cfg = config(&[(0.5, iso(2.0, 0.5)), (0.5, iso(1.0, 0.5))]);
        let alloc = first_best_allocation(&cfg, ShockState::High).unwrap();
        assert!(alloc.congested);
        assert!((alloc.activities[0] - 1.6).abs() < 1e-10);
        assert!((alloc.activities[1] - 0.4).abs() < 1e-10);
        assert!((alloc.shadow_marginal - 2.0 / 1.6f64.sqrt()).abs() < 1e-10);
        assert!((alloc.total - 1.0).abs() < 1e-10);

        // Constrained brute force: a_2 pinned by the capacity constraint.
        let (u1, u2) = (iso(2.0, 0.5), iso(1.0, 0.5));
        let (mut best_a, mut best_v) = (0.0, f64::NEG_INFINITY);
        for i in 0..=200_000 {
            let a1 = i as f64 * 1e-5;
            let a2 = (1.0 - 0.5 * a1) / 0.5;
            let v = 0.5 * u1.value(a1) + 0.5 * u2.value(a2) - cfg.cost.value(1.0);
            if v > best_v {
                best_a = a1;
                best_v = v;
            }
        }
        assert!((alloc.activities[0] - best_a).abs() <= 1e-5);

        let expected = 0.5 * u1.value(1.6) + 0.5 * u2.value(0.4) - 0.5;
        assert!((flow_surplus(&cfg, &alloc, ShockState::High) - expected).abs() < 1e-9);
    }

    #[test]
    fn zero_demand_state_gives_zero_allocation() {
        let cfg = config(&[(1.0, iso(0.5, 0.5))]);
        let alloc = first_best_allocation(&cfg, ShockState::Low).unwrap();
        assert_eq!(alloc, Allocation::zero(1));
        assert_eq!(flow_surplus(&cfg, &alloc, ShockState::Low), 0.0);
    }

    #[test]
    fn zero_utility_types_are_excluded_from_rationing() {
        let cfg = config(&[(0.5, iso(4.0, 0.5)), (0.5, StateUtility::Zero)]);
        let alloc = first_best_allocation(&cfg, ShockState::High).unwrap();
        assert!(alloc.congested);
        assert_eq!(alloc.activities[1], 0.0);
        assert!((alloc.activities[0] - 2.0).abs() < 1e-10);
    }

    fn two_type_strategy() -> impl Strategy<Value = EconomyConfig> {
        (
            0.1f64..0.9,
            0.1f64..4.0,
            0.1f64..0.9,
            0.1f64..4.0,
            0.1f64..0.9,
            0.2f64..3.0,
            0.2f64..3.0,
        )
            .prop_map(|(lambda, s1, e1, s2, e2, kappa, eps)| {
                let mut cfg = config(&[(lambda, iso(s1, e1)), (1.0 - lambda, iso(s2, e2))]);
                cfg.cost = CostFn::new(kappa, eps).unwrap();
                cfg
            })
    }

    proptest! {
        #[test]
        fn allocation_is_consistent(cfg in two_type_strategy()) {
            let alloc = first_best_allocation(&cfg, ShockState::High).unwrap();
            let total: f64 = cfg.agent_types.iter().zip(&alloc.activities).map(|(t, a)| t.mass * a).sum();
            prop_assert!((alloc.total - total).abs() <= 1e-12);
            if alloc.congested {
                prop_assert!((alloc.total - 1.0).abs() <= 1e-9);
                for (t, &a) in cfg.agent_types.iter().zip(&alloc.activities) {
                    let mu = t.utility(ShockState::High).marginal(a);
                    prop_assert!((mu - alloc.shadow_marginal).abs() <= 1e-8 * (1.0 + mu));
                }
            } else {
                prop_assert!(alloc.total <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn perturbations_never_improve_surplus(
            cfg in two_type_strategy(),
            seeds in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 100),
        ) {
            let alloc = first_best_allocation(&cfg, ShockState::High).unwrap();
            let base = flow_surplus(&cfg, &alloc, ShockState::High);
            let lambdas: Vec<f64> = cfg.agent_types.iter().map(|t| t.mass).collect();
            for (d1, d2) in seeds {
                let mut a = [
                    (alloc.activities[0] * (1.0 + 0.2 * d1)).max(0.0),
                    (alloc.activities[1] * (1.0 + 0.2 * d2)).max(0.0),
                ];
                let total = lambdas[0] * a[0] + lambdas[1] * a[1];
                if total > 1.0 {
                    a[0] /= total;
                    a[1] /= total;
                }
                let trial = Allocation { activities: a.to_vec(), total: 0.0, congested: false, shadow_marginal: 0.0 };
                let s = flow_surplus(&cfg, &trial, ShockState::High);
                prop_assert!(s <= base + 1e-8, "perturbed {s} > optimum {base}");
            }
        }

        #[test]
        fn scaling_demand_up_never_lowers_total(cfg in two_type_strategy(), t in 1.0f64..3.0) {
            let base = first_best_allocation(&cfg, ShockState::High).unwrap();
            let mut scaled = cfg.clone();
            for ty in &mut scaled.agent_types {
                ty.utility_by_state.high = ty.utility_by_state.high.scaled(t);
            }
            let more = first_best_allocation(&scaled, ShockState::High).unwrap();
            prop_assert!(more.total >= base.total - 1e-12);
        }
    }
}
