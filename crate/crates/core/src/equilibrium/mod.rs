//! Steady-state competitive equilibria for each demand regime.
//!
//! A user holds tokens worth `m` at the end of a period; next period the
//! tokens return `r^T` in dollar terms and fund blockspace purchases at the
//! effective price `(1 + theta) p`. In a steady state the dollar value of the
//! token stock grows with technology, which pins down the token return as a
//! function of the burn rate. Given returns, each user's token demand is
//! characterized by a marginal wedge in the state where the token budget
//! binds, and each state's blockspace market clears through [`market`].

mod foc;
mod market;
mod solvers;

use serde::{Deserialize, Serialize};

pub use foc::{
    check_foc_finite_difference, holding_derivative, holding_objective, shock_foc_residual,
    shock_foc_residual_with_holdings, FocDerivative, FocResidual,
};
pub use solvers::{
    solve_common_shock, solve_deterministic, solve_friedman, solve_heterogeneous,
    solve_iid_shocks,
};

use crate::econ::{CostFn, EconomyConfig, ShockKind, ShockState, StateUtility, BLOCKSPACE_CAPACITY};
use crate::error::{Error, Result};
use crate::first_best::Member;

/// Tolerance on `E[r^T] <= r` before a solution is flagged as a formal
/// steady state rather than an equilibrium.
pub const RETURN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Deterministic demand with the supply rule targeting `r^T = r`.
    Friedman,
    /// Deterministic demand with tax-and-burn.
    Deterministic,
    /// Idiosyncratic binary shocks, one type.
    Iid,
    /// Aggregate binary shock, one type without demand in the low state.
    Common,
    /// Aggregate binary shock with two types and congestion in the high state.
    Heterogeneous,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Friedman => "friedman",
            Regime::Deterministic => "deterministic",
            Regime::Iid => "iid",
            Regime::Common => "common",
            Regime::Heterogeneous => "heterogeneous",
        }
    }

    /// Regimes that can be solved for this configuration.
    pub fn applicable(cfg: &EconomyConfig) -> Vec<Regime> {
        match cfg.shocks.kind {
            ShockKind::Deterministic => vec![Regime::Friedman, Regime::Deterministic],
            ShockKind::IidBinary => vec![Regime::Iid],
            ShockKind::CommonBinary if cfg.agent_types.len() == 1 => vec![Regime::Common],
            ShockKind::CommonBinary => vec![Regime::Heterogeneous],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateOutcome {
    pub state: ShockState,
    pub probability: f64,
    /// Price received by validators per unit of activity.
    pub price: f64,
    pub tax: f64,
    pub effective_price: f64,
    pub token_return: f64,
    /// Activity per agent type in this state.
    pub activities: Vec<f64>,
    /// Total activity processed by validators in the market this state
    /// belongs to.
    pub aggregate_activity: f64,
    pub congested: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateEquilibrium {
    pub regime: Regime,
    /// Tax rate in the high state (the only taxed state in every regime
    /// except i.i.d. shocks, where it applies to all purchases).
    pub theta: f64,
    pub states: Vec<StateOutcome>,
    /// End-of-period dollar token balance per agent type.
    pub holdings: Vec<f64>,
    /// State in which each type exhausts its token balance.
    pub binding_states: Vec<Option<ShockState>>,
    pub aggregate_holdings: f64,
    pub expected_return: f64,
    /// High-state market failed to stay congested (heterogeneous regime).
    pub congestion_broken: bool,
    /// `E[r^T] > r`: the holding problem is unbounded, so this is a formal
    /// steady state rather than an equilibrium.
    pub return_exceeds_risk_free: bool,
}

impl SteadyStateEquilibrium {
    pub fn state(&self, s: ShockState) -> Option<&StateOutcome> {
        self.states.iter().find(|o| o.state == s)
    }

    /// Whether this solution is an equilibrium in the strict sense.
    pub fn is_converged(&self) -> bool {
        !self.return_exceeds_risk_free
    }

    pub fn any_congested(&self) -> bool {
        self.states.iter().any(|s| s.congested)
    }

    /// Markets over which allocation surplus is computed. Under
    /// idiosyncratic shocks all users trade in one market each period, so
    /// the two user states collapse into a single aggregate market.
    pub fn markets(&self, cfg: &EconomyConfig) -> Vec<Market> {
        if self.regime == Regime::Iid {
            let mut members = Vec::new();
            let mut activities = Vec::new();
            for o in &self.states {
                for (t, &a) in cfg.agent_types.iter().zip(&o.activities) {
                    members.push(Member {
                        mass: o.probability * t.mass,
                        utility: *t.utility(o.state),
                    });
                    activities.push(a);
                }
            }
            return vec![Market {
                label: "aggregate".into(),
                probability: 1.0,
                members,
                activities,
            }];
        }
        self.states
            .iter()
            .map(|o| Market {
                label: o.state.label().into(),
                probability: o.probability,
                members: cfg.members(o.state),
                activities: o.activities.clone(),
            })
            .collect()
    }
}

/// One blockspace market: who trades in it and how much.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    pub label: String,
    pub probability: f64,
    pub members: Vec<Member>,
    pub activities: Vec<f64>,
}

/// Solves `regime` at tax rate `theta`. Friedman ignores `theta`.
pub fn solve(cfg: &EconomyConfig, regime: Regime, theta: f64) -> Result<SteadyStateEquilibrium> {
    match regime {
        Regime::Friedman => solve_friedman(cfg),
        Regime::Deterministic => solve_deterministic(cfg, theta),
        Regime::Iid => solve_iid_shocks(cfg, theta),
        Regime::Common => solve_common_shock(cfg, theta),
        Regime::Heterogeneous => solve_heterogeneous(cfg, theta),
    }
}

/// Best blockspace purchase given an effective price and a token budget:
/// `min(u'^{-1}(price), wealth / price)`.
pub fn user_demand(utility: &StateUtility, effective_price: f64, wealth: f64) -> Result<f64> {
    let Some(f) = utility.as_fn() else {
        return Ok(0.0);
    };
    if !(effective_price > 0.0) {
        return Err(Error::domain(
            "user_demand",
            format!("effective price {effective_price} must be positive"),
        ));
    }
    let wealth = wealth.max(0.0);
    Ok(f.marginal_inv(effective_price).min(wealth / effective_price))
}

/// Activity validators are willing to process at price `p`.
pub fn validator_supply(cost: &CostFn, p: f64) -> Result<f64> {
    if !(p >= 0.0) {
        return Err(Error::domain(
            "validator_supply",
            format!("price {p} is negative"),
        ));
    }
    Ok(cost.marginal_inv(p).min(BLOCKSPACE_CAPACITY))
}

/// Marginal wedge `1 + (r - E[r^T]) / (pi (1 + r^T))` in the state where a
/// type's budget binds.
pub(crate) fn binding_wedge(r: f64, expected_return: f64, probability: f64, token_return: f64) -> f64 {
    1.0 + (r - expected_return) / (probability * (1.0 + token_return))
}
