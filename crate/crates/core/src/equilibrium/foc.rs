//! First-order conditions of the token holding problem.
//!
//! A user choosing end-of-period balances `m` solves
//! `max_m -m + beta * E[u(a(m)) + (1 + r^T) m - P a(m)]`, where `a(m)` is the
//! best blockspace purchase given the budget `(1 + r^T) m`. At an interior
//! optimum the budget binds in exactly one state, where
//! `u'(a) / P = 1 + (r - E[r^T]) / (pi (1 + r^T))`; in every other state the
//! user buys up to `u'(a) = P`.

use serde::{Deserialize, Serialize};

use super::{binding_wedge, user_demand, StateOutcome, SteadyStateEquilibrium};
use crate::econ::{EconomyConfig, ShockState};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocResidual {
    pub agent_type: usize,
    pub state: ShockState,
    pub binding: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocDerivative {
    pub agent_type: usize,
    pub holdings: f64,
    pub objective: f64,
    pub derivative: f64,
}

/// Residuals of every type's marginal condition in every state where it has
/// demand, evaluated at the equilibrium activities.
pub fn shock_foc_residual(cfg: &EconomyConfig, eq: &SteadyStateEquilibrium) -> Vec<FocResidual> {
    residuals(cfg, eq, None)
}

/// Same as [`shock_foc_residual`], but with binding-state activity recomputed
/// from the given balances as `(1 + r^T) m / P`.
pub fn shock_foc_residual_with_holdings(
    cfg: &EconomyConfig,
    eq: &SteadyStateEquilibrium,
    holdings: &[f64],
) -> Vec<FocResidual> {
    residuals(cfg, eq, Some(holdings))
}

fn residuals(
    cfg: &EconomyConfig,
    eq: &SteadyStateEquilibrium,
    holdings: Option<&[f64]>,
) -> Vec<FocResidual> {
    let mut out = Vec::new();
    for (k, t) in cfg.agent_types.iter().enumerate() {
        for o in &eq.states {
            let utility = t.utility(o.state);
            if utility.is_zero() || !(o.effective_price > 0.0) {
                continue;
            }
            let binding = eq.binding_states[k] == Some(o.state);
            let a = match (binding, holdings) {
                (true, Some(m)) => (1.0 + o.token_return) * m[k] / o.effective_price,
                _ => o.activities[k],
            };
            let ratio = utility.marginal(a) / o.effective_price;
            let target = if binding {
                binding_wedge(cfg.r, eq.expected_return, o.probability, o.token_return)
            } else {
                1.0
            };
            out.push(FocResidual {
                agent_type: k,
                state: o.state,
                binding,
                residual: ratio - target,
            });
        }
    }
    out
}

/// One period-pair of the holding problem for type `k` at balances `m`,
/// with prices and returns taken from `eq`.
pub fn holding_objective(
    cfg: &EconomyConfig,
    eq: &SteadyStateEquilibrium,
    k: usize,
    m: f64,
) -> Result<f64> {
    let t = &cfg.agent_types[k];
    let mut expected = 0.0;
    for o in &eq.states {
        expected += o.probability * period_payoff(o, t.utility(o.state), m)?;
    }
    Ok(-m + cfg.beta() * expected)
}

fn period_payoff(o: &StateOutcome, utility: &crate::econ::StateUtility, m: f64) -> Result<f64> {
    let wealth = (1.0 + o.token_return) * m;
    let a = user_demand(utility, o.effective_price, wealth)?;
    Ok(utility.value(a) + wealth - o.effective_price * a)
}

/// Centered difference of [`holding_objective`] at `m` with step `h`.
pub fn holding_derivative(
    cfg: &EconomyConfig,
    eq: &SteadyStateEquilibrium,
    k: usize,
    m: f64,
    h: f64,
) -> Result<f64> {
    let up = holding_objective(cfg, eq, k, m + h)?;
    let down = holding_objective(cfg, eq, k, (m - h).max(0.0))?;
    Ok((up - down) / (m + h - (m - h).max(0.0)))
}

/// Derivative of each type's holding objective at its equilibrium balance.
pub fn check_foc_finite_difference(
    cfg: &EconomyConfig,
    eq: &SteadyStateEquilibrium,
    h: f64,
) -> Result<Vec<FocDerivative>> {
    (0..cfg.agent_types.len())
        .map(|k| {
            let m = eq.holdings[k];
            Ok(FocDerivative {
                agent_type: k,
                holdings: m,
                objective: holding_objective(cfg, eq, k, m)?,
                derivative: holding_derivative(cfg, eq, k, m, h)?,
            })
        })
        .collect()
}
