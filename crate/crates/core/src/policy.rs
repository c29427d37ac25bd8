//! Token-supply rules and the supply recursion.
//!
//! Real balances evolve as `m_t = (1 + r^T_t) m_{t-1} - theta_t p_t a_t`: the
//! existing stock appreciates and burned fees leave circulation. With token
//! price `q_t` and nominal supply `M_t`, `m_t = q_t M_t` and
//! `1 + r^T_t = q_t / q_{t-1}`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::econ::{EconomyConfig, ShockKind, ShockState};
use crate::equilibrium::{solve_deterministic, solve_iid_shocks, SteadyStateEquilibrium};
use crate::error::{Error, Result};
use crate::output::format_float;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaxSchedule {
    pub low: f64,
    pub high: f64,
}

impl TaxSchedule {
    pub fn flat(theta: f64) -> Self {
        Self { low: theta, high: theta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupplyRule {
    /// Nominal supply never changes.
    FixedSupply,
    /// Supply shrinks (or grows) so the token return equals the risk-free rate.
    FriedmanTarget,
    /// A share of every fee is burned.
    TaxAndBurn(TaxSchedule),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplyPath {
    pub rule: SupplyRule,
    /// Nominal token supply `M_t`, `t = 0..=T`.
    pub nominal: Vec<f64>,
    /// Dollar price of one token `q_t`.
    pub token_price: Vec<f64>,
    /// Dollar value of the supply `m_t = q_t M_t`.
    pub real_balances: Vec<f64>,
    /// Token return realized in period `t`; undefined at `t = 0`.
    pub returns: Vec<Option<f64>>,
}

impl SupplyPath {
    pub fn periods(&self) -> usize {
        self.nominal.len() - 1
    }

    /// Writes columns `t, M, q, rT, m`; `rT` is empty at `t = 0`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "M", "q", "rT", "m"])?;
        for t in 0..self.nominal.len() {
            w.write_record([
                t.to_string(),
                format_float(self.nominal[t]),
                format_float(self.token_price[t]),
                self.returns[t].map(format_float).unwrap_or_default(),
                format_float(self.real_balances[t]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Supply ratio `M_t / M_{t-1}` that sets the token return to `r`.
pub fn friedman_supply_ratio(r: f64, gamma: f64) -> f64 {
    (1.0 + gamma) / (1.0 + r)
}

/// Burn rate that yields the target token return in a deterministic steady
/// state: `theta = (1 + r^T) / (1 + gamma) - 1`.
pub fn tax_for_return_target(target_return: f64, gamma: f64) -> Result<f64> {
    if target_return < gamma {
        return Err(Error::Infeasible(format!(
            "target return {target_return} is below gamma = {gamma}; it would need a negative burn"
        )));
    }
    Ok(((1.0 + target_return) / (1.0 + gamma) - 1.0).max(0.0))
}

/// One step of the real-balance recursion.
pub fn step_supply(m_prev: f64, token_return: f64, theta: f64, p: f64, a: f64) -> Result<f64> {
    let gross = (1.0 + token_return) * m_prev;
    let burn = theta * p * a;
    if !(burn < gross) {
        return Err(Error::domain(
            "step_supply",
            format!("burn {burn} exceeds the appreciated balance {gross}"),
        ));
    }
    Ok(gross - burn)
}

/// `(r^T - gamma) m - theta p a` per state, using aggregate holdings and the
/// activity of the market the state belongs to. Zero in a steady state with
/// burning.
pub fn steady_state_burn_residual(eq: &SteadyStateEquilibrium, gamma: f64) -> Vec<(ShockState, f64)> {
    eq.states
        .iter()
        .map(|o| {
            let residual = (o.token_return - gamma) * eq.aggregate_holdings
                - o.tax * o.price * o.aggregate_activity;
            (o.state, residual)
        })
        .collect()
}

/// Simulates `periods` steps of the steady state implied by `rule`, starting
/// from nominal supply `m0_nominal` at token price `q0`.
pub fn supply_path(
    rule: SupplyRule,
    cfg: &EconomyConfig,
    m0_nominal: f64,
    q0: f64,
    periods: usize,
) -> Result<SupplyPath> {
    if periods < 1 {
        return Err(Error::Config("a supply path needs at least one period".into()));
    }
    if !(m0_nominal > 0.0 && m0_nominal.is_finite()) {
        return Err(Error::Config(format!("initial supply must be positive, got {m0_nominal}")));
    }
    if !(q0 > 0.0 && q0.is_finite()) {
        return Err(Error::Config(format!("initial token price must be positive, got {q0}")));
    }
    cfg.check_structure()?;

    let mut path = SupplyPath {
        rule,
        nominal: vec![m0_nominal],
        token_price: vec![q0],
        real_balances: vec![q0 * m0_nominal],
        returns: vec![None],
    };

    match rule {
        SupplyRule::FixedSupply | SupplyRule::FriedmanTarget => {
            let (ratio, token_return) = match rule {
                SupplyRule::FixedSupply => {
                    if cfg.gamma > cfg.r {
                        return Err(Error::Infeasible(format!(
                            "fixed supply earns the token return gamma = {} above r = {}",
                            cfg.gamma, cfg.r
                        )));
                    }
                    (1.0, cfg.gamma)
                }
                _ => (friedman_supply_ratio(cfg.r, cfg.gamma), cfg.r),
            };
            for _ in 0..periods {
                let m = *path.nominal.last().unwrap() * ratio;
                let q = *path.token_price.last().unwrap() * (1.0 + token_return);
                push(&mut path, m, q, token_return);
            }
        }
        SupplyRule::TaxAndBurn(schedule) => {
            if !(schedule.low >= 0.0 && schedule.high >= 0.0) {
                return Err(Error::Config("burn rates must be non-negative".into()));
            }
            let eq = burn_equilibrium(cfg, schedule)?;
            if eq.return_exceeds_risk_free {
                return Err(Error::Infeasible(format!(
                    "burning at {} pushes the token return {} above r = {}",
                    schedule.high, eq.expected_return, cfg.r
                )));
            }
            let state = eq.state(ShockState::High).expect("high state always present");
            let token_return = state.token_return;
            let burn_share = state.tax * state.price * state.aggregate_activity;
            for _ in 0..periods {
                let m_prev = *path.real_balances.last().unwrap();
                let q_prev = *path.token_price.last().unwrap();
                // Dollar magnitudes scale with the real balances carried in.
                let scale = m_prev / eq.aggregate_holdings;
                let burn = burn_share * scale;
                let q = q_prev * (1.0 + token_return);
                let m = *path.nominal.last().unwrap() - burn / q;
                push(&mut path, m, q, token_return);
            }
        }
    }
    Ok(path)
}

fn burn_equilibrium(cfg: &EconomyConfig, schedule: TaxSchedule) -> Result<SteadyStateEquilibrium> {
    match cfg.shocks.kind {
        ShockKind::Deterministic => solve_deterministic(cfg, schedule.high),
        ShockKind::IidBinary => {
            if schedule.low != schedule.high {
                return Err(Error::Config(
                    "under idiosyncratic shocks every purchase carries the same burn rate".into(),
                ));
            }
            solve_iid_shocks(cfg, schedule.high)
        }
        ShockKind::CommonBinary => Err(Error::Config(
            "supply paths under aggregate shocks are state-contingent and not simulated".into(),
        )),
    }
}

fn push(path: &mut SupplyPath, nominal: f64, q: f64, token_return: f64) {
    path.nominal.push(nominal);
    path.token_price.push(q);
    path.real_balances.push(q * nominal);
    path.returns.push(Some(token_return));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econ::{AgentTypeSpec, CostFn, ShockProcess, StateUtility, UtilityByState, UtilityFn};
    use crate::equilibrium::{solve_common_shock, solve_heterogeneous};
    use proptest::prelude::*;

    fn cfg(r: f64, gamma: f64) -> EconomyConfig {
        EconomyConfig {
            r,
            gamma,
            agent_types: vec![AgentTypeSpec {
                mass: 1.0,
                utility_by_state: UtilityByState {
                    low: StateUtility::Zero,
                    high: UtilityFn::new(0.5, 0.5).unwrap().into(),
                },
            }],
            cost: CostFn::new(1.0, 1.0).unwrap(),
            shocks: ShockProcess::deterministic(),
        }
    }

    #[test]
    fn supply_ratio_examples() {
        assert_eq!(friedman_supply_ratio(0.05, 0.05), 1.0);
        assert_eq!(friedman_supply_ratio(0.05, 0.02), 1.02 / 1.05);
        assert!(friedman_supply_ratio(0.02, 0.05) > 1.0);
    }

    #[test]
    fn tax_for_return_target_examples() {
        assert_eq!(tax_for_return_target(0.02, 0.02).unwrap(), 0.0);
        assert!((tax_for_return_target(0.05, 0.0).unwrap() - 0.05).abs() < 1e-15);
        assert!(matches!(tax_for_return_target(0.03, 0.05), Err(Error::Infeasible(_))));
    }

    #[test]
    fn step_supply_examples() {
        assert_eq!(step_supply(2.0, 0.1, 0.0, 1.0, 1.0).unwrap(), 2.2);
        assert!((step_supply(1.0, 0.1, 0.05, 1.0, 1.0).unwrap() - 1.05).abs() < 1e-15);
        // Steady-state inputs: (rT - gamma) m = theta p a.
        let (gamma, m, theta, p, a) = (0.02, 3.0, 0.1, 0.6, 0.7);
        let rt = gamma + theta * p * a / m;
        assert!((step_supply(m, rt, theta, p, a).unwrap() - (1.0 + gamma) * m).abs() < 1e-14);
        assert!(step_supply(1.0, 0.0, 2.0, 1.0, 1.0).is_err());

        // Three unrolled periods against the closed-form recursion.
        let mut x = 1.0;
        for _ in 0..3 {
            x = step_supply(x, 0.1, 0.05, 1.0, 1.0).unwrap();
        }
        let expected = ((1.0f64 * 1.1 - 0.05) * 1.1 - 0.05) * 1.1 - 0.05;
        assert!((x - expected).abs() < 1e-15);
    }

    #[test]
    fn burn_residual_vanishes_with_active_burning() {
        let c = cfg(0.05, 0.0);
        let eq = solve_deterministic(&c, 0.1).unwrap();
        for (_, res) in steady_state_burn_residual(&eq, c.gamma) {
            assert!(res.abs() <= 1e-12);
        }
        let eq = solve_deterministic(&c, 0.0).unwrap();
        assert_eq!(steady_state_burn_residual(&eq, c.gamma)[0].1, 0.0);

        let mut iid = c.clone();
        iid.shocks = ShockProcess { kind: ShockKind::IidBinary, rho: 0.5 };
        let eq = solve_iid_shocks(&iid, 0.1).unwrap();
        for (_, res) in steady_state_burn_residual(&eq, iid.gamma) {
            assert!(res.abs() <= 1e-12);
        }

        let mut common = c.clone();
        common.shocks = ShockProcess { kind: ShockKind::CommonBinary, rho: 0.5 };
        let eq = solve_common_shock(&common, 0.1).unwrap();
        let res = steady_state_burn_residual(&eq, common.gamma);
        assert!(res.iter().all(|(_, r)| r.abs() <= 1e-12));

        let het = crate::testing::heterogeneous();
        let eq = solve_heterogeneous(&het, 0.05).unwrap();
        assert!(steady_state_burn_residual(&eq, 0.0).iter().all(|(_, r)| r.abs() <= 1e-10));
    }

    #[test]
    fn fixed_supply_without_growth_is_constant() {
        let path = supply_path(SupplyRule::FixedSupply, &cfg(0.05, 0.0), 100.0, 1.0, 5).unwrap();
        assert!(path.nominal.iter().all(|&m| m == 100.0));
        assert!(path.token_price.iter().all(|&q| q == 1.0));
        assert!(supply_path(SupplyRule::FixedSupply, &cfg(0.02, 0.05), 1.0, 1.0, 5).is_err());
    }

    #[test]
    fn friedman_path_closed_form() {
        let c = cfg(0.05, 0.02);
        let path = supply_path(SupplyRule::FriedmanTarget, &c, 100.0, 1.0, 10).unwrap();
        let ratio = 1.02f64 / 1.05;
        assert!((path.nominal[10] / (100.0 * ratio.powi(10)) - 1.0).abs() < 1e-12);
        assert!((path.token_price[10] / 1.05f64.powi(10) - 1.0).abs() < 1e-12);
        for t in 1..=10 {
            assert!((path.real_balances[t] / path.real_balances[t - 1] - 1.02).abs() < 1e-12);
        }
    }

    #[test]
    fn burning_at_the_friedman_tax_matches_friedman_path() {
        let c = cfg(0.05, 0.02);
        let theta = tax_for_return_target(c.r, c.gamma).unwrap();
        let burn = supply_path(SupplyRule::TaxAndBurn(TaxSchedule::flat(theta)), &c, 50.0, 2.0, 20).unwrap();
        let target = supply_path(SupplyRule::FriedmanTarget, &c, 50.0, 2.0, 20).unwrap();
        for t in 0..=20 {
            assert!((burn.real_balances[t] / target.real_balances[t] - 1.0).abs() < 1e-8);
            assert!((burn.nominal[t] / target.nominal[t] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn burn_paths_reject_unsupported_regimes() {
        let mut c = cfg(0.05, 0.0);
        c.shocks = ShockProcess { kind: ShockKind::CommonBinary, rho: 0.5 };
        assert!(supply_path(SupplyRule::TaxAndBurn(TaxSchedule::flat(0.01)), &c, 1.0, 1.0, 3).is_err());
        assert!(supply_path(SupplyRule::FixedSupply, &cfg(0.05, 0.0), 1.0, 1.0, 0).is_err());
        assert!(supply_path(SupplyRule::TaxAndBurn(TaxSchedule::flat(0.2)), &cfg(0.05, 0.0), 1.0, 1.0, 3).is_err());
    }

    #[test]
    fn csv_has_expected_columns() {
        let path = supply_path(SupplyRule::FixedSupply, &cfg(0.05, 0.0), 1.0, 1.0, 2).unwrap();
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,M,q,rT,m");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,") && lines[1].contains(",,"));
    }

    proptest! {
        #[test]
        fn every_rule_grows_real_balances_with_technology(
            r in 0.01f64..0.1,
            gamma in 0.0f64..0.01,
            frac in 0.0f64..1.0,
            m0 in 0.1f64..100.0,
        ) {
            let c = cfg(r, gamma);
            let friedman_theta = tax_for_return_target(r, gamma).unwrap();
            for rule in [
                SupplyRule::FixedSupply,
                SupplyRule::FriedmanTarget,
                SupplyRule::TaxAndBurn(TaxSchedule::flat(frac * friedman_theta)),
            ] {
                let path = supply_path(rule, &c, m0, 1.0, 12).unwrap();
                for t in 1..=12 {
                    let growth = path.real_balances[t] / path.real_balances[t - 1];
                    prop_assert!((growth - (1.0 + gamma)).abs() <= 1e-10);
                    prop_assert_eq!(path.real_balances[t], path.token_price[t] * path.nominal[t]);
                }
            }
        }

        #[test]
        fn tax_target_round_trips_through_the_solver(theta in 0.0f64..0.5, gamma in 0.0f64..0.05) {
            let c = cfg(0.6, gamma);
            let eq = solve_deterministic(&c, theta).unwrap();
            let back = tax_for_return_target(eq.expected_return, gamma).unwrap();
            prop_assert!((back - theta).abs() <= 1e-12);
        }
    }
}
