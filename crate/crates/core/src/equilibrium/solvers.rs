use log::debug;

use super::market::{clear_market, Bidder, Cleared};
use super::{binding_wedge, Regime, StateOutcome, SteadyStateEquilibrium, RETURN_TOLERANCE};
use crate::econ::{EconomyConfig, ShockKind, ShockState, BLOCKSPACE_CAPACITY};
use crate::error::{Error, Result};
use crate::roots::{bisect, RootOptions};

const BUDGET_TOLERANCE: f64 = 1e-10;

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && theta >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("tax rate must be finite and non-negative, got {theta}")))
    }
}

fn require_kind(cfg: &EconomyConfig, kind: ShockKind, regime: Regime) -> Result<()> {
    cfg.check_structure()?;
    if cfg.shocks.kind != kind {
        return Err(Error::Config(format!(
            "the {} regime needs {:?} shocks, configuration has {:?}",
            regime.name(),
            kind,
            cfg.shocks.kind
        )));
    }
    Ok(())
}

/// Single type with demand only after a positive shock.
fn require_single_high_type(cfg: &EconomyConfig, regime: Regime) -> Result<()> {
    if cfg.agent_types.len() != 1 {
        return Err(Error::Config(format!(
            "the {} regime takes exactly one agent type, got {}",
            regime.name(),
            cfg.agent_types.len()
        )));
    }
    let t = &cfg.agent_types[0];
    if !t.utility(ShockState::Low).is_zero() || t.utility(ShockState::High).is_zero() {
        return Err(Error::Config(format!(
            "the {} regime needs zero utility in the low state and positive utility in the high state",
            regime.name()
        )));
    }
    Ok(())
}

/// Activities without shocks are independent of the tax: the markup on the
/// price is exactly offset by the higher token return it funds.
pub fn solve_friedman(cfg: &EconomyConfig) -> Result<SteadyStateEquilibrium> {
    require_kind(cfg, ShockKind::Deterministic, Regime::Friedman)?;
    single_state(cfg, Regime::Friedman, 0.0, cfg.r)
}

pub fn solve_deterministic(cfg: &EconomyConfig, theta: f64) -> Result<SteadyStateEquilibrium> {
    require_kind(cfg, ShockKind::Deterministic, Regime::Deterministic)?;
    check_theta(theta)?;
    let token_return = (1.0 + theta) * (1.0 + cfg.gamma) - 1.0;
    single_state(cfg, Regime::Deterministic, theta, token_return)
}

fn single_state(
    cfg: &EconomyConfig,
    regime: Regime,
    theta: f64,
    token_return: f64,
) -> Result<SteadyStateEquilibrium> {
    let wedge = binding_wedge(cfg.r, token_return, 1.0, token_return);
    let bidders: Vec<Bidder> = cfg
        .agent_types
        .iter()
        .map(|t| Bidder {
            mass: t.mass,
            utility: *t.utility(ShockState::High),
            wedge,
        })
        .collect();
    let cleared = clear_market(&bidders, theta, &cfg.cost)?;
    let effective_price = (1.0 + theta) * cleared.price;
    let holdings: Vec<f64> = cleared
        .activities
        .iter()
        .map(|a| effective_price * a / (1.0 + token_return))
        .collect();
    let binding_states = bidders
        .iter()
        .map(|b| (!b.utility.is_zero()).then_some(ShockState::High))
        .collect();
    let state = outcome(ShockState::High, 1.0, theta, token_return, &cleared);
    Ok(finish(cfg, regime, theta, vec![state], holdings, binding_states, token_return, false))
}

/// Idiosyncratic shocks: with a continuum of users the aggregates are
/// deterministic, so there is one price and one token return, and only the
/// share `rho` of users hit by a positive shock buys blockspace.
pub fn solve_iid_shocks(cfg: &EconomyConfig, theta: f64) -> Result<SteadyStateEquilibrium> {
    require_kind(cfg, ShockKind::IidBinary, Regime::Iid)?;
    require_single_high_type(cfg, Regime::Iid)?;
    check_theta(theta)?;
    let rho = cfg.shocks.rho;
    let token_return = (1.0 + cfg.gamma) * (1.0 + theta) / (1.0 + (1.0 - rho) * theta) - 1.0;
    let wedge = binding_wedge(cfg.r, token_return, rho, token_return);
    let t = &cfg.agent_types[0];
    let bidders = [Bidder {
        mass: rho * t.mass,
        utility: *t.utility(ShockState::High),
        wedge,
    }];
    let cleared = clear_market(&bidders, theta, &cfg.cost)?;
    let a_high = cleared.activities[0];
    let effective_price = (1.0 + theta) * cleared.price;

    let mut states = Vec::with_capacity(2);
    if rho < 1.0 {
        let mut low = outcome(ShockState::Low, 1.0 - rho, theta, token_return, &cleared);
        low.activities = vec![0.0];
        states.push(low);
    }
    let mut high = outcome(ShockState::High, rho, theta, token_return, &cleared);
    high.activities = vec![a_high];
    states.push(high);

    let holdings = vec![effective_price * a_high / (1.0 + token_return)];
    Ok(finish(
        cfg,
        Regime::Iid,
        theta,
        states,
        holdings,
        vec![Some(ShockState::High)],
        token_return,
        false,
    ))
}

/// Aggregate shock, one type. Nothing trades in the low state, so its price,
/// tax and token return are all zero; the high-state return is set by the
/// burn and leaves the high-state activity unchanged.
pub fn solve_common_shock(cfg: &EconomyConfig, theta_high: f64) -> Result<SteadyStateEquilibrium> {
    require_kind(cfg, ShockKind::CommonBinary, Regime::Common)?;
    require_single_high_type(cfg, Regime::Common)?;
    check_theta(theta_high)?;
    let x = (1.0 + theta_high) * (1.0 + cfg.gamma) - 1.0;
    let cand = common_system(cfg, theta_high, x, &[ShockState::High])?;
    Ok(cand.into_equilibrium(cfg, Regime::Common, theta_high))
}

/// Solution of the aggregate-shock system for a given high-state return.
struct CommonCandidate {
    high_return: f64,
    binding: Vec<ShockState>,
    high: Cleared,
    low: Option<Cleared>,
    holdings: Vec<f64>,
}

impl CommonCandidate {
    fn effective_high_price(&self, theta: f64) -> f64 {
        (1.0 + theta) * self.high.price
    }

    fn aggregate_holdings(&self, cfg: &EconomyConfig) -> f64 {
        cfg.agent_types
            .iter()
            .zip(&self.holdings)
            .map(|(t, m)| t.mass * m)
            .sum()
    }

    /// Largest relative budget violation in a non-binding state.
    fn budget_violation(&self, cfg: &EconomyConfig, theta: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, &binding) in self.binding.iter().enumerate() {
            let m = self.holdings[k];
            let checks = [
                (ShockState::High, self.effective_high_price(theta) * self.high.activities[k], (1.0 + self.high_return) * m),
                (
                    ShockState::Low,
                    self.low.as_ref().map_or(0.0, |l| l.price * l.activities[k]),
                    m,
                ),
            ];
            for (state, spend, budget) in checks {
                if state != binding && cfg.probability(state) > 0.0 {
                    worst = worst.max((spend - budget) / budget.max(1e-300));
                }
            }
        }
        worst
    }

    fn into_equilibrium(self, cfg: &EconomyConfig, regime: Regime, theta: f64) -> SteadyStateEquilibrium {
        let rho = cfg.probability(ShockState::High);
        let mut states = Vec::with_capacity(2);
        if let Some(low) = &self.low {
            states.push(outcome(ShockState::Low, 1.0 - rho, 0.0, 0.0, low));
        }
        states.push(outcome(ShockState::High, rho, theta, self.high_return, &self.high));
        let congestion_broken = regime == Regime::Heterogeneous && !self.high.congested;
        let binding = self.binding.iter().map(|&s| Some(s)).collect();
        finish(
            cfg,
            regime,
            theta,
            states,
            self.holdings,
            binding,
            rho * self.high_return,
            congestion_broken,
        )
    }
}

/// Clears both states for a candidate high-state return `x`; the low-state
/// return and tax are zero. `binding[k]` is where type `k` spends its tokens.
fn common_system(
    cfg: &EconomyConfig,
    theta: f64,
    x: f64,
    binding: &[ShockState],
) -> Result<CommonCandidate> {
    let rho = cfg.probability(ShockState::High);
    let expected = rho * x;
    let wedge = |k: usize, state: ShockState| -> f64 {
        if binding[k] != state {
            return 1.0;
        }
        match state {
            ShockState::High => binding_wedge(cfg.r, expected, rho, x),
            ShockState::Low => binding_wedge(cfg.r, expected, 1.0 - rho, 0.0),
        }
    };
    let bidders = |state: ShockState| -> Vec<Bidder> {
        cfg.agent_types
            .iter()
            .enumerate()
            .map(|(k, t)| Bidder {
                mass: t.mass,
                utility: *t.utility(state),
                wedge: wedge(k, state),
            })
            .collect()
    };
    let high = clear_market(&bidders(ShockState::High), theta, &cfg.cost)?;
    let low = if rho < 1.0 {
        Some(clear_market(&bidders(ShockState::Low), 0.0, &cfg.cost)?)
    } else {
        None
    };
    let high_price = (1.0 + theta) * high.price;
    let holdings = binding
        .iter()
        .enumerate()
        .map(|(k, state)| match state {
            ShockState::High => high_price * high.activities[k] / (1.0 + x),
            ShockState::Low => low.as_ref().map_or(0.0, |l| l.price * l.activities[k]),
        })
        .collect();
    Ok(CommonCandidate {
        high_return: x,
        binding: binding.to_vec(),
        high,
        low,
        holdings,
    })
}

/// Two types under an aggregate shock: type A has a high-state demand shift,
/// type B does not. With congestion in the high state, a burn shifts
/// high-state blockspace toward A and raises B's low-state activity.
///
/// The high-state return solves the steady-state burn identity
/// `x * (aggregate holdings) = theta * p_high * (high-state activity)` by
/// bisection; the remaining unknowns follow from market clearing.
pub fn solve_heterogeneous(cfg: &EconomyConfig, theta_high: f64) -> Result<SteadyStateEquilibrium> {
    require_kind(cfg, ShockKind::CommonBinary, Regime::Heterogeneous)?;
    check_theta(theta_high)?;
    let (_, b) = heterogeneous_roles(cfg)?;

    // Type B first tries to spend in the low state, then in the high state.
    let mut failures = Vec::new();
    for b_binding in [ShockState::Low, ShockState::High] {
        let mut binding = vec![ShockState::High; 2];
        binding[b] = b_binding;
        match heterogeneous_branch(cfg, theta_high, &binding) {
            Ok(cand) => {
                let violation = cand.budget_violation(cfg, theta_high);
                if violation <= BUDGET_TOLERANCE {
                    return Ok(cand.into_equilibrium(cfg, Regime::Heterogeneous, theta_high));
                }
                debug!("type B binding in {b_binding}: budget violated by {violation:e}");
                failures.push(format!(
                    "type B spending in the {b_binding} state violates a budget by {violation:e}"
                ));
            }
            Err(e) => {
                debug!("type B binding in {b_binding}: {e}");
                failures.push(format!("type B spending in the {b_binding} state: {e}"));
            }
        }
    }
    Err(Error::Inconsistent(format!(
        "no consistent binding pattern at theta = {theta_high}: {}",
        failures.join("; ")
    )))
}

/// Indices of type A (state-dependent demand) and type B (state-independent
/// demand), after checking the regime's preconditions.
fn heterogeneous_roles(cfg: &EconomyConfig) -> Result<(usize, usize)> {
    let types = &cfg.agent_types;
    if types.len() != 2 {
        return Err(Error::Config(format!(
            "the heterogeneous regime takes exactly two agent types, got {}",
            types.len()
        )));
    }
    if cfg.gamma != 0.0 {
        return Err(Error::Config(format!(
            "the heterogeneous regime assumes no technology growth, got gamma = {}",
            cfg.gamma
        )));
    }
    if !(cfg.shocks.rho < 1.0) {
        return Err(Error::Config("the heterogeneous regime needs rho < 1".into()));
    }
    let shifts: Vec<bool> = types
        .iter()
        .map(|t| t.utility_by_state.low != t.utility_by_state.high)
        .collect();
    let (a, b) = match shifts.as_slice() {
        [true, false] => (0, 1),
        [false, true] => (1, 0),
        _ => {
            return Err(Error::Config(
                "the heterogeneous regime needs one type whose utility shifts with the shock and one whose utility does not".into(),
            ))
        }
    };
    let (Some(high), Some(base)) = (
        types[a].utility(ShockState::High).as_fn(),
        types[b].utility(ShockState::High).as_fn(),
    ) else {
        return Err(Error::Config(
            "both heterogeneous types need positive high-state utility".into(),
        ));
    };
    let capacity_cost = cfg.cost.marginal(BLOCKSPACE_CAPACITY);
    let strong = high.marginal(BLOCKSPACE_CAPACITY / types[a].mass);
    let weak = base.marginal(BLOCKSPACE_CAPACITY);
    if !(strong > capacity_cost && capacity_cost > weak) {
        return Err(Error::Config(format!(
            "congestion condition fails: need u_A'(1/lambda) = {strong} > c'(1) = {capacity_cost} > u_B'(1) = {weak}"
        )));
    }
    Ok((a, b))
}

fn heterogeneous_branch(
    cfg: &EconomyConfig,
    theta: f64,
    binding: &[ShockState],
) -> Result<CommonCandidate> {
    if theta == 0.0 {
        return common_system(cfg, theta, 0.0, binding);
    }
    let burn_gap = |x: f64| -> Result<f64> {
        let cand = common_system(cfg, theta, x, binding)?;
        Ok(x * cand.aggregate_holdings(cfg) - theta * cand.high.price * cand.high.total)
    };

    let rho = cfg.shocks.rho;
    // A type spending in the low state needs a positive wedge there.
    let ceiling = binding
        .contains(&ShockState::Low)
        .then(|| (1.0 - rho + cfg.r) / rho);
    let mut hi = match ceiling {
        Some(c) => c * (1.0 - 1e-9),
        None => cfg.r / rho + 1.0,
    };
    let mut expansions = 0;
    while burn_gap(hi)? < 0.0 {
        if ceiling.is_some() || expansions >= 60 {
            return Err(Error::Inconsistent(format!(
                "burn identity has no root below x = {hi:e}"
            )));
        }
        hi *= 2.0;
        expansions += 1;
    }

    let mut first_error = None;
    let x = bisect(
        |x| match burn_gap(x) {
            Ok(g) => g,
            Err(e) => {
                first_error.get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        hi,
        RootOptions::default(),
    );
    if let Some(e) = first_error {
        return Err(e);
    }
    let x = x.map_err(Error::solver("heterogeneous high-state return"))?;
    common_system(cfg, theta, x, binding)
}

fn outcome(
    state: ShockState,
    probability: f64,
    tax: f64,
    token_return: f64,
    cleared: &Cleared,
) -> StateOutcome {
    StateOutcome {
        state,
        probability,
        price: cleared.price,
        tax,
        effective_price: (1.0 + tax) * cleared.price,
        token_return,
        activities: cleared.activities.clone(),
        aggregate_activity: cleared.total,
        congested: cleared.congested,
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    cfg: &EconomyConfig,
    regime: Regime,
    theta: f64,
    states: Vec<StateOutcome>,
    holdings: Vec<f64>,
    binding_states: Vec<Option<ShockState>>,
    expected_return: f64,
    congestion_broken: bool,
) -> SteadyStateEquilibrium {
    let aggregate_holdings = cfg
        .agent_types
        .iter()
        .zip(&holdings)
        .map(|(t, m)| t.mass * m)
        .sum();
    let return_exceeds_risk_free = expected_return > cfg.r + RETURN_TOLERANCE;
    if return_exceeds_risk_free {
        debug!(
            "{} at theta = {theta}: expected token return {expected_return} exceeds r = {}",
            regime.name(),
            cfg.r
        );
    }
    SteadyStateEquilibrium {
        regime,
        theta,
        states,
        holdings,
        binding_states,
        aggregate_holdings,
        expected_return,
        congestion_broken,
        return_exceeds_risk_free,
    }
}
