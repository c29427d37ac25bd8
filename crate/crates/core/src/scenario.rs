//! Scenario files: an economy configuration plus pinned regression values.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "deterministic",
//!   "r": 0.05,
//!   "gamma": 0.0,
//!   "agent_types": [
//!     {"mass": 1.0, "utility_by_state": {"high": {"isoelastic": {"scale": 0.5, "curvature": 0.5}}}}
//!   ],
//!   "cost": {"scale": 1.0, "curvature": 1.0},
//!   "shocks": {"kind": "deterministic"},
//!   "goldens": [
//!     {"name": "friedman_welfare", "regime": "friedman", "theta": 0.0,
//!      "quantity": "welfare", "value": 0.5952753944880749, "tolerance": 1e-9}
//!   ]
//! }
//! ```
//!
//! Unknown fields are rejected. Golden quantities are `welfare`,
//! `first_best_gap`, `expected_return`, `aggregate_holdings`, `holdings.<k>`,
//! `price.<state>`, `token_return.<state>` and `activity.<state>.<k>`, where
//! `<state>` is `low` or `high` and `<k>` indexes `agent_types`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::econ::{AgentTypeSpec, CostFn, EconomyConfig, ShockProcess, ShockState};
use crate::equilibrium::{solve, Regime, SteadyStateEquilibrium};
use crate::error::{Error, Result};
use crate::welfare::{evaluate, Check, WelfareReport};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub r: f64,
    pub gamma: f64,
    pub agent_types: Vec<AgentTypeSpec>,
    pub cost: CostFn,
    pub shocks: ShockProcess,
    #[serde(default)]
    pub goldens: Vec<Golden>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Golden {
    pub name: String,
    pub regime: Regime,
    #[serde(default)]
    pub theta: f64,
    pub quantity: Quantity,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Welfare,
    FirstBestGap,
    ExpectedReturn,
    AggregateHoldings,
    Holdings(usize),
    Price(ShockState),
    TokenReturn(ShockState),
    Activity(ShockState, usize),
}

impl Quantity {
    pub fn lookup(&self, eq: &SteadyStateEquilibrium, report: &WelfareReport) -> Result<f64> {
        let state = |s: ShockState| {
            eq.state(s)
                .ok_or_else(|| Error::Config(format!("{} regime has no {s} state", eq.regime.name())))
        };
        let index = |v: &[f64], k: usize| {
            v.get(k)
                .copied()
                .ok_or_else(|| Error::Config(format!("agent type {k} does not exist")))
        };
        match *self {
            Quantity::Welfare => Ok(report.expected_flow_welfare),
            Quantity::FirstBestGap => Ok(report.first_best_gap),
            Quantity::ExpectedReturn => Ok(eq.expected_return),
            Quantity::AggregateHoldings => Ok(eq.aggregate_holdings),
            Quantity::Holdings(k) => index(&eq.holdings, k),
            Quantity::Price(s) => Ok(state(s)?.price),
            Quantity::TokenReturn(s) => Ok(state(s)?.token_return),
            Quantity::Activity(s, k) => index(&state(s)?.activities, k),
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Welfare => f.write_str("welfare"),
            Quantity::FirstBestGap => f.write_str("first_best_gap"),
            Quantity::ExpectedReturn => f.write_str("expected_return"),
            Quantity::AggregateHoldings => f.write_str("aggregate_holdings"),
            Quantity::Holdings(k) => write!(f, "holdings.{k}"),
            Quantity::Price(s) => write!(f, "price.{s}"),
            Quantity::TokenReturn(s) => write!(f, "token_return.{s}"),
            Quantity::Activity(s, k) => write!(f, "activity.{s}.{k}"),
        }
    }
}

impl FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split('.').collect();
        let state = |p: &str| match p {
            "low" => Ok(ShockState::Low),
            "high" => Ok(ShockState::High),
            _ => Err(format!("unknown state {p:?} in quantity {s:?}")),
        };
        let index = |p: &str| {
            p.parse::<usize>()
                .map_err(|_| format!("bad agent index {p:?} in quantity {s:?}"))
        };
        match parts.as_slice() {
            ["welfare"] => Ok(Quantity::Welfare),
            ["first_best_gap"] => Ok(Quantity::FirstBestGap),
            ["expected_return"] => Ok(Quantity::ExpectedReturn),
            ["aggregate_holdings"] => Ok(Quantity::AggregateHoldings),
            ["holdings", k] => Ok(Quantity::Holdings(index(k)?)),
            ["price", st] => Ok(Quantity::Price(state(st)?)),
            ["token_return", st] => Ok(Quantity::TokenReturn(state(st)?)),
            ["activity", st, k] => Ok(Quantity::Activity(state(st)?, index(k)?)),
            _ => Err(format!("unknown quantity {s:?}")),
        }
    }
}

impl Serialize for Quantity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn economy(&self) -> EconomyConfig {
        EconomyConfig {
            r: self.r,
            gamma: self.gamma,
            agent_types: self.agent_types.clone(),
            cost: self.cost,
            shocks: self.shocks,
        }
    }
}

/// Recomputes every golden and compares it with the pinned value.
pub fn golden_checks(cfg: &EconomyConfig, goldens: &[Golden]) -> Vec<Check> {
    goldens
        .iter()
        .map(|g| {
            let name = format!("golden:{}", g.name);
            let actual = solve(cfg, g.regime, g.theta)
                .and_then(|eq| evaluate(cfg, &eq).map(|rep| (eq, rep)))
                .and_then(|(eq, rep)| g.quantity.lookup(&eq, &rep));
            match actual {
                Ok(x) => {
                    let delta = (x - g.value).abs();
                    Check::measured(
                        &name,
                        g.tolerance - delta,
                        format!("{} = {x:e}, pinned {:e}, |delta| = {delta:e}", g.quantity, g.value),
                    )
                }
                Err(e) => Check::failed(&name, e.to_string()),
            }
        })
        .collect()
}
