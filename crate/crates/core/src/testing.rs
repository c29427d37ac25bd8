//! Canonical configurations shared by unit tests.

use crate::econ::{
    AgentTypeSpec, CostFn, EconomyConfig, ShockKind, ShockProcess, StateUtility, UtilityByState,
    UtilityFn,
};

pub(crate) fn iso(scale: f64, eta: f64) -> StateUtility {
    UtilityFn::new(scale, eta).unwrap().into()
}

fn single(shocks: ShockProcess) -> EconomyConfig {
    EconomyConfig {
        r: 0.05,
        gamma: 0.0,
        agent_types: vec![AgentTypeSpec {
            mass: 1.0,
            utility_by_state: UtilityByState { low: StateUtility::Zero, high: iso(0.5, 0.5) },
        }],
        cost: CostFn::new(1.0, 1.0).unwrap(),
        shocks,
    }
}

pub(crate) fn deterministic() -> EconomyConfig {
    single(ShockProcess::deterministic())
}

pub(crate) fn iid() -> EconomyConfig {
    single(ShockProcess { kind: ShockKind::IidBinary, rho: 0.5 })
}

pub(crate) fn common() -> EconomyConfig {
    single(ShockProcess { kind: ShockKind::CommonBinary, rho: 0.5 })
}

pub(crate) fn heterogeneous() -> EconomyConfig {
    EconomyConfig {
        r: 0.05,
        gamma: 0.0,
        agent_types: vec![
            AgentTypeSpec {
                mass: 0.5,
                utility_by_state: UtilityByState { low: iso(0.5, 0.5), high: iso(2.0, 0.5) },
            },
            AgentTypeSpec {
                mass: 0.5,
                utility_by_state: UtilityByState { low: iso(0.5, 0.5), high: iso(0.5, 0.5) },
            },
        ],
        cost: CostFn::new(1.0, 1.0).unwrap(),
        shocks: ShockProcess { kind: ShockKind::CommonBinary, rho: 0.5 },
    }
}
