//! Model primitives: utility and cost families, agent types, the shock
//! process and the economy configuration.
//!
//! Utilities are isoelastic, `u(a) = A a^(1-eta) / (1-eta)` with
//! `0 < eta < 1`, and validation cost is a power function,
//! `c(s) = kappa s^(1+eps) / (1+eps)`. Both have closed-form marginals and
//! inverse marginals, which is what every solver works with. All quantities
//! are detrended: technology growth only enters through `r` and `gamma`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::first_best;

/// Blockspace available per period. Activities are fractions of it.
pub const BLOCKSPACE_CAPACITY: f64 = 1.0;

const MASS_TOLERANCE: f64 = 1e-12;

/// Isoelastic utility `u(a) = scale * a^(1-curvature) / (1-curvature)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityFn {
    pub scale: f64,
    pub curvature: f64,
}

impl UtilityFn {
    pub fn new(scale: f64, curvature: f64) -> Result<Self> {
        let f = Self { scale, curvature };
        f.check()?;
        Ok(f)
    }

    fn check(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::Config(format!(
                "utility scale must be positive, got {}",
                self.scale
            )));
        }
        if !(self.curvature > 0.0 && self.curvature < 1.0) {
            return Err(Error::Config(format!(
                "utility curvature must lie in (0, 1), got {}",
                self.curvature
            )));
        }
        Ok(())
    }

    pub fn value(&self, a: f64) -> f64 {
        let e = 1.0 - self.curvature;
        self.scale * a.powf(e) / e
    }

    /// `u'(a) = scale * a^(-curvature)`; infinite at zero.
    pub fn marginal(&self, a: f64) -> f64 {
        self.scale * a.powf(-self.curvature)
    }

    /// Activity at which the marginal utility equals `x`.
    pub fn marginal_inv(&self, x: f64) -> f64 {
        (self.scale / x).powf(1.0 / self.curvature)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            scale: self.scale * factor,
            ..*self
        }
    }
}

/// Utility of one agent type in one shock state. `Zero` means no demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StateUtility {
    #[default]
    Zero,
    Isoelastic(UtilityFn),
}

impl StateUtility {
    pub fn is_zero(&self) -> bool {
        matches!(self, StateUtility::Zero)
    }

    pub fn as_fn(&self) -> Option<&UtilityFn> {
        match self {
            StateUtility::Zero => None,
            StateUtility::Isoelastic(f) => Some(f),
        }
    }

    pub fn value(&self, a: f64) -> f64 {
        self.as_fn().map_or(0.0, |f| f.value(a))
    }

    pub fn marginal(&self, a: f64) -> f64 {
        self.as_fn().map_or(0.0, |f| f.marginal(a))
    }

    /// Zero utility demands nothing at any price.
    pub fn marginal_inv(&self, x: f64) -> f64 {
        self.as_fn().map_or(0.0, |f| f.marginal_inv(x))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            StateUtility::Zero => StateUtility::Zero,
            StateUtility::Isoelastic(f) => StateUtility::Isoelastic(f.scaled(factor)),
        }
    }
}

impl From<UtilityFn> for StateUtility {
    fn from(f: UtilityFn) -> Self {
        StateUtility::Isoelastic(f)
    }
}

/// Validation cost `c(s) = scale * s^(1+curvature) / (1+curvature)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostFn {
    pub scale: f64,
    pub curvature: f64,
}

impl CostFn {
    pub fn new(scale: f64, curvature: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Config(format!(
                "cost scale must be positive, got {scale}"
            )));
        }
        if !(curvature.is_finite() && curvature > 0.0) {
            return Err(Error::Config(format!(
                "cost curvature must be positive, got {curvature}"
            )));
        }
        Ok(Self { scale, curvature })
    }

    pub fn value(&self, s: f64) -> f64 {
        let e = 1.0 + self.curvature;
        self.scale * s.powf(e) / e
    }

    pub fn marginal(&self, s: f64) -> f64 {
        self.scale * s.powf(self.curvature)
    }

    pub fn marginal_inv(&self, p: f64) -> f64 {
        (p / self.scale).powf(1.0 / self.curvature)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockState {
    Low,
    High,
}

impl ShockState {
    pub const ALL: [ShockState; 2] = [ShockState::Low, ShockState::High];

    pub fn label(self) -> &'static str {
        match self {
            ShockState::Low => "low",
            ShockState::High => "high",
        }
    }
}

impl fmt::Display for ShockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityByState {
    #[serde(default)]
    pub low: StateUtility,
    pub high: StateUtility,
}

impl UtilityByState {
    pub fn get(&self, state: ShockState) -> &StateUtility {
        match state {
            ShockState::Low => &self.low,
            ShockState::High => &self.high,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentTypeSpec {
    /// Population share of this type.
    pub mass: f64,
    pub utility_by_state: UtilityByState,
}

impl AgentTypeSpec {
    pub fn utility(&self, state: ShockState) -> &StateUtility {
        self.utility_by_state.get(state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockKind {
    /// No shocks; only the `high` utilities are used.
    Deterministic,
    /// Each user draws an independent binary shock.
    IidBinary,
    /// All users share one binary shock.
    CommonBinary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockProcess {
    pub kind: ShockKind,
    /// Probability of the high state. Ignored for deterministic demand.
    #[serde(default = "default_rho")]
    pub rho: f64,
}

fn default_rho() -> f64 {
    1.0
}

impl ShockProcess {
    pub fn deterministic() -> Self {
        Self {
            kind: ShockKind::Deterministic,
            rho: 1.0,
        }
    }

    pub fn probability(&self, state: ShockState) -> f64 {
        let rho = match self.kind {
            ShockKind::Deterministic => 1.0,
            _ => self.rho,
        };
        match state {
            ShockState::High => rho,
            ShockState::Low => 1.0 - rho,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomyConfig {
    /// Risk-free rate per period.
    pub r: f64,
    /// Technology growth rate per period.
    pub gamma: f64,
    pub agent_types: Vec<AgentTypeSpec>,
    pub cost: CostFn,
    pub shocks: ShockProcess,
}

impl EconomyConfig {
    pub fn beta(&self) -> f64 {
        1.0 / (1.0 + self.r)
    }

    pub fn probability(&self, state: ShockState) -> f64 {
        self.shocks.probability(state)
    }

    /// States with positive probability.
    pub fn support(&self) -> Vec<ShockState> {
        ShockState::ALL
            .into_iter()
            .filter(|&s| self.probability(s) > 0.0)
            .collect()
    }

    /// Mass and utility of every type in one state.
    pub fn members(&self, state: ShockState) -> Vec<first_best::Member> {
        self.agent_types
            .iter()
            .map(|t| first_best::Member {
                mass: t.mass,
                utility: *t.utility(state),
            })
            .collect()
    }

    /// Hard errors only. Solvers call this instead of [`validate_config`]
    /// so that limiting cases such as `r = 0` remain solvable.
    pub fn check_structure(&self) -> Result<()> {
        let errors: Vec<_> = validate_structure(self)
            .into_iter()
            .filter(|v| v.severity == Severity::Error)
            .collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errors))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
    pub severity: Severity,
}

impl Violation {
    fn error(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
            severity: Severity::Error,
        }
    }

    fn warning(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
            severity: Severity::Warning,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag} [{}]: {}", self.field, self.message)
    }
}

/// Checks every configuration invariant. An empty list means the
/// configuration is valid without reservations; warnings are included.
pub fn validate_config(cfg: &EconomyConfig) -> Vec<Violation> {
    let mut out = validate_structure(cfg);

    if cfg.r.is_finite() && cfg.r > -1.0 && cfg.r <= 0.0 {
        out.push(Violation::error(
            "r",
            format!("r = {} but discounting requires r > 0", cfg.r),
        ));
    }
    if cfg.r < cfg.gamma {
        out.push(Violation::warning(
            "gamma",
            "r < γ: deflationary policies inapplicable",
        ));
    }

    let structural_ok = out.iter().all(|v| v.severity != Severity::Error);
    if structural_ok && cfg.shocks.kind == ShockKind::CommonBinary && cfg.agent_types.len() > 1 {
        if let Some(v) = non_degeneracy(cfg) {
            out.push(v);
        }
    }
    out
}

fn validate_structure(cfg: &EconomyConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(cfg.r.is_finite() && cfg.r > -1.0) {
        out.push(Violation::error("r", format!("r = {} must exceed -1", cfg.r)));
    }
    if !(cfg.gamma.is_finite() && cfg.gamma > -1.0) {
        out.push(Violation::error(
            "gamma",
            format!("gamma = {} must exceed -1", cfg.gamma),
        ));
    }
    if cfg.agent_types.is_empty() {
        out.push(Violation::error("agent_types", "at least one agent type required"));
    }
    let mut total = 0.0;
    let mut any_demand = false;
    for (k, t) in cfg.agent_types.iter().enumerate() {
        if !(t.mass > 0.0 && t.mass <= 1.0) {
            out.push(Violation::error(
                format!("agent_types[{k}].mass"),
                format!("mass {} outside (0, 1]", t.mass),
            ));
        }
        total += t.mass;
        for state in ShockState::ALL {
            if let Some(f) = t.utility(state).as_fn() {
                if let Err(e) = f.check() {
                    out.push(Violation::error(
                        format!("agent_types[{k}].utility_by_state.{state}"),
                        strip_prefix(e),
                    ));
                }
                if cfg.probability(state) > 0.0 {
                    any_demand = true;
                }
            }
        }
    }
    if !cfg.agent_types.is_empty() && (total - 1.0).abs() > MASS_TOLERANCE {
        out.push(Violation::error(
            "agent_types",
            format!("masses sum to {total}"),
        ));
    }
    if !cfg.agent_types.is_empty() && !any_demand {
        out.push(Violation::error(
            "agent_types",
            "every type has zero utility in every state that can occur",
        ));
    }
    if let Err(e) = CostFn::new(cfg.cost.scale, cfg.cost.curvature) {
        out.push(Violation::error("cost", strip_prefix(e)));
    }
    if cfg.shocks.kind != ShockKind::Deterministic && !(cfg.shocks.rho > 0.0 && cfg.shocks.rho <= 1.0)
    {
        out.push(Violation::error(
            "shocks.rho",
            format!("rho = {} outside (0, 1]", cfg.shocks.rho),
        ));
    }
    out
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::Config(msg) => msg,
        other => other.to_string(),
    }
}

/// Under common shocks with several types the first-best allocations of the
/// two states must differ.
fn non_degeneracy(cfg: &EconomyConfig) -> Option<Violation> {
    let low = first_best::first_best_allocation(cfg, ShockState::Low);
    let high = first_best::first_best_allocation(cfg, ShockState::High);
    match (low, high) {
        (Ok(low), Ok(high)) => {
            let gap = low
                .activities
                .iter()
                .zip(&high.activities)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            (gap <= 1e-9).then(|| {
                Violation::error(
                    "shocks",
                    "non-degeneracy: first-best allocations coincide across states",
                )
            })
        }
        (Err(e), _) | (_, Err(e)) => Some(Violation::error(
            "shocks",
            format!("non-degeneracy check failed: {e}"),
        )),
    }
}

// Checked entry points on the model functions.

pub fn u_eval(f: &UtilityFn, a: f64) -> Result<f64> {
    if !(a >= 0.0) {
        return Err(Error::domain("u_eval", format!("activity {a} is negative")));
    }
    Ok(f.value(a))
}

pub fn u_prime(f: &UtilityFn, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::domain(
            "u_prime",
            format!("marginal utility diverges at a = {a}; use u_prime_inv"),
        ));
    }
    Ok(f.marginal(a))
}

pub fn u_prime_inv(f: &UtilityFn, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(
            "u_prime_inv",
            format!("marginal utility {x} is not positive"),
        ));
    }
    Ok(f.marginal_inv(x))
}

pub fn c_eval(f: &CostFn, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::domain("c_eval", format!("activity {s} is negative")));
    }
    Ok(f.value(s))
}

pub fn c_prime(f: &CostFn, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::domain("c_prime", format!("activity {s} is negative")));
    }
    Ok(f.marginal(s))
}

pub fn c_prime_inv(f: &CostFn, p: f64) -> Result<f64> {
    if !(p >= 0.0) {
        return Err(Error::domain("c_prime_inv", format!("price {p} is negative")));
    }
    Ok(f.marginal_inv(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uf(scale: f64, curvature: f64) -> UtilityFn {
        UtilityFn::new(scale, curvature).unwrap()
    }

    fn cf(scale: f64, curvature: f64) -> CostFn {
        CostFn::new(scale, curvature).unwrap()
    }

    /// Integral of u' over [0, a] by Simpson's rule after substituting
    /// x = t^k with k = 2 / (1 - curvature), which makes the integrand
    /// vanish smoothly at zero instead of diverging.
    fn integrate_marginal(f: &UtilityFn, a: f64) -> f64 {
        let n = 20_000;
        let k = 2.0 / (1.0 - f.curvature);
        let upper = a.powf(1.0 / k);
        let h = upper / n as f64;
        let g = |t: f64| if t == 0.0 { 0.0 } else { k * t.powf(k - 1.0) * f.marginal(t.powf(k)) };
        let mut sum = g(0.0) + g(upper);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * g(i as f64 * h);
        }
        sum * h / 3.0
    }

    fn integrate_cost_marginal(f: &CostFn, s: f64) -> f64 {
        let n = 20_000;
        let h = s / n as f64;
        let mut sum = f.marginal(0.0) + f.marginal(s);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * f.marginal(i as f64 * h);
        }
        sum * h / 3.0
    }

    #[test]
    fn u_eval_examples() {
        assert_eq!(u_eval(&uf(1.0, 0.5), 0.0).unwrap(), 0.0);

        let f = uf(1.0, 0.5);
        let oracle = integrate_marginal(&f, 1.0);
        assert!((oracle - 2.0).abs() < 1e-9);
        assert!((u_eval(&f, 1.0).unwrap() - oracle).abs() < 1e-9);

        // 2 * 4^0.5 / 0.5 = 8
        let g = uf(2.0, 0.5);
        let oracle = integrate_marginal(&g, 4.0);
        assert!((oracle - 8.0).abs() < 1e-9);
        assert!((u_eval(&g, 4.0).unwrap() - oracle).abs() < 1e-9);

        let h = uf(1.3, 0.25);
        assert!((u_eval(&h, 2.7).unwrap() - integrate_marginal(&h, 2.7)).abs() < 1e-8);

        assert!(matches!(u_eval(&f, -1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn u_prime_examples() {
        assert_eq!(u_prime(&uf(1.0, 0.5), 1.0).unwrap(), 1.0);
        let cases = [(2.0, 0.5, 4.0, 1.0), (1.0, 0.25, 16.0, 0.5)];
        for (scale, eta, a, expected) in cases {
            let f = uf(scale, eta);
            let h = 1e-6;
            let fd = (f.value(a + h) - f.value(a - h)) / (2.0 * h);
            assert!((fd - expected).abs() < 1e-6, "fd {fd} vs {expected}");
            assert!((u_prime(&f, a).unwrap() - expected).abs() < 1e-15);
        }
        assert!(u_prime(&uf(1.0, 0.5), 0.0).is_err());
        assert!(u_prime(&uf(1.0, 0.5), -2.0).is_err());
    }

    #[test]
    fn u_prime_inv_examples() {
        let cases = [(1.0, 0.5, 1.0, 1.0), (2.0, 0.5, 1.0, 4.0), (1.0, 0.5, 2.0, 0.25)];
        for (scale, eta, x, expected) in cases {
            let f = uf(scale, eta);
            let a = u_prime_inv(&f, x).unwrap();
            assert!((a - expected).abs() < 1e-15);
            assert!((f.marginal(a) - x).abs() <= 1e-12 * x);
        }
        assert!(u_prime_inv(&uf(1.0, 0.5), 0.0).is_err());
    }

    #[test]
    fn cost_examples() {
        let c = cf(1.0, 1.0);
        let fd = (c.value(0.5 + 1e-6) - c.value(0.5 - 1e-6)) / 2e-6;
        assert!((fd - 0.5).abs() < 1e-8);
        assert!((c_prime(&c, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(c_prime_inv(&c, 1.0).unwrap(), 1.0);
        let oracle = integrate_cost_marginal(&c, 1.0);
        assert!((oracle - 0.5).abs() < 1e-12);
        assert!((c_eval(&c, 1.0).unwrap() - oracle).abs() < 1e-12);

        let c2 = cf(0.7, 2.5);
        assert!((c_eval(&c2, 1.3).unwrap() - integrate_cost_marginal(&c2, 1.3)).abs() < 1e-10);

        assert!(c_prime(&c, -0.1).is_err());
        assert!(c_prime_inv(&c, -0.1).is_err());
        assert!(c_eval(&c, -0.1).is_err());
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(UtilityFn::new(0.0, 0.5).is_err());
        assert!(UtilityFn::new(1.0, 1.0).is_err());
        assert!(UtilityFn::new(1.0, 0.0).is_err());
        assert!(CostFn::new(1.0, 0.0).is_err());
        assert!(CostFn::new(-1.0, 1.0).is_err());
    }

    fn single_type(r: f64, gamma: f64) -> EconomyConfig {
        EconomyConfig {
            r,
            gamma,
            agent_types: vec![AgentTypeSpec {
                mass: 1.0,
                utility_by_state: UtilityByState {
                    low: StateUtility::Zero,
                    high: uf(0.5, 0.5).into(),
                },
            }],
            cost: cf(1.0, 1.0),
            shocks: ShockProcess::deterministic(),
        }
    }

    #[test]
    fn validate_config_examples() {
        assert!(validate_config(&single_type(0.05, 0.02)).is_empty());

        let mut cfg = single_type(0.05, 0.02);
        cfg.agent_types = vec![
            AgentTypeSpec { mass: 0.6, ..cfg.agent_types[0] },
            AgentTypeSpec { mass: 0.5, ..cfg.agent_types[0] },
        ];
        let v = validate_config(&cfg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "agent_types");
        assert_eq!(v[0].message, "masses sum to 1.1");

        let v = validate_config(&single_type(0.02, 0.05));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].severity, Severity::Warning);
        assert_eq!(v[0].message, "r < γ: deflationary policies inapplicable");
    }

    #[test]
    fn validate_config_rejects_nonpositive_rate_and_empty_demand() {
        let v = validate_config(&single_type(0.0, 0.0));
        assert!(v.iter().any(|x| x.field == "r" && x.severity == Severity::Error));
        // Structural check used by solvers still accepts r = 0.
        assert!(single_type(0.0, 0.0).check_structure().is_ok());

        let mut cfg = single_type(0.05, 0.0);
        cfg.agent_types[0].utility_by_state.high = StateUtility::Zero;
        assert!(validate_config(&cfg)
            .iter()
            .any(|x| x.message.contains("zero utility")));

        let mut cfg = single_type(0.05, 0.0);
        cfg.shocks = ShockProcess { kind: ShockKind::IidBinary, rho: 0.0 };
        assert!(validate_config(&cfg).iter().any(|x| x.field == "shocks.rho"));
    }

    #[test]
    fn validate_config_non_degeneracy() {
        let u = uf(0.5, 0.5);
        let mut cfg = single_type(0.05, 0.0);
        cfg.shocks = ShockProcess { kind: ShockKind::CommonBinary, rho: 0.5 };
        cfg.agent_types = vec![
            AgentTypeSpec {
                mass: 0.5,
                utility_by_state: UtilityByState { low: u.into(), high: u.into() },
            },
            AgentTypeSpec {
                mass: 0.5,
                utility_by_state: UtilityByState { low: u.into(), high: u.into() },
            },
        ];
        let v = validate_config(&cfg);
        assert!(v.iter().any(|x| x.message.contains("non-degeneracy")), "{v:?}");

        cfg.agent_types[0].utility_by_state.high = uf(2.0, 0.5).into();
        assert!(validate_config(&cfg).is_empty());
    }

    proptest! {
        #[test]
        fn marginal_matches_finite_difference(
            scale in 0.1f64..5.0,
            eta in 0.05f64..0.95,
            a in 0.01f64..20.0,
        ) {
            let f = uf(scale, eta);
            let h = 1e-6;
            let fd = (f.value(a + h) - f.value(a - h)) / (2.0 * h);
            let exact = f.marginal(a);
            prop_assert!((fd - exact).abs() <= 1e-5 * (1.0 + exact));
            prop_assert!(f.marginal(a) > f.marginal(a * 1.01));
        }

        #[test]
        fn inverse_marginal_round_trips(
            scale in 0.1f64..5.0,
            eta in 0.05f64..0.95,
            log_a in -3.0f64..3.0,
        ) {
            let f = uf(scale, eta);
            let a = 10f64.powf(log_a);
            let back = f.marginal_inv(f.marginal(a));
            prop_assert!((back - a).abs() <= 1e-10 * a);
        }

        #[test]
        fn cost_marginal_increasing_and_invertible(
            scale in 0.1f64..5.0,
            eps in 0.1f64..4.0,
            s in 0.01f64..5.0,
        ) {
            let c = cf(scale, eps);
            prop_assert!(c.marginal(s * 1.01) > c.marginal(s));
            let back = c.marginal_inv(c.marginal(s));
            prop_assert!((back - s).abs() <= 1e-12 * s.max(1.0));
        }
    }
}
