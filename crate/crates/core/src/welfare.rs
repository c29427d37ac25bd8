//! Welfare evaluation, tax sweeps and the proposition battery.
//!
//! Welfare is expected flow surplus: utility from blockspace minus
//! validation cost, averaged over shock states. Fees, burned tokens and
//! carry costs are transfers under quasi-linear preferences and only matter
//! through the allocations they induce.

use std::io::Write;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::econ::{validate_config, EconomyConfig, Severity, ShockKind, ShockState};
use crate::equilibrium::{
    check_foc_finite_difference, shock_foc_residual, solve, Regime, SteadyStateEquilibrium,
};
use crate::error::{Error, Result};
use crate::first_best::{first_best_for, surplus_for};
use crate::oracle::{best_response_states, grid_best_response, grid_first_best, GridSpec, InnerMode};
use crate::output::format_float;
use crate::policy::steady_state_burn_residual;

/// Welfare values closer than this are ties when picking the best tax.
pub const ARGMAX_TOLERANCE: f64 = 1e-10;
pub const ORACLE_POINTS: usize = 2001;
const FOC_TOLERANCE: f64 = 1e-6;
const FD_TOLERANCE: f64 = 1e-5;
const BURN_TOLERANCE: f64 = 1e-8;
const NEUTRALITY_TOLERANCE: f64 = 1e-8;
const RETURN_FORMULA_TOLERANCE: f64 = 1e-10;
const IMPROVEMENT_MARGIN: f64 = 1e-6;
const DOMINANCE_SLACK: f64 = 1e-10;
const FIRST_BEST_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSurplus {
    pub market: String,
    pub probability: f64,
    pub surplus: f64,
    pub first_best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareReport {
    pub regime: Regime,
    pub theta: f64,
    pub expected_flow_welfare: f64,
    pub per_state: Vec<MarketSurplus>,
    pub first_best_welfare: f64,
    /// First-best expected surplus minus the achieved one.
    pub first_best_gap: f64,
    pub foc_residual_max: f64,
    /// Largest distance between solver and grid-oracle holdings; absent for
    /// formal steady states, where the holding problem is unbounded.
    pub oracle_delta_max: Option<f64>,
    pub congestion_broken: bool,
    pub return_exceeds_risk_free: bool,
}

pub fn evaluate(cfg: &EconomyConfig, eq: &SteadyStateEquilibrium) -> Result<WelfareReport> {
    let mut per_state = Vec::new();
    let (mut expected, mut first_best) = (0.0, 0.0);
    for market in eq.markets(cfg) {
        let surplus = surplus_for(&market.members, &cfg.cost, &market.activities);
        let fb = first_best_for(&market.members, &cfg.cost)?;
        let fb_surplus = surplus_for(&market.members, &cfg.cost, &fb.activities);
        expected += market.probability * surplus;
        first_best += market.probability * fb_surplus;
        per_state.push(MarketSurplus {
            market: market.label,
            probability: market.probability,
            surplus,
            first_best: fb_surplus,
        });
    }
    let foc_residual_max = shock_foc_residual(cfg, eq)
        .iter()
        .map(|r| r.residual.abs())
        .fold(0.0, f64::max);
    let oracle_delta_max = if eq.is_converged() {
        match holdings_oracle_gap(cfg, eq, InnerMode::ClosedForm) {
            Ok(gaps) => Some(gaps.iter().map(|g| g.delta).fold(0.0, f64::max)),
            Err(e) => {
                warn!("holdings oracle failed at theta = {}: {e}", eq.theta);
                None
            }
        }
    } else {
        None
    };
    Ok(WelfareReport {
        regime: eq.regime,
        theta: eq.theta,
        expected_flow_welfare: expected,
        per_state,
        first_best_welfare: first_best,
        first_best_gap: first_best - expected,
        foc_residual_max,
        oracle_delta_max,
        congestion_broken: eq.congestion_broken,
        return_exceeds_risk_free: eq.return_exceeds_risk_free,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleGap {
    pub agent_type: usize,
    pub delta: f64,
    pub step: f64,
}

/// Grid-search holdings for every type against the solver's holdings.
pub fn holdings_oracle_gap(
    cfg: &EconomyConfig,
    eq: &SteadyStateEquilibrium,
    inner: InnerMode,
) -> Result<Vec<OracleGap>> {
    (0..cfg.agent_types.len())
        .map(|k| {
            let m = eq.holdings[k];
            let a_max = eq.states.iter().map(|o| o.activities[k]).fold(0.0, f64::max);
            let m_grid = GridSpec::new(if m > 0.0 { 2.0 * m } else { 1.0 }, ORACLE_POINTS);
            let a_grid = GridSpec::new(if a_max > 0.0 { 2.0 * a_max } else { 1.0 }, ORACLE_POINTS);
            let br = grid_best_response(&best_response_states(cfg, eq, k), cfg.r, m_grid, a_grid, inner)?;
            Ok(OracleGap {
                agent_type: k,
                delta: (br.holdings - m).abs(),
                step: br.step,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    CongestionBroken,
    ReturnExceedsRiskFree,
    Failed,
}

impl PointStatus {
    pub fn label(self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::CongestionBroken => "congestion_broken",
            PointStatus::ReturnExceedsRiskFree => "return_exceeds_risk_free",
            PointStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub theta: f64,
    pub status: PointStatus,
    pub welfare: Option<f64>,
    pub congested: Option<bool>,
    pub high_return: Option<f64>,
    pub expected_return: Option<f64>,
    pub per_state: Vec<MarketSurplus>,
    pub error: Option<String>,
    #[serde(skip)]
    pub equilibrium: Option<SteadyStateEquilibrium>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub regime: Regime,
    pub grid: Vec<f64>,
    pub points: Vec<SweepPoint>,
    /// Smallest tax within [`ARGMAX_TOLERANCE`] of the best welfare among
    /// points with status `ok`.
    pub argmax_theta: Option<f64>,
}

impl SweepResult {
    pub fn welfare(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.welfare).collect()
    }

    pub fn congestion_flags(&self) -> Vec<Option<bool>> {
        self.points.iter().map(|p| p.congested).collect()
    }

    pub fn all_failed(&self) -> bool {
        self.points.iter().all(|p| p.status == PointStatus::Failed)
    }

    fn market_labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = Vec::new();
        for p in &self.points {
            for s in &p.per_state {
                if !labels.contains(&s.market) {
                    labels.push(s.market.clone());
                }
            }
        }
        labels
    }

    /// Columns: theta, status, welfare, congested, rT_high, rT_expected, then
    /// one surplus column per market. Missing values are empty cells.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let labels = self.market_labels();
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = ["theta", "status", "welfare", "congested", "rT_high", "rT_expected"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(labels.iter().map(|l| format!("surplus_{l}")));
        w.write_record(&header)?;
        let opt = |x: Option<f64>| x.map(format_float).unwrap_or_default();
        for p in &self.points {
            let mut row = vec![
                format_float(p.theta),
                p.status.label().to_string(),
                opt(p.welfare),
                p.congested.map(|c| c.to_string()).unwrap_or_default(),
                opt(p.high_return),
                opt(p.expected_return),
            ];
            for l in &labels {
                row.push(opt(p.per_state.iter().find(|s| &s.market == l).map(|s| s.surplus)));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `points` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        n => (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

fn sweep_point(cfg: &EconomyConfig, regime: Regime, theta: f64) -> SweepPoint {
    let solved = solve(cfg, regime, theta).and_then(|eq| evaluate(cfg, &eq).map(|rep| (eq, rep)));
    match solved {
        Ok((eq, rep)) => {
            let status = if eq.congestion_broken {
                PointStatus::CongestionBroken
            } else if eq.return_exceeds_risk_free {
                PointStatus::ReturnExceedsRiskFree
            } else {
                PointStatus::Ok
            };
            SweepPoint {
                theta,
                status,
                welfare: Some(rep.expected_flow_welfare),
                congested: Some(eq.any_congested()),
                high_return: eq.state(ShockState::High).map(|s| s.token_return),
                expected_return: Some(eq.expected_return),
                per_state: rep.per_state,
                error: None,
                equilibrium: Some(eq),
            }
        }
        Err(e) => {
            debug!("{} sweep point theta = {theta} failed: {e}", regime.name());
            SweepPoint {
                theta,
                status: PointStatus::Failed,
                welfare: None,
                congested: None,
                high_return: None,
                expected_return: None,
                per_state: Vec::new(),
                error: Some(e.to_string()),
                equilibrium: None,
            }
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("tax grid is empty".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("tax grid must be strictly increasing".into()));
    }
    Ok(())
}

fn assemble(regime: Regime, grid: &[f64], points: Vec<SweepPoint>) -> SweepResult {
    let best = points
        .iter()
        .filter(|p| p.status == PointStatus::Ok)
        .filter_map(|p| p.welfare)
        .fold(f64::NEG_INFINITY, f64::max);
    let argmax_theta = points
        .iter()
        .filter(|p| p.status == PointStatus::Ok)
        .find(|p| p.welfare.is_some_and(|w| w >= best - ARGMAX_TOLERANCE))
        .map(|p| p.theta);
    SweepResult {
        regime,
        grid: grid.to_vec(),
        points,
        argmax_theta,
    }
}

/// Solves and evaluates every grid point. Point failures are recorded, not
/// propagated.
pub fn sweep_tax(cfg: &EconomyConfig, regime: Regime, grid: &[f64]) -> Result<SweepResult> {
    check_grid(grid)?;
    let points = grid.iter().map(|&t| sweep_point(cfg, regime, t)).collect();
    Ok(assemble(regime, grid, points))
}

/// [`sweep_tax`] on a pool of `jobs` threads; the result does not depend on
/// `jobs`.
pub fn sweep_tax_parallel(
    cfg: &EconomyConfig,
    regime: Regime,
    grid: &[f64],
    jobs: usize,
) -> Result<SweepResult> {
    if jobs <= 1 {
        return sweep_tax(cfg, regime, grid);
    }
    check_grid(grid)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    let points = pool.install(|| grid.par_iter().map(|&t| sweep_point(cfg, regime, t)).collect());
    Ok(assemble(regime, grid, points))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    /// Margin by which the check passes; negative when it fails.
    pub slack: Option<f64>,
    pub detail: String,
}

impl Check {
    pub fn measured(name: &str, slack: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: if slack >= 0.0 { CheckStatus::Pass } else { CheckStatus::Fail },
            slack: Some(slack),
            detail: detail.into(),
        }
    }

    pub fn failed(name: &str, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: CheckStatus::Fail,
            slack: None,
            detail: detail.into(),
        }
    }

    pub fn not_applicable(name: &str, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: CheckStatus::NotApplicable,
            slack: None,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropositionReport {
    pub checks: Vec<Check>,
}

impl PropositionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }
}

/// Tax grid each regime's checks run on.
pub fn default_grid(regime: Regime) -> Vec<f64> {
    match regime {
        Regime::Friedman => vec![0.0],
        Regime::Deterministic | Regime::Common => linspace(0.0, 0.5, 11),
        Regime::Iid => linspace(0.0, 0.3, 31),
        Regime::Heterogeneous => linspace(0.0, 0.5, 21),
    }
}

/// Runs every check that applies to `cfg`.
pub fn proposition_report(cfg: &EconomyConfig) -> PropositionReport {
    let violations: Vec<_> = validate_config(cfg)
        .into_iter()
        .filter(|v| v.severity == Severity::Error)
        .collect();
    if !violations.is_empty() {
        let detail = violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
        return PropositionReport {
            checks: vec![Check::failed("configuration", detail)],
        };
    }
    let deflation = cfg.r > cfg.gamma;
    let mut checks = Vec::new();
    match cfg.shocks.kind {
        ShockKind::Deterministic => deterministic_checks(cfg, deflation, &mut checks),
        ShockKind::IidBinary => iid_checks(cfg, deflation, &mut checks),
        ShockKind::CommonBinary if cfg.agent_types.len() == 1 => common_checks(cfg, &mut checks),
        ShockKind::CommonBinary => heterogeneous_checks(cfg, &mut checks),
    }
    PropositionReport { checks }
}

fn sweep_or_fail(cfg: &EconomyConfig, regime: Regime, name: &str, checks: &mut Vec<Check>) -> Option<SweepResult> {
    match sweep_tax(cfg, regime, &default_grid(regime)) {
        Ok(s) => Some(s),
        Err(e) => {
            checks.push(Check::failed(name, e.to_string()));
            None
        }
    }
}

fn equilibria(sweep: &SweepResult) -> impl Iterator<Item = &SteadyStateEquilibrium> {
    sweep.points.iter().filter_map(|p| p.equilibrium.as_ref())
}

fn failed_points(sweep: &SweepResult) -> Option<String> {
    let failed: Vec<String> = sweep
        .points
        .iter()
        .filter(|p| p.status == PointStatus::Failed)
        .map(|p| format!("theta = {}: {}", p.theta, p.error.as_deref().unwrap_or("")))
        .collect();
    (!failed.is_empty()).then(|| failed.join("; "))
}

fn deterministic_checks(cfg: &EconomyConfig, deflation: bool, checks: &mut Vec<Check>) {
    let friedman = match solve(cfg, Regime::Friedman, 0.0).and_then(|eq| evaluate(cfg, &eq).map(|r| (eq, r))) {
        Ok(x) => x,
        Err(e) => {
            checks.push(Check::failed("friedman_first_best", e.to_string()));
            return;
        }
    };
    checks.push(Check::measured(
        "friedman_first_best",
        FIRST_BEST_TOLERANCE - friedman.1.first_best_gap.abs(),
        format!("first-best gap {:e}", friedman.1.first_best_gap),
    ));

    let Some(sweep) = sweep_or_fail(cfg, Regime::Deterministic, "deterministic_sweep", checks) else {
        return;
    };
    if let Some(detail) = failed_points(&sweep) {
        checks.push(Check::failed("deterministic_sweep", detail));
    }

    if deflation {
        let worst = sweep
            .points
            .iter()
            .filter_map(|p| p.welfare)
            .map(|w| friedman.1.expected_flow_welfare - w)
            .fold(f64::INFINITY, f64::min);
        checks.push(Check::measured(
            "friedman_dominates_burning",
            worst + DOMINANCE_SLACK,
            format!("smallest welfare lead of the Friedman rule {worst:e}"),
        ));

        let eqs: Vec<_> = equilibria(&sweep).collect();
        let spread = activity_spread(eqs.iter().map(|eq| &eq.state(ShockState::High).unwrap().activities));
        let return_error = eqs
            .iter()
            .map(|eq| (eq.expected_return - ((1.0 + eq.theta) * (1.0 + cfg.gamma) - 1.0)).abs())
            .fold(0.0, f64::max);
        checks.push(Check::measured(
            "deterministic_neutrality",
            (NEUTRALITY_TOLERANCE - spread).min(RETURN_FORMULA_TOLERANCE - return_error),
            format!("activity spread {spread:e}, return formula error {return_error:e}"),
        ));
    } else {
        checks.push(Check::not_applicable("friedman_dominates_burning", "r <= gamma: burning cannot deflate"));
        checks.push(Check::not_applicable("deterministic_neutrality", "r <= gamma: burning cannot deflate"));
    }
    let mut all = vec![friedman.0];
    all.extend(equilibria(&sweep).cloned());
    common_equilibrium_checks(cfg, &all, checks);
}

fn iid_checks(cfg: &EconomyConfig, deflation: bool, checks: &mut Vec<Check>) {
    let Some(sweep) = sweep_or_fail(cfg, Regime::Iid, "iid_sweep", checks) else {
        return;
    };
    if let Some(detail) = failed_points(&sweep) {
        checks.push(Check::failed("iid_sweep", detail));
    }
    let rho = cfg.shocks.rho;
    let eqs: Vec<_> = equilibria(&sweep).cloned().collect();
    let return_error = eqs
        .iter()
        .map(|eq| {
            let target = (1.0 + cfg.gamma) * (1.0 + eq.theta) / (1.0 + (1.0 - rho) * eq.theta);
            ((1.0 + eq.expected_return) - target).abs()
        })
        .fold(0.0, f64::max);
    checks.push(Check::measured(
        "iid_return_formula",
        RETURN_FORMULA_TOLERANCE - return_error,
        format!("largest deviation {return_error:e}"),
    ));

    let base_congested = sweep.points.first().and_then(|p| p.congested).unwrap_or(false);
    if !deflation {
        checks.push(Check::not_applicable("iid_burning_never_helps", "r <= gamma: burning cannot deflate"));
    } else if base_congested {
        checks.push(Check::not_applicable("iid_burning_never_helps", "congested at theta = 0"));
    } else {
        let base = sweep.points[0].welfare.unwrap_or(f64::NAN);
        let best_taxed = sweep
            .points
            .iter()
            .skip(1)
            .filter(|p| p.status == PointStatus::Ok)
            .filter_map(|p| p.welfare)
            .fold(f64::NEG_INFINITY, f64::max);
        let at_zero = sweep.argmax_theta == Some(0.0);
        let lead = base - best_taxed;
        checks.push(Check::measured(
            "iid_burning_never_helps",
            if at_zero { lead } else { lead.min(-f64::MIN_POSITIVE) },
            format!("argmax theta {:?}, welfare lead of theta = 0: {lead:e}", sweep.argmax_theta),
        ));
    }
    common_equilibrium_checks(cfg, &eqs, checks);
}

fn common_checks(cfg: &EconomyConfig, checks: &mut Vec<Check>) {
    let Some(sweep) = sweep_or_fail(cfg, Regime::Common, "common_sweep", checks) else {
        return;
    };
    if let Some(detail) = failed_points(&sweep) {
        checks.push(Check::failed("common_sweep", detail));
    }
    let eqs: Vec<_> = equilibria(&sweep).cloned().collect();
    let spread = activity_spread(eqs.iter().map(|eq| &eq.state(ShockState::High).unwrap().activities));
    checks.push(Check::measured(
        "common_neutrality",
        NEUTRALITY_TOLERANCE - spread,
        format!("high-state activity spread {spread:e}"),
    ));
    let rho = cfg.shocks.rho;
    let return_error = eqs
        .iter()
        .map(|eq| {
            let target = (1.0 - rho) + rho * (1.0 + eq.theta) * (1.0 + cfg.gamma);
            ((1.0 + eq.expected_return) - target).abs()
        })
        .fold(0.0, f64::max);
    checks.push(Check::measured(
        "common_expected_return",
        RETURN_FORMULA_TOLERANCE - return_error,
        format!("largest deviation {return_error:e}"),
    ));
    common_equilibrium_checks(cfg, &eqs, checks);
}

fn heterogeneous_checks(cfg: &EconomyConfig, checks: &mut Vec<Check>) {
    let Some(sweep) = sweep_or_fail(cfg, Regime::Heterogeneous, "heterogeneous_sweep", checks) else {
        return;
    };
    let Some(base) = sweep.points.first().filter(|p| p.status == PointStatus::Ok) else {
        checks.push(Check::failed(
            "heterogeneous_improvement",
            format!("no congested equilibrium at theta = 0: {:?}", sweep.points.first().map(|p| &p.error)),
        ));
        return;
    };
    let base_welfare = base.welfare.unwrap();
    let gain = sweep
        .points
        .iter()
        .skip(1)
        .filter(|p| p.status == PointStatus::Ok)
        .filter_map(|p| p.welfare)
        .map(|w| w - base_welfare)
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::measured(
        "heterogeneous_improvement",
        gain - IMPROVEMENT_MARGIN,
        format!("best welfare gain over theta = 0: {gain:e} at argmax theta {:?}", sweep.argmax_theta),
    ));

    let ok: Vec<&SteadyStateEquilibrium> = sweep
        .points
        .iter()
        .filter(|p| p.status == PointStatus::Ok)
        .filter_map(|p| p.equilibrium.as_ref())
        .collect();
    checks.push(reallocation_check(cfg, &ok));

    // Low-state activity of the type without a demand shift rises with the tax.
    if let Some(b) = cfg.agent_types.iter().position(|t| t.utility_by_state.low == t.utility_by_state.high) {
        let worst = ok
            .windows(2)
            .map(|w| w[1].state(ShockState::Low).unwrap().activities[b] - w[0].state(ShockState::Low).unwrap().activities[b])
            .fold(f64::INFINITY, f64::min);
        checks.push(Check::measured(
            "heterogeneous_low_state_shift",
            worst,
            format!("smallest step in low-state activity of the unshocked type {worst:e}"),
        ));
    }

    let eqs: Vec<_> = equilibria(&sweep).cloned().collect();
    common_equilibrium_checks(cfg, &eqs, checks);
}

/// Moving congested blockspace toward the type with the higher marginal
/// utility cannot lower high-state utility: whenever `u_A'(a) > u_B'(b)`
/// holds at two consecutive solutions, utility moves in the same direction
/// as type A's activity.
fn reallocation_check(cfg: &EconomyConfig, eqs: &[&SteadyStateEquilibrium]) -> Check {
    const NAME: &str = "congested_reallocation";
    let Some(a) = cfg.agent_types.iter().position(|t| t.utility_by_state.low != t.utility_by_state.high) else {
        return Check::not_applicable(NAME, "no type with a demand shift");
    };
    let b = 1 - a;
    let (ua, ub) = (
        cfg.agent_types[a].utility(ShockState::High),
        cfg.agent_types[b].utility(ShockState::High),
    );
    let (la, lb) = (cfg.agent_types[a].mass, cfg.agent_types[b].mass);
    let point = |eq: &SteadyStateEquilibrium| {
        let h = eq.state(ShockState::High).unwrap();
        let (x, y) = (h.activities[a], h.activities[b]);
        (x, la * ua.value(x) + lb * ub.value(y), ua.marginal(x) > ub.marginal(y))
    };
    let mut worst = f64::INFINITY;
    let mut pairs = 0;
    for w in eqs.windows(2) {
        let (x0, s0, pre0) = point(w[0]);
        let (x1, s1, pre1) = point(w[1]);
        if pre0 && pre1 && x1 != x0 {
            pairs += 1;
            worst = worst.min((s1 - s0) * (x1 - x0).signum());
        }
    }
    if pairs == 0 {
        return Check::not_applicable(NAME, "no consecutive pair meets the preconditions");
    }
    Check::measured(NAME, worst + 1e-12, format!("{pairs} pairs, smallest signed utility change {worst:e}"))
}

fn activity_spread<'a>(activities: impl Iterator<Item = &'a Vec<f64>>) -> f64 {
    let all: Vec<&Vec<f64>> = activities.collect();
    let mut spread: f64 = 0.0;
    for x in &all {
        for y in &all {
            for (a, b) in x.iter().zip(y.iter()) {
                spread = spread.max((a - b).abs());
            }
        }
    }
    spread
}

/// Burn identity on every solution with burning, marginal conditions on every
/// strict equilibrium.
fn common_equilibrium_checks(cfg: &EconomyConfig, eqs: &[SteadyStateEquilibrium], checks: &mut Vec<Check>) {
    let burn = eqs
        .iter()
        .flat_map(|eq| {
            let taxes: Vec<f64> = eq.states.iter().map(|s| s.tax).collect();
            steady_state_burn_residual(eq, cfg.gamma)
                .into_iter()
                .zip(taxes)
                .filter(|(_, tax)| *tax > 0.0)
                .map(|((_, r), _)| r.abs())
        })
        .fold(0.0, f64::max);
    checks.push(Check::measured(
        "burn_identity",
        BURN_TOLERANCE - burn,
        format!("largest residual {burn:e}"),
    ));

    let converged: Vec<_> = eqs.iter().filter(|eq| eq.is_converged()).collect();
    let foc = converged
        .iter()
        .flat_map(|eq| shock_foc_residual(cfg, eq))
        .map(|r| r.residual.abs())
        .fold(0.0, f64::max);
    checks.push(Check::measured(
        "foc_residuals",
        FOC_TOLERANCE - foc,
        format!("largest residual {foc:e} over {} equilibria", converged.len()),
    ));

    let mut fd_slack = f64::INFINITY;
    let mut fd_error = None;
    for eq in &converged {
        let h = 1e-6 * eq.holdings.iter().cloned().fold(1e-3, f64::max);
        match check_foc_finite_difference(cfg, eq, h) {
            Ok(ds) => {
                for d in ds {
                    fd_slack = fd_slack.min(FD_TOLERANCE * (1.0 + d.objective.abs()) - d.derivative.abs());
                }
            }
            Err(e) => fd_error = Some(e.to_string()),
        }
    }
    checks.push(match fd_error {
        Some(e) => Check::failed("foc_finite_difference", e),
        None => Check::measured("foc_finite_difference", fd_slack, format!("smallest slack {fd_slack:e}")),
    });
}

/// Representative tax rates for oracle cross-checks: below every canonical
/// Friedman tax, so the solutions are strict equilibria.
const ORACLE_THETAS: [f64; 2] = [0.0, 0.02];

/// Grid-search cross-checks of holdings and first-best allocations for every
/// regime that applies to `cfg`.
pub fn oracle_report(cfg: &EconomyConfig) -> Vec<Check> {
    let mut checks = Vec::new();
    for regime in Regime::applicable(cfg) {
        let thetas: &[f64] = if regime == Regime::Friedman { &[0.0] } else { &ORACLE_THETAS };
        let name = format!("oracle_holdings_{}", regime.name());
        let mut slack = f64::INFINITY;
        let mut detail = Vec::new();
        let mut error = None;
        let mut first_best_done = false;
        for &theta in thetas {
            let eq = match solve(cfg, regime, theta) {
                Ok(eq) => eq,
                Err(e) => {
                    error = Some(format!("theta = {theta}: {e}"));
                    continue;
                }
            };
            if !first_best_done {
                first_best_done = true;
                checks.push(first_best_oracle_check(cfg, &eq, regime));
            }
            if !eq.is_converged() {
                continue;
            }
            match holdings_oracle_gap(cfg, &eq, InnerMode::Grid) {
                Ok(gaps) => {
                    for g in gaps {
                        slack = slack.min(2.0 * g.step - g.delta);
                        detail.push(format!("theta = {theta}, type {}: {:.2} steps", g.agent_type, g.delta / g.step));
                    }
                }
                Err(e) => error = Some(format!("theta = {theta}: {e}")),
            }
        }
        checks.push(match error {
            Some(e) => Check::failed(&name, e),
            None if slack.is_infinite() => Check::not_applicable(&name, "no strict equilibrium to check"),
            None => Check::measured(&name, slack, detail.join(", ")),
        });
    }
    checks
}

fn first_best_oracle_check(cfg: &EconomyConfig, eq: &SteadyStateEquilibrium, regime: Regime) -> Check {
    let name = format!("oracle_first_best_{}", regime.name());
    let mut slack = f64::INFINITY;
    let mut detail = Vec::new();
    for market in eq.markets(cfg) {
        let fb = match first_best_for(&market.members, &cfg.cost) {
            Ok(fb) => fb,
            Err(e) => return Check::failed(&name, e.to_string()),
        };
        let grids: Vec<GridSpec> = fb
            .activities
            .iter()
            .map(|&a| GridSpec::new(if a > 0.0 { 2.0 * a } else { 1.0 }, ORACLE_POINTS))
            .collect();
        let oracle = match grid_first_best(&market.members, &cfg.cost, &grids) {
            Ok(o) => o,
            Err(e) => return Check::failed(&name, e.to_string()),
        };
        for (k, grid) in grids.iter().enumerate() {
            if market.members[k].utility.is_zero() {
                continue;
            }
            let delta = (oracle.activities[k] - fb.activities[k]).abs();
            slack = slack.min(2.0 * grid.step() - delta);
            detail.push(format!("{} member {k}: {:.2} steps", market.label, delta / grid.step()));
        }
    }
    if slack.is_infinite() {
        Check::not_applicable(&name, "no active demand")
    } else {
        Check::measured(&name, slack, detail.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{solve_deterministic, solve_friedman};
    use crate::testing;

    #[test]
    fn friedman_attains_first_best() {
        let cfg = testing::deterministic();
        let rep = evaluate(&cfg, &solve_friedman(&cfg).unwrap()).unwrap();
        assert!(rep.first_best_gap.abs() <= 1e-8);
        assert!(rep.oracle_delta_max.unwrap() <= 2.0 * 2.0 * solve_friedman(&cfg).unwrap().holdings[0] / 2000.0);
    }

    #[test]
    fn burning_with_discounting_leaves_a_gap() {
        let cfg = testing::deterministic();
        let rep = evaluate(&cfg, &solve_deterministic(&cfg, 0.03).unwrap()).unwrap();
        assert!(rep.first_best_gap > 0.0);
        let total: f64 = rep.per_state.iter().map(|s| s.probability * s.surplus).sum();
        assert!((total - rep.expected_flow_welfare).abs() <= 1e-12);
    }

    #[test]
    fn zero_demand_has_zero_welfare() {
        let mut cfg = testing::common();
        cfg.shocks.rho = 1.0;
        let eq = solve(&cfg, Regime::Common, 0.0).unwrap();
        let rep = evaluate(&cfg, &eq).unwrap();
        let mut eq0 = eq.clone();
        for s in &mut eq0.states {
            s.activities = vec![0.0];
        }
        let markets = eq0.markets(&cfg);
        assert_eq!(surplus_for(&markets[0].members, &cfg.cost, &markets[0].activities), 0.0);
        assert!(rep.expected_flow_welfare > 0.0);
    }

    #[test]
    fn sweeps_pick_the_smallest_best_tax() {
        let cfg = testing::deterministic();
        let sweep = sweep_tax(&cfg, Regime::Deterministic, &linspace(0.0, 0.5, 11)).unwrap();
        assert_eq!(sweep.argmax_theta, Some(0.0));
        assert_eq!(sweep.points[0].status, PointStatus::Ok);
        assert_eq!(sweep.points[10].status, PointStatus::ReturnExceedsRiskFree);

        let iid = sweep_tax(&testing::iid(), Regime::Iid, &linspace(0.0, 0.3, 31)).unwrap();
        assert_eq!(iid.argmax_theta, Some(0.0));

        let het = sweep_tax(&testing::heterogeneous(), Regime::Heterogeneous, &linspace(0.0, 0.5, 21)).unwrap();
        assert!(het.argmax_theta.unwrap() > 0.0);
    }

    #[test]
    fn sweep_rejects_bad_grids_and_records_failures() {
        let cfg = testing::deterministic();
        assert!(sweep_tax(&cfg, Regime::Deterministic, &[]).is_err());
        assert!(sweep_tax(&cfg, Regime::Deterministic, &[0.1, 0.0]).is_err());
        let sweep = sweep_tax(&cfg, Regime::Iid, &[0.0, 0.1]).unwrap();
        assert!(sweep.all_failed());
        assert_eq!(sweep.argmax_theta, None);
    }

    #[test]
    fn parallel_sweep_matches_sequential() {
        let cfg = testing::heterogeneous();
        let grid = linspace(0.0, 0.5, 21);
        let a = sweep_tax(&cfg, Regime::Heterogeneous, &grid).unwrap();
        let b = sweep_tax_parallel(&cfg, Regime::Heterogeneous, &grid, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn canonical_reports_pass() {
        for cfg in [testing::deterministic(), testing::iid(), testing::common(), testing::heterogeneous()] {
            let report = proposition_report(&cfg);
            let failures: Vec<_> = report.failures().collect();
            assert!(failures.is_empty(), "{failures:#?}");
        }
    }

    #[test]
    fn deflation_checks_skipped_when_growth_exceeds_rate() {
        let mut cfg = testing::deterministic();
        cfg.r = 0.02;
        cfg.gamma = 0.05;
        let report = proposition_report(&cfg);
        assert!(report.passed(), "{:#?}", report.failures().collect::<Vec<_>>());
        let skipped = report
            .checks
            .iter()
            .find(|c| c.name == "deterministic_neutrality")
            .unwrap();
        assert_eq!(skipped.status, CheckStatus::NotApplicable);
    }

    #[test]
    fn linspace_hits_endpoints() {
        let g = linspace(0.0, 0.5, 11);
        assert_eq!(g.len(), 11);
        assert_eq!(g[10], 0.5);
        assert!((g[1] - 0.05).abs() < 1e-15);
    }
}
