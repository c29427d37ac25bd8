//! Brute-force verifiers that share no solving logic with the analytic
//! solvers: exhaustive grid search over token holdings and over per-type
//! allocations.

use serde::{Deserialize, Serialize};

use crate::econ::{CostFn, EconomyConfig, StateUtility, BLOCKSPACE_CAPACITY};
use crate::equilibrium::{user_demand, SteadyStateEquilibrium};
use crate::error::{Error, Result};
use crate::first_best::{surplus_for, Allocation, Member};

/// Relative tolerance for treating two objective values as tied.
const TIE_TOLERANCE: f64 = 1e-12;
const MAX_EXPANSIONS: usize = 4;
const MAX_ORACLE_TYPES: usize = 3;

/// Uniform grid of `points` nodes on `[0, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub upper: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(upper: f64, points: usize) -> Self {
        Self { upper, points }
    }

    pub fn step(&self) -> f64 {
        self.upper / (self.points - 1) as f64
    }

    fn node(&self, i: usize) -> f64 {
        // Pin the last node exactly to the bound.
        if i + 1 == self.points {
            self.upper
        } else {
            i as f64 * self.step()
        }
    }

    fn check(&self) -> Result<()> {
        if self.points < 2 || !(self.upper > 0.0 && self.upper.is_finite()) {
            return Err(Error::Oracle(format!(
                "grid needs at least two points on a positive finite range, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// How the inner blockspace purchase is chosen for a given budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerMode {
    /// Best node of the activity grid that fits the budget, or the budget
    /// itself.
    Grid,
    /// Closed-form demand.
    ClosedForm,
}

/// Prices and returns a user faces in one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestResponseState {
    pub probability: f64,
    pub utility: StateUtility,
    pub price: f64,
    pub tax: f64,
    pub token_return: f64,
}

impl BestResponseState {
    fn effective_price(&self) -> f64 {
        (1.0 + self.tax) * self.price
    }
}

/// States faced by agent type `k` in an equilibrium.
pub fn best_response_states(
    cfg: &EconomyConfig,
    eq: &SteadyStateEquilibrium,
    k: usize,
) -> Vec<BestResponseState> {
    eq.states
        .iter()
        .map(|o| BestResponseState {
            probability: o.probability,
            utility: *cfg.agent_types[k].utility(o.state),
            price: o.price,
            tax: o.tax,
            token_return: o.token_return,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    pub holdings: f64,
    pub value: f64,
    /// Step of the holdings grid the optimum was found on.
    pub step: f64,
    pub expansions: usize,
}

/// Inner problem: `max_a u(a) - P a` subject to `P a <= wealth`.
struct InnerSolver {
    utility: StateUtility,
    price: f64,
    mode: InnerMode,
    grid: GridSpec,
    /// Running maximum of the payoff over grid nodes `0..=i`.
    prefix_best: Vec<f64>,
}

impl InnerSolver {
    fn new(state: &BestResponseState, mode: InnerMode, grid: GridSpec) -> Result<Self> {
        let price = state.effective_price();
        if !state.utility.is_zero() && !(price > 0.0) {
            return Err(Error::Oracle(format!(
                "positive demand at non-positive price {price}"
            )));
        }
        let mut prefix_best = Vec::new();
        if mode == InnerMode::Grid {
            prefix_best.reserve(grid.points);
            let mut best = f64::NEG_INFINITY;
            for i in 0..grid.points {
                let a = grid.node(i);
                best = best.max(state.utility.value(a) - price * a);
                prefix_best.push(best);
            }
        }
        Ok(Self {
            utility: state.utility,
            price,
            mode,
            grid,
            prefix_best,
        })
    }

    fn payoff(&self, a: f64) -> f64 {
        self.utility.value(a) - self.price * a
    }

    fn best(&self, wealth: f64) -> Result<f64> {
        if self.utility.is_zero() {
            return Ok(0.0);
        }
        match self.mode {
            InnerMode::ClosedForm => Ok(self.payoff(user_demand(&self.utility, self.price, wealth)?)),
            InnerMode::Grid => {
                let budget = wealth.max(0.0) / self.price;
                let idx = ((budget / self.grid.step()).floor() as usize).min(self.grid.points - 1);
                // Rounding can put the node just past the budget.
                let idx = if self.grid.node(idx) > budget && idx > 0 { idx - 1 } else { idx };
                Ok(self.prefix_best[idx].max(self.payoff(budget)))
            }
        }
    }
}

/// Maximizes `-m + beta E[u(a) + (1 + r^T) m - P a]` over a grid of
/// holdings, with the purchase `a` chosen subject to `P a <= (1 + r^T) m`.
/// Doubles the holdings range when the optimum sits on its upper edge.
pub fn grid_best_response(
    states: &[BestResponseState],
    r: f64,
    m_grid: GridSpec,
    a_grid: GridSpec,
    inner: InnerMode,
) -> Result<BestResponse> {
    m_grid.check()?;
    a_grid.check()?;
    let beta = 1.0 / (1.0 + r);
    let solvers = states
        .iter()
        .map(|s| InnerSolver::new(s, inner, a_grid))
        .collect::<Result<Vec<_>>>()?;
    let objective = |m: f64| -> Result<f64> {
        let mut expected = 0.0;
        for (s, solver) in states.iter().zip(&solvers) {
            let wealth = (1.0 + s.token_return) * m;
            expected += s.probability * (solver.best(wealth)? + wealth);
        }
        Ok(-m + beta * expected)
    };

    let mut grid = m_grid;
    for expansions in 0..=MAX_EXPANSIONS {
        let values = (0..grid.points)
            .map(|i| objective(grid.node(i)))
            .collect::<Result<Vec<_>>>()?;
        let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tol = TIE_TOLERANCE * (1.0 + best.abs());
        let idx = values
            .iter()
            .position(|&v| v >= best - tol)
            .expect("grid is non-empty");
        if idx + 1 < grid.points {
            return Ok(BestResponse {
                holdings: grid.node(idx),
                value: values[idx],
                step: grid.step(),
                expansions,
            });
        }
        grid.upper *= 2.0;
    }
    Err(Error::Oracle(format!(
        "holdings optimum stays on the grid boundary after {MAX_EXPANSIONS} expansions (upper = {})",
        grid.upper / 2.0
    )))
}

/// Exhaustive surplus maximization over the product of per-type grids,
/// subject to the capacity constraint. `grids` holds one grid per member;
/// members with zero utility get zero activity and their grid is ignored.
pub fn grid_first_best(members: &[Member], cost: &CostFn, grids: &[GridSpec]) -> Result<Allocation> {
    if grids.len() != members.len() {
        return Err(Error::Oracle(format!(
            "{} grids for {} members",
            grids.len(),
            members.len()
        )));
    }
    let active: Vec<usize> = (0..members.len())
        .filter(|&k| members[k].mass > 0.0 && !members[k].utility.is_zero())
        .collect();
    if active.len() > MAX_ORACLE_TYPES {
        return Err(Error::Oracle(format!(
            "grid first best supports at most {MAX_ORACLE_TYPES} active types, got {}",
            active.len()
        )));
    }
    let mut activities = vec![0.0; members.len()];
    if active.is_empty() {
        return Ok(Allocation {
            activities,
            total: 0.0,
            congested: false,
            shadow_marginal: 0.0,
        });
    }
    for &k in &active {
        grids[k].check()?;
    }

    let tables: Vec<Vec<(f64, f64)>> = active
        .iter()
        .map(|&k| {
            (0..grids[k].points)
                .map(|i| {
                    let a = grids[k].node(i);
                    (a, members[k].mass * members[k].utility.value(a))
                })
                .collect()
        })
        .collect();

    let mut search = ProductSearch {
        members,
        active: &active,
        grids,
        tables: &tables,
        cost,
        current: vec![0.0; active.len()],
        best_value: f64::NEG_INFINITY,
        best: vec![0.0; active.len()],
    };
    search.descend(0, 0.0, 0.0);

    for (slot, &k) in active.iter().enumerate() {
        activities[k] = search.best[slot];
    }
    let total: f64 = members.iter().zip(&activities).map(|(m, a)| m.mass * a).sum();
    Ok(Allocation {
        activities,
        total,
        congested: total >= BLOCKSPACE_CAPACITY - 1e-9,
        shadow_marginal: 0.0,
    })
}

struct ProductSearch<'a> {
    members: &'a [Member],
    active: &'a [usize],
    grids: &'a [GridSpec],
    tables: &'a [Vec<(f64, f64)>],
    cost: &'a CostFn,
    current: Vec<f64>,
    best_value: f64,
    best: Vec<f64>,
}

impl ProductSearch<'_> {
    fn consider(&mut self, value: f64) {
        if value > self.best_value {
            self.best_value = value;
            self.best.clone_from(&self.current);
        }
    }

    fn descend(&mut self, slot: usize, utility: f64, used: f64) {
        let k = self.active[slot];
        let mass = self.members[k].mass;
        let last = slot + 1 == self.active.len();
        for &(a, u) in &self.tables[slot] {
            let total = used + mass * a;
            if total > BLOCKSPACE_CAPACITY * (1.0 + 1e-12) {
                break;
            }
            self.current[slot] = a;
            if last {
                self.consider(utility + u - self.cost.value(total));
            } else {
                self.descend(slot + 1, utility + u, total);
            }
        }
        if last {
            // The node that exactly fills the remaining capacity.
            let a = (BLOCKSPACE_CAPACITY - used) / mass;
            if a >= 0.0 && a <= self.grids[k].upper {
                self.current[slot] = a;
                let u = mass * self.members[k].utility.value(a);
                self.consider(utility + u - self.cost.value(BLOCKSPACE_CAPACITY));
            }
        }
    }
}

/// Surplus of an oracle allocation, for comparisons with analytic values.
pub fn allocation_surplus(members: &[Member], cost: &CostFn, alloc: &Allocation) -> f64 {
    surplus_for(members, cost, &alloc.activities)
}
