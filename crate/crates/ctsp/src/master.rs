//! Set-partitioning master problem over a route pool: LP relaxation with
//! dual extraction for pricing, plus MIP solves for integer incumbents.
//!
//! Row layout is fixed so dual vectors split by position: inbound coverage
//! (n rows), outbound coverage (n), driver balance (n), then the
//! route-count cut, the objective cut, and one driver-selection cut per
//! rider. The three cut families are installed from the start with
//! right-hand side 0 and only their right-hand sides change later, which
//! keeps the dual dimensions stable across the search.

use crate::enumerate::RoutePool;
use crate::lp::{
    solve_binary_mip, solve_lp, LinearProgram, LpError, LpStatus, MipOptions, Relation, Sense,
};
use crate::model::{Direction, Instance, Route};
use std::collections::HashSet;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MasterError {
    #[error("rider {rider} has no {direction} coverage in the pool")]
    Uncovered { rider: usize, direction: Direction },
    #[error("restricted master infeasible")]
    Infeasible,
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone)]
pub struct Column {
    pub route: Route,
    /// Master cost: route distance plus the fleet-size surcharge.
    pub cost: i64,
}

/// Deduplicated column storage shared across the whole search tree.
#[derive(Debug, Clone, Default)]
pub struct ColumnPool {
    pub columns: Vec<Column>,
    keys: HashSet<(Direction, usize, Vec<usize>)>,
}

impl ColumnPool {
    pub fn from_route_pool(pool: &RoutePool, cbar: i64) -> ColumnPool {
        let mut out = ColumnPool::default();
        for r in &pool.routes {
            out.add(r.clone(), cbar);
        }
        out
    }

    /// Insert unless an identical (direction, driver, stop sequence) column
    /// is already present. Returns whether the column was added.
    pub fn add(&mut self, route: Route, cbar: i64) -> bool {
        let key = (route.direction, route.driver, route.stops.clone());
        if !self.keys.insert(key) {
            return false;
        }
        let cost = route.distance + cbar;
        self.columns.push(Column { route, cost });
        true
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

/// Active cut right-hand sides. All rows exist from the start; a zero
/// right-hand side makes a cut vacuous.
#[derive(Debug, Clone)]
pub struct Cuts {
    pub parity_rhs: i64,
    pub objective_rhs: i64,
    pub driver_rhs: Vec<i64>,
}

impl Cuts {
    pub fn inactive(n: usize) -> Cuts {
        Cuts {
            parity_rhs: 0,
            objective_rhs: 0,
            driver_rhs: vec![0; n],
        }
    }
}

/// Duals of the restricted master, split by row family.
#[derive(Debug, Clone)]
pub struct Duals {
    pub pi_in: Vec<f64>,
    pub pi_out: Vec<f64>,
    pub sigma: Vec<f64>,
    pub mu: f64,
    pub nu: f64,
    pub phi: Vec<f64>,
}

impl Duals {
    pub fn zero(n: usize) -> Duals {
        Duals {
            pi_in: vec![0.0; n],
            pi_out: vec![0.0; n],
            sigma: vec![0.0; n],
            mu: 0.0,
            nu: 0.0,
            phi: vec![0.0; n],
        }
    }
}

/// Fleet-size surcharge from a pool: the multiplier times the longest route
/// distance seen so far.
pub fn fixed_cost_from_pool(pool: &RoutePool, multiplier: i64) -> i64 {
    multiplier * pool.max_distance()
}

/// Surcharge usable before any enumeration: the multiplier times a distance
/// no route can exceed (a route visits at most 2*min(K, n) stops).
pub fn fixed_cost_upper_bound(inst: &Instance, multiplier: i64) -> i64 {
    let n = inst.n() as i64;
    let legs = (2 * inst.capacity.min(inst.n()) as i64 - 1).max(n);
    multiplier * legs * inst.max_delta()
}

/// The effective per-column cost: unit costs collapse the objective to the
/// route count.
pub fn column_cost(col: &Column, unit_costs: bool) -> f64 {
    if unit_costs {
        1.0
    } else {
        col.cost as f64
    }
}

/// Build the restricted master LP over the active columns.
///
/// `active` masks pool columns in/out (branching hides columns without
/// deleting them). Returns the LP and the pool index of each LP column.
pub fn build_rmp(
    pool: &ColumnPool,
    active: &[bool],
    inst: &Instance,
    cuts: &Cuts,
    unit_costs: bool,
) -> Result<(LinearProgram, Vec<usize>), MasterError> {
    let n = inst.n();
    let mut covered = vec![[false; 2]; n];
    let mut map = Vec::new();
    let mut objective = Vec::new();
    for (idx, col) in pool.columns.iter().enumerate() {
        if !active[idx] {
            continue;
        }
        map.push(idx);
        objective.push(column_cost(col, unit_costs));
        for &r in &col.route.riders {
            covered[r][col.route.direction.idx()] = true;
        }
    }
    for (rider, c) in covered.iter().enumerate() {
        for dir in Direction::BOTH {
            if !c[dir.idx()] {
                return Err(MasterError::Uncovered {
                    rider,
                    direction: dir,
                });
            }
        }
    }

    let mut lp = LinearProgram::new(Sense::Min, objective);
    for j in 0..map.len() {
        lp.set_bounds(j, 0.0, 1.0);
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); 4 * n + 2];
    for (j, &idx) in map.iter().enumerate() {
        let col = &pool.columns[idx];
        let dir = col.route.direction;
        for &r in &col.route.riders {
            rows[dir.idx() * n + r].push((j, 1.0));
        }
        let balance_coef = match dir {
            Direction::Inbound => 1.0,
            Direction::Outbound => -1.0,
        };
        rows[2 * n + col.route.driver].push((j, balance_coef));
        rows[3 * n].push((j, 1.0));
        rows[3 * n + 1].push((j, column_cost(col, unit_costs)));
        if dir == Direction::Inbound {
            rows[3 * n + 2 + col.route.driver].push((j, 1.0));
        }
    }
    for r in 0..n {
        lp.add_row(rows[r].clone(), Relation::Eq, 1.0);
    }
    for r in 0..n {
        lp.add_row(rows[n + r].clone(), Relation::Eq, 1.0);
    }
    for r in 0..n {
        lp.add_row(rows[2 * n + r].clone(), Relation::Eq, 0.0);
    }
    lp.add_row(rows[3 * n].clone(), Relation::Ge, cuts.parity_rhs as f64);
    lp.add_row(
        rows[3 * n + 1].clone(),
        Relation::Ge,
        cuts.objective_rhs as f64,
    );
    for r in 0..n {
        lp.add_row(
            rows[3 * n + 2 + r].clone(),
            Relation::Ge,
            cuts.driver_rhs[r] as f64,
        );
    }
    Ok((lp, map))
}

#[derive(Debug, Clone)]
pub struct RmpSolve {
    pub objective: f64,
    pub duals: Duals,
    /// Primal value per pool column (masked columns get 0).
    pub x: Vec<f64>,
}

pub fn solve_rmp(
    pool: &ColumnPool,
    active: &[bool],
    inst: &Instance,
    cuts: &Cuts,
    unit_costs: bool,
) -> Result<RmpSolve, MasterError> {
    let n = inst.n();
    let (lp, map) = build_rmp(pool, active, inst, cuts, unit_costs)?;
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(MasterError::Infeasible),
        LpStatus::Unbounded => {
            return Err(MasterError::Lp(LpError::Numerical(
                "restricted master unbounded".into(),
            )))
        }
    }
    let mut x = vec![0.0; pool.len()];
    for (j, &idx) in map.iter().enumerate() {
        x[idx] = sol.x[j];
    }
    let d = &sol.duals;
    let duals = Duals {
        pi_in: d[0..n].to_vec(),
        pi_out: d[n..2 * n].to_vec(),
        sigma: d[2 * n..3 * n].to_vec(),
        mu: d[3 * n],
        nu: d[3 * n + 1],
        phi: d[3 * n + 2..4 * n + 2].to_vec(),
    };
    Ok(RmpSolve {
        objective: sol.objective,
        duals,
        x,
    })
}

#[derive(Debug, Clone)]
pub struct PoolMip {
    /// Pool indices of the selected columns.
    pub selected: Vec<usize>,
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub nodes: u64,
}

/// The all-singles selection, feasible whenever the pool holds every rider's
/// two single-trip routes (the seed pool guarantees that).
pub fn all_singles_selection(pool: &ColumnPool, inst: &Instance) -> Option<Vec<usize>> {
    let n = inst.n();
    let mut pick = Vec::with_capacity(2 * n);
    for dir in Direction::BOTH {
        for rider in 0..n {
            let found = pool.columns.iter().position(|c| {
                c.route.direction == dir && c.route.driver == rider && c.route.riders == [rider]
            })?;
            pick.push(found);
        }
    }
    Some(pick)
}

/// Solve the restricted master as a binary program over the active columns.
pub fn mip_over_pool(
    pool: &ColumnPool,
    active: &[bool],
    inst: &Instance,
    cuts: &Cuts,
    unit_costs: bool,
    budget: Option<Duration>,
    warm_selected: Option<&[usize]>,
) -> Result<PoolMip, MasterError> {
    let (lp, map) = build_rmp(pool, active, inst, cuts, unit_costs)?;
    let binaries: Vec<usize> = (0..map.len()).collect();
    let warm = warm_selected.and_then(|sel| {
        let mut x = vec![0.0; map.len()];
        for &pool_idx in sel {
            let j = map.iter().position(|&m| m == pool_idx)?;
            x[j] = 1.0;
        }
        Some(x)
    });
    let opts = MipOptions {
        time_budget: budget,
        warm_start: warm,
        integral_objective: !unit_costs || true,
    };
    let sol = solve_binary_mip(&lp, &binaries, &opts)?;
    if sol.status != LpStatus::Optimal {
        return Err(MasterError::Infeasible);
    }
    let selected: Vec<usize> = sol
        .x
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.5)
        .map(|(j, _)| map[j])
        .collect();
    Ok(PoolMip {
        selected,
        objective: sol.objective,
        bound: sol.bound,
        gap: sol.gap,
        nodes: sol.nodes,
    })
}

/// Closed-form reduced cost of a route under the given duals; the pricing
/// graphs must reproduce this value edge by edge.
pub fn reduced_cost(route: &Route, cost: f64, duals: &Duals) -> f64 {
    let mut rc = cost * (1.0 - duals.nu) - duals.mu;
    match route.direction {
        Direction::Inbound => {
            for &r in &route.riders {
                rc -= duals.pi_in[r];
            }
            rc -= duals.sigma[route.driver];
            rc -= duals.phi[route.driver];
        }
        Direction::Outbound => {
            for &r in &route.riders {
                rc -= duals.pi_out[r];
            }
            rc += duals.sigma[route.driver];
        }
    }
    rc
}
