//! Branch and price: column generation to convergence with staged
//! count/objective rounding cuts, bi-level branching on driver selection and
//! edge flows, depth-first exploration with periodic incumbent solves, and a
//! time-budgeted root-node heuristic.

use crate::enumerate;
use crate::master::{
    self, all_singles_selection, fixed_cost_from_pool, ColumnPool, Cuts, MasterError,
};
use crate::model::{Direction, Instance, Route};
use crate::pricing::{GraphSkeleton, PriceStats, PricingConfig};
use crate::schedule;
use crate::solution::{Solution, ValidityError};
use rayon::prelude::*;
use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct BnpConfig {
    pub time_limit: Option<Duration>,
    pub pricing: PricingConfig,
    /// Incumbent search frequency in explored tree nodes.
    pub mip_interval: u64,
    /// Columns are added when their reduced cost is below `-eps_rc`.
    pub eps_rc: f64,
}

impl Default for BnpConfig {
    fn default() -> Self {
        BnpConfig {
            time_limit: None,
            pricing: PricingConfig::default(),
            mip_interval: 1000,
            eps_rc: 1e-4,
        }
    }
}

#[derive(Debug, Error)]
pub enum BnpError {
    #[error(transparent)]
    Master(#[from] MasterError),
    #[error("no incumbent found within the time limit (bound {bound})")]
    NoIncumbent { bound: f64 },
    #[error("solution failed validation: {0}")]
    Validity(#[from] ValidityError),
}

/// Per-run solver statistics.
#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub columns: usize,
    pub inbound_edges: usize,
    pub outbound_edges: usize,
    pub tree_nodes: u64,
    pub root_gap: f64,
    pub final_gap: f64,
    pub integrality_gap: f64,
    pub time_rmp_convergence: Duration,
    pub time_root_solution: Duration,
    pub time_best_solution: Duration,
    pub time_total: Duration,
    pub optimal: bool,
    pub root_bound: f64,
    pub pricing: PriceStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fix {
    Driver {
        rider: usize,
        value: bool,
    },
    Edge {
        direction: Direction,
        from: usize,
        to: usize,
        value: bool,
    },
}

#[derive(Debug, Clone)]
struct BranchNode {
    fixes: Vec<Fix>,
    bound: f64,
    depth: usize,
}

/// Node fixes expanded into the forms the master and pricing consume.
struct NodeState {
    banned_driver: Vec<bool>,
    driver_rhs: Vec<i64>,
    removed_edges: [HashSet<(usize, usize)>; 2],
}

impl NodeState {
    fn from_fixes(fixes: &[Fix], inst: &Instance) -> NodeState {
        let n = inst.n();
        let mut st = NodeState {
            banned_driver: vec![false; n],
            driver_rhs: vec![0; n],
            removed_edges: [HashSet::new(), HashSet::new()],
        };
        for fix in fixes {
            match *fix {
                Fix::Driver { rider, value } => {
                    if value {
                        st.driver_rhs[rider] = 1;
                    } else {
                        st.banned_driver[rider] = true;
                    }
                }
                Fix::Edge {
                    direction,
                    from,
                    to,
                    value,
                } => {
                    let set = &mut st.removed_edges[direction.idx()];
                    if value {
                        // Forcing the edge removes every competing edge out of
                        // `from` and into `to`.
                        for x in 0..2 * n {
                            if x != to {
                                set.insert((from, x));
                            }
                            if x != from {
                                set.insert((x, to));
                            }
                        }
                    } else {
                        set.insert((from, to));
                    }
                }
            }
        }
        st
    }

    /// Column visibility under the fixes; masked columns stay in the pool for
    /// sibling nodes.
    fn column_mask(&self, pool: &ColumnPool) -> Vec<bool> {
        pool.columns
            .iter()
            .map(|col| {
                if self.banned_driver[col.route.driver] {
                    return false;
                }
                let removed = &self.removed_edges[col.route.direction.idx()];
                if removed.is_empty() {
                    return true;
                }
                !col.route
                    .stops
                    .windows(2)
                    .any(|w| removed.contains(&(w[0], w[1])))
            })
            .collect()
    }
}

struct SearchCtx<'a> {
    inst: &'a Instance,
    cbar: i64,
    pool: ColumnPool,
    cuts: Cuts,
    cfg: BnpConfig,
    unit_costs: bool,
    /// Forbidden candidate paths per direction and driver; schedule
    /// infeasibility does not depend on duals or branching, so the sets
    /// persist for the whole solve.
    forbidden: [Vec<Vec<Vec<usize>>>; 2],
    stats: PriceStats,
    deadline: Option<Instant>,
}

fn ceil_eps(z: f64) -> f64 {
    (z - (1e-6 + 1e-12 * z.abs())).ceil()
}

fn snap(v: f64) -> f64 {
    if (v - v.round()).abs() < 1e-6 {
        v.round()
    } else {
        v
    }
}

fn bound_safety(z: f64) -> f64 {
    1e-3 + 1e-12 * z.abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RootStage {
    Count,
    Objective,
    Done,
}

struct CgOutcome {
    /// Valid dual lower bound on this node's full-master optimum.
    bound: f64,
    x: Vec<f64>,
    timed_out: bool,
}

impl<'a> SearchCtx<'a> {
    fn out_of_time(&self) -> bool {
        self.deadline.map_or(false, |d| Instant::now() >= d)
    }

    /// Column generation at one node. `stage_cuts` drives the root's two cut
    /// installations; branch nodes inherit whatever is installed.
    fn column_generation(
        &mut self,
        node_state: &NodeState,
        stage_cuts: bool,
        cutoff: Option<f64>,
    ) -> Result<CgOutcomeOrInfeasible, MasterError> {
        let inst = self.inst;
        let n = inst.n();
        let mut stage = if stage_cuts {
            RootStage::Count
        } else {
            RootStage::Done
        };
        let mut cuts = self.cuts.clone();
        cuts.driver_rhs = node_state.driver_rhs.clone();

        // Skeletons for every graph alive at this node.
        let jobs: Vec<(Direction, usize)> = Direction::BOTH
            .iter()
            .flat_map(|&d| (0..n).map(move |c| (d, c)))
            .filter(|&(_, c)| !node_state.banned_driver[c])
            .collect();
        let skels: Vec<GraphSkeleton> = jobs
            .par_iter()
            .map(|&(dir, driver)| {
                GraphSkeleton::build(
                    inst,
                    driver,
                    dir,
                    &self.cfg.pricing,
                    &node_state.removed_edges[dir.idx()],
                )
            })
            .collect();

        let mut best_bound = f64::NEG_INFINITY;
        #[allow(unused_assignments)]
        let mut last = (f64::NAN, Vec::new());
        let mut timed_out = false;

        loop {
            let mask = node_state.column_mask(&self.pool);
            let rmp = match master::solve_rmp(&self.pool, &mask, inst, &cuts, self.unit_costs) {
                Ok(r) => r,
                Err(MasterError::Infeasible) | Err(MasterError::Uncovered { .. }) => {
                    return Ok(CgOutcomeOrInfeasible::Infeasible)
                }
                Err(e) => return Err(e),
            };
            let duals = rmp.duals;
            let z_rmp = rmp.objective;
            last = (z_rmp, rmp.x.clone());

            // Price all live graphs in parallel, threading each graph's
            // forbidden set through the call.
            let mut taken: Vec<Vec<Vec<usize>>> = jobs
                .iter()
                .map(|&(d, c)| std::mem::take(&mut self.forbidden[d.idx()][c]))
                .collect();
            let outcomes: Vec<(
                Option<crate::pricing::PricedRoute>,
                Vec<Vec<usize>>,
                PriceStats,
            )> = skels
                .par_iter()
                .zip(taken.par_iter_mut())
                .map(|(skel, forb)| {
                    let mut stats = PriceStats::default();
                    let mut local = std::mem::take(forb);
                    let priced = crate::pricing::price_driver(
                        skel,
                        inst,
                        &duals,
                        self.cbar,
                        &self.cfg.pricing,
                        &mut local,
                        false,
                        &mut stats,
                    );
                    (priced, local, stats)
                })
                .collect();
            let mut rc_star = f64::INFINITY;
            let mut new_routes: Vec<Route> = Vec::new();
            for (&(d, c), (priced, forb, pstats)) in jobs.iter().zip(outcomes) {
                self.forbidden[d.idx()][c] = forb;
                self.stats.rcsp_runs += pstats.rcsp_runs;
                self.stats.forbidden_added += pstats.forbidden_added;
                self.stats.non_elementary += pstats.non_elementary;
                self.stats.labels.generated += pstats.labels.generated;
                self.stats.labels.dominated += pstats.labels.dominated;
                self.stats.labels.post_pruned += pstats.labels.post_pruned;
                self.stats.labels.forbidden_blocked += pstats.labels.forbidden_blocked;
                if let Some(p) = priced {
                    rc_star = rc_star.min(p.reduced_cost);
                    if p.reduced_cost < -self.cfg.eps_rc {
                        new_routes.push(p.route);
                    }
                }
            }

            let rc_floor = if rc_star.is_finite() {
                rc_star.min(0.0)
            } else {
                0.0
            };
            let z_lb = z_rmp + rc_floor * (2 * n) as f64 - bound_safety(z_rmp);
            best_bound = best_bound.max(z_lb);

            // Early exit when the node is already provably uninteresting.
            if let Some(cut) = cutoff {
                if best_bound >= cut {
                    break;
                }
            }

            // Root cut staging.
            let mut restaged = false;
            if stage == RootStage::Count {
                let chi_rmp = snap(rmp.x.iter().sum::<f64>());
                let denom = self.cbar as f64 * (1.0 + 1.0 / inst.fixed_cost_multiplier as f64);
                let chi_lb = if denom > 0.0 { best_bound / denom } else { 0.0 };
                let target = 2.0 * (chi_rmp / 2.0).ceil();
                if target - chi_lb < 2.0 {
                    cuts.parity_rhs = target as i64;
                    self.cuts.parity_rhs = cuts.parity_rhs;
                    stage = RootStage::Objective;
                    restaged = true;
                }
            } else if stage == RootStage::Objective {
                if ceil_eps(z_rmp) - best_bound < 1.0 {
                    cuts.objective_rhs = ceil_eps(z_rmp) as i64;
                    self.cuts.objective_rhs = cuts.objective_rhs;
                    stage = RootStage::Done;
                    restaged = true;
                }
            }

            let mut added = 0usize;
            for r in new_routes {
                if self.pool.add(r, self.cbar) {
                    added += 1;
                }
            }

            if self.out_of_time() {
                timed_out = true;
                break;
            }
            if added == 0 && !restaged {
                match stage {
                    RootStage::Count => {
                        // Converged without tripping the early test; install
                        // the rounding from the exact count.
                        let chi = snap(last.1.iter().sum::<f64>());
                        cuts.parity_rhs = (2.0 * (chi / 2.0).ceil()) as i64;
                        self.cuts.parity_rhs = cuts.parity_rhs;
                        stage = RootStage::Objective;
                    }
                    RootStage::Objective => {
                        cuts.objective_rhs = ceil_eps(z_rmp) as i64;
                        self.cuts.objective_rhs = cuts.objective_rhs;
                        stage = RootStage::Done;
                    }
                    RootStage::Done => break,
                }
            }
        }

        let (z_rmp, x) = last;
        debug_assert!(!z_rmp.is_nan(), "at least one RMP solve");
        // The per-iteration dual bound already captures convergence: with no
        // improving column left, the final bound sits just under the final
        // RMP value. Claiming the RMP value itself would overstate whenever
        // the last round left sub-threshold negative columns behind.
        Ok(CgOutcomeOrInfeasible::Solved(CgOutcome {
            bound: best_bound,
            x,
            timed_out,
        }))
    }
}

enum CgOutcomeOrInfeasible {
    Solved(CgOutcome),
    Infeasible,
}

/// Fractionality-driven child construction: drivers first, then edge flows.
/// Children are returned in push order (the preferred branch last, so it pops
/// first in depth-first order).
fn branch(
    node: &BranchNode,
    bound: f64,
    x: &[f64],
    mask: &[bool],
    pool: &ColumnPool,
    inst: &Instance,
) -> Vec<BranchNode> {
    let n = inst.n();
    let frac = |v: f64| (v - v.round()).abs();
    let child = |fix: Fix| -> BranchNode {
        let mut fixes = node.fixes.clone();
        fixes.push(fix);
        BranchNode {
            fixes,
            bound,
            depth: node.depth + 1,
        }
    };
    // Level 1: driver selection.
    let mut v = vec![0.0f64; n];
    for (idx, col) in pool.columns.iter().enumerate() {
        if mask[idx] && col.route.direction == Direction::Inbound {
            v[col.route.driver] += x[idx];
        }
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, &vi) in v.iter().enumerate() {
        let f = frac(vi);
        if f > 1e-6 {
            let dist = (vi - vi.floor() - 0.5).abs();
            match best {
                Some((_, d)) if d <= dist => {}
                _ => best = Some((i, dist)),
            }
        }
    }
    if let Some((rider, _)) = best {
        return vec![
            child(Fix::Driver {
                rider,
                value: false,
            }),
            child(Fix::Driver { rider, value: true }),
        ];
    }

    // Level 2: edge flows per direction.
    let mut fractional: [Option<((usize, usize), f64)>; 2] = [None, None];
    for dir in Direction::BOTH {
        let mut flows: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (idx, col) in pool.columns.iter().enumerate() {
            if !mask[idx] || col.route.direction != dir || x[idx] <= 1e-9 {
                continue;
            }
            for w in col.route.stops.windows(2) {
                *flows.entry((w[0], w[1])).or_insert(0.0) += x[idx];
            }
        }
        let mut pick: Option<((usize, usize), f64)> = None;
        for (&e, &f) in &flows {
            if frac(f) > 1e-6 {
                let dist = (f - f.floor() - 0.5).abs();
                match pick {
                    Some((_, d)) if d <= dist => {}
                    _ => pick = Some((e, dist)),
                }
            }
        }
        fractional[dir.idx()] = pick;
    }
    let mk_edge = |dir: Direction, e: (usize, usize), value: bool| Fix::Edge {
        direction: dir,
        from: e.0,
        to: e.1,
        value,
    };
    match (fractional[0], fractional[1]) {
        (Some((e, _)), None) => vec![
            child(mk_edge(Direction::Inbound, e, false)),
            child(mk_edge(Direction::Inbound, e, true)),
        ],
        (None, Some((e, _))) => vec![
            child(mk_edge(Direction::Outbound, e, false)),
            child(mk_edge(Direction::Outbound, e, true)),
        ],
        (Some((ei, _)), Some((eo, _))) => {
            let combos = [(false, false), (false, true), (true, false), (true, true)];
            combos
                .iter()
                .map(|&(a, b)| {
                    let mut fixes = node.fixes.clone();
                    fixes.push(mk_edge(Direction::Inbound, ei, a));
                    fixes.push(mk_edge(Direction::Outbound, eo, b));
                    BranchNode {
                        fixes,
                        bound,
                        depth: node.depth + 1,
                    }
                })
                .collect()
        }
        (None, None) => {
            unreachable!("fractional master solution with integral drivers and edge flows")
        }
    }
}

fn is_integral(x: &[f64]) -> bool {
    x.iter().all(|&v| (v - v.round()).abs() <= 1e-6)
}

fn selection_objective(pool: &ColumnPool, selected: &[usize], unit: bool) -> i64 {
    selected
        .iter()
        .map(|&i| if unit { 1 } else { pool.columns[i].cost })
        .sum()
}

fn selection_to_solution(
    pool: &ColumnPool,
    selected: &[usize],
    inst: &Instance,
    objective: f64,
    gap: f64,
) -> Result<Solution, ValidityError> {
    let routes: Vec<Route> = selected
        .iter()
        .map(|&i| pool.columns[i].route.clone())
        .collect();
    Solution::from_selection(routes, inst, objective, gap)
}

/// Exact branch-and-price solve.
pub fn solve_bpa(inst: &Instance, cfg: &BnpConfig) -> Result<(Solution, SolveStats), BnpError> {
    let t0 = Instant::now();
    let n = inst.n();
    let seeds = enumerate::enumerate_seeds(inst);
    let cbar = fixed_cost_from_pool(&seeds, inst.fixed_cost_multiplier);
    let pool = ColumnPool::from_route_pool(&seeds, cbar);
    let deadline = cfg.time_limit.map(|l| t0 + l);
    let mut ctx = SearchCtx {
        inst,
        cbar,
        pool,
        cuts: Cuts::inactive(n),
        cfg: cfg.clone(),
        unit_costs: false,
        forbidden: [vec![Vec::new(); n], vec![Vec::new(); n]],
        stats: PriceStats::default(),
        deadline,
    };
    let mut stats = SolveStats::default();

    // Edge counts over the union of all root graphs.
    for dir in Direction::BOTH {
        let mut union: HashSet<(usize, usize)> = HashSet::new();
        for driver in 0..n {
            let skel = GraphSkeleton::build(inst, driver, dir, &cfg.pricing, &HashSet::new());
            for u in 0..2 * n {
                for &v in &skel.out[u] {
                    union.insert((u, v as usize));
                }
            }
        }
        match dir {
            Direction::Inbound => stats.inbound_edges = union.len(),
            Direction::Outbound => stats.outbound_edges = union.len(),
        }
    }

    let root_state = NodeState::from_fixes(&[], inst);
    let root = match ctx.column_generation(&root_state, true, None)? {
        CgOutcomeOrInfeasible::Solved(o) => o,
        CgOutcomeOrInfeasible::Infeasible => return Err(BnpError::Master(MasterError::Infeasible)),
    };
    stats.time_rmp_convergence = t0.elapsed();
    stats.root_bound = root.bound;
    stats.tree_nodes = 1;

    // Incumbent from the pool MIP at the root.
    let root_mask = vec![true; ctx.pool.len()];
    let warm = all_singles_selection(&ctx.pool, inst);
    let mip_budget = ctx
        .deadline
        .map(|d| d.saturating_duration_since(Instant::now()));
    let root_mip = master::mip_over_pool(
        &ctx.pool,
        &root_mask,
        inst,
        &ctx.cuts,
        false,
        mip_budget,
        warm.as_deref(),
    )?;
    let mut incumbent = root_mip.selected.clone();
    let mut z_mip = selection_objective(&ctx.pool, &incumbent, false);
    stats.time_root_solution = t0.elapsed();
    stats.time_best_solution = t0.elapsed();
    stats.root_gap = ((z_mip as f64 - root.bound) / z_mip as f64).max(0.0);

    let mut stack: Vec<BranchNode> = Vec::new();
    let root_node = BranchNode {
        fixes: Vec::new(),
        bound: root.bound,
        depth: 0,
    };
    let optimal_now = (z_mip as f64) - root.bound < 1.0;
    if !optimal_now {
        if root.timed_out {
            // Unresolved root stays open so the reported gap is honest.
            stack.push(root_node.clone());
        } else if is_integral(&root.x) {
            // The converged LP itself is integral; the MIP already captured it.
        } else {
            stack = branch(&root_node, root.bound, &root.x, &root_mask, &ctx.pool, inst);
        }
    }

    let mut explored: u64 = 1;
    while let Some(node) = stack.pop() {
        if ctx.out_of_time() {
            stack.push(node);
            break;
        }
        // Root-termination test against the open frontier.
        let z_star_min = stack.iter().map(|nd| nd.bound).fold(node.bound, f64::min);
        if (z_mip as f64) - z_star_min < 1.0 {
            stack.push(node);
            break;
        }
        let cutoff = z_mip as f64 - 1.0 + 1e-6;
        if node.bound >= cutoff {
            continue;
        }
        explored += 1;
        stats.tree_nodes += 1;
        if cfg.mip_interval > 0 && explored % cfg.mip_interval == 0 {
            let mask = vec![true; ctx.pool.len()];
            let budget = ctx
                .deadline
                .map(|d| d.saturating_duration_since(Instant::now()));
            if let Ok(m) = master::mip_over_pool(
                &ctx.pool,
                &mask,
                inst,
                &ctx.cuts,
                false,
                budget,
                Some(&incumbent),
            ) {
                let obj = selection_objective(&ctx.pool, &m.selected, false);
                if obj < z_mip {
                    incumbent = m.selected;
                    z_mip = obj;
                    stats.time_best_solution = t0.elapsed();
                }
            }
        }
        let state = NodeState::from_fixes(&node.fixes, inst);
        let out = match ctx.column_generation(&state, false, Some(cutoff))? {
            CgOutcomeOrInfeasible::Solved(o) => o,
            CgOutcomeOrInfeasible::Infeasible => continue,
        };
        if out.timed_out {
            // The node is unresolved; keep it open for bound reporting.
            stack.push(BranchNode {
                bound: node.bound.max(out.bound.min(cutoff)),
                ..node
            });
            break;
        }
        let bound = node.bound.max(out.bound);
        if bound >= cutoff {
            continue;
        }
        let mask = state.column_mask(&ctx.pool);
        if is_integral(&out.x) {
            let selected: Vec<usize> = out
                .x
                .iter()
                .enumerate()
                .filter(|&(i, &v)| mask[i] && v > 0.5)
                .map(|(i, _)| i)
                .collect();
            let obj = selection_objective(&ctx.pool, &selected, false);
            if obj < z_mip {
                incumbent = selected;
                z_mip = obj;
                stats.time_best_solution = t0.elapsed();
            }
            continue;
        }
        let children = branch(&node, bound, &out.x, &mask, &ctx.pool, inst);
        stack.extend(children);
    }

    let z_star_min = stack
        .iter()
        .map(|nd| nd.bound)
        .fold(f64::INFINITY, f64::min);
    let proven = stack.is_empty() || (z_mip as f64) - z_star_min < 1.0;
    stats.optimal = proven;
    stats.final_gap = if proven {
        0.0
    } else {
        ((z_mip as f64 - z_star_min) / z_mip as f64).max(0.0)
    };
    stats.integrality_gap = ((z_mip as f64 - root.bound) / z_mip as f64).max(0.0);
    stats.columns = ctx.pool.len();
    stats.pricing = ctx.stats;
    stats.time_total = t0.elapsed();

    let solution =
        selection_to_solution(&ctx.pool, &incumbent, inst, z_mip as f64, stats.final_gap)?;
    Ok((solution, stats))
}

#[derive(Debug, Clone, Default)]
pub struct HeuristicStats {
    pub columns: usize,
    pub infeasible_columns: usize,
    pub gap: f64,
    pub converged: bool,
    pub z_lb: f64,
    pub z_mip: f64,
    /// Ratio lower bounds observed per column-generation iteration.
    pub farley_bounds: Vec<f64>,
    /// Converged objective, when the budget allowed convergence.
    pub converged_z: Option<f64>,
    pub time_rmp: Duration,
    pub time_mip: Duration,
}

/// Root-node heuristic: column generation under unit route costs within
/// `t_rmp`, then a pool MIP within `t_mip`. With `relax_forbidden`, pricing
/// skips the schedule re-check; unschedulable columns are filtered out before
/// the MIP and the reported bound is the (weaker) converged value.
pub fn root_heuristic(
    inst: &Instance,
    t_rmp: Duration,
    t_mip: Duration,
    relax_forbidden: bool,
    cfg: &BnpConfig,
) -> Result<(Solution, HeuristicStats), BnpError> {
    let t0 = Instant::now();
    let n = inst.n();
    let seeds = enumerate::enumerate_seeds(inst);
    let cbar = fixed_cost_from_pool(&seeds, inst.fixed_cost_multiplier);
    let mut pool = ColumnPool::from_route_pool(&seeds, cbar);
    let cuts = Cuts::inactive(n);
    let pricing = PricingConfig {
        unit_costs: true,
        ..cfg.pricing
    };
    let eps_rc = 1e-7;
    let deadline = t0 + t_rmp;

    let jobs: Vec<(Direction, usize)> = Direction::BOTH
        .iter()
        .flat_map(|&d| (0..n).map(move |c| (d, c)))
        .collect();
    let skels: Vec<GraphSkeleton> = jobs
        .par_iter()
        .map(|&(dir, driver)| GraphSkeleton::build(inst, driver, dir, &pricing, &HashSet::new()))
        .collect();
    let mut forbidden: Vec<Vec<Vec<usize>>> = vec![Vec::new(); jobs.len()];
    for f in forbidden.iter_mut() {
        *f = Vec::new();
    }

    let mut farley_bounds: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut last_z = 0.0;
    if t_rmp > Duration::ZERO {
        loop {
            let mask = vec![true; pool.len()];
            let rmp = master::solve_rmp(&pool, &mask, inst, &cuts, true)?;
            last_z = rmp.objective;
            let duals = rmp.duals;
            let outputs: Vec<(Option<crate::pricing::PricedRoute>, Vec<Vec<usize>>)> = skels
                .par_iter()
                .zip(forbidden.par_iter_mut())
                .map(|(skel, forb)| {
                    let mut stats = PriceStats::default();
                    let mut local = std::mem::take(forb);
                    let priced = crate::pricing::price_driver(
                        skel,
                        inst,
                        &duals,
                        cbar,
                        &pricing,
                        &mut local,
                        relax_forbidden,
                        &mut stats,
                    );
                    (priced, local)
                })
                .collect();
            let mut rc_star = f64::INFINITY;
            let mut added = 0usize;
            for ((priced, forb), slot) in outputs.into_iter().zip(forbidden.iter_mut()) {
                *slot = forb;
                if let Some(p) = priced {
                    rc_star = rc_star.min(p.reduced_cost);
                    if p.reduced_cost < -eps_rc && pool.add(p.route, cbar) {
                        added += 1;
                    }
                }
            }
            if rc_star.is_finite() && rc_star < 1.0 - 1e-9 && last_z > 0.0 {
                farley_bounds.push(last_z / (1.0 - rc_star));
            }
            if added == 0 {
                converged = true;
                break;
            }
            if Instant::now() >= deadline {
                break;
            }
        }
    }
    let time_rmp = t0.elapsed();

    // Filter unschedulable columns out of the integer solve.
    let mut infeasible_columns = 0usize;
    let mip_mask: Vec<bool> = pool
        .columns
        .iter()
        .map(|col| {
            let ok = schedule::is_valid(&col.route, inst)
                && schedule::feasible(&col.route, inst).is_some();
            if !ok {
                infeasible_columns += 1;
            }
            ok
        })
        .collect();

    let warm = all_singles_selection(&pool, inst);
    let mip_t0 = Instant::now();
    let mip = master::mip_over_pool(
        &pool,
        &mip_mask,
        inst,
        &cuts,
        true,
        Some(t_mip),
        warm.as_deref(),
    )?;
    let time_mip = mip_t0.elapsed();
    let z_mip = selection_objective(&pool, &mip.selected, true) as f64;

    let z_lb = if converged {
        last_z - bound_safety(last_z)
    } else {
        farley_bounds.iter().copied().fold(0.0, f64::max)
    };
    let gap = if z_mip > 0.0 {
        ((z_mip - z_lb) / z_mip).max(0.0)
    } else {
        0.0
    };
    let stats = HeuristicStats {
        columns: pool.len(),
        infeasible_columns,
        gap,
        converged,
        z_lb,
        z_mip,
        farley_bounds,
        converged_z: converged.then_some(last_z),
        time_rmp,
        time_mip,
    };
    let solution = selection_to_solution(&pool, &mip.selected, inst, z_mip, gap)?;
    Ok((solution, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_instance_with_model, Commuter, EuclideanTravel, Params, Trip};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_instance(n: usize, capacity: usize, seed: u64) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sites: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.gen_range(0.0..4000.0), rng.gen_range(0.0..4000.0)])
            .collect();
        let workplaces = 1 + n / 5;
        for _ in 0..workplaces {
            sites.push([rng.gen_range(6000.0..9000.0), rng.gen_range(0.0..3000.0)]);
        }
        let commuters: Vec<Commuter> = (0..n)
            .map(|id| {
                let work = n + (id % workplaces);
                Commuter {
                    id,
                    home: sites[id],
                    inbound: Trip {
                        origin: id,
                        destination: work,
                        desired_departure: 25000,
                        desired_arrival: 28800 + rng.gen_range(0..2400),
                        direction: Direction::Inbound,
                    },
                    outbound: Trip {
                        origin: work,
                        destination: id,
                        desired_departure: 61200 + rng.gen_range(0..2400),
                        desired_arrival: 66000,
                        direction: Direction::Outbound,
                    },
                }
            })
            .collect();
        build_instance_with_model(
            commuters,
            sites,
            &EuclideanTravel::default(),
            Params {
                capacity,
                delta_s: 600,
                detour_ratio: 0.5,
                fixed_cost_multiplier: 1000,
                service_duration: 0,
            },
        )
        .unwrap()
    }

    fn rea_optimum(inst: &Instance) -> (usize, i64) {
        let pool = enumerate::enumerate_all(inst, &enumerate::EnumerateOptions::default());
        let cbar = fixed_cost_from_pool(
            &enumerate::enumerate_seeds(inst),
            inst.fixed_cost_multiplier,
        );
        let cols = ColumnPool::from_route_pool(&pool, cbar);
        let mask = vec![true; cols.len()];
        let warm = all_singles_selection(&cols, inst).unwrap();
        let mip = master::mip_over_pool(
            &cols,
            &mask,
            inst,
            &Cuts::inactive(inst.n()),
            false,
            None,
            Some(&warm),
        )
        .unwrap();
        let routes: Vec<&Route> = mip
            .selected
            .iter()
            .map(|&i| &cols.columns[i].route)
            .collect();
        let dist: i64 = routes.iter().map(|r| r.distance).sum();
        (routes.len() / 2, dist)
    }

    #[test]
    fn one_commuter_converges_immediately() {
        let inst = random_instance(1, 4, 11);
        let (sol, stats) = solve_bpa(&inst, &BnpConfig::default()).unwrap();
        assert_eq!(sol.vehicle_count, 1);
        assert_eq!(sol.routes.len(), 2);
        assert_eq!(stats.tree_nodes, 1);
        assert!(stats.optimal);
        assert_eq!(stats.final_gap, 0.0);
        // Parity target for one commuter is two routes.
        assert_eq!(sol.routes.len() % 2, 0);
    }

    #[test]
    fn bpa_matches_route_enumeration_on_small_instances() {
        for seed in 0..6 {
            let n = 4 + (seed as usize % 3);
            let inst = random_instance(n, 3, 40 + seed);
            let (sol, stats) = solve_bpa(&inst, &BnpConfig::default()).unwrap();
            let (veh, dist) = rea_optimum(&inst);
            assert!(stats.optimal, "seed {seed} did not prove optimality");
            assert_eq!(sol.vehicle_count, veh, "vehicles differ on seed {seed}");
            assert_eq!(sol.total_distance, dist, "distance differs on seed {seed}");
            sol.validate(&inst).unwrap();
        }
    }

    #[test]
    fn returned_route_count_is_even() {
        let inst = random_instance(6, 4, 99);
        let (sol, _) = solve_bpa(&inst, &BnpConfig::default()).unwrap();
        assert_eq!(sol.routes.len() % 2, 0);
    }

    #[test]
    fn heuristic_converges_and_bounds_hold() {
        let inst = random_instance(6, 3, 7);
        let (sol, stats) = root_heuristic(
            &inst,
            Duration::from_secs(480),
            Duration::from_secs(120),
            false,
            &BnpConfig::default(),
        )
        .unwrap();
        assert!(stats.converged, "small instance must converge in budget");
        sol.validate(&inst).unwrap();
        // Farley bounds never exceed the converged objective.
        if let Some(z) = stats.converged_z {
            for &f in &stats.farley_bounds {
                assert!(f <= z + 1e-6, "ratio bound {f} above converged {z}");
            }
        }
        // Unit objective counts routes.
        assert_eq!(stats.z_mip as usize, sol.routes.len());
        assert!(stats.gap >= 0.0);
    }

    #[test]
    fn heuristic_zero_budget_returns_seed_mip() {
        let inst = random_instance(4, 2, 13);
        let (sol, stats) = root_heuristic(
            &inst,
            Duration::ZERO,
            Duration::from_secs(30),
            false,
            &BnpConfig::default(),
        )
        .unwrap();
        sol.validate(&inst).unwrap();
        assert!(!stats.converged);
        let seeds = enumerate::enumerate_seeds(&inst);
        assert_eq!(stats.columns, seeds.len());
    }

    #[test]
    fn relaxed_heuristic_filters_unschedulable_columns() {
        let inst = random_instance(7, 3, 21);
        let (sol, stats) = root_heuristic(
            &inst,
            Duration::from_secs(480),
            Duration::from_secs(120),
            true,
            &BnpConfig::default(),
        )
        .unwrap();
        sol.validate(&inst).unwrap();
        // Whatever slipped into the pool unverified must not reach the plan.
        for r in &sol.routes {
            let route = Route::new(r.direction, r.driver, r.stops.clone(), &inst);
            assert!(schedule::feasible(&route, &inst).is_some());
        }
        assert!(stats.columns >= stats.infeasible_columns);
    }

    #[test]
    fn child_bounds_dominate_parent() {
        // Runs the solver on an instance known to branch and relies on the
        // internal max(parent, child) bound propagation; spot-check via the
        // root bound versus the final objective.
        let inst = random_instance(7, 3, 31);
        let (sol, stats) = solve_bpa(&inst, &BnpConfig::default()).unwrap();
        assert!(stats.root_bound <= sol.objective + 1e-6);
        assert!(stats.integrality_gap >= 0.0);
    }
}
