//! Exhaustive route enumeration: for every trip combination of size up to the
//! vehicle capacity and every candidate driver, keep the minimum-distance
//! feasible route. Ride-duration limits keep routes short (pickups, a drive,
//! drop-offs), so enumerating combinations up to K riders is complete.

use crate::model::{Direction, Instance, Route};
use crate::schedule;
use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Default)]
pub struct PoolStats {
    /// Number of stored routes per rider count.
    pub per_k: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone)]
pub struct RoutePool {
    pub routes: Vec<Route>,
    pub stats: PoolStats,
}

impl RoutePool {
    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn max_distance(&self) -> i64 {
        self.routes.iter().map(|r| r.distance).max().unwrap_or(0)
    }

    pub fn merge(mut self, other: RoutePool) -> RoutePool {
        for (k, v) in other.stats.per_k {
            *self.stats.per_k.entry(k).or_insert(0) += v;
        }
        self.routes.extend(other.routes);
        self
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EnumerateOptions {
    /// Cap on riders per route; defaults to the instance capacity.
    pub max_riders: Option<usize>,
    /// Keep every feasible route instead of the per-(combination, driver)
    /// distance minimum. Diagnostics only.
    pub keep_all_feasible: bool,
}

/// All stop sequences that form a valid route over trip set `q` with the
/// given driver, in lexicographic order. Purely structural; no times.
pub fn valid_orderings(q: &[usize], driver: usize, inst: &Instance) -> Vec<Vec<usize>> {
    assert!(q.contains(&driver));
    let n = inst.n();
    let mut seqs = Vec::new();
    let mut stack = vec![driver];
    let mut onboard: Vec<usize> = vec![driver];
    fn rec(
        q: &[usize],
        driver: usize,
        n: usize,
        cap: usize,
        stack: &mut Vec<usize>,
        onboard: &mut Vec<usize>,
        seqs: &mut Vec<Vec<usize>>,
    ) {
        if stack.len() == 2 * q.len() - 1 {
            // Only the driver's destination can remain.
            if onboard.len() == 1 && onboard[0] == driver {
                let mut done = stack.clone();
                done.push(n + driver);
                seqs.push(done);
            }
            return;
        }
        // Candidate next stops: unvisited origins, then destinations of
        // onboard riders (the driver's is reserved for the final position).
        let mut candidates: Vec<usize> = Vec::new();
        for &c in q {
            if c != driver && !stack.contains(&c) {
                candidates.push(c);
            }
        }
        for &c in onboard.iter() {
            if c != driver {
                candidates.push(n + c);
            }
        }
        candidates.sort_unstable();
        for v in candidates {
            if v < n {
                if onboard.len() + 1 > cap {
                    continue;
                }
                stack.push(v);
                onboard.push(v);
                rec(q, driver, n, cap, stack, onboard, seqs);
                onboard.pop();
                stack.pop();
            } else {
                let rider = v - n;
                let pos = onboard.iter().position(|&c| c == rider).unwrap();
                onboard.remove(pos);
                stack.push(v);
                rec(q, driver, n, cap, stack, onboard, seqs);
                stack.pop();
                onboard.insert(pos, rider);
            }
        }
    }
    rec(
        q,
        driver,
        n,
        inst.capacity,
        &mut stack,
        &mut onboard,
        &mut seqs,
    );
    seqs.sort();
    seqs
}

struct Dfs<'a> {
    inst: &'a Instance,
    dir: Direction,
    driver: usize,
    q: Vec<usize>,
    best: Option<(i64, Vec<usize>)>,
    all: Vec<Route>,
    keep_all: bool,
}

impl<'a> Dfs<'a> {
    /// Depth-first extension with pruning on earliest service time, wait-free
    /// ride durations, capacity, and current best distance. Time and ride
    /// values are lower bounds, so pruning never removes a feasible
    /// completion; completions are re-checked with the full scheduler.
    fn search(&mut self) {
        let start = self.driver;
        let loc = self.inst.node(self.dir, start);
        let mut stack = vec![start];
        let mut onboard = vec![start];
        let mut times = vec![loc.window_start];
        let mut wfd = vec![(start, 0i64)];
        self.extend(&mut stack, &mut onboard, &mut times, &mut wfd, 0);
    }

    fn extend(
        &mut self,
        stack: &mut Vec<usize>,
        onboard: &mut Vec<usize>,
        times: &mut Vec<i64>,
        wfd: &mut Vec<(usize, i64)>,
        dist: i64,
    ) {
        let inst = self.inst;
        let n = inst.n();
        let dir = self.dir;
        let last = *stack.last().unwrap();
        if stack.len() == 2 * self.q.len() - 1 {
            if !(onboard.len() == 1 && onboard[0] == self.driver) {
                return;
            }
            let v = n + self.driver;
            let total = dist + inst.delta_nodes(dir, last, v);
            if !self.keep_all {
                if let Some((best, _)) = &self.best {
                    if total > *best {
                        return;
                    }
                }
            }
            let mut done = stack.clone();
            done.push(v);
            let route = Route::new(dir, self.driver, done, inst);
            if schedule::feasible(&route, inst).is_some() {
                if self.keep_all {
                    self.all.push(route);
                } else {
                    let better = match &self.best {
                        None => true,
                        Some((best, seq)) => {
                            total < *best || (total == *best && route.stops < *seq)
                        }
                    };
                    if better {
                        self.best = Some((total, route.stops));
                    }
                }
            }
            return;
        }
        let mut candidates: Vec<usize> = Vec::new();
        for &c in &self.q {
            if c != self.driver && !stack.contains(&c) {
                candidates.push(c);
            }
        }
        for &c in onboard.iter() {
            if c != self.driver {
                candidates.push(n + c);
            }
        }
        candidates.sort_unstable();
        for v in candidates {
            let is_pickup = v < n;
            if is_pickup && onboard.len() + 1 > inst.capacity {
                continue;
            }
            let leg_t = inst.node(dir, last).service + inst.tau_nodes(dir, last, v);
            let loc = inst.node(dir, v);
            let t_arrive = *times.last().unwrap() + leg_t;
            let t_serve = if is_pickup {
                t_arrive.max(loc.window_start)
            } else {
                t_arrive
            };
            if t_serve > loc.window_end {
                continue;
            }
            let dist2 = dist + inst.delta_nodes(dir, last, v);
            if !self.keep_all {
                if let Some((best, _)) = &self.best {
                    if dist2 > *best {
                        continue;
                    }
                }
            }
            // Wait-free ride durations grow by the leg for everyone onboard.
            let mut ok = true;
            for &(rider, w) in wfd.iter() {
                let o = inst.node(dir, rider);
                if let Some(limit) = o.ride_limit {
                    if w + leg_t - o.service > limit {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            let saved_wfd = wfd.clone();
            for e in wfd.iter_mut() {
                e.1 += leg_t;
            }
            stack.push(v);
            times.push(t_serve);
            if is_pickup {
                onboard.push(v);
                wfd.push((v, 0));
                self.extend(stack, onboard, times, wfd, dist2);
                onboard.pop();
            } else {
                let rider = v - n;
                let pos = onboard.iter().position(|&c| c == rider).unwrap();
                onboard.remove(pos);
                let wpos = wfd.iter().position(|&(c, _)| c == rider).unwrap();
                wfd.remove(wpos);
                self.extend(stack, onboard, times, wfd, dist2);
                onboard.insert(pos, rider);
            }
            times.pop();
            stack.pop();
            *wfd = saved_wfd;
        }
    }
}

/// Minimum-distance feasible route for a trip combination and driver, if any.
pub fn best_route_for(
    inst: &Instance,
    dir: Direction,
    q: &[usize],
    driver: usize,
) -> Option<Route> {
    let mut dfs = Dfs {
        inst,
        dir,
        driver,
        q: q.to_vec(),
        best: None,
        all: Vec::new(),
        keep_all: false,
    };
    dfs.search();
    dfs.best
        .map(|(_, stops)| Route::new(dir, driver, stops, inst))
}

/// Enumerate one direction's route set.
pub fn enumerate_routes(inst: &Instance, dir: Direction, opts: &EnumerateOptions) -> RoutePool {
    let n = inst.n();
    let kmax = opts.max_riders.unwrap_or(inst.capacity).min(n);
    let mut routes: Vec<Route> = Vec::new();

    // Singles first.
    for c in 0..n {
        let r = Route::new(dir, c, vec![c, inst.dest(c)], inst);
        debug_assert!(schedule::feasible(&r, inst).is_some());
        routes.push(r);
    }

    for k in 2..=kmax {
        let combos: Vec<Vec<usize>> = (0..n).combinations(k).collect();
        let found: Vec<Vec<Route>> = combos
            .par_iter()
            .map(|q| {
                let mut out = Vec::new();
                for &driver in q {
                    if opts.keep_all_feasible {
                        let mut dfs = Dfs {
                            inst,
                            dir,
                            driver,
                            q: q.clone(),
                            best: None,
                            all: Vec::new(),
                            keep_all: true,
                        };
                        dfs.search();
                        out.extend(dfs.all);
                    } else if let Some(r) = best_route_for(inst, dir, q, driver) {
                        out.push(r);
                    }
                }
                out
            })
            .collect();
        for group in found {
            routes.extend(group);
        }
    }

    let mut stats = PoolStats::default();
    for r in &routes {
        *stats.per_k.entry(r.riders.len()).or_insert(0) += 1;
    }
    RoutePool { routes, stats }
}

/// Enumerate both directions.
pub fn enumerate_all(inst: &Instance, opts: &EnumerateOptions) -> RoutePool {
    let inbound = enumerate_routes(inst, Direction::Inbound, opts);
    let outbound = enumerate_routes(inst, Direction::Outbound, opts);
    inbound.merge(outbound)
}

/// The column-generation seed pool: all singles plus all feasible two-trip
/// routes.
pub fn enumerate_seeds(inst: &Instance) -> RoutePool {
    let opts = EnumerateOptions {
        max_riders: Some(2.min(inst.capacity)),
        keep_all_feasible: false,
    };
    enumerate_all(inst, &opts)
}

#[derive(Serialize)]
struct RouteLine<'a> {
    direction: Direction,
    driver: usize,
    stops: &'a [usize],
    riders: &'a [usize],
    distance: i64,
}

/// One route per line as JSON.
pub fn dump_pool<W: std::io::Write>(pool: &RoutePool, mut w: W) -> std::io::Result<()> {
    for r in &pool.routes {
        let line = RouteLine {
            direction: r.direction,
            driver: r.driver,
            stops: &r.stops,
            riders: &r.riders,
            distance: r.distance,
        };
        serde_json::to_writer(&mut w, &line)?;
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_instance_with_model, Commuter, EuclideanTravel, Params, Trip};
    use std::collections::BTreeMap;

    pub(crate) fn line_instance(n: usize, capacity: usize) -> Instance {
        // Homes spread on a line, shared workplace at the end; staggered
        // desired times so some shares are feasible and others are not.
        let mut sites: Vec<[f64; 2]> = (0..n).map(|i| [300.0 * i as f64, 0.0]).collect();
        let work = [8000.0, 500.0];
        sites.push(work);
        let commuters: Vec<Commuter> = (0..n)
            .map(|id| Commuter {
                id,
                home: sites[id],
                inbound: Trip {
                    origin: id,
                    destination: n,
                    desired_departure: 27000,
                    desired_arrival: 28800 + 300 * id as i64,
                    direction: Direction::Inbound,
                },
                outbound: Trip {
                    origin: n,
                    destination: id,
                    desired_departure: 61200 + 240 * id as i64,
                    desired_arrival: 63000,
                    direction: Direction::Outbound,
                },
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

    #[test]
    fn single_trip_pool() {
        let inst = line_instance(1, 4);
        let pool = enumerate_routes(&inst, Direction::Inbound, &EnumerateOptions::default());
        assert_eq!(pool.len(), 1);
        assert_eq!(pool.routes[0].stops, vec![0, 1]);
    }

    #[test]
    fn two_identical_trips_share_both_ways() {
        let inst = line_instance(2, 2);
        let pool = enumerate_routes(&inst, Direction::Inbound, &EnumerateOptions::default());
        // 2 singles + shared routes. Verify the shared count against the
        // direct interleaving check.
        let mut expected_shared = 0;
        for driver in 0..2 {
            let orders = valid_orderings(&[0, 1], driver, &inst);
            let feasible_any = orders.iter().any(|stops| {
                let r = Route::new(Direction::Inbound, driver, stops.clone(), &inst);
                schedule::feasible(&r, &inst).is_some()
            });
            if feasible_any {
                expected_shared += 1;
            }
        }
        assert_eq!(pool.len(), 2 + expected_shared);
        assert!(expected_shared >= 1, "line instance should allow sharing");
    }

    /// Permutation-filter oracle: every arrangement of the 2k stops, kept if
    /// structurally valid.
    fn orderings_oracle(q: &[usize], driver: usize, inst: &Instance) -> Vec<Vec<usize>> {
        let n = inst.n();
        let mut stops: Vec<usize> = q.iter().flat_map(|&c| [c, n + c]).collect();
        stops.sort_unstable();
        let k = q.len();
        let mut out = Vec::new();
        for perm in stops.into_iter().permutations(2 * k) {
            let r = Route::new(Direction::Inbound, driver, perm.clone(), inst);
            if crate::schedule::is_valid(&r, inst) {
                out.push(perm);
            }
        }
        out.sort();
        out
    }

    #[test]
    fn orderings_match_permutation_filter() {
        let inst = line_instance(4, 4);
        // k = 1
        assert_eq!(
            valid_orderings(&[2], 2, &inst),
            vec![vec![2, 6]],
            "single trip has exactly one sequence"
        );
        // k = 2..4, every driver
        for k in 2..=4 {
            let q: Vec<usize> = (0..k).collect();
            for &driver in &q {
                let got = valid_orderings(&q, driver, &inst);
                let want = orderings_oracle(&q, driver, &inst);
                assert_eq!(got, want, "k={k} driver={driver}");
            }
        }
    }

    #[test]
    fn capacity_prunes_orderings() {
        let inst = line_instance(3, 2);
        let q = vec![0, 1, 2];
        let got = valid_orderings(&q, 0, &inst);
        let want = orderings_oracle(&q, 0, &inst);
        assert_eq!(got, want);
        for seq in &got {
            let mut load = 0i64;
            let mut peak = 0i64;
            for &v in seq {
                if v < 3 {
                    load += 1;
                } else {
                    load -= 1;
                }
                peak = peak.max(load);
            }
            assert!(peak <= 2);
        }
    }

    /// Brute-force pool: all subsets up to K, all stop permutations, validity
    /// plus scheduling, per-(set, driver) minimum distance.
    fn pool_oracle(inst: &Instance, dir: Direction) -> BTreeMap<(usize, Vec<usize>), i64> {
        let n = inst.n();
        let mut best: BTreeMap<(usize, Vec<usize>), i64> = BTreeMap::new();
        for k in 1..=inst.capacity.min(n) {
            for q in (0..n).combinations(k) {
                let stops_all: Vec<usize> = q.iter().flat_map(|&c| [c, n + c]).collect();
                for perm in stops_all.iter().copied().permutations(2 * k) {
                    let driver = perm[0];
                    if driver >= n {
                        continue;
                    }
                    let r = Route::new(dir, driver, perm, inst);
                    if !crate::schedule::is_valid(&r, inst) {
                        continue;
                    }
                    if crate::schedule::feasible(&r, inst).is_none() {
                        continue;
                    }
                    let key = (driver, q.clone());
                    match best.get(&key) {
                        Some(&d) if d <= r.distance => {}
                        _ => {
                            best.insert(key, r.distance);
                        }
                    }
                }
            }
        }
        best
    }

    #[test]
    fn pool_matches_brute_force_oracle() {
        for n in [3usize, 5] {
            for cap in [2usize, 3] {
                let inst = line_instance(n, cap);
                for dir in Direction::BOTH {
                    let pool = enumerate_routes(&inst, dir, &EnumerateOptions::default());
                    let mut got: BTreeMap<(usize, Vec<usize>), i64> = BTreeMap::new();
                    for r in &pool.routes {
                        let prev = got.insert((r.driver, r.riders.clone()), r.distance);
                        assert!(prev.is_none(), "duplicate key in pool");
                        // Soundness: every pool route is valid and feasible.
                        assert!(crate::schedule::is_valid(r, &inst));
                        assert!(crate::schedule::feasible(r, &inst).is_some());
                    }
                    let want = pool_oracle(&inst, dir);
                    assert_eq!(got, want, "n={n} cap={cap} dir={dir}");
                }
            }
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let inst = line_instance(6, 3);
        let a = enumerate_all(&inst, &EnumerateOptions::default());
        let b = enumerate_all(&inst, &EnumerateOptions::default());
        assert_eq!(a.routes, b.routes);
    }

    #[test]
    fn keep_all_feasible_is_superset() {
        let inst = line_instance(4, 3);
        let min_pool = enumerate_routes(&inst, Direction::Inbound, &EnumerateOptions::default());
        let all_pool = enumerate_routes(
            &inst,
            Direction::Inbound,
            &EnumerateOptions {
                keep_all_feasible: true,
                max_riders: None,
            },
        );
        assert!(all_pool.len() >= min_pool.len());
        for r in &min_pool.routes {
            let same_slot_exists = all_pool
                .routes
                .iter()
                .any(|a| a.driver == r.driver && a.riders == r.riders && a.distance == r.distance);
            assert!(same_slot_exists, "minimum route missing from full dump");
        }
    }

    #[test]
    fn capacity_one_keeps_only_singles() {
        let inst = line_instance(2, 1);
        let pool = enumerate_all(&inst, &EnumerateOptions::default());
        assert_eq!(pool.len(), 4);
        assert_eq!(pool.stats.per_k.get(&1), Some(&4));
    }
}
