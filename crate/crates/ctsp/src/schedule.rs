//! Route validity and feasibility: decide whether a stop sequence admits
//! service times meeting every window and ride-duration limit, and compute
//! the schedule minimizing the driver's total route duration.
//!
//! Waiting is allowed at pickups only; drop-off times are forced by the
//! preceding stop. That makes every service time an offset from the most
//! recent pickup, so the whole problem reduces to difference constraints
//! over the pickup times. Bellman-Ford over that tiny graph (at most one
//! node per onboard rider plus a zero node) decides feasibility exactly in
//! integer arithmetic and yields the optimal duration; among equal-duration
//! schedules the route start is chosen as late as possible.

use crate::model::{Direction, Instance, Route};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    /// Service start per stop, parallel to the route's stop sequence.
    pub times: Vec<i64>,
    /// Driver duration: service start at the last stop minus the first.
    pub duration: i64,
    /// Ride duration per rider, `T_dest - (T_origin + s_origin)`.
    pub ride_durations: Vec<(usize, i64)>,
}

/// Structural validity: driver endpoints, pairing, precedence, capacity.
pub fn is_valid(route: &Route, inst: &Instance) -> bool {
    let n = inst.n();
    let dir = route.direction;
    let stops = &route.stops;
    if stops.len() < 2 || route.driver >= n {
        return false;
    }
    if stops[0] != route.driver || *stops.last().unwrap() != inst.dest(route.driver) {
        return false;
    }
    let mut seen = vec![false; 2 * n];
    let mut onboard = 0i64;
    for &v in stops {
        if v >= 2 * n || seen[v] {
            return false;
        }
        seen[v] = true;
        if v < n {
            onboard += inst.node(dir, v).demand;
            if onboard > inst.capacity as i64 {
                return false;
            }
        } else {
            if !seen[v - n] {
                return false;
            }
            onboard -= inst.node(dir, v - n).demand;
        }
    }
    // Every pickup must be delivered and the rider set must match.
    for &v in stops {
        if v < n && !seen[v + n] {
            return false;
        }
    }
    let mut riders: Vec<usize> = stops.iter().filter(|&&v| v < n).copied().collect();
    riders.sort_unstable();
    riders == route.riders
}

const INF: i64 = i64::MAX / 4;

/// Difference-constraint system over pickup service times. Node `q` is the
/// zero reference; nodes `0..q` are the pickups in visit order. An edge
/// `(from, to, w)` encodes `t_to - t_from <= w`.
struct Stn {
    q: usize,
    edges: Vec<(usize, usize, i64)>,
}

impl Stn {
    fn zero(&self) -> usize {
        self.q
    }

    /// Shortest-path distances from `src`, or None on a negative cycle.
    fn dists_from(&self, src: usize) -> Option<Vec<i64>> {
        let nn = self.q + 1;
        let mut d = vec![INF; nn];
        d[src] = 0;
        for round in 0..=nn {
            let mut changed = false;
            for &(u, v, w) in &self.edges {
                if d[u] < INF && d[u] + w < d[v] {
                    d[v] = d[u] + w;
                    changed = true;
                }
            }
            if !changed {
                return Some(d);
            }
            if round == nn {
                return None;
            }
        }
        Some(d)
    }

    fn consistent(&self) -> bool {
        // Run from a virtual source reaching all nodes: add zero-weight
        // edges implicitly by seeding all distances at 0.
        let nn = self.q + 1;
        let mut d = vec![0i64; nn];
        for round in 0..=nn {
            let mut changed = false;
            for &(u, v, w) in &self.edges {
                if d[u] + w < d[v] {
                    d[v] = d[u] + w;
                    changed = true;
                }
            }
            if !changed {
                return true;
            }
            if round == nn {
                return false;
            }
        }
        true
    }
}

struct SeqAnalysis {
    /// Pickup positions within the stop sequence.
    pickup_pos: Vec<usize>,
    /// Anchor (pickup index) and fixed offset from it, per position.
    anchor: Vec<usize>,
    offset: Vec<i64>,
    stn: Stn,
}

/// Build the constraint system for an arbitrary stop sequence. Destinations
/// must appear after their origins; otherwise any times are rejected. Ride
/// limits apply only to riders whose origin and destination both appear.
fn analyze(stops: &[usize], inst: &Instance, dir: Direction) -> Option<SeqAnalysis> {
    let n = inst.n();
    let mut pickup_pos = Vec::new();
    let mut anchor = vec![0usize; stops.len()];
    let mut offset = vec![0i64; stops.len()];
    // lo/hi bounds per pickup variable; chain gaps between consecutive pickups.
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    let mut gap = Vec::new();
    let mut cum = 0i64;

    for (pos, &v) in stops.iter().enumerate() {
        if pos > 0 {
            let prev = stops[pos - 1];
            cum += inst.node(dir, prev).service + inst.tau_nodes(dir, prev, v);
        }
        let loc = inst.node(dir, v);
        if v < n {
            if !pickup_pos.is_empty() {
                gap.push(cum);
            } else if pos != 0 {
                // A sequence must start at a pickup for times to anchor.
                return None;
            }
            anchor[pos] = pickup_pos.len();
            offset[pos] = 0;
            pickup_pos.push(pos);
            lo.push(loc.window_start);
            hi.push(loc.window_end);
            cum = 0;
        } else {
            if pickup_pos.is_empty() {
                return None;
            }
            let j = pickup_pos.len() - 1;
            anchor[pos] = j;
            offset[pos] = cum;
            // Destination deadline tightens the anchor's upper bound.
            let cap = loc.window_end - cum;
            if cap < hi[j] {
                hi[j] = cap;
            }
        }
    }

    let q = pickup_pos.len();
    let mut edges = Vec::new();
    for j in 0..q {
        if lo[j] > hi[j] {
            return None;
        }
        edges.push((q, j, hi[j])); // t_j <= hi
        edges.push((j, q, -lo[j])); // t_j >= lo
        if j + 1 < q {
            edges.push((j + 1, j, -gap[j])); // t_{j+1} >= t_j + gap
        }
    }
    // Ride limits for riders with both endpoints present.
    let mut dest_pos = vec![usize::MAX; n];
    for (pos, &v) in stops.iter().enumerate() {
        if v >= n {
            dest_pos[v - n] = pos;
        }
    }
    for (pos, &v) in stops.iter().enumerate() {
        if v >= n {
            continue;
        }
        let dp = dest_pos[v];
        if dp == usize::MAX {
            continue;
        }
        if dp < pos {
            return None;
        }
        let limit = inst.node(dir, v).ride_limit.unwrap_or(INF);
        let s_o = inst.node(dir, v).service;
        let (jo, jd, off_d) = (anchor[pos], anchor[dp], offset[dp]);
        debug_assert_eq!(offset[pos], 0);
        if jo == jd {
            if off_d - s_o > limit {
                return None;
            }
        } else {
            // t_jd - t_jo <= limit + s_o - off_d
            edges.push((jo, jd, limit + s_o - off_d));
        }
    }

    Some(SeqAnalysis {
        pickup_pos,
        anchor,
        offset,
        stn: Stn { q, edges },
    })
}

/// Whether an arbitrary stop sequence admits any feasible service times
/// (waits allowed at pickups, forced times at drop-offs). Used for the
/// four-stop elimination probes; no route-structure checks are made.
pub fn sequence_feasible(stops: &[usize], inst: &Instance, dir: Direction) -> bool {
    match analyze(stops, inst, dir) {
        Some(a) => a.stn.consistent(),
        None => false,
    }
}

/// Solve the route-scheduling problem: the minimum-duration schedule, or
/// None if the route is infeasible. Requires `is_valid(route)`.
pub fn feasible(route: &Route, inst: &Instance) -> Option<Schedule> {
    debug_assert!(is_valid(route, inst));
    schedule_sequence(&route.stops, inst, route.direction)
}

/// Scheduling core shared by `feasible` and the test oracles; accepts any
/// anchored sequence.
pub fn schedule_sequence(stops: &[usize], inst: &Instance, dir: Direction) -> Option<Schedule> {
    let a = analyze(stops, inst, dir)?;
    let mut stn = a.stn;
    if !stn.consistent() {
        return None;
    }
    let q = stn.q;
    let last_anchor = a.anchor[stops.len() - 1];
    let tail_off = a.offset[stops.len() - 1];

    // Minimal duration: maximize t_0 - t_last, i.e. shortest path last -> 0.
    let d_last = stn.dists_from(last_anchor)?;
    let min_span = -d_last[0];
    // Pin the span, then take the latest feasible start.
    stn.edges.push((0, last_anchor, min_span));
    let from_zero = stn.dists_from(stn.zero())?;
    let t0 = from_zero[0];
    let mut t = vec![0i64; q];
    t[0] = t0;
    stn.edges.push((stn.zero(), 0, t0));
    stn.edges.push((0, stn.zero(), -t0));
    // Remaining pickups: earliest feasible value given what is pinned.
    for j in 1..q {
        let to_zero = stn.dists_from(j)?;
        let tj = -to_zero[stn.zero()];
        t[j] = tj;
        stn.edges.push((stn.zero(), j, tj));
        stn.edges.push((j, stn.zero(), -tj));
    }

    let times: Vec<i64> = (0..stops.len())
        .map(|pos| t[a.anchor[pos]] + a.offset[pos])
        .collect();
    let duration = t[last_anchor] + tail_off - t[0];
    debug_assert_eq!(duration, *times.last().unwrap() - times[0]);
    debug_assert_eq!(duration, min_span + tail_off);

    let n = inst.n();
    let mut pos_of = vec![usize::MAX; 2 * n];
    for (pos, &v) in stops.iter().enumerate() {
        pos_of[v] = pos;
    }
    let mut ride_durations = Vec::new();
    for &p in &a.pickup_pos {
        let v = stops[p];
        let dp = pos_of[v + n];
        if dp != usize::MAX {
            let loc = inst.node(dir, v);
            let ride = times[dp] - (times[p] + loc.service);
            debug_assert!(loc.ride_limit.map_or(true, |l| ride <= l));
            ride_durations.push((v, ride));
        }
    }
    debug_assert!(check_schedule(stops, &times, inst, dir));
    Some(Schedule {
        times,
        duration,
        ride_durations,
    })
}

/// Direct check of the scheduling constraints for given service times.
pub fn check_schedule(stops: &[usize], times: &[i64], inst: &Instance, dir: Direction) -> bool {
    let n = inst.n();
    if stops.len() != times.len() {
        return false;
    }
    let mut origin_time = vec![None; n];
    for (pos, (&v, &tv)) in stops.iter().zip(times).enumerate() {
        let loc = inst.node(dir, v);
        if v < n {
            if tv < loc.window_start || tv > loc.window_end {
                return false;
            }
            origin_time[v] = Some(tv);
        } else if tv > loc.window_end {
            return false;
        }
        if pos > 0 {
            let prev = stops[pos - 1];
            let reach =
                times[pos - 1] + inst.node(dir, prev).service + inst.tau_nodes(dir, prev, v);
            if v < n {
                if tv < reach {
                    return false;
                }
            } else if tv != reach {
                return false;
            }
        }
        if v >= n {
            let o = v - n;
            let oloc = inst.node(dir, o);
            match origin_time[o] {
                Some(to) => {
                    if let Some(l) = oloc.ride_limit {
                        if tv - (to + oloc.service) > l {
                            return false;
                        }
                    }
                }
                None => return false,
            }
        }
    }
    true
}
