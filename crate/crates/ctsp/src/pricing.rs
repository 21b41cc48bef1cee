//! Pricing subproblem: per-driver shortest feasible route under dual-adjusted
//! edge costs, solved with a label-setting dynamic program.
//!
//! The labels relax wait times: the ride-duration resource accumulates only
//! service and travel time, a lower bound on the true ride duration. The
//! cheapest complete path is therefore a candidate that still needs one full
//! scheduling check; candidates that fail it are recorded as forbidden paths
//! (an extra label resource counting matched prefix edges) and the search
//! reruns until a schedulable candidate emerges.

use crate::master::{reduced_cost, Duals};
use crate::model::{Direction, Instance, Location, Route};
use crate::schedule;
use smallvec::SmallVec;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

#[derive(Debug, Clone, Copy)]
pub struct PricingConfig {
    pub use_dominance: bool,
    pub use_post_feasibility: bool,
    pub use_edge_elimination: bool,
    /// Price with unit column costs (fleet-size-only objective).
    pub unit_costs: bool,
}

impl Default for PricingConfig {
    fn default() -> Self {
        PricingConfig {
            use_dominance: true,
            use_post_feasibility: true,
            use_edge_elimination: true,
            unit_costs: false,
        }
    }
}

/// Static per-(driver, direction) graph structure: tightened windows and the
/// surviving edge set. Costs are layered on per column-generation iteration.
#[derive(Debug, Clone)]
pub struct GraphSkeleton {
    pub driver: usize,
    pub direction: Direction,
    pub n: usize,
    pub nodes: Vec<Location>,
    /// Adjacency after elimination and branch-fixing removals, 2n x 2n.
    pub allowed: Vec<bool>,
    pub out: Vec<Vec<u16>>,
}

/// Apply the four window-tightening sweeps in order. Each sweep runs to
/// completion before the next starts, and later sweeps see earlier updates.
///
/// Drop-off times carry no lower-bound constraint (arrivals are forced and
/// only deadlines bind), so a destination's stated window start is not a
/// valid earliest-service value. It is discarded here and re-derived from
/// the rider's origin window by the final sweep.
pub fn tighten_windows(nodes: &mut [Location], driver: usize, inst: &Instance) {
    let n = inst.n();
    let sink = n + driver;
    let tau =
        |nodes: &[Location], u: usize, v: usize| -> i64 { inst.tau[nodes[u].site][nodes[v].site] };
    for node in nodes.iter_mut().skip(n) {
        node.window_start = i64::MIN / 4;
    }
    for i in n..2 * n {
        if i == sink {
            continue;
        }
        let cap = nodes[sink].window_end - nodes[i].service - tau(nodes, i, sink);
        if cap < nodes[i].window_end {
            nodes[i].window_end = cap;
        }
    }
    for i in 0..n {
        if i == driver {
            continue;
        }
        let cap = nodes[n + i].window_end - nodes[i].service - tau(nodes, i, n + i);
        if cap < nodes[i].window_end {
            nodes[i].window_end = cap;
        }
    }
    for i in 0..n {
        if i == driver {
            continue;
        }
        let floor = nodes[driver].window_start + nodes[driver].service + tau(nodes, driver, i);
        if floor > nodes[i].window_start {
            nodes[i].window_start = floor;
        }
    }
    for i in n..2 * n {
        let floor = nodes[i - n].window_start + nodes[i - n].service + tau(nodes, i - n, i);
        if floor > nodes[i].window_start {
            nodes[i].window_start = floor;
        }
    }
}

/// Drop edges that no feasible route for this driver can use.
pub fn eliminate_edges(
    allowed: &mut [bool],
    nodes: &[Location],
    driver: usize,
    inst: &Instance,
    dir: Direction,
) {
    let n = inst.n();
    let sink = n + driver;
    let k = inst.capacity as i64;
    let tau = |u: usize, v: usize| -> i64 { inst.tau[nodes[u].site][nodes[v].site] };
    let kill = |allowed: &mut [bool], u: usize, v: usize| {
        allowed[u * 2 * n + v] = false;
    };

    // (a) driver structure: nothing re-enters the source or leaves the sink,
    // no foreign destination straight from the source, no origin just before
    // the sink.
    for x in 0..2 * n {
        kill(allowed, x, driver);
        kill(allowed, sink, x);
    }
    for i in 0..n {
        if i == driver {
            continue;
        }
        kill(allowed, driver, n + i);
        kill(allowed, i, sink);
    }
    // (b) pairing/precedence back-edges.
    for i in 0..n {
        kill(allowed, n + i, i);
    }
    // (c) capacity pairs.
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if nodes[i].demand + nodes[j].demand > k {
                kill(allowed, i, j);
                kill(allowed, j, i);
                kill(allowed, i, n + j);
                kill(allowed, j, n + i);
                kill(allowed, n + i, n + j);
                kill(allowed, n + j, n + i);
            }
        }
    }
    // (d) window-incompatible edges.
    for u in 0..2 * n {
        for v in 0..2 * n {
            if u == v || !allowed[u * 2 * n + v] {
                continue;
            }
            if nodes[u].window_start + nodes[u].service + tau(u, v) > nodes[v].window_end {
                kill(allowed, u, v);
            }
        }
    }
    // (e) ride-limit triangles: serving j between i and its drop busts L_i.
    for i in 0..n {
        let limit = nodes[i].ride_limit.unwrap_or(i64::MAX);
        for j in 0..2 * n {
            if j == i || j == n + i {
                continue;
            }
            if tau(i, j) + nodes[j].service + tau(j, n + i) > limit {
                kill(allowed, i, j);
                kill(allowed, j, n + i);
            }
        }
    }
    // (f) four-stop scheduling probes over rider pairs.
    let feas = |stops: &[usize]| schedule_probe(stops, nodes, inst, dir);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if allowed[i * 2 * n + (n + j)] && !feas(&[j, i, n + j, n + i]) {
                kill(allowed, i, n + j);
            }
            if allowed[(n + i) * 2 * n + j] && !feas(&[i, n + i, j, n + j]) {
                kill(allowed, n + i, j);
            }
            if allowed[i * 2 * n + j]
                && !feas(&[i, j, n + i, n + j])
                && !feas(&[i, j, n + j, n + i])
            {
                kill(allowed, i, j);
            }
            if allowed[(n + i) * 2 * n + (n + j)]
                && !feas(&[i, j, n + i, n + j])
                && !feas(&[j, i, n + i, n + j])
            {
                kill(allowed, n + i, n + j);
            }
        }
    }
}

/// Full schedulability (waits included) of a probe sequence under the
/// skeleton's (possibly tightened) windows.
fn schedule_probe(stops: &[usize], nodes: &[Location], inst: &Instance, _dir: Direction) -> bool {
    // Rebuild a tiny window table for the probe and reuse the scheduling
    // difference-constraint machinery via direct simulation of its
    // constraints: waits at pickups, equalities at drop-offs.
    let n = nodes.len() / 2;
    let tau = |u: usize, v: usize| -> i64 { inst.tau[nodes[u].site][nodes[v].site] };
    // Pickup anchor times are the only free variables.
    // Constraint system identical to schedule::analyze but on `nodes`.
    #[derive(Clone, Copy)]
    struct Pick {
        lo: i64,
        hi: i64,
    }
    let mut picks: Vec<Pick> = Vec::new();
    let mut gap: Vec<i64> = Vec::new();
    let mut anchor = vec![0usize; stops.len()];
    let mut offset = vec![0i64; stops.len()];
    let mut cum = 0i64;
    for (pos, &v) in stops.iter().enumerate() {
        if pos > 0 {
            let prev = stops[pos - 1];
            cum += nodes[prev].service + tau(prev, v);
        }
        if v < n {
            if picks.is_empty() && pos != 0 {
                return false;
            }
            if !picks.is_empty() {
                gap.push(cum);
            }
            anchor[pos] = picks.len();
            offset[pos] = 0;
            picks.push(Pick {
                lo: nodes[v].window_start,
                hi: nodes[v].window_end,
            });
            cum = 0;
        } else {
            if picks.is_empty() {
                return false;
            }
            anchor[pos] = picks.len() - 1;
            offset[pos] = cum;
            let j = picks.len() - 1;
            picks[j].hi = picks[j].hi.min(nodes[v].window_end - cum);
        }
    }
    let q = picks.len();
    let mut edges: Vec<(usize, usize, i64)> = Vec::new();
    for (j, p) in picks.iter().enumerate() {
        if p.lo > p.hi {
            return false;
        }
        edges.push((q, j, p.hi));
        edges.push((j, q, -p.lo));
        if j + 1 < q {
            edges.push((j + 1, j, -gap[j]));
        }
    }
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
            return false;
        }
        let limit = nodes[v].ride_limit.unwrap_or(i64::MAX / 4);
        let (jo, jd, off_d) = (anchor[pos], anchor[dp], offset[dp]);
        if jo == jd {
            if off_d - nodes[v].service > limit {
                return false;
            }
        } else {
            edges.push((jo, jd, limit + nodes[v].service - off_d));
        }
    }
    // Bellman-Ford negative-cycle test.
    let nn = q + 1;
    let mut d = vec![0i64; nn];
    for round in 0..=nn {
        let mut changed = false;
        for &(u, v, w) in &edges {
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

impl GraphSkeleton {
    pub fn build(
        inst: &Instance,
        driver: usize,
        dir: Direction,
        cfg: &PricingConfig,
        removed_edges: &HashSet<(usize, usize)>,
    ) -> GraphSkeleton {
        let n = inst.n();
        let mut nodes = inst.nodes(dir).to_vec();
        tighten_windows(&mut nodes, driver, inst);
        let mut allowed = vec![true; 4 * n * n];
        for u in 0..2 * n {
            allowed[u * 2 * n + u] = false;
        }
        if cfg.use_edge_elimination {
            eliminate_edges(&mut allowed, &nodes, driver, inst, dir);
        } else {
            // Structural minimum even with elimination off: the source has
            // no in-edges and the sink no out-edges.
            let sink = n + driver;
            for x in 0..2 * n {
                allowed[x * 2 * n + driver] = false;
                allowed[sink * 2 * n + x] = false;
            }
        }
        for &(u, v) in removed_edges {
            allowed[u * 2 * n + v] = false;
        }
        let out = (0..2 * n)
            .map(|u| {
                (0..2 * n)
                    .filter(|&v| allowed[u * 2 * n + v])
                    .map(|v| v as u16)
                    .collect()
            })
            .collect();
        GraphSkeleton {
            driver,
            direction: dir,
            n,
            nodes,
            allowed,
            out,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.allowed.iter().filter(|&&a| a).count()
    }

    /// Dual-adjusted edge costs. The cost of any source-to-sink path equals
    /// the reduced cost of the corresponding column.
    pub fn edge_costs(
        &self,
        inst: &Instance,
        duals: &Duals,
        cbar: i64,
        unit_costs: bool,
    ) -> Vec<f64> {
        let n = self.n;
        let scale = 1.0 - duals.nu;
        let pi = match self.direction {
            Direction::Inbound => &duals.pi_in,
            Direction::Outbound => &duals.pi_out,
        };
        let fixed = if unit_costs { 1.0 } else { cbar as f64 };
        let mut cost = vec![0.0f64; 4 * n * n];
        for u in 0..2 * n {
            for v in 0..2 * n {
                if !self.allowed[u * 2 * n + v] {
                    continue;
                }
                let dist = if unit_costs {
                    0.0
                } else {
                    inst.delta[self.nodes[u].site][self.nodes[v].site] as f64
                };
                let mut c = dist * scale;
                if u < n {
                    c -= pi[u];
                }
                if u == self.driver {
                    c += fixed * scale - duals.mu;
                    match self.direction {
                        Direction::Inbound => {
                            c -= duals.sigma[self.driver];
                            c -= duals.phi[self.driver];
                        }
                        Direction::Outbound => {
                            c += duals.sigma[self.driver];
                        }
                    }
                }
                cost[u * 2 * n + v] = c;
            }
        }
        cost
    }
}

#[derive(Debug, Clone)]
struct Label {
    cost: f64,
    time: i64,
    onboard: u128,
    picked: u128,
    load: i64,
    /// Service-plus-travel accumulation per picked rider; frozen while the
    /// rider is off the vehicle.
    wfd: SmallVec<[(u16, i64); 8]>,
    /// Matched forbidden-path prefix lengths.
    hits: SmallVec<[u16; 4]>,
    parent: u32,
    node: u16,
    dead: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LabelStats {
    pub generated: u64,
    pub dominated: u64,
    pub post_pruned: u64,
    pub forbidden_blocked: u64,
}

/// Label domination: weakly better on cost, time, onboard set, the onboard
/// ride accumulations, and every forbidden-path counter.
pub fn dominates(a: &LabelView, b: &LabelView) -> bool {
    if a.cost > b.cost || a.time > b.time {
        return false;
    }
    if a.onboard & !b.onboard != 0 {
        return false;
    }
    for &(rider, wa) in a.wfd {
        if a.onboard & (1u128 << rider) == 0 {
            continue;
        }
        let wb = b
            .wfd
            .iter()
            .find(|&&(r, _)| r == rider)
            .map(|&(_, w)| w)
            .expect("onboard rider missing from superset label");
        if wa > wb {
            return false;
        }
    }
    for (ha, hb) in a.hits.iter().zip(b.hits.iter()) {
        if ha > hb {
            return false;
        }
    }
    true
}

/// Borrowed view of the resources compared by dominance.
pub struct LabelView<'a> {
    pub cost: f64,
    pub time: i64,
    pub onboard: u128,
    pub wfd: &'a [(u16, i64)],
    pub hits: &'a [u16],
}

impl Label {
    fn view(&self) -> LabelView<'_> {
        LabelView {
            cost: self.cost,
            time: self.time,
            onboard: self.onboard,
            wfd: &self.wfd,
            hits: &self.hits,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PricedRoute {
    pub route: Route,
    pub reduced_cost: f64,
}

pub struct RcspOutcome {
    pub path: Vec<usize>,
    pub cost: f64,
    pub stats: LabelStats,
}

/// Wait-free simulation of delivering `probe` riders straight to their
/// destinations and then the sink. Checks deadlines plus the ride limits of
/// the delivered riders and the driver only; other onboard riders may leave
/// the vehicle earlier in a real completion, so their accumulations are not
/// valid lower bounds along this probe.
fn probe_feasible(
    skel: &GraphSkeleton,
    inst: &Instance,
    from: usize,
    time: i64,
    wfd: &[(u16, i64)],
    probe: &[usize],
) -> bool {
    let nodes = &skel.nodes;
    let tau = |u: usize, v: usize| -> i64 { inst.tau[nodes[u].site][nodes[v].site] };
    let n = skel.n;
    let mut t = time;
    let mut u = from;
    let tracked: Vec<usize> = probe
        .iter()
        .filter(|&&v| v != n + skel.driver)
        .map(|&v| v - n)
        .chain(std::iter::once(skel.driver))
        .collect();
    let mut acc: Vec<(usize, i64)> = tracked
        .iter()
        .map(|&r| {
            let w = wfd
                .iter()
                .find(|&&(rr, _)| rr as usize == r)
                .map(|&(_, w)| w)
                .unwrap_or(0);
            (r, w)
        })
        .collect();
    let mut delivered: Vec<usize> = Vec::new();
    for &v in probe {
        let leg = nodes[u].service + tau(u, v);
        t += leg;
        if t > nodes[v].window_end {
            return false;
        }
        for &mut (r, ref mut w) in acc.iter_mut() {
            if delivered.contains(&r) {
                continue;
            }
            *w += leg;
            let o = &nodes[r];
            if let Some(limit) = o.ride_limit {
                if *w - o.service > limit {
                    return false;
                }
            }
        }
        if v >= n {
            delivered.push(v - n);
        }
        u = v;
    }
    true
}

fn post_feasible(skel: &GraphSkeleton, inst: &Instance, lab: &Label) -> bool {
    let n = skel.n;
    let sink = n + skel.driver;
    let mut others: SmallVec<[usize; 8]> = SmallVec::new();
    for r in 0..n {
        if r != skel.driver && lab.onboard & (1u128 << r) != 0 {
            others.push(r);
        }
    }
    for &i in &others {
        if !probe_feasible(
            skel,
            inst,
            lab.node as usize,
            lab.time,
            &lab.wfd,
            &[n + i, sink],
        ) {
            return false;
        }
    }
    if others.len() >= 2 {
        for a in 0..others.len() {
            for b in a + 1..others.len() {
                let (i, j) = (others[a], others[b]);
                let ij = probe_feasible(
                    skel,
                    inst,
                    lab.node as usize,
                    lab.time,
                    &lab.wfd,
                    &[n + i, n + j, sink],
                );
                let ji = probe_feasible(
                    skel,
                    inst,
                    lab.node as usize,
                    lab.time,
                    &lab.wfd,
                    &[n + j, n + i, sink],
                );
                if !ij && !ji {
                    return false;
                }
            }
        }
    }
    true
}

/// Literal prefix-match predicate over the parent chain: some suffix of the
/// extended path ends with `(l, j)` and equals a prefix of `f`.
#[cfg(debug_assertions)]
fn consecutive_matches(arena: &[Label], lab: &Label, j: usize, f: &[usize]) -> usize {
    // Collect the extended path's edges.
    let mut nodes = vec![j, lab.node as usize];
    let mut p = lab.parent;
    while p != u32::MAX {
        nodes.push(arena[p as usize].node as usize);
        p = arena[p as usize].parent;
    }
    nodes.reverse();
    let edges: Vec<(usize, usize)> = nodes.windows(2).map(|w| (w[0], w[1])).collect();
    let fedges: Vec<(usize, usize)> = f.windows(2).map(|w| (w[0], w[1])).collect();
    let mut best = 0;
    for m in 1..=edges.len().min(fedges.len()) {
        if edges[edges.len() - m..] == fedges[..m] {
            best = m;
        }
    }
    best
}

/// One run of the label-setting search. Returns the cheapest complete
/// candidate path (wait times still unverified).
pub fn rcsp_min_path(
    skel: &GraphSkeleton,
    costs: &[f64],
    forbidden: &[Vec<usize>],
    inst: &Instance,
    cfg: &PricingConfig,
) -> Option<RcspOutcome> {
    let n = skel.n;
    assert!(n <= 128, "rider bitmask limited to 128 commuters");
    let sink = n + skel.driver;
    let cap = inst.capacity as i64;
    let fedges: Vec<Vec<(usize, usize)>> = forbidden
        .iter()
        .map(|f| f.windows(2).map(|w| (w[0], w[1])).collect())
        .collect();

    let mut stats = LabelStats::default();
    let mut arena: Vec<Label> = Vec::new();
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); 2 * n];
    let mut heap: BinaryHeap<Reverse<(i64, u32)>> = BinaryHeap::new();
    let root = Label {
        cost: 0.0,
        time: skel.nodes[skel.driver].window_start,
        onboard: 1u128 << skel.driver,
        picked: 1u128 << skel.driver,
        load: skel.nodes[skel.driver].demand,
        wfd: SmallVec::from_slice(&[(skel.driver as u16, 0i64)]),
        hits: SmallVec::from_elem(0u16, forbidden.len()),
        parent: u32::MAX,
        node: skel.driver as u16,
        dead: false,
    };
    arena.push(root);
    buckets[skel.driver].push(0);
    heap.push(Reverse((arena[0].time, 0)));
    stats.generated += 1;

    let mut best: Option<(f64, Vec<usize>)> = None;

    while let Some(Reverse((_, id))) = heap.pop() {
        if arena[id as usize].dead {
            continue;
        }
        let lab = arena[id as usize].clone();
        let u = lab.node as usize;
        for &v16 in &skel.out[u] {
            let v = v16 as usize;
            let leg = skel.nodes[u].service + inst.tau[skel.nodes[u].site][skel.nodes[v].site];
            let is_origin = v < n;
            let time = if is_origin {
                (lab.time + leg).max(skel.nodes[v].window_start)
            } else {
                lab.time + leg
            };
            if time > skel.nodes[v].window_end {
                continue;
            }
            let rider = if is_origin { v } else { v - n };
            let bit = 1u128 << rider;
            if is_origin {
                if lab.onboard & bit != 0 {
                    continue;
                }
                if lab.load + skel.nodes[v].demand > cap {
                    continue;
                }
            } else if lab.onboard & bit == 0 {
                continue;
            }
            // Ride accumulations for everyone currently onboard.
            let mut wfd = lab.wfd.clone();
            let mut w_ok = true;
            for &mut (r, ref mut w) in wfd.iter_mut() {
                if lab.onboard & (1u128 << r) == 0 {
                    continue;
                }
                *w += leg;
                let o = &skel.nodes[r as usize];
                if let Some(limit) = o.ride_limit {
                    if *w - o.service > limit {
                        w_ok = false;
                        break;
                    }
                }
            }
            if !w_ok {
                continue;
            }
            let (onboard, picked, load) = if is_origin {
                if lab.picked & bit == 0 {
                    wfd.push((rider as u16, 0));
                }
                (
                    lab.onboard | bit,
                    lab.picked | bit,
                    lab.load + skel.nodes[v].demand,
                )
            } else {
                (
                    lab.onboard & !bit,
                    lab.picked,
                    lab.load - skel.nodes[rider].demand,
                )
            };
            // Forbidden-path counters: matches are anchored at the source
            // (the source has no in-edges), so a counter either advances on
            // the exact next edge or resets.
            let mut hits = lab.hits.clone();
            let mut blocked = false;
            for (fi, fe) in fedges.iter().enumerate() {
                let h = hits[fi] as usize;
                let next = if h < fe.len() && fe[h] == (u, v) {
                    h + 1
                } else {
                    0
                };
                #[cfg(debug_assertions)]
                {
                    let literal = consecutive_matches(&arena, &lab, v, forbidden[fi].as_slice());
                    debug_assert_eq!(next, literal, "anchored prefix counter diverged");
                }
                if next >= fe.len() && !fe.is_empty() {
                    blocked = true;
                    break;
                }
                hits[fi] = next as u16;
            }
            if blocked {
                stats.forbidden_blocked += 1;
                continue;
            }
            let cost = lab.cost + costs[u * 2 * n + v];
            let cand = Label {
                cost,
                time,
                onboard,
                picked,
                load,
                wfd,
                hits,
                parent: id,
                node: v as u16,
                dead: false,
            };
            stats.generated += 1;

            if v == sink {
                if onboard != 0 {
                    continue;
                }
                let path = reconstruct(&arena, &cand);
                let better = match &best {
                    None => true,
                    Some((bc, bp)) => cand.cost < *bc || (cand.cost == *bc && path < *bp),
                };
                if better {
                    best = Some((cand.cost, path));
                }
                continue;
            }
            if cfg.use_post_feasibility && !post_feasible(skel, inst, &cand) {
                stats.post_pruned += 1;
                continue;
            }
            if cfg.use_dominance {
                let view = cand.view();
                let mut dominated = false;
                for &other in &buckets[v] {
                    let o = &arena[other as usize];
                    if o.dead {
                        continue;
                    }
                    if dominates(&o.view(), &view) {
                        dominated = true;
                        break;
                    }
                }
                if dominated {
                    stats.dominated += 1;
                    continue;
                }
                for &other in buckets[v].clone().iter() {
                    let o = &arena[other as usize];
                    if !o.dead && dominates(&view, &o.view()) {
                        arena[other as usize].dead = true;
                        stats.dominated += 1;
                    }
                }
                buckets[v].retain(|&o| !arena[o as usize].dead);
            }
            let new_id = arena.len() as u32;
            arena.push(cand);
            buckets[v].push(new_id);
            heap.push(Reverse((arena[new_id as usize].time, new_id)));
        }
    }

    best.map(|(cost, path)| RcspOutcome { path, cost, stats })
}

fn reconstruct(arena: &[Label], last: &Label) -> Vec<usize> {
    let mut nodes = vec![last.node as usize];
    let mut p = last.parent;
    while p != u32::MAX {
        nodes.push(arena[p as usize].node as usize);
        p = arena[p as usize].parent;
    }
    nodes.reverse();
    nodes
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PriceStats {
    pub rcsp_runs: u64,
    pub forbidden_added: u64,
    pub non_elementary: u64,
    pub labels: LabelStats,
}

/// Full pricing for one driver: run the relaxed search, verify the candidate
/// with the scheduler, forbid and retry on failure. With `relax_forbidden`
/// the verification loop is skipped and the raw candidate returned.
pub fn price_driver(
    skel: &GraphSkeleton,
    inst: &Instance,
    duals: &Duals,
    cbar: i64,
    cfg: &PricingConfig,
    forbidden: &mut Vec<Vec<usize>>,
    relax_forbidden: bool,
    stats: &mut PriceStats,
) -> Option<PricedRoute> {
    loop {
        let costs = skel.edge_costs(inst, duals, cbar, cfg.unit_costs);
        let out = rcsp_min_path(skel, &costs, forbidden, inst, cfg)?;
        stats.rcsp_runs += 1;
        stats.labels.generated += out.stats.generated;
        stats.labels.dominated += out.stats.dominated;
        stats.labels.post_pruned += out.stats.post_pruned;
        stats.labels.forbidden_blocked += out.stats.forbidden_blocked;

        let elementary = {
            let mut seen = HashSet::new();
            out.path.iter().all(|&v| seen.insert(v))
        };
        if !elementary {
            stats.non_elementary += 1;
        }
        let route = Route::new(skel.direction, skel.driver, out.path.clone(), inst);
        let col_cost = if cfg.unit_costs {
            1.0
        } else {
            (route.distance + cbar) as f64
        };
        debug_assert!(
            (reduced_cost(&route, col_cost, duals) - out.cost).abs()
                <= 1e-6 * (1.0 + out.cost.abs()),
            "edge-cost path sum diverged from the closed-form reduced cost"
        );
        if relax_forbidden {
            return Some(PricedRoute {
                route,
                reduced_cost: out.cost,
            });
        }
        let schedulable = elementary
            && schedule::is_valid(&route, inst)
            && schedule::feasible(&route, inst).is_some();
        if schedulable {
            return Some(PricedRoute {
                route,
                reduced_cost: out.cost,
            });
        }
        debug_assert!(
            !forbidden.contains(&out.path),
            "forbidden path generated twice"
        );
        forbidden.push(out.path);
        stats.forbidden_added += 1;
    }
}
