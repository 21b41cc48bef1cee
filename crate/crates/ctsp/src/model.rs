//! Domain types: trips, commuters, locations, routes, and problem instances.
//!
//! All times are integer seconds since midnight and all distances integer
//! meters. Integral distances matter: the objective-rounding cut in the
//! branch-and-price search is only valid when route costs are integral.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Index into the instance's physical site table.
pub type SiteId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Inbound,
    Outbound,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Inbound, Direction::Outbound];

    pub fn idx(self) -> usize {
        match self {
            Direction::Inbound => 0,
            Direction::Outbound => 1,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Inbound => write!(f, "inbound"),
            Direction::Outbound => write!(f, "outbound"),
        }
    }
}

/// A single commute trip request with desired departure and arrival instants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trip {
    pub origin: SiteId,
    pub destination: SiteId,
    pub desired_departure: i64,
    pub desired_arrival: i64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Commuter {
    pub id: usize,
    pub home: [f64; 2],
    pub inbound: Trip,
    pub outbound: Trip,
}

/// A trip endpoint in a direction graph: window, service duration, demand,
/// and (at origins) the rider's maximum ride duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub site: SiteId,
    pub window_start: i64,
    pub window_end: i64,
    pub service: i64,
    pub demand: i64,
    pub ride_limit: Option<i64>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("instance has no commuters")]
    Empty,
    #[error("commuter {commuter}: inconsistent window at {side}: [{a}, {b}]")]
    WindowInconsistent {
        commuter: usize,
        side: &'static str,
        a: i64,
        b: i64,
    },
    #[error("triangle inequality violated: ({i},{j},{k}) in {matrix}")]
    TriangleViolation {
        matrix: &'static str,
        i: usize,
        j: usize,
        k: usize,
    },
    #[error("matrix dimension mismatch: expected {expected}x{expected}")]
    BadMatrix { expected: usize },
    #[error("negative entry in {matrix} at ({i},{j})")]
    NegativeEntry {
        matrix: &'static str,
        i: usize,
        j: usize,
    },
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("commuter {0}: trip endpoints do not match home/work sites")]
    BadEndpoints(usize),
}

/// A routing problem over one commuter pool. Immutable after construction;
/// share by reference across threads.
#[derive(Debug, Clone)]
pub struct Instance {
    pub commuters: Vec<Commuter>,
    pub sites: Vec<[f64; 2]>,
    /// Travel time in seconds, by site pair.
    pub tau: Vec<Vec<i64>>,
    /// Travel distance in meters, by site pair.
    pub delta: Vec<Vec<i64>>,
    pub capacity: usize,
    pub delta_s: i64,
    pub detour_ratio: f64,
    pub fixed_cost_multiplier: i64,
    pub service_duration: i64,
    /// Trip endpoints per direction: node i (i < n) is commuter i's origin,
    /// node n+i her destination.
    pub(crate) nodes: [Vec<Location>; 2],
}

/// An ordered stop sequence with a fixed driver. Stops are node ids in the
/// direction's 2n-node space (i = origin of rider i, n+i = her destination).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Route {
    pub direction: Direction,
    pub driver: usize,
    pub stops: Vec<usize>,
    pub riders: Vec<usize>,
    pub distance: i64,
}

impl Route {
    pub fn new(direction: Direction, driver: usize, stops: Vec<usize>, inst: &Instance) -> Route {
        let n = inst.n();
        let mut riders: Vec<usize> = stops.iter().filter(|&&s| s < n).copied().collect();
        riders.sort_unstable();
        riders.dedup();
        let distance = inst.route_distance(direction, &stops);
        Route {
            direction,
            driver,
            stops,
            riders,
            distance,
        }
    }
}

/// Travel model for synthetic instances: straight-line distance at a constant
/// speed, ceiling-rounded times and nearest-rounded distances, followed by a
/// shortest-path closure that restores the triangle inequality after rounding.
#[derive(Debug, Clone, Copy)]
pub struct EuclideanTravel {
    pub speed_mps: f64,
}

impl Default for EuclideanTravel {
    fn default() -> Self {
        EuclideanTravel { speed_mps: 10.0 }
    }
}

impl EuclideanTravel {
    pub fn matrices(&self, sites: &[[f64; 2]]) -> (Vec<Vec<i64>>, Vec<Vec<i64>>) {
        let s = sites.len();
        let mut tau = vec![vec![0i64; s]; s];
        let mut delta = vec![vec![0i64; s]; s];
        for i in 0..s {
            for j in 0..s {
                if i == j {
                    continue;
                }
                let dx = sites[i][0] - sites[j][0];
                let dy = sites[i][1] - sites[j][1];
                let d = (dx * dx + dy * dy).sqrt();
                tau[i][j] = (d / self.speed_mps).ceil() as i64;
                delta[i][j] = d.round() as i64;
            }
        }
        floyd_warshall(&mut tau);
        floyd_warshall(&mut delta);
        (tau, delta)
    }
}

fn floyd_warshall(m: &mut [Vec<i64>]) {
    let s = m.len();
    for k in 0..s {
        for i in 0..s {
            for j in 0..s {
                let via = m[i][k] + m[k][j];
                if via < m[i][j] {
                    m[i][j] = via;
                }
            }
        }
    }
}

/// Instance parameters shared by all construction paths.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Params {
    pub capacity: usize,
    pub delta_s: i64,
    pub detour_ratio: f64,
    pub fixed_cost_multiplier: i64,
    #[serde(default)]
    pub service_duration: i64,
}

/// Derive the four trip-endpoint windows of one commuter from her desired
/// inbound arrival and outbound departure instants.
///
/// Returns [inbound origin, inbound destination, outbound origin, outbound
/// destination]. The ride limit at each origin is `floor((1+R) * tau(o, d))`.
pub fn derive_time_windows(
    commuter: &Commuter,
    delta_s: i64,
    detour_ratio: f64,
    tau: &[Vec<i64>],
    service: i64,
) -> Result<[Location; 4], ModelError> {
    if delta_s < 0 || detour_ratio < 0.0 {
        return Err(ModelError::BadParameter(format!(
            "delta_s={delta_s}, detour_ratio={detour_ratio}"
        )));
    }
    let mk = |commuter_id: usize,
              side: &'static str,
              site: SiteId,
              a: i64,
              b: i64,
              demand: i64,
              ride_limit: Option<i64>| {
        if a > b {
            Err(ModelError::WindowInconsistent {
                commuter: commuter_id,
                side,
                a,
                b,
            })
        } else {
            Ok(Location {
                site,
                window_start: a,
                window_end: b,
                service,
                demand,
                ride_limit,
            })
        }
    };

    // Inbound: the desired arrival anchors the destination window.
    let t_in = &commuter.inbound;
    let tau_in = tau[t_in.origin][t_in.destination];
    let l_in = ride_limit(detour_ratio, tau_in);
    let in_dest_a = t_in.desired_arrival - delta_s;
    let in_dest_b = t_in.desired_arrival + delta_s;
    let in_dest = mk(
        commuter.id,
        "inbound destination",
        t_in.destination,
        in_dest_a,
        in_dest_b,
        0,
        None,
    )?;
    let in_orig = mk(
        commuter.id,
        "inbound origin",
        t_in.origin,
        in_dest_a - service - l_in,
        in_dest_b - service - tau_in,
        1,
        Some(l_in),
    )?;

    // Outbound: the desired departure anchors the origin window.
    let t_out = &commuter.outbound;
    let tau_out = tau[t_out.origin][t_out.destination];
    let l_out = ride_limit(detour_ratio, tau_out);
    let out_orig_a = t_out.desired_departure - delta_s;
    let out_orig_b = t_out.desired_departure + delta_s;
    let out_orig = mk(
        commuter.id,
        "outbound origin",
        t_out.origin,
        out_orig_a,
        out_orig_b,
        1,
        Some(l_out),
    )?;
    let out_dest = mk(
        commuter.id,
        "outbound destination",
        t_out.destination,
        out_orig_a + service + tau_out,
        out_orig_b + service + l_out,
        0,
        None,
    )?;

    Ok([in_orig, in_dest, out_orig, out_dest])
}

pub fn ride_limit(detour_ratio: f64, direct_tau: i64) -> i64 {
    ((1.0 + detour_ratio) * direct_tau as f64).floor() as i64
}

/// Build an instance from commuters and explicit matrices, deriving windows
/// and validating the triangle inequality.
pub fn build_instance(
    commuters: Vec<Commuter>,
    sites: Vec<[f64; 2]>,
    tau: Vec<Vec<i64>>,
    delta: Vec<Vec<i64>>,
    params: Params,
) -> Result<Instance, ModelError> {
    if commuters.is_empty() {
        return Err(ModelError::Empty);
    }
    if params.capacity == 0 {
        return Err(ModelError::BadParameter("capacity must be >= 1".into()));
    }
    if params.fixed_cost_multiplier < 1 {
        return Err(ModelError::BadParameter(
            "fixed_cost_multiplier must be >= 1".into(),
        ));
    }
    let s = sites.len();
    for (name, m) in [("tau", &tau), ("delta", &delta)] {
        if m.len() != s || m.iter().any(|r| r.len() != s) {
            return Err(ModelError::BadMatrix { expected: s });
        }
        for i in 0..s {
            for j in 0..s {
                if m[i][j] < 0 {
                    return Err(ModelError::NegativeEntry { matrix: name, i, j });
                }
            }
        }
        check_triangle(name, m)?;
    }
    for (idx, c) in commuters.iter().enumerate() {
        if c.id != idx {
            return Err(ModelError::BadParameter(format!(
                "commuter ids must be 0..n in order, got {} at {}",
                c.id, idx
            )));
        }
        if c.inbound.direction != Direction::Inbound || c.outbound.direction != Direction::Outbound
        {
            return Err(ModelError::BadEndpoints(c.id));
        }
        if c.inbound.origin != c.outbound.destination {
            return Err(ModelError::BadEndpoints(c.id));
        }
        if c.inbound.origin >= s
            || c.inbound.destination >= s
            || c.outbound.origin >= s
            || c.outbound.destination >= s
        {
            return Err(ModelError::BadEndpoints(c.id));
        }
    }

    let n = commuters.len();
    let mut nodes = [Vec::with_capacity(2 * n), Vec::with_capacity(2 * n)];
    let mut dests = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for c in &commuters {
        let [in_o, in_d, out_o, out_d] = derive_time_windows(
            c,
            params.delta_s,
            params.detour_ratio,
            &tau,
            params.service_duration,
        )?;
        nodes[0].push(in_o);
        nodes[1].push(out_o);
        dests[0].push(in_d);
        dests[1].push(out_d);
    }
    nodes[0].append(&mut dests[0]);
    nodes[1].append(&mut dests[1]);

    Ok(Instance {
        commuters,
        sites,
        tau,
        delta,
        capacity: params.capacity,
        delta_s: params.delta_s,
        detour_ratio: params.detour_ratio,
        fixed_cost_multiplier: params.fixed_cost_multiplier,
        service_duration: params.service_duration,
        nodes,
    })
}

/// Build an instance generating the matrices from a travel model.
pub fn build_instance_with_model(
    commuters: Vec<Commuter>,
    sites: Vec<[f64; 2]>,
    travel: &EuclideanTravel,
    params: Params,
) -> Result<Instance, ModelError> {
    let (tau, delta) = travel.matrices(&sites);
    build_instance(commuters, sites, tau, delta, params)
}

fn check_triangle(name: &'static str, m: &[Vec<i64>]) -> Result<(), ModelError> {
    let s = m.len();
    for k in 0..s {
        for i in 0..s {
            for j in 0..s {
                if m[i][j] > m[i][k] + m[k][j] {
                    return Err(ModelError::TriangleViolation {
                        matrix: name,
                        i,
                        j,
                        k,
                    });
                }
            }
        }
    }
    Ok(())
}

impl Instance {
    pub fn n(&self) -> usize {
        self.commuters.len()
    }

    /// Node id of rider `i`'s destination.
    pub fn dest(&self, i: usize) -> usize {
        self.n() + i
    }

    pub fn is_origin(&self, node: usize) -> bool {
        node < self.n()
    }

    /// Rider served at `node` (the same for her origin and destination).
    pub fn rider_of(&self, node: usize) -> usize {
        node % self.n()
    }

    pub fn node(&self, dir: Direction, node: usize) -> &Location {
        &self.nodes[dir.idx()][node]
    }

    pub fn nodes(&self, dir: Direction) -> &[Location] {
        &self.nodes[dir.idx()]
    }

    pub fn tau_nodes(&self, dir: Direction, u: usize, v: usize) -> i64 {
        self.tau[self.nodes[dir.idx()][u].site][self.nodes[dir.idx()][v].site]
    }

    pub fn delta_nodes(&self, dir: Direction, u: usize, v: usize) -> i64 {
        self.delta[self.nodes[dir.idx()][u].site][self.nodes[dir.idx()][v].site]
    }

    pub fn route_distance(&self, dir: Direction, stops: &[usize]) -> i64 {
        stops
            .windows(2)
            .map(|w| self.delta_nodes(dir, w[0], w[1]))
            .sum()
    }

    pub fn max_delta(&self) -> i64 {
        self.delta
            .iter()
            .flat_map(|r| r.iter().copied())
            .max()
            .unwrap_or(0)
    }

    /// Extract the sub-instance induced by a commuter subset; commuters are
    /// reindexed to 0..m in the given order and unused sites dropped.
    pub fn sub_instance(&self, members: &[usize]) -> Result<Instance, ModelError> {
        let mut site_map = vec![usize::MAX; self.sites.len()];
        let mut sites = Vec::new();
        let map_site = |old: SiteId, site_map: &mut Vec<usize>, sites: &mut Vec<[f64; 2]>| {
            if site_map[old] == usize::MAX {
                site_map[old] = sites.len();
                sites.push(self.sites[old]);
            }
            site_map[old]
        };
        let mut commuters = Vec::with_capacity(members.len());
        for (new_id, &old_id) in members.iter().enumerate() {
            let c = &self.commuters[old_id];
            let mut remap_trip = |t: &Trip| Trip {
                origin: map_site(t.origin, &mut site_map, &mut sites),
                destination: map_site(t.destination, &mut site_map, &mut sites),
                ..*t
            };
            commuters.push(Commuter {
                id: new_id,
                home: c.home,
                inbound: remap_trip(&c.inbound),
                outbound: remap_trip(&c.outbound),
            });
        }
        let s = sites.len();
        let mut tau = vec![vec![0i64; s]; s];
        let mut delta = vec![vec![0i64; s]; s];
        for (old_i, &new_i) in site_map.iter().enumerate() {
            if new_i == usize::MAX {
                continue;
            }
            for (old_j, &new_j) in site_map.iter().enumerate() {
                if new_j == usize::MAX {
                    continue;
                }
                tau[new_i][new_j] = self.tau[old_i][old_j];
                delta[new_i][new_j] = self.delta[old_i][old_j];
            }
        }
        build_instance(
            commuters,
            sites,
            tau,
            delta,
            Params {
                capacity: self.capacity,
                delta_s: self.delta_s,
                detour_ratio: self.detour_ratio,
                fixed_cost_multiplier: self.fixed_cost_multiplier,
                service_duration: self.service_duration,
            },
        )
    }
}

// --- JSON wire format ---

#[derive(Serialize, Deserialize)]
struct TripJson {
    o: usize,
    dt: i64,
    d: usize,
    at: i64,
}

#[derive(Serialize, Deserialize)]
struct CommuterJson {
    id: usize,
    home: [f64; 2],
    inbound: TripJson,
    outbound: TripJson,
}

#[derive(Serialize, Deserialize)]
struct InstanceJson {
    capacity: usize,
    delta_s: i64,
    detour_ratio: f64,
    fixed_cost_multiplier: i64,
    #[serde(default)]
    service_duration: i64,
    #[serde(default)]
    speed_mps: Option<f64>,
    commuters: Vec<CommuterJson>,
    locations: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<Vec<Vec<i64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<Vec<Vec<i64>>>,
}

impl Instance {
    pub fn to_json(&self) -> serde_json::Value {
        let j = InstanceJson {
            capacity: self.capacity,
            delta_s: self.delta_s,
            detour_ratio: self.detour_ratio,
            fixed_cost_multiplier: self.fixed_cost_multiplier,
            service_duration: self.service_duration,
            speed_mps: None,
            commuters: self
                .commuters
                .iter()
                .map(|c| CommuterJson {
                    id: c.id,
                    home: c.home,
                    inbound: TripJson {
                        o: c.inbound.origin,
                        dt: c.inbound.desired_departure,
                        d: c.inbound.destination,
                        at: c.inbound.desired_arrival,
                    },
                    outbound: TripJson {
                        o: c.outbound.origin,
                        dt: c.outbound.desired_departure,
                        d: c.outbound.destination,
                        at: c.outbound.desired_arrival,
                    },
                })
                .collect(),
            locations: self.sites.clone(),
            tau: Some(self.tau.clone()),
            delta: Some(self.delta.clone()),
        };
        serde_json::to_value(j).expect("instance serialization")
    }

    pub fn from_json(v: serde_json::Value) -> Result<Instance, ModelError> {
        let j: InstanceJson = serde_json::from_value(v)
            .map_err(|e| ModelError::BadParameter(format!("instance json: {e}")))?;
        let commuters: Vec<Commuter> = j
            .commuters
            .iter()
            .map(|c| Commuter {
                id: c.id,
                home: c.home,
                inbound: Trip {
                    origin: c.inbound.o,
                    destination: c.inbound.d,
                    desired_departure: c.inbound.dt,
                    desired_arrival: c.inbound.at,
                    direction: Direction::Inbound,
                },
                outbound: Trip {
                    origin: c.outbound.o,
                    destination: c.outbound.d,
                    desired_departure: c.outbound.dt,
                    desired_arrival: c.outbound.at,
                    direction: Direction::Outbound,
                },
            })
            .collect();
        let params = Params {
            capacity: j.capacity,
            delta_s: j.delta_s,
            detour_ratio: j.detour_ratio,
            fixed_cost_multiplier: j.fixed_cost_multiplier,
            service_duration: j.service_duration,
        };
        match (j.tau, j.delta) {
            (Some(tau), Some(delta)) => build_instance(commuters, j.locations, tau, delta, params),
            _ => {
                let travel = EuclideanTravel {
                    speed_mps: j.speed_mps.unwrap_or(10.0),
                };
                build_instance_with_model(commuters, j.locations, &travel, params)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn one_commuter(
        home: [f64; 2],
        work: [f64; 2],
        at_in: i64,
        dt_out: i64,
    ) -> (Vec<Commuter>, Vec<[f64; 2]>) {
        let sites = vec![home, work];
        let c = Commuter {
            id: 0,
            home,
            inbound: Trip {
                origin: 0,
                destination: 1,
                desired_departure: at_in - 1,
                desired_arrival: at_in,
                direction: Direction::Inbound,
            },
            outbound: Trip {
                origin: 1,
                destination: 0,
                desired_departure: dt_out,
                desired_arrival: dt_out + 1,
                direction: Direction::Outbound,
            },
        };
        (vec![c], sites)
    }

    #[test]
    fn window_derivation_matches_formulas() {
        // delta=600, R=0.5, desired inbound arrival 28800, tau(o,d)=1200, s=0
        let (commuters, _) = one_commuter([0.0, 0.0], [12000.0, 0.0], 28800, 61200);
        let tau = vec![vec![0, 1200], vec![1200, 0]];
        let locs = derive_time_windows(&commuters[0], 600, 0.5, &tau, 0).unwrap();
        let [in_o, in_d, _, _] = locs;
        assert_eq!((in_d.window_start, in_d.window_end), (28200, 29400));
        assert_eq!(in_o.ride_limit, Some(1800));
        assert_eq!((in_o.window_start, in_o.window_end), (26400, 28200));
    }

    #[test]
    fn zero_slack_windows_collapse() {
        let (commuters, _) = one_commuter([0.0, 0.0], [0.0, 0.0], 28800, 61200);
        let tau = vec![vec![0, 0], vec![0, 0]];
        let locs = derive_time_windows(&commuters[0], 0, 0.0, &tau, 0).unwrap();
        for l in locs {
            assert_eq!(l.window_start, l.window_end);
        }
        assert_eq!(locs[0].window_start, 28800);
        assert_eq!(locs[2].window_start, 61200);
    }

    #[test]
    fn random_windows_match_symbolic_rederivation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let home = [rng.gen_range(0.0..5000.0), rng.gen_range(0.0..5000.0)];
            let work = [rng.gen_range(5000.0..9000.0), rng.gen_range(0.0..5000.0)];
            let at_in = rng.gen_range(21600..32400);
            let dt_out = rng.gen_range(57600..68400);
            let (commuters, sites) = one_commuter(home, work, at_in, dt_out);
            let (tau, _) = EuclideanTravel::default().matrices(&sites);
            let delta_s = rng.gen_range(0..1200);
            let r = [0.25, 0.5, 0.75][rng.gen_range(0..3)];
            let s = rng.gen_range(0..60);
            let locs = derive_time_windows(&commuters[0], delta_s, r, &tau, s).unwrap();

            // Re-derive each bound symbol by symbol.
            let tau_in = tau[0][1];
            let tau_out = tau[1][0];
            let l_in = ((1.0 + r) * tau_in as f64).floor() as i64;
            let l_out = ((1.0 + r) * tau_out as f64).floor() as i64;
            let a_nd = at_in - delta_s;
            let b_nd = at_in + delta_s;
            assert_eq!(locs[1].window_start, a_nd);
            assert_eq!(locs[1].window_end, b_nd);
            assert_eq!(locs[0].window_start, a_nd - s - l_in);
            assert_eq!(locs[0].window_end, b_nd - s - tau_in);
            assert_eq!(locs[0].ride_limit, Some(l_in));
            let a_o = dt_out - delta_s;
            let b_o = dt_out + delta_s;
            assert_eq!(locs[2].window_start, a_o);
            assert_eq!(locs[2].window_end, b_o);
            assert_eq!(locs[3].window_start, a_o + s + tau_out);
            assert_eq!(locs[3].window_end, b_o + s + l_out);
            assert_eq!(locs[2].ride_limit, Some(l_out));
            // Direct trip is schedulable inside the derived windows.
            assert!(locs[0].window_end - locs[0].window_start >= 0);
            assert!(locs[0].window_start + s + tau_in <= b_nd);
        }
    }

    #[test]
    fn build_one_commuter_instance() {
        let (commuters, sites) = one_commuter([0.0, 0.0], [12000.0, 0.0], 28800, 61200);
        let inst = build_instance_with_model(
            commuters,
            sites,
            &EuclideanTravel::default(),
            Params {
                capacity: 4,
                delta_s: 600,
                detour_ratio: 0.5,
                fixed_cost_multiplier: 1000,
                service_duration: 0,
            },
        )
        .unwrap();
        assert_eq!(inst.n(), 1);
        assert_eq!(inst.nodes(Direction::Inbound).len(), 2);
        assert_eq!(inst.nodes(Direction::Outbound).len(), 2);
        assert_eq!(inst.fixed_cost_multiplier, 1000);
        assert_eq!(inst.delta[0][1], 12000);
    }

    #[test]
    fn commuters_on_a_line_have_euclidean_distances() {
        let sites = vec![[0.0, 0.0], [100.0, 0.0], [200.0, 0.0], [1000.0, 0.0]];
        let mk = |id: usize, home: usize| Commuter {
            id,
            home: sites[home],
            inbound: Trip {
                origin: home,
                destination: 3,
                desired_departure: 28000,
                desired_arrival: 28800,
                direction: Direction::Inbound,
            },
            outbound: Trip {
                origin: 3,
                destination: home,
                desired_departure: 61200,
                desired_arrival: 62000,
                direction: Direction::Outbound,
            },
        };
        let commuters = vec![mk(0, 0), mk(1, 1), mk(2, 2)];
        let inst = build_instance_with_model(
            commuters,
            sites.clone(),
            &EuclideanTravel::default(),
            Params {
                capacity: 4,
                delta_s: 600,
                detour_ratio: 0.5,
                fixed_cost_multiplier: 1000,
                service_duration: 0,
            },
        )
        .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = (sites[i][0] - sites[j][0]).abs().round() as i64;
                assert_eq!(inst.delta[i][j], expect, "delta[{i}][{j}]");
            }
        }
    }

    #[test]
    fn triangle_violation_rejected() {
        let (commuters, sites) = one_commuter([0.0, 0.0], [100.0, 0.0], 28800, 61200);
        let tau = vec![vec![0, 10], vec![10, 0]];
        let bad_delta = vec![vec![0, 100], vec![5, 0]]; // fine, symmetric not required
        assert!(build_instance(
            commuters.clone(),
            sites.clone(),
            tau.clone(),
            bad_delta,
            Params {
                capacity: 2,
                delta_s: 600,
                detour_ratio: 0.5,
                fixed_cost_multiplier: 1000,
                service_duration: 0,
            }
        )
        .is_ok());
        // A genuine violation needs >= 3 sites.
        let sites3 = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        let mut commuters = commuters;
        commuters[0].inbound.destination = 1;
        commuters[0].outbound.origin = 1;
        let tau3 = vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]];
        let bad = vec![vec![0, 9, 1], vec![1, 0, 1], vec![1, 1, 0]];
        let err = build_instance(
            commuters,
            sites3,
            tau3,
            bad,
            Params {
                capacity: 2,
                delta_s: 600,
                detour_ratio: 0.5,
                fixed_cost_multiplier: 1000,
                service_duration: 0,
            },
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::TriangleViolation { .. }));
    }

    #[test]
    fn generated_matrices_satisfy_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let count = rng.gen_range(2..40);
            let sites: Vec<[f64; 2]> = (0..count)
                .map(|_| [rng.gen_range(0.0..8000.0), rng.gen_range(0.0..8000.0)])
                .collect();
            let (tau, delta) = EuclideanTravel::default().matrices(&sites);
            check_triangle("tau", &tau).unwrap();
            check_triangle("delta", &delta).unwrap();
        }
    }

    #[test]
    fn json_round_trip() {
        let (commuters, sites) = one_commuter([0.0, 0.0], [12000.0, 0.0], 28800, 61200);
        let inst = build_instance_with_model(
            commuters,
            sites,
            &EuclideanTravel::default(),
            Params {
                capacity: 4,
                delta_s: 600,
                detour_ratio: 0.5,
                fixed_cost_multiplier: 1000,
                service_duration: 0,
            },
        )
        .unwrap();
        let v = inst.to_json();
        let back = Instance::from_json(v).unwrap();
        assert_eq!(back.n(), inst.n());
        assert_eq!(back.tau, inst.tau);
        assert_eq!(back.delta, inst.delta);
        assert_eq!(
            back.nodes(Direction::Inbound),
            inst.nodes(Direction::Inbound)
        );
    }
}
