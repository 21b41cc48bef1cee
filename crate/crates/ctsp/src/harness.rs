//! Synthetic commuter populations, the enumeration-based exact solver, the
//! brute-force cross-check, and the experiment driver that sweeps parameter
//! grids and records per-run statistics.

use crate::bnp::{self, BnpConfig};
use crate::cluster;
use crate::enumerate::{self, EnumerateOptions};
use crate::master::{self, all_singles_selection, fixed_cost_from_pool, ColumnPool, Cuts};
use crate::model::{
    build_instance_with_model, Commuter, Direction, EuclideanTravel, Instance, Params, Route, Trip,
};
use crate::schedule;
use crate::solution::Solution;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Master(#[from] master::MasterError),
    #[error(transparent)]
    Bnp(#[from] bnp::BnpError),
    #[error(transparent)]
    Cluster(#[from] cluster::ClusterError),
    #[error("solver disagreement: {0}")]
    Mismatch(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

// --- Population generation ---

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub mean_s: f64,
    pub sd_s: f64,
    pub weight: f64,
}

/// Truncated normal mixture over seconds-since-midnight.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mixture {
    pub components: Vec<MixtureComponent>,
    pub truncate: (i64, i64),
}

impl Mixture {
    /// Morning arrivals: two peaks inside the 6-9 am window.
    pub fn morning_default() -> Mixture {
        Mixture {
            components: vec![
                MixtureComponent {
                    mean_s: 7.25 * 3600.0,
                    sd_s: 2400.0,
                    weight: 0.55,
                },
                MixtureComponent {
                    mean_s: 8.5 * 3600.0,
                    sd_s: 1800.0,
                    weight: 0.45,
                },
            ],
            truncate: (4 * 3600, 12 * 3600),
        }
    }

    /// Evening departures: peaks inside the 4-7 pm window.
    pub fn evening_default() -> Mixture {
        Mixture {
            components: vec![
                MixtureComponent {
                    mean_s: 16.75 * 3600.0,
                    sd_s: 2700.0,
                    weight: 0.5,
                },
                MixtureComponent {
                    mean_s: 18.0 * 3600.0,
                    sd_s: 2100.0,
                    weight: 0.5,
                },
            ],
            truncate: (13 * 3600, 23 * 3600),
        }
    }

    pub(crate) fn sample_with_component(&self, rng: &mut ChaCha8Rng) -> (i64, usize) {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        let mut draw = rng.gen_range(0.0..total);
        let mut idx = self.components.len() - 1;
        for (i, c) in self.components.iter().enumerate() {
            if draw < c.weight {
                idx = i;
                break;
            }
            draw -= c.weight;
        }
        let c = &self.components[idx];
        loop {
            // Box-Muller; rejection keeps the truncation window.
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            let v = (c.mean_s + c.sd_s * z).round() as i64;
            if v >= self.truncate.0 && v <= self.truncate.1 {
                return (v, idx);
            }
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> i64 {
        self.sample_with_component(rng).0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub count: usize,
    /// Home region extent in meters; homes are uniform over it.
    pub region_m: [f64; 2],
    /// Workplace sites, offset from the home region.
    pub workplaces: Vec<[f64; 2]>,
    pub arrival: Mixture,
    pub departure: Mixture,
    pub seed: u64,
    #[serde(default = "default_speed")]
    pub speed_mps: f64,
    pub params: Params,
}

fn default_speed() -> f64 {
    10.0
}

impl PopulationSpec {
    pub fn example(count: usize, seed: u64) -> PopulationSpec {
        PopulationSpec {
            count,
            region_m: [6000.0, 6000.0],
            workplaces: vec![[9000.0, 2000.0], [9500.0, 3500.0]],
            arrival: Mixture::morning_default(),
            departure: Mixture::evening_default(),
            seed,
            speed_mps: 10.0,
            params: Params {
                capacity: 4,
                delta_s: 600,
                detour_ratio: 0.5,
                fixed_cost_multiplier: 1000,
                service_duration: 0,
            },
        }
    }
}

pub struct Population {
    pub commuters: Vec<Commuter>,
    pub sites: Vec<[f64; 2]>,
}

/// Deterministic population draw: homes uniform over the region, workplace
/// uniform over the workplace set, desired inbound arrival from the morning
/// mixture and outbound departure from the evening mixture.
pub fn generate_population(spec: &PopulationSpec) -> Population {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut sites: Vec<[f64; 2]> = Vec::with_capacity(spec.count + spec.workplaces.len());
    let mut commuters = Vec::with_capacity(spec.count);
    for _ in 0..spec.count {
        sites.push([
            rng.gen_range(0.0..spec.region_m[0]),
            rng.gen_range(0.0..spec.region_m[1]),
        ]);
    }
    let work_base = sites.len();
    sites.extend_from_slice(&spec.workplaces);
    for id in 0..spec.count {
        let work = work_base + rng.gen_range(0..spec.workplaces.len());
        let arrive = spec.arrival.sample(&mut rng);
        let depart = spec.departure.sample(&mut rng);
        let dx = sites[id][0] - sites[work][0];
        let dy = sites[id][1] - sites[work][1];
        let direct = ((dx * dx + dy * dy).sqrt() / spec.speed_mps).ceil() as i64;
        commuters.push(Commuter {
            id,
            home: sites[id],
            inbound: Trip {
                origin: id,
                destination: work,
                desired_departure: arrive - direct.max(1),
                desired_arrival: arrive,
                direction: Direction::Inbound,
            },
            outbound: Trip {
                origin: work,
                destination: id,
                desired_departure: depart,
                desired_arrival: depart + direct.max(1),
                direction: Direction::Outbound,
            },
        });
    }
    Population { commuters, sites }
}

pub fn generate_instance(spec: &PopulationSpec) -> Result<Instance, HarnessError> {
    let pop = generate_population(spec);
    Ok(build_instance_with_model(
        pop.commuters,
        pop.sites,
        &EuclideanTravel {
            speed_mps: spec.speed_mps,
        },
        spec.params,
    )?)
}

// --- Exact solve by full enumeration ---

#[derive(Debug, Clone, Default)]
pub struct ReaStats {
    pub columns: usize,
    pub time_enumeration: Duration,
    pub time_total: Duration,
    pub gap: f64,
    pub optimal: bool,
}

/// Enumerate every route, then pick the optimal selection with the
/// set-partitioning MIP.
pub fn solve_rea(
    inst: &Instance,
    time_limit: Option<Duration>,
) -> Result<(Solution, ReaStats), HarnessError> {
    let t0 = Instant::now();
    let pool = enumerate::enumerate_all(inst, &EnumerateOptions::default());
    let time_enumeration = t0.elapsed();
    // The surcharge comes from the seed subset (singles and pairs) so that
    // every solver prices routes identically.
    let seed_max = pool
        .routes
        .iter()
        .filter(|r| r.riders.len() <= 2)
        .map(|r| r.distance)
        .max()
        .unwrap_or(0);
    let cbar = inst.fixed_cost_multiplier * seed_max;
    assert!(
        cbar > inst.n() as i64 * pool.max_distance(),
        "fleet surcharge too small to keep the objective lexicographic"
    );
    let cols = ColumnPool::from_route_pool(&pool, cbar);
    let mask = vec![true; cols.len()];
    let warm = all_singles_selection(&cols, inst);
    let budget = time_limit.map(|l| l.saturating_sub(t0.elapsed()));
    let mip = master::mip_over_pool(
        &cols,
        &mask,
        inst,
        &Cuts::inactive(inst.n()),
        false,
        budget,
        warm.as_deref(),
    )?;
    let objective: i64 = mip.selected.iter().map(|&i| cols.columns[i].cost).sum();
    let routes: Vec<Route> = mip
        .selected
        .iter()
        .map(|&i| cols.columns[i].route.clone())
        .collect();
    let solution = Solution::from_selection(routes, inst, objective as f64, mip.gap)
        .map_err(bnp::BnpError::Validity)?;
    let stats = ReaStats {
        columns: pool.len(),
        time_enumeration,
        time_total: t0.elapsed(),
        gap: mip.gap,
        optimal: mip.gap == 0.0,
    };
    Ok((solution, stats))
}

/// Shared surcharge value used by every solver on this instance.
pub fn instance_cbar(inst: &Instance) -> i64 {
    let seeds = enumerate::enumerate_seeds(inst);
    fixed_cost_from_pool(&seeds, inst.fixed_cost_multiplier)
}

// --- No-sharing baseline ---

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Baseline {
    pub vehicles: usize,
    pub total_distance: i64,
    pub avg_ride_duration_s: f64,
}

pub fn no_sharing_baseline(inst: &Instance) -> Baseline {
    let n = inst.n();
    let mut dist = 0i64;
    let mut dur = 0i64;
    for dir in Direction::BOTH {
        for c in 0..n {
            dist += inst.delta_nodes(dir, c, inst.dest(c));
            dur += inst.tau_nodes(dir, c, inst.dest(c));
        }
    }
    Baseline {
        vehicles: n,
        total_distance: dist,
        avg_ride_duration_s: dur as f64 / (2 * n) as f64,
    }
}

/// Mean ride duration over all 2n trips of a plan.
pub fn average_ride_duration(sol: &Solution, inst: &Instance) -> f64 {
    let n = inst.n();
    let mut total = 0i64;
    let mut trips = 0usize;
    for r in &sol.routes {
        let mut pos = vec![usize::MAX; 2 * n];
        for (i, &v) in r.stops.iter().enumerate() {
            pos[v] = i;
        }
        for (p, &v) in r.stops.iter().enumerate() {
            if v < n {
                let d = pos[v + n];
                let service = inst.node(r.direction, v).service;
                total += r.schedule[d] - (r.schedule[p] + service);
                trips += 1;
            }
        }
    }
    total as f64 / trips as f64
}

// --- Brute-force plan search (oracle) ---

/// Best feasible plan by exhausting rider partitions per direction with all
/// driver choices, then joining directions on equal driver sets. Minimizes
/// (route count, total distance) lexicographically. Independent of the
/// enumeration module: block routes come from raw stop permutations checked
/// directly against the scheduler.
pub fn brute_force_plan(inst: &Instance) -> Option<(usize, i64)> {
    assert!(inst.n() <= 16, "oracle meant for tiny instances");
    let per_dir: Vec<HashMap<u32, i64>> = Direction::BOTH
        .iter()
        .map(|&dir| direction_partitions(inst, dir))
        .collect();
    let mut best: Option<(usize, i64)> = None;
    for (&mask, &din) in &per_dir[0] {
        if let Some(&dout) = per_dir[1].get(&mask) {
            let cand = (mask.count_ones() as usize, din + dout);
            best = Some(match best {
                None => cand,
                Some(b) => b.min(cand),
            });
        }
    }
    best
}

fn direction_partitions(inst: &Instance, dir: Direction) -> HashMap<u32, i64> {
    let n = inst.n();
    let mut memo: HashMap<(u32, usize), Option<i64>> = HashMap::new();
    let mut out: HashMap<u32, i64> = HashMap::new();
    let full = (1u32 << n) - 1;
    // Depth-first over partitions: peel the lowest unassigned rider, choose
    // its block and driver.
    fn rec(
        inst: &Instance,
        dir: Direction,
        assigned: u32,
        full: u32,
        drivers: u32,
        dist: i64,
        memo: &mut HashMap<(u32, usize), Option<i64>>,
        out: &mut HashMap<u32, i64>,
    ) {
        let n = inst.n();
        if assigned == full {
            match out.get(&drivers) {
                Some(&d) if d <= dist => {}
                _ => {
                    out.insert(drivers, dist);
                }
            }
            return;
        }
        let lowest = (!assigned & full).trailing_zeros() as usize;
        let rest: Vec<usize> = (lowest + 1..n)
            .filter(|&c| assigned & (1 << c) == 0)
            .collect();
        let kmax = inst.capacity.min(rest.len() + 1);
        // All blocks containing `lowest` with size <= K.
        let mut stack = vec![(vec![lowest], 0usize)];
        while let Some((block, from)) = stack.pop() {
            for (i, &c) in rest.iter().enumerate().skip(from) {
                if block.len() < kmax {
                    let mut b = block.clone();
                    b.push(c);
                    stack.push((b, i + 1));
                }
            }
            let bm: u32 = block.iter().map(|&c| 1u32 << c).sum();
            for &driver in &block {
                let key = (bm, driver);
                let entry = memo
                    .entry(key)
                    .or_insert_with(|| best_block_route(inst, dir, &block, driver));
                if let Some(d) = *entry {
                    rec(
                        inst,
                        dir,
                        assigned | bm,
                        full,
                        drivers | (1 << driver),
                        dist + d,
                        memo,
                        out,
                    );
                }
            }
        }
    }
    rec(inst, dir, 0, full, 0, 0, &mut memo, &mut out);
    out
}

/// Cheapest schedulable route over a rider block with a fixed driver, by raw
/// permutation of the interior stops.
fn best_block_route(
    inst: &Instance,
    dir: Direction,
    block: &[usize],
    driver: usize,
) -> Option<i64> {
    use itertools::Itertools;
    let n = inst.n();
    let interior: Vec<usize> = block
        .iter()
        .filter(|&&c| c != driver)
        .flat_map(|&c| [c, n + c])
        .collect();
    let mut best: Option<i64> = None;
    let len = interior.len();
    for perm in interior.into_iter().permutations(len) {
        let mut stops = Vec::with_capacity(2 * block.len());
        stops.push(driver);
        stops.extend(perm);
        stops.push(n + driver);
        // Direct structural simulation, independent of schedule::is_valid.
        let mut onboard = 0u32;
        let mut load = 0i64;
        let mut ok = true;
        for &v in &stops {
            if v < n {
                onboard |= 1 << v;
                load += inst.node(dir, v).demand;
                if load > inst.capacity as i64 {
                    ok = false;
                    break;
                }
            } else {
                if onboard & (1 << (v - n)) == 0 {
                    ok = false;
                    break;
                }
                onboard &= !(1 << (v - n));
                load -= inst.node(dir, v - n).demand;
            }
        }
        if !ok || onboard != 0 {
            continue;
        }
        if schedule::schedule_sequence(&stops, inst, dir).is_none() {
            continue;
        }
        let d = inst.route_distance(dir, &stops);
        best = Some(match best {
            None => d,
            Some(b) => b.min(d),
        });
    }
    best
}

// --- Cross validation ---

#[derive(Debug, Clone, Serialize)]
pub struct CrossReport {
    pub rea: (usize, i64),
    pub bpa: (usize, i64),
    pub brute: Option<(usize, i64)>,
    pub agree: bool,
}

/// Solve with both exact algorithms (plus the brute-force oracle when small
/// enough) and insist on identical (vehicle count, total distance).
pub fn cross_validate(inst: &Instance, brute_limit: usize) -> Result<CrossReport, HarnessError> {
    let (rea_sol, rea_stats) = solve_rea(inst, None)?;
    let (bpa_sol, bpa_stats) = bnp::solve_bpa(inst, &BnpConfig::default())?;
    if !rea_stats.optimal || !bpa_stats.optimal {
        return Err(HarnessError::Mismatch(
            "a solver failed to prove optimality".into(),
        ));
    }
    let rea = (rea_sol.vehicle_count, rea_sol.total_distance);
    let bpa = (bpa_sol.vehicle_count, bpa_sol.total_distance);
    let brute = if inst.n() <= brute_limit {
        brute_force_plan(inst)
    } else {
        None
    };
    let mut agree = rea == bpa;
    if let Some(b) = brute {
        agree = agree && b == rea;
    }
    let report = CrossReport {
        rea,
        bpa,
        brute,
        agree,
    };
    if !agree {
        return Err(HarnessError::Mismatch(format!(
            "rea={rea:?} bpa={bpa:?} brute={brute:?}"
        )));
    }
    Ok(report)
}

// --- Experiments ---

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub population: PopulationSpec,
    pub algorithms: Vec<String>,
    pub capacities: Vec<usize>,
    pub max_cluster_sizes: Vec<usize>,
    pub deltas_s: Vec<i64>,
    pub detour_ratios: Vec<f64>,
    #[serde(default = "default_restarts")]
    pub cluster_restarts: usize,
    #[serde(default)]
    pub cluster_seed: u64,
    pub time_limit_s: Option<u64>,
    #[serde(default = "default_t_rmp")]
    pub t_rmp_s: u64,
    #[serde(default = "default_t_mip")]
    pub t_mip_s: u64,
}

fn default_restarts() -> usize {
    100
}
fn default_t_rmp() -> u64 {
    480
}
fn default_t_mip() -> u64 {
    120
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub cluster_id: usize,
    pub cluster_size: usize,
    pub capacity: usize,
    pub delta_s: i64,
    pub detour_ratio: f64,
    pub algorithm: String,
    pub columns: usize,
    pub inbound_edges: usize,
    pub outbound_edges: usize,
    pub tree_nodes: u64,
    pub vehicles: usize,
    pub total_distance: i64,
    pub optimality_gap: f64,
    pub integrality_gap: f64,
    pub time_rmp_s: f64,
    pub time_root_s: f64,
    pub time_best_s: f64,
    pub time_total_s: f64,
    pub status: String,
}

pub const RUN_RECORD_HEADER: &str = "cluster_id,cluster_size,capacity,delta_s,detour_ratio,algorithm,columns,inbound_edges,outbound_edges,tree_nodes,vehicles,total_distance,optimality_gap,integrality_gap,time_rmp_s,time_root_s,time_best_s,time_total_s,status";

impl RunRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{:.6},{:.6},{:.3},{:.3},{:.3},{:.3},{}",
            self.cluster_id,
            self.cluster_size,
            self.capacity,
            self.delta_s,
            self.detour_ratio,
            self.algorithm,
            self.columns,
            self.inbound_edges,
            self.outbound_edges,
            self.tree_nodes,
            self.vehicles,
            self.total_distance,
            self.optimality_gap,
            self.integrality_gap,
            self.time_rmp_s,
            self.time_root_s,
            self.time_best_s,
            self.time_total_s,
            self.status
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregateRecord {
    pub algorithm: String,
    pub capacity: usize,
    pub max_cluster_size: usize,
    pub delta_s: i64,
    pub detour_ratio: f64,
    pub clusters: usize,
    pub failures: usize,
    pub vehicles: usize,
    pub total_distance: i64,
    pub avg_ride_duration_s: f64,
    pub baseline_vehicles: usize,
    pub baseline_distance: i64,
    pub baseline_avg_ride_s: f64,
    pub vehicles_pct_of_baseline: f64,
    pub distance_pct_of_baseline: f64,
    pub ride_duration_pct_of_baseline: f64,
}

pub const AGGREGATE_HEADER: &str = "algorithm,capacity,max_cluster_size,delta_s,detour_ratio,clusters,failures,vehicles,total_distance,avg_ride_duration_s,baseline_vehicles,baseline_distance,baseline_avg_ride_s,vehicles_pct_of_baseline,distance_pct_of_baseline,ride_duration_pct_of_baseline";

impl AggregateRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{:.3},{},{},{:.3},{:.4},{:.4},{:.4}",
            self.algorithm,
            self.capacity,
            self.max_cluster_size,
            self.delta_s,
            self.detour_ratio,
            self.clusters,
            self.failures,
            self.vehicles,
            self.total_distance,
            self.avg_ride_duration_s,
            self.baseline_vehicles,
            self.baseline_distance,
            self.baseline_avg_ride_s,
            self.vehicles_pct_of_baseline,
            self.distance_pct_of_baseline,
            self.ride_duration_pct_of_baseline
        )
    }
}

/// Solve one instance with the named algorithm, produce the common record.
pub fn run_algorithm(
    inst: &Instance,
    algorithm: &str,
    time_limit: Option<Duration>,
    t_rmp: Duration,
    t_mip: Duration,
) -> Result<(Solution, RunRecord), HarnessError> {
    let blank = |sol: &Solution| RunRecord {
        cluster_id: 0,
        cluster_size: inst.n(),
        capacity: inst.capacity,
        delta_s: inst.delta_s,
        detour_ratio: inst.detour_ratio,
        algorithm: algorithm.to_string(),
        columns: 0,
        inbound_edges: 0,
        outbound_edges: 0,
        tree_nodes: 0,
        vehicles: sol.vehicle_count,
        total_distance: sol.total_distance,
        optimality_gap: sol.gap,
        integrality_gap: 0.0,
        time_rmp_s: 0.0,
        time_root_s: 0.0,
        time_best_s: 0.0,
        time_total_s: 0.0,
        status: "ok".into(),
    };
    match algorithm {
        "rea" => {
            let (sol, st) = solve_rea(inst, time_limit)?;
            let mut rec = blank(&sol);
            rec.columns = st.columns;
            rec.optimality_gap = st.gap;
            rec.time_rmp_s = st.time_enumeration.as_secs_f64();
            rec.time_total_s = st.time_total.as_secs_f64();
            Ok((sol, rec))
        }
        "bpa" => {
            let cfg = BnpConfig {
                time_limit,
                ..BnpConfig::default()
            };
            let (sol, st) = bnp::solve_bpa(inst, &cfg)?;
            let mut rec = blank(&sol);
            rec.columns = st.columns;
            rec.inbound_edges = st.inbound_edges;
            rec.outbound_edges = st.outbound_edges;
            rec.tree_nodes = st.tree_nodes;
            rec.optimality_gap = st.final_gap;
            rec.integrality_gap = st.integrality_gap;
            rec.time_rmp_s = st.time_rmp_convergence.as_secs_f64();
            rec.time_root_s = st.time_root_solution.as_secs_f64();
            rec.time_best_s = st.time_best_solution.as_secs_f64();
            rec.time_total_s = st.time_total.as_secs_f64();
            Ok((sol, rec))
        }
        "heuristic" | "heuristic-relaxed" => {
            let relax = algorithm == "heuristic-relaxed";
            let (sol, st) = bnp::root_heuristic(inst, t_rmp, t_mip, relax, &BnpConfig::default())?;
            let mut rec = blank(&sol);
            rec.columns = st.columns;
            rec.optimality_gap = st.gap;
            rec.time_rmp_s = st.time_rmp.as_secs_f64();
            rec.time_best_s = st.time_mip.as_secs_f64();
            rec.time_total_s = (st.time_rmp + st.time_mip).as_secs_f64();
            Ok((sol, rec))
        }
        other => Err(HarnessError::Mismatch(format!("unknown algorithm {other}"))),
    }
}

pub struct ExperimentOutput {
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<AggregateRecord>,
}

/// Sweep the configured grid. Clustering is a function of home locations
/// only, so for a fixed max cluster size every (delta, detour, capacity)
/// cell decomposes identically.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    let mut runs = Vec::new();
    let mut aggregates = Vec::new();
    let time_limit = config.time_limit_s.map(Duration::from_secs);
    let t_rmp = Duration::from_secs(config.t_rmp_s);
    let t_mip = Duration::from_secs(config.t_mip_s);
    for &delta_s in &config.deltas_s {
        for &detour in &config.detour_ratios {
            for &cap in &config.capacities {
                let mut spec = config.population.clone();
                spec.params.delta_s = delta_s;
                spec.params.detour_ratio = detour;
                spec.params.capacity = cap;
                let inst = generate_instance(&spec)?;
                let baseline = no_sharing_baseline(&inst);
                for &max_size in &config.max_cluster_sizes {
                    let clustering = cluster::cluster_commuters(
                        &inst,
                        max_size,
                        config.cluster_restarts,
                        config.cluster_seed,
                    )?;
                    let parts = cluster::split_instance(&inst, &clustering);
                    for algorithm in &config.algorithms {
                        let mut cell_runs: Vec<RunRecord> = Vec::new();
                        let mut vehicles = 0usize;
                        let mut distance = 0i64;
                        let mut ride_num = 0.0f64;
                        let mut ride_den = 0usize;
                        let mut failures = 0usize;
                        for (cid, (members, sub)) in parts.iter().enumerate() {
                            match run_algorithm(sub, algorithm, time_limit, t_rmp, t_mip) {
                                Ok((sol, mut rec)) => {
                                    rec.cluster_id = cid;
                                    rec.cluster_size = members.len();
                                    vehicles += sol.vehicle_count;
                                    distance += sol.total_distance;
                                    ride_num +=
                                        average_ride_duration(&sol, sub) * (2 * sub.n()) as f64;
                                    ride_den += 2 * sub.n();
                                    cell_runs.push(rec);
                                }
                                Err(e) => {
                                    failures += 1;
                                    cell_runs.push(RunRecord {
                                        cluster_id: cid,
                                        cluster_size: members.len(),
                                        capacity: cap,
                                        delta_s,
                                        detour_ratio: detour,
                                        algorithm: algorithm.clone(),
                                        columns: 0,
                                        inbound_edges: 0,
                                        outbound_edges: 0,
                                        tree_nodes: 0,
                                        vehicles: 0,
                                        total_distance: 0,
                                        optimality_gap: 1.0,
                                        integrality_gap: 1.0,
                                        time_rmp_s: 0.0,
                                        time_root_s: 0.0,
                                        time_best_s: 0.0,
                                        time_total_s: 0.0,
                                        status: format!("error: {e}"),
                                    });
                                }
                            }
                        }
                        let avg_ride = if ride_den > 0 {
                            ride_num / ride_den as f64
                        } else {
                            0.0
                        };
                        aggregates.push(AggregateRecord {
                            algorithm: algorithm.clone(),
                            capacity: cap,
                            max_cluster_size: max_size,
                            delta_s,
                            detour_ratio: detour,
                            clusters: parts.len(),
                            failures,
                            vehicles,
                            total_distance: distance,
                            avg_ride_duration_s: avg_ride,
                            baseline_vehicles: baseline.vehicles,
                            baseline_distance: baseline.total_distance,
                            baseline_avg_ride_s: baseline.avg_ride_duration_s,
                            vehicles_pct_of_baseline: vehicles as f64 / baseline.vehicles as f64,
                            distance_pct_of_baseline: distance as f64
                                / baseline.total_distance as f64,
                            ride_duration_pct_of_baseline: avg_ride / baseline.avg_ride_duration_s,
                        });
                        runs.extend(cell_runs);
                    }
                }
            }
        }
    }
    Ok(ExperimentOutput { runs, aggregates })
}

/// Solving with capacity 1 must reproduce the analytic no-sharing baseline.
pub fn k1_matches_baseline(inst_k1: &Instance) -> Result<bool, HarnessError> {
    let (sol, _) = solve_rea(inst_k1, None)?;
    let base = no_sharing_baseline(inst_k1);
    Ok(sol.vehicle_count == base.vehicles && sol.total_distance == base.total_distance)
}
