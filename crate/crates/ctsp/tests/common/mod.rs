//! Shared generators and independent oracles for the integration suites.
//! Each test binary pulls in only what it needs.
#![allow(dead_code)]

use ctsp::enumerate;
use ctsp::lp::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
use ctsp::master::Duals;
use ctsp::model::{
    build_instance_with_model, Commuter, Direction, EuclideanTravel, Instance, Params, Route, Trip,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Random synthetic commuter instance: homes scattered over a square region,
/// a few shared workplaces off to the side, staggered desired times.
pub fn random_instance(n: usize, capacity: usize, seed: u64) -> Instance {
    random_instance_with(n, capacity, seed, 600, 0.5)
}

pub fn random_instance_with(
    n: usize,
    capacity: usize,
    seed: u64,
    delta_s: i64,
    detour_ratio: f64,
) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sites: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.gen_range(0.0..4500.0), rng.gen_range(0.0..4500.0)])
        .collect();
    let workplaces = 1 + n / 5;
    for _ in 0..workplaces {
        sites.push([rng.gen_range(6500.0..9500.0), rng.gen_range(0.0..3500.0)]);
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
            delta_s,
            detour_ratio,
            fixed_cost_multiplier: 1000,
            service_duration: 0,
        },
    )
    .unwrap()
}

/// A uniformly drawn valid route: random direction, rider set, driver, and
/// one of the valid stop interleavings.
pub fn random_valid_route(inst: &Instance, max_riders: usize, rng: &mut ChaCha8Rng) -> Route {
    let n = inst.n();
    let dir = if rng.gen_bool(0.5) {
        Direction::Inbound
    } else {
        Direction::Outbound
    };
    let k = rng.gen_range(1..=max_riders.min(inst.capacity).min(n));
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    let mut q: Vec<usize> = ids[..k].to_vec();
    q.sort_unstable();
    let driver = q[rng.gen_range(0..k)];
    let orderings = enumerate::valid_orderings(&q, driver, inst);
    let stops = orderings[rng.gen_range(0..orderings.len())].clone();
    Route::new(dir, driver, stops, inst)
}

/// Transcription of the route-scheduling program: one service-time variable
/// per stop, window bounds, waiting inequalities at pickups, forced
/// equalities at drop-offs, ride-duration rows. Returns the optimal duration
/// or None when infeasible. Entirely independent of the propagation solver.
pub fn schedule_lp_oracle(route: &Route, inst: &Instance) -> Option<f64> {
    let n = inst.n();
    let dir = route.direction;
    let stops = &route.stops;
    let m = stops.len();
    let mut obj = vec![0.0; m];
    obj[0] = -1.0;
    obj[m - 1] = 1.0;
    let mut lp = LinearProgram::new(Sense::Min, obj);
    for (pos, &v) in stops.iter().enumerate() {
        let loc = inst.node(dir, v);
        if v < n {
            lp.set_bounds(pos, loc.window_start as f64, loc.window_end as f64);
        } else {
            lp.set_bounds(pos, f64::NEG_INFINITY, loc.window_end as f64);
        }
    }
    for pos in 1..m {
        let prev = stops[pos - 1];
        let v = stops[pos];
        let leg = (inst.node(dir, prev).service + inst.tau_nodes(dir, prev, v)) as f64;
        let rel = if v < n { Relation::Ge } else { Relation::Eq };
        // T_pos - T_{pos-1} >= leg (or == at drop-offs)
        lp.add_row(vec![(pos, 1.0), (pos - 1, -1.0)], rel, leg);
    }
    let mut pos_of = vec![usize::MAX; 2 * n];
    for (pos, &v) in stops.iter().enumerate() {
        pos_of[v] = pos;
    }
    for &v in stops.iter().filter(|&&v| v < n) {
        let loc = inst.node(dir, v);
        if let Some(limit) = loc.ride_limit {
            let d = pos_of[v + n];
            // T_dest - T_origin <= limit + service
            lp.add_row(
                vec![(d, 1.0), (pos_of[v], -1.0)],
                Relation::Le,
                (limit + loc.service) as f64,
            );
        }
    }
    let sol = solve_lp(&lp).expect("oracle LP must solve");
    match sol.status {
        LpStatus::Optimal => Some(sol.objective),
        LpStatus::Infeasible => None,
        LpStatus::Unbounded => panic!("bounded program cannot be unbounded"),
    }
}

/// Integer-valued random duals at a realistic magnitude; integral values keep
/// floating-point path sums exact so equality checks can be tight.
pub fn integer_duals(n: usize, rng: &mut ChaCha8Rng, scale: i64) -> Duals {
    Duals {
        pi_in: (0..n).map(|_| rng.gen_range(0..scale) as f64).collect(),
        pi_out: (0..n).map(|_| rng.gen_range(0..scale) as f64).collect(),
        sigma: (0..n)
            .map(|_| rng.gen_range(-scale / 2..scale / 2) as f64)
            .collect(),
        mu: rng.gen_range(0..scale / 4) as f64,
        nu: 0.0,
        phi: (0..n).map(|_| rng.gen_range(0..scale / 4) as f64).collect(),
    }
}

/// Criterion-1 suite: 50 random instances with up to 6 commuters.
pub fn small_suite() -> Vec<Instance> {
    let mut out = Vec::new();
    let mut i = 0u64;
    while out.len() < 50 {
        let n = 2 + (i as usize % 5); // 2..=6
        let cap = 2 + (i as usize % 3); // 2..=4
        out.push(random_instance(n, cap, 10_000 + i));
        i += 1;
    }
    out
}

/// Criterion-2 suite: 20 random instances with 7 to 14 commuters.
pub fn medium_suite() -> Vec<Instance> {
    let mut out = Vec::new();
    for i in 0..20u64 {
        let n = 7 + (i as usize % 8); // 7..=14
        let cap = 2 + (i as usize % 3); // 2..=4
        out.push(random_instance(n, cap, 20_000 + i));
    }
    out
}
