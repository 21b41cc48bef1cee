//! Cross-module consistency checks that need several subsystems at once:
//! dual bounds against fully converged column generation, scheduling against
//! the LP transcription, and enumeration against the scheduler.

mod common;

use common::{integer_duals, random_instance, random_valid_route, schedule_lp_oracle};
use ctsp::enumerate::{enumerate_all, enumerate_seeds, EnumerateOptions};
use ctsp::master::{self, all_singles_selection, fixed_cost_from_pool, ColumnPool, Cuts};
use ctsp::model::Direction;
use ctsp::pricing::{price_driver, GraphSkeleton, PriceStats, PricingConfig};
use ctsp::schedule;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

#[test]
fn schedule_agrees_with_lp_on_random_routes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    for seed in 0..5 {
        let inst = random_instance(6, 4, 1000 + seed);
        for _ in 0..100 {
            let route = random_valid_route(&inst, 4, &mut rng);
            let fast = schedule::feasible(&route, &inst);
            let oracle = schedule_lp_oracle(&route, &inst);
            match (fast, oracle) {
                (Some(s), Some(dur)) => {
                    assert!(
                        (s.duration as f64 - dur).abs() <= 1e-6 * (1.0 + dur),
                        "duration {} vs LP {dur}",
                        s.duration
                    );
                    checked += 1;
                }
                (None, None) => checked += 1,
                (f, o) => panic!(
                    "verdict mismatch on {:?}: fast={:?} lp={o:?}",
                    route.stops,
                    f.map(|s| s.duration)
                ),
            }
        }
    }
    assert!(checked >= 500);
}

/// The per-iteration dual bound must never exceed the fully converged
/// column-generation value.
#[test]
fn dual_bound_stays_below_converged_value() {
    for seed in 0..3 {
        let inst = random_instance(6, 3, 2000 + seed);
        let n = inst.n();
        let seeds = enumerate_seeds(&inst);
        let cbar = fixed_cost_from_pool(&seeds, inst.fixed_cost_multiplier);
        let mut pool = ColumnPool::from_route_pool(&seeds, cbar);
        let cuts = Cuts::inactive(n);
        let cfg = PricingConfig::default();
        let mut forbidden: Vec<Vec<Vec<usize>>> = vec![Vec::new(); 2 * n];
        let mut bounds = Vec::new();
        let z_final = loop {
            let mask = vec![true; pool.len()];
            let rmp = master::solve_rmp(&pool, &mask, &inst, &cuts, false).unwrap();
            let mut rc_star: f64 = 0.0;
            let mut added = 0;
            for dir in Direction::BOTH {
                for driver in 0..n {
                    let skel = GraphSkeleton::build(&inst, driver, dir, &cfg, &HashSet::new());
                    let mut stats = PriceStats::default();
                    let slot = dir.idx() * n + driver;
                    if let Some(p) = price_driver(
                        &skel,
                        &inst,
                        &rmp.duals,
                        cbar,
                        &cfg,
                        &mut forbidden[slot],
                        false,
                        &mut stats,
                    ) {
                        rc_star = rc_star.min(p.reduced_cost);
                        if p.reduced_cost < -1e-6 && pool.add(p.route, cbar) {
                            added += 1;
                        }
                    }
                }
            }
            bounds.push(rmp.objective + rc_star * (2 * n) as f64);
            if added == 0 {
                break rmp.objective;
            }
        };
        for (i, b) in bounds.iter().enumerate() {
            assert!(
                *b <= z_final + 1e-6 * (1.0 + z_final.abs()),
                "seed {seed} iteration {i}: bound {b} above converged {z_final}"
            );
        }
    }
}

/// Under unit costs, the ratio bound from the most violated column is a true
/// lower bound on the converged value.
#[test]
fn ratio_bound_stays_below_converged_unit_value() {
    for seed in 0..3 {
        let inst = random_instance(6, 3, 3000 + seed);
        let n = inst.n();
        let seeds = enumerate_seeds(&inst);
        let cbar = fixed_cost_from_pool(&seeds, inst.fixed_cost_multiplier);
        let mut pool = ColumnPool::from_route_pool(&seeds, cbar);
        let cuts = Cuts::inactive(n);
        let cfg = PricingConfig {
            unit_costs: true,
            ..PricingConfig::default()
        };
        let mut forbidden: Vec<Vec<Vec<usize>>> = vec![Vec::new(); 2 * n];
        let mut farleys = Vec::new();
        let z_final = loop {
            let mask = vec![true; pool.len()];
            let rmp = master::solve_rmp(&pool, &mask, &inst, &cuts, true).unwrap();
            let mut rc_star: f64 = f64::INFINITY;
            let mut added = 0;
            for dir in Direction::BOTH {
                for driver in 0..n {
                    let skel = GraphSkeleton::build(&inst, driver, dir, &cfg, &HashSet::new());
                    let mut stats = PriceStats::default();
                    let slot = dir.idx() * n + driver;
                    if let Some(p) = price_driver(
                        &skel,
                        &inst,
                        &rmp.duals,
                        cbar,
                        &cfg,
                        &mut forbidden[slot],
                        false,
                        &mut stats,
                    ) {
                        rc_star = rc_star.min(p.reduced_cost);
                        if p.reduced_cost < -1e-9 && pool.add(p.route, cbar) {
                            added += 1;
                        }
                    }
                }
            }
            if rc_star.is_finite() && rc_star < 1.0 - 1e-9 && rmp.objective > 0.0 {
                farleys.push(rmp.objective / (1.0 - rc_star));
            }
            if added == 0 {
                break rmp.objective;
            }
        };
        for (i, f) in farleys.iter().enumerate() {
            assert!(
                *f <= z_final + 1e-6 * (1.0 + z_final),
                "seed {seed} iteration {i}: ratio bound {f} above converged {z_final}"
            );
        }
    }
}

/// Enumeration under duals: the pool's own best reduced cost can never beat
/// the pricing optimum (the pool is a subset of all feasible routes).
#[test]
fn pricing_dominates_pool_reduced_costs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for seed in 0..3 {
        let inst = random_instance(5, 3, 4000 + seed);
        let n = inst.n();
        let pool = enumerate_all(&inst, &EnumerateOptions::default());
        let cbar = fixed_cost_from_pool(&enumerate_seeds(&inst), inst.fixed_cost_multiplier);
        let duals = integer_duals(n, &mut rng, 30_000);
        let cfg = PricingConfig::default();
        for dir in Direction::BOTH {
            for driver in 0..n {
                let skel = GraphSkeleton::build(&inst, driver, dir, &cfg, &HashSet::new());
                let mut forb = Vec::new();
                let mut stats = PriceStats::default();
                let priced = price_driver(
                    &skel, &inst, &duals, cbar, &cfg, &mut forb, false, &mut stats,
                );
                let pool_best = pool
                    .routes
                    .iter()
                    .filter(|r| r.direction == dir && r.driver == driver)
                    .map(|r| master::reduced_cost(r, (r.distance + cbar) as f64, &duals))
                    .fold(f64::INFINITY, f64::min);
                if let Some(p) = priced {
                    assert!(
                        p.reduced_cost <= pool_best + 1e-6 * (1.0 + pool_best.abs()),
                        "pricing {} vs pool best {pool_best}",
                        p.reduced_cost
                    );
                }
            }
        }
    }
}

/// Seeding the master with singles plus pairs always yields a feasible
/// restricted problem whose plan validates.
#[test]
fn seed_pool_supports_a_valid_plan() {
    for seed in 0..4 {
        let inst = random_instance(7, 4, 5000 + seed);
        let seeds = enumerate_seeds(&inst);
        let cbar = fixed_cost_from_pool(&seeds, inst.fixed_cost_multiplier);
        let cols = ColumnPool::from_route_pool(&seeds, cbar);
        let mask = vec![true; cols.len()];
        let warm = all_singles_selection(&cols, &inst).unwrap();
        let mip = master::mip_over_pool(
            &cols,
            &mask,
            &inst,
            &Cuts::inactive(inst.n()),
            false,
            None,
            Some(&warm),
        )
        .unwrap();
        let routes: Vec<_> = mip
            .selected
            .iter()
            .map(|&i| cols.columns[i].route.clone())
            .collect();
        let sol =
            ctsp::solution::Solution::from_selection(routes, &inst, mip.objective, 0.0).unwrap();
        sol.validate(&inst).unwrap();
    }
}
