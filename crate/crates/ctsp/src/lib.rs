//! Solver library for the commute trip sharing problem: paired inbound/outbound
//! commute trips are matched into shared vehicle routes subject to time windows,
//! ride-duration limits, capacity, and driver balance. Plans minimize the number
//! of vehicles first and total driven distance second.
//!
//! The main entry points are [`enumerate::enumerate_routes`] plus a set-partitioning
//! MIP (exact route enumeration), [`bnp::solve_bpa`] (branch-and-price),
//! [`bnp::root_heuristic`] (time-budgeted), and [`cluster::cluster_commuters`]
//! for decomposing large commuter pools by home location.

pub mod bnp;
pub mod cluster;
pub mod enumerate;
pub mod harness;
pub mod lp;
pub mod master;
pub mod model;
pub mod pricing;
pub mod schedule;
pub mod solution;
