//! Size-capped clustering of commuters by home location: squared-distance
//! weighted seeding, then alternating capacity-constrained assignment and
//! centroid updates until the assignment stabilizes. The assignment step is
//! a small generalized-assignment program solved exactly; with Euclidean
//! distances its relaxation is a transportation problem, so the LP optimum
//! is usually integral and the binary solve is a rare fallback.

use crate::lp::{solve_binary_mip, solve_lp, LinearProgram, LpStatus, MipOptions, Relation, Sense};
use crate::model::Instance;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("need k*N >= point count: k={k}, cap={cap}, points={points}")]
    Capacity { k: usize, cap: usize, points: usize },
    #[error("k={k} exceeds point count {points}")]
    TooManyCenters { k: usize, points: usize },
    #[error("assignment solve failed: {0}")]
    Assignment(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct Clustering {
    pub centers: Vec<[f64; 2]>,
    /// Center index per commuter.
    pub assignment: Vec<usize>,
    /// Total Euclidean distance from points to their assigned centers.
    pub objective: f64,
    pub restarts_used: usize,
    pub seed: u64,
    pub iterations: usize,
    /// Assignment objective after each accepted iteration of the winning run.
    pub objective_trace: Vec<f64>,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Squared-distance weighted center seeding: the first center uniform over
/// the points, each next drawn with probability proportional to the squared
/// distance to the nearest chosen center. Duplicated points degenerate the
/// weights to zero, in which case the next center is uniform over the points
/// not yet chosen.
pub fn kmeanspp_init(
    points: &[[f64; 2]],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<[f64; 2]>, ClusterError> {
    if k > points.len() {
        return Err(ClusterError::TooManyCenters {
            k,
            points: points.len(),
        });
    }
    let mut chosen_idx: Vec<usize> = Vec::with_capacity(k);
    let first = rng.gen_range(0..points.len());
    chosen_idx.push(first);
    let mut nearest_sq: Vec<f64> = points
        .iter()
        .map(|&p| dist(p, points[first]).powi(2))
        .collect();
    while chosen_idx.len() < k {
        let total: f64 = nearest_sq.iter().sum();
        let next = if total > 0.0 {
            let mut draw = rng.gen_range(0.0..total);
            let mut pick = points.len() - 1;
            for (i, &w) in nearest_sq.iter().enumerate() {
                if draw < w {
                    pick = i;
                    break;
                }
                draw -= w;
            }
            pick
        } else {
            // All remaining points coincide with chosen centers.
            let free: Vec<usize> = (0..points.len())
                .filter(|i| !chosen_idx.contains(i))
                .collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen_idx.push(next);
        for (i, d) in nearest_sq.iter_mut().enumerate() {
            *d = d.min(dist(points[i], points[next]).powi(2));
        }
    }
    Ok(chosen_idx.into_iter().map(|i| points[i]).collect())
}

/// Exact capacity-constrained assignment of points to centers minimizing
/// total distance; at most `cap` points per center.
pub fn assign(
    points: &[[f64; 2]],
    centers: &[[f64; 2]],
    cap: usize,
) -> Result<Vec<usize>, ClusterError> {
    let np = points.len();
    let k = centers.len();
    if k * cap < np {
        return Err(ClusterError::Capacity { k, cap, points: np });
    }
    let var = |c: usize, u: usize| c * k + u;
    let mut obj = vec![0.0; np * k];
    for (c, &p) in points.iter().enumerate() {
        for (u, &ctr) in centers.iter().enumerate() {
            obj[var(c, u)] = dist(p, ctr);
        }
    }
    let mut lp = LinearProgram::new(Sense::Min, obj);
    for j in 0..np * k {
        lp.set_bounds(j, 0.0, 1.0);
    }
    for c in 0..np {
        let coeffs: Vec<(usize, f64)> = (0..k).map(|u| (var(c, u), 1.0)).collect();
        lp.add_row(coeffs, Relation::Eq, 1.0);
    }
    for u in 0..k {
        let coeffs: Vec<(usize, f64)> = (0..np).map(|c| (var(c, u), 1.0)).collect();
        lp.add_row(coeffs, Relation::Le, cap as f64);
    }
    let rel = solve_lp(&lp).map_err(|e| ClusterError::Assignment(e.to_string()))?;
    if rel.status != LpStatus::Optimal {
        return Err(ClusterError::Assignment(format!("{:?}", rel.status)));
    }
    let integral = rel.x.iter().all(|v| (v - v.round()).abs() <= 1e-6);
    let x = if integral {
        rel.x
    } else {
        let binaries: Vec<usize> = (0..np * k).collect();
        let mip = solve_binary_mip(&lp, &binaries, &MipOptions::default())
            .map_err(|e| ClusterError::Assignment(e.to_string()))?;
        if mip.status != LpStatus::Optimal {
            return Err(ClusterError::Assignment(format!("{:?}", mip.status)));
        }
        mip.x
    };
    let mut out = vec![0usize; np];
    for c in 0..np {
        let u = (0..k)
            .max_by(|&a, &b| x[var(c, a)].partial_cmp(&x[var(c, b)]).unwrap())
            .unwrap();
        out[c] = u;
    }
    Ok(out)
}

fn assignment_objective(points: &[[f64; 2]], centers: &[[f64; 2]], asg: &[usize]) -> f64 {
    points
        .iter()
        .zip(asg)
        .map(|(&p, &u)| dist(p, centers[u]))
        .sum()
}

const MAX_ITERATIONS: usize = 500;

struct LloydRun {
    centers: Vec<[f64; 2]>,
    assignment: Vec<usize>,
    objective: f64,
    iterations: usize,
    trace: Vec<f64>,
}

fn lloyd_run(
    points: &[[f64; 2]],
    cap: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<LloydRun, ClusterError> {
    let mut centers = kmeanspp_init(points, k, rng)?;
    let mut asg = assign(points, &centers, cap)?;
    let mut obj = assignment_objective(points, &centers, &asg);
    let mut trace = vec![obj];
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    seen.insert(asg.clone());
    let mut iters = 1usize;
    loop {
        if iters >= MAX_ITERATIONS {
            break;
        }
        // Centroid update: each center moves to the mean of its points.
        let mut next_centers = centers.clone();
        for (u, ctr) in next_centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..points.len()).filter(|&c| asg[c] == u).collect();
            if members.is_empty() {
                continue;
            }
            let mut mean = [0.0, 0.0];
            for &c in &members {
                mean[0] += points[c][0];
                mean[1] += points[c][1];
            }
            *ctr = [
                mean[0] / members.len() as f64,
                mean[1] / members.len() as f64,
            ];
        }
        let next_asg = assign(points, &next_centers, cap)?;
        let next_obj = assignment_objective(points, &next_centers, &next_asg);
        iters += 1;
        // The mean update optimizes squared distance, not the assignment
        // objective; back off rather than accept a worse iterate.
        if next_obj > obj + 1e-9 {
            break;
        }
        let stabilized = next_asg == asg;
        let cycled = !seen.insert(next_asg.clone());
        centers = next_centers;
        asg = next_asg;
        obj = next_obj;
        trace.push(obj);
        if stabilized || cycled {
            break;
        }
    }
    Ok(LloydRun {
        centers,
        assignment: asg,
        objective: obj,
        iterations: iters,
        trace,
    })
}

/// Multi-restart clustering of commuter homes into groups of at most `cap`.
/// The run with the smallest assignment objective wins; ties go to the
/// lowest restart index.
pub fn cluster_commuters(
    inst: &Instance,
    cap: usize,
    restarts: usize,
    seed: u64,
) -> Result<Clustering, ClusterError> {
    let points: Vec<[f64; 2]> = inst.commuters.iter().map(|c| c.home).collect();
    cluster_points(&points, cap, restarts, seed)
}

pub fn cluster_points(
    points: &[[f64; 2]],
    cap: usize,
    restarts: usize,
    seed: u64,
) -> Result<Clustering, ClusterError> {
    assert!(cap >= 1 && restarts >= 1);
    let k = points.len().div_ceil(cap);
    let runs: Vec<Result<LloydRun, ClusterError>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
            lloyd_run(points, cap, k, &mut rng)
        })
        .collect();
    let mut best: Option<(usize, LloydRun)> = None;
    for (r, run) in runs.into_iter().enumerate() {
        let run = run?;
        let better = match &best {
            None => true,
            Some((_, b)) => run.objective < b.objective - 1e-12,
        };
        if better {
            best = Some((r, run));
        }
    }
    let (r, run) = best.expect("restarts >= 1");
    Ok(Clustering {
        centers: run.centers,
        assignment: run.assignment,
        objective: run.objective,
        restarts_used: r + 1,
        seed,
        iterations: run.iterations,
        objective_trace: run.trace,
    })
}

/// Materialize one sub-instance per non-empty cluster, in center order.
/// Returns each cluster's member list (original commuter ids) with its
/// instance.
pub fn split_instance(inst: &Instance, clustering: &Clustering) -> Vec<(Vec<usize>, Instance)> {
    let k = clustering.centers.len();
    let mut out = Vec::new();
    for u in 0..k {
        let members: Vec<usize> = (0..inst.n())
            .filter(|&c| clustering.assignment[c] == u)
            .collect();
        if members.is_empty() {
            continue;
        }
        let sub = inst
            .sub_instance(&members)
            .expect("cluster sub-instance must build");
        out.push((members, sub));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools::Itertools;

    #[test]
    fn k_equals_points_selects_every_point() {
        let pts = vec![[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let centers = kmeanspp_init(&pts, 4, &mut rng).unwrap();
        let mut got: Vec<_> = centers.iter().map(|c| (c[0] as i64, c[1] as i64)).collect();
        got.sort_unstable();
        assert_eq!(got, vec![(0, 0), (0, 10), (10, 0), (10, 10)]);
    }

    #[test]
    fn k_one_is_a_uniform_draw() {
        let pts = vec![[0.0, 0.0], [5.0, 0.0], [9.0, 0.0]];
        let mut counts = [0usize; 3];
        for seed in 0..3000 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = kmeanspp_init(&pts, 1, &mut rng).unwrap();
            let idx = pts.iter().position(|&p| p == c[0]).unwrap();
            counts[idx] += 1;
        }
        for &c in &counts {
            // 3000 draws, p = 1/3: allow 4 sigma.
            let mean = 1000.0;
            let sd = (3000.0f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
            assert!((c as f64 - mean).abs() < 4.0 * sd, "counts {counts:?}");
        }
    }

    #[test]
    fn seeding_frequencies_match_squared_distance_law() {
        // Four collinear points; k=2. First center uniform, second by the
        // squared-distance weights. Compare the empirical distribution of
        // unordered center pairs over many seeds to the analytic one.
        let pts = vec![[0.0, 0.0], [1.0, 0.0], [3.0, 0.0], [7.0, 0.0]];
        let mut analytic = std::collections::BTreeMap::new();
        for first in 0..4 {
            for second in 0..4 {
                if second == first {
                    continue;
                }
                let weights: Vec<f64> = (0..4).map(|i| dist(pts[i], pts[first]).powi(2)).collect();
                let total: f64 = weights.iter().sum();
                let p = 0.25 * weights[second] / total;
                let key = (first.min(second), first.max(second));
                *analytic.entry(key).or_insert(0.0) += p;
            }
        }
        let trials = 10_000usize;
        let mut counts = std::collections::BTreeMap::new();
        for seed in 0..trials as u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let centers = kmeanspp_init(&pts, 2, &mut rng).unwrap();
            let idx: Vec<usize> = centers
                .iter()
                .map(|c| pts.iter().position(|p| p == c).unwrap())
                .collect();
            let key = (idx[0].min(idx[1]), idx[0].max(idx[1]));
            *counts.entry(key).or_insert(0usize) += 1;
        }
        for (key, p) in analytic {
            let got = *counts.get(&key).unwrap_or(&0) as f64;
            let mean = p * trials as f64;
            let sd = (trials as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (got - mean).abs() <= 3.0 * sd.max(1.0),
                "pair {key:?}: got {got}, expected {mean:.1} +- {sd:.1}"
            );
        }
    }

    #[test]
    fn colocated_centers_give_identity_assignment() {
        let pts = vec![[0.0, 0.0], [100.0, 0.0]];
        let centers = pts.clone();
        let asg = assign(&pts, &centers, 1).unwrap();
        assert_eq!(asg, vec![0, 1]);
        let obj = assignment_objective(&pts, &centers, &asg);
        assert_eq!(obj, 0.0);
    }

    #[test]
    fn uncapped_assignment_is_nearest_center() {
        let pts = vec![[0.0, 0.0], [1.0, 0.0], [9.0, 0.0], [10.0, 0.0]];
        let centers = vec![[0.5, 0.0], [9.5, 0.0]];
        let asg = assign(&pts, &centers, 10).unwrap();
        assert_eq!(asg, vec![0, 0, 1, 1]);
    }

    /// Exhaustive assignment oracle for small cases.
    fn exhaustive_assign(points: &[[f64; 2]], centers: &[[f64; 2]], cap: usize) -> f64 {
        let k = centers.len();
        let mut best = f64::INFINITY;
        for asg in (0..points.len()).map(|_| 0..k).multi_cartesian_product() {
            let mut counts = vec![0usize; k];
            for &u in &asg {
                counts[u] += 1;
            }
            if counts.iter().any(|&c| c > cap) {
                continue;
            }
            let obj = assignment_objective(points, centers, &asg);
            best = best.min(obj);
        }
        best
    }

    #[test]
    fn capacity_binding_assignment_matches_exhaustive() {
        let pts = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [10.0, 0.0]];
        let centers = vec![[0.0, 0.0], [10.0, 0.0]];
        let asg = assign(&pts, &centers, 2).unwrap();
        let got = assignment_objective(&pts, &centers, &asg);
        let want = exhaustive_assign(&pts, &centers, 2);
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        let mut counts = [0usize; 2];
        for &u in &asg {
            counts[u] += 1;
        }
        assert!(counts.iter().all(|&c| c <= 2));
    }

    #[test]
    fn random_assignments_match_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..120 {
            let np: usize = rng.gen_range(2..=8);
            let pts: Vec<[f64; 2]> = (0..np)
                .map(|_| [rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)])
                .collect();
            let centers: Vec<[f64; 2]> = (0..2)
                .map(|_| [rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)])
                .collect();
            let cap = rng.gen_range(np.div_ceil(2)..=np);
            let asg = assign(&pts, &centers, cap).unwrap();
            let got = assignment_objective(&pts, &centers, &asg);
            let want = exhaustive_assign(&pts, &centers, cap);
            assert!(
                (got - want).abs() <= 1e-6 * (1.0 + want),
                "trial {trial}: {got} vs {want}"
            );
            let mut counts = vec![0usize; centers.len()];
            for &u in &asg {
                counts[u] += 1;
            }
            assert!(counts.iter().all(|&c| c <= cap));
        }
    }

    #[test]
    fn single_blob_collapses_to_one_cluster() {
        let pts = vec![[5.0, 5.0]; 7];
        let out = cluster_points(&pts, 10, 5, 42).unwrap();
        assert_eq!(out.centers.len(), 1);
        assert!(out.objective.abs() < 1e-12);
        assert!(out.assignment.iter().all(|&u| u == 0));
    }

    #[test]
    fn separated_blobs_are_recovered() {
        let mut pts = Vec::new();
        for i in 0..5 {
            pts.push([i as f64 * 3.0, 0.0]);
        }
        for i in 0..5 {
            pts.push([1000.0 + i as f64 * 3.0, 0.0]);
        }
        let out = cluster_points(&pts, 5, 100, 7).unwrap();
        // The partition must split exactly at the gap.
        let left: HashSet<usize> = (0..10)
            .filter(|&i| out.assignment[i] == out.assignment[0])
            .collect();
        let want: HashSet<usize> = (0..5).collect();
        assert_eq!(left, want, "assignment {:?}", out.assignment);

        // And the objective equals the best two-part split found by brute
        // force over all balanced partitions.
        let mut best = f64::INFINITY;
        for members in (0..10usize).combinations(5) {
            let rest: Vec<usize> = (0..10).filter(|i| !members.contains(i)).collect();
            let mean = |ids: &[usize]| -> [f64; 2] {
                let mut m = [0.0, 0.0];
                for &i in ids {
                    m[0] += pts[i][0];
                    m[1] += pts[i][1];
                }
                [m[0] / ids.len() as f64, m[1] / ids.len() as f64]
            };
            let (ca, cb) = (mean(&members), mean(&rest));
            let obj: f64 = members.iter().map(|&i| dist(pts[i], ca)).sum::<f64>()
                + rest.iter().map(|&i| dist(pts[i], cb)).sum::<f64>();
            best = best.min(obj);
        }
        assert!(out.objective <= best + 1e-6, "{} vs {best}", out.objective);
    }

    #[test]
    fn cluster_size_cap_always_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let np: usize = rng.gen_range(5..=20);
            let pts: Vec<[f64; 2]> = (0..np)
                .map(|_| [rng.gen_range(0.0..500.0), rng.gen_range(0.0..500.0)])
                .collect();
            let cap = rng.gen_range(2..=6);
            let out = cluster_points(&pts, cap, 10, 99).unwrap();
            let k = np.div_ceil(cap);
            assert_eq!(out.centers.len(), k);
            let mut counts = vec![0usize; k];
            for &u in &out.assignment {
                counts[u] += 1;
            }
            assert!(counts.iter().all(|&c| c <= cap), "counts {counts:?}");
        }
    }
}
