//! Seeded k-means++ over 2-D points: D^2 seeding followed by Lloyd
//! iteration, with deterministic tie-breaking so equal inputs and seed give
//! bit-identical output.

use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A 2-D sample; in this crate `x` carries velocity and `y` carries time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dist2(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Result of one k-means++ run: final centroids, per-point assignment, and
/// the summed squared distance to the assigned centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centroids: Vec<Point2>,
    /// `assignment[p]` is the centroid index of point `p`.
    pub assignment: Vec<usize>,
    pub cost: f64,
}

impl Clustering {
    pub fn members(&self, centroid: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c == centroid)
            .map(|(p, _)| p)
            .collect()
    }
}

const MAX_ITERS: usize = 100;
const CONVERGENCE_EPS: f64 = 1e-9;

/// Index of the nearest centroid to `point`, ties broken by lowest index.
pub fn assign(point: Point2, centroids: &[Point2]) -> Result<usize> {
    if centroids.is_empty() {
        return Err(Error::Clustering("empty centroid list".into()));
    }
    let mut best = 0usize;
    let mut best_d = point.dist2(&centroids[0]);
    for (i, c) in centroids.iter().enumerate().skip(1) {
        let d = point.dist2(c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    Ok(best)
}

fn assign_all(points: &[Point2], centroids: &[Point2]) -> (Vec<usize>, f64) {
    let mut assignment = Vec::with_capacity(points.len());
    let mut cost = 0.0;
    for p in points {
        let mut best = 0usize;
        let mut best_d = p.dist2(&centroids[0]);
        for (i, c) in centroids.iter().enumerate().skip(1) {
            let d = p.dist2(c);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        assignment.push(best);
        cost += best_d;
    }
    (assignment, cost)
}

/// D^2 seeding: first centroid uniform, each further centroid sampled with
/// probability proportional to the squared distance from the nearest chosen
/// centroid. Covered points carry zero weight, so duplicates are only chosen
/// once every distinct location is covered.
fn seed_plus_plus(points: &[Point2], k: usize, rng: &mut ChaCha8Rng) -> Vec<Point2> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())]);
    let mut min_d2: Vec<f64> = points.iter().map(|p| p.dist2(&centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = min_d2.iter().sum();
        let chosen = if total > 0.0 {
            let mut u = rng.random_range(0.0..total);
            let mut idx = None;
            for (i, &w) in min_d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                idx = Some(i);
                if u < w {
                    break;
                }
                u -= w;
            }
            idx.expect("positive total weight implies a positive-weight point")
        } else {
            // every point coincides with a centroid; sample uniformly
            rng.random_range(0..points.len())
        };
        let c = points[chosen];
        centroids.push(c);
        for (i, p) in points.iter().enumerate() {
            let d = p.dist2(&c);
            if d < min_d2[i] {
                min_d2[i] = d;
            }
        }
    }
    centroids
}

/// Move each empty cluster's centroid onto the unclaimed point farthest from
/// its assigned centroid, so all k clusters stay populated. Returns true if
/// anything moved.
fn repair_empty(
    points: &[Point2],
    centroids: &mut [Point2],
    assignment: &mut [usize],
) -> bool {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    for &a in assignment.iter() {
        counts[a] += 1;
    }
    let mut taken = vec![false; points.len()];
    let mut repaired = false;
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        // farthest point whose current cluster keeps >= 2 members
        let mut best: Option<(f64, usize)> = None;
        for (p, point) in points.iter().enumerate() {
            if taken[p] || counts[assignment[p]] < 2 {
                continue;
            }
            let d = point.dist2(&centroids[assignment[p]]);
            let better = match best {
                None => true,
                Some((bd, _)) => d > bd,
            };
            if better {
                best = Some((d, p));
            }
        }
        if let Some((_, p)) = best {
            counts[assignment[p]] -= 1;
            centroids[c] = points[p];
            assignment[p] = c;
            counts[c] = 1;
            taken[p] = true;
            repaired = true;
        }
    }
    repaired
}

/// k-means++ with Lloyd iteration. Deterministic for equal
/// `(points, k, seed)`. Errors when `k == 0` or `k > points.len()`.
pub fn kmeanspp(points: &[Point2], k: usize, seed: u64) -> Result<Clustering> {
    if k == 0 {
        return Err(Error::Clustering("k must be at least 1".into()));
    }
    if k > points.len() {
        return Err(Error::Clustering(format!(
            "k = {} exceeds point count {}",
            k,
            points.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(points, k, &mut rng);
    let (mut assignment, mut cost) = assign_all(points, &centroids);
    if repair_empty(points, &mut centroids, &mut assignment) {
        let (a, c) = assign_all(points, &centroids);
        assignment = a;
        cost = c;
    }

    for _ in 0..MAX_ITERS {
        // update step: mean of members
        let mut sums = vec![(0.0f64, 0.0f64, 0usize); k];
        for (p, &a) in assignment.iter().enumerate() {
            sums[a].0 += points[p].x;
            sums[a].1 += points[p].y;
            sums[a].2 += 1;
        }
        let mut max_shift = 0.0f64;
        for c in 0..k {
            if sums[c].2 == 0 {
                continue;
            }
            let n = sums[c].2 as f64;
            let next = Point2::new(sums[c].0 / n, sums[c].1 / n);
            let shift = next.dist2(&centroids[c]).sqrt();
            if shift > max_shift {
                max_shift = shift;
            }
            centroids[c] = next;
        }

        let (next_assignment, next_cost) = assign_all(points, &centroids);
        debug_assert!(
            next_cost <= cost + 1e-9,
            "Lloyd iteration increased cost: {cost} -> {next_cost}"
        );
        assignment = next_assignment;
        cost = next_cost;
        if repair_empty(points, &mut centroids, &mut assignment) {
            let (a, c) = assign_all(points, &centroids);
            assignment = a;
            cost = c;
            continue;
        }
        if max_shift < CONVERGENCE_EPS {
            break;
        }
    }
    Ok(Clustering {
        centroids,
        assignment,
        cost,
    })
}
