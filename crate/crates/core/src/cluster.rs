//! Trajectory clustering: endpoint/displacement/angle features, seeded
//! k-means, silhouette-based choice of k and small-cluster purging.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::HyperParams;
use crate::scalar::Scalar;
use crate::tracker::Track;

pub const FEATURE_DIM: usize = 7;
pub const MAX_ITERATIONS: usize = 300;
pub const DEFAULT_SEED: u64 = 42;

/// `(x_first, y_first, x_last, y_last, dx, dy, lambda5 * angle)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackFeature<T>(pub [T; FEATURE_DIM]);

impl<T: Scalar> TrackFeature<T> {
    pub fn displacement(&self) -> (T, T) {
        (self.0[4], self.0[5])
    }

    pub fn angle_term(&self) -> T {
        self.0[6]
    }
}

pub fn featurize<T: Scalar>(t: &Track<T>, p: &HyperParams) -> Result<TrackFeature<T>> {
    let (a, b) = (t.first(), t.last());
    if a == b {
        return Err(Error::DegenerateTrack(t.id));
    }
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let mut theta = dy.atan2(dx);
    if p.angle_degrees {
        theta = theta.to_degrees();
    }
    Ok(TrackFeature([a.x, a.y, b.x, b.y, dx, dy, T::of(p.lambda5) * theta]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult<T, const D: usize = FEATURE_DIM> {
    pub k: usize,
    /// Cluster index per input point.
    pub assignments: Vec<usize>,
    pub centroids: Vec<[T; D]>,
    /// Mean silhouette; 0 for a single cluster.
    pub silhouette: T,
    /// Within-cluster sum of squares after each Lloyd update.
    pub inertia_trace: Vec<T>,
}

impl<T: Scalar, const D: usize> ClusteringResult<T, D> {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &a in &self.assignments {
            s[a] += 1;
        }
        s
    }

    pub fn inertia(&self) -> T {
        *self.inertia_trace.last().unwrap_or(&T::zero())
    }

    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignments.iter().enumerate().filter(move |(_, &a)| a == cluster).map(|(i, _)| i)
    }
}

#[inline]
fn dist2<T: Scalar, const D: usize>(a: &[T; D], b: &[T; D]) -> T {
    let mut s = T::zero();
    for i in 0..D {
        let d = a[i] - b[i];
        s = s + d * d;
    }
    s
}

#[inline]
pub fn euclidean<T: Scalar, const D: usize>(a: &[T; D], b: &[T; D]) -> T {
    dist2(a, b).sqrt()
}

/// Number of bitwise-distinct points.
pub fn distinct_count<T: Scalar, const D: usize>(points: &[[T; D]]) -> usize {
    let mut keys: Vec<[u64; D]> = points
        .iter()
        .map(|p| {
            let mut k = [0u64; D];
            for i in 0..D {
                // -0.0 and 0.0 are the same point.
                k[i] = (p[i] + T::zero()).as_f64().to_bits();
            }
            k
        })
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

fn nearest<T: Scalar, const D: usize>(p: &[T; D], centroids: &[[T; D]]) -> (usize, T) {
    let mut best = (0, dist2(p, &centroids[0]));
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = dist2(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn kmeans_pp<T: Scalar, const D: usize>(points: &[[T; D]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[T; D]> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0]).as_f64()).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let mut pick = n - 1;
        if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            // Rounding can run off the end; fall back to the heaviest point.
            if d2[pick] == 0.0 {
                pick = d2.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            }
        }
        let c = points[pick];
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, &c).as_f64());
        }
        centroids.push(c);
    }
    centroids
}

/// Seeded Lloyd k-means with k-means++ initialisation.
///
/// Stops when no assignment changes or after [`MAX_ITERATIONS`]. A cluster
/// left empty is reseeded with the point farthest from its centroid.
pub fn kmeans<T: Scalar, const D: usize>(points: &[[T; D]], k: usize, seed: u64) -> Result<ClusteringResult<T, D>> {
    let distinct = distinct_count(points);
    if k == 0 || k > distinct {
        return Err(Error::TooFewTracks { k, distinct });
    }
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp(points, k, &mut rng);
    let mut assignments = vec![usize::MAX; n];
    let mut inertia_trace = Vec::new();

    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        let mut cost = vec![T::zero(); n];
        for (i, p) in points.iter().enumerate() {
            let (j, d) = nearest(p, &centroids);
            cost[i] = d;
            if assignments[i] != j {
                assignments[i] = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sizes = vec![0usize; k];
        for &a in &assignments {
            sizes[a] += 1;
        }
        while let Some(empty) = sizes.iter().position(|&s| s == 0) {
            let far = (0..n)
                .filter(|&i| sizes[assignments[i]] > 1)
                .max_by(|&a, &b| cost[a].partial_cmp(&cost[b]).unwrap().then(b.cmp(&a)))
                .expect("k <= distinct points leaves a multi-member cluster");
            sizes[assignments[far]] -= 1;
            assignments[far] = empty;
            sizes[empty] = 1;
            cost[far] = T::zero();
        }
        centroids = means(points, &assignments, k);
        inertia_trace.push(inertia(points, &assignments, &centroids));
    }
    if inertia_trace.is_empty() {
        inertia_trace.push(inertia(points, &assignments, &centroids));
    }

    let silhouette = if k >= 2 { silhouette_index(points, &assignments)? } else { T::zero() };
    Ok(ClusteringResult { k, assignments, centroids, silhouette, inertia_trace })
}

fn means<T: Scalar, const D: usize>(points: &[[T; D]], assignments: &[usize], k: usize) -> Vec<[T; D]> {
    let mut sums = vec![[T::zero(); D]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        for i in 0..D {
            sums[a][i] = sums[a][i] + p[i];
        }
        counts[a] += 1;
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        let c = T::of(c as f64);
        for v in s.iter_mut() {
            *v = *v / c;
        }
    }
    sums
}

fn inertia<T: Scalar, const D: usize>(points: &[[T; D]], assignments: &[usize], centroids: &[[T; D]]) -> T {
    points.iter().zip(assignments).map(|(p, &a)| dist2(p, &centroids[a])).sum()
}

/// Mean silhouette with Euclidean distances.
///
/// Points in singleton clusters contribute 0, as do points with `a = b = 0`.
pub fn silhouette_index<T: Scalar, const D: usize>(points: &[[T; D]], assignments: &[usize]) -> Result<T> {
    let k = assignments.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::SingleCluster);
    }
    let per_point: Vec<T> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let own = assignments[i];
            if sizes[own] <= 1 {
                return T::zero();
            }
            let mut sums = vec![T::zero(); k];
            for (j, q) in points.iter().enumerate() {
                if j != i {
                    sums[assignments[j]] = sums[assignments[j]] + euclidean(p, q);
                }
            }
            let a = sums[own] / T::of((sizes[own] - 1) as f64);
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / T::of(sizes[c] as f64))
                .fold(T::infinity(), T::min);
            let m = a.max(b);
            if m.is_zero() {
                T::zero()
            } else {
                (b - a) / m
            }
        })
        .collect();
    Ok(per_point.iter().copied().sum::<T>() / T::of(points.len() as f64))
}

/// Runs k-means for every k in `k_min..=min(k_max, distinct)` (seed `seed + k`)
/// and keeps the highest silhouette, preferring the smaller k on ties.
pub fn select_k<T: Scalar, const D: usize>(
    points: &[[T; D]],
    p: &HyperParams,
    seed: u64,
) -> Result<ClusteringResult<T, D>> {
    let distinct = distinct_count(points);
    if distinct < p.k_min {
        return Err(Error::TooFewTracks { k: p.k_min, distinct });
    }
    let hi = p.k_max.min(distinct);
    let runs: Vec<ClusteringResult<T, D>> = (p.k_min..=hi)
        .into_par_iter()
        .map(|k| kmeans(points, k, seed.wrapping_add(k as u64)))
        .collect::<Result<_>>()?;
    let mut best: Option<ClusteringResult<T, D>> = None;
    for r in runs {
        if best.as_ref().is_none_or(|b| r.silhouette > b.silhouette) {
            best = Some(r);
        }
    }
    Ok(best.expect("k range is non-empty"))
}

/// Outcome of [`purge_and_recluster`]; `result` is indexed like `survivors`.
#[derive(Debug, Clone, PartialEq)]
pub struct PurgeOutcome<T, const D: usize = FEATURE_DIM> {
    pub result: ClusteringResult<T, D>,
    /// Indices into the original point list, ascending.
    pub survivors: Vec<usize>,
    pub purged: Vec<usize>,
}

fn single_cluster<T: Scalar, const D: usize>(points: &[[T; D]]) -> ClusteringResult<T, D> {
    let assignments = vec![0; points.len()];
    let centroids = means(points, &assignments, 1);
    let inertia_trace = vec![inertia(points, &assignments, &centroids)];
    ClusteringResult { k: 1, assignments, centroids, silhouette: T::zero(), inertia_trace }
}

/// Deletes the members of clusters smaller than `lambda6` and re-runs
/// k-means with k reduced by the number of deleted clusters, until every
/// cluster is large enough. When fewer than two clusters would remain the
/// survivors form one cluster.
pub fn purge_and_recluster<T: Scalar, const D: usize>(
    result: &ClusteringResult<T, D>,
    points: &[[T; D]],
    p: &HyperParams,
    seed: u64,
) -> Result<PurgeOutcome<T, D>> {
    let mut current = result.clone();
    let mut alive: Vec<usize> = (0..points.len()).collect();
    let mut purged = Vec::new();
    loop {
        let sizes = current.cluster_sizes();
        let small: Vec<bool> = sizes.iter().map(|&s| s < p.lambda6).collect();
        let m = small.iter().filter(|&&s| s).count();
        if m == 0 {
            purged.sort_unstable();
            return Ok(PurgeOutcome { result: current, survivors: alive, purged });
        }
        let mut keep = Vec::with_capacity(alive.len());
        for (local, &orig) in alive.iter().enumerate() {
            if small[current.assignments[local]] {
                purged.push(orig);
            } else {
                keep.push(orig);
            }
        }
        alive = keep;
        if alive.len() < p.k_min {
            return Err(Error::AllPurged);
        }
        let sub: Vec<[T; D]> = alive.iter().map(|&i| points[i]).collect();
        let k_next = (current.k - m).min(distinct_count(&sub));
        current =
            if k_next < 2 { single_cluster(&sub) } else { kmeans(&sub, k_next, seed.wrapping_add(k_next as u64))? };
    }
}
