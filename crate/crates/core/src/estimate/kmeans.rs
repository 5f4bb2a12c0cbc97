use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAX_LLOYD_ITERATIONS: usize = 300;
/// Independent k-means++ starts; the lowest-SSE result is kept.
const RESTARTS: u64 = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterModel<T> {
    pub centroids: Vec<Vec<T>>,
    /// Cluster index of every point.
    pub assignment: Vec<usize>,
    pub sse: T,
}

impl<T: Scalar> ClusterModel<T> {
    pub fn cluster_count(&self) -> usize {
        self.centroids.len()
    }

    pub fn members(&self, g: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(move |(_, &a)| a == g)
            .map(|(i, _)| i)
    }
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Sum over clusters of squared distances from members to their centroid.
pub fn sse<T: Scalar>(points: &[Vec<T>], centroids: &[Vec<T>], assignment: &[usize]) -> Result<T> {
    if assignment.len() != points.len() {
        return Err(Error::InvalidArgument(format!(
            "{} assignments for {} points",
            assignment.len(),
            points.len()
        )));
    }
    points
        .iter()
        .zip(assignment)
        .map(|(p, &g)| {
            centroids.get(g).map(|c| sq_dist(p, c)).ok_or_else(|| {
                Error::InvalidArgument(format!("point assigned to missing cluster {g}"))
            })
        })
        .sum()
}

fn check_points<T: Scalar>(points: &[Vec<T>], g: usize) -> Result<()> {
    if g == 0 {
        return Err(Error::InvalidArgument(
            "cluster count must be positive".into(),
        ));
    }
    if points.len() < g {
        return Err(Error::InvalidArgument(format!(
            "{} points cannot form {g} clusters",
            points.len()
        )));
    }
    let dim = points[0].len();
    if dim == 0 || points.iter().any(|p| p.len() != dim) {
        return Err(Error::InvalidArgument(
            "points must share a non-zero dimension".into(),
        ));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("points must be finite".into()));
    }
    Ok(())
}

fn nearest<T: Scalar>(p: &[T], centroids: &[Vec<T>]) -> (usize, T) {
    centroids
        .iter()
        .enumerate()
        .map(|(g, c)| (g, sq_dist(p, c)))
        .fold(
            (0, T::infinity()),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        )
}

fn plus_plus_init<T: Scalar>(points: &[Vec<T>], g: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    while centroids.len() < g {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| nearest(p, &centroids).1.as_f64())
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            d2.iter()
                .position(|&d| {
                    r -= d;
                    r < 0.0
                })
                .unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap_or(0))
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[pick].clone());
    }
    centroids
}

/// Moves the worst-fitting point of a multi-member cluster into each empty cluster.
fn fill_empty<T: Scalar>(points: &[Vec<T>], centroids: &mut [Vec<T>], assignment: &mut [usize]) {
    let g = centroids.len();
    loop {
        let mut sizes = vec![0usize; g];
        for &a in assignment.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let donor = (0..points.len())
            .filter(|&i| sizes[assignment[i]] > 1)
            .map(|i| (i, sq_dist(&points[i], &centroids[assignment[i]])))
            .fold(None::<(usize, T)>, |best, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        let Some((i, _)) = donor else { return };
        assignment[i] = empty;
        centroids[empty] = points[i].clone();
    }
}

fn update_centroids<T: Scalar>(points: &[Vec<T>], assignment: &[usize], g: usize) -> Vec<Vec<T>> {
    let dim = points[0].len();
    let mut sums = vec![vec![T::zero(); dim]; g];
    let mut counts = vec![0usize; g];
    for (p, &a) in points.iter().zip(assignment) {
        counts[a] += 1;
        for (s, &v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, c)| {
            let c = T::from_usize_lossy(c.max(1));
            s.into_iter().map(|v| v / c).collect()
        })
        .collect()
}

fn lloyd<T: Scalar>(
    points: &[Vec<T>],
    g: usize,
    rng: &mut ChaCha8Rng,
    trace: &mut Vec<T>,
) -> ClusterModel<T> {
    let mut centroids = plus_plus_init(points, g, rng);
    let mut assignment: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
    fill_empty(points, &mut centroids, &mut assignment);
    trace.push(sse(points, &centroids, &assignment).expect("assignment covers all points"));
    for _ in 0..MAX_LLOYD_ITERATIONS {
        centroids = update_centroids(points, &assignment, g);
        trace.push(sse(points, &centroids, &assignment).expect("assignment covers all points"));
        let mut next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        // keep the current cluster on exact distance ties so the loop terminates
        for (i, n) in next.iter_mut().enumerate() {
            let cur = assignment[i];
            if sq_dist(&points[i], &centroids[cur]) <= sq_dist(&points[i], &centroids[*n]) {
                *n = cur;
            }
        }
        fill_empty(points, &mut centroids, &mut next);
        if next == assignment {
            break;
        }
        assignment = next;
        trace.push(sse(points, &centroids, &assignment).expect("assignment covers all points"));
    }
    let centroids = update_centroids(points, &assignment, g);
    let sse = sse(points, &centroids, &assignment).expect("assignment covers all points");
    ClusterModel {
        centroids,
        assignment,
        sse,
    }
}

/// k-means with k-means++ seeding; deterministic for a given seed. Returns
/// the best of several restarts and the SSE after every half-step of the
/// winning run.
pub fn kmeans_cluster_traced<T: Scalar>(
    points: &[Vec<T>],
    g: usize,
    seed: u64,
) -> Result<(ClusterModel<T>, Vec<T>)> {
    check_points(points, g)?;
    let mut best: Option<(ClusterModel<T>, Vec<T>)> = None;
    for restart in 0..RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart);
        let mut trace = Vec::new();
        let model = lloyd(points, g, &mut rng, &mut trace);
        if best.as_ref().is_none_or(|(b, _)| model.sse < b.sse) {
            best = Some((model, trace));
        }
    }
    Ok(best.expect("at least one restart"))
}

pub fn kmeans_cluster<T: Scalar>(
    points: &[Vec<T>],
    g: usize,
    seed: u64,
) -> Result<ClusterModel<T>> {
    kmeans_cluster_traced(points, g, seed).map(|(m, _)| m)
}

/// Picks the cluster count at the knee of the SSE curve: the `g` whose
/// point lies farthest from the chord joining the first and last points of
/// the curve. Ties go to the smaller `g`.
pub fn elbow_g<T: Scalar>(
    points: &[Vec<T>],
    g_range: RangeInclusive<usize>,
    seed: u64,
) -> Result<usize> {
    let (lo, hi) = (*g_range.start(), *g_range.end());
    if g_range.is_empty() || lo == 0 {
        return Err(Error::InvalidArgument(format!(
            "empty cluster range {lo}..={hi}"
        )));
    }
    if hi > points.len() {
        return Err(Error::InvalidArgument(format!(
            "cluster range up to {hi} exceeds {} points",
            points.len()
        )));
    }
    let curve = g_range
        .clone()
        .map(|g| kmeans_cluster(points, g, seed).map(|m| (T::from_usize_lossy(g), m.sse)))
        .collect::<Result<Vec<(T, T)>>>()?;
    Ok(lo + knee_index(&curve))
}

/// Index of the point farthest from the chord through the first and last
/// points; the first such index on ties.
pub(crate) fn knee_index<T: Scalar>(curve: &[(T, T)]) -> usize {
    let (x0, y0) = curve[0];
    let (x1, y1) = curve[curve.len() - 1];
    let (dx, dy) = (x1 - x0, y1 - y0);
    // |cross| is proportional to the perpendicular distance from the chord.
    let dist: Vec<T> = curve
        .iter()
        .map(|&(x, y)| (dx * (y0 - y) - dy * (x0 - x)).abs())
        .collect();
    let scale = curve
        .iter()
        .map(|&(x, y)| x.abs().max(y.abs()))
        .fold(T::one(), T::max);
    let tol = scale * scale * T::epsilon() * T::lit(1024.0);
    let mut best = 0;
    for (i, &d) in dist.iter().enumerate() {
        if d > dist[best] + tol {
            best = i;
        }
    }
    best
}
