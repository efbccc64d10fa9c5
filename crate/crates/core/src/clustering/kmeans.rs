use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Exec};

pub const DEFAULT_RESTARTS: usize = 20;
pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            restarts: DEFAULT_RESTARTS,
            max_iter: DEFAULT_MAX_ITER,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    /// Cluster of each row, in `1..=k`.
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub wss: f64,
    pub k: usize,
    /// Restart that produced this partition.
    pub restart: usize,
    pub iterations: usize,
}

impl Partition {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.labels {
            s[l - 1] += 1;
        }
        s
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let p = points
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidInput("no points to cluster".into()))?;
    if p == 0 {
        return Err(Error::InvalidInput("points have no coordinates".into()));
    }
    for (i, r) in points.iter().enumerate() {
        if r.len() != p {
            return Err(Error::InvalidInput(format!("row {} has {} coordinates, expected {p}", i + 1, r.len())));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("row {} has a non-finite value", i + 1)));
        }
    }
    Ok(p)
}

pub fn distinct_rows(points: &[Vec<f64>]) -> usize {
    let mut rows: Vec<&Vec<f64>> = points.iter().collect();
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    rows.dedup_by(|a, b| a == b);
    rows.len()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, m) in centroids.iter().enumerate() {
        let d = sq_dist(point, m);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|x| sq_dist(x, &centroids[0])).collect();
    while centroids.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // Every point already coincides with a center.
            Err(_) => rng.random_range(0..n),
        };
        centroids.push(points[next].clone());
        for (d, x) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(x, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

/// Result of one Lloyd run: 0-based assignment, centroids, wss after each
/// iteration.
pub(crate) struct LloydRun {
    pub assign: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub history: Vec<f64>,
}

fn update_centroids(points: &[Vec<f64>], assign: &[usize], k: usize) -> Vec<Vec<f64>> {
    let p = points[0].len();
    let mut sums = vec![vec![0.0; p]; k];
    let mut counts = vec![0usize; k];
    for (x, &c) in points.iter().zip(assign) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(x) {
            *s += v;
        }
    }
    for (s, &m) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v /= m as f64);
    }
    sums
}

/// Gives each empty cluster the point farthest from its own centroid, taken
/// from a cluster with more than one member.
fn repair_empty(points: &[Vec<f64>], assign: &mut [usize], dist: &mut [f64], k: usize) {
    let mut counts = vec![0usize; k];
    for &c in assign.iter() {
        counts[c] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let donor = (0..points.len())
            .filter(|&i| counts[assign[i]] > 1)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if dist[b] >= dist[i] => Some(b),
                _ => Some(i),
            })
            .expect("k <= n guarantees a donor");
        counts[assign[donor]] -= 1;
        counts[empty] = 1;
        assign[donor] = empty;
        dist[donor] = 0.0;
    }
}

pub(crate) fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> LloydRun {
    let k = centroids.len();
    let n = points.len();
    let mut assign = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    let mut history = Vec::new();
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for i in 0..n {
            let (c, d) = nearest(&points[i], &centroids);
            changed |= assign[i] != c;
            assign[i] = c;
            dist[i] = d;
        }
        repair_empty(points, &mut assign, &mut dist, k);
        if !changed && !history.is_empty() {
            break;
        }
        centroids = update_centroids(points, &assign, k);
        history.push(wss_of(points, &assign, &centroids));
    }
    LloydRun {
        assign,
        centroids,
        history,
    }
}

pub(crate) fn wss_of(points: &[Vec<f64>], assign: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points.iter().zip(assign).map(|(x, &c)| sq_dist(x, &centroids[c])).sum()
}

/// k-means++ seeded Lloyd iterations, best of `restarts` runs by wss (ties to
/// the earlier restart). Restart `r` draws from ChaCha8 stream `r` of `seed`,
/// so the result does not depend on the execution strategy.
pub fn kmeans(points: &[Vec<f64>], k: usize, opts: &KMeansOptions, exec: Exec) -> Result<Partition> {
    check_points(points)?;
    if k == 0 {
        return Err(Error::InvalidInput("k must be >= 1".into()));
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidInput("restarts must be >= 1".into()));
    }
    let distinct = distinct_rows(points);
    if k > distinct {
        return Err(Error::TooManyClusters { k, distinct });
    }
    let runs = par::map_range(exec, 0..opts.restarts, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(r as u64);
        let init = plus_plus(points, k, &mut rng);
        let run = lloyd(points, init, opts.max_iter);
        let wss = wss_of(points, &run.assign, &run.centroids);
        (r, wss, run)
    });
    let (restart, wss, run) = runs
        .into_iter()
        .reduce(|best, cur| if cur.1 < best.1 { cur } else { best })
        .expect("restarts >= 1");
    Ok(Partition {
        labels: run.assign.iter().map(|c| c + 1).collect(),
        centroids: run.centroids,
        wss,
        k,
        restart,
        iterations: run.history.len(),
    })
}
