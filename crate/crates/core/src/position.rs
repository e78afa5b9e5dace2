//! Position embedding: DBSCAN clusters of training embeddings are frozen as
//! ordered centroids, and every article is encoded by its distances to them
//! plus the index of the nearest one.

use std::cmp::Ordering;
use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{euclidean, sq_dist, Matrix};

pub const DEFAULT_MIN_PTS: usize = 5;

/// Below this many points region queries run on one thread.
const PAR_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Cluster index per point, `None` for noise.
    pub labels: Vec<Option<usize>>,
    pub core: Vec<bool>,
    pub k: usize,
    pub eps: f64,
    pub min_pts: usize,
}

impl ClusterAssignment {
    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }
}

/// Indices of all points within `eps` (inclusive) of `points[i]`, including `i`.
fn region(points: &Matrix, i: usize, eps2: f64) -> Vec<usize> {
    let p = points.row(i);
    if points.rows() >= PAR_THRESHOLD {
        (0..points.rows())
            .into_par_iter()
            .filter(|&j| sq_dist(p, points.row(j)) <= eps2)
            .collect()
    } else {
        (0..points.rows())
            .filter(|&j| sq_dist(p, points.row(j)) <= eps2)
            .collect()
    }
}

fn check_points(points: &Matrix) -> Result<()> {
    if !points.is_finite() {
        return Err(Error::NonFinite("clustering input"));
    }
    Ok(())
}

/// Classic DBSCAN with Euclidean distance. A core point has at least
/// `min_pts` points (itself included) within `eps`. Seeds are taken in index
/// order and each cluster is expanded fully before the next one starts, so a
/// border point reachable from several clusters joins the earliest.
pub fn dbscan(points: &Matrix, eps: f64, min_pts: usize) -> Result<ClusterAssignment> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if min_pts == 0 {
        return Err(Error::InvalidArgument("min_pts must be >= 1".into()));
    }
    if points.rows() == 0 {
        return Err(Error::InvalidArgument("dbscan needs at least one point".into()));
    }
    check_points(points)?;

    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Unvisited,
        Noise,
        Member(usize),
    }

    fn claim(nbrs: &[usize], state: &mut [State], queue: &mut VecDeque<usize>, k: usize) {
        for &q in nbrs {
            match state[q] {
                State::Unvisited => {
                    state[q] = State::Member(k);
                    queue.push_back(q);
                }
                // already known not to be core; joins as a border point
                State::Noise => state[q] = State::Member(k),
                State::Member(_) => {}
            }
        }
    }

    let n = points.rows();
    let eps2 = eps * eps;
    let mut state = vec![State::Unvisited; n];
    let mut core = vec![false; n];
    let mut k = 0;
    let mut queue = VecDeque::new();
    for i in 0..n {
        if state[i] != State::Unvisited {
            continue;
        }
        let nbrs = region(points, i, eps2);
        if nbrs.len() < min_pts {
            state[i] = State::Noise;
            continue;
        }
        core[i] = true;
        state[i] = State::Member(k);
        // points are claimed when queued, so each is expanded at most once
        // and the queue never exceeds n
        queue.clear();
        claim(&nbrs, &mut state, &mut queue, k);
        while let Some(j) = queue.pop_front() {
            let nj = region(points, j, eps2);
            if nj.len() >= min_pts {
                core[j] = true;
                claim(&nj, &mut state, &mut queue, k);
            }
        }
        k += 1;
    }
    let labels = state
        .into_iter()
        .map(|s| match s {
            State::Member(c) => Some(c),
            _ => None,
        })
        .collect();
    Ok(ClusterAssignment {
        labels,
        core,
        k,
        eps,
        min_pts,
    })
}

/// Distance to the k-th nearest other point, for every point.
pub fn k_distances(points: &Matrix, k: usize) -> Result<Vec<f64>> {
    let n = points.rows();
    if k == 0 || n <= k {
        return Err(Error::InvalidArgument(format!(
            "k-distance needs n > k >= 1 (n={n}, k={k})"
        )));
    }
    check_points(points)?;
    let kth = |i: usize| {
        let mut d: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| sq_dist(points.row(i), points.row(j)))
            .collect();
        let (_, v, _) = d.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
        v.sqrt()
    };
    Ok(if n >= PAR_THRESHOLD / 4 {
        (0..n).into_par_iter().map(kth).collect()
    } else {
        (0..n).map(kth).collect()
    })
}

/// Knee of the sorted k-distance curve (largest second difference).
/// Falls back to the smallest positive pairwise distance when the knee sits
/// at zero; errors when all points coincide.
pub fn suggest_eps(points: &Matrix, k: usize) -> Result<f64> {
    let mut d = k_distances(points, k)?;
    d.sort_by(f64::total_cmp);
    let knee = if d.len() < 3 {
        d.len() - 1
    } else {
        let mut best = (1, f64::NEG_INFINITY);
        for i in 1..d.len() - 1 {
            let sd = d[i + 1] - 2.0 * d[i] + d[i - 1];
            if sd > best.1 {
                best = (i, sd);
            }
        }
        best.0
    };
    let eps = d[knee];
    if eps > 0.0 {
        return Ok(eps);
    }
    let n = points.rows();
    let mut min_pos = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let dd = euclidean(points.row(i), points.row(j));
            if dd > 0.0 && dd < min_pos {
                min_pos = dd;
            }
        }
    }
    if min_pos.is_finite() {
        Ok(min_pos)
    } else {
        Err(Error::InvalidArgument(
            "all points coincide; no positive eps exists".into(),
        ))
    }
}

/// How the nearest-swarm index is exposed to classifiers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwarmEncoding {
    /// One real-valued feature holding the index.
    #[default]
    Numeric,
    /// K indicator features.
    OneHot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionModel {
    /// K×d centroids, largest cluster first, ties by lexicographic centroid.
    pub centers: Matrix,
    pub eps: f64,
    pub min_pts: usize,
    /// Cluster sizes in center order.
    pub sizes: Vec<usize>,
    pub noise: usize,
}

impl PositionModel {
    pub fn k(&self) -> usize {
        self.centers.rows()
    }

    pub fn feature_len(&self, enc: SwarmEncoding) -> usize {
        match enc {
            SwarmEncoding::Numeric => self.k() + 1,
            SwarmEncoding::OneHot => 2 * self.k(),
        }
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Cluster `x_train` and freeze the member centroids. Noise is excluded.
pub fn fit_position_model(x_train: &Matrix, eps: f64, min_pts: usize) -> Result<PositionModel> {
    let assign = dbscan(x_train, eps, min_pts)?;
    if assign.k == 0 {
        return Err(Error::NoClusters {
            n: x_train.rows(),
            eps,
            min_pts,
        });
    }
    let d = x_train.cols();
    let mut members: Vec<Vec<&[f64]>> = vec![Vec::new(); assign.k];
    for (i, l) in assign.labels.iter().enumerate() {
        if let Some(c) = l {
            members[*c].push(x_train.row(i));
        }
    }
    let mut clusters: Vec<(usize, Vec<f64>)> = members
        .into_iter()
        .map(|mut rows| {
            // summing in a canonical order makes centroids independent of input order
            rows.sort_by(|a, b| lex_cmp(a, b));
            let mut c = vec![0.0; d];
            for r in &rows {
                for (s, v) in c.iter_mut().zip(r.iter()) {
                    *s += v;
                }
            }
            c.iter_mut().for_each(|s| *s /= rows.len() as f64);
            (rows.len(), c)
        })
        .collect();
    clusters.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| lex_cmp(&a.1, &b.1)));
    let sizes = clusters.iter().map(|c| c.0).collect();
    let rows: Vec<Vec<f64>> = clusters.into_iter().map(|c| c.1).collect();
    Ok(PositionModel {
        centers: Matrix::from_rows(&rows)?,
        eps,
        min_pts,
        sizes,
        noise: assign.noise_count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionEmbedding {
    pub distances: Vec<f64>,
    pub swarm_id: usize,
}

impl PositionEmbedding {
    pub fn features(&self, enc: SwarmEncoding) -> Vec<f64> {
        let mut f = self.distances.clone();
        match enc {
            SwarmEncoding::Numeric => f.push(self.swarm_id as f64),
            SwarmEncoding::OneHot => {
                f.extend((0..self.distances.len()).map(|i| if i == self.swarm_id { 1.0 } else { 0.0 }))
            }
        }
        f
    }
}

/// Distances to every center; the nearest center (lowest index on ties) is
/// the swarm id.
pub fn position_encode(model: &PositionModel, v: &[f64]) -> Result<PositionEmbedding> {
    if v.len() != model.centers.cols() {
        return Err(Error::DimensionMismatch {
            expected: model.centers.cols(),
            got: v.len(),
        });
    }
    let distances: Vec<f64> = model.centers.iter_rows().map(|c| euclidean(c, v)).collect();
    let mut swarm_id = 0;
    for (i, d) in distances.iter().enumerate() {
        if *d < distances[swarm_id] {
            swarm_id = i;
        }
    }
    Ok(PositionEmbedding { distances, swarm_id })
}

pub fn position_features(model: &PositionModel, x: &Matrix, enc: SwarmEncoding) -> Result<Matrix> {
    let mut out = Matrix::zeros(x.rows(), model.feature_len(enc));
    for (i, r) in x.iter_rows().enumerate() {
        out.row_mut(i).copy_from_slice(&position_encode(model, r)?.features(enc));
    }
    Ok(out)
}
