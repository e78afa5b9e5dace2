//! Principal embedding: PCA on document embeddings via a cyclic Jacobi
//! eigensolver on the sample covariance matrix.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_COMPONENTS: usize = 3;

const JACOBI_TOL: f64 = 1e-10;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix.
///
/// Returns `(eigenvalues, vectors)` where column `j` of `vectors` pairs with
/// `eigenvalues[j]`. Order is whatever the sweeps leave on the diagonal.
/// Iterates until the off-diagonal Frobenius norm drops below
/// `1e-10 * ||A||_F` or 100 sweeps have run.
pub fn jacobi_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.cols(),
        });
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("jacobi input"));
    }
    let mut a = a.clone();
    let mut v = Matrix::identity(n);
    let norm = a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = JACOBI_TOL * norm.max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += 2.0 * a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[(i, i)]).collect();
    Ok((values, v))
}

/// Column means and the (n-1)-normalized covariance of `x`.
pub fn covariance(x: &Matrix) -> (Vec<f64>, Matrix) {
    let (n, d) = (x.rows(), x.cols());
    let mut mean = vec![0.0; d];
    for r in x.iter_rows() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = Matrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for r in x.iter_rows() {
        for ((c, v), m) in centered.iter_mut().zip(r).zip(&mean) {
            *c = v - m;
        }
        for i in 0..d {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            for j in i..d {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    (mean, cov)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// k×d, orthonormal rows.
    pub components: Matrix,
    /// Nonincreasing, length k.
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.rows()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(self
            .components
            .iter_rows()
            .map(|c| c.iter().zip(v).zip(&self.mean).map(|((c, x), m)| c * (x - m)).sum())
            .collect())
    }

    pub fn project_batch(&self, x: &Matrix) -> Result<Matrix> {
        let rows = x
            .iter_rows()
            .map(|r| self.project(r))
            .collect::<Result<Vec<_>>>()?;
        if rows.is_empty() {
            return Ok(Matrix::zeros(0, self.k()));
        }
        Matrix::from_rows(&rows)
    }
}

/// Flip `v` so that its largest-magnitude entry (first on ties) is positive.
fn normalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Fit a rank-`k` PCA. Components are sorted by eigenvalue (descending,
/// equal eigenvalues ordered by their first differing entry, larger first).
pub fn fit_pca(x: &Matrix, k: usize) -> Result<PcaModel> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::InvalidArgument(format!("PCA needs at least 2 rows, got {n}")));
    }
    if k == 0 || k > (n - 1).min(d) {
        return Err(Error::InvalidArgument(format!(
            "k={k} out of range 1..={}",
            (n - 1).min(d)
        )));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("PCA input"));
    }
    let (mean, cov) = covariance(x);
    let (values, vectors) = jacobi_eigen(&cov)?;
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..d)
        .map(|j| {
            let mut col: Vec<f64> = (0..d).map(|i| vectors[(i, j)]).collect();
            normalize_sign(&mut col);
            (values[j].max(0.0), col)
        })
        .collect();
    pairs.sort_by(|a, b| {
        b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then_with(|| {
            a.1.iter()
                .zip(&b.1)
                .find(|(x, y)| x != y)
                .map_or(Ordering::Equal, |(x, y)| y.partial_cmp(x).unwrap_or(Ordering::Equal))
        })
    });
    pairs.truncate(k);
    let eigenvalues = pairs.iter().map(|p| p.0).collect();
    let rows: Vec<Vec<f64>> = pairs.into_iter().map(|p| p.1).collect();
    Ok(PcaModel {
        mean,
        components: Matrix::from_rows(&rows)?,
        eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn random_matrix(seed: u64, n: usize, d: usize) -> Matrix {
        let mut rng = rng_from_seed(seed);
        let mut m = Matrix::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                // uneven column scales keep the spectrum well separated
                m[(i, j)] = rng.gen_range(-1.0..1.0) * (j + 1) as f64;
            }
        }
        m
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let a = Matrix::from_rows(&[[4.0, 1.0, 2.0], [1.0, 3.0, 0.5], [2.0, 0.5, 1.0]]).unwrap();
        let (vals, v) = jacobi_eigen(&a).unwrap();
        let mut l = Matrix::zeros(3, 3);
        for i in 0..3 {
            l[(i, i)] = vals[i];
        }
        let back = v.matmul(&l).unwrap().matmul(&v.transpose()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((back[(i, j)] - a[(i, j)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn axis_aligned_points() {
        let xs = [1.0, 2.0, 4.0, 7.0];
        let rows: Vec<[f64; 3]> = xs.iter().map(|&x| [x, 0.0, 0.0]).collect();
        let m = fit_pca(&Matrix::from_rows(&rows).unwrap(), 1).unwrap();
        let mean = xs.iter().sum::<f64>() / 4.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0;
        assert!((m.eigenvalues[0] - var).abs() < 1e-12);
        assert!((m.components[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(m.components[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn identical_rows_do_not_crash() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0]]).unwrap();
        let m = fit_pca(&x, 1).unwrap();
        assert_eq!(m.eigenvalues, vec![0.0]);
        let norm: f64 = m.components.row(0).iter().map(|c| c * c).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn argument_errors() {
        let x = random_matrix(1, 5, 3);
        assert!(fit_pca(&x, 0).is_err());
        assert!(fit_pca(&x, 4).is_err());
        assert!(fit_pca(&random_matrix(1, 1, 3), 1).is_err());
        let mut bad = x.clone();
        bad[(0, 0)] = f64::NAN;
        assert!(matches!(fit_pca(&bad, 1), Err(Error::NonFinite(_))));
        let m = fit_pca(&x, 2).unwrap();
        assert!(matches!(m.project(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn components_orthonormal_and_sorted() {
        let m = fit_pca(&random_matrix(3, 20, 5), 3).unwrap();
        let g = m.components.matmul(&m.components.transpose()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - e).abs() < 1e-8);
            }
        }
        assert!(m.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn project_identities() {
        let m = fit_pca(&random_matrix(4, 12, 4), 2).unwrap();
        let zero = m.project(&m.mean).unwrap();
        assert!(zero.iter().all(|z| z.abs() < 1e-12));
        let v: Vec<f64> = m.mean.iter().zip(m.components.row(0)).map(|(a, b)| a + b).collect();
        let p = m.project(&v).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12);
    }

    #[test]
    fn projected_variance_equals_eigenvalues_and_is_decorrelated() {
        let x = random_matrix(5, 30, 5);
        let m = fit_pca(&x, 3).unwrap();
        let p = m.project_batch(&x).unwrap();
        let (_, cov) = covariance(&p);
        for i in 0..3 {
            assert!((cov[(i, i)] - m.eigenvalues[i]).abs() < 1e-6);
            for j in 0..3 {
                if i != j {
                    assert!(cov[(i, j)].abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let x = random_matrix(6, 15, 4);
        assert_eq!(fit_pca(&x, 2).unwrap(), fit_pca(&x, 2).unwrap());
    }

    fn reconstruction_error(x: &Matrix, mean: &[f64], basis: &[Vec<f64>]) -> f64 {
        let mut err = 0.0;
        for r in x.iter_rows() {
            let c: Vec<f64> = r.iter().zip(mean).map(|(a, m)| a - m).collect();
            let mut rec = vec![0.0; c.len()];
            for b in basis {
                let coef: f64 = b.iter().zip(&c).map(|(p, q)| p * q).sum();
                for (r, bi) in rec.iter_mut().zip(b) {
                    *r += coef * bi;
                }
            }
            err += c.iter().zip(&rec).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        err
    }

    /// Gram-Schmidt on random Gaussian-ish vectors.
    fn random_orthonormal(rng: &mut impl Rng, k: usize, d: usize) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        while out.len() < k {
            let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for b in &out {
                let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-6 {
                out.push(v.into_iter().map(|x| x / n).collect());
            }
        }
        out
    }

    #[test]
    fn reconstruction_beats_random_projections() {
        let mut rng = rng_from_seed(77);
        for seed in 0..5 {
            let x = random_matrix(100 + seed, 15, 4);
            for k in 1..=3 {
                let m = fit_pca(&x, k).unwrap();
                let basis: Vec<Vec<f64>> = m.components.iter_rows().map(|r| r.to_vec()).collect();
                let best = reconstruction_error(&x, &m.mean, &basis);
                for _ in 0..100 {
                    let rb = random_orthonormal(&mut rng, k, 4);
                    assert!(best <= reconstruction_error(&x, &m.mean, &rb) + 1e-9);
                }
            }
        }
    }
}
