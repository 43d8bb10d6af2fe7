//! Seeded randomized truncated SVD (range finder with power iterations).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub const DEFAULT_OVERSAMPLE: usize = 10;
pub const DEFAULT_POWER_ITERS: usize = 4;

#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// m × k left singular vectors.
    pub u: DMatrix<f64>,
    /// k singular values, descending.
    pub singular_values: DVector<f64>,
    /// d × k right singular vectors (the principal axes when the input is
    /// mean-centered), orthonormal columns.
    pub components: DMatrix<f64>,
}

impl TruncatedSvd {
    /// Rows of `a` expressed in the component basis: `a · components`.
    pub fn project(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        a * &self.components
    }
}

fn orthonormal_basis(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

/// Rank-`k` SVD of `a` via a Gaussian sketch of `k + oversample` columns
/// refined by `power_iters` subspace iterations.
pub fn randomized_svd(
    a: &DMatrix<f64>,
    k: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
) -> Result<TruncatedSvd> {
    let (m, d) = a.shape();
    if k == 0 {
        return Err(Error::Config("target rank must be at least 1".into()));
    }
    if k > d {
        return Err(Error::Dimension {
            expected: d,
            got: k,
        });
    }
    let full = m.min(d);
    let sketch = (k + oversample).min(full);

    let (mut u, mut s, mut v) = if sketch >= full {
        exact_svd(a)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omega = DMatrix::from_fn(d, sketch, |_, _| StandardNormal.sample(&mut rng));
        let mut q = orthonormal_basis(a * omega);
        for _ in 0..power_iters {
            let z = orthonormal_basis(a.transpose() * &q);
            q = orthonormal_basis(a * z);
        }
        let b = q.transpose() * a;
        let (ub, s, v) = exact_svd(&b);
        (q * ub, s, v)
    };

    let kept = k.min(s.len());
    u = u.columns(0, kept).into_owned();
    v = v.columns(0, kept).into_owned();
    s = s.rows(0, kept).into_owned();
    if kept < k {
        // fewer rows than the target rank: pad with an orthonormal complement
        v = complete_orthonormal(v, k);
        u = u.resize_horizontally(k, 0.0);
        s = s.resize_vertically(k, 0.0);
    }
    Ok(TruncatedSvd {
        u,
        singular_values: s,
        components: v,
    })
}

/// Thin SVD with singular values sorted descending: (U, S, V).
fn exact_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));
    let u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v = DMatrix::from_fn(vt.ncols(), order.len(), |r, c| vt[(order[c], r)]);
    let s = DVector::from_fn(order.len(), |i, _| s[order[i]]);
    (u, s, v)
}

fn complete_orthonormal(v: DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let d = v.nrows();
    let mut cols: Vec<DVector<f64>> = v.column_iter().map(|c| c.into_owned()).collect();
    for e in 0..d {
        if cols.len() == k {
            break;
        }
        let mut cand = DVector::from_fn(d, |i, _| if i == e { 1.0 } else { 0.0 });
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dot(&cand);
                cand -= c * proj;
            }
        }
        let norm = cand.norm();
        if norm > 1e-6 {
            cols.push(cand / norm);
        }
    }
    DMatrix::from_columns(&cols)
}

/// Subtracts the column means from every row; returns the means.
pub fn center_columns(a: &mut DMatrix<f64>) -> DVector<f64> {
    let m = a.nrows().max(1) as f64;
    let means = DVector::from_fn(a.ncols(), |j, _| a.column(j).sum() / m);
    for j in 0..a.ncols() {
        let mu = means[j];
        a.column_mut(j).add_scalar_mut(-mu);
    }
    means
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn recovers_low_rank_matrix() {
        let a = random_matrix(60, 3, 1) * random_matrix(3, 40, 2);
        let svd = randomized_svd(&a, 3, 5, 2, 7).unwrap();
        let recon = &svd.u * DMatrix::from_diagonal(&svd.singular_values) * svd.components.transpose();
        assert!((recon - &a).norm() / a.norm() < 1e-10);
    }

    #[test]
    fn singular_values_match_exact() {
        let a = random_matrix(50, 30, 3);
        let exact = a.clone().svd(false, false).singular_values;
        let mut exact: Vec<f64> = exact.iter().copied().collect();
        exact.sort_by(|a, b| b.total_cmp(a));
        let svd = randomized_svd(&a, 5, 10, 6, 9).unwrap();
        for i in 0..5 {
            assert!((svd.singular_values[i] - exact[i]).abs() / exact[i] < 1e-3);
        }
    }

    #[test]
    fn pads_when_rows_are_scarce() {
        let a = random_matrix(2, 6, 4);
        let svd = randomized_svd(&a, 4, 2, 1, 0).unwrap();
        assert_eq!(svd.components.shape(), (6, 4));
        let gram = svd.components.transpose() * &svd.components;
        assert!((gram - DMatrix::identity(4, 4)).amax() < 1e-10);
    }

    #[test]
    fn rejects_rank_above_width() {
        let a = random_matrix(5, 3, 4);
        assert!(matches!(
            randomized_svd(&a, 4, 2, 1, 0),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn centering_zeroes_means() {
        let mut a = random_matrix(10, 4, 5);
        center_columns(&mut a);
        for j in 0..4 {
            assert!(a.column(j).sum().abs() < 1e-12);
        }
    }
}
