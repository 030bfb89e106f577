//! Small dense linear-algebra helpers on top of nalgebra.

use faer::{Mat, MatRef};
use nalgebra::{DMatrix, DVector};

use crate::{CMat, C64};

fn to_faer(a: &DMatrix<C64>) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: MatRef<'_, C64>) -> DMatrix<C64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Singular values in decreasing order.
pub fn singular_values(a: &DMatrix<C64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    match to_faer(a).singular_values() {
        Ok(s) => s,
        // the divide-and-conquer path failed to converge; fall back
        Err(_) => {
            let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
            s.sort_by(|x, y| y.total_cmp(x));
            s
        }
    }
}

pub fn smallest_singular_value(a: &DMatrix<C64>) -> f64 {
    singular_values(a).last().copied().unwrap_or(0.0)
}

/// Product of two dense complex matrices.
pub fn matmul(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    from_faer((to_faer(a) * to_faer(b)).as_ref())
}

/// Thin SVD `a = u diag(s) v*`.
pub struct Svd {
    u: Mat<C64>,
    s: Vec<f64>,
    v: Mat<C64>,
}

impl Svd {
    pub fn new(a: &DMatrix<C64>) -> Option<Self> {
        let svd = to_faer(a).thin_svd().ok()?;
        let s = svd.S().column_vector().iter().map(|x| x.re).collect();
        Some(Svd {
            u: svd.U().to_owned(),
            s,
            v: svd.V().to_owned(),
        })
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.s
    }

    pub fn smallest(&self) -> f64 {
        self.s.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Least-squares solution `v diag(1/s) u* b`.
    pub fn solve(&self, b: &DMatrix<C64>) -> DMatrix<C64> {
        let mut w = self.u.adjoint() * to_faer(b);
        for (i, s) in self.s.iter().enumerate() {
            for j in 0..w.ncols() {
                w[(i, j)] /= *s;
            }
        }
        from_faer((&self.v * w).as_ref())
    }
}

/// `max_j |b_j - a x_j|_inf / (|a|_inf |x_j|_inf + |b_j|_inf)`.
pub fn backward_error(a: &DMatrix<C64>, x: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let a_norm = inf_norm(a);
    let residual = b - a * x;
    (0..b.ncols())
        .map(|j| {
            col_max(&residual, j) / (a_norm * col_max(x, j) + col_max(b, j)).max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}

fn col_max(m: &DMatrix<C64>, j: usize) -> f64 {
    m.column(j).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Maximum absolute row sum.
pub fn inf_norm(a: &DMatrix<C64>) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Eigenvalues (ascending) and eigenvectors of the Hermitian part
/// `(m + m*) / 2`.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_hermitian_eig(m: &CMat) -> f64 {
    hermitian_eigen(m).0[0]
}

/// Positive square root of a Hermitian positive definite matrix (uses the
/// Hermitian part of `m`). `None` when an eigenvalue is not positive.
pub fn hermitian_sqrt(m: &CMat) -> Option<CMat> {
    let (values, u) = hermitian_eigen(m);
    if values.iter().any(|&l| l <= 0.0) {
        return None;
    }
    let d = DVector::from_iterator(values.len(), values.iter().map(|l| C64::new(l.sqrt(), 0.0)));
    Some(&u * CMat::from_diagonal(&d) * u.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_squares_back() {
        let m = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new(2.0, 0.0),
                C64::new(0.5, -0.25),
                C64::new(0.5, 0.25),
                C64::new(1.0, 0.0),
            ],
        );
        let r = hermitian_sqrt(&m).unwrap();
        assert!((&r * &r - &m).camax() < 1e-14);
        assert!((&r - r.adjoint()).camax() < 1e-15);
        assert!(min_hermitian_eig(&r) > 0.0);
    }

    #[test]
    fn lu_solution_has_small_backward_error() {
        let a = DMatrix::from_fn(5, 5, |i, j| {
            C64::new(
                1.0 / (1.0 + i as f64 + j as f64),
                (i as f64 - j as f64) * 0.1,
            )
        });
        let b = DMatrix::from_fn(5, 2, |i, j| C64::new(i as f64, j as f64));
        let x = a.clone().lu().solve(&b).unwrap();
        assert!(backward_error(&a, &x, &b) < 1e-14);
        assert_eq!(backward_error(&a, &DMatrix::zeros(5, 2), &b), 1.0);
    }

    #[test]
    fn indefinite_has_no_sqrt() {
        let m = CMat::from_diagonal(&DVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(-1.0, 0.0),
        ]));
        assert!(hermitian_sqrt(&m).is_none());
    }
}
