//! Scalar abstraction shared by every algorithm in the crate.
//!
//! All geometry is written against [`Real`], so the same code runs in `f32`
//! or `f64`. Small per-patch linear algebra goes through `nalgebra`; the one
//! large dense operation (the N×N symmetric eigenproblem) is routed through
//! [`Real::symmetric_eigen`] so each concrete type can pick a fast backend.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::{DMatrix, DVector, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Ascending eigenpairs of a dense symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T: Real> {
    /// Eigenvalues, nondecreasing.
    pub values: DVector<T>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: DMatrix<T>,
}

/// Thin singular value decomposition `m = u · diag(s) · vᵀ`.
#[derive(Debug, Clone)]
pub struct ThinSvd<T: Real> {
    /// r×1 singular values, nonincreasing (r = min(rows, cols)).
    pub s: DVector<T>,
    pub u: DMatrix<T>,
    pub v: DMatrix<T>,
}

impl<T: Real> ThinSvd<T> {
    /// Minimum-norm least-squares solution of `m x = b`, ignoring singular
    /// values at or below `cutoff`.
    pub fn solve(&self, b: &DMatrix<T>, cutoff: T) -> DMatrix<T> {
        let mut utb = self.u.tr_mul(b);
        for (r, &s) in self.s.iter().enumerate() {
            let inv = if s > cutoff { T::one() / s } else { T::zero() };
            utb.row_mut(r).scale_mut(inv);
        }
        &self.v * utb
    }
}

/// Real floating-point scalar usable by the whole pipeline.
pub trait Real:
    RealField
    + Copy
    + FromPrimitive
    + ToPrimitive
    + Display
    + LowerExp
    + Debug
    + Default
    + Send
    + Sync
    + 'static
{
    /// Machine epsilon of the type.
    const EPS: f64;

    /// Full eigendecomposition of a symmetric matrix (lower triangle is read).
    /// Returns `None` if the backend fails to converge.
    fn symmetric_eigen(m: &DMatrix<Self>) -> Option<SymmetricEigen<Self>>;

    /// Thin SVD; `None` if the backend fails to converge.
    fn thin_svd(m: &DMatrix<Self>) -> Option<ThinSvd<Self>>;
}

macro_rules! impl_real_via_faer {
    ($t:ty) => {
        impl Real for $t {
            const EPS: f64 = <$t>::EPSILON as f64;

            fn symmetric_eigen(m: &DMatrix<Self>) -> Option<SymmetricEigen<Self>> {
                let n = m.nrows();
                assert_eq!(n, m.ncols(), "symmetric_eigen needs a square matrix");
                if n == 0 {
                    return Some(SymmetricEigen {
                        values: DVector::zeros(0),
                        vectors: DMatrix::zeros(0, 0),
                    });
                }
                let a = faer::Mat::<$t>::from_fn(n, n, |i, j| m[(i, j)]);
                let evd = a.self_adjoint_eigen(faer::Side::Lower).ok()?;
                let s = evd.S().column_vector();
                let u = evd.U();
                let values = DVector::from_fn(n, |i, _| s[i]);
                let vectors = DMatrix::from_fn(n, n, |i, j| u[(i, j)]);
                if values.iter().any(|v| !v.is_finite()) {
                    return None;
                }
                Some(SymmetricEigen { values, vectors })
            }

            fn thin_svd(m: &DMatrix<Self>) -> Option<ThinSvd<Self>> {
                let (rows, cols) = m.shape();
                let r = rows.min(cols);
                if r == 0 {
                    return Some(ThinSvd {
                        s: DVector::zeros(0),
                        u: DMatrix::zeros(rows, 0),
                        v: DMatrix::zeros(cols, 0),
                    });
                }
                let a = faer::Mat::<$t>::from_fn(rows, cols, |i, j| m[(i, j)]);
                let svd = a.thin_svd().ok()?;
                let s = svd.S().column_vector();
                let (u, v) = (svd.U(), svd.V());
                let mut order: Vec<usize> = (0..r).collect();
                order.sort_by(|&x, &y| s[y].partial_cmp(&s[x]).unwrap_or(std::cmp::Ordering::Equal).then(x.cmp(&y)));
                let out = ThinSvd {
                    s: DVector::from_fn(r, |i, _| s[order[i]]),
                    u: DMatrix::from_fn(rows, r, |i, j| u[(i, order[j])]),
                    v: DMatrix::from_fn(cols, r, |i, j| v[(i, order[j])]),
                };
                out.s.iter().all(|x| x.is_finite()).then_some(out)
            }
        }
    };
}

impl_real_via_faer!(f32);
impl_real_via_faer!(f64);

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("every f64 literal is representable")
}

/// Converts `T` to `f64` (always succeeds for the supported types).
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().expect("finite real converts to f64")
}

/// Median of a slice (average of the two middle values for even length).
/// Returns `None` for an empty slice.
pub fn median<T: Real>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("median of NaN"));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) * lit::<T>(0.5)
    })
}

/// Flips the sign of each column so that its largest-magnitude entry is
/// positive (first index wins ties). Returns the applied signs.
pub fn canonical_column_signs<T: Real>(m: &mut DMatrix<T>) -> Vec<T> {
    let mut signs = Vec::with_capacity(m.ncols());
    for mut col in m.column_iter_mut() {
        let mut best = T::zero();
        let mut best_val = T::zero();
        for &v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                best_val = v;
            }
        }
        if best_val < T::zero() {
            col.neg_mut();
            signs.push(-T::one());
        } else {
            signs.push(T::one());
        }
    }
    signs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_is_ascending_in_both_precisions() {
        let m = DMatrix::<f64>::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 5.0]);
        let e = f64::symmetric_eigen(&m).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-12);
        assert!((e.values[1] - 3.0).abs() < 1e-12);
        assert!((e.values[2] - 5.0).abs() < 1e-12);
        let r = &m * &e.vectors - &e.vectors * DMatrix::from_diagonal(&e.values);
        assert!(r.norm() < 1e-12);

        let m32 = m.map(|x| x as f32);
        let e32 = f32::symmetric_eigen(&m32).unwrap();
        assert!((e32.values[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median::<f64>(&[]), None);
    }

    #[test]
    fn sign_rule_makes_dominant_entry_positive() {
        let mut m = DMatrix::<f64>::from_row_slice(3, 2, &[0.1, 0.5, -0.9, -0.5, 0.2, 0.1]);
        let s = canonical_column_signs(&mut m);
        assert_eq!(s, vec![-1.0, 1.0]);
        assert_eq!(m[(1, 0)], 0.9);
        // tie between |0.5| and |-0.5|: first index wins, already positive
        assert_eq!(m[(0, 1)], 0.5);
    }
}
