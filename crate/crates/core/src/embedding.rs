//! Spectral embeddings from weight matrices, and the PCA baseline.
//!
//! Both spectral paths know their trivial eigenvector in closed form
//! (`Dg^{1/2}·1` for the normalized Laplacian, `1` for the LLE cost matrix),
//! so it is deflated exactly with a Householder reflector before the dense
//! solve. The returned coordinates therefore satisfy the centering
//! constraints to rounding error even when the bottom of the spectrum is
//! nearly degenerate.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::datasets::DataSet;
use crate::error::{CamlError, Result};
use crate::scalar::{canonical_column_signs, lit, Real};
use crate::weights::{WeightKind, WeightMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingMethod {
    Pca,
    Laplacian(WeightKind),
    LocallyLinear(WeightKind),
}

impl fmt::Display for EmbeddingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbeddingMethod::Pca => f.write_str("pca"),
            EmbeddingMethod::Laplacian(k) | EmbeddingMethod::LocallyLinear(k) => write!(f, "{k:?}"),
        }
    }
}

/// Low-dimensional coordinates, one row per input point.
#[derive(Debug, Clone)]
pub struct Embedding<T: Real> {
    pub y: DMatrix<T>,
    /// Retained eigenvalues: ascending for spectral methods, principal
    /// variances (descending) for PCA.
    pub eigenvalues: DVector<T>,
    pub method: EmbeddingMethod,
}

impl<T: Real> Embedding<T> {
    pub fn len(&self) -> usize {
        self.y.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.y.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.y.ncols()
    }

    /// The coordinates as a point cloud (for neighbor queries).
    pub fn as_dataset(&self, labels: Option<Vec<i64>>) -> Result<DataSet<T>> {
        DataSet::new(self.y.clone(), labels, format!("{}-embedding", self.method))
    }
}

/// Number of connected components of the weight graph (edges with w > 0).
pub fn connected_components<T: Real>(w: &WeightMatrix<T>) -> usize {
    let n = w.n();
    let mut seen = vec![false; n];
    let mut components = 0;
    let mut stack = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        components += 1;
        seen[s] = true;
        stack.push(s);
        while let Some(i) = stack.pop() {
            for &(j, x) in &w.rows[i] {
                if x > T::zero() && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    components
}

/// Eigenpairs of `a` restricted to the orthogonal complement of the unit
/// vector `v0` (assumed to be an eigenvector). Returns the `count` smallest.
fn deflated_bottom<T: Real>(a: &DMatrix<T>, v0: &DVector<T>, count: usize) -> Result<(DVector<T>, DMatrix<T>)> {
    let n = a.nrows();
    // Householder h with (I − 2hhᵀ/hᵀh) v0 = ∓e_0
    let mut h = v0.clone();
    let s = if v0[0] >= T::zero() { T::one() } else { -T::one() };
    h[0] += s;
    let hh = h.norm_squared();
    let two = lit::<T>(2.0);
    let ah = a * &h;
    let hah = h.dot(&ah);
    let beta = two / hh;
    // P A P = A − β(h (Ah)ᵀ + (Ah) hᵀ) + β² (hᵀAh) h hᵀ
    let mut reflected = a.clone();
    reflected.ger(-beta, &h, &ah, T::one());
    reflected.ger(-beta, &ah, &h, T::one());
    reflected.ger(beta * beta * hah, &h, &h, T::one());
    let block = reflected.view((1, 1), (n - 1, n - 1)).into_owned();
    let evd = T::symmetric_eigen(&block).ok_or_else(|| CamlError::Numerical("dense eigensolver did not converge".into()))?;
    let mut vectors = DMatrix::<T>::zeros(n, count);
    for c in 0..count {
        let mut z = DVector::<T>::zeros(n);
        z.rows_mut(1, n - 1).copy_from(&evd.vectors.column(c));
        let coef = beta * h.dot(&z);
        z.axpy(-coef, &h, T::one());
        vectors.set_column(c, &z);
    }
    Ok((evd.values.rows(0, count).into_owned(), vectors))
}

fn check_weights<T: Real>(w: &WeightMatrix<T>, d: usize, laplacian: bool) -> Result<()> {
    let n = w.n();
    if laplacian != w.kind.is_laplacian() {
        return Err(CamlError::invalid(format!(
            "{:?} weights cannot drive a {} embedding",
            w.kind,
            if laplacian { "Laplacian" } else { "locally linear" }
        )));
    }
    if d == 0 || d + 1 >= n {
        return Err(CamlError::invalid(format!(
            "embedding dimension must satisfy 1 <= d < N - 1 = {} (got {d})",
            n.saturating_sub(1)
        )));
    }
    Ok(())
}

fn check_laplacian_weights<T: Real>(w: &WeightMatrix<T>) -> Result<Vec<T>> {
    if w.rows.iter().flatten().any(|e| e.1 < T::zero() || !e.1.is_finite()) {
        return Err(CamlError::invalid("heat-kernel weights must be finite and nonnegative"));
    }
    let scale = w.rows.iter().flatten().fold(T::zero(), |m, e| if e.1 > m { e.1 } else { m });
    if w.max_asymmetry() > scale * lit(1e-12) {
        return Err(CamlError::invalid("heat-kernel weight matrix is not symmetric"));
    }
    let degree = w.row_sums();
    if let Some(index) = degree.iter().position(|&g| !(g > T::zero())) {
        return Err(CamlError::IsolatedVertex { index });
    }
    let components = connected_components(w);
    if components > 1 {
        return Err(CamlError::Disconnected { components });
    }
    Ok(degree)
}

/// Dense `Dg − W`.
pub fn laplacian_matrix<T: Real>(w: &WeightMatrix<T>) -> DMatrix<T> {
    let mut l = -w.to_dense();
    for (i, g) in w.row_sums().into_iter().enumerate() {
        l[(i, i)] += g;
    }
    l
}

/// Laplacian eigenmap: bottom nontrivial solutions of `L v = λ Dg v`,
/// normalized so that `YᵀDgY = I`.
pub fn laplacian_embedding<T: Real>(w: &WeightMatrix<T>, d: usize) -> Result<Embedding<T>> {
    check_weights(w, d, true)?;
    let degree = check_laplacian_weights(w)?;
    let n = w.n();
    let inv_sqrt: Vec<T> = degree.iter().map(|g| T::one() / g.sqrt()).collect();
    // I − Dg^{-1/2} W Dg^{-1/2}
    let mut lsym = DMatrix::<T>::identity(n, n);
    for (i, row) in w.rows.iter().enumerate() {
        for &(j, x) in row {
            lsym[(i, j)] -= x * inv_sqrt[i] * inv_sqrt[j];
        }
    }
    let mut v0 = DVector::from_iterator(n, degree.iter().map(|g| g.sqrt()));
    v0.normalize_mut();
    let (values, vectors) = deflated_bottom(&lsym, &v0, d)?;
    let mut y = vectors;
    for (i, s) in inv_sqrt.iter().enumerate() {
        y.row_mut(i).scale_mut(*s);
    }
    canonical_column_signs(&mut y);
    Ok(Embedding {
        y,
        eigenvalues: values,
        method: EmbeddingMethod::Laplacian(w.kind),
    })
}

/// Dense `(I − W)ᵀ(I − W)`.
pub fn lle_cost_matrix<T: Real>(w: &WeightMatrix<T>) -> DMatrix<T> {
    let n = w.n();
    let mut m = DMatrix::<T>::identity(n, n);
    for (i, row) in w.rows.iter().enumerate() {
        for &(j, x) in row {
            m[(i, j)] -= x;
            m[(j, i)] -= x;
        }
        for &(j, a) in row {
            for &(k, b) in row {
                m[(j, k)] += a * b;
            }
        }
    }
    m
}

/// LLE embedding: bottom nontrivial eigenvectors of `(I − W)ᵀ(I − W)`,
/// with `YᵀY = I` and zero column sums.
pub fn lle_embedding<T: Real>(w: &WeightMatrix<T>, d: usize) -> Result<Embedding<T>> {
    check_weights(w, d, false)?;
    let n = w.n();
    if let Some(i) = w.row_sums().iter().position(|s| (*s - T::one()).abs() > lit(1e4 * T::EPS)) {
        return Err(CamlError::invalid(format!("row {i} of the reconstruction weights does not sum to one")));
    }
    let m = lle_cost_matrix(w);
    let v0 = DVector::from_element(n, T::one() / lit::<T>(n as f64).sqrt());
    let (values, mut y) = deflated_bottom(&m, &v0, d)?;
    canonical_column_signs(&mut y);
    Ok(Embedding {
        y,
        eigenvalues: values,
        method: EmbeddingMethod::LocallyLinear(w.kind),
    })
}

/// Quadratic cost of `y` under `w`: `½ Σ W_ij ‖y_i − y_j‖²` for heat-kernel
/// weights, `Σ ‖y_i − Σ_j W_ij y_j‖²` for reconstruction weights.
pub fn embedding_objective<T: Real>(w: &WeightMatrix<T>, y: &DMatrix<T>) -> T {
    let mut total = T::zero();
    let half = lit::<T>(0.5);
    for (i, row) in w.rows.iter().enumerate() {
        if w.kind.is_laplacian() {
            for &(j, x) in row {
                total += x * (y.row(i) - y.row(j)).norm_squared() * half;
            }
        } else {
            let mut r = y.row(i).into_owned();
            for &(j, x) in row {
                r -= y.row(j) * x;
            }
            total += r.norm_squared();
        }
    }
    total
}

/// All eigenvalues of the unnormalized Laplacian `Dg − W`, ascending.
pub fn laplacian_spectrum<T: Real>(w: &WeightMatrix<T>) -> Result<DVector<T>> {
    if !w.kind.is_laplacian() {
        return Err(CamlError::invalid("spectrum comparison needs heat-kernel weights"));
    }
    let l = laplacian_matrix(w);
    T::symmetric_eigen(&l)
        .map(|e| e.values)
        .ok_or_else(|| CamlError::Numerical("dense eigensolver did not converge".into()))
}

/// Sum of the `d` smallest nontrivial eigenvalues of `Dg − W`.
pub fn reconstruction_error_spectrum<T: Real>(w: &WeightMatrix<T>, d: usize) -> Result<T> {
    check_weights(w, d, true)?;
    check_laplacian_weights(w)?;
    let n = w.n();
    let l = laplacian_matrix(w);
    let v0 = DVector::from_element(n, T::one() / lit::<T>(n as f64).sqrt());
    let (values, _) = deflated_bottom(&l, &v0, d)?;
    Ok(values.sum())
}

/// Principal component analysis.
#[derive(Debug, Clone)]
pub struct Pca<T: Real> {
    pub mean: DVector<T>,
    /// D×d principal directions.
    pub components: DMatrix<T>,
    /// Sample variances along each direction, descending.
    pub variances: DVector<T>,
    /// Fraction of total variance per direction.
    pub explained_ratio: DVector<T>,
    pub embedding: Embedding<T>,
}

impl<T: Real> Pca<T> {
    /// `mean + components · y` for each embedded row.
    pub fn reconstruct(&self) -> DMatrix<T> {
        let mut x = &self.embedding.y * self.components.transpose();
        for mut row in x.row_iter_mut() {
            row += self.mean.transpose();
        }
        x
    }
}

pub fn pca<T: Real>(data: &DataSet<T>, d: usize) -> Result<Pca<T>> {
    let (n, dim) = data.points.shape();
    if d == 0 || d > n.min(dim) {
        return Err(CamlError::invalid(format!(
            "PCA dimension must satisfy 1 <= d <= min(N, D) = {} (got {d})",
            n.min(dim)
        )));
    }
    let mean = data.points.row_mean().transpose();
    let mut centered = data.points.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let svd = T::thin_svd(&centered).ok_or_else(|| CamlError::Numerical("SVD of the centered data failed".into()))?;
    let denom = lit::<T>((n.max(2) - 1) as f64);
    let mut components = DMatrix::<T>::zeros(dim, d);
    let mut variances = DVector::<T>::zeros(d);
    for c in 0..d {
        components.set_column(c, &svd.v.column(c));
        variances[c] = svd.s[c] * svd.s[c] / denom;
    }
    let total = svd.s.iter().fold(T::zero(), |a, &s| a + s * s) / denom;
    let explained_ratio = if total > T::zero() {
        variances.map(|v| v / total)
    } else {
        DVector::zeros(d)
    };
    let mut y = &centered * &components;
    let signs = canonical_column_signs(&mut y);
    for (c, s) in signs.into_iter().enumerate() {
        components.column_mut(c).scale_mut(s);
    }
    Ok(Pca {
        mean,
        components,
        variances: variances.clone(),
        explained_ratio,
        embedding: Embedding {
            y,
            eigenvalues: variances,
            method: EmbeddingMethod::Pca,
        },
    })
}

pub fn pca_embedding<T: Real>(data: &DataSet<T>, d: usize) -> Result<Embedding<T>> {
    pca(data, d).map(|p| p.embedding)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{Bandwidth, WeightKind};

    fn from_dense(m: &DMatrix<f64>, kind: WeightKind) -> WeightMatrix<f64> {
        let rows = (0..m.nrows())
            .map(|i| (0..m.ncols()).filter(|&j| m[(i, j)] != 0.0).map(|j| (j, m[(i, j)])).collect())
            .collect();
        WeightMatrix {
            rows,
            kind,
            sigma: None,
            sigma_c: None,
            mode: None,
        }
    }

    fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407) | 1;
        move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            s as f64 / u64::MAX as f64
        }
    }

    fn random_graph(n: usize, seed: u64) -> WeightMatrix<f64> {
        let mut r = lcg(seed);
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            // ring keeps it connected
            let j = (i + 1) % n;
            let w = 0.1 + r();
            m[(i, j)] = w;
            m[(j, i)] = w;
            for j in i + 2..n {
                if r() < 0.15 {
                    let w = r();
                    m[(i, j)] = w;
                    m[(j, i)] = w;
                }
            }
        }
        from_dense(&m, WeightKind::Lep)
    }

    /// Dense reference: Cholesky-reduce the generalized problem with
    /// nalgebra (a different factorization and eigensolver path).
    fn generalized_oracle(w: &WeightMatrix<f64>) -> DVector<f64> {
        let l = laplacian_matrix(w);
        let dg = DMatrix::from_diagonal(&DVector::from_vec(w.row_sums()));
        let ch = dg.cholesky().unwrap();
        let linv = ch.l().try_inverse().unwrap();
        let c = &linv * l * linv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let mut ev: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        DVector::from_vec(ev)
    }

    #[test]
    fn path_graph_fiedler_vector_is_monotone() {
        let mut m = DMatrix::zeros(4, 4);
        for i in 0..3 {
            m[(i, i + 1)] = 1.0;
            m[(i + 1, i)] = 1.0;
        }
        let e = laplacian_embedding(&from_dense(&m, WeightKind::Lep), 1).unwrap();
        let y = e.y.column(0);
        let inc = (0..3).all(|i| y[i] < y[i + 1]);
        let dec = (0..3).all(|i| y[i] > y[i + 1]);
        assert!(inc || dec, "{y}");
    }

    #[test]
    fn complete_graph_has_flat_spectrum() {
        let n = 6;
        let m = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 });
        let w = from_dense(&m, WeightKind::Lep);
        let e = laplacian_embedding(&w, 3).unwrap();
        // generalized eigenvalues of K_n: n/(n−1)
        for v in e.eigenvalues.iter() {
            assert!((v - n as f64 / (n as f64 - 1.0)).abs() < 1e-12);
        }
        let dg = DMatrix::from_diagonal(&DVector::from_vec(w.row_sums()));
        let gram = e.y.transpose() * dg * &e.y;
        assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-8);
        // unnormalized spectrum: λ = n
        let s = reconstruction_error_spectrum(&w, 1).unwrap();
        assert!((s - n as f64).abs() < 1e-10);
    }

    #[test]
    fn random_graph_matches_dense_oracle() {
        let w = random_graph(50, 3);
        let e = laplacian_embedding(&w, 4).unwrap();
        let oracle = generalized_oracle(&w);
        for k in 0..4 {
            assert!((e.eigenvalues[k] - oracle[k + 1]).abs() < 1e-8);
        }
        // residuals and objective identity
        let l = laplacian_matrix(&w);
        let dg = DMatrix::from_diagonal(&DVector::from_vec(w.row_sums()));
        for k in 0..4 {
            let v = e.y.column(k);
            let r = &l * v - (&dg * v) * e.eigenvalues[k];
            assert!(r.norm() <= 1e-8 * l.norm());
        }
        let phi = embedding_objective(&w, &e.y);
        assert!((phi - e.eigenvalues.sum()).abs() < 1e-8);
    }

    #[test]
    fn disconnected_and_isolated_are_errors() {
        let mut m = DMatrix::zeros(6, 6);
        for (a, b) in [(0, 1), (1, 2), (3, 4), (4, 5)] {
            m[(a, b)] = 1.0;
            m[(b, a)] = 1.0;
        }
        let w = from_dense(&m, WeightKind::Lep);
        assert!(matches!(laplacian_embedding(&w, 1), Err(CamlError::Disconnected { components: 2 })));
        m[(3, 4)] = 0.0;
        m[(4, 3)] = 0.0;
        m[(4, 5)] = 0.0;
        m[(5, 4)] = 0.0;
        let w = from_dense(&m, WeightKind::Lep);
        assert!(matches!(laplacian_embedding(&w, 1), Err(CamlError::IsolatedVertex { index: 3 })));
        let ring = random_graph(5, 1);
        assert!(laplacian_embedding(&ring, 4).is_err());
        assert!(lle_embedding(&ring, 1).is_err());
    }

    fn random_lle(n: usize, seed: u64) -> WeightMatrix<f64> {
        let mut r = lcg(seed);
        let rows = (0..n)
            .map(|i| {
                let mut cols: Vec<usize> = (1..=4).map(|o| (i + o * 7) % n).collect();
                cols.sort();
                cols.dedup();
                let raw: Vec<f64> = cols.iter().map(|_| r() - 0.2).collect();
                let s: f64 = raw.iter().sum();
                cols.into_iter().zip(raw.into_iter().map(|x| x / s)).collect()
            })
            .collect();
        WeightMatrix {
            rows,
            kind: WeightKind::Lle,
            sigma: None,
            sigma_c: None,
            mode: None,
        }
    }

    #[test]
    fn lle_bottom_spectrum_matches_dense_oracle() {
        let w = random_lle(50, 8);
        let e = lle_embedding(&w, 3).unwrap();
        // oracle: nalgebra eigenvalues of the explicitly multiplied matrix
        let iw = DMatrix::identity(50, 50) - w.to_dense();
        let m = iw.transpose() * &iw;
        let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(ev[0].abs() < 1e-10);
        for k in 0..3 {
            assert!((e.eigenvalues[k] - ev[k + 1]).abs() < 1e-8);
        }
        let gram = e.y.transpose() * &e.y;
        assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-8);
        for c in e.y.column_iter() {
            assert!(c.sum().abs() < 1e-8);
        }
        let phi = embedding_objective(&w, &e.y);
        assert!((phi - e.eigenvalues.sum()).abs() < 1e-8);
    }

    #[test]
    fn exact_affine_reconstruction_gives_zero_cost() {
        // points t = 0..n on a line: interior points are midpoints, the ends
        // are affine extrapolations of their two inner neighbors
        let n = 30;
        let rows = (0..n)
            .map(|i| match i {
                0 => vec![(1, 2.0), (2, -1.0)],
                i if i == n - 1 => vec![(n - 3, -1.0), (n - 2, 2.0)],
                i => vec![(i - 1, 0.5), (i + 1, 0.5)],
            })
            .collect();
        let w = WeightMatrix {
            rows,
            kind: WeightKind::Lle,
            sigma: None,
            sigma_c: None,
            mode: None,
        };
        let e = lle_embedding(&w, 1).unwrap();
        assert!(embedding_objective(&w, &e.y) <= 1e-8);
        let t = DVector::from_fn(n, |i, _| i as f64 - (n as f64 - 1.0) / 2.0).normalize();
        let c = e.y.column(0);
        assert!((c - &t).amax().min((c + &t).amax()) < 1e-8);
    }

    #[test]
    fn pca_reconstructs_subspace_data() {
        let mut r = lcg(4);
        let basis = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 0.0, -1.0, 0.0, 1.0, 1.0, 1.0]);
        let coef = DMatrix::from_fn(40, 2, |_, _| r() - 0.5);
        let mut pts = coef * basis;
        for mut row in pts.row_iter_mut() {
            row[0] += 3.0;
        }
        let data = DataSet::new(pts.clone(), None, "sub").unwrap();
        let p = pca(&data, 2).unwrap();
        assert!((p.reconstruct() - pts).amax() < 1e-10);
        assert!(pca(&data, 5).is_err());
        assert!(pca(&data, 0).is_err());
    }

    #[test]
    fn pca_isotropic_variance_split() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(17);
        let pts = DMatrix::<f64>::from_fn(4000, 4, |_, _| StandardNormal.sample(&mut rng));
        let data = DataSet::new(pts, None, "iso").unwrap();
        let p = pca(&data, 2).unwrap();
        let frac: f64 = p.explained_ratio.sum();
        assert!((frac - 0.5).abs() < 0.05, "{frac}");
    }

    #[test]
    fn pca_rotation_leaves_scores_up_to_sign() {
        let mut r = lcg(9);
        let pts = DMatrix::from_fn(60, 3, |_, c| (r() - 0.5) * (3.0 - c as f64));
        let data = DataSet::new(pts.clone(), None, "a").unwrap();
        let (c, s) = (0.6f64, 0.8f64);
        let rot = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let rotated = DataSet::new(pts * rot, None, "b").unwrap();
        let a = pca_embedding(&data, 2).unwrap();
        let b = pca_embedding(&rotated, 2).unwrap();
        assert!((a.y.abs() - b.y.abs()).amax() < 1e-10);
    }

    #[test]
    fn repeated_runs_are_identical() {
        let w = random_graph(40, 5);
        let a = laplacian_embedding(&w, 2).unwrap();
        let b = laplacian_embedding(&w, 2).unwrap();
        assert_eq!(a.y, b.y);
        let _ = Bandwidth::<f64>::Auto;
    }
}
