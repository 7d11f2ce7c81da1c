//! Local tangent/normal frames, quadratic patch fits and curvature.
//!
//! For a point `x_i` with neighbors `x_{i_1} … x_{i_K}`, the tangent basis is
//! the top-`d` right singular subspace of the neighbor offsets `x_{i_j} − x_i`
//! and the normal basis completes it by Gram–Schmidt. Each normal deflection
//! `f^α(u)` is then fitted by a full quadratic in the tangent coordinates,
//!
//! ```text
//! f^α(u) ≈ f^α(0) + uᵀ∇f^α + ½ uᵀ H^α u,
//! ```
//!
//! whose Hessians `H^α` are the second-fundamental-form coefficients. The
//! design matrix row for a neighbor is
//! `[1, u¹…u^d, (u¹)²…(u^d)², u¹u², u¹u³, …, u^{d−1}u^d]`, so a squared
//! monomial's coefficient is `½ h_jj` and a cross monomial's is `h_jk`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::datasets::DataSet;
use crate::error::{CamlError, Result};
use crate::neighborhood::NeighborGraph;
use crate::scalar::{canonical_column_signs, lit, Real};

/// Relative singular-value cutoff for ranks and pseudo-inverses.
pub const RANK_TOL: f64 = 1e-10;

/// Ridge strength, relative to `trace(ΨᵀΨ)/m`, for underdetermined fits.
pub const RIDGE_SCALE: f64 = 1e-6;

/// Local coordinate system at one point.
#[derive(Debug, Clone)]
pub struct LocalFrame<T: Real> {
    pub center: usize,
    /// Patch members, in graph order.
    pub neighbors: Vec<usize>,
    /// D×d, orthonormal columns.
    pub tangent: DMatrix<T>,
    /// D×(D−d), orthonormal columns, orthogonal to `tangent`.
    pub normal: DMatrix<T>,
    /// K×d tangent coordinates of the neighbors.
    pub u: DMatrix<T>,
    /// K×(D−d) normal deflections of the neighbors.
    pub fvals: DMatrix<T>,
}

impl<T: Real> LocalFrame<T> {
    pub fn intrinsic_dim(&self) -> usize {
        self.tangent.ncols()
    }

    pub fn codim(&self) -> usize {
        self.normal.ncols()
    }

    /// Frame with a caller-supplied orthonormal basis (for oracle surfaces
    /// whose tangent plane is known analytically).
    pub fn from_basis(
        data: &DataSet<T>,
        center: usize,
        neighbors: Vec<usize>,
        tangent: DMatrix<T>,
        normal: DMatrix<T>,
    ) -> Result<Self> {
        let dim = data.dim();
        if tangent.nrows() != dim || normal.nrows() != dim || tangent.ncols() + normal.ncols() != dim {
            return Err(CamlError::invalid("basis shapes do not match the ambient dimension"));
        }
        let mut offsets = DMatrix::<T>::zeros(neighbors.len(), dim);
        for (r, &j) in neighbors.iter().enumerate() {
            for c in 0..dim {
                offsets[(r, c)] = data.points[(j, c)] - data.points[(center, c)];
            }
        }
        Ok(LocalFrame {
            center,
            u: &offsets * &tangent,
            fvals: &offsets * &normal,
            neighbors,
            tangent,
            normal,
        })
    }

    /// Tangent coordinates of an arbitrary point relative to this frame.
    pub fn project_tangent(&self, data: &DataSet<T>, j: usize) -> DVector<T> {
        let off = (data.points.row(j) - data.points.row(self.center)).transpose();
        self.tangent.tr_mul(&off)
    }
}

/// Quadratic model of the normal deflections over one patch.
#[derive(Debug, Clone)]
pub struct QuadraticFit<T: Real> {
    /// d×(D−d); column α is ∇f^α.
    pub gradient: DMatrix<T>,
    /// One symmetric d×d Hessian per normal direction.
    pub hessians: Vec<DMatrix<T>>,
    /// Ascending eigenvalues of each Hessian.
    pub principal_curvatures: Vec<DVector<T>>,
    /// Root-mean-square residual of the fit.
    pub residual: T,
    /// Whether the ridge fallback was used.
    pub ridge: bool,
}

impl<T: Real> QuadraticFit<T> {
    /// `Σ_α ‖H^α‖_F²`, the total squared principal curvature.
    pub fn total_squared_curvature(&self) -> T {
        self.hessians.iter().map(|h| h.norm_squared()).fold(T::zero(), |a, b| a + b)
    }

    /// Same quantity computed from the eigenvalues.
    pub fn squared_principal_sum(&self) -> T {
        self.principal_curvatures
            .iter()
            .map(|l| l.norm_squared())
            .fold(T::zero(), |a, b| a + b)
    }

    /// `[uᵀH^α u]_α` for a tangent vector `u`.
    pub fn quadratic_form(&self, u: &DVector<T>) -> DVector<T> {
        DVector::from_iterator(self.hessians.len(), self.hessians.iter().map(|h| u.dot(&(h * u))))
    }

    /// Hessian stack with every entry set to zero (same shapes).
    pub fn zeroed(&self) -> Self {
        let d = self.gradient.nrows();
        let c = self.hessians.len();
        QuadraticFit {
            gradient: self.gradient.clone(),
            hessians: vec![DMatrix::zeros(d, d); c],
            principal_curvatures: vec![DVector::zeros(d); c],
            residual: self.residual,
            ridge: self.ridge,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Fall back to a ridge solve when the design matrix is underdetermined
    /// or rank deficient; otherwise such patches are an error.
    pub allow_ridge: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { allow_ridge: true }
    }
}

/// Frame and fit at one point.
#[derive(Debug, Clone)]
pub struct LocalGeometry<T: Real> {
    pub frame: LocalFrame<T>,
    pub fit: QuadraticFit<T>,
}

/// Number of quadratic monomials in `d` variables, constant included.
pub fn monomial_count(d: usize) -> usize {
    1 + d + d * (d + 1) / 2
}

fn degenerate(index: usize, reason: impl Into<String>) -> CamlError {
    CamlError::DegeneratePatch {
        index,
        reason: reason.into(),
    }
}

/// Modified Gram–Schmidt with one reorthogonalization pass. Returns the
/// normalized residual of `v` against `basis`, or `None` if it is negligible.
fn orthogonalize<T: Real>(v: &DVector<T>, basis: &[DVector<T>]) -> Option<DVector<T>> {
    let mut w = v.clone();
    for _ in 0..2 {
        for b in basis {
            let p = b.dot(&w);
            w.axpy(-p, b, T::one());
        }
    }
    let norm = w.norm();
    (norm > lit(1e-6)).then(|| w / norm)
}

/// Estimates the tangent and normal frames of the patch at point `i`.
pub fn local_frame<T: Real>(data: &DataSet<T>, graph: &NeighborGraph<T>, i: usize, d: usize) -> Result<LocalFrame<T>> {
    let dim = data.dim();
    if d == 0 || d >= dim {
        return Err(CamlError::invalid(format!(
            "intrinsic dimension must satisfy 1 <= d < D = {dim} (got {d})"
        )));
    }
    let nb = &graph.neighbors[i];
    let k = nb.len();
    if k < d {
        return Err(degenerate(i, format!("{k} neighbors cannot span {d} dimensions")));
    }
    let mut offsets = DMatrix::<T>::zeros(k, dim);
    for (r, &j) in nb.iter().enumerate() {
        for c in 0..dim {
            offsets[(r, c)] = data.points[(j, c)] - data.points[(i, c)];
        }
    }

    let svd = T::thin_svd(&offsets).ok_or_else(|| CamlError::Numerical(format!("SVD failed at point {i}")))?;
    let smax = svd.s[0];
    if !(smax > T::zero()) || svd.s.len() < d || svd.s[d - 1] <= smax * lit(RANK_TOL) {
        return Err(degenerate(i, format!("centered neighbors have rank < {d}")));
    }

    let mut basis: Vec<DVector<T>> = Vec::with_capacity(dim);
    for c in 0..d {
        let v = svd.v.column(c).into_owned();
        let w = orthogonalize(&v, &basis).ok_or_else(|| degenerate(i, "tangent directions collapsed"))?;
        basis.push(w);
    }
    let candidates = (d..svd.s.len())
        .map(|c| svd.v.column(c).into_owned())
        .chain((0..dim).map(|c| DVector::from_fn(dim, |r, _| if r == c { T::one() } else { T::zero() })));
    for v in candidates {
        if basis.len() == dim {
            break;
        }
        if let Some(w) = orthogonalize(&v, &basis) {
            basis.push(w);
        }
    }
    debug_assert_eq!(basis.len(), dim);

    let mut tangent = DMatrix::from_columns(&basis[..d]);
    let mut normal = DMatrix::from_columns(&basis[d..]);
    canonical_column_signs(&mut tangent);
    canonical_column_signs(&mut normal);
    let u = &offsets * &tangent;
    let fvals = &offsets * &normal;
    Ok(LocalFrame {
        center: i,
        neighbors: nb.clone(),
        tangent,
        normal,
        u,
        fvals,
    })
}

/// Design matrix of the quadratic model for tangent coordinates `u` (K×d).
pub fn design_matrix<T: Real>(u: &DMatrix<T>) -> DMatrix<T> {
    let (k, d) = u.shape();
    let m = monomial_count(d);
    let mut psi = DMatrix::<T>::zeros(k, m);
    for r in 0..k {
        psi[(r, 0)] = T::one();
        for j in 0..d {
            psi[(r, 1 + j)] = u[(r, j)];
            psi[(r, 1 + d + j)] = u[(r, j)] * u[(r, j)];
        }
        let mut col = 1 + 2 * d;
        for j in 0..d {
            for l in j + 1..d {
                psi[(r, col)] = u[(r, j)] * u[(r, l)];
                col += 1;
            }
        }
    }
    psi
}

/// Least-squares quadratic fit of the patch's normal deflections.
pub fn quadratic_fit<T: Real>(frame: &LocalFrame<T>, opts: FitOptions) -> Result<QuadraticFit<T>> {
    let d = frame.intrinsic_dim();
    let codim = frame.codim();
    let k = frame.u.nrows();
    let m = monomial_count(d);
    let psi = design_matrix(&frame.u);

    let svd = T::thin_svd(&psi)
        .ok_or_else(|| CamlError::Numerical(format!("SVD of the design matrix failed at point {}", frame.center)))?;
    let smax = svd.s.max();
    let cutoff = smax * lit(RANK_TOL);
    let rank = svd.s.iter().filter(|&&s| s > cutoff).count();

    let (coef, ridge) = if k >= m && rank == m {
        (svd.solve(&frame.fvals, cutoff), false)
    } else if opts.allow_ridge {
        let gram = psi.tr_mul(&psi);
        let lambda = gram.trace() * lit(RIDGE_SCALE) / lit(m as f64);
        let lambda = if lambda > T::zero() { lambda } else { lit(RIDGE_SCALE) };
        let reg = &gram + DMatrix::<T>::identity(m, m) * lambda;
        let rhs = psi.tr_mul(&frame.fvals);
        let chol = reg
            .cholesky()
            .ok_or_else(|| CamlError::Numerical(format!("ridge system not positive definite at point {}", frame.center)))?;
        log::warn!(
            "point {}: quadratic design matrix has rank {rank} < {m} (K = {k}); using ridge lambda = {lambda:e}",
            frame.center
        );
        (chol.solve(&rhs), true)
    } else {
        return Err(degenerate(
            frame.center,
            format!("quadratic design matrix has rank {rank} < {m} (K = {k})"),
        ));
    };

    let gradient = coef.rows(1, d).into_owned();
    let mut hessians = Vec::with_capacity(codim);
    for a in 0..codim {
        let mut h = DMatrix::<T>::zeros(d, d);
        for j in 0..d {
            h[(j, j)] = coef[(1 + d + j, a)] * lit(2.0);
        }
        let mut row = 1 + 2 * d;
        for j in 0..d {
            for l in j + 1..d {
                h[(j, l)] = coef[(row, a)];
                h[(l, j)] = coef[(row, a)];
                row += 1;
            }
        }
        hessians.push(h);
    }
    let principal_curvatures = hessians
        .iter()
        .map(|h| {
            let mut ev: Vec<T> = h.clone().symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
            DVector::from_vec(ev)
        })
        .collect();
    let resid = &psi * &coef - &frame.fvals;
    let count = (resid.len().max(1)) as f64;
    let residual = (resid.norm_squared() / lit(count)).sqrt();

    Ok(QuadraticFit {
        gradient,
        hessians,
        principal_curvatures,
        residual,
        ridge,
    })
}

/// Frame and quadratic fit at every point. On failure the error names the
/// lowest offending index.
pub fn local_geometry<T: Real>(
    data: &DataSet<T>,
    graph: &NeighborGraph<T>,
    d: usize,
    opts: FitOptions,
) -> Result<Vec<LocalGeometry<T>>> {
    if graph.len() != data.len() {
        return Err(CamlError::invalid(format!(
            "graph has {} points, data has {}",
            graph.len(),
            data.len()
        )));
    }
    let results: Vec<Result<LocalGeometry<T>>> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let frame = local_frame(data, graph, i, d)?;
            let fit = quadratic_fit(&frame, opts)?;
            Ok(LocalGeometry { frame, fit })
        })
        .collect();
    results.into_iter().collect()
}

/// Riemann curvature components `R^i_{jkl} = Σ_α (h_ik h_jl − h_il h_jk)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensor<T> {
    pub dim: usize,
    /// Row-major over `(i, j, k, l)`.
    pub data: Vec<T>,
}

impl<T: Real> CurvatureTensor<T> {
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> T {
        let d = self.dim;
        self.data[((i * d + j) * d + k) * d + l]
    }
}

pub fn curvature_components<T: Real>(fit: &QuadraticFit<T>) -> CurvatureTensor<T> {
    let d = fit.gradient.nrows();
    let mut data = Vec::with_capacity(d * d * d * d);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let mut r = T::zero();
                    for h in &fit.hessians {
                        r += h[(i, k)] * h[(j, l)] - h[(i, l)] * h[(j, k)];
                    }
                    data.push(r);
                }
            }
        }
    }
    CurvatureTensor { dim: d, data }
}

/// Per-point total squared curvature `c_i = Σ_α ‖H^α‖_F²`.
#[derive(Debug, Clone)]
pub struct CurvatureField<T: Real> {
    pub values: Vec<T>,
    /// Principal curvatures per point, one vector per normal direction.
    pub principal: Vec<Vec<DVector<T>>>,
    pub components: Option<Vec<CurvatureTensor<T>>>,
}

impl<T: Real> CurvatureField<T> {
    pub fn from_geometry(geometry: &[LocalGeometry<T>], with_components: bool) -> Self {
        CurvatureField {
            values: geometry.iter().map(|g| g.fit.total_squared_curvature()).collect(),
            principal: geometry.iter().map(|g| g.fit.principal_curvatures.clone()).collect(),
            components: with_components.then(|| geometry.iter().map(|g| curvature_components(&g.fit)).collect()),
        }
    }

    pub fn mean(&self) -> T {
        let n = self.values.len().max(1);
        self.values.iter().fold(T::zero(), |a, &b| a + b) / lit(n as f64)
    }
}

pub fn curvature_field<T: Real>(
    data: &DataSet<T>,
    graph: &NeighborGraph<T>,
    d: usize,
    opts: FitOptions,
    with_components: bool,
) -> Result<CurvatureField<T>> {
    let geometry = local_geometry(data, graph, d, opts)?;
    Ok(CurvatureField::from_geometry(&geometry, with_components))
}
