//! Local weight matrices: heat-kernel affinities (LEP, CA-LEP) and
//! affine reconstruction weights (LLE, CA-LLE).
//!
//! The curvature-aware LEP weight multiplies the ordinary heat kernel by a
//! penalty on the total squared principal curvature `c_j` of the neighbor,
//!
//! ```text
//! W_ij = exp(−‖x_i − x_j‖² / 2σ²) · exp(−c_j / 2σ_c²),
//! ```
//!
//! and is then symmetrized by averaging. Since the penalty never exceeds one,
//! every CA-LEP entry is bounded by the LEP entry on the same graph.
//!
//! The curvature-aware LLE weight reconstructs the patch center (feature
//! vector zero) from neighbor features `[u_j ; q_j]` where `u_j` are tangent
//! coordinates and `q_j[α] = u_jᵀ H^α u_j` uses the center patch's Hessians.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{write_atomic, DataSet};
use crate::error::{CamlError, Result};
use crate::localgeom::LocalGeometry;
use crate::neighborhood::NeighborGraph;
use crate::scalar::{lit, median, Real};

/// Default LLE Tikhonov factor (relative to `trace(G)/K`).
pub const LLE_REG: f64 = 1e-3;
/// Tikhonov factor (relative to `trace(G)`) when the Gram matrix can be full rank.
pub const LLE_REG_FULL_RANK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    Lep,
    CaLep,
    Lle,
    CaLle,
}

impl WeightKind {
    pub fn is_laplacian(self) -> bool {
        matches!(self, WeightKind::Lep | WeightKind::CaLep)
    }
}

/// Which reading of the curvature-aware heat kernel to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurvatureMode {
    /// Heat kernel times `exp(−c_j/2σ_c²)` with `c_j` the neighbor's own
    /// total squared curvature.
    #[default]
    PointHessian,
    /// Heat kernel on the patch feature distance `‖[u ; q]‖` in the frame of
    /// the center point.
    PatchForm,
}

impl CurvatureMode {
    pub fn name(self) -> &'static str {
        match self {
            CurvatureMode::PointHessian => "point-hessian",
            CurvatureMode::PatchForm => "patch-form",
        }
    }
}

impl fmt::Display for CurvatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CurvatureMode {
    type Err = CamlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "point-hessian" => Ok(CurvatureMode::PointHessian),
            "patch-form" => Ok(CurvatureMode::PatchForm),
            other => Err(CamlError::invalid(format!("unknown curvature mode `{other}`"))),
        }
    }
}

/// Kernel bandwidth: fixed, or chosen by the median heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Bandwidth<T> {
    #[default]
    Auto,
    Fixed(T),
}

impl<T: Real> Bandwidth<T> {
    fn resolve(self, what: &str, auto: impl FnOnce() -> Option<T>) -> Result<T> {
        let v = match self {
            Bandwidth::Fixed(v) => v,
            Bandwidth::Auto => auto().ok_or_else(|| CamlError::invalid(format!("cannot choose {what} automatically")))?,
        };
        if !(v > T::zero()) || !v.is_finite() {
            return Err(CamlError::invalid(format!("{what} must be positive (got {v})")));
        }
        Ok(v)
    }
}

/// Sparse N×N weight matrix stored by rows; each row sorted by column.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix<T: Real> {
    pub rows: Vec<Vec<(usize, T)>>,
    pub kind: WeightKind,
    pub sigma: Option<T>,
    pub sigma_c: Option<T>,
    pub mode: Option<CurvatureMode>,
}

impl<T: Real> WeightMatrix<T> {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.rows[i]
            .binary_search_by_key(&j, |e| e.0)
            .map(|p| self.rows[i][p].1)
            .unwrap_or_else(|_| T::zero())
    }

    pub fn row_sums(&self) -> Vec<T> {
        self.rows
            .iter()
            .map(|r| r.iter().fold(T::zero(), |a, e| a + e.1))
            .collect()
    }

    /// Largest `|W_ij − W_ji|`.
    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                let d = (w - self.get(j, i)).abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                m[(i, j)] = w;
            }
        }
        m
    }

    /// Writes `i,j,w` lines (zero-based indices).
    pub fn write_coo(&self, path: &Path) -> Result<()> {
        let mut out = String::from("i,j,w\n");
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                out.push_str(&format!("{i},{j},{w}\n"));
            }
        }
        write_atomic(path, out.as_bytes())
    }

    /// Averages with the transpose: `(W + Wᵀ)/2` on the union of patterns.
    pub fn symmetrized(&self) -> Self {
        let n = self.n();
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        let half = lit::<T>(0.5);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                rows[i].push((j, w));
                rows[j].push((i, w));
            }
        }
        for r in rows.iter_mut() {
            r.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, T)> = Vec::with_capacity(r.len());
            for &(j, w) in r.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += w,
                    _ => merged.push((j, w)),
                }
            }
            // entries seen once had no mirror: the mirror is an implicit zero
            *r = merged.into_iter().map(|(j, w)| (j, w * half)).collect();
        }
        WeightMatrix { rows, ..self.clone() }
    }
}

#[inline]
fn heat<T: Real>(dist2: T, sigma: T) -> T {
    (-dist2 / (lit::<T>(2.0) * sigma * sigma)).exp()
}

fn check_laplacian_graph<T: Real>(data: &DataSet<T>, graph: &NeighborGraph<T>) -> Result<()> {
    if graph.len() != data.len() {
        return Err(CamlError::invalid(format!(
            "graph has {} points, data has {}",
            graph.len(),
            data.len()
        )));
    }
    if graph.edge_count() == 0 {
        return Err(CamlError::invalid("empty graph: no point has any neighbor"));
    }
    if !graph.is_symmetric() {
        return Err(CamlError::invalid("heat-kernel weights need a symmetrized graph"));
    }
    Ok(())
}

/// Median heuristic for σ: the median stored edge length.
pub fn auto_sigma<T: Real>(graph: &NeighborGraph<T>) -> Option<T> {
    median(&graph.all_distances()).filter(|s| *s > T::zero())
}

/// Median heuristic for σ_c: the median positive curvature `c_j`.
/// Falls back to one when every curvature vanishes (the penalty is then 1).
pub fn auto_sigma_c<T: Real>(curvatures: &[T]) -> T {
    let positive: Vec<T> = curvatures.iter().copied().filter(|c| *c > T::zero()).collect();
    median(&positive).unwrap_or_else(T::one)
}

/// Heat-kernel weights `exp(−‖x_i − x_j‖²/2σ²)` on the edges of a
/// symmetric graph.
pub fn lep_weights<T: Real>(data: &DataSet<T>, graph: &NeighborGraph<T>, sigma: Bandwidth<T>) -> Result<WeightMatrix<T>> {
    check_laplacian_graph(data, graph)?;
    let sigma = sigma.resolve("sigma", || auto_sigma(graph))?;
    let rows = graph
        .neighbors
        .iter()
        .enumerate()
        .map(|(i, nb)| {
            let mut r: Vec<(usize, T)> = nb.iter().map(|&j| (j, heat(data.dist2(i, j), sigma))).collect();
            r.sort_by_key(|e| e.0);
            r
        })
        .collect();
    Ok(WeightMatrix {
        rows,
        kind: WeightKind::Lep,
        sigma: Some(sigma),
        sigma_c: None,
        mode: None,
    })
}

/// Curvature-aware heat-kernel weights; see [`CurvatureMode`].
pub fn ca_lep_weights<T: Real>(
    data: &DataSet<T>,
    graph: &NeighborGraph<T>,
    geometry: &[LocalGeometry<T>],
    sigma: Bandwidth<T>,
    sigma_c: Bandwidth<T>,
    mode: CurvatureMode,
) -> Result<WeightMatrix<T>> {
    check_laplacian_graph(data, graph)?;
    if geometry.len() != data.len() {
        return Err(CamlError::invalid(format!(
            "curvature fits available for {} of {} points",
            geometry.len(),
            data.len()
        )));
    }
    let sigma = sigma.resolve("sigma", || auto_sigma(graph))?;
    let two = lit::<T>(2.0);
    let (raw, sigma_c) = match mode {
        CurvatureMode::PointHessian => {
            let c: Vec<T> = geometry.iter().map(|g| g.fit.total_squared_curvature()).collect();
            let sigma_c = sigma_c.resolve("sigma_c", || Some(auto_sigma_c(&c)))?;
            let penalty: Vec<T> = c.iter().map(|&cj| (-cj / (two * sigma_c * sigma_c)).exp()).collect();
            let rows: Vec<Vec<(usize, T)>> = graph
                .neighbors
                .iter()
                .enumerate()
                .map(|(i, nb)| {
                    let mut r: Vec<(usize, T)> =
                        nb.iter().map(|&j| (j, heat(data.dist2(i, j), sigma) * penalty[j])).collect();
                    r.sort_by_key(|e| e.0);
                    r
                })
                .collect();
            (rows, Some(sigma_c))
        }
        CurvatureMode::PatchForm => {
            let rows: Vec<Vec<(usize, T)>> = graph
                .neighbors
                .par_iter()
                .enumerate()
                .map(|(i, nb)| {
                    let g = &geometry[i];
                    let mut r: Vec<(usize, T)> = nb
                        .iter()
                        .map(|&j| {
                            let tau = g.frame.project_tangent(data, j);
                            let q = g.fit.quadratic_form(&tau);
                            (j, heat(tau.norm_squared() + q.norm_squared(), sigma))
                        })
                        .collect();
                    r.sort_by_key(|e| e.0);
                    r
                })
                .collect();
            (rows, None)
        }
    };
    let w = WeightMatrix {
        rows: raw,
        kind: WeightKind::CaLep,
        sigma: Some(sigma),
        sigma_c,
        mode: Some(mode),
    };
    Ok(w.symmetrized())
}

/// Per-patch reconstruction features `[u_j ; q_j]` in the center's frame.
/// The center itself has the zero feature vector.
#[derive(Debug, Clone)]
pub struct PatchFeatures<T: Real> {
    pub neighbors: Vec<Vec<usize>>,
    /// K×d tangent coordinates per patch.
    pub tau: Vec<DMatrix<T>>,
    /// K×(D−d) curvature terms per patch.
    pub q: Vec<DMatrix<T>>,
}

impl<T: Real> PatchFeatures<T> {
    pub fn from_geometry(geometry: &[LocalGeometry<T>]) -> Self {
        let mut neighbors = Vec::with_capacity(geometry.len());
        let mut tau = Vec::with_capacity(geometry.len());
        let mut q = Vec::with_capacity(geometry.len());
        for g in geometry {
            let u = &g.frame.u;
            let codim = g.fit.hessians.len();
            let mut qi = DMatrix::<T>::zeros(u.nrows(), codim);
            for r in 0..u.nrows() {
                let ur = u.row(r).transpose();
                for (a, h) in g.fit.hessians.iter().enumerate() {
                    qi[(r, a)] = ur.dot(&(h * &ur));
                }
            }
            neighbors.push(g.frame.neighbors.clone());
            tau.push(u.clone());
            q.push(qi);
        }
        PatchFeatures { neighbors, tau, q }
    }

    /// Same tangent part with every curvature term zeroed.
    pub fn without_curvature(&self) -> Self {
        PatchFeatures {
            neighbors: self.neighbors.clone(),
            tau: self.tau.clone(),
            q: self.q.iter().map(|m| DMatrix::zeros(m.nrows(), m.ncols())).collect(),
        }
    }

    /// K×(d + D−d) stacked features of patch `i`.
    pub fn stacked(&self, i: usize) -> DMatrix<T> {
        let (k, d) = self.tau[i].shape();
        let c = self.q[i].ncols();
        let mut m = DMatrix::zeros(k, d + c);
        m.view_mut((0, 0), (k, d)).copy_from(&self.tau[i]);
        m.view_mut((0, d), (k, c)).copy_from(&self.q[i]);
        m
    }
}

/// Tikhonov strength used for a K×width feature matrix with Gram trace `tr`.
pub fn lle_lambda<T: Real>(k: usize, width: usize, trace: T, reg: T) -> T {
    let lambda = if k > width {
        reg * trace / lit(k as f64)
    } else {
        trace * lit(LLE_REG_FULL_RANK)
    };
    if lambda > T::zero() {
        lambda
    } else {
        // all neighbors coincide with the center: any affine weights are exact
        reg
    }
}

/// Affine weights `w` (Σw = 1) minimizing `‖Σ_j w_j F_j‖² + λ‖w‖²` where
/// `F_j` is row `j` of `features` (neighbor offset from the center).
pub fn affine_weights<T: Real>(features: &DMatrix<T>, reg: T) -> Option<DVector<T>> {
    let k = features.nrows();
    if k == 0 {
        return None;
    }
    if k == 1 {
        return Some(DVector::from_element(1, T::one()));
    }
    let mut gram = features * features.transpose();
    let lambda = lle_lambda(k, features.ncols(), gram.trace(), reg);
    for r in 0..k {
        gram[(r, r)] += lambda;
    }
    let ones = DVector::from_element(k, T::one());
    let w = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&ones),
        None => gram.lu().solve(&ones)?,
    };
    let total = w.sum();
    if !total.is_finite() || total.abs() <= T::default_epsilon() {
        return None;
    }
    Some(w / total)
}

/// `‖Σ_j w_j F_j‖² + λ‖w‖²` with the same λ [`affine_weights`] would use.
pub fn affine_objective<T: Real>(features: &DMatrix<T>, w: &DVector<T>, reg: T) -> T {
    let k = features.nrows();
    let rec = features.tr_mul(w);
    let gram_trace = features.norm_squared();
    let lambda = if k > 1 { lle_lambda(k, features.ncols(), gram_trace, reg) } else { T::zero() };
    rec.norm_squared() + lambda * w.norm_squared()
}

fn reconstruction_matrix<T: Real>(
    n: usize,
    neighbors: &[Vec<usize>],
    features: impl Fn(usize) -> DMatrix<T> + Sync,
    reg: T,
    kind: WeightKind,
) -> Result<WeightMatrix<T>> {
    if !(reg > T::zero()) {
        return Err(CamlError::invalid("LLE regularization must be positive"));
    }
    let rows: Vec<Result<Vec<(usize, T)>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if neighbors[i].is_empty() {
                return Err(CamlError::invalid(format!("point {i} has no neighbors")));
            }
            let w = affine_weights(&features(i), reg)
                .ok_or_else(|| CamlError::Numerical(format!("singular local Gram system at point {i}")))?;
            let mut r: Vec<(usize, T)> = neighbors[i].iter().copied().zip(w.iter().copied()).collect();
            r.sort_by_key(|e| e.0);
            Ok(r)
        })
        .collect();
    Ok(WeightMatrix {
        rows: rows.into_iter().collect::<Result<_>>()?,
        kind,
        sigma: None,
        sigma_c: None,
        mode: None,
    })
}

/// Ambient-space neighbor offsets of patch `i` (K×D).
pub fn ambient_offsets<T: Real>(data: &DataSet<T>, center: usize, neighbors: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(neighbors.len(), data.dim(), |r, c| {
        data.points[(neighbors[r], c)] - data.points[(center, c)]
    })
}

/// Classical LLE weights in ambient coordinates; each row sums to one.
pub fn lle_weights<T: Real>(data: &DataSet<T>, graph: &NeighborGraph<T>, reg: T) -> Result<WeightMatrix<T>> {
    if graph.len() != data.len() {
        return Err(CamlError::invalid("graph and data sizes differ"));
    }
    reconstruction_matrix(
        data.len(),
        &graph.neighbors,
        |i| ambient_offsets(data, i, &graph.neighbors[i]),
        reg,
        WeightKind::Lle,
    )
}

/// LLE weights computed from tangent coordinates only.
pub fn tangent_lle_weights<T: Real>(features: &PatchFeatures<T>, reg: T) -> Result<WeightMatrix<T>> {
    reconstruction_matrix(
        features.tau.len(),
        &features.neighbors,
        |i| features.tau[i].clone(),
        reg,
        WeightKind::Lle,
    )
}

/// Curvature-aware LLE weights from stacked `[u ; q]` features.
pub fn ca_lle_weights<T: Real>(features: &PatchFeatures<T>, reg: T) -> Result<WeightMatrix<T>> {
    reconstruction_matrix(
        features.tau.len(),
        &features.neighbors,
        |i| features.stacked(i),
        reg,
        WeightKind::CaLle,
    )
}
