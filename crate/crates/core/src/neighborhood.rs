//! Exact K-nearest-neighbor and ε-ball patches under the Euclidean metric.
//!
//! Neighbor lists are sorted by `(distance, index)`, so equal distances are
//! broken toward the lower point index. Construction is a brute-force scan
//! parallelized over query points; at the data sizes this crate targets
//! (N ≤ a few thousand) that is both exact and fast enough.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::datasets::DataSet;
use crate::error::{CamlError, Result};
use crate::scalar::Real;

/// How a graph's neighbor lists were built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NeighborRule<T> {
    Knn(usize),
    Ball(T),
}

/// Per-point neighbor lists with matching Euclidean distances.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph<T: Real> {
    pub neighbors: Vec<Vec<usize>>,
    pub distances: Vec<Vec<T>>,
    pub rule: NeighborRule<T>,
    /// True once the union rule has been applied.
    pub symmetric: bool,
}

#[inline]
fn by_distance_then_index<T: Real>(a: &(T, usize), b: &(T, usize)) -> Ordering {
    a.0.partial_cmp(&b.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

impl<T: Real> NeighborGraph<T> {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    /// Total number of directed entries.
    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }

    /// Whether `j` appears in the list of `i`.
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].contains(&j)
    }

    /// Index of the first point with an empty neighbor list, if any.
    pub fn first_empty(&self) -> Option<usize> {
        self.neighbors.iter().position(Vec::is_empty)
    }

    /// All stored edge lengths, in row order.
    pub fn all_distances(&self) -> Vec<T> {
        self.distances.iter().flatten().copied().collect()
    }

    /// Union rule: after this, `j ∈ N(i) ⇔ i ∈ N(j)`. Distances are kept and
    /// each list stays sorted by `(distance, index)`.
    pub fn symmetrize(&self) -> NeighborGraph<T> {
        let n = self.len();
        let mut lists: Vec<Vec<(T, usize)>> = self
            .neighbors
            .iter()
            .zip(&self.distances)
            .map(|(nb, ds)| ds.iter().copied().zip(nb.iter().copied()).collect())
            .collect();
        for i in 0..n {
            for (&j, &d) in self.neighbors[i].iter().zip(&self.distances[i]) {
                if !self.neighbors[j].contains(&i) && !lists[j].iter().any(|&(_, k)| k == i) {
                    lists[j].push((d, i));
                }
            }
        }
        let mut neighbors = Vec::with_capacity(n);
        let mut distances = Vec::with_capacity(n);
        for mut l in lists {
            l.sort_by(by_distance_then_index);
            distances.push(l.iter().map(|p| p.0).collect());
            neighbors.push(l.into_iter().map(|p| p.1).collect());
        }
        NeighborGraph {
            neighbors,
            distances,
            rule: self.rule,
            symmetric: true,
        }
    }

    /// Checks the union property directly.
    pub fn is_symmetric(&self) -> bool {
        (0..self.len()).all(|i| self.neighbors[i].iter().all(|&j| self.neighbors[j].contains(&i)))
    }
}

/// Exact K-NN lists for every point.
pub fn knn_graph<T: Real>(data: &DataSet<T>, k: usize) -> Result<NeighborGraph<T>> {
    let n = data.len();
    if n < 2 {
        return Err(CamlError::invalid(format!("K-NN needs at least 2 points (got {n})")));
    }
    if k == 0 || k > n - 1 {
        return Err(CamlError::invalid(format!("k must be in [1, {}] (got {k})", n - 1)));
    }
    let rows: Vec<(Vec<usize>, Vec<T>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(T, usize)> = (0..n).filter(|&j| j != i).map(|j| (data.dist2(i, j), j)).collect();
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, by_distance_then_index);
                cand.truncate(k);
            }
            cand.sort_by(by_distance_then_index);
            let idx = cand.iter().map(|p| p.1).collect();
            let dist = cand.iter().map(|p| p.0.sqrt()).collect();
            (idx, dist)
        })
        .collect();
    let (neighbors, distances) = rows.into_iter().unzip();
    Ok(NeighborGraph {
        neighbors,
        distances,
        rule: NeighborRule::Knn(k),
        symmetric: false,
    })
}

/// All points within `eps` (inclusive) of each point.
pub fn eps_graph<T: Real>(data: &DataSet<T>, eps: T) -> Result<NeighborGraph<T>> {
    if !(eps > T::zero()) || !eps.is_finite() {
        return Err(CamlError::invalid(format!("eps must be positive and finite (got {eps})")));
    }
    let n = data.len();
    let rows: Vec<(Vec<usize>, Vec<T>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(T, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (data.dist2(i, j), j))
                .filter(|p| p.0.sqrt() <= eps)
                .collect();
            cand.sort_by(by_distance_then_index);
            (cand.iter().map(|p| p.1).collect(), cand.iter().map(|p| p.0.sqrt()).collect())
        })
        .collect();
    let (neighbors, distances) = rows.into_iter().unzip();
    // ε-ball membership is symmetric by construction
    Ok(NeighborGraph {
        neighbors,
        distances,
        rule: NeighborRule::Ball(eps),
        symmetric: true,
    })
}

pub fn symmetrize<T: Real>(graph: &NeighborGraph<T>) -> NeighborGraph<T> {
    graph.symmetrize()
}
