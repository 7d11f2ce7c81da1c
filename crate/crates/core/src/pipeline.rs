//! End-to-end runs: neighbors → local geometry → weights → embedding.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::datasets::DataSet;
use crate::embedding::{laplacian_embedding, lle_embedding, pca_embedding, Embedding};
use crate::error::{CamlError, Result};
use crate::localgeom::{local_geometry, FitOptions, LocalGeometry};
use crate::neighborhood::knn_graph;
use crate::scalar::{lit, Real};
use crate::weights::{
    ca_lep_weights, ca_lle_weights, lep_weights, lle_weights, Bandwidth, CurvatureMode, PatchFeatures, WeightMatrix,
    LLE_REG,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Pca,
    Lep,
    CaLep,
    Lle,
    CaLle,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Pca,
        Algorithm::Lep,
        Algorithm::CaLep,
        Algorithm::Lle,
        Algorithm::CaLle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Pca => "pca",
            Algorithm::Lep => "lep",
            Algorithm::CaLep => "ca-lep",
            Algorithm::Lle => "lle",
            Algorithm::CaLle => "ca-lle",
        }
    }

    /// Whether the run needs per-point quadratic fits.
    pub fn needs_geometry(self) -> bool {
        matches!(self, Algorithm::CaLep | Algorithm::CaLle)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = CamlError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| CamlError::invalid(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PipelineConfig<T> {
    pub k: usize,
    pub d: usize,
    pub sigma: Bandwidth<T>,
    pub sigma_c: Bandwidth<T>,
    pub mode: CurvatureMode,
    pub fit: FitOptions,
    pub lle_reg: T,
}

impl<T: Real> Default for PipelineConfig<T> {
    fn default() -> Self {
        PipelineConfig {
            k: 10,
            d: 2,
            sigma: Bandwidth::Auto,
            sigma_c: Bandwidth::Auto,
            mode: CurvatureMode::PointHessian,
            fit: FitOptions::default(),
            lle_reg: lit(LLE_REG),
        }
    }
}

impl<T: Real> PipelineConfig<T> {
    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_d(mut self, d: usize) -> Self {
        self.d = d;
        self
    }

    pub fn with_mode(mut self, mode: CurvatureMode) -> Self {
        self.mode = mode;
        self
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub neighbors: Duration,
    pub geometry: Duration,
    pub weights: Duration,
    pub embedding: Duration,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput<T: Real> {
    pub algorithm: Algorithm,
    pub embedding: Embedding<T>,
    /// `None` for PCA.
    pub weights: Option<WeightMatrix<T>>,
    /// Number of points whose quadratic fit fell back to ridge regression.
    pub ridge_fits: usize,
    pub timings: Timings,
}

/// Weights for `alg` using an already computed directed K-NN graph.
pub fn build_weights<T: Real>(
    data: &DataSet<T>,
    alg: Algorithm,
    cfg: &PipelineConfig<T>,
    geometry: Option<&[LocalGeometry<T>]>,
) -> Result<WeightMatrix<T>> {
    let graph = knn_graph(data, cfg.k)?;
    let owned;
    let geometry = match (alg.needs_geometry(), geometry) {
        (true, Some(g)) => g,
        (true, None) => {
            owned = local_geometry(data, &graph, cfg.d, cfg.fit)?;
            &owned[..]
        }
        (false, _) => &[],
    };
    match alg {
        Algorithm::Pca => Err(CamlError::invalid("PCA has no weight matrix")),
        Algorithm::Lep => lep_weights(data, &graph.symmetrize(), cfg.sigma),
        Algorithm::CaLep => ca_lep_weights(data, &graph.symmetrize(), geometry, cfg.sigma, cfg.sigma_c, cfg.mode),
        Algorithm::Lle => lle_weights(data, &graph, cfg.lle_reg),
        Algorithm::CaLle => ca_lle_weights(&PatchFeatures::from_geometry(geometry), cfg.lle_reg),
    }
}

/// Runs one algorithm on `data`. Curvature fits use the directed K-NN
/// patches; heat-kernel weights use their symmetrization.
pub fn run<T: Real>(data: &DataSet<T>, alg: Algorithm, cfg: &PipelineConfig<T>) -> Result<PipelineOutput<T>> {
    let mut timings = Timings::default();
    if alg == Algorithm::Pca {
        let t = Instant::now();
        let embedding = pca_embedding(data, cfg.d)?;
        timings.embedding = t.elapsed();
        return Ok(PipelineOutput {
            algorithm: alg,
            embedding,
            weights: None,
            ridge_fits: 0,
            timings,
        });
    }

    let t = Instant::now();
    let graph = knn_graph(data, cfg.k)?;
    timings.neighbors = t.elapsed();

    let t = Instant::now();
    let geometry = if alg.needs_geometry() {
        local_geometry(data, &graph, cfg.d, cfg.fit)?
    } else {
        Vec::new()
    };
    let ridge_fits = geometry.iter().filter(|g| g.fit.ridge).count();
    if ridge_fits > 0 {
        log::warn!("{ridge_fits} of {} quadratic fits used the ridge fallback", data.len());
    }
    timings.geometry = t.elapsed();

    let t = Instant::now();
    let weights = match alg {
        Algorithm::Lep => lep_weights(data, &graph.symmetrize(), cfg.sigma)?,
        Algorithm::CaLep => ca_lep_weights(data, &graph.symmetrize(), &geometry, cfg.sigma, cfg.sigma_c, cfg.mode)?,
        Algorithm::Lle => lle_weights(data, &graph, cfg.lle_reg)?,
        Algorithm::CaLle => ca_lle_weights(&PatchFeatures::from_geometry(&geometry), cfg.lle_reg)?,
        Algorithm::Pca => unreachable!(),
    };
    timings.weights = t.elapsed();

    let t = Instant::now();
    let embedding = if weights.kind.is_laplacian() {
        laplacian_embedding(&weights, cfg.d)?
    } else {
        lle_embedding(&weights, cfg.d)?
    };
    timings.embedding = t.elapsed();

    Ok(PipelineOutput {
        algorithm: alg,
        embedding,
        weights: Some(weights),
        ridge_fits,
        timings,
    })
}
