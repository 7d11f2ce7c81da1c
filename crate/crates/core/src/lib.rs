//! Curvature-aware manifold learning.
//!
//! The pipeline has four stages: K-nearest-neighbor patches
//! ([`neighborhood`]), per-patch frames and quadratic fits that expose the
//! second fundamental form ([`localgeom`]), baseline and curvature-aware
//! weight matrices ([`weights`]), and spectral embeddings ([`embedding`]).
//! [`evaluation`] scores embeddings by neighborhood preservation and runs
//! parameter sweeps and nearest-neighbor classification.
//!
//! Everything is generic over the scalar type through [`Real`]; the `*64`
//! and `*32` aliases below name the concrete instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datasets;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod localgeom;
pub mod neighborhood;
pub mod pipeline;
pub mod scalar;
pub mod weights;

pub use datasets::{generate, load_csv, save_csv, DataSet, GenSpec, ManifoldKind};
pub use embedding::{laplacian_embedding, lle_embedding, pca_embedding, Embedding, EmbeddingMethod};
pub use error::{CamlError, Result};
pub use evaluation::{k_sweep, knn_classify, npr, NprReport, SweepReport};
pub use localgeom::{curvature_field, local_frame, quadratic_fit, CurvatureField, FitOptions, LocalFrame, QuadraticFit};
pub use neighborhood::{eps_graph, knn_graph, symmetrize, NeighborGraph};
pub use pipeline::{Algorithm, PipelineConfig};
pub use nalgebra;
pub use scalar::Real;
pub use weights::{Bandwidth, CurvatureMode, WeightKind, WeightMatrix};

pub type DataSet64 = DataSet<f64>;
pub type DataSet32 = DataSet<f32>;
pub type NeighborGraph64 = NeighborGraph<f64>;
pub type NeighborGraph32 = NeighborGraph<f32>;
pub type LocalFrame64 = LocalFrame<f64>;
pub type QuadraticFit64 = QuadraticFit<f64>;
pub type CurvatureField64 = CurvatureField<f64>;
pub type CurvatureField32 = CurvatureField<f32>;
pub type WeightMatrix64 = WeightMatrix<f64>;
pub type WeightMatrix32 = WeightMatrix<f32>;
pub type Embedding64 = Embedding<f64>;
pub type Embedding32 = Embedding<f32>;
