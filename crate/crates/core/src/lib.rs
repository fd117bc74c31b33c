//! Creativity as novelty in synthesis, measured in embedding space.
//!
//! A response embedding is projected onto the cone spanned by its premise
//! embeddings. The residual norm is the response's novelty, the normalized
//! entropy of the per-premise projection weights is its transformation, and
//! `novelty^α · transformation^β` is its creativity score. Around that core
//! sit an embedding store with a content-addressed cache, an evaluation
//! harness against integer-labeled datasets, and population analysis
//! (distinctiveness and bimodality).
//!
//! The geometry, entropy and statistics code is generic over [`Scalar`]
//! (`f32`/`f64`); the aliases below pin the `f64` instantiations used by the
//! pipeline.

pub mod cli;
pub mod cone;
pub mod distribution;
pub mod embedding;
pub mod error;
pub mod evaluation;
mod linalg;
pub mod metrics;
pub mod output;
mod scalar;
pub mod scoring;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use cone::{novelty, oracle_project, project_onto_cone};
pub use distribution::{bimodality_coefficient, distinctiveness, two_cluster_split};
pub use embedding::{EmbeddingProvider, EmbeddingSource};
pub use evaluation::{evaluate, label_to_unit, load_dataset};
pub use metrics::{kendall_tau, mean_absolute_error, pearson};
pub use scoring::{combine, score_response, split_subelements, transformation_entropy, MetaParameters};

pub type EmbeddingVector = embedding::EmbeddingVector<f64>;
pub type EmbeddingVectorF32 = embedding::EmbeddingVector<f32>;
pub type PremiseMatrix = cone::PremiseMatrix<f64>;
pub type PremiseMatrixF32 = cone::PremiseMatrix<f32>;
pub type ConeProjection = cone::ConeProjection<f64>;
pub type ConeProjectionF32 = cone::ConeProjection<f32>;
pub type NoveltyScore = cone::NoveltyScore<f64>;
pub type FiveNumber = metrics::FiveNumber<f64>;
pub type BimodalityResult = distribution::BimodalityResult<f64>;
pub type ClusterSplit = distribution::ClusterSplit<f64>;
pub type PopulationDistinctiveness = distribution::PopulationDistinctiveness<f64>;
