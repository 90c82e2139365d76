//! Angle-preserving embedding of high-dimensional data onto the unit sphere.
//!
//! Data rows are denoised by PCA, angles at each anchor point are sampled
//! against random context points, and sphere coordinates are fitted with Adam
//! so that geodesic angles match them. Embeddings can be rotated toward the
//! equator and flattened with a Mercator projection.

pub mod angles;
pub mod cli;
pub mod data;
pub mod datagen;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod objective;
mod rng;
pub mod spectral;
pub mod trainer;

pub use data::DataMatrix;
pub use error::{MercatError, Result};
pub use geometry::{Rotation3, SphereEmbedding, SpherePoint};
pub use metrics::{MetricsConfig, MetricsReport};
pub use objective::LossSpace;
pub use trainer::{fit, Preset, TrainConfig, TrainReport};
