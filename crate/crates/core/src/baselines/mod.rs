//! Reference compressors: PCA projection, plain truncation and product
//! quantization.

mod pca;
mod pq;
mod vanilla;

pub use pca::{pca_fit, pca_project, PcaModel, PCA_MAX_ITERATIONS};
pub use pq::{pq_fit, PqCodebook, PqCodes, KMEANS_ITERATIONS};
pub use vanilla::{normalize_rows, vanilla_truncate};
