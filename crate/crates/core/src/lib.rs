//! Clustering of national mortality experience from HMD period life tables.
//!
//! The crate covers life-table arithmetic and ingestion, Lee–Carter fitting,
//! feature extraction (standardisation, PCA, B-splines), hard and fuzzy
//! clustering, internal validity indices, and the four end-to-end pipelines.

pub mod clustering;
pub mod error;
pub mod exec;
pub mod features;
pub mod hmd;
pub mod leecarter;
pub mod lifetable;
pub mod linalg;
pub mod pipelines;
pub mod synthetic;
pub mod validity;

pub use error::{Error, Result};
pub use exec::Execution;
