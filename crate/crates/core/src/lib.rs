//! Deep cross attentional product network (DCAP) for user-response
//! prediction: data ingestion, embeddings, multi-head self-attention,
//! layered cross-product features, training and evaluation.

pub mod attention;
pub mod crossnet;
pub mod embedding;
pub mod error;
pub mod featurestore;
pub mod model;
pub mod numerics;
pub mod params;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
