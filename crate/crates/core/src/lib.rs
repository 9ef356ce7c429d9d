//! Deterministic collage-based synthetic data for unified image generation
//! and editing models.

pub mod assets;
pub mod condmaps;
pub mod config;
pub mod dataset;
pub mod error;
pub mod pipeline;
pub mod prompts;
pub mod raster;
pub mod render;
pub mod scene;
pub mod taskgen;

pub use error::{Error, Result};
