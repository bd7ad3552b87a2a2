//! Kriging surrogates of weed-coverage maps and the discrete spatial
//! representations built from them.
//!
//! The pipeline is: [`raster_io`] turns a semantic label map into pooled
//! samples, [`kriging`] fits a variogram and renders the kriging mean to a
//! dense [`ScalarField`], [`representations`] discretise that field five
//! ways, and [`metrics`] scores each discretisation against it.
//! [`features`] and [`correlation`] relate the scores to the spatial layout
//! of the weeds.

pub mod correlation;
pub mod error;
pub mod features;
pub mod field;
pub mod kriging;
pub mod metrics;
pub mod raster_io;
pub mod representations;
pub mod rng;

pub use error::{Error, Result};
pub use field::ScalarField;
