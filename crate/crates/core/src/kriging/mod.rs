//! Variogram modelling and 2D ordinary kriging.

mod fit;
mod model;
mod variogram;

pub use fit::{empirical_variogram, fit_variogram, fit_variogram_with, FitOptions, LagBin, VariogramFit};
pub use model::{KrigingModel, Prediction, QStats};
pub use variogram::{VariogramKind, VariogramModel};
