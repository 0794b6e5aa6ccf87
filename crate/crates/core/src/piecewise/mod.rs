//! Change-point model `X_i = θ_i + σ Z_i` with `θ` piecewise constant.
//!
//! The product (mean-field) posterior ignores the dependence between sites and
//! pays a price linear in `n`; a posterior restricted to first-order Markov
//! chains on a grid keeps that dependence and adapts to the number of pieces.

mod cavi;
mod chain;
mod mean_field;
mod prior;
mod signal;

pub use cavi::{fit_markov_vb, MarkovVbFit};
pub use chain::{default_grid, grid_posterior, snap_to_grid, GridChain, Transition};
pub use mean_field::{fit_mean_field, CoordinatewisePosterior, TruncatedGaussian};
pub use prior::{ChangePointPrior, SiteDensity};
pub use signal::{mle_segmentation, PiecewiseSignal};
