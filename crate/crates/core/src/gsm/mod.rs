//! Gaussian sequence model `Y_j = θ_j + Z_j/√n` under a sieve prior.
//!
//! The mean-field variational posterior has a closed form: a thresholding rule
//! that keeps the coordinate posteriors `f̃_j` below a data-driven dimension
//! `k̃`, mixes `f̃_k̃` with `δ₀` at `k̃`, and sets everything above to zero. The
//! empirical-Bayes posterior is the analogous single-shell rule at `k̂`.

mod posterior;
mod prior;
mod signal;

pub use posterior::{
    expected_risk, fit_empirical_bayes, fit_mean_field, log_coordinate_evidence, log_model_weights,
    posterior_kl_gap, vb_objective, CandidateDensity, CoordinateTilt, EmpiricalBayesPosterior,
    MeanFieldSeqPosterior, ObjectiveKind, ProductPosterior, ShellCandidate, TiltRepresentation,
    VariationalCandidate,
};
pub use prior::{CoordinateFamily, SievePrior};
pub use signal::{make_signal, sample_observation, SequenceObservation, SignalKind, SobolevSignal};
