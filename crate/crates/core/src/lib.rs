pub mod divergence;
pub mod error;
pub mod expfam;
pub mod gsm;
pub mod harness;
pub mod mixture;
pub mod numeric;
pub mod piecewise;
pub mod trunc_gauss;

pub use error::{Error, Result};
