//! Slow reference implementations used to check the main modules. They share
//! no numerical code with `lifting`, `solver` or `bregman`.

pub mod biconjugate;
pub mod grid;
pub mod taut_string;
pub mod tv;

pub use biconjugate::brute_biconjugate_1d;
pub use grid::{grid_prox_oracle, EnvelopeOracle, GridOracleConfig};
pub use taut_string::taut_string_tv1d;
pub use tv::tv_support_ascent;
