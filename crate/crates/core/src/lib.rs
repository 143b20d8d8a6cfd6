//! Sublabel-accurate functional lifting with classical and lifted Bregman
//! iterations for TV-regularized problems.

pub mod bregman;
pub mod dataterms;
pub mod error;
pub mod grid;
pub mod lifting;
pub mod oracles;
pub mod selftest;
pub mod solver;

pub use error::{Error, Result};
