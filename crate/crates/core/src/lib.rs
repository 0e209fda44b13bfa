//! Growth and return exponents of random rooted trees inside `T_d`.
//!
//! The crate covers the lazy random walk on the `d`-regular tree and the
//! subtrees it can return to: percolation clusters, deterministic profiles
//! and decorated lines. Modules, bottom up:
//!
//! * [`tree`]: windows of rooted trees, sphere profiles, growth, spines;
//! * [`generators`]: concrete trees, clusters and profiles;
//! * [`walk`]: the exact distance law of the walk and return series;
//! * [`rate`]: the large-deviation rate function;
//! * [`cogrowth`]: exponent as a function of growth;
//! * [`two_three`]: mass-transport functionals and exponent estimators;
//! * [`verify`]: the acceptance suite.

pub mod cogrowth;
pub mod error;
pub mod generators;
pub mod logspace;
pub mod optimize;
pub mod oracle;
pub mod rate;
pub mod rng;
pub mod stats;
pub mod tree;
pub mod two_three;
pub mod verify;
pub mod walk;

pub use error::{Error, ErrorKind, Result};
