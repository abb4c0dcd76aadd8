//! Rebalancing imbalanced tabular datasets.
//!
//! The crate covers the whole pipeline: encoding mixed-type tables
//! ([`tabular`]), deep generative oversamplers ([`models`], [`samplers`]) on
//! top of a small reverse-mode differentiation core ([`diff`]), classic
//! resamplers ([`resample`]), a boosted-tree classifier ([`boost`]), the
//! cross-validated under/oversampling sweep ([`protocol`]) and figure/table
//! output ([`viz`]).
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! name the double-precision instantiations used by the experiment protocol.

pub mod boost;
pub mod diff;
pub mod error;
pub mod matrix;
pub mod models;
pub mod protocol;
pub mod resample;
pub mod rng;
pub mod samplers;
pub mod scalar;
pub mod tabular;
pub mod viz;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use scalar::Real;
pub use tabular::{Dataset, VariableKind, VariableMeta};

pub type Matrix64 = matrix::Matrix<f64>;
pub type Matrix32 = matrix::Matrix<f32>;
pub type Dataset64 = tabular::Dataset<f64>;
pub type Tape64 = diff::Tape<f64>;
pub type ParamSet64 = diff::ParamSet<f64>;
pub type BoostModel64 = boost::BoostModel<f64>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
