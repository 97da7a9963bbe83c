//! Symmetry-induced cluster patterns in driven duplex networks of
//! Hindmarsh-Rose oscillators.

pub mod compat;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod measure;
pub mod quotient;
pub mod stability;
pub mod symmetry;
pub mod topology;

pub use error::{Error, Result};
