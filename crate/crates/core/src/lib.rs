//! Energy-based GAN training and Adversarial Fisher Vector extraction.

pub mod afv;
pub mod autodiff;
pub mod data;
pub mod error;
pub mod eval;
pub mod io;
pub mod models;
pub mod oracle;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
