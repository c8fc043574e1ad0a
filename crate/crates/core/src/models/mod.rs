//! MLP generator and discriminator, spectral normalization, and the
//! Polyak-averaged shadow generator.

mod discriminator;
mod generator;
mod mlp;
pub mod spectral;

pub use discriminator::{DiscBinding, DiscForward, DiscriminatorModel};
pub use generator::{GeneratorModel, ShadowGenerator};
pub use mlp::{Activation, MlpSpec, MlpTrace};
pub use spectral::{spectral_normalize, SpectralNormalized};
