//! Shape complexity estimation for 64×64 binary masks.
//!
//! Three independent estimators are provided:
//!
//! - [`vae`]: the difference between the reconstructions of two variational
//!   autoencoders with 16 and 64 latent neurons, normalized by the white-pixel
//!   count of the input;
//! - [`measures::compression_complexity`]: DEFLATE compressed size relative to
//!   the raw byte length, scaled by the black-pixel fraction;
//! - [`measures::fft_complexity`]: power-weighted mean spatial frequency of the
//!   mask's 2D spectrum.
//!
//! Scores are combined by vector magnitude and evaluated against reference
//! orderings with tie-aware Spearman correlation ([`evaluation`]). The
//! [`reporting`] module renders sorted montages and rank scatter plots.
//!
//! The neural network substrate ([`numerics`]) is a small reverse-mode tape
//! over the layer kinds the autoencoders need.

pub mod error;
pub mod evaluation;
pub mod imaging;
pub mod measures;
pub mod numerics;
pub mod reporting;
pub mod vae;

pub use error::{Error, Result};
pub use imaging::{Mask, RawImage, MASK_SIDE};
pub use measures::ScoreVector;
pub use vae::VaeModel;
