//! Oracle source separation and image-based separation metrics.

pub mod audio;
pub mod bss;
pub mod campaign;
pub mod dataset;
pub mod error;
pub mod oracle;
pub mod stft;
pub mod wav;

pub use audio::AudioSignal;
pub use error::{Error, Result};
