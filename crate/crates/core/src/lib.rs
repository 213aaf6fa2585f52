pub mod error;
pub mod fibred;
pub mod group;
pub mod scalar;
pub mod space;
pub mod spectra;
pub mod warp;

pub use error::{Error, Result};
