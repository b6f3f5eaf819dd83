//! Certification of genuine three-outcome qubit measurements in a
//! prepare-and-measure setting with a promised overlap between the two
//! preparations.

pub mod analysis;
pub mod boundary;
pub mod error;
pub mod qmat;
pub mod sdp;
pub mod usd;

pub use error::{Error, Result};
