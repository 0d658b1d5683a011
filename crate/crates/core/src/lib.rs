pub mod certify;
pub mod error;
pub mod fixtures;
pub mod fock;
pub mod gaussian;
pub mod measures;
pub mod models;
pub mod optim;
pub mod par;
pub mod special;
pub mod thresholds;
pub mod tomography;

pub use error::{Error, Result};
