pub mod analysis;
pub mod error;
pub mod hv;
pub mod linalg;
pub mod model;
pub mod pulse;
pub mod sim;
pub mod run;
pub mod tomography;
pub mod verify;

pub use error::{Error, Result};
