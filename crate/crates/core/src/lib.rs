pub mod assembly;
pub mod basis;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod kernels;
pub mod linalg;
pub mod quad;
pub mod run;
pub mod spectral;

pub use error::{Error, Result};
