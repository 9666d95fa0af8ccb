pub mod error;
pub mod baselines;
pub mod green;
pub mod lindblad;
pub mod motion;
pub mod numerics;
pub mod scenarios;
pub mod spin;
pub use error::{Error, ErrorClass, Result};
