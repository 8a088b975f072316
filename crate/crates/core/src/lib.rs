//! SGD on depth-2 networks from a zero-output initialization, the neural
//! tangent kernel and its random-feature approximations, and an explicit
//! memorization construction.

pub mod activation;
pub mod data;
pub mod error;
pub mod experiments;
pub mod hermite;
pub mod linalg;
pub mod losses;
pub mod model;
pub mod rfs;
pub mod rng;

pub use activation::Activation;
pub use error::{Error, Result};
pub use losses::Loss;
