//! Numerical library for Markov chains on dominant weights of the affine
//! algebra A1^(1), character evaluation, tensor decompositions, theta-type
//! space-time harmonic functions, and the conditioned space-time Brownian
//! motion arising as the large-level limit of the chain.

pub mod chain;
pub mod characters;
pub mod diffusion;
pub mod error;
pub mod numerics;
pub mod series;
pub mod tensor;
pub mod theta;
pub mod weights;

pub use error::{Error, Result};
