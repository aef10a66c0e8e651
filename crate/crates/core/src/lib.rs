//! Engine for forecasting the remaining hospital length of stay, one day at a
//! time, from daily clinical notes and structured vitals.
//!
//! The pipeline: free-text notes are turned into ternary concept vectors
//! ([`concepts`]), compressed by an autoencoder ([`autoencoder`]), fused with
//! severity-of-illness scores ([`soi`]), and fed into a liquid time-constant
//! network ([`ltc`]) trained end to end by backpropagation through a fused ODE
//! solver ([`forecaster`]). A synthetic cohort generator ([`synthdata`])
//! provides reproducible data with known generative structure.

pub mod autoencoder;
pub mod concepts;
pub mod forecaster;
pub mod linalg;
pub mod ltc;
pub mod opt;
pub mod rng;
pub mod soi;
pub mod synthdata;
