pub mod checkpoint;
pub mod classify;
pub mod connectome;
pub mod error;
pub mod eval;
pub mod losses;
pub mod model;
pub mod nn;
pub mod render;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
