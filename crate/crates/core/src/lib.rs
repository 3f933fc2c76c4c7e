pub mod data;
pub mod encode;
pub mod eval;
pub mod error;
pub mod model;
pub mod numerics;
pub mod synth;
pub mod text;
pub mod train;

pub use error::{Error, Result};
