pub mod autodiff;
pub mod data;
pub mod error;
pub mod experiment;
pub mod model;
pub mod mtt;
pub mod params;
pub mod synth;
pub mod training;
pub mod treeval;

pub use error::{Error, Result};
