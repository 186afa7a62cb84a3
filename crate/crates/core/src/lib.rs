pub mod datamodel;
pub mod engine;
pub mod error;
pub mod io;
pub mod linalg;
pub mod msd;
pub mod optimizer;
pub mod scenario;
pub mod synth;
pub mod topology;
pub mod trace;
pub mod weights;

pub use error::{Error, Result};
