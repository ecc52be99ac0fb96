//! Random number generation from photon arrival times of single-photon
//! emitters: emitter and detector simulation, periodic time-of-arrival
//! extraction, min-entropy theory, g² estimation and fitting, and ENT-style
//! output scoring.

pub mod cli;
pub mod config;
pub mod entropy;
pub mod error;
pub mod estimator;
pub mod extractor;
pub mod io;
pub mod model;
pub mod quality;
pub mod regions;
pub mod reproduce;
pub mod simulator;
pub mod stream;

pub use entropy::{min_entropy, BinningConfig};
pub use error::{Error, Result};
pub use extractor::{extract, ExtractionResult};
pub use model::{EmitterParams, FluxSpec};
pub use regions::Region;
pub use simulator::{simulate_region, DetectorModel};
pub use stream::TimestampStream;
