//! File formats, dataset loading, parallel evaluation and run management
//! around [`mmkge_core`].

pub mod checkpoint;
pub mod config;
pub mod dataset;
mod error;
pub mod eval;
pub mod manifest;
pub mod mmkf;
pub mod run;

pub use error::{Error, Result};
pub use mmkge_core as core;
