//! Attention models for weakly labelled multi-label spectrogram tagging: a
//! timbral-temporal multi-instance attention family and a recurrent visual
//! attention family trained with a hybrid policy-gradient loss.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod features;
pub mod losses;
pub mod metrics;
pub mod mil;
pub mod model;
pub mod nn;
pub mod ram;
pub mod training;

pub use error::{Error, Result};
