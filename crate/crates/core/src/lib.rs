//! Route-choice and wayfinding-behavior analysis for multi-level buildings.

pub mod discrete_choice;
pub mod error;
pub mod features;
pub mod modelsearch;
pub mod netgraph;
pub mod optimize;
pub mod registry;
pub mod regression;
pub mod routeset;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
