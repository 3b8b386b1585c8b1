//! Desk-scale workbench for learned external force estimation on a simulated
//! six-joint manipulator.

pub mod baselines;
pub mod cli;
pub mod config;
pub mod datagen;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod manipulator;
pub mod method;
pub mod normalize;
pub mod predictor;
pub mod rng;

pub use error::{Error, Result};
pub use method::{Method, TorquePredictor};
