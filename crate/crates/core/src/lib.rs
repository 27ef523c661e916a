//! Streaming classification under concept drift.
//!
//! The crate provides a stable/reactive adaptive learner ([`adaptive::DriftSurf`])
//! together with the baselines it is evaluated against, the STRSAGA and SGD
//! update processes they train with, synthetic drifting streams, and a
//! prequential harness that reports time-averaged misclassification.

pub mod adaptive;
pub mod data;
pub mod error;
pub mod harness;
pub mod linear;
pub mod mddm;
pub mod optim;
pub mod probes;
pub mod runspec;
pub mod streams;

pub use error::{Error, Result};
