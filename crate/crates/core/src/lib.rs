//! Simulate Hawkes-driven order flow, push it through a price-time-priority
//! matching engine, and calibrate and test Hawkes models on what comes out.
//!
//! The pipeline is:
//!
//! 1. [`hawkes`]: simulate a multivariate Hawkes process by thinning.
//! 2. [`injection`]: turn each event into an engine message under the
//!    reference model, Model 1 or Model 2.
//! 3. [`lob`]: match the messages and publish trades, quotes and order events.
//! 4. [`classification`]: recover event types from the published data.
//! 5. [`calibration`]: fit the Hawkes model by maximum likelihood.
//! 6. [`diagnostics`]: residual tests, likelihood-ratio test and parameter uncertainty.

pub mod calibration;
pub mod classification;
mod csvio;
pub mod diagnostics;
pub mod error;
pub mod hawkes;
pub mod injection;
pub mod lob;
pub mod pipeline;
pub mod rng;

pub use error::{Error, Result};
