//! Downlink simulator and optimizer for integrated satellite-terrestrial networks.
//!
//! Terrestrial base stations serve ground users on C-band and are backhauled
//! over Ka-band by LEO satellites that share spectrum with a protected GEO
//! system. The crate covers the world model, channels, link budgets, the
//! matching-based allocators, baselines and sweep tooling.

pub mod baselines;
pub mod caching;
pub mod channel;
pub mod ciim;
pub mod error;
pub mod imish;
pub mod link_budget;
pub mod metrics_io;
pub mod rng;
pub mod scenario;
pub mod uara;
pub mod units;

pub use error::{Error, Result};
