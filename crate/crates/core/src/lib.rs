//! Throughput analysis for mobile networks overlaid with wireless charging
//! stations (WCSs).
//!
//! A node's state is the pair (residual energy, relative distance to the
//! nearest WCS). The crate builds the per-slot distance kernel by quadrature,
//! assembles the level-structured generator over energy levels, solves it for
//! the active probability and throughput, and provides the inter-meeting
//! spectral analysis, the infinite-battery and density-scaling limits, and a
//! slotted Monte Carlo simulator used as an independent oracle.
//!
//! The crate is `no_std` (with `alloc`). The default `std` feature only adds
//! `std::error::Error` impls.
//!
//! ```
//! use wcs_core::{analysis, NetworkConfig};
//!
//! let cfg = NetworkConfig::default_scenario();
//! let report = analysis::analyze(&cfg).unwrap();
//! assert!(report.p_on > 0.0 && report.p_on < 1.0);
//! assert!(report.residual < 1e-10);
//! ```

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(rust_2018_idioms)]

extern crate alloc;

pub mod analysis;
pub mod asymptotics;
pub mod chain;
mod error;
pub mod intermeeting;
pub mod kernel;
pub mod linalg;
pub mod math;
pub mod model;
pub mod qbd;
pub mod quadrature;
pub mod sim;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{ChargingProfile, NetworkConfig};
