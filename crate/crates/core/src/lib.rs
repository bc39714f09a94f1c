//! Bottleneck transport between Schmidt spectra and the entanglement
//! conversion protocols it certifies.
//!
//! The crate is organized bottom-up:
//!
//! * [`spectra`] validates coefficient vectors and maps them onto the line.
//! * [`transport`] computes plain and smoothed ℓ∞ transport distances.
//! * [`flows`] builds index-one flow graphs between spectra.
//! * [`protocols`] compiles flows into register-level conversion protocols.
//! * [`simulator`] replays protocols on dense bipartite states.
//! * [`universality`] covers grouping, block decomposition and bounds.
//! * [`io`], [`sampling`] and [`verify`] support the command-line tool.

pub mod error;
pub mod flows;
pub mod io;
pub mod protocols;
pub mod sampling;
pub mod simulator;
pub mod spectra;
pub mod transport;
pub mod universality;
pub mod verify;

/// Library version, embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use spectra::SchmidtSpectrum;
