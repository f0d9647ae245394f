//! Detection, statistics and simulation of correlated qubit-error bursts.
//!
//! The input is a repeated π-pulse/measure stream: every cycle all qubits are
//! flipped, left to wait, and read out. An ideal qubit alternates 1,0,1,0; two
//! consecutive 0 outcomes mark an error. Radiation impacts raise the
//! quasiparticle density of the whole chip and make most qubits err at once
//! for a recovery time much longer than a cycle.
//!
//! - [`qob`] reads and writes outcome streams.
//! - [`detect`] turns outcomes into scored, classified [`EventRecord`]s.
//! - [`stats`] aggregates events into rates, averaged traces and recovery times.
//! - [`physics`] holds the thin-film gap model and the lumped quasiparticle dynamics.
//! - [`sim`] generates streams with a ground-truth burst log.

pub mod detect;
pub mod physics;
pub mod qob;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod types;

pub use types::{AcquisitionConfig, BitMatrix, Classification, EventRecord, OutcomeSeries, RateEstimate};

/// Errors raised anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid acquisition config: {0}")]
    InvalidConfig(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate distribution: {0}")]
    Degenerate(String),
    #[error("no peak above baseline")]
    NoPeak,
    #[error("trace never returns to baseline within the window")]
    Unrecovered,
    #[error("no usable events to average")]
    NoUsableEvents,
    #[error("quasiparticle density never falls below threshold within {0} s")]
    NeverRecovers(f64),
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("scenario line {line}: {msg}")]
    Scenario { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
