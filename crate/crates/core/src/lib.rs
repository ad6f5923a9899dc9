//! Randomness measures for finite bit strings and the machinery needed to
//! compare quantum and pseudo-random sources with them.
//!
//! The crate is organised bottom-up:
//!
//! - [`bits`]: the [`BitString`] model, file formats and elementary transforms.
//! - [`lz`]: distinct-phrase Lempel-Ziv parsing, `K(N)`, `c_max(N)` and `κ(N)`.
//! - [`borel`]: block censuses and the Borel normality measure `B`.
//! - [`sources`]: OS entropy, the ChaCha20 keystream, bias-matched mimics and
//!   synthetic Bell-test event generators.
//! - [`bell`]: coincidence matching, CHSH `S` and outcome entropies.
//! - [`stats`]: Welch's t-test, Pearson correlation, box statistics and
//!   sample-size estimation, including the special functions behind them.
//! - [`harness`]: measure suites, batch comparison, distinguisher advantage,
//!   the pipeline runner and JSON/CSV reports.

pub mod bell;
pub mod bits;
pub mod borel;
pub mod harness;
pub mod lz;
pub mod sources;
pub mod stats;

pub use bits::{BitString, BitsError, StringMeta};

/// Version string embedded in every report.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
