//! Two-hop algebraic watchdog for wireless network coding.
//!
//! Two sources `v1`, `v2` send `x1`, `x2` to a relay `v3`, which forwards
//! `α1·x1 + α2·x2` over GF(2^n). Each source overhears the other source and
//! the relay through a noisy binary symmetric channel, and uses hash
//! side-information from the reliable packet headers to decide whether the
//! relay tampered with its output.
//!
//! Modules, bottom up:
//!
//! - [`gf2n`]: field arithmetic.
//! - [`hashing`]: polynomial hash family truncated to `h` bits.
//! - [`channel`]: binary symmetric channels and Hamming balls.
//! - [`protocol`]: packets, topology, relay and adversary behaviour.
//! - [`watchdog`]: the algebraic and trellis detection engines.
//! - [`theory`]: closed-form false-detection and misdetection predictors.
//! - [`harness`]: seeded, parallel Monte Carlo runner and reports.
//! - [`selftest`]: built-in consistency suites used by the CLI.

pub mod channel;
pub mod gf2n;
pub mod harness;
pub mod hashing;
pub mod protocol;
pub mod selftest;
pub mod theory;
pub mod watchdog;

/// Bit representation of a field element or payload (`n <= 16` bits used).
pub type Word = u32;

pub use channel::{BinarySymmetricChannel, Radius};
pub use gf2n::{canonical_spec, FieldElement, FieldError, FieldSpec};
pub use harness::{
    run_trials, run_trials_with, sweep, write_report, write_reports, Estimate, HarnessError,
    ReportFormat, RunOptions, SimConfig, SimReport, SourceDistribution,
};
pub use hashing::{HashFunction, HashValue};
pub use protocol::{AdversaryStrategy, Packet, Scenario, Watcher};
pub use theory::{Prediction, TheoryParams};
pub use watchdog::{Engine, Hypothesis, Observation, Verdict};
