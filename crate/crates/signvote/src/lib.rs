//! Distributed sign-SGD simulation and verification.
//!
//! Workers quantize stochastic gradients to one bit per coordinate; the
//! server aggregates the M received signs per coordinate with majority vote,
//! LLR-weighted majority vote, or federated voting (weights learned online
//! from mismatches against the server's own decisions). Treating each
//! worker's sign computation as a binary symmetric channel makes the
//! aggregation a repetition-code decoding problem, and the analytic error
//! bounds that fall out of that view are evaluated in [`bounds`] and checked
//! numerically in [`montecarlo`].
//!
//! Entry points:
//! * [`simulate::run`] — execute the synchronous round protocol for any
//!   decoder (including the signGD and full-precision SGD baselines);
//! * [`montecarlo`] — the bound-verification suites;
//! * [`config::ExperimentConfig`] — the TOML-backed run configuration.

pub mod bounds;
pub mod channel;
pub mod config;
pub mod decode;
pub mod error;
pub mod estimate;
pub mod montecarlo;
pub mod objective;
pub mod output;
pub mod rng;
pub mod sign;
pub mod simulate;

pub use config::{DecoderKind, ExperimentConfig};
pub use error::{Error, Result};
pub use sign::{sign_of, Sign, SignVector, SignWord};
