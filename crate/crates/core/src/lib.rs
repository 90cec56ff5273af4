//! Tree-structured random vector quantization (TS-RVQ) for limited-feedback
//! wireless channels.
//!
//! A receiver that knows the channel picks a transmit beamforming vector
//! (MIMO) or a signature sequence (CDMA) from a random codebook of `2^B`
//! isotropic unit vectors and feeds back the `B`-bit index. An exhaustive
//! search costs `2^B` quadratic forms; organizing the codebook into a GLA tree
//! or a kd-tree cuts that to a handful of inner products.
//!
//! Modules, bottom up:
//!
//! * [`corelin`]: complex vectors, Hermitian eigendecomposition, quadratic
//!   forms, real embedding and the MAC counter every search reports into.
//! * [`channels`]: MIMO and multipath CDMA channel draws, capacity and SINR.
//! * [`codebook`]: RVQ generation and the exhaustive selection rules.
//! * [`trees`]: GLA and kd-tree organization, exact tree nearest-neighbor
//!   search, and the objective-driven modified kd-tree search.
//! * [`asymptotics`]: large-system closed forms used as analytic baselines.
//! * [`harness`]: seeded Monte-Carlo sweeps, config files and CSV output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod channels;
pub mod codebook;
pub mod corelin;
pub mod error;
pub mod harness;
pub mod rng;
pub mod stats;
pub mod trees;

pub use error::{Error, Result};
