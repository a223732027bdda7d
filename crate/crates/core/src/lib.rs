//! Lipschitz-constrained classifiers with exact robustness certificates.
//!
//! The crate is `no_std` (it needs `alloc` and nothing else) so the numerical
//! core can be embedded anywhere. File formats, the sweep runner and the
//! command-line tool live in the companion `lipcert` crate.
//!
//! Layout:
//! - [`linalg`]: dense matrices, power iteration, Björck orthogonalization.
//! - [`net`]: orthogonal dense layers, GroupSort2, forward/backward, projection.
//! - [`losses`]: temperature cross-entropies, hinge, Wasserstein and HKR losses.
//! - [`robustness`]: certificates, MCR/MMCR, L2-PGD, robust accuracy, bias balancing.
//! - [`geometry`]: polygonal signed distance functions and the Koch snowflake task.
//! - [`transport`]: exact Wasserstein-1 oracles and the Kantorovich-Rubinstein estimate.
//! - [`data`], [`optim`], [`train`], [`experiments`]: datasets, optimizers, the
//!   projected training loop and the experiment drivers.
#![no_std]
// `!(x > 0.0)` style checks are how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod data;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod linalg;
pub mod losses;
pub mod model;
pub mod net;
pub mod optim;
pub mod robustness;
pub mod train;
pub mod transport;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::Model;
pub use net::LipNet;

/// Deterministic generator used everywhere randomness is needed.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Seeded generator; the only entry point for randomness in the crate.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
