//! Monte Carlo simulation of exchangeable population models.
//!
//! Forward in time, a population of constant size `N` evolves as a
//! Λ-Fleming-Viot process with every individual carrying its own allele
//! ([`forward`]). Backward in time its genealogy is the `(N, Λ)`-coalescent
//! ([`coalescent`]). The look-down construction ([`lookdown`]) couples all
//! population sizes on one event stream, Λ-urns ([`urn`]) describe allele
//! frequencies at extinction times, and [`chains`] samples the `N → ∞`
//! limits of the ancestral and haplotype block processes. [`stats`] holds
//! the tests used to compare all of these.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chains;
pub mod coalescent;
pub mod error;
pub mod forward;
pub mod lambda;
pub mod lookdown;
pub mod numeric;
pub mod partition;
pub mod replicate;
pub mod stats;
pub mod trajectory;
pub mod urn;

pub use error::{Error, Result};
pub use lambda::{CdiVerdict, LambdaMeasure, RatePmf};
pub use partition::{CouponResult, MassPartition};
pub use replicate::{derive_seed, replicate_rng, run_replicates, SimRng};
pub use stats::{TestReport, Verdict};
pub use trajectory::{SnapshotLevels, Trajectory};
