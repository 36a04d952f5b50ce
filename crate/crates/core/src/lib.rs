//! Hierarchical item-response-theory models of how people assess their own
//! performance and the performance of another agent.
//!
//! The crate is `no_std` (it needs `alloc`) and contains everything that is
//! pure computation:
//!
//! * [`observation`] – logistic link and the ordered-probit score model that
//!   turns a latent propensity into a 0..=V score.
//! * [`priors`] and [`transform`] – prior densities and the constraining
//!   transforms used to sample on an unconstrained space.
//! * [`spec`] and [`density`] – the fixed family of model structures
//!   (underlying performance, self-assessment, three other-assessment
//!   variants; one- or multi-dimensional) and their joint log density with
//!   exact gradients.
//! * [`staging`] – the staged fit plan that feeds posterior means of one tier
//!   into the next, and posterior summaries (correlations, ability offsets).
//! * [`sampler`] and [`diagnostics`] – a No-U-Turn sampler with step-size and
//!   diagonal-metric adaptation, split-R̂ and bulk ESS.
//! * [`eval`] – predictive scoring: uniform baseline, held-out and
//!   next-round log predictive density, WAIC and PSIS-LOO.
//! * [`sim`] – forward simulation of complete synthetic experiments.
//!
//! IO, reporting and the command line live in the `ommirt` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
pub mod density;
pub mod diagnostics;
pub mod error;
pub mod eval;
pub mod math;
pub mod observation;
pub mod priors;
pub mod sampler;
pub mod seed;
pub mod sim;
pub mod spec;
pub mod staging;
pub mod transform;

pub use data::{Condition, Counterpart, Observation, ResponseRow, ResponseTable, ScoreKind};
pub use density::{LogDensity, Model};
pub use error::{Error, Result};
pub use observation::{logistic, CutpointLadder};
pub use sampler::{sample, PosteriorDraws, SamplerConfig};
pub use spec::{Dimensionality, FixedInputs, ModelSpec, OtherVariant, Tier};
