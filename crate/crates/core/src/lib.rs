//! Restricted Boltzmann machines trained and evaluated under the limits of
//! physical sampling hardware.
//!
//! The crate models the three constraints an annealing-style sampler places on
//! an RBM: parameter noise (weight noise frozen per parameter change, bias
//! noise redrawn per sample), a cap on parameter magnitudes, and restricted
//! connectivity (random sparsity or a chimera graph). Every stochastic
//! component has an exact enumeration counterpart for small models so that
//! estimators can be checked against ground truth.
//!
//! # Layout
//!
//! - [`rbm`]: parameters, energy, conditionals, exact partition function,
//!   NLL and log-likelihood gradient.
//! - [`ising`]: conversion to {-1, +1} spin parameters and spin/bit states.
//! - [`sampler`]: Gibbs chains and the noisy hardware sampler.
//! - [`constraints`]: clipping, connectivity masks and noise levels.
//! - [`topology`]: chimera graphs, bipartition and pixel-to-unit mappings.
//! - [`trainer`]: PCD-k training with a mean-field positive phase.
//! - [`eval`]: AIS and exact NLL, expected NLL under noise, sample grids.
//!
//! The crate is `no_std` (with `alloc`). Enable `std` for `std::error::Error`
//! integration and `parallel` to advance chains and AIS particles on a rayon
//! pool; results are bit-identical either way.

#![no_std]
#![warn(missing_debug_implementations, rust_2018_idioms)]

extern crate alloc;

#[cfg(feature = "std")]
extern crate std;

pub mod constraints;
pub mod error;
pub mod eval;
pub mod ising;
pub mod math;
mod par;
pub mod rbm;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod synthetic;
pub mod topology;
pub mod trainer;

#[doc(inline)]
pub use self::{
    constraints::{ConnectivityMask, ConstraintSpec, MaskProvenance},
    error::{Error, Result},
    eval::{AisConfig, AisEstimate, NllEstimate, NllMethod},
    ising::{IsingParams, SpinState},
    rbm::{BinaryState, RbmParams},
    sampler::{ChainState, NoisySnapshot, SnapshotManager},
    stats::Stats,
    topology::{ChimeraGraph, Coloring, PixelMapping},
    trainer::{NegativePhase, TrainConfig, TrainLog, Trainer},
};
