//! Numerical core for gap universality experiments on Wigner matrices.
//!
//! The crate is organised along the experiment pipeline:
//!
//! * [`ensembles`]: entry laws, p-support checks and matrix samplers;
//! * [`moment_match`]: exact p-moment matching of atomic laws to
//!   Gaussian-divisible laws;
//! * [`dynamics`]: the matrix Ornstein–Uhlenbeck flow and coupled paths;
//! * [`spectra`]: eigenvalues, semicircle quantiles, rigidity and gaps;
//! * [`observables`]: smoothed counting functions and resolvent statistics;
//! * [`gue_kernel`]: the GUE Hermite kernel and smallest-gap constants;
//! * [`stats`]: Kolmogorov distances, DKW bands and rate fits;
//! * [`runner`]: counter-based seeding and replica-parallel execution.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod ensembles;
mod error;
pub mod gue_kernel;
pub mod linalg;
pub mod moment_match;
pub mod numeric;
pub mod observables;
pub mod runner;
pub mod spectra;
pub mod stats;

pub use error::{Error, Result};

pub use dynamics::{CouplingScheme, FlowConfig, FlowScheme, InitialEnsemble, RelaxationReport};
pub use ensembles::{AtomicLaw, EntryLaw, PSupportParams, SelfAdjointMatrix, SymmetryClass, WignerDraw};
pub use moment_match::{MatchResult, MomentVector, ShiftVector};
pub use observables::{ResolventSample, SmoothingParams};
pub use spectra::{GapRecord, Spectrum};
pub use stats::{Ecdf, RateFit};

pub use faer::c64;
