//! Numerical laboratory for stationary dihedral configurations of nearly
//! parallel vortex filaments interacting through the logarithmic potential.
//!
//! The dynamics of the representative vortex are studied in McGehee blow-up
//! coordinates `(r, alpha, psi)`, where the total collapse is an invariant
//! boundary `r = 0` and the turning points form the invariant zero-velocity
//! manifold `Ehat = 0`. The crate provides:
//!
//! * [`model`]: the dihedral potential and the energy-surface geometry,
//! * [`transforms`]: Cartesian <-> McGehee maps and full `2l`-vortex
//!   reconstruction,
//! * [`dynamics`]: every vector field of the problem,
//! * [`integrate`]: adaptive integration, collision detection and
//!   generalized (transmitted) solutions,
//! * [`analysis`]: rest-point curves, spectra, heteroclinics and global
//!   probes,
//! * [`figures`]: the published initial conditions and their diagnostics.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod figures;
pub mod integrate;
pub mod model;
pub mod transforms;

pub use error::{Error, Result};
pub use model::{
    CartesianState, Event, EventKind, McGeheeState, ModelParams, PhaseState, Sample, TimeVariable,
    Trajectory,
};
