//! Structure-preserving numerical schemes for constrained L²-gradient flows
//! of closed planar B-spline curves: Willmore (elastic) flow, area-preserving
//! Willmore flow and Helfrich flow, with optional tangential velocity.
//!
//! Each time step is an implicit discrete-gradient step whose solution
//! dissipates the driving functional at exactly the Gram-determinant rate and
//! conserves the constrained functionals up to round-off.

pub mod discgrad;
pub mod error;
pub mod geom;
pub mod schemes;
pub mod spline;
pub mod stepper;

pub use error::{Error, Result};
pub use schemes::{FlowProblem, Functional, StepRecord, StepUnknowns};
pub use spline::{ControlCurve, ScalarField, SplineSpace};
pub use stepper::{NewtonConfig, RunOptions, RunState, Termination, TimeStepping};

/// Planar vector.
pub type Vec2 = nalgebra::Vector2<f64>;
