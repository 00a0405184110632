//! Reduced-order variable-height ALIP gait toolkit.
//!
//! Units are SI throughout: radians, kg·m²/s, N·m, seconds and meters. The
//! torque limit is stored as the bare number 23 and applied to the ankle
//! torque `u`.
//!
//! Pipeline:
//! - [`model`] and [`impact`] define the hybrid pendulum.
//! - [`synth`] finds torque-free periodic orbits and stores them as
//!   [`trajectory::NominalTrajectory`] Bezier bundles.
//! - [`placement`] and [`lut`] choose the lateral foot placement.
//! - [`mpc`] computes the sagittal ankle torque.

pub mod bezier;
pub mod gait;
pub mod impact;
pub mod lut;
pub mod model;
pub mod mpc;
pub mod placement;
pub mod synth;
pub mod textfmt;
pub mod trajectory;

pub use bezier::BezierCurve;
pub use gait::{Plane, PlaneModel};
pub use impact::{post_impact_state, FootDisplacement, PreImpactState};
pub use model::{AlipState, PendulumProfile, RobotParams};
pub use trajectory::{NominalTrajectory, TrajectoryLibrary};
