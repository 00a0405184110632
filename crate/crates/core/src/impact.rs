//! Reduced-order impact map for the variable-height ALIP.
//!
//! At foot swap the angular momentum about the new contact is obtained from
//! the momentum about the old contact plus the moment of the CoM linear
//! momentum along the stance-to-swing vector `P`:
//!
//! ```text
//! L+ = L_B- + m [ P_z (r cos(th) th_dot + r_dot sin(th))
//!               - P_x (-r sin(th) th_dot + r_dot cos(th)) ]
//! th+ = acos((r- cos(th-) - P_z) / r+)
//! ```
//!
//! The same map serves the sagittal (x–z) and frontal (y–z) planes; callers
//! pass the in-plane horizontal component of `P`. `th+` comes from `acos`
//! and is therefore always in `[0, π]`.

use thiserror::Error;

use crate::model::{com_velocity, AlipState, RobotParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImpactError {
    #[error("impact geometry infeasible: acos argument {argument} outside [-1, 1]")]
    Infeasible { argument: f64 },
    #[error("invalid impact parameter: {0}")]
    Parameter(&'static str),
}

/// `acos` arguments this close to ±1 are rounding, not infeasible geometry.
const ROUNDING_SLACK: f64 = 1e-12;

/// Pendulum state immediately before foot swap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreImpactState {
    pub theta: f64,
    pub theta_rate: f64,
    pub length: f64,
    pub length_rate: f64,
    pub momentum: f64,
}

impl PreImpactState {
    /// Builds the pre-impact state from the ALIP state, deriving the angular
    /// rate from `L = m r² θ̇`.
    pub fn from_state(
        x: &AlipState,
        length: f64,
        length_rate: f64,
        params: &RobotParams,
    ) -> Result<Self, ImpactError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(ImpactError::Parameter("pre-impact length must be positive"));
        }
        Ok(Self {
            theta: x.theta,
            theta_rate: x.momentum / (params.mass() * length * length),
            length,
            length_rate,
            momentum: x.momentum,
        })
    }

    /// Builds a pre-impact state from independently supplied rate and
    /// momentum, which must agree with `L = m r² θ̇` to 1e-9.
    pub fn new(
        theta: f64,
        theta_rate: f64,
        length: f64,
        length_rate: f64,
        momentum: f64,
        params: &RobotParams,
    ) -> Result<Self, ImpactError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(ImpactError::Parameter("pre-impact length must be positive"));
        }
        let implied = params.mass() * length * length * theta_rate;
        if !((implied - momentum).abs() <= 1e-9 * momentum.abs().max(1.0)) {
            return Err(ImpactError::Parameter("momentum inconsistent with angular rate"));
        }
        Ok(Self { theta, theta_rate, length, length_rate, momentum })
    }
}

/// In-plane vector from the stance foot to the swing foot at touchdown.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FootDisplacement {
    pub horizontal: f64,
    pub vertical: f64,
}

impl FootDisplacement {
    pub const fn new(horizontal: f64, vertical: f64) -> Self {
        Self { horizontal, vertical }
    }
}

/// Momentum transfer term `m (P_z v_x - P_x v_z)` with the CoM velocity
/// expanded in pendulum coordinates.
pub fn momentum_transfer(pre: &PreImpactState, p: &FootDisplacement, params: &RobotParams) -> f64 {
    let (s, c) = pre.theta.sin_cos();
    let r = pre.length;
    params.mass()
        * (p.vertical * (r * c * pre.theta_rate + pre.length_rate * s)
            - p.horizontal * (-r * s * pre.theta_rate + pre.length_rate * c))
}

/// State about the new contact point right after foot swap.
pub fn post_impact_state(
    pre: &PreImpactState,
    p: &FootDisplacement,
    length_after: f64,
    params: &RobotParams,
) -> Result<AlipState, ImpactError> {
    if !(length_after.is_finite() && length_after > 0.0) {
        return Err(ImpactError::Parameter("post-impact length must be positive"));
    }
    if !(p.horizontal.is_finite() && p.vertical.is_finite()) {
        return Err(ImpactError::Parameter("foot displacement must be finite"));
    }
    let argument = (pre.length * pre.theta.cos() - p.vertical) / length_after;
    if !(argument.abs() <= 1.0 + ROUNDING_SLACK) {
        return Err(ImpactError::Infeasible { argument });
    }
    Ok(AlipState {
        theta: argument.clamp(-1.0, 1.0).acos(),
        momentum: pre.momentum + momentum_transfer(pre, p, params),
    })
}

/// Same transfer written as the planar cross product of `P` with the CoM
/// linear momentum from [`com_velocity`].
pub fn momentum_after_cross_product(
    pre: &PreImpactState,
    p: &FootDisplacement,
    params: &RobotParams,
) -> f64 {
    let (vx, vz) = com_velocity(pre.length, pre.length_rate, pre.theta, pre.theta_rate);
    pre.momentum + params.mass() * (p.vertical * vx - p.horizontal * vz)
}
