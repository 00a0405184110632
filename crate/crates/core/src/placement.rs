//! Lateral foot placement from next-step momentum prediction.
//!
//! All states are frontal-plane states in the stance-normalized frame of the
//! trajectory's frontal orbit, so the desired pre-impact momentum is the same
//! on every step.

use thiserror::Error;

use crate::gait::{PlaneModel, StepError};
use crate::impact::FootDisplacement;
use crate::model::{AlipState, RobotParams};
use crate::trajectory::NominalTrajectory;

/// Below this secant rise the two candidates are indistinguishable.
pub const DEGENERATE_SLOPE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlacementError {
    #[error("trajectory `{0}` has no frontal orbit")]
    NoFrontalOrbit(String),
    #[error("prediction for candidate y = {candidate} failed: {source}")]
    Prediction { candidate: f64, source: StepError },
    #[error("degenerate slope: candidates differ by {rise:e} in the target quantity")]
    DegenerateSlope { rise: f64 },
    #[error("invalid query: {0}")]
    InvalidQuery(&'static str),
}

/// What the placement regulates at the end of the next step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlacementTarget {
    Momentum(f64),
    Angle(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementQuery {
    pub state: AlipState,
    pub phase_time: f64,
    pub target: PlacementTarget,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementConfig {
    /// Spacing between the two candidate placements.
    pub delta: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl PlacementConfig {
    /// Applies the kinematic range; fallbacks pass through unchanged.
    #[inline]
    pub fn clamp(&self, out: PlacementOutcome) -> PlacementOutcome {
        if out.fallback {
            return out;
        }
        let y_des = out.y_des.clamp(self.y_min, self.y_max);
        PlacementOutcome { y_des, clamped: out.clamped || y_des != out.y_des, fallback: false }
    }
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self { delta: 0.02, y_min: 0.0, y_max: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementOutcome {
    pub y_des: f64,
    pub clamped: bool,
    /// Both predictions could not be used; `y_des` is the nominal offset.
    pub fallback: bool,
}

fn frontal(traj: &NominalTrajectory) -> Result<&PlaneModel, PlacementError> {
    traj.frontal()
        .ok_or_else(|| PlacementError::NoFrontalOrbit(traj.name().to_string()))
}

fn check_time(traj: &NominalTrajectory, t0: f64) -> Result<(), PlacementError> {
    if !(t0 >= 0.0 && t0 <= traj.duration()) {
        return Err(PlacementError::InvalidQuery("phase time outside [0, T]"));
    }
    Ok(())
}

/// Frontal state at the end of the next step, before its impact, when the
/// swing foot lands at lateral offset `y`.
pub fn predict_next_step_end_state(
    x0: AlipState,
    t0: f64,
    y: f64,
    traj: &NominalTrajectory,
    params: &RobotParams,
    dt: f64,
) -> Result<AlipState, PlacementError> {
    let model = frontal(traj)?;
    check_time(traj, t0)?;
    if !x0.is_finite() || !y.is_finite() {
        return Err(PlacementError::InvalidQuery("non-finite state or candidate"));
    }
    let pre = model
        .coast_to_end(x0, t0, dt, params)
        .map_err(|e| PlacementError::Prediction { candidate: y, source: e.into() })?;
    predict_from_pre_impact(model, &pre, y, params, dt)
}

fn predict_from_pre_impact(
    model: &PlaneModel,
    pre: &AlipState,
    y: f64,
    params: &RobotParams,
    dt: f64,
) -> Result<AlipState, PlacementError> {
    let wrap = |source: StepError| PlacementError::Prediction { candidate: y, source };
    let disp = FootDisplacement::new(y, model.displacement.vertical);
    let post = model
        .switch_with(pre, &disp, None, params)
        .map_err(|e| wrap(e.into()))?;
    model.coast_to_end(post, 0.0, dt, params).map_err(|e| wrap(e.into()))
}

/// Angular momentum at the end of the next step, before its impact.
pub fn predict_next_step_end_momentum(
    x0: AlipState,
    t0: f64,
    y: f64,
    traj: &NominalTrajectory,
    params: &RobotParams,
    dt: f64,
) -> Result<f64, PlacementError> {
    predict_next_step_end_state(x0, t0, y, traj, params, dt).map(|x| x.momentum)
}

/// Secant through `(y1, L1)` and `(y2, L2)` solved for `L_des`.
pub fn interpolate_lateral(y1: f64, l1: f64, y2: f64, l2: f64, l_des: f64) -> Result<f64, PlacementError> {
    secant(y1, l1, y2, l2, l_des)
}

/// Same secant with the end-of-step CoM angle as the regulated quantity.
pub fn interpolate_lateral_theta(y1: f64, theta1: f64, y2: f64, theta2: f64, theta_des: f64) -> Result<f64, PlacementError> {
    secant(y1, theta1, y2, theta2, theta_des)
}

fn secant(y1: f64, v1: f64, y2: f64, v2: f64, target: f64) -> Result<f64, PlacementError> {
    let rise = v2 - v1;
    if !(rise.abs() >= DEGENERATE_SLOPE) || y1 == y2 {
        return Err(PlacementError::DegenerateSlope { rise });
    }
    if target == v1 {
        return Ok(y1);
    }
    if target == v2 {
        return Ok(y2);
    }
    let slope = rise / (y2 - y1);
    Ok(y1 + (target - v1) / slope)
}

/// Two-candidate placement: nominal offset and nominal offset plus `delta`,
/// one prediction each, secant to the target, clamp to `[y_min, y_max]`.
pub fn plan_placement(
    q: &PlacementQuery,
    traj: &NominalTrajectory,
    params: &RobotParams,
    dt: f64,
    cfg: &PlacementConfig,
) -> Result<PlacementOutcome, PlacementError> {
    let raw = plan_placement_unclamped(q, traj, params, dt, cfg)?;
    Ok(cfg.clamp(raw))
}

/// [`plan_placement`] before the kinematic clamp. The returned outcome is
/// never flagged `clamped`.
pub fn plan_placement_unclamped(
    q: &PlacementQuery,
    traj: &NominalTrajectory,
    params: &RobotParams,
    dt: f64,
    cfg: &PlacementConfig,
) -> Result<PlacementOutcome, PlacementError> {
    let model = frontal(traj)?;
    check_time(traj, q.phase_time)?;
    if !q.state.is_finite() {
        return Err(PlacementError::InvalidQuery("non-finite state"));
    }
    let y1 = model.displacement.horizontal;
    let y2 = y1 + cfg.delta;
    let fallback = PlacementOutcome { y_des: y1, clamped: false, fallback: true };

    let Ok(pre) = model.coast_to_end(q.state, q.phase_time, dt, params) else {
        return Ok(fallback);
    };
    let (Ok(e1), Ok(e2)) = (
        predict_from_pre_impact(model, &pre, y1, params, dt),
        predict_from_pre_impact(model, &pre, y2, params, dt),
    ) else {
        return Ok(fallback);
    };
    let raw = match q.target {
        PlacementTarget::Momentum(l_des) => interpolate_lateral(y1, e1.momentum, y2, e2.momentum, l_des),
        PlacementTarget::Angle(theta_des) => interpolate_lateral_theta(y1, e1.theta, y2, e2.theta, theta_des),
    };
    match raw {
        Ok(y) if y.is_finite() => Ok(PlacementOutcome { y_des: y, clamped: false, fallback: false }),
        _ => Ok(fallback),
    }
}

/// Desired end-of-step frontal momentum: the orbit's pre-impact value, grown
/// in magnitude by `speed_gain * m * H * (v_cmd - v_nom)` where `H` is the
/// nominal CoM height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredMomentum {
    pub speed_gain: f64,
}

impl Default for DesiredMomentum {
    fn default() -> Self {
        Self { speed_gain: 0.1 }
    }
}

impl DesiredMomentum {
    pub fn nominal(traj: &NominalTrajectory) -> Option<f64> {
        traj.nominal_lateral_state(traj.duration()).map(|x| x.momentum)
    }

    /// Change in desired momentum for a commanded speed.
    pub fn offset(&self, traj: &NominalTrajectory, commanded_speed: f64) -> f64 {
        let Some(l_nom) = Self::nominal(traj) else {
            return 0.0;
        };
        let x0 = traj.nominal_state(0.0);
        let height = traj.sagittal().profile.length_at(0.0) * x0.theta.cos();
        l_nom.signum() * self.speed_gain * traj.mass() * height * (commanded_speed - traj.nominal_speed())
    }

    pub fn target(&self, traj: &NominalTrajectory, commanded_speed: f64) -> Option<f64> {
        Self::nominal(traj).map(|l| l + self.offset(traj, commanded_speed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{default_profile, synthesize_nominal};

    fn setup() -> (NominalTrajectory, RobotParams) {
        let params = RobotParams::with_mass(32.0).unwrap();
        (synthesize_nominal(0.0, 0.5, 0.4, &params, &default_profile()).unwrap(), params)
    }

    #[test]
    fn secant_endpoints_and_midpoint() {
        assert_eq!(interpolate_lateral(0.1, 2.0, 0.2, 4.0, 2.0).unwrap(), 0.1);
        assert_eq!(interpolate_lateral(0.1, 2.0, 0.2, 4.0, 4.0).unwrap(), 0.2);
        assert!((interpolate_lateral(0.1, 2.0, 0.2, 4.0, 3.0).unwrap() - 0.15).abs() < 1e-15);
        assert_eq!(interpolate_lateral_theta(0.1, 0.3, 0.2, 0.5, 0.3).unwrap(), 0.1);
        assert_eq!(interpolate_lateral_theta(0.1, 0.3, 0.2, 0.5, 0.5).unwrap(), 0.2);
        assert!((interpolate_lateral_theta(0.1, 0.3, 0.2, 0.5, 0.4).unwrap() - 0.15).abs() < 1e-15);
    }

    #[test]
    fn flat_secant_is_degenerate() {
        let err = interpolate_lateral(0.1, 2.0, 0.2, 2.0 + 5e-13, 3.0).unwrap_err();
        assert!(matches!(err, PlacementError::DegenerateSlope { .. }));
        assert!(interpolate_lateral(0.1, 2.0, 0.1, 3.0, 3.0).is_err());
    }

    #[test]
    fn nominal_query_returns_nominal_offset() {
        let (traj, params) = setup();
        let l_des = DesiredMomentum::nominal(&traj).unwrap();
        let x0 = traj.nominal_lateral_state(0.0).unwrap();
        let end = predict_next_step_end_momentum(x0, 0.0, 0.2, &traj, &params, 1e-3).unwrap();
        assert!((end - l_des).abs() < 1e-3);
        let q = PlacementQuery { state: x0, phase_time: 0.0, target: PlacementTarget::Momentum(l_des) };
        let out = plan_placement(&q, &traj, &params, 1e-3, &PlacementConfig::default()).unwrap();
        assert!((out.y_des - 0.2).abs() < 1e-3 && !out.clamped && !out.fallback);
    }

    #[test]
    fn unreachable_target_clamps() {
        let (traj, params) = setup();
        let x0 = traj.nominal_lateral_state(0.0).unwrap();
        let q = PlacementQuery { state: x0, phase_time: 0.0, target: PlacementTarget::Momentum(1e4) };
        let cfg = PlacementConfig::default();
        let out = plan_placement(&q, &traj, &params, 1e-3, &cfg).unwrap();
        assert_eq!(out.y_des, cfg.y_max);
        assert!(out.clamped);
    }

    #[test]
    fn prediction_at_step_end_spans_one_step() {
        let (traj, params) = setup();
        let t = traj.duration();
        let pre = traj.nominal_lateral_state(t).unwrap();
        let end = predict_next_step_end_momentum(pre, t, 0.2, &traj, &params, 1e-3).unwrap();
        assert!((end - pre.momentum).abs() < 1e-3);
        assert!(predict_next_step_end_momentum(pre, t + 0.01, 0.2, &traj, &params, 1e-3).is_err());
    }

    #[test]
    fn speed_offset_grows_target_magnitude() {
        let (traj, _) = setup();
        let policy = DesiredMomentum::default();
        let base = policy.target(&traj, 0.5).unwrap();
        let fast = policy.target(&traj, 0.9).unwrap();
        assert_eq!(base, DesiredMomentum::nominal(&traj).unwrap());
        assert!(fast.abs() > base.abs());
    }
}
