//! Step-level view of one plane: continuous phase plus foot swap.
//!
//! Sagittal plane: the pendulum frame's horizontal axis points against the
//! direction of travel. A forward step therefore starts with the CoM behind
//! the contact at a positive angle, ends at a negative angle, carries
//! negative momentum, and the swing foot lands at a negative horizontal
//! offset. This keeps the `acos` of the impact map on the physical branch.
//!
//! Frontal plane: states are expressed in a stance-normalized frame whose
//! horizontal axis points from the stance foot toward the swing-foot side.
//! Every foot swap mirrors the frame, so the post-impact momentum changes sign
//! and a left/right alternating sway becomes a period-one orbit. Touchdown
//! length is the actual distance from the new contact to the CoM.

use crate::impact::{post_impact_state, FootDisplacement, ImpactError, PreImpactState};
use crate::model::{propagate_passive, AlipState, ModelError, PendulumProfile, RobotParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Plane {
    Sagittal,
    Frontal,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum StepError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Impact(#[from] ImpactError),
}

/// One plane of a nominal gait: pendulum profile and nominal foot
/// displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneModel {
    pub plane: Plane,
    pub profile: PendulumProfile,
    pub displacement: FootDisplacement,
}

impl PlaneModel {
    pub fn new(plane: Plane, profile: PendulumProfile, displacement: FootDisplacement) -> Self {
        Self { plane, profile, displacement }
    }

    pub fn duration(&self) -> f64 {
        self.profile.duration()
    }

    /// Torque-free propagation from `t0` to the end of the step.
    pub fn coast_to_end(
        &self,
        x: AlipState,
        t0: f64,
        dt: f64,
        params: &RobotParams,
    ) -> Result<AlipState, ModelError> {
        propagate_passive(x, t0, self.duration(), dt, params, &self.profile)
    }

    pub fn pre_impact(&self, x: &AlipState, params: &RobotParams) -> Result<PreImpactState, ImpactError> {
        let t = self.duration();
        PreImpactState::from_state(x, self.profile.length_at(t), self.profile.rate_at(t), params)
    }

    /// Foot swap at the end of the step with the nominal touchdown.
    pub fn switch(&self, x: &AlipState, params: &RobotParams) -> Result<AlipState, ImpactError> {
        self.switch_with(x, &self.displacement, None, params)
    }

    /// Foot swap with an explicit displacement. `length_after` overrides the
    /// sagittal touchdown length (default: profile start); the frontal plane
    /// always uses the geometric distance.
    pub fn switch_with(
        &self,
        x: &AlipState,
        displacement: &FootDisplacement,
        length_after: Option<f64>,
        params: &RobotParams,
    ) -> Result<AlipState, ImpactError> {
        let pre = self.pre_impact(x, params)?;
        match self.plane {
            Plane::Sagittal => {
                let r_plus = length_after.unwrap_or_else(|| self.profile.length_at(0.0));
                post_impact_state(&pre, displacement, r_plus, params)
            }
            Plane::Frontal => {
                let (px, pz) = (
                    pre.length * pre.theta.sin() - displacement.horizontal,
                    pre.length * pre.theta.cos() - displacement.vertical,
                );
                let r_plus = px.hypot(pz);
                let post = post_impact_state(&pre, displacement, r_plus, params)?;
                // acos drops the side; the CoM is on the new inside when it is
                // short of the new foot.
                let side = if px <= 0.0 { 1.0 } else { -1.0 };
                Ok(AlipState { theta: side * post.theta, momentum: -post.momentum })
            }
        }
    }

    /// Geometric touchdown length for a given pre-impact state.
    pub fn touchdown_length(&self, x: &AlipState, displacement: &FootDisplacement) -> f64 {
        let r = self.profile.length_at(self.duration());
        (r * x.theta.sin() - displacement.horizontal).hypot(r * x.theta.cos() - displacement.vertical)
    }

    /// Full torque-free step from its start, including the foot swap.
    pub fn step_map(&self, x0: AlipState, dt: f64, params: &RobotParams) -> Result<AlipState, StepError> {
        let pre = self.coast_to_end(x0, 0.0, dt, params)?;
        Ok(self.switch(&pre, params)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bezier::BezierCurve;

    fn profile() -> PendulumProfile {
        PendulumProfile::new(BezierCurve::new(vec![0.9, 0.9]).unwrap(), 0.4).unwrap()
    }

    #[test]
    fn frontal_swap_mirrors_momentum_and_restores_side() {
        let params = RobotParams::with_mass(32.0).unwrap();
        let model = PlaneModel::new(Plane::Frontal, profile(), FootDisplacement::new(0.2, 0.0));
        let x = AlipState::new(0.1, 4.0);
        let post = model.switch(&x, &params).unwrap();
        // CoM at 0.0898 m, new foot at 0.2 m: CoM lies inside the new stance.
        let rel = 0.2 - 0.9 * 0.1f64.sin();
        let expected = rel.atan2(0.9 * 0.1f64.cos());
        assert!((post.theta - expected).abs() < 1e-12);
        assert!(post.momentum < 0.0);

        // Landing short of the CoM puts it on the outside: negative angle.
        let short = model
            .switch_with(&x, &FootDisplacement::new(0.05, 0.0), None, &params)
            .unwrap();
        assert!(short.theta < 0.0);
    }

    #[test]
    fn sagittal_swap_is_the_literal_map() {
        let params = RobotParams::with_mass(32.0).unwrap();
        let model = PlaneModel::new(Plane::Sagittal, profile(), FootDisplacement::new(-0.2, 0.0));
        let x = AlipState::new(-0.11, -16.0);
        let pre = model.pre_impact(&x, &params).unwrap();
        let expected = post_impact_state(&pre, &model.displacement, 0.9, &params).unwrap();
        assert_eq!(model.switch(&x, &params).unwrap(), expected);
    }
}
