//! Reduced-order variable-height ALIP model.
//!
//! The CoM is a point mass at distance `r_c` from the stance contact. The state
//! is the CoM angle from vertical and the angular momentum about the contact:
//!
//! ```text
//! theta_dot = L / (m r_c^2)
//! L_dot     = m g r_c sin(theta) + u
//! ```
//!
//! `r_c(t)` is an exogenous Bezier profile over the normalized phase `t / T`.
//! Units are radians, kg·m²/s, N·m, seconds and meters throughout.

use thiserror::Error;

use crate::bezier::BezierCurve;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("non-finite input: {0}")]
    InvalidState(&'static str),
    #[error("pendulum length {length} is not positive at phase {phase}")]
    Geometry { phase: f64, length: f64 },
    #[error("integration produced a non-finite state at t = {t}")]
    Propagation { t: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(&'static str),
}

/// CoM angle from vertical (rad) and angular momentum about the stance
/// contact (kg·m²/s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AlipState {
    pub theta: f64,
    pub momentum: f64,
}

impl AlipState {
    pub const fn new(theta: f64, momentum: f64) -> Self {
        Self { theta, momentum }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.momentum.is_finite()
    }

    pub fn max_abs_diff(&self, other: &AlipState) -> f64 {
        (self.theta - other.theta).abs().max((self.momentum - other.momentum).abs())
    }
}

/// Time derivative of an [`AlipState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateRate {
    pub theta: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotParams {
    mass: f64,
    gravity: f64,
}

impl RobotParams {
    pub const STANDARD_GRAVITY: f64 = 9.81;

    pub fn new(mass: f64, gravity: f64) -> Result<Self, ModelError> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(ModelError::Parameter("mass must be positive"));
        }
        if !(gravity.is_finite() && gravity > 0.0) {
            return Err(ModelError::Parameter("gravity must be positive"));
        }
        Ok(Self { mass, gravity })
    }

    pub fn with_mass(mass: f64) -> Result<Self, ModelError> {
        Self::new(mass, Self::STANDARD_GRAVITY)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }
}

/// Pendulum length over one step, with its analytic time derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct PendulumProfile {
    length: BezierCurve,
    rate: BezierCurve,
    duration: f64,
}

impl PendulumProfile {
    /// Positivity of every control point is sufficient for `r_c(s) > 0`
    /// (convex hull property).
    pub fn new(length: BezierCurve, duration: f64) -> Result<Self, ModelError> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(ModelError::Parameter("step duration must be positive"));
        }
        if length.min_coefficient() <= 0.0 {
            return Err(ModelError::Geometry {
                phase: f64::NAN,
                length: length.min_coefficient(),
            });
        }
        let rate = length.derivative();
        Ok(Self { length, rate, duration })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn curve(&self) -> &BezierCurve {
        &self.length
    }

    /// `r_c` at time `t` into the step. `t` is clamped to `[0, T]`.
    pub fn length_at(&self, t: f64) -> f64 {
        self.length.eval_unchecked(self.phase(t))
    }

    /// `dr_c/dt` at time `t`.
    pub fn rate_at(&self, t: f64) -> f64 {
        self.rate.eval_unchecked(self.phase(t)) / self.duration
    }

    fn phase(&self, t: f64) -> f64 {
        (t / self.duration).clamp(0.0, 1.0)
    }
}

/// Right-hand side of the ALIP dynamics at time `t` with ankle torque `u`.
pub fn dynamics(
    t: f64,
    x: &AlipState,
    params: &RobotParams,
    profile: &PendulumProfile,
    u: f64,
) -> Result<StateRate, ModelError> {
    if !t.is_finite() {
        return Err(ModelError::InvalidState("time"));
    }
    if !x.is_finite() {
        return Err(ModelError::InvalidState("state"));
    }
    if !u.is_finite() {
        return Err(ModelError::InvalidState("torque"));
    }
    let r = profile.length_at(t);
    if r <= 0.0 {
        return Err(ModelError::Geometry {
            phase: t / profile.duration(),
            length: r,
        });
    }
    Ok(rate_unchecked(x, params, r, u))
}

#[inline]
pub(crate) fn rate_unchecked(x: &AlipState, params: &RobotParams, r: f64, u: f64) -> StateRate {
    let m = params.mass;
    StateRate {
        theta: x.momentum / (m * r * r),
        momentum: m * params.gravity * r * x.theta.sin() + u,
    }
}

/// CoM position `(x, z)` relative to the contact point.
pub fn com_position(r_c: f64, theta: f64) -> (f64, f64) {
    (r_c * theta.sin(), r_c * theta.cos())
}

/// CoM velocity `(vx, vz)`, the time derivative of [`com_position`].
pub fn com_velocity(r_c: f64, r_dot: f64, theta: f64, theta_dot: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (r_c * c * theta_dot + r_dot * s, -r_c * s * theta_dot + r_dot * c)
}

/// One explicit Euler step `x + dt * f(t, x)`.
pub fn euler_step<F>(f: F, t: f64, x: &AlipState, dt: f64) -> Result<AlipState, ModelError>
where
    F: Fn(f64, &AlipState) -> Result<StateRate, ModelError>,
{
    if !(dt.is_finite() && dt > 0.0) {
        return Err(ModelError::Parameter("dt must be positive"));
    }
    let rate = f(t, x)?;
    if !(rate.theta.is_finite() && rate.momentum.is_finite()) {
        return Err(ModelError::Propagation { t });
    }
    let next = AlipState {
        theta: x.theta + dt * rate.theta,
        momentum: x.momentum + dt * rate.momentum,
    };
    if !next.is_finite() {
        return Err(ModelError::Propagation { t });
    }
    Ok(next)
}

/// Number of Euler substeps covering `span` with nominal step `dt`. The last
/// substep is shortened to land on the end time; spans that are integer
/// multiples of `dt` up to rounding do not get a sliver step.
pub fn substep_count(span: f64, dt: f64) -> usize {
    if span <= 0.0 {
        return 0;
    }
    ((span / dt) - 1e-9).ceil().max(1.0) as usize
}

/// Euler-integrates from `(t0, x0)` to `t_end` and returns every substep
/// sample, starting with `(t0, x0)` and ending exactly at `t_end`.
pub fn integrate_phase<U>(
    x0: AlipState,
    t0: f64,
    t_end: f64,
    dt: f64,
    params: &RobotParams,
    profile: &PendulumProfile,
    torque: U,
) -> Result<Vec<(f64, AlipState)>, ModelError>
where
    U: Fn(f64) -> f64,
{
    if !(dt.is_finite() && dt > 0.0) {
        return Err(ModelError::Parameter("dt must be positive"));
    }
    if !(t_end >= t0) {
        return Err(ModelError::Parameter("t_end must not precede t0"));
    }
    let n = substep_count(t_end - t0, dt);
    let mut samples = Vec::with_capacity(n + 1);
    samples.push((t0, x0));
    let mut x = x0;
    for i in 0..n {
        let t = t0 + i as f64 * dt;
        let h = if i + 1 == n { t_end - t } else { dt };
        x = euler_step(|t, x| dynamics(t, x, params, profile, torque(t)), t, &x, h)?;
        samples.push((if i + 1 == n { t_end } else { t + dt }, x));
    }
    Ok(samples)
}

/// Allocation-free variant of [`integrate_phase`] with zero torque that
/// returns only the final state.
pub fn propagate_passive(
    x0: AlipState,
    t0: f64,
    t_end: f64,
    dt: f64,
    params: &RobotParams,
    profile: &PendulumProfile,
) -> Result<AlipState, ModelError> {
    let n = substep_count(t_end - t0, dt);
    let mut x = x0;
    for i in 0..n {
        let t = t0 + i as f64 * dt;
        let h = if i + 1 == n { t_end - t } else { dt };
        let rate = rate_unchecked(&x, params, profile.length_at(t), 0.0);
        x.theta += h * rate.theta;
        x.momentum += h * rate.momentum;
    }
    if !x.is_finite() {
        return Err(ModelError::Propagation { t: t_end });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_profile(r: f64, duration: f64) -> PendulumProfile {
        PendulumProfile::new(BezierCurve::new(vec![r, r]).unwrap(), duration).unwrap()
    }

    fn unit() -> RobotParams {
        RobotParams::with_mass(1.0).unwrap()
    }

    #[test]
    fn upright_equilibrium_has_zero_rate() {
        let p = constant_profile(0.8, 0.4);
        let rate = dynamics(0.1, &AlipState::new(0.0, 0.0), &RobotParams::with_mass(30.0).unwrap(), &p, 0.0).unwrap();
        assert_eq!(rate, StateRate { theta: 0.0, momentum: 0.0 });
    }

    #[test]
    fn torque_enters_momentum_additively() {
        let p = constant_profile(1.0, 0.4);
        let rate = dynamics(0.0, &AlipState::new(0.0, 0.0), &unit(), &p, 1.0).unwrap();
        assert_eq!(rate, StateRate { theta: 0.0, momentum: 1.0 });
    }

    #[test]
    fn tilted_state_rate() {
        // 0.5 / (1 * 1^2) and 1 * 9.81 * 1 * sin(0.1) by hand: 0.979366...
        let p = constant_profile(1.0, 0.4);
        let rate = dynamics(0.0, &AlipState::new(0.1, 0.5), &unit(), &p, 0.0).unwrap();
        assert!((rate.theta - 0.5).abs() < 1e-15);
        assert!((rate.momentum - 0.979_366_3).abs() < 1e-6);
    }

    #[test]
    fn dynamics_rejects_non_finite_input() {
        let p = constant_profile(1.0, 0.4);
        let err = dynamics(0.0, &AlipState::new(f64::NAN, 0.0), &unit(), &p, 0.0).unwrap_err();
        assert_eq!(err, ModelError::InvalidState("state"));
        assert!(dynamics(0.0, &AlipState::default(), &unit(), &p, f64::INFINITY).is_err());
    }

    #[test]
    fn profile_rejects_non_positive_control_point() {
        let curve = BezierCurve::new(vec![0.9, -0.1, 0.9]).unwrap();
        assert!(matches!(PendulumProfile::new(curve, 0.4), Err(ModelError::Geometry { .. })));
    }

    #[test]
    fn params_validate() {
        assert!(RobotParams::new(0.0, 9.81).is_err());
        assert!(RobotParams::new(1.0, -1.0).is_err());
    }

    #[test]
    fn com_kinematics_examples() {
        let (x, z) = com_position(1.0, 0.0);
        assert_eq!((x, z), (0.0, 1.0));
        let (x, z) = com_position(1.0, std::f64::consts::FRAC_PI_2);
        assert!((x - 1.0).abs() < 1e-15 && z.abs() < 1e-15);
        let (x, z) = com_position(0.9, 0.1);
        assert!((x - 0.08985).abs() < 1e-5 && (z - 0.89551).abs() < 1e-5);

        assert_eq!(com_velocity(0.9, 0.0, 0.3, 0.0), (0.0, 0.0));
        assert_eq!(com_velocity(1.0, 0.0, 0.0, 1.0), (1.0, 0.0));
        let (vx, vz) = com_velocity(1.0, 0.2, 0.1, 1.0);
        assert!((vx - 1.01497).abs() < 1e-5 && (vz - 0.09917).abs() < 1e-5);
    }

    #[test]
    fn euler_zero_and_constant_fields() {
        let x = AlipState::new(0.1, 0.5);
        let zero = |_: f64, _: &AlipState| Ok(StateRate::default());
        assert_eq!(euler_step(zero, 0.0, &x, 0.01).unwrap(), x);
        let ones = |_: f64, _: &AlipState| Ok(StateRate { theta: 1.0, momentum: 0.0 });
        let y = euler_step(ones, 0.0, &AlipState::default(), 0.1).unwrap();
        assert_eq!(y, AlipState::new(0.1, 0.0));
    }

    #[test]
    fn euler_reports_time_of_blow_up() {
        let bad = |_: f64, _: &AlipState| Ok(StateRate { theta: f64::NAN, momentum: 0.0 });
        assert_eq!(
            euler_step(bad, 0.25, &AlipState::default(), 0.1),
            Err(ModelError::Propagation { t: 0.25 })
        );
    }

    #[test]
    fn euler_increment_is_linear_in_dt() {
        let field = |_: f64, x: &AlipState| {
            Ok(StateRate { theta: 0.3 * x.momentum + 0.125, momentum: -1.75 })
        };
        let x = AlipState::new(0.2, 0.5);
        let a = euler_step(field, 0.0, &x, 0.01).unwrap();
        let b = euler_step(field, 0.0, &x, 0.02).unwrap();
        assert_eq!(2.0 * (a.theta - x.theta), b.theta - x.theta);
        assert_eq!(2.0 * (a.momentum - x.momentum), b.momentum - x.momentum);
    }

    #[test]
    fn integrate_empty_span_returns_initial_sample() {
        let p = constant_profile(1.0, 0.4);
        let x0 = AlipState::new(0.05, 0.1);
        let s = integrate_phase(x0, 0.2, 0.2, 1e-3, &unit(), &p, |_| 0.0).unwrap();
        assert_eq!(s, vec![(0.2, x0)]);
    }

    #[test]
    fn integrate_lands_exactly_on_end_time() {
        let p = constant_profile(1.0, 0.4);
        let s = integrate_phase(AlipState::new(0.05, 0.0), 0.0, 0.3005, 1e-3, &unit(), &p, |_| 0.0).unwrap();
        assert_eq!(s.last().unwrap().0, 0.3005);
        assert_eq!(s.len(), 302);
        let s = integrate_phase(AlipState::new(0.05, 0.0), 0.0, 0.4, 1e-3, &unit(), &p, |_| 0.0).unwrap();
        assert_eq!(s.len(), 401);
    }

    #[test]
    fn upright_rest_stays_put() {
        let p = constant_profile(0.9, 0.4);
        let x0 = AlipState::default();
        let s = integrate_phase(x0, 0.0, 0.4, 1e-3, &unit(), &p, |_| 0.0).unwrap();
        assert!(s.iter().all(|(_, x)| *x == x0));
    }

    #[test]
    fn passive_propagation_matches_sampled_integration() {
        let curve = BezierCurve::new(vec![0.9, 0.93, 0.88, 0.91]).unwrap();
        let p = PendulumProfile::new(curve, 0.4).unwrap();
        let params = RobotParams::with_mass(32.0).unwrap();
        let x0 = AlipState::new(0.11, -16.0);
        let s = integrate_phase(x0, 0.05, 0.4, 1e-3, &params, &p, |_| 0.0).unwrap();
        let x = propagate_passive(x0, 0.05, 0.4, 1e-3, &params, &p).unwrap();
        assert_eq!(s.last().unwrap().1, x);
    }

    #[test]
    fn integrate_rejects_reversed_span() {
        let p = constant_profile(1.0, 0.4);
        assert!(integrate_phase(AlipState::default(), 0.3, 0.2, 1e-3, &unit(), &p, |_| 0.0).is_err());
    }
}
