use alip_core::model::{propagate_passive, AlipState, RobotParams};
use alip_core::placement::{
    interpolate_lateral, interpolate_lateral_theta, plan_placement, predict_next_step_end_momentum, DesiredMomentum,
    PlacementConfig, PlacementError, PlacementQuery, PlacementTarget, DEGENERATE_SLOPE,
};
use alip_core::synth::{default_profile, synthesize_nominal};
use alip_core::NominalTrajectory;
use proptest::prelude::*;

fn setup() -> (NominalTrajectory, RobotParams) {
    let params = RobotParams::with_mass(32.0).unwrap();
    (synthesize_nominal(0.0, 0.5, 0.4, &params, &default_profile()).unwrap(), params)
}

/// Two-step prediction spelled out with the plane model's pieces.
fn oracle_end_momentum(traj: &NominalTrajectory, params: &RobotParams, x0: AlipState, t0: f64, y: f64) -> f64 {
    let model = traj.frontal().unwrap();
    let dt = 1e-3;
    let pre = propagate_passive(x0, t0, traj.duration(), dt, params, &model.profile).unwrap();
    let mut disp = model.displacement;
    disp.horizontal = y;
    let post = model.switch_with(&pre, &disp, None, params).unwrap();
    propagate_passive(post, 0.0, traj.duration(), dt, params, &model.profile).unwrap().momentum
}

#[test]
fn secant_identities_are_exact() {
    for f in [interpolate_lateral, interpolate_lateral_theta] {
        assert_eq!(f(0.15, -3.0, 0.17, -2.0, -3.0).unwrap(), 0.15);
        assert_eq!(f(0.15, -3.0, 0.17, -2.0, -2.0).unwrap(), 0.17);
        assert_eq!(f(0.15, -3.0, 0.17, -2.0, -2.5).unwrap(), 0.16);
    }
}

#[test]
fn degenerate_slope_is_reported() {
    let e = interpolate_lateral(0.1, 2.0, 0.12, 2.0 + 0.5 * DEGENERATE_SLOPE, 3.0).unwrap_err();
    assert!(matches!(e, PlacementError::DegenerateSlope { .. }));
    assert!(interpolate_lateral(0.1, 2.0, 0.12, 2.0 + 2.0 * DEGENERATE_SLOPE, 3.0).is_ok());
}

#[test]
fn prediction_matches_step_by_step_oracle() {
    let (traj, params) = setup();
    let x0 = traj.nominal_lateral_state(0.1).unwrap();
    for y in [0.15, 0.2, 0.25] {
        let l = predict_next_step_end_momentum(x0, 0.1, y, &traj, &params, 1e-3).unwrap();
        assert!((l - oracle_end_momentum(&traj, &params, x0, 0.1, y)).abs() < 1e-12);
    }
}

#[test]
fn nominal_state_keeps_nominal_offset() {
    let (traj, params) = setup();
    let l_des = DesiredMomentum::nominal(&traj).unwrap();
    let q = PlacementQuery {
        state: traj.nominal_lateral_state(0.0).unwrap(),
        phase_time: 0.0,
        target: PlacementTarget::Momentum(l_des),
    };
    let out = plan_placement(&q, &traj, &params, 1e-3, &PlacementConfig::default()).unwrap();
    assert!(!out.fallback && !out.clamped);
    assert!((out.y_des - traj.lateral_offset().unwrap()).abs() < 1e-6, "{}", out.y_des);
}

#[test]
fn desired_momentum_grows_with_speed() {
    let (traj, _) = setup();
    let d = DesiredMomentum::default();
    let nominal = DesiredMomentum::nominal(&traj).unwrap();
    assert_eq!(d.target(&traj, traj.nominal_speed()).unwrap(), nominal);
    let faster = d.target(&traj, traj.nominal_speed() + 0.5).unwrap();
    assert!(faster.abs() > nominal.abs());
}

#[test]
fn bad_queries_are_rejected() {
    let (traj, params) = setup();
    let x0 = traj.nominal_lateral_state(0.0).unwrap();
    assert!(predict_next_step_end_momentum(x0, -0.1, 0.2, &traj, &params, 1e-3).is_err());
    assert!(predict_next_step_end_momentum(x0, 0.5, 0.2, &traj, &params, 1e-3).is_err());
    assert!(predict_next_step_end_momentum(x0, 0.0, f64::NAN, &traj, &params, 1e-3).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Wider placement always changes the predicted momentum the same way
    /// near the orbit.
    #[test]
    fn momentum_is_monotone_in_offset(dtheta in -0.05..0.05f64, dl in -1.0..1.0f64, t in 0.0..0.4f64) {
        let (traj, params) = setup();
        let n = traj.nominal_lateral_state(t).unwrap();
        let x = AlipState::new(n.theta + dtheta, n.momentum + dl);
        let l1 = predict_next_step_end_momentum(x, t, 0.2, &traj, &params, 1e-3).unwrap();
        let l2 = predict_next_step_end_momentum(x, t, 0.25, &traj, &params, 1e-3).unwrap();
        let n1 = predict_next_step_end_momentum(n, t, 0.2, &traj, &params, 1e-3).unwrap();
        let n2 = predict_next_step_end_momentum(n, t, 0.25, &traj, &params, 1e-3).unwrap();
        prop_assert_eq!((l2 - l1).signum(), (n2 - n1).signum());
    }

    #[test]
    fn outcome_respects_range(dtheta in -0.2..0.2f64, dl in -3.0..3.0f64, t in 0.0..0.4f64) {
        let (traj, params) = setup();
        let cfg = PlacementConfig::default();
        let n = traj.nominal_lateral_state(t).unwrap();
        let q = PlacementQuery {
            state: AlipState::new(n.theta + dtheta, n.momentum + dl),
            phase_time: t,
            target: PlacementTarget::Momentum(DesiredMomentum::nominal(&traj).unwrap()),
        };
        let out = plan_placement(&q, &traj, &params, 1e-3, &cfg).unwrap();
        prop_assert!(out.y_des >= cfg.y_min && out.y_des <= cfg.y_max);
    }
}
