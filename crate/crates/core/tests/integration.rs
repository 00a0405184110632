use alip_core::bezier::BezierCurve;
use alip_core::model::{dynamics, euler_step, integrate_phase, propagate_passive, AlipState, PendulumProfile, RobotParams};

const G: f64 = 9.81;

fn constant(r: f64) -> PendulumProfile {
    PendulumProfile::new(BezierCurve::new(vec![r, r]).unwrap(), 0.4).unwrap()
}

/// Linear pendulum about upright: theta(t) = a cosh(wt) + b sinh(wt).
fn hyperbolic(theta0: f64, l0: f64, m: f64, r: f64, t: f64) -> AlipState {
    let w = (G / r).sqrt();
    let rate0 = l0 / (m * r * r);
    let theta = theta0 * (w * t).cosh() + rate0 / w * (w * t).sinh();
    let rate = theta0 * w * (w * t).sinh() + rate0 * (w * t).cosh();
    AlipState::new(theta, m * r * r * rate)
}

fn euler_error(dt: f64) -> f64 {
    let (m, r) = (32.0, 0.9);
    let params = RobotParams::with_mass(m).unwrap();
    // Small angles keep sin(theta) - theta far below the Euler error.
    let (theta0, l0) = (1e-3, -2e-2);
    let x = propagate_passive(AlipState::new(theta0, l0), 0.0, 0.3, dt, &params, &constant(r)).unwrap();
    let exact = hyperbolic(theta0, l0, m, r, 0.3);
    ((x.theta - exact.theta) / exact.theta).abs()
}

#[test]
fn euler_error_halves_with_dt() {
    let errors: Vec<f64> = [1e-3, 5e-4, 2.5e-4].iter().map(|&dt| euler_error(dt)).collect();
    for w in errors.windows(2) {
        let ratio = w[1] / w[0];
        assert!((0.4..=0.6).contains(&ratio), "ratio {ratio} from {errors:?}");
    }
}

#[test]
fn allocation_free_propagation_matches_sampled_integration() {
    let params = RobotParams::with_mass(32.0).unwrap();
    let profile = PendulumProfile::new(BezierCurve::new(vec![0.9, 0.95, 0.85, 0.9]).unwrap(), 0.4).unwrap();
    let x0 = AlipState::new(0.1, -15.0);
    let samples = integrate_phase(x0, 0.05, 0.4, 1e-3, &params, &profile, |_| 0.0).unwrap();
    let end = propagate_passive(x0, 0.05, 0.4, 1e-3, &params, &profile).unwrap();
    assert_eq!(samples.last().unwrap().0, 0.4);
    assert_eq!(samples.last().unwrap().1, end);
    assert!(samples.windows(2).all(|w| w[1].0 > w[0].0));
}

/// Orbital energy L^2/(2 m r^2) + m g r cos(theta) is conserved at constant
/// length; Euler drift shrinks linearly with dt.
#[test]
fn energy_drift_is_first_order() {
    let (m, r) = (32.0, 0.9);
    let params = RobotParams::with_mass(m).unwrap();
    let energy = |x: &AlipState| x.momentum * x.momentum / (2.0 * m * r * r) + m * G * r * x.theta.cos();
    let drift = |dt: f64| {
        let x0 = AlipState::new(0.12, -16.0);
        let x = propagate_passive(x0, 0.0, 0.4, dt, &params, &constant(r)).unwrap();
        (energy(&x) - energy(&x0)).abs()
    };
    let (d1, d2) = (drift(1e-3), drift(5e-4));
    assert!(d1 < 0.05, "drift {d1}");
    assert!((0.4..=0.6).contains(&(d2 / d1)), "{d1} {d2}");
}

#[test]
fn torque_input_adds_to_momentum_rate() {
    let params = RobotParams::with_mass(32.0).unwrap();
    let p = constant(0.9);
    let x = AlipState::new(0.05, -10.0);
    let free = euler_step(|t, x| dynamics(t, x, &params, &p, 0.0), 0.1, &x, 1e-3).unwrap();
    let pushed = euler_step(|t, x| dynamics(t, x, &params, &p, 5.0), 0.1, &x, 1e-3).unwrap();
    assert_eq!(pushed.theta, free.theta);
    assert!((pushed.momentum - free.momentum - 5e-3).abs() < 1e-12);
}
