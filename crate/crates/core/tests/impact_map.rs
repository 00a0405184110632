use alip_core::impact::{post_impact_state, FootDisplacement, ImpactError, PreImpactState};
use alip_core::model::{AlipState, RobotParams};
use nalgebra::Vector3;
use proptest::prelude::*;

/// `L_B + P x m v_c` with the CoM velocity differentiated by hand and the
/// planar cross product taken as the out-of-plane component of a 3-D one.
fn cross_product_oracle(theta: f64, theta_rate: f64, r: f64, r_rate: f64, l_b: f64, p: (f64, f64), m: f64) -> f64 {
    let v = Vector3::new(
        r_rate * theta.sin() + r * theta.cos() * theta_rate,
        0.0,
        r_rate * theta.cos() - r * theta.sin() * theta_rate,
    );
    let p = Vector3::new(p.0, 0.0, p.1);
    l_b + m * p.cross(&v).y
}

fn pre_impact() -> impl Strategy<Value = (f64, f64, f64, f64, f64, f64, f64)> {
    (-0.6..0.6f64, -3.0..3.0f64, 0.5..1.1f64, -0.5..0.5f64, 10.0..40.0f64, -0.5..0.5f64, -0.15..0.15f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn expanded_transfer_matches_cross_product((theta, rate, r, r_dot, m, px, pz) in pre_impact()) {
        let params = RobotParams::with_mass(m).unwrap();
        let momentum = m * r * r * rate;
        let pre = PreImpactState::new(theta, rate, r, r_dot, momentum, &params).unwrap();
        let p = FootDisplacement::new(px, pz);
        let r_plus = r;
        match post_impact_state(&pre, &p, r_plus, &params) {
            Ok(post) => {
                let oracle = cross_product_oracle(theta, rate, r, r_dot, momentum, (px, pz), m);
                prop_assert!((post.momentum - oracle).abs() <= 1e-12 * oracle.abs().max(1.0),
                    "expanded {} vs oracle {}", post.momentum, oracle);
                // New CoM height above the new contact.
                prop_assert!((r_plus * post.theta.cos() - (r * theta.cos() - pz)).abs() <= 1e-12);
                prop_assert!((0.0..=std::f64::consts::PI).contains(&post.theta));
            }
            Err(ImpactError::Infeasible { argument }) => prop_assert!(argument.abs() > 1.0),
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }

    #[test]
    fn derived_rate_is_consistent(theta in -0.6..0.6f64, l in -30.0..30.0f64, r in 0.5..1.1f64) {
        let params = RobotParams::with_mass(32.0).unwrap();
        let pre = PreImpactState::from_state(&AlipState::new(theta, l), r, 0.0, &params).unwrap();
        prop_assert!((params.mass() * r * r * pre.theta_rate - l).abs() <= 1e-9);
    }
}

#[test]
fn inconsistent_momentum_is_rejected() {
    let params = RobotParams::with_mass(32.0).unwrap();
    assert!(PreImpactState::new(0.1, 1.0, 0.9, 0.0, 32.0 * 0.81 + 1e-3, &params).is_err());
    assert!(PreImpactState::new(0.1, 1.0, 0.0, 0.0, 0.0, &params).is_err());
}

#[test]
fn unreachable_touchdown_is_infeasible() {
    let params = RobotParams::with_mass(32.0).unwrap();
    let pre = PreImpactState::from_state(&AlipState::new(0.0, -10.0), 0.9, 0.0, &params).unwrap();
    // New contact far below: the CoM would sit higher than the new leg is long.
    let err = post_impact_state(&pre, &FootDisplacement::new(0.0, -0.5), 0.9, &params).unwrap_err();
    assert!(matches!(err, ImpactError::Infeasible { .. }));
    assert!(post_impact_state(&pre, &FootDisplacement::new(0.1, 0.0), 0.0, &params).is_err());
}
