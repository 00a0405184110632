use alip_core::bezier::BezierCurve;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn curve() -> impl Strategy<Value = BezierCurve> {
    prop::collection::vec(-1.0..1.0f64, 2..=13).prop_map(|c| BezierCurve::new(c).unwrap())
}

proptest! {
    #[test]
    fn endpoints_interpolate_exactly(c in curve()) {
        let a = c.coefficients();
        prop_assert_eq!(c.eval(0.0).unwrap(), a[0]);
        prop_assert_eq!(c.eval(1.0).unwrap(), a[a.len() - 1]);
    }

    #[test]
    fn derivative_matches_central_difference(c in curve(), s in 0.01..0.99f64) {
        let h = 1e-6;
        let fd = (c.eval(s + h).unwrap() - c.eval(s - h).unwrap()) / (2.0 * h);
        prop_assert!((c.derivative().eval(s).unwrap() - fd).abs() <= 1e-8);
    }

    #[test]
    fn retiming_keeps_endpoints_and_hull(c in curve(), lambda in 0.0..=1.0f64, k in 0usize..12) {
        let k = k.min(c.order().saturating_sub(1));
        let r = c.retime_hold_start(k, lambda).unwrap();
        prop_assert_eq!(r.coefficients()[0], c.coefficients()[0]);
        prop_assert_eq!(r.coefficients().last(), c.coefficients().last());
        prop_assert!(r.min_coefficient() >= c.min_coefficient() && r.max_coefficient() <= c.max_coefficient());
    }
}

#[test]
fn convex_hull_contains_dense_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let order = rng.random_range(1..=12);
        let coeffs: Vec<f64> = (0..=order).map(|_| rng.random_range(-2.0..2.0)).collect();
        let c = BezierCurve::new(coeffs).unwrap();
        let (lo, hi) = (c.min_coefficient(), c.max_coefficient());
        for i in 0..=1000 {
            let v = c.eval(i as f64 / 1000.0).unwrap();
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "{v} outside [{lo}, {hi}]");
        }
    }
}

#[test]
fn outside_unit_interval_is_an_error() {
    let c = BezierCurve::new(vec![0.0, 1.0]).unwrap();
    assert!(c.eval(-1e-9).is_err());
    assert!(c.eval(1.0 + 1e-9).is_err());
    assert!(c.eval(f64::NAN).is_err());
    assert!(BezierCurve::new(vec![]).is_err());
}
