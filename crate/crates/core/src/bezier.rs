//! Scalar Bezier curves over the normalized phase `s ∈ [0, 1]`.
//!
//! Every nominal trajectory is stored as a bundle of these curves. Evaluation
//! uses de Casteljau's recursion; for the orders used here (≤ 12) it is both
//! cheap and well conditioned.

use thiserror::Error;

/// Curves up to this many coefficients are evaluated on the stack.
const STACK_COEFFS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BezierError {
    #[error("a Bezier curve needs at least 2 coefficients, got {0}")]
    TooFewCoefficients(usize),
    #[error("coefficient {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("phase {0} is outside [0, 1]")]
    Domain(f64),
    #[error("cannot pull {k} interior points of an order-{order} curve")]
    InteriorCount { k: usize, order: usize },
    #[error("pull fraction {0} is outside [0, 1]")]
    PullFraction(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BezierCurve {
    coeffs: Vec<f64>,
}

impl BezierCurve {
    pub fn new(coeffs: Vec<f64>) -> Result<Self, BezierError> {
        if coeffs.len() < 2 {
            return Err(BezierError::TooFewCoefficients(coeffs.len()));
        }
        if let Some((index, &value)) = coeffs.iter().enumerate().find(|(_, c)| !c.is_finite()) {
            return Err(BezierError::NonFinite { index, value });
        }
        Ok(Self { coeffs })
    }

    /// Order-0 curve. Only produced by differentiation.
    fn constant(value: f64) -> Self {
        Self { coeffs: vec![value] }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, s: f64) -> Result<f64, BezierError> {
        if !(0.0..=1.0).contains(&s) {
            return Err(BezierError::Domain(s));
        }
        Ok(self.eval_unchecked(s))
    }

    /// de Casteljau evaluation without the domain check. Callers guarantee
    /// `s ∈ [0, 1]`; outside it the polynomial is extrapolated.
    pub fn eval_unchecked(&self, s: f64) -> f64 {
        let n = self.coeffs.len();
        if n <= STACK_COEFFS {
            let mut work = [0.0; STACK_COEFFS];
            work[..n].copy_from_slice(&self.coeffs);
            de_casteljau(&mut work[..n], s)
        } else {
            let mut work = self.coeffs.clone();
            de_casteljau(&mut work, s)
        }
    }

    pub fn derivative(&self) -> BezierCurve {
        let order = self.order();
        if order == 0 {
            return Self::constant(0.0);
        }
        let m = order as f64;
        let coeffs = self.coeffs.windows(2).map(|w| m * (w[1] - w[0])).collect();
        Self { coeffs }
    }

    /// Pulls interior control points `1..=k` toward the first one by the
    /// fraction `lambda`, which makes the curve linger near its start value.
    pub fn retime_hold_start(&self, k: usize, lambda: f64) -> Result<BezierCurve, BezierError> {
        let order = self.order();
        if order == 0 || k > order - 1 {
            return Err(BezierError::InteriorCount { k, order });
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(BezierError::PullFraction(lambda));
        }
        let first = self.coeffs[0];
        let mut coeffs = self.coeffs.clone();
        for c in &mut coeffs[1..=k] {
            *c += lambda * (first - *c);
        }
        Ok(Self { coeffs })
    }

    /// Adds `amount * s` to the curve. A linear ramp has Bernstein
    /// coefficients `j / M`, so the order is preserved.
    pub fn add_ramp(&self, amount: f64) -> BezierCurve {
        let m = self.order().max(1) as f64;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c + amount * j as f64 / m)
            .collect();
        Self { coeffs }
    }

    pub fn min_coefficient(&self) -> f64 {
        self.coeffs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_coefficient(&self) -> f64 {
        self.coeffs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn de_casteljau(work: &mut [f64], s: f64) -> f64 {
    let n = work.len();
    let t = 1.0 - s;
    for level in 1..n {
        for i in 0..n - level {
            work[i] = t * work[i] + s * work[i + 1];
        }
    }
    work[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(c: &[f64]) -> BezierCurve {
        BezierCurve::new(c.to_vec()).unwrap()
    }

    #[test]
    fn linear_midpoint() {
        assert_eq!(curve(&[0.0, 1.0]).eval(0.5).unwrap(), 0.5);
    }

    #[test]
    fn quadratic_bump_midpoint() {
        assert_eq!(curve(&[0.0, 1.0, 0.0]).eval(0.5).unwrap(), 0.5);
    }

    #[test]
    fn endpoints_are_first_and_last_coefficients() {
        let c = curve(&[0.3, -2.0, 7.5, 1.25]);
        assert_eq!(c.eval(0.0).unwrap(), 0.3);
        assert_eq!(c.eval(1.0).unwrap(), 1.25);
    }

    #[test]
    fn rejects_out_of_domain_phase() {
        let c = curve(&[0.0, 1.0]);
        assert_eq!(c.eval(1.0000001), Err(BezierError::Domain(1.0000001)));
        assert!(c.eval(-0.1).is_err());
    }

    #[test]
    fn rejects_short_and_non_finite() {
        assert_eq!(BezierCurve::new(vec![1.0]), Err(BezierError::TooFewCoefficients(1)));
        assert!(matches!(
            BezierCurve::new(vec![1.0, f64::NAN]),
            Err(BezierError::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn derivative_of_line_is_constant_slope() {
        let d = curve(&[0.0, 1.0]).derivative();
        assert_eq!(d.coefficients(), &[1.0]);
        assert_eq!(d.eval(0.7).unwrap(), 1.0);
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let d = curve(&[2.5, 2.5, 2.5, 2.5]).derivative();
        assert!(d.coefficients().iter().all(|&c| c == 0.0));
        assert_eq!(d.derivative().derivative().derivative().coefficients(), &[0.0]);
    }

    #[test]
    fn derivative_of_bump_matches_central_difference() {
        let c = curve(&[0.0, 1.0, 0.0]);
        let h = 1e-6;
        let fd = (c.eval(0.5 + h).unwrap() - c.eval(0.5 - h).unwrap()) / (2.0 * h);
        let d = c.derivative().eval(0.5).unwrap();
        assert_eq!(d, 0.0);
        assert!((d - fd).abs() <= 1e-8);
    }

    #[test]
    fn retime_zero_pull_is_identity() {
        let c = curve(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(c.retime_hold_start(3, 0.0).unwrap(), c);
    }

    #[test]
    fn retime_half_pull_of_two_points() {
        let c = curve(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let r = c.retime_hold_start(2, 0.5).unwrap();
        assert_eq!(r.coefficients(), &[0.0, 0.5, 1.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn retime_full_collapse_holds_start() {
        let c = curve(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let r = c.retime_hold_start(4, 1.0).unwrap();
        assert_eq!(r.coefficients(), &[0.0, 0.0, 0.0, 0.0, 0.0, 5.0]);
        let before = c.eval(0.25).unwrap();
        let after = r.eval(0.25).unwrap();
        assert!((after - 0.0).abs() < (before - 0.0).abs());
    }

    #[test]
    fn retime_rejects_bad_parameters() {
        let c = curve(&[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(
            c.retime_hold_start(3, 0.5),
            Err(BezierError::InteriorCount { k: 3, order: 3 })
        );
        assert_eq!(c.retime_hold_start(1, 1.5), Err(BezierError::PullFraction(1.5)));
    }

    #[test]
    fn ramp_adds_linear_term() {
        let c = curve(&[0.9, 0.95, 0.9, 0.92]);
        let r = c.add_ramp(0.03);
        for s in [0.0, 0.2, 0.5, 0.9, 1.0] {
            let expected = c.eval(s).unwrap() + 0.03 * s;
            assert!((r.eval(s).unwrap() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn long_curves_use_heap_path() {
        let coeffs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        // Bernstein coefficients j gives M * s.
        let c = curve(&coeffs);
        assert!((c.eval(0.3).unwrap() - 19.0 * 0.3).abs() < 1e-12);
    }
}
