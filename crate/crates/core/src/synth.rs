//! Torque-free periodic orbit synthesis by single shooting.
//!
//! The sagittal unknowns are the initial state and a linear ramp added to the
//! supplied pendulum-length profile, `r_c(s) = base(s) + ramp * s`. The ramp
//! lets the orbit satisfy the travel constraint (CoM advance per step equals
//! the step length) together with periodicity under the literal impact map.
//! The frontal orbit is solved the same way with the lateral foot offset in
//! place of the step length.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::bezier::BezierCurve;
use crate::gait::{Plane, PlaneModel};
use crate::impact::FootDisplacement;
use crate::model::{integrate_phase, AlipState, PendulumProfile, RobotParams};
use crate::trajectory::{self as tr, NominalTrajectory, TrajError};

/// Default pendulum-length shape: a slight mid-step extension.
pub const DEFAULT_PROFILE: [f64; 6] = [0.90, 0.90, 0.92, 0.92, 0.90, 0.90];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOptions {
    pub dt: f64,
    /// Lateral foot offset of the frontal orbit; `None` skips the frontal
    /// plane.
    pub lateral_offset: Option<f64>,
    pub fit_order: usize,
    pub fit_tolerance: f64,
    pub max_iterations: usize,
    pub residual_tolerance: f64,
    pub periodic_tolerance: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            lateral_offset: Some(0.2),
            fit_order: 7,
            fit_tolerance: 1e-4,
            max_iterations: 100,
            residual_tolerance: 1e-10,
            periodic_tolerance: 1e-6,
        }
    }
}

pub fn default_profile() -> BezierCurve {
    BezierCurve::new(DEFAULT_PROFILE.to_vec()).expect("static profile is valid")
}

/// Default library name for a design incline: `flat` or `incline<deg>`.
pub fn trajectory_name(incline_deg: f64) -> String {
    if incline_deg == 0.0 {
        "flat".to_string()
    } else {
        format!("incline{incline_deg}")
    }
}

pub fn synthesize_nominal(
    incline_deg: f64,
    speed: f64,
    duration: f64,
    params: &RobotParams,
    r_c_profile: &BezierCurve,
) -> Result<NominalTrajectory, TrajError> {
    synthesize_nominal_with(incline_deg, speed, duration, params, r_c_profile, &SynthesisOptions::default())
}

pub fn synthesize_nominal_with(
    incline_deg: f64,
    speed: f64,
    duration: f64,
    params: &RobotParams,
    r_c_profile: &BezierCurve,
    opts: &SynthesisOptions,
) -> Result<NominalTrajectory, TrajError> {
    let name = trajectory_name(incline_deg);
    let invalid = |message: &str| TrajError::Invalid {
        trajectory: name.clone(),
        message: message.to_string(),
    };
    if !(duration.is_finite() && duration > 0.0) {
        return Err(invalid("step duration T must be positive"));
    }
    if !(speed.is_finite() && speed >= 0.0) {
        return Err(invalid("speed must be non-negative"));
    }
    if !(incline_deg.is_finite() && incline_deg.abs() < 60.0) {
        return Err(invalid("incline must be within (-60, 60) degrees"));
    }
    if !(opts.dt > 0.0) {
        return Err(invalid("dt must be positive"));
    }
    let step_x = -speed * duration;
    let step_z = speed * duration * incline_deg.to_radians().tan();
    let r0 = r_c_profile.coefficients()[0];
    let r1 = *r_c_profile.coefficients().last().unwrap();
    let m = params.mass();
    let g = params.gravity();

    let sag_disp = FootDisplacement::new(step_x, step_z);
    let theta0 = (speed * duration / (2.0 * r0)).clamp(-1.0, 1.0).asin();
    let guess = Vector3::new(theta0, -m * r0 * speed, r0 - r1 + step_z);
    let sag = shoot(opts, guess, |z| {
        let model = ramped_model(Plane::Sagittal, r_c_profile, z[2], duration, sag_disp)?;
        let x0 = AlipState::new(z[0], z[1]);
        let pre = model.coast_to_end(x0, 0.0, opts.dt, params)?;
        let post = model.switch(&pre, params)?;
        let travel = model.profile.length_at(duration) * pre.theta.sin() - model.profile.length_at(0.0) * x0.theta.sin();
        Ok(Vector3::new(post.theta - x0.theta, post.momentum - x0.momentum, travel - step_x))
    })?;
    let sag_model = ramped_model(Plane::Sagittal, r_c_profile, sag[2], duration, sag_disp)?;

    let mut curves = BTreeMap::new();
    let mut extra = BTreeMap::new();
    fit_plane(&sag_model, AlipState::new(sag[0], sag[1]), params, opts, tr::KEY_THETA, tr::KEY_MOMENTUM, &mut curves)?;
    curves.insert(tr::KEY_LENGTH.to_string(), sag_model.profile.curve().clone());

    if let Some(w) = opts.lateral_offset {
        let lat_disp = FootDisplacement::new(w, step_z);
        let theta0 = (w / (2.0 * r0)).clamp(-1.0, 1.0).asin();
        let guess = Vector3::new(theta0, -0.6 * m * r0 * r0 * theta0 * (g / r0).sqrt(), step_z);
        let lat = shoot(opts, guess, |z| {
            let model = ramped_model(Plane::Frontal, r_c_profile, z[2], duration, lat_disp)?;
            let x0 = AlipState::new(z[0], z[1]);
            let pre = model.coast_to_end(x0, 0.0, opts.dt, params)?;
            let post = model.switch(&pre, params)?;
            let r_plus = model.touchdown_length(&pre, &lat_disp);
            Ok(Vector3::new(
                post.theta - x0.theta,
                post.momentum - x0.momentum,
                r_plus - model.profile.length_at(0.0),
            ))
        })?;
        let lat_model = ramped_model(Plane::Frontal, r_c_profile, lat[2], duration, lat_disp)?;
        fit_plane(
            &lat_model,
            AlipState::new(lat[0], lat[1]),
            params,
            opts,
            tr::KEY_LAT_THETA,
            tr::KEY_LAT_MOMENTUM,
            &mut curves,
        )?;
        curves.insert(tr::KEY_LAT_LENGTH.to_string(), lat_model.profile.curve().clone());
        extra.insert(tr::PARAM_LATERAL_OFFSET.to_string(), w);
    }

    extra.insert(tr::PARAM_STEP_X.to_string(), step_x);
    extra.insert(tr::PARAM_STEP_Z.to_string(), step_z);
    extra.insert(tr::PARAM_DT.to_string(), opts.dt);
    extra.insert(tr::PARAM_PERIODIC.to_string(), 1.0);
    extra.insert(tr::PARAM_PERIODIC_TOL.to_string(), opts.periodic_tolerance);
    NominalTrajectory::new(name, incline_deg, speed, duration, m, curves, extra)
}

fn ramped_model(
    plane: Plane,
    base: &BezierCurve,
    ramp: f64,
    duration: f64,
    displacement: FootDisplacement,
) -> Result<PlaneModel, TrajError> {
    let profile = PendulumProfile::new(base.add_ramp(ramp), duration)?;
    Ok(PlaneModel::new(plane, profile, displacement))
}

/// Damped Newton iteration with a central-difference Jacobian.
fn shoot<F>(opts: &SynthesisOptions, mut z: Vector3<f64>, residual: F) -> Result<Vector3<f64>, TrajError>
where
    F: Fn(&Vector3<f64>) -> Result<Vector3<f64>, TrajError>,
{
    const H: f64 = 1e-7;
    let mut r = residual(&z)?;
    for _ in 0..opts.max_iterations {
        let norm = r.amax();
        if norm <= opts.residual_tolerance {
            return Ok(z);
        }
        let mut jac = Matrix3::zeros();
        for j in 0..3 {
            let mut e = Vector3::zeros();
            e[j] = H;
            let col = (residual(&(z + e))? - residual(&(z - e))?) / (2.0 * H);
            jac.set_column(j, &col);
        }
        let dz = jac
            .svd(true, true)
            .solve(&(-r), 1e-14)
            .map_err(|_| TrajError::NoOrbit { iterations: 0, residual: norm })?;
        let mut lambda = 1.0;
        let mut accepted = None;
        while lambda > 1e-5 {
            let trial = z + lambda * dz;
            if let Ok(rt) = residual(&trial) {
                if rt.iter().all(|v| v.is_finite()) && rt.amax() < norm {
                    accepted = Some((trial, rt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((trial, rt)) => {
                z = trial;
                r = rt;
            }
            None => break,
        }
    }
    if r.amax() <= opts.residual_tolerance {
        return Ok(z);
    }
    Err(TrajError::NoOrbit {
        iterations: opts.max_iterations,
        residual: r.amax(),
    })
}

fn fit_plane(
    model: &PlaneModel,
    x0: AlipState,
    params: &RobotParams,
    opts: &SynthesisOptions,
    theta_key: &str,
    momentum_key: &str,
    curves: &mut BTreeMap<String, BezierCurve>,
) -> Result<(), TrajError> {
    let duration = model.duration();
    let samples = integrate_phase(x0, 0.0, duration, opts.dt, params, &model.profile, |_| 0.0)?;
    let phases: Vec<f64> = samples.iter().map(|(t, _)| t / duration).collect();
    for (key, values) in [
        (theta_key, samples.iter().map(|(_, x)| x.theta).collect::<Vec<_>>()),
        (momentum_key, samples.iter().map(|(_, x)| x.momentum).collect()),
    ] {
        let (curve, max_error) = fit_bezier_pinned(&phases, &values, opts.fit_order)?;
        if max_error > opts.fit_tolerance {
            return Err(TrajError::Fit {
                key: key.to_string(),
                max_error,
                tolerance: opts.fit_tolerance,
            });
        }
        curves.insert(key.to_string(), curve);
    }
    Ok(())
}

pub(crate) fn bernstein(order: usize, k: usize, s: f64) -> f64 {
    let mut binom = 1.0;
    for i in 0..k {
        binom = binom * (order - i) as f64 / (i + 1) as f64;
    }
    binom * s.powi(k as i32) * (1.0 - s).powi((order - k) as i32)
}

/// Least-squares Bezier fit whose first and last coefficients equal the first
/// and last samples. Returns the curve and the maximum absolute sample error.
pub fn fit_bezier_pinned(phases: &[f64], values: &[f64], order: usize) -> Result<(BezierCurve, f64), TrajError> {
    let n = phases.len();
    if n != values.len() || n < order + 1 || order < 1 {
        return Err(TrajError::Invalid {
            trajectory: String::new(),
            message: format!("cannot fit order {order} to {n} samples"),
        });
    }
    let (first, last) = (values[0], values[n - 1]);
    let mut coeffs = vec![first; order + 1];
    coeffs[order] = last;
    if order >= 2 {
        let interior = order - 1;
        let a = DMatrix::from_fn(n, interior, |i, j| bernstein(order, j + 1, phases[i]));
        let b = DVector::from_fn(n, |i, _| {
            values[i] - first * bernstein(order, 0, phases[i]) - last * bernstein(order, order, phases[i])
        });
        let sol = a.svd(true, true).solve(&b, 1e-14).map_err(|e| TrajError::Invalid {
            trajectory: String::new(),
            message: e.to_string(),
        })?;
        coeffs[1..order].copy_from_slice(sol.as_slice());
    }
    let curve = BezierCurve::new(coeffs)?;
    let max_error = phases
        .iter()
        .zip(values)
        .map(|(s, v)| (curve.eval_unchecked(*s) - v).abs())
        .fold(0.0, f64::max);
    Ok((curve, max_error))
}
