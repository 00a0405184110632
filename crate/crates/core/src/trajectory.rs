//! Nominal periodic trajectories and the incline-indexed library.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::bezier::{BezierCurve, BezierError};
use crate::gait::{Plane, PlaneModel, StepError};
use crate::impact::FootDisplacement;
use crate::model::{AlipState, ModelError, PendulumProfile, RobotParams};
use crate::textfmt::{self, format_float, ParseError};

pub const KEY_MOMENTUM: &str = "L_nom";
pub const KEY_THETA: &str = "theta_c_nom";
pub const KEY_LENGTH: &str = "r_c";
pub const KEY_LAT_MOMENTUM: &str = "L_lat_nom";
pub const KEY_LAT_THETA: &str = "theta_lat_nom";
pub const KEY_LAT_LENGTH: &str = "r_c_lat";

pub const PARAM_STEP_X: &str = "step_x";
pub const PARAM_STEP_Z: &str = "step_z";
pub const PARAM_LATERAL_OFFSET: &str = "lateral_offset";
pub const PARAM_DT: &str = "dt";
pub const PARAM_PERIODIC: &str = "periodic";
pub const PARAM_PERIODIC_TOL: &str = "periodic_tol";

const MAGIC: &str = "ALIPTRAJ";
const VERSION: u32 = 1;
const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum TrajError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("trajectory `{trajectory}` is missing required curve `{key}`")]
    MissingCurve { trajectory: String, key: String },
    #[error("trajectory `{trajectory}` is missing parameter `{key}`")]
    MissingParam { trajectory: String, key: String },
    #[error("trajectory `{trajectory}`: {message}")]
    Invalid { trajectory: String, message: String },
    #[error("library inclines must be strictly increasing ({previous} then {next})")]
    NonIncreasingIncline { previous: f64, next: f64 },
    #[error("library is empty")]
    EmptyLibrary,
    #[error("{path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Bezier(#[from] BezierError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("shooting did not converge after {iterations} iterations (residual {residual:e})")]
    NoOrbit { iterations: usize, residual: f64 },
    #[error("curve `{key}` fit error {max_error:e} exceeds {tolerance:e}")]
    Fit { key: String, max_error: f64, tolerance: f64 },
}

impl From<crate::impact::ImpactError> for TrajError {
    fn from(e: crate::impact::ImpactError) -> Self {
        TrajError::Step(e.into())
    }
}

/// A periodic single-step gait stored as Bezier curves over phase plus step
/// metadata. Left and right steps are mirror images.
#[derive(Debug, Clone, PartialEq)]
pub struct NominalTrajectory {
    name: String,
    incline_deg: f64,
    nominal_speed: f64,
    duration: f64,
    mass: f64,
    curves: BTreeMap<String, BezierCurve>,
    extra: BTreeMap<String, f64>,
    sagittal: PlaneModel,
    frontal: Option<PlaneModel>,
}

impl NominalTrajectory {
    pub fn new(
        name: impl Into<String>,
        incline_deg: f64,
        nominal_speed: f64,
        duration: f64,
        mass: f64,
        curves: BTreeMap<String, BezierCurve>,
        extra: BTreeMap<String, f64>,
    ) -> Result<Self, TrajError> {
        let name = name.into();
        let invalid = |message: &str| TrajError::Invalid {
            trajectory: name.clone(),
            message: message.to_string(),
        };
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(invalid("name must be a non-empty token"));
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(invalid("step duration T must be positive"));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(invalid("mass must be positive"));
        }
        if !(incline_deg.is_finite() && nominal_speed.is_finite() && nominal_speed >= 0.0) {
            return Err(invalid("incline and speed must be finite, speed non-negative"));
        }
        for key in [KEY_MOMENTUM, KEY_THETA, KEY_LENGTH] {
            if !curves.contains_key(key) {
                return Err(TrajError::MissingCurve { trajectory: name, key: key.to_string() });
            }
        }

        let step_x = extra
            .get(PARAM_STEP_X)
            .copied()
            .unwrap_or(-nominal_speed * duration);
        let step_z = extra
            .get(PARAM_STEP_Z)
            .copied()
            .unwrap_or(step_x.abs() * incline_deg.to_radians().tan());
        let profile = PendulumProfile::new(curves[KEY_LENGTH].clone(), duration)
            .map_err(|e| invalid(&format!("r_c: {e}")))?;
        let sagittal = PlaneModel::new(Plane::Sagittal, profile, FootDisplacement::new(step_x, step_z));

        let lateral_keys = [KEY_LAT_LENGTH, KEY_LAT_THETA, KEY_LAT_MOMENTUM];
        let present = lateral_keys.iter().filter(|k| curves.contains_key(**k)).count();
        let frontal = match present {
            0 => None,
            3 => {
                let offset = *extra.get(PARAM_LATERAL_OFFSET).ok_or_else(|| TrajError::MissingParam {
                    trajectory: name.clone(),
                    key: PARAM_LATERAL_OFFSET.to_string(),
                })?;
                let profile = PendulumProfile::new(curves[KEY_LAT_LENGTH].clone(), duration)
                    .map_err(|e| invalid(&format!("r_c_lat: {e}")))?;
                Some(PlaneModel::new(Plane::Frontal, profile, FootDisplacement::new(offset, step_z)))
            }
            _ => {
                let key = lateral_keys.iter().find(|k| !curves.contains_key(**k)).unwrap();
                return Err(TrajError::MissingCurve { trajectory: name, key: key.to_string() });
            }
        };
        if let Some(dt) = extra.get(PARAM_DT) {
            if !(*dt > 0.0) {
                return Err(invalid("dt must be positive"));
            }
        }

        Ok(Self {
            name,
            incline_deg,
            nominal_speed,
            duration,
            mass,
            curves,
            extra,
            sagittal,
            frontal,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn incline_deg(&self) -> f64 {
        self.incline_deg
    }

    pub fn nominal_speed(&self) -> f64 {
        self.nominal_speed
    }

    /// Single-step duration `T` in seconds.
    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn curve(&self, key: &str) -> Option<&BezierCurve> {
        self.curves.get(key)
    }

    pub fn curves(&self) -> &BTreeMap<String, BezierCurve> {
        &self.curves
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.extra.get(key).copied()
    }

    pub fn extra_params(&self) -> &BTreeMap<String, f64> {
        &self.extra
    }

    pub fn integration_dt(&self) -> f64 {
        self.param(PARAM_DT).unwrap_or(DEFAULT_DT)
    }

    pub fn is_periodic(&self) -> bool {
        self.param(PARAM_PERIODIC).is_some_and(|v| v != 0.0)
    }

    pub fn periodic_tolerance(&self) -> f64 {
        self.param(PARAM_PERIODIC_TOL).unwrap_or(1e-6)
    }

    pub fn sagittal(&self) -> &PlaneModel {
        &self.sagittal
    }

    pub fn frontal(&self) -> Option<&PlaneModel> {
        self.frontal.as_ref()
    }

    pub fn step_displacement(&self) -> FootDisplacement {
        self.sagittal.displacement
    }

    pub fn lateral_offset(&self) -> Option<f64> {
        self.frontal.as_ref().map(|f| f.displacement.horizontal)
    }

    fn phase(&self, t: f64) -> f64 {
        (t / self.duration).clamp(0.0, 1.0)
    }

    /// Nominal sagittal state at time `t` into the step.
    pub fn nominal_state(&self, t: f64) -> AlipState {
        let s = self.phase(t);
        AlipState::new(
            self.curves[KEY_THETA].eval_unchecked(s),
            self.curves[KEY_MOMENTUM].eval_unchecked(s),
        )
    }

    /// Nominal frontal state (stance-normalized frame) at time `t`.
    pub fn nominal_lateral_state(&self, t: f64) -> Option<AlipState> {
        let s = self.phase(t);
        Some(AlipState::new(
            self.curves.get(KEY_LAT_THETA)?.eval_unchecked(s),
            self.curves.get(KEY_LAT_MOMENTUM)?.eval_unchecked(s),
        ))
    }

    /// Returns a copy with `delta` added to every coefficient of `key`.
    pub fn with_curve_offset(&self, key: &str, delta: f64) -> Result<Self, TrajError> {
        let mut curves = self.curves.clone();
        let curve = curves.get_mut(key).ok_or_else(|| TrajError::MissingCurve {
            trajectory: self.name.clone(),
            key: key.to_string(),
        })?;
        *curve = BezierCurve::new(curve.coefficients().iter().map(|c| c + delta).collect())?;
        Self::new(
            self.name.clone(),
            self.incline_deg,
            self.nominal_speed,
            self.duration,
            self.mass,
            curves,
            self.extra.clone(),
        )
    }

    fn write_block(&self, out: &mut String) {
        let _ = writeln!(out, "trajectory {}", self.name);
        for (key, value) in [
            ("incline_deg", self.incline_deg),
            ("nominal_speed", self.nominal_speed),
            ("T", self.duration),
            ("mass", self.mass),
        ]
        .into_iter()
        .chain(self.extra.iter().map(|(k, v)| (k.as_str(), *v)))
        {
            let _ = writeln!(out, "param {key} {}", format_float(value));
        }
        for (key, curve) in &self.curves {
            let _ = write!(out, "curve {key} {}", curve.order());
            for c in curve.coefficients() {
                let _ = write!(out, " {}", format_float(*c));
            }
            out.push('\n');
        }
    }
}

/// Ordered set of trajectories; trajectory `i > 0` takes over at its design
/// incline.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLibrary {
    trajectories: Vec<NominalTrajectory>,
}

impl TrajectoryLibrary {
    pub fn new(trajectories: Vec<NominalTrajectory>) -> Result<Self, TrajError> {
        if trajectories.is_empty() {
            return Err(TrajError::EmptyLibrary);
        }
        for pair in trajectories.windows(2) {
            if !(pair[1].incline_deg > pair[0].incline_deg) {
                return Err(TrajError::NonIncreasingIncline {
                    previous: pair[0].incline_deg,
                    next: pair[1].incline_deg,
                });
            }
        }
        Ok(Self { trajectories })
    }

    pub fn trajectories(&self) -> &[NominalTrajectory] {
        &self.trajectories
    }

    pub fn get(&self, index: usize) -> Option<&NominalTrajectory> {
        self.trajectories.get(index)
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Inclines at which the selection switches to the next trajectory.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.trajectories[1..].iter().map(|t| t.incline_deg).collect()
    }

    /// Index of the trajectory whose incline interval contains
    /// `incline_deg`. Below the first breakpoint the first trajectory is
    /// used, past the last breakpoint the last one.
    pub fn select_index(&self, incline_deg: f64) -> usize {
        self.trajectories[1..]
            .iter()
            .take_while(|t| incline_deg >= t.incline_deg)
            .count()
    }

    pub fn select_by_incline(&self, incline_deg: f64) -> &NominalTrajectory {
        &self.trajectories[self.select_index(incline_deg)]
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} {VERSION}\n");
        out.push_str("# Nominal gait library. Angles in rad, momentum in kg*m^2/s, lengths in m,\n");
        out.push_str("# curves are Bezier coefficients over the normalized phase t/T.\n");
        for t in &self.trajectories {
            t.write_block(&mut out);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TrajError> {
        let lines = textfmt::parse(text, MAGIC, VERSION)?;
        let mut blocks: Vec<Block> = Vec::new();
        for line in &lines {
            match line.keyword {
                "trajectory" => {
                    line.expect_args(1)?;
                    blocks.push(Block::new(line.args[0].to_string()));
                }
                "param" => {
                    line.expect_args(2)?;
                    let block = current_block(&mut blocks);
                    let key = line.args[0].to_string();
                    if block.params.insert(key.clone(), line.float(1)?).is_some() {
                        return Err(line.error(format!("duplicate parameter `{key}`")).into());
                    }
                }
                "curve" => {
                    if line.args.len() < 2 {
                        return Err(line.error("`curve` expects a name, an order and coefficients").into());
                    }
                    let order: usize = line.args[1]
                        .parse()
                        .map_err(|_| line.error(format!("`{}` is not a curve order", line.args[1])))?;
                    let coeffs = line.floats_from(2)?;
                    if coeffs.len() != order + 1 {
                        return Err(line
                            .error(format!("order {order} needs {} coefficients, found {}", order + 1, coeffs.len()))
                            .into());
                    }
                    let curve = BezierCurve::new(coeffs).map_err(|e| line.error(e.to_string()))?;
                    let block = current_block(&mut blocks);
                    let key = line.args[0].to_string();
                    if block.curves.insert(key.clone(), curve).is_some() {
                        return Err(line.error(format!("duplicate curve `{key}`")).into());
                    }
                }
                other => return Err(line.error(format!("unknown keyword `{other}`")).into()),
            }
        }
        let trajectories = blocks.into_iter().map(Block::finish).collect::<Result<Vec<_>, _>>()?;
        Self::new(trajectories)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrajError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TrajError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TrajError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|source| TrajError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

struct Block {
    name: String,
    params: BTreeMap<String, f64>,
    curves: BTreeMap<String, BezierCurve>,
}

impl Block {
    fn new(name: String) -> Self {
        Self { name, params: BTreeMap::new(), curves: BTreeMap::new() }
    }

    fn finish(mut self) -> Result<NominalTrajectory, TrajError> {
        let mut take = |key: &str| {
            self.params.remove(key).ok_or_else(|| TrajError::MissingParam {
                trajectory: self.name.clone(),
                key: key.to_string(),
            })
        };
        let incline = take("incline_deg")?;
        let speed = take("nominal_speed")?;
        let duration = take("T")?;
        let mass = take("mass")?;
        NominalTrajectory::new(self.name, incline, speed, duration, mass, self.curves, self.params)
    }
}

/// Lines before any `trajectory` keyword belong to an implicit single
/// trajectory called `nominal`.
fn current_block(blocks: &mut Vec<Block>) -> &mut Block {
    if blocks.is_empty() {
        blocks.push(Block::new("nominal".to_string()));
    }
    blocks.last_mut().unwrap()
}

/// Result of re-simulating a stored trajectory over a left/right step pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicityReport {
    pub sagittal: f64,
    pub frontal: Option<f64>,
    pub residual: f64,
    pub tolerance: f64,
}

impl PeriodicityReport {
    pub fn passed(&self) -> bool {
        self.residual <= self.tolerance
    }
}

/// Integrates the torque-free model over two steps from the stored initial
/// state, applying the stored foot displacement at each swap, and reports the
/// infinity-norm return error per plane.
pub fn check_periodicity(
    traj: &NominalTrajectory,
    params: &RobotParams,
    tol: f64,
) -> Result<PeriodicityReport, TrajError> {
    let dt = traj.integration_dt();
    let pair = |model: &PlaneModel, x0: AlipState| -> Result<f64, TrajError> {
        let x1 = model.step_map(x0, dt, params)?;
        let x2 = model.step_map(x1, dt, params)?;
        Ok(x2.max_abs_diff(&x0))
    };
    let sagittal = pair(traj.sagittal(), traj.nominal_state(0.0))?;
    let frontal = match (traj.frontal(), traj.nominal_lateral_state(0.0)) {
        (Some(model), Some(x0)) => Some(pair(model, x0)?),
        _ => None,
    };
    let residual = sagittal.max(frontal.unwrap_or(0.0));
    Ok(PeriodicityReport { sagittal, frontal, residual, tolerance: tol })
}
