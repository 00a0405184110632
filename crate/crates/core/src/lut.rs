//! Precomputed lateral placement table with multilinear interpolation.
//!
//! The grid axes are deviations from the nominal frontal orbit, `theta -
//! theta_nom(t)` and `L - L_nom(t)`, plus the phase time `t`. Centering on the
//! orbit keeps the grid dense where the robot actually is.
//!
//! Nodes hold the secant placement before the kinematic clamp; the clamp is
//! applied after interpolation so cells straddling a range limit stay
//! accurate.
//!
//! Binary layout (little-endian): magic `ALUT`, version byte, three axis
//! descriptors `(start: f64, step: f64, count: u32)` in (theta, L, phase)
//! order, then the values as `f64` in row-major (theta, L, phase) order.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::bezier::BezierCurve;
use crate::model::{AlipState, RobotParams};
use crate::placement::{plan_placement_unclamped, PlacementConfig, PlacementError, PlacementQuery, PlacementTarget};
use crate::trajectory::{self as tr, NominalTrajectory};

const MAGIC: &[u8; 4] = b"ALUT";
const VERSION: u8 = 1;
const AXIS_BYTES: usize = 20;
const HEADER_BYTES: usize = 5 + 3 * AXIS_BYTES;

#[derive(Debug, Error)]
pub enum LutError {
    #[error("axis {axis}: {message}")]
    Axis { axis: usize, message: &'static str },
    #[error("expected {expected} values, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("value at index {index} is not finite")]
    NonFinite { index: usize },
    #[error("not a lookup table file: {0}")]
    Format(&'static str),
    #[error("unsupported lookup table version {0}")]
    Version(u8),
    #[error("no grid node has a usable placement")]
    NoFeasibleNode,
    #[error("trajectory `{0}` has no frontal reference curves")]
    NoReference(String),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error("{path}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Uniform axis `start + i * step`, `i < count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub count: u32,
}

impl Axis {
    pub fn spanning(start: f64, end: f64, count: u32) -> Self {
        let step = if count > 1 { (end - start) / (count - 1) as f64 } else { 0.0 };
        Self { start, step, count }
    }

    pub fn node(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.node(self.count as usize - 1)
    }

    fn validate(&self, axis: usize) -> Result<(), LutError> {
        if self.count < 2 {
            return Err(LutError::Axis { axis, message: "needs at least two nodes" });
        }
        if !(self.start.is_finite() && self.step.is_finite() && self.step > 0.0) {
            return Err(LutError::Axis { axis, message: "start must be finite and step positive" });
        }
        Ok(())
    }

    /// Cell index and fraction within it; out-of-range values clamp.
    #[inline]
    fn locate(&self, v: f64) -> (usize, f64, bool) {
        let last = (self.count - 2) as f64;
        let u = (v - self.start) / self.step;
        let clamped = !(u >= 0.0 && u <= last + 1.0);
        let u = u.clamp(0.0, last + 1.0);
        let cell = u.floor().min(last);
        (cell as usize, u - cell, clamped)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    axes: [Axis; 3],
    values: Vec<f64>,
}

impl LookupTable {
    pub fn new(axes: [Axis; 3], values: Vec<f64>) -> Result<Self, LutError> {
        for (i, a) in axes.iter().enumerate() {
            a.validate(i)?;
        }
        let expected = axes.iter().map(|a| a.count as usize).product();
        if values.len() != expected {
            return Err(LutError::Length { expected, actual: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(LutError::NonFinite { index });
        }
        Ok(Self { axes, values })
    }

    pub fn axes(&self) -> &[Axis; 3] {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let (nj, nk) = (self.axes[1].count as usize, self.axes[2].count as usize);
        (i * nj + j) * nk + k
    }

    pub fn node_value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    /// Trilinear interpolation; the flag reports a clamped coordinate.
    #[inline]
    pub fn query_flagged(&self, a: f64, b: f64, c: f64) -> (f64, bool) {
        let (i, fa, ca) = self.axes[0].locate(a);
        let (j, fb, cb) = self.axes[1].locate(b);
        let (k, fc, cc) = self.axes[2].locate(c);
        let nk = self.axes[2].count as usize;
        let nj = self.axes[1].count as usize;
        let base = (i * nj + j) * nk + k;
        let v = &self.values;
        let lerp = |lo: f64, hi: f64, f: f64| lo + f * (hi - lo);
        let row = |o: usize| lerp(v[o], v[o + 1], fc);
        let plane = |o: usize| lerp(row(o), row(o + nk), fb);
        (lerp(plane(base), plane(base + nj * nk), fa), ca || cb || cc)
    }

    #[inline]
    pub fn query(&self, a: f64, b: f64, c: f64) -> f64 {
        self.query_flagged(a, b, c).0
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES + 8 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        for a in &self.axes {
            out.extend_from_slice(&a.start.to_le_bytes());
            out.extend_from_slice(&a.step.to_le_bytes());
            out.extend_from_slice(&a.count.to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LutError> {
        if bytes.len() < HEADER_BYTES {
            return Err(LutError::Format("truncated header"));
        }
        if &bytes[..4] != MAGIC {
            return Err(LutError::Format("bad magic"));
        }
        if bytes[4] != VERSION {
            return Err(LutError::Version(bytes[4]));
        }
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let mut axes = [Axis { start: 0.0, step: 0.0, count: 0 }; 3];
        for (n, axis) in axes.iter_mut().enumerate() {
            let o = 5 + n * AXIS_BYTES;
            *axis = Axis {
                start: f64_at(o),
                step: f64_at(o + 8),
                count: u32::from_le_bytes(bytes[o + 16..o + 20].try_into().unwrap()),
            };
            axis.validate(n)?;
        }
        let body = &bytes[HEADER_BYTES..];
        let expected: usize = axes.iter().map(|a| a.count as usize).product();
        if body.len() != 8 * expected {
            return Err(LutError::Length { expected, actual: body.len() / 8 });
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(axes, values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LutError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|source| LutError::Io { path: path.to_path_buf(), source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LutError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| LutError::Io { path: path.to_path_buf(), source })?;
        Self::from_bytes(&bytes)
    }
}

/// Grid extents around the nominal frontal orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LutAxesSpec {
    pub theta_half_width: f64,
    pub theta_count: u32,
    /// Momentum half-width as a fraction of the orbit's peak `|L|`.
    pub momentum_fraction: f64,
    pub momentum_count: u32,
    pub phase_count: u32,
}

impl Default for LutAxesSpec {
    fn default() -> Self {
        Self {
            theta_half_width: 0.3,
            theta_count: 41,
            momentum_fraction: 0.5,
            momentum_count: 41,
            phase_count: 21,
        }
    }
}

impl LutAxesSpec {
    pub fn axes(&self, traj: &NominalTrajectory) -> Result<[Axis; 3], LutError> {
        let l_curve = traj
            .curve(tr::KEY_LAT_MOMENTUM)
            .ok_or_else(|| LutError::NoReference(traj.name().to_string()))?;
        let peak = l_curve.max_coefficient().abs().max(l_curve.min_coefficient().abs());
        let dl = self.momentum_fraction * peak;
        let axes = [
            Axis::spanning(-self.theta_half_width, self.theta_half_width, self.theta_count),
            Axis::spanning(-dl, dl, self.momentum_count),
            Axis::spanning(0.0, traj.duration(), self.phase_count),
        ];
        for (i, a) in axes.iter().enumerate() {
            a.validate(i)?;
        }
        Ok(axes)
    }
}

/// Table plus the nominal frontal curves its axes are centered on and the
/// kinematic range applied to every answer.
#[derive(Debug, Clone, PartialEq)]
pub struct LateralLut {
    table: LookupTable,
    theta_ref: BezierCurve,
    momentum_ref: BezierCurve,
    duration: f64,
    range: PlacementConfig,
}

impl LateralLut {
    pub fn new(table: LookupTable, traj: &NominalTrajectory, range: PlacementConfig) -> Result<Self, LutError> {
        let missing = || LutError::NoReference(traj.name().to_string());
        Ok(Self {
            table,
            range,
            theta_ref: traj.curve(tr::KEY_LAT_THETA).ok_or_else(missing)?.clone(),
            momentum_ref: traj.curve(tr::KEY_LAT_MOMENTUM).ok_or_else(missing)?.clone(),
            duration: traj.duration(),
        })
    }

    pub fn table(&self) -> &LookupTable {
        &self.table
    }

    /// Grid coordinates `(dtheta, dL, t)` of a frontal state.
    #[inline]
    pub fn coordinates(&self, state: &AlipState, phase_time: f64) -> (f64, f64, f64) {
        let s = (phase_time / self.duration).clamp(0.0, 1.0);
        (
            state.theta - self.theta_ref.eval_unchecked(s),
            state.momentum - self.momentum_ref.eval_unchecked(s),
            phase_time,
        )
    }

    /// Placement and whether the state fell outside the grid.
    #[inline]
    pub fn query_flagged(&self, state: &AlipState, phase_time: f64) -> (f64, bool) {
        let (a, b, c) = self.coordinates(state, phase_time);
        let (raw, outside) = self.table.query_flagged(a, b, c);
        (raw.clamp(self.range.y_min, self.range.y_max), outside)
    }

    pub fn range(&self) -> &PlacementConfig {
        &self.range
    }

    #[inline]
    pub fn query(&self, state: &AlipState, phase_time: f64) -> f64 {
        self.query_flagged(state, phase_time).0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LutQuality {
    pub nodes: usize,
    /// Nodes whose placement lies outside the kinematic range.
    pub clamped: usize,
    /// Nodes where the planner fell back; each was filled from the nearest
    /// node that did not.
    pub filled: usize,
}

/// Evaluates the placement planner at every grid node.
pub fn build_lookup_table(
    traj: &NominalTrajectory,
    params: &RobotParams,
    spec: &LutAxesSpec,
    l_des: f64,
    dt: f64,
    cfg: &PlacementConfig,
) -> Result<(LateralLut, LutQuality), LutError> {
    let axes = spec.axes(traj)?;
    let (ni, nj, nk) = (axes[0].count as usize, axes[1].count as usize, axes[2].count as usize);
    let theta_ref = traj.curve(tr::KEY_LAT_THETA).ok_or_else(|| LutError::NoReference(traj.name().to_string()))?;
    let momentum_ref = traj.curve(tr::KEY_LAT_MOMENTUM).ok_or_else(|| LutError::NoReference(traj.name().to_string()))?;

    let mut values = vec![f64::NAN; ni * nj * nk];
    let mut quality = LutQuality { nodes: values.len(), ..Default::default() };
    for k in 0..nk {
        let t = axes[2].node(k).min(traj.duration());
        let s = t / traj.duration();
        let (th, l) = (theta_ref.eval_unchecked(s), momentum_ref.eval_unchecked(s));
        for i in 0..ni {
            for j in 0..nj {
                let q = PlacementQuery {
                    state: AlipState::new(th + axes[0].node(i), l + axes[1].node(j)),
                    phase_time: t,
                    target: PlacementTarget::Momentum(l_des),
                };
                let out = plan_placement_unclamped(&q, traj, params, dt, cfg)?;
                if !out.fallback {
                    values[(i * nj + j) * nk + k] = out.y_des;
                    if cfg.clamp(out).clamped {
                        quality.clamped += 1;
                    }
                }
            }
        }
    }
    quality.filled = fill_from_nearest(&mut values, [ni, nj, nk])?;
    let table = LookupTable::new(axes, values)?;
    Ok((LateralLut::new(table, traj, *cfg)?, quality))
}

/// Replaces NaN nodes by the value of the nearest non-NaN node in index
/// space (ties go to the lowest flat index).
fn fill_from_nearest(values: &mut [f64], dims: [usize; 3]) -> Result<usize, LutError> {
    let missing: Vec<usize> = (0..values.len()).filter(|&n| values[n].is_nan()).collect();
    if missing.is_empty() {
        return Ok(0);
    }
    let coords = |n: usize| [n / (dims[1] * dims[2]), (n / dims[2]) % dims[1], n % dims[2]];
    let feasible: Vec<usize> = (0..values.len()).filter(|&n| !values[n].is_nan()).collect();
    if feasible.is_empty() {
        return Err(LutError::NoFeasibleNode);
    }
    for &n in &missing {
        let a = coords(n);
        let nearest = feasible
            .iter()
            .copied()
            .min_by_key(|&f| {
                let b = coords(f);
                (0..3).map(|d| a[d].abs_diff(b[d]).pow(2)).sum::<usize>()
            })
            .unwrap();
        values[n] = values[nearest];
    }
    Ok(missing.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> LookupTable {
        let axes = [Axis::spanning(0.0, 1.0, 2), Axis::spanning(-1.0, 1.0, 3), Axis::spanning(0.0, 0.4, 2)];
        let values = (0..12).map(|n| n as f64 * 0.5 - 1.0).collect();
        LookupTable::new(axes, values).unwrap()
    }

    #[test]
    fn nodes_are_exact() {
        let t = table();
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..2 {
                    let (a, b, c) = (t.axes[0].node(i), t.axes[1].node(j), t.axes[2].node(k));
                    assert_eq!(t.query(a, b, c), t.node_value(i, j, k));
                }
            }
        }
    }

    #[test]
    fn trilinear_reproduces_affine_functions() {
        let axes = [Axis::spanning(-0.3, 0.3, 4), Axis::spanning(-2.0, 2.0, 5), Axis::spanning(0.0, 0.4, 3)];
        let f = |a: f64, b: f64, c: f64| 1.0 + 2.0 * a - 0.5 * b + 3.0 * c;
        let mut values = Vec::new();
        for i in 0..4 {
            for j in 0..5 {
                for k in 0..3 {
                    values.push(f(axes[0].node(i), axes[1].node(j), axes[2].node(k)));
                }
            }
        }
        let t = LookupTable::new(axes, values).unwrap();
        for (a, b, c) in [(0.01, 0.3, 0.11), (-0.29, -1.9, 0.39), (0.2, 1.1, 0.0)] {
            assert!((t.query(a, b, c) - f(a, b, c)).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_clamps_and_flags() {
        let t = table();
        let (v, flagged) = t.query_flagged(5.0, 5.0, 5.0);
        assert!(flagged);
        assert_eq!(v, t.node_value(1, 2, 1));
        assert!(!t.query_flagged(0.5, 0.0, 0.2).1);
    }

    #[test]
    fn byte_round_trip() {
        let t = table();
        let bytes = t.to_bytes();
        assert_eq!(&bytes[..4], b"ALUT");
        assert_eq!(bytes[4], 1);
        assert_eq!(bytes.len(), 65 + 12 * 8);
        assert_eq!(LookupTable::from_bytes(&bytes).unwrap(), t);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(LookupTable::from_bytes(&bad).is_err());
        assert!(LookupTable::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn rejects_bad_shapes() {
        let axes = [Axis::spanning(0.0, 1.0, 1), Axis::spanning(0.0, 1.0, 2), Axis::spanning(0.0, 1.0, 2)];
        assert!(LookupTable::new(axes, vec![0.0; 4]).is_err());
        let axes = [Axis::spanning(0.0, 1.0, 2); 3];
        assert!(matches!(LookupTable::new(axes, vec![0.0; 7]), Err(LutError::Length { .. })));
        assert!(matches!(LookupTable::new(axes, vec![f64::NAN; 8]), Err(LutError::NonFinite { .. })));
    }

    #[test]
    fn nearest_fill() {
        let mut v = vec![1.0, f64::NAN, f64::NAN, 4.0];
        assert_eq!(fill_from_nearest(&mut v, [1, 1, 4]).unwrap(), 2);
        assert_eq!(v, vec![1.0, 1.0, 4.0, 4.0]);
        let mut none = vec![f64::NAN; 2];
        assert!(fill_from_nearest(&mut none, [1, 1, 2]).is_err());
    }
}
