//! Sagittal ankle-torque MPC.
//!
//! The ALIP model is linearized about the nominal trajectory on a grid of
//! `dt` substeps. A substep that crosses the end of the step is split at the
//! impact and the linearized reduced-order impact map is composed in between,
//! so the horizon sees the momentum jump smoothly. States are condensed out
//! and the box-constrained QP in the torques is solved by projected gradient
//! with exact line search, each gradient step followed by a Newton step on
//! the free variables.
//!
//! All buffers live in [`MpcWorkspace`]; a solve performs no allocation.

use std::time::{Duration, Instant};

use nalgebra::{Matrix2, Vector2};
use thiserror::Error;

use crate::gait::PlaneModel;
use crate::impact::ImpactError;
use crate::model::{AlipState, RobotParams};
use crate::trajectory::NominalTrajectory;

/// 2x2 state weight over `(theta, L)`.
pub type Weight = Matrix2<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MpcError {
    #[error("invalid MPC configuration: {0}")]
    Config(&'static str),
    #[error("impact map is not differentiable at the nominal pre-impact state: {0}")]
    Impact(#[from] ImpactError),
    #[error("invalid query: {0}")]
    Query(&'static str),
    #[error("workspace holds {capacity} inputs, horizon needs {horizon}")]
    Workspace { capacity: usize, horizon: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig {
    pub horizon: usize,
    pub dt: f64,
    /// Bound on `|u|`, in the same unit as the ankle torque.
    pub torque_limit: f64,
    pub q: Weight,
    pub r: f64,
    pub q_terminal: Weight,
    pub max_iterations: usize,
    pub kkt_tolerance: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        let q = Matrix2::new(10.0, 0.0, 0.0, 1.0);
        Self {
            horizon: 20,
            dt: 0.02,
            torque_limit: 23.0,
            q,
            r: 0.1,
            q_terminal: q * 10.0,
            max_iterations: 200,
            kkt_tolerance: 1e-8,
        }
    }
}

fn is_psd(m: &Matrix2<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
        && m[(0, 1)] == m[(1, 0)]
        && m[(0, 0)] >= 0.0
        && m[(1, 1)] >= 0.0
        && m.determinant() >= 0.0
}

impl MpcConfig {
    pub fn validate(&self) -> Result<(), MpcError> {
        if self.horizon == 0 {
            return Err(MpcError::Config("horizon must be at least 1"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(MpcError::Config("dt must be positive"));
        }
        if !(self.torque_limit.is_finite() && self.torque_limit > 0.0) {
            return Err(MpcError::Config("torque limit must be positive"));
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(MpcError::Config("R must be positive"));
        }
        if !is_psd(&self.q) || !is_psd(&self.q_terminal) {
            return Err(MpcError::Config("Q and Q_f must be symmetric positive semidefinite"));
        }
        if self.max_iterations == 0 || !(self.kkt_tolerance > 0.0) {
            return Err(MpcError::Config("iteration cap and KKT tolerance must be positive"));
        }
        Ok(())
    }
}

/// `x+ = a x + b u + c` for one substep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedStep {
    pub a: Matrix2<f64>,
    pub b: Vector2<f64>,
    pub c: Vector2<f64>,
}

/// `x+ = a x- + c` at a foot swap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactLinearization {
    pub a: Matrix2<f64>,
    pub c: Vector2<f64>,
}

fn vec(x: &AlipState) -> Vector2<f64> {
    Vector2::new(x.theta, x.momentum)
}

/// Jacobian of the continuous dynamics with respect to `(theta, L)`.
fn jacobian(theta: f64, r: f64, params: &RobotParams) -> Matrix2<f64> {
    let m = params.mass();
    Matrix2::new(0.0, 1.0 / (m * r * r), m * params.gravity() * r * theta.cos(), 0.0)
}

/// Euler substep of length `h` from phase `t` linearized at the nominal
/// state, without the affine term.
fn euler_ab(traj: &NominalTrajectory, t: f64, h: f64, params: &RobotParams) -> (Matrix2<f64>, Vector2<f64>) {
    let x = traj.nominal_state(t);
    let r = traj.sagittal().profile.length_at(t);
    (Matrix2::identity() + h * jacobian(x.theta, r, params), Vector2::new(0.0, h))
}

/// Linearizes one Euler substep starting at phase `t`. The substep is
/// truncated at the end of the step; `c` makes the nominal an exact
/// trajectory of the linear model.
pub fn linearize_dynamics(traj: &NominalTrajectory, t: f64, dt: f64, params: &RobotParams) -> LinearizedStep {
    let t = t.clamp(0.0, traj.duration());
    let h = dt.min(traj.duration() - t);
    let (a, b) = euler_ab(traj, t, h, params);
    let c = vec(&traj.nominal_state(t + h)) - a * vec(&traj.nominal_state(t));
    LinearizedStep { a, b, c }
}

/// Central-difference linearization of a plane's nominal foot swap at `pre`.
pub fn linearize_switch(
    model: &PlaneModel,
    pre: &AlipState,
    params: &RobotParams,
) -> Result<ImpactLinearization, ImpactError> {
    const H: f64 = 1e-6;
    let mut a = Matrix2::zeros();
    for j in 0..2 {
        let mut plus = *pre;
        let mut minus = *pre;
        if j == 0 {
            plus.theta += H;
            minus.theta -= H;
        } else {
            plus.momentum += H;
            minus.momentum -= H;
        }
        let d = (vec(&model.switch(&plus, params)?) - vec(&model.switch(&minus, params)?)) / (2.0 * H);
        a.set_column(j, &d);
    }
    let post = model.switch(pre, params)?;
    Ok(ImpactLinearization { a, c: vec(&post) - a * vec(pre) })
}

/// Linearized sagittal impact at the trajectory's nominal pre-impact state.
pub fn linearize_impact(traj: &NominalTrajectory, params: &RobotParams) -> Result<ImpactLinearization, MpcError> {
    Ok(linearize_switch(traj.sagittal(), &traj.nominal_state(traj.duration()), params)?)
}

/// Nominal phase of each horizon node and the linear map between nodes.
/// Node phases are in `[0, T)` except that the initial phase may equal `T`.
fn build_horizon(
    traj: &NominalTrajectory,
    t0: f64,
    cfg: &MpcConfig,
    params: &RobotParams,
    imp: &ImpactLinearization,
    ws: &mut MpcWorkspace,
) {
    let period = traj.duration();
    let mut t = t0;
    ws.reference[0] = vec(&traj.nominal_state(t));
    for k in 0..cfg.horizon {
        let end = t + cfg.dt;
        let (a, b, next) = if end >= period - 1e-12 {
            let h1 = (period - t).max(0.0);
            let h2 = (end - period).max(0.0);
            let (a1, b1) = euler_ab(traj, t, h1, params);
            let (a2, b2) = euler_ab(traj, 0.0, h2, params);
            let a2i = a2 * imp.a;
            (a2i * a1, a2i * b1 + b2, h2)
        } else {
            let (a, b) = euler_ab(traj, t, cfg.dt, params);
            (a, b, end)
        };
        ws.a[k] = a;
        ws.b[k] = b;
        t = next;
        ws.reference[k + 1] = vec(&traj.nominal_state(t));
    }
}

/// Preallocated buffers for horizons up to `capacity` inputs.
#[derive(Debug, Clone)]
pub struct MpcWorkspace {
    capacity: usize,
    n: usize,
    a: Vec<Matrix2<f64>>,
    b: Vec<Vector2<f64>>,
    reference: Vec<Vector2<f64>>,
    /// Response of node `k` to input `j`, `gamma[k * cap + j]`, for `j < k`.
    gamma: Vec<Vector2<f64>>,
    free_response: Vec<Vector2<f64>>,
    hessian: Vec<f64>,
    linear: Vec<f64>,
    qp: QpScratch,
    predicted: Vec<AlipState>,
}

impl MpcWorkspace {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            n: 0,
            a: vec![Matrix2::zeros(); capacity],
            b: vec![Vector2::zeros(); capacity],
            reference: vec![Vector2::zeros(); capacity + 1],
            gamma: vec![Vector2::zeros(); (capacity + 1) * capacity],
            free_response: vec![Vector2::zeros(); capacity + 1],
            hessian: vec![0.0; capacity * capacity],
            linear: vec![0.0; capacity],
            qp: QpScratch::new(capacity),
            predicted: vec![AlipState::default(); capacity + 1],
        }
    }

    pub fn for_config(cfg: &MpcConfig) -> Self {
        Self::new(cfg.horizon)
    }

    /// Predicted states `x_0..x_N` of the last solve.
    pub fn predicted(&self) -> &[AlipState] {
        &self.predicted[..self.n + 1]
    }

    /// Optimal torque sequence of the last solve.
    pub fn torques(&self) -> &[f64] {
        &self.qp.u[..self.n]
    }

    /// QP objective after each iteration of the last solve, starting with the
    /// initial iterate.
    pub fn cost_trace(&self) -> &[f64] {
        &self.qp.trace
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcSolution {
    pub torque: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
    pub cost: f64,
    pub solve_time: Duration,
}

/// Solves the horizon problem from `x` at phase `phase_time` and returns the
/// first torque. A non-converged solve returns the best iterate with
/// `converged == false`.
pub fn solve_ankle_mpc(
    x: &AlipState,
    phase_time: f64,
    traj: &NominalTrajectory,
    cfg: &MpcConfig,
    params: &RobotParams,
    ws: &mut MpcWorkspace,
) -> Result<MpcSolution, MpcError> {
    let start = Instant::now();
    cfg.validate()?;
    if ws.capacity < cfg.horizon {
        return Err(MpcError::Workspace { capacity: ws.capacity, horizon: cfg.horizon });
    }
    if !x.is_finite() {
        return Err(MpcError::Query("non-finite state"));
    }
    if !(phase_time >= 0.0 && phase_time <= traj.duration()) {
        return Err(MpcError::Query("phase time outside [0, T]"));
    }
    let imp = linearize_impact(traj, params)?;
    let n = cfg.horizon;
    ws.n = n;
    build_horizon(traj, phase_time, cfg, params, &imp, ws);

    // Deviation dynamics: dx_{k+1} = A_k dx_k + B_k u_k.
    let cap = ws.capacity;
    let dx0 = vec(x) - ws.reference[0];
    ws.free_response[0] = dx0;
    for k in 0..n {
        ws.free_response[k + 1] = ws.a[k] * ws.free_response[k];
    }
    for j in 0..n {
        let mut v = ws.b[j];
        for k in j + 1..=n {
            ws.gamma[k * cap + j] = v;
            if k < n {
                v = ws.a[k] * v;
            }
        }
    }

    // Cost  sum_k |dx_k|^2_{Q_k} + R |u|^2  =  u'Hu + 2 g'u + const.
    for i in 0..n {
        ws.linear[i] = 0.0;
        for j in 0..=i {
            ws.hessian[i * n + j] = 0.0;
        }
    }
    for k in 1..=n {
        let qk = if k == n { &cfg.q_terminal } else { &cfg.q };
        let free = qk * ws.free_response[k];
        for i in 0..k {
            let qg = qk * ws.gamma[k * cap + i];
            ws.linear[i] += ws.gamma[k * cap + i].dot(&free);
            for j in 0..=i {
                ws.hessian[i * n + j] += qg.dot(&ws.gamma[k * cap + j]);
            }
        }
    }
    for i in 0..n {
        ws.hessian[i * n + i] += cfg.r;
        for j in 0..i {
            ws.hessian[j * n + i] = ws.hessian[i * n + j];
        }
    }

    let result = solve_box_qp(
        &ws.hessian[..n * n],
        &ws.linear[..n],
        cfg.torque_limit,
        cfg.max_iterations,
        cfg.kkt_tolerance,
        &mut ws.qp,
    );

    let mut dx = dx0;
    ws.predicted[0] = *x;
    for k in 0..n {
        dx = ws.a[k] * dx + ws.b[k] * ws.qp.u[k];
        let abs = ws.reference[k + 1] + dx;
        ws.predicted[k + 1] = AlipState::new(abs[0], abs[1]);
    }

    let torque = ws.qp.u[0];
    debug_assert!(torque.abs() <= cfg.torque_limit);
    Ok(MpcSolution {
        torque,
        iterations: result.iterations,
        kkt_residual: result.kkt_residual,
        converged: result.converged,
        cost: result.cost,
        solve_time: start.elapsed(),
    })
}

#[derive(Debug, Clone)]
pub struct QpScratch {
    u: Vec<f64>,
    grad: Vec<f64>,
    dir: Vec<f64>,
    hd: Vec<f64>,
    free: Vec<usize>,
    chol: Vec<f64>,
    trace: Vec<f64>,
}

impl QpScratch {
    pub fn new(n: usize) -> Self {
        Self {
            u: vec![0.0; n],
            grad: vec![0.0; n],
            dir: vec![0.0; n],
            hd: vec![0.0; n],
            free: Vec::with_capacity(n),
            chol: vec![0.0; n * n],
            trace: Vec::with_capacity(1024),
        }
    }

    pub fn solution(&self) -> &[f64] {
        &self.u
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpResult {
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
    pub cost: f64,
}

fn matvec(h: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for i in 0..n {
        out[i] = h[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projected-gradient optimality measure `max |u - clamp(u - grad)|`.
pub fn kkt_residual(u: &[f64], grad: &[f64], limit: f64) -> f64 {
    u.iter()
        .zip(grad)
        .map(|(ui, gi)| (ui - (ui - gi).clamp(-limit, limit)).abs())
        .fold(0.0, f64::max)
}

/// Minimizes `u'Hu + 2g'u` over `|u_i| <= limit` for symmetric positive
/// definite `H` (row-major, `n x n`). Starts from zero.
pub fn solve_box_qp(h: &[f64], g: &[f64], limit: f64, max_iterations: usize, tol: f64, s: &mut QpScratch) -> QpResult {
    let n = g.len();
    let (u, grad, dir, hd) = (&mut s.u[..n], &mut s.grad[..n], &mut s.dir[..n], &mut s.hd[..n]);
    u.fill(0.0);
    s.trace.clear();

    // Gradient of the half objective: Hu + g.
    let gradient = |u: &[f64], grad: &mut [f64]| {
        matvec(h, u, grad);
        for (gi, bi) in grad.iter_mut().zip(g) {
            *gi += bi;
        }
    };
    let cost = |u: &[f64], grad: &[f64]| dot(u, grad) + dot(u, g);

    // Gershgorin bound on the largest eigenvalue of H.
    let lipschitz = (0..n)
        .map(|i| h[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum::<f64>())
        .fold(f64::MIN_POSITIVE, f64::max);

    gradient(u, grad);
    let mut residual = kkt_residual(u, grad, limit);
    push_trace(&mut s.trace, cost(u, grad));
    let mut iterations = 0;
    while residual > tol && iterations < max_iterations {
        iterations += 1;

        // Projected gradient step with exact line search on the segment.
        for i in 0..n {
            dir[i] = (u[i] - grad[i] / lipschitz).clamp(-limit, limit) - u[i];
        }
        matvec(h, dir, hd);
        let curvature = dot(dir, hd);
        if curvature > 0.0 {
            let alpha = (-dot(grad, dir) / curvature).clamp(0.0, 1.0);
            for i in 0..n {
                u[i] = (u[i] + alpha * dir[i]).clamp(-limit, limit);
            }
        }
        gradient(u, grad);

        // Newton step on the variables strictly inside the box, truncated
        // at the boundary.
        s.free.clear();
        s.free.extend((0..n).filter(|&i| u[i].abs() < limit));
        let m = s.free.len();
        if m > 0 && cholesky_free(h, n, &s.free, &mut s.chol) {
            for (a, &i) in s.free.iter().enumerate() {
                dir[a] = -grad[i];
            }
            cholesky_solve(&s.chol, m, &mut dir[..m]);
            let mut step: f64 = 1.0;
            for (a, &i) in s.free.iter().enumerate() {
                if dir[a] > 0.0 {
                    step = step.min((limit - u[i]) / dir[a]);
                } else if dir[a] < 0.0 {
                    step = step.min((-limit - u[i]) / dir[a]);
                }
            }
            let step = step.max(0.0);
            for (a, &i) in s.free.iter().enumerate() {
                u[i] = (u[i] + step * dir[a]).clamp(-limit, limit);
            }
            gradient(u, grad);
        }
        residual = kkt_residual(u, grad, limit);
        push_trace(&mut s.trace, cost(u, grad));
    }
    QpResult {
        iterations,
        kkt_residual: residual,
        converged: residual <= tol,
        cost: cost(u, grad),
    }
}

fn push_trace(trace: &mut Vec<f64>, value: f64) {
    if trace.len() < trace.capacity() {
        trace.push(value);
    }
}

/// Cholesky factor of `H[free, free]` into `out` (row-major, lower).
fn cholesky_free(h: &[f64], n: usize, free: &[usize], out: &mut [f64]) -> bool {
    let m = free.len();
    for a in 0..m {
        for b in 0..=a {
            let mut sum = h[free[a] * n + free[b]];
            for c in 0..b {
                sum -= out[a * m + c] * out[b * m + c];
            }
            if a == b {
                if !(sum > 0.0) {
                    return false;
                }
                out[a * m + a] = sum.sqrt();
            } else {
                out[a * m + b] = sum / out[b * m + b];
            }
        }
    }
    true
}

fn cholesky_solve(l: &[f64], m: usize, x: &mut [f64]) {
    for a in 0..m {
        let mut sum = x[a];
        for c in 0..a {
            sum -= l[a * m + c] * x[c];
        }
        x[a] = sum / l[a * m + a];
    }
    for a in (0..m).rev() {
        let mut sum = x[a];
        for c in a + 1..m {
            sum -= l[c * m + a] * x[c];
        }
        x[a] = sum / l[a * m + a];
    }
}
