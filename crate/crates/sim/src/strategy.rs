//! Pluggable torque sources and foot-placement strategies, looked up by the
//! names used in scenario files.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use alip_core::lut::LateralLut;
use alip_core::model::{AlipState, RobotParams};
use alip_core::mpc::{solve_ankle_mpc, MpcWorkspace};
use alip_core::placement::{
    plan_placement_unclamped, predict_next_step_end_momentum, DesiredMomentum, PlacementConfig, PlacementQuery,
    PlacementTarget,
};
use alip_core::{NominalTrajectory, TrajectoryLibrary};
use alip_service::{ClientPolicy, ControllerConfig, MpcClient, TorqueSource as ReplySource};

use crate::SimError;

pub struct TorqueRequest<'a> {
    pub state: AlipState,
    pub phase_time: f64,
    pub traj_index: usize,
    pub traj: &'a NominalTrajectory,
    pub incline_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorqueSample {
    pub torque: f64,
    pub latency_us: f64,
    /// The torque did not come from a fresh solve.
    pub fallback: bool,
}

pub trait TorqueSource {
    fn name(&self) -> &'static str;
    fn torque(&mut self, req: &TorqueRequest<'_>) -> TorqueSample;
}

pub struct PlacementRequest<'a> {
    pub state: AlipState,
    pub phase_time: f64,
    pub traj_index: usize,
    pub traj: &'a NominalTrajectory,
    pub commanded_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub y: f64,
    pub fallback: bool,
}

pub trait PlacementStrategy {
    fn name(&self) -> &'static str;
    fn place(&mut self, req: &PlacementRequest<'_>) -> Placement;
}

/// Everything a factory may need.
#[derive(Clone)]
pub struct BuildContext {
    pub library: Arc<TrajectoryLibrary>,
    pub config: ControllerConfig,
    pub placement: PlacementConfig,
    pub desired: DesiredMomentum,
    /// Prediction step used by online placement and table builds.
    pub prediction_dt: f64,
    /// One table per library entry, required by the `lut` strategy.
    pub luts: Option<Arc<Vec<LateralLut>>>,
}

impl BuildContext {
    pub fn new(library: Arc<TrajectoryLibrary>, config: ControllerConfig) -> Self {
        Self {
            library,
            config,
            placement: PlacementConfig::default(),
            desired: DesiredMomentum::default(),
            prediction_dt: 1e-3,
            luts: None,
        }
    }
}

type TorqueFactory = fn(&[String], &BuildContext) -> Result<Box<dyn TorqueSource>, SimError>;
type PlacementFactory = fn(&BuildContext) -> Result<Box<dyn PlacementStrategy>, SimError>;

pub struct Registry {
    torque: BTreeMap<&'static str, TorqueFactory>,
    placement: BTreeMap<&'static str, PlacementFactory>,
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Self { torque: BTreeMap::new(), placement: BTreeMap::new() };
        r.register_torque("inprocess", |_, ctx| Ok(Box::new(InProcessMpc::new(ctx))));
        r.register_torque("udp", |args, ctx| Ok(Box::new(UdpMpc::from_args(args, ctx)?)));
        r.register_torque("passive", |_, _| Ok(Box::new(Passive)));
        r.register_placement("lut", |ctx| Ok(Box::new(LutPlacement::new(ctx)?)));
        r.register_placement("online-momentum", |ctx| Ok(Box::new(OnlinePlacement::new(ctx, Regulated::Momentum))));
        r.register_placement("online-angle", |ctx| Ok(Box::new(OnlinePlacement::new(ctx, Regulated::Angle))));
        r.register_placement("nominal", |_| Ok(Box::new(NominalPlacement)));
        r
    }
}

impl Registry {
    pub fn register_torque(&mut self, name: &'static str, f: TorqueFactory) {
        self.torque.insert(name, f);
    }

    pub fn register_placement(&mut self, name: &'static str, f: PlacementFactory) {
        self.placement.insert(name, f);
    }

    pub fn torque_names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.torque.keys().copied()
    }

    pub fn placement_names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.placement.keys().copied()
    }

    /// `spec[0]` names the source, the rest are its arguments.
    pub fn torque_source(&self, spec: &[String], ctx: &BuildContext) -> Result<Box<dyn TorqueSource>, SimError> {
        let name = spec.first().map(String::as_str).unwrap_or("");
        let f = self.torque.get(name).ok_or_else(|| SimError::UnknownStrategy(format!("torque source `{name}`")))?;
        f(&spec[1..], ctx)
    }

    pub fn placement_strategy(&self, name: &str, ctx: &BuildContext) -> Result<Box<dyn PlacementStrategy>, SimError> {
        let f = self.placement.get(name).ok_or_else(|| SimError::UnknownStrategy(format!("placement `{name}`")))?;
        f(ctx)
    }
}

pub struct InProcessMpc {
    config: ControllerConfig,
    workspace: MpcWorkspace,
}

impl InProcessMpc {
    pub fn new(ctx: &BuildContext) -> Self {
        Self { config: ctx.config.clone(), workspace: MpcWorkspace::for_config(&ctx.config.mpc) }
    }
}

impl TorqueSource for InProcessMpc {
    fn name(&self) -> &'static str {
        "inprocess"
    }

    fn torque(&mut self, req: &TorqueRequest<'_>) -> TorqueSample {
        let cfg = &self.config;
        match solve_ankle_mpc(&req.state, req.phase_time, req.traj, &cfg.mpc, &cfg.params, &mut self.workspace) {
            Ok(s) => TorqueSample { torque: s.torque, latency_us: s.solve_time.as_secs_f64() * 1e6, fallback: false },
            Err(_) => TorqueSample { torque: 0.0, latency_us: 0.0, fallback: true },
        }
    }
}

pub struct UdpMpc {
    client: MpcClient,
}

impl UdpMpc {
    pub fn connect(server: SocketAddr, policy: ClientPolicy) -> Result<Self, SimError> {
        let client = MpcClient::connect(server, policy).map_err(|e| SimError::Control(e.to_string()))?;
        Ok(Self { client })
    }

    /// Arguments: server address, optional timeout in µs.
    fn from_args(args: &[String], _ctx: &BuildContext) -> Result<Self, SimError> {
        let usage = || SimError::Control("expected `udp <addr> [timeout_us]`".into());
        let addr: SocketAddr = args.first().ok_or_else(usage)?.parse().map_err(|_| usage())?;
        let mut policy = ClientPolicy::default();
        if let Some(t) = args.get(1) {
            policy.timeout = Duration::from_micros(t.parse().map_err(|_| usage())?);
        }
        if args.len() > 2 {
            return Err(usage());
        }
        Self::connect(addr, policy)
    }

    pub fn client(&self) -> &MpcClient {
        &self.client
    }
}

impl TorqueSource for UdpMpc {
    fn name(&self) -> &'static str {
        "udp"
    }

    fn torque(&mut self, req: &TorqueRequest<'_>) -> TorqueSample {
        let id = u16::try_from(req.traj_index).unwrap_or(u16::MAX);
        let reply = self.client.query(&req.state, req.phase_time, id, req.incline_deg);
        TorqueSample {
            torque: reply.torque,
            latency_us: reply.rtt.map_or(0.0, |d| d.as_secs_f64() * 1e6),
            fallback: reply.source != ReplySource::Fresh,
        }
    }
}

pub struct Passive;

impl TorqueSource for Passive {
    fn name(&self) -> &'static str {
        "passive"
    }

    fn torque(&mut self, _: &TorqueRequest<'_>) -> TorqueSample {
        TorqueSample { torque: 0.0, latency_us: 0.0, fallback: false }
    }
}

/// End-of-next-step momentum sensitivity to the lateral offset, taken on
/// the nominal orbit.
pub fn nominal_slope(traj: &NominalTrajectory, params: &RobotParams, cfg: &PlacementConfig, dt: f64) -> Option<f64> {
    let x0 = traj.nominal_lateral_state(0.0)?;
    let y = traj.lateral_offset()?;
    let l1 = predict_next_step_end_momentum(x0, 0.0, y, traj, params, dt).ok()?;
    let l2 = predict_next_step_end_momentum(x0, 0.0, y + cfg.delta, traj, params, dt).ok()?;
    let slope = (l2 - l1) / cfg.delta;
    (slope.abs() > 1e-9).then_some(slope)
}

/// Table lookup for the nominal target, shifted by the speed-dependent
/// target change over the nominal slope.
pub struct LutPlacement {
    luts: Arc<Vec<LateralLut>>,
    slopes: Vec<Option<f64>>,
    desired: DesiredMomentum,
    range: PlacementConfig,
}

impl LutPlacement {
    pub fn new(ctx: &BuildContext) -> Result<Self, SimError> {
        let luts = ctx.luts.clone().ok_or_else(|| SimError::Control("lut placement needs lookup tables".into()))?;
        if luts.len() != ctx.library.len() {
            return Err(SimError::Control(format!("{} lookup tables for {} trajectories", luts.len(), ctx.library.len())));
        }
        let slopes = ctx
            .library
            .trajectories()
            .iter()
            .map(|t| nominal_slope(t, &ctx.config.params, &ctx.placement, ctx.prediction_dt))
            .collect();
        Ok(Self { luts, slopes, desired: ctx.desired, range: ctx.placement })
    }
}

impl PlacementStrategy for LutPlacement {
    fn name(&self) -> &'static str {
        "lut"
    }

    fn place(&mut self, req: &PlacementRequest<'_>) -> Placement {
        let lut = &self.luts[req.traj_index];
        let (a, b, c) = lut.coordinates(&req.state, req.phase_time);
        let (raw, outside) = lut.table().query_flagged(a, b, c);
        let shift = match self.slopes[req.traj_index] {
            Some(slope) => self.desired.offset(req.traj, req.commanded_speed) / slope,
            None => 0.0,
        };
        Placement { y: (raw + shift).clamp(self.range.y_min, self.range.y_max), fallback: outside }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regulated {
    Momentum,
    Angle,
}

/// Two predictions and a secant at every query.
pub struct OnlinePlacement {
    params: RobotParams,
    desired: DesiredMomentum,
    range: PlacementConfig,
    dt: f64,
    regulated: Regulated,
}

impl OnlinePlacement {
    pub fn new(ctx: &BuildContext, regulated: Regulated) -> Self {
        Self {
            params: ctx.config.params,
            desired: ctx.desired,
            range: ctx.placement,
            dt: ctx.prediction_dt,
            regulated,
        }
    }
}

impl PlacementStrategy for OnlinePlacement {
    fn name(&self) -> &'static str {
        match self.regulated {
            Regulated::Momentum => "online-momentum",
            Regulated::Angle => "online-angle",
        }
    }

    fn place(&mut self, req: &PlacementRequest<'_>) -> Placement {
        let traj = req.traj;
        let nominal = Placement { y: traj.lateral_offset().unwrap_or(self.range.y_min), fallback: true };
        let target = match self.regulated {
            Regulated::Momentum => self.desired.target(traj, req.commanded_speed).map(PlacementTarget::Momentum),
            Regulated::Angle => traj.nominal_lateral_state(traj.duration()).map(|x| PlacementTarget::Angle(x.theta)),
        };
        let Some(target) = target else { return nominal };
        let q = PlacementQuery { state: req.state, phase_time: req.phase_time.min(traj.duration()), target };
        match plan_placement_unclamped(&q, traj, &self.params, self.dt, &self.range) {
            Ok(out) => Placement { y: self.range.clamp(out).y_des, fallback: out.fallback },
            Err(_) => nominal,
        }
    }
}

/// Always the orbit's own lateral offset.
pub struct NominalPlacement;

impl PlacementStrategy for NominalPlacement {
    fn name(&self) -> &'static str {
        "nominal"
    }

    fn place(&mut self, req: &PlacementRequest<'_>) -> Placement {
        match req.traj.lateral_offset() {
            Some(y) => Placement { y, fallback: false },
            None => Placement { y: 0.0, fallback: true },
        }
    }
}
