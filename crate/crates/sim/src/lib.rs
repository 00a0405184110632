//! Closed-loop reduced-order gait simulator.
//!
//! A [`Scenario`] describes terrain, belt and command profiles,
//! disturbances and which torque source and placement strategy to use; the
//! [`Harness`] resolves those names through a [`strategy::Registry`] and
//! runs [`sim::run_closed_loop`] at 2 kHz.

use std::path::PathBuf;
use std::sync::Arc;

use alip_core::lut::{LateralLut, LutError};
use alip_core::model::RobotParams;
use alip_core::synth::{default_profile, synthesize_nominal};
use alip_core::textfmt::ParseError;
use alip_core::trajectory::TrajError;
use alip_core::TrajectoryLibrary;
use alip_service::ControllerConfig;
use thiserror::Error;

pub mod export;
pub mod scenario;
pub mod sim;
pub mod strategy;

pub use scenario::{Disturbance, Horizon, Profile, Scenario};
pub use sim::{run_closed_loop, RunLog, SimOptions, StepRecord, TickRecord};
pub use strategy::{BuildContext, PlacementStrategy, Registry, TorqueSource};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("unknown {0}")]
    UnknownStrategy(String),
    #[error("control source: {0}")]
    Control(String),
    #[error(transparent)]
    Trajectory(#[from] TrajError),
    #[error(transparent)]
    Lut(#[from] LutError),
    #[error("log is empty")]
    EmptyLog,
    #[error("{path}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub const DEFAULT_INCLINES: [f64; 3] = [0.0, 8.0, 15.0];
pub const DEFAULT_SPEED: f64 = 0.5;
pub const DEFAULT_PERIOD: f64 = 0.4;

/// Flat, 8° and 15° orbits at 0.5 m/s with 0.4 s steps.
pub fn default_library(params: &RobotParams) -> Result<TrajectoryLibrary, SimError> {
    synthesize_library(&DEFAULT_INCLINES, DEFAULT_SPEED, DEFAULT_PERIOD, params)
}

pub fn synthesize_library(inclines: &[f64], speed: f64, period: f64, params: &RobotParams) -> Result<TrajectoryLibrary, SimError> {
    let profile = default_profile();
    let trajs = std::thread::scope(|s| {
        let handles: Vec<_> = inclines
            .iter()
            .map(|&inc| {
                let profile = &profile;
                s.spawn(move || synthesize_nominal(inc, speed, period, params, profile))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("synthesis panicked")).collect::<Result<Vec<_>, _>>()
    })?;
    Ok(TrajectoryLibrary::new(trajs)?)
}

/// Registry plus shared resources; runs scenarios by name lookup.
pub struct Harness {
    pub registry: Registry,
    pub context: BuildContext,
}

impl Harness {
    pub fn new(library: TrajectoryLibrary, config: ControllerConfig) -> Self {
        Self { registry: Registry::default(), context: BuildContext::new(Arc::new(library), config) }
    }

    pub fn with_luts(mut self, luts: Arc<Vec<LateralLut>>) -> Self {
        self.context.luts = Some(luts);
        self
    }

    pub fn library(&self) -> &TrajectoryLibrary {
        &self.context.library
    }

    /// Builds the lateral tables if none were supplied.
    pub fn ensure_luts(&mut self) -> Result<Arc<Vec<LateralLut>>, SimError> {
        if let Some(l) = &self.context.luts {
            return Ok(Arc::clone(l));
        }
        let ctx = &self.context;
        let luts = Arc::new(sim::build_luts(&ctx.library, &ctx.config.params, &ctx.placement, ctx.prediction_dt)?);
        self.context.luts = Some(Arc::clone(&luts));
        Ok(luts)
    }

    pub fn run(&mut self, scenario: &Scenario) -> Result<RunLog, SimError> {
        if scenario.placement == "lut" {
            self.ensure_luts()?;
        }
        let mut context = self.context.clone();
        context.desired.speed_gain = scenario.speed_gain;
        let mut torque = self.registry.torque_source(&scenario.control, &context)?;
        let mut placement = self.registry.placement_strategy(&scenario.placement, &context)?;
        let opts = SimOptions {
            params: context.config.params,
            torque_limit: context.config.mpc.torque_limit,
            placement: context.placement,
            desired: context.desired,
        };
        run_closed_loop(scenario, &context.library, torque.as_mut(), placement.as_mut(), &opts)
    }
}
