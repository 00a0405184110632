//! Fixed-rate closed-loop hybrid simulation.

use std::f64::consts::FRAC_PI_3;

use alip_core::gait::Plane;
use alip_core::impact::FootDisplacement;
use alip_core::lut::{build_lookup_table, LateralLut, LutAxesSpec};
use alip_core::model::{dynamics, euler_step, AlipState, RobotParams};
use alip_core::placement::{DesiredMomentum, PlacementConfig};
use alip_core::{NominalTrajectory, TrajectoryLibrary};

use crate::scenario::{Horizon, Scenario};
use crate::strategy::{PlacementRequest, PlacementStrategy, TorqueRequest, TorqueSource};
use crate::SimError;

pub const TICK_RATE_HZ: f64 = 2000.0;
pub const FALL_ANGLE: f64 = FRAC_PI_3;

/// Event bits carried by a [`TickRecord`].
pub mod event {
    pub const IMPACT: u8 = 1;
    pub const SWITCH: u8 = 2;
    pub const FALLBACK: u8 = 4;
    pub const DISTURBANCE: u8 = 8;
    pub const FALL: u8 = 16;

    pub const NAMES: [(u8, &str); 5] =
        [(IMPACT, "impact"), (SWITCH, "switch"), (FALLBACK, "fallback"), (DISTURBANCE, "disturbance"), (FALL, "fall")];

    /// `|`-joined names, empty for none.
    pub fn describe(bits: u8) -> String {
        NAMES.iter().filter(|(b, _)| bits & b != 0).map(|(_, n)| *n).collect::<Vec<_>>().join("|")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub time: f64,
    pub step: usize,
    pub phase_time: f64,
    pub traj_index: usize,
    pub incline_deg: f64,
    pub sagittal: AlipState,
    pub frontal: AlipState,
    pub torque: f64,
    pub y_des: f64,
    pub latency_us: f64,
    pub events: u8,
}

impl TickRecord {
    /// Legs alternate every step; the reduced model itself is symmetric.
    pub fn leg(&self) -> &'static str {
        if self.step % 2 == 0 { "left" } else { "right" }
    }
}

/// One completed step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub index: usize,
    pub traj_index: usize,
    pub start_time: f64,
    /// States at the start of the step, after the previous impact.
    pub sagittal_start: AlipState,
    pub frontal_start: AlipState,
    pub sagittal_end: AlipState,
    pub frontal_end: AlipState,
    pub y_des: f64,
    pub max_abs_torque: f64,
    pub mean_abs_torque: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fall {
    pub time: f64,
    pub step: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub scenario: String,
    pub names: Vec<String>,
    pub torque_limit: f64,
    pub ticks: Vec<TickRecord>,
    pub steps: Vec<StepRecord>,
    pub fall: Option<Fall>,
}

impl RunLog {
    pub fn trajectory_name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn completed(&self) -> bool {
        self.fall.is_none()
    }

    pub fn max_abs_torque(&self) -> f64 {
        self.ticks.iter().map(|t| t.torque.abs()).fold(0.0, f64::max)
    }

    pub fn mean_abs_torque(&self) -> f64 {
        if self.ticks.is_empty() {
            return 0.0;
        }
        self.ticks.iter().map(|t| t.torque.abs()).sum::<f64>() / self.ticks.len() as f64
    }
}

pub struct SimOptions {
    pub params: RobotParams,
    pub torque_limit: f64,
    pub placement: PlacementConfig,
    pub desired: DesiredMomentum,
}

struct StepAccumulator {
    index: usize,
    traj_index: usize,
    start_time: f64,
    sagittal_start: AlipState,
    frontal_start: AlipState,
    max_abs: f64,
    sum_abs: f64,
    ticks: usize,
}

impl StepAccumulator {
    fn new(index: usize, traj_index: usize, start_time: f64, s: AlipState, f: AlipState) -> Self {
        Self { index, traj_index, start_time, sagittal_start: s, frontal_start: f, max_abs: 0.0, sum_abs: 0.0, ticks: 0 }
    }

    fn finish(&self, s: AlipState, f: AlipState, y_des: f64) -> StepRecord {
        StepRecord {
            index: self.index,
            traj_index: self.traj_index,
            start_time: self.start_time,
            sagittal_start: self.sagittal_start,
            frontal_start: self.frontal_start,
            sagittal_end: s,
            frontal_end: f,
            y_des,
            max_abs_torque: self.max_abs,
            mean_abs_torque: if self.ticks == 0 { 0.0 } else { self.sum_abs / self.ticks as f64 },
        }
    }
}

/// Horizontal foot travel of a step and the terrain rise it implies.
fn terrain_rise(traj: &NominalTrajectory, incline_deg: f64) -> f64 {
    traj.step_displacement().horizontal.abs() * incline_deg.to_radians().tan()
}

/// Runs the scenario at 2 kHz. A fall ends the run early and is recorded in
/// the log rather than returned as an error.
pub fn run_closed_loop(
    scenario: &Scenario,
    library: &TrajectoryLibrary,
    torque_source: &mut dyn TorqueSource,
    placement: &mut dyn PlacementStrategy,
    opts: &SimOptions,
) -> Result<RunLog, SimError> {
    scenario.validate()?;
    if library.trajectories().iter().any(|t| t.frontal().is_none()) {
        return Err(SimError::Scenario("every trajectory needs a frontal orbit".into()));
    }
    let params = &opts.params;
    let dt = 1.0 / TICK_RATE_HZ;
    let max_ticks = match scenario.horizon {
        Horizon::Duration(d) => (d * TICK_RATE_HZ).round() as usize,
        Horizon::Steps(_) => usize::MAX,
    };
    let max_steps = match scenario.horizon {
        Horizon::Steps(n) => n,
        Horizon::Duration(_) => usize::MAX,
    };

    let mut log = RunLog {
        scenario: scenario.name.clone(),
        names: library.trajectories().iter().map(|t| t.name().to_string()).collect(),
        torque_limit: opts.torque_limit,
        ticks: Vec::new(),
        steps: Vec::new(),
        fall: None,
    };

    let mut traj_index = library.select_index(scenario.incline.at(0.0));
    let traj = &library.trajectories()[traj_index];
    let mut sag = traj.nominal_state(0.0);
    let mut front = traj.nominal_lateral_state(0.0).expect("checked above");
    front.momentum *= 1.0 + scenario.frontal_perturbation;

    let mut step = 0usize;
    let mut phase_tick = 0usize;
    let mut torque = 0.0;
    let mut latency = 0.0;
    let mut y_des = traj.lateral_offset().unwrap_or(0.0);
    let mut pending = 0u8;
    let mut next_disturbance = 0usize;
    let mut acc = StepAccumulator::new(0, traj_index, 0.0, sag, front);

    for tick in 0..max_ticks {
        let time = tick as f64 * dt;
        let traj = &library.trajectories()[traj_index];
        let phase = phase_tick as f64 * dt;
        let incline = scenario.incline.at(time);
        let mut events = std::mem::take(&mut pending);

        while let Some(d) = scenario.disturbances.get(next_disturbance).filter(|d| d.time <= time) {
            match d.plane {
                Plane::Sagittal => sag.momentum += d.momentum,
                Plane::Frontal => front.momentum += d.momentum,
            }
            events |= event::DISTURBANCE;
            next_disturbance += 1;
        }

        if phase_tick % scenario.mpc_every == 0 {
            let s = torque_source.torque(&TorqueRequest { state: sag, phase_time: phase, traj_index, traj, incline_deg: incline });
            torque = s.torque.clamp(-opts.torque_limit, opts.torque_limit);
            latency = s.latency_us;
            let p = placement.place(&PlacementRequest {
                state: front,
                phase_time: phase,
                traj_index,
                traj,
                commanded_speed: scenario.commanded_speed(time),
            });
            y_des = p.y;
            if s.fallback || p.fallback {
                events |= event::FALLBACK;
            }
        }

        let mut record = TickRecord {
            time,
            step,
            phase_time: phase,
            traj_index,
            incline_deg: incline,
            sagittal: sag,
            frontal: front,
            torque,
            y_des,
            latency_us: latency,
            events,
        };
        if let Some(reason) = fall_reason(&sag, &front) {
            record.events |= event::FALL;
            log.ticks.push(record);
            log.fall = Some(Fall { time, step, reason });
            return Ok(log);
        }
        log.ticks.push(record);
        acc.max_abs = acc.max_abs.max(torque.abs());
        acc.sum_abs += torque.abs();
        acc.ticks += 1;

        let sag_profile = &traj.sagittal().profile;
        let front_model = traj.frontal().expect("checked above");
        let advanced = euler_step(|t, x| dynamics(t, x, params, sag_profile, torque), phase, &sag, dt)
            .and_then(|s| Ok((s, euler_step(|t, x| dynamics(t, x, params, &front_model.profile, 0.0), phase, &front, dt)?)));
        match advanced {
            Ok((s, f)) => (sag, front) = (s, f),
            Err(e) => {
                log.fall = Some(Fall { time: time + dt, step, reason: format!("integration failed: {e}") });
                return Ok(log);
            }
        }
        phase_tick += 1;

        let steps_per_phase = (traj.duration() * TICK_RATE_HZ).round() as usize;
        if phase_tick < steps_per_phase {
            continue;
        }
        log.steps.push(acc.finish(sag, front, y_des));
        let t_next = time + dt;
        let terrain = terrain_rise(traj, scenario.incline.at(t_next));
        let nominal = traj.step_displacement();
        let sag_disp = FootDisplacement::new(nominal.horizontal, terrain);
        let r_plus = traj.sagittal().profile.length_at(0.0) - (terrain - nominal.vertical);
        let front_disp = FootDisplacement::new(y_des, terrain);
        let swapped = traj
            .sagittal()
            .switch_with(&sag, &sag_disp, Some(r_plus), params)
            .and_then(|s| Ok((s, front_model.switch_with(&front, &front_disp, None, params)?)));
        match swapped {
            Ok((s, f)) => (sag, front) = (s, f),
            Err(e) => {
                log.fall = Some(Fall { time: t_next, step, reason: format!("impact failed: {e}") });
                return Ok(log);
            }
        }
        step += 1;
        phase_tick = 0;
        pending |= event::IMPACT;
        let next = library.select_index(scenario.incline.at(t_next));
        if next != traj_index {
            traj_index = next;
            pending |= event::SWITCH;
        }
        if step >= max_steps {
            break;
        }
        acc = StepAccumulator::new(step, traj_index, t_next, sag, front);
    }
    Ok(log)
}

fn fall_reason(sag: &AlipState, front: &AlipState) -> Option<String> {
    if !sag.is_finite() || !front.is_finite() {
        return Some("non-finite state".into());
    }
    if sag.theta.abs() >= FALL_ANGLE {
        return Some(format!("sagittal angle {:.3} rad", sag.theta));
    }
    if front.theta.abs() >= FALL_ANGLE {
        return Some(format!("frontal angle {:.3} rad", front.theta));
    }
    None
}

/// Builds one lateral table per trajectory, in parallel.
pub fn build_luts(
    library: &TrajectoryLibrary,
    params: &RobotParams,
    placement: &PlacementConfig,
    dt: f64,
) -> Result<Vec<LateralLut>, SimError> {
    let spec = LutAxesSpec::default();
    std::thread::scope(|scope| {
        let handles: Vec<_> = library
            .trajectories()
            .iter()
            .map(|traj| {
                scope.spawn(move || {
                    let l_des = DesiredMomentum::nominal(traj)
                        .ok_or_else(|| SimError::Scenario(format!("{} has no frontal orbit", traj.name())))?;
                    Ok(build_lookup_table(traj, params, &spec, l_des, dt, placement)?.0)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("table build panicked")).collect()
    })
}
