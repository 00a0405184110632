//! Scenario files (`ALIPSCEN 1`).
//!
//! ```text
//! ALIPSCEN 1
//! name incline_sweep
//! duration 60                 # or: steps 150
//! incline 0 0                 # t [s], degrees; piecewise linear
//! incline 30 20
//! belt 0 0.9                  # t [s], m/s
//! command 0 0                 # t [s], m/s operator command on top of the belt
//! disturb 5.0 sagittal 2.0    # t [s], plane, impulsive L offset
//! random_disturbances 4 10 50 1.5 frontal   # count, window start/end, max |dL|, plane
//! seed 7
//! frontal_perturbation 0.2    # initial frontal L scaled by 1 + value
//! control inprocess           # or: udp 127.0.0.1:9100 [timeout_us], passive
//! placement lut               # lut | online-momentum | online-angle | nominal
//! speed_gain 0.1
//! mpc_every 40                # control ticks per torque query
//! library ../data/trajectories.txt
//! ```
//!
//! Profiles hold their first/last value outside the listed points; an absent
//! profile is zero.

use std::path::{Path, PathBuf};

use alip_core::gait::Plane;
use alip_core::textfmt::{self, Line, ParseError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::SimError;

pub const MAGIC: &str = "ALIPSCEN";

/// Piecewise-linear function of time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Profile {
    points: Vec<(f64, f64)>,
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Self { points: vec![(0.0, value)] }
    }

    /// Points must have strictly increasing times.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, String> {
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err("profile points must be finite".into());
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err("profile times must be strictly increasing".into());
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn at(&self, t: f64) -> f64 {
        let p = &self.points;
        match p.len() {
            0 => 0.0,
            _ if t <= p[0].0 => p[0].1,
            n if t >= p[n - 1].0 => p[n - 1].1,
            _ => {
                let i = p.partition_point(|&(ti, _)| ti <= t);
                let ((t0, v0), (t1, v1)) = (p[i - 1], p[i]);
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    fn min_value(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(0.0, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    pub time: f64,
    pub plane: Plane,
    pub momentum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Duration(f64),
    Steps(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub horizon: Horizon,
    pub incline: Profile,
    pub belt: Profile,
    pub command: Profile,
    pub disturbances: Vec<Disturbance>,
    pub seed: u64,
    pub frontal_perturbation: f64,
    /// Torque source name followed by its arguments.
    pub control: Vec<String>,
    pub placement: String,
    pub speed_gain: f64,
    pub mpc_every: usize,
    pub library: Option<PathBuf>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            horizon: Horizon::Duration(10.0),
            incline: Profile::default(),
            belt: Profile::default(),
            command: Profile::default(),
            disturbances: Vec::new(),
            seed: 0,
            frontal_perturbation: 0.0,
            control: vec!["inprocess".into()],
            placement: "lut".into(),
            speed_gain: 0.1,
            mpc_every: 40,
            library: None,
        }
    }
}

fn plane(line: &Line, token: &str) -> Result<Plane, ParseError> {
    match token {
        "sagittal" => Ok(Plane::Sagittal),
        "frontal" => Ok(Plane::Frontal),
        other => Err(line.error(format!("unknown plane `{other}`"))),
    }
}

fn integer<T: std::str::FromStr>(line: &Line, index: usize) -> Result<T, ParseError> {
    line.args[index]
        .parse()
        .map_err(|_| line.error(format!("`{}` is not a non-negative integer", line.args[index])))
}

impl Scenario {
    /// Commanded CoM speed: belt plus operator command.
    pub fn commanded_speed(&self, t: f64) -> f64 {
        self.belt.at(t) + self.command.at(t)
    }

    pub fn from_text(text: &str) -> Result<Self, SimError> {
        let mut sc = Scenario::default();
        let (mut incline, mut belt, mut command) = (Vec::new(), Vec::new(), Vec::new());
        let mut random = Vec::new();
        for line in textfmt::parse(text, MAGIC, 1)? {
            match line.keyword {
                "name" => {
                    line.expect_args(1)?;
                    sc.name = line.args[0].to_string();
                }
                "duration" => {
                    line.expect_args(1)?;
                    sc.horizon = Horizon::Duration(line.float(0)?);
                }
                "steps" => {
                    line.expect_args(1)?;
                    sc.horizon = Horizon::Steps(integer(&line, 0)?);
                }
                "incline" | "belt" | "command" => {
                    line.expect_args(2)?;
                    let p = (line.float(0)?, line.float(1)?);
                    match line.keyword {
                        "incline" => incline.push(p),
                        "belt" => belt.push(p),
                        _ => command.push(p),
                    }
                }
                "disturb" => {
                    line.expect_args(3)?;
                    sc.disturbances.push(Disturbance {
                        time: line.float(0)?,
                        plane: plane(&line, line.args[1])?,
                        momentum: line.float(2)?,
                    });
                }
                "random_disturbances" => {
                    line.expect_args(5)?;
                    let count: usize = integer(&line, 0)?;
                    let (t0, t1, mag) = (line.float(1)?, line.float(2)?, line.float(3)?);
                    if !(t1 >= t0 && mag >= 0.0) {
                        return Err(line.error("need start <= end and magnitude >= 0").into());
                    }
                    random.push((count, t0, t1, mag, plane(&line, line.args[4])?));
                }
                "seed" => {
                    line.expect_args(1)?;
                    sc.seed = integer(&line, 0)?;
                }
                "frontal_perturbation" => {
                    line.expect_args(1)?;
                    sc.frontal_perturbation = line.float(0)?;
                }
                "control" => {
                    if line.args.is_empty() {
                        return Err(line.error("expected a control source").into());
                    }
                    sc.control = line.args.iter().map(|s| s.to_string()).collect();
                }
                "placement" => {
                    line.expect_args(1)?;
                    sc.placement = line.args[0].to_string();
                }
                "speed_gain" => {
                    line.expect_args(1)?;
                    sc.speed_gain = line.float(0)?;
                }
                "mpc_every" => {
                    line.expect_args(1)?;
                    sc.mpc_every = integer(&line, 0)?;
                }
                "library" => {
                    line.expect_args(1)?;
                    sc.library = Some(PathBuf::from(line.args[0]));
                }
                other => return Err(line.error(format!("unknown key `{other}`")).into()),
            }
        }
        let profile = |pts, what: &str| Profile::new(pts).map_err(|m| SimError::Scenario(format!("{what}: {m}")));
        sc.incline = profile(incline, "incline")?;
        sc.belt = profile(belt, "belt")?;
        sc.command = profile(command, "command")?;

        let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
        for (count, t0, t1, mag, plane) in random {
            for _ in 0..count {
                let time = if t1 > t0 { rng.random_range(t0..t1) } else { t0 };
                let momentum = if mag > 0.0 { rng.random_range(-mag..=mag) } else { 0.0 };
                sc.disturbances.push(Disturbance { time, plane, momentum });
            }
        }
        sc.disturbances.sort_by(|a, b| a.time.total_cmp(&b.time));
        sc.validate()?;
        Ok(sc)
    }

    /// Reads a scenario; a relative `library` path is resolved against the
    /// scenario's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io { path: path.to_path_buf(), source })?;
        let mut sc = Self::from_text(&text)?;
        if let (Some(lib), Some(dir)) = (&sc.library, path.parent()) {
            if lib.is_relative() {
                sc.library = Some(dir.join(lib));
            }
        }
        Ok(sc)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Scenario(m.to_string()));
        match self.horizon {
            Horizon::Duration(d) if !(d.is_finite() && d > 0.0) => return bad("duration must be positive"),
            Horizon::Steps(0) => return bad("step count must be positive"),
            _ => {}
        }
        if self.belt.min_value() < 0.0 || self.command.min_value() < 0.0 {
            return bad("speeds must be non-negative");
        }
        if self.mpc_every == 0 {
            return bad("mpc_every must be positive");
        }
        if !(self.frontal_perturbation.is_finite() && self.frontal_perturbation > -1.0) {
            return bad("frontal_perturbation must be greater than -1");
        }
        if !(self.speed_gain.is_finite()) {
            return bad("speed_gain must be finite");
        }
        if self.disturbances.iter().any(|d| !(d.time.is_finite() && d.momentum.is_finite())) {
            return bad("disturbances must be finite");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_interpolates_and_holds() {
        let p = Profile::new(vec![(0.0, 0.0), (10.0, 20.0), (20.0, 0.0)]).unwrap();
        assert_eq!(p.at(-1.0), 0.0);
        assert_eq!(p.at(5.0), 10.0);
        assert_eq!(p.at(10.0), 20.0);
        assert_eq!(p.at(15.0), 10.0);
        assert_eq!(p.at(99.0), 0.0);
        assert_eq!(Profile::default().at(3.0), 0.0);
        assert!(Profile::new(vec![(1.0, 0.0), (1.0, 2.0)]).is_err());
    }

    #[test]
    fn parses_full_scenario() {
        let text = "ALIPSCEN 1\nname demo\nsteps 12\nincline 0 0\nincline 4 8\nbelt 0 0.2\nbelt 2 1.5\n\
                    disturb 1.5 sagittal -2\ncontrol udp 127.0.0.1:9000 5000\nplacement online-angle\nseed 3\n";
        let sc = Scenario::from_text(text).unwrap();
        assert_eq!(sc.name, "demo");
        assert_eq!(sc.horizon, Horizon::Steps(12));
        assert_eq!(sc.incline.at(2.0), 4.0);
        assert!((sc.commanded_speed(1.0) - 0.85).abs() < 1e-15);
        assert_eq!(sc.disturbances, vec![Disturbance { time: 1.5, plane: Plane::Sagittal, momentum: -2.0 }]);
        assert_eq!(sc.control, ["udp", "127.0.0.1:9000", "5000"]);
        assert_eq!(sc.placement, "online-angle");
    }

    #[test]
    fn random_disturbances_follow_seed() {
        let text = |seed| format!("ALIPSCEN 1\nseed {seed}\nrandom_disturbances 5 1 9 2 frontal\n");
        let a = Scenario::from_text(&text(1)).unwrap();
        assert_eq!(a, Scenario::from_text(&text(1)).unwrap());
        assert_ne!(a.disturbances, Scenario::from_text(&text(2)).unwrap().disturbances);
        assert_eq!(a.disturbances.len(), 5);
        assert!(a.disturbances.windows(2).all(|w| w[0].time <= w[1].time));
        assert!(a.disturbances.iter().all(|d| (1.0..9.0).contains(&d.time) && d.momentum.abs() <= 2.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Scenario::from_text("ALIPSCEN 1\nbelt 0 -0.5\n").is_err());
        assert!(Scenario::from_text("ALIPSCEN 1\nsteps 0\n").is_err());
        assert!(Scenario::from_text("ALIPSCEN 1\nwobble 3\n").is_err());
        assert!(Scenario::from_text("ALIPSCEN 1\ndisturb 1 vertical 2\n").is_err());
        assert!(Scenario::from_text("ALIPTRAJ 1\n").is_err());
    }
}
