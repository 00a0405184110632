//! Controller configuration file (`ALIPCFG 1`).
//!
//! ```text
//! ALIPCFG 1
//! mass 32
//! gravity 9.81
//! horizon 20
//! dt 0.02
//! torque_limit 23
//! q 10 0 1            # theta-theta, theta-L, L-L
//! r 0.1
//! q_terminal 100 0 10
//! max_iterations 200
//! kkt_tolerance 1e-8
//! ```
//!
//! Every key is optional and keeps its default when absent.

use std::path::{Path, PathBuf};

use alip_core::model::{ModelError, RobotParams};
use alip_core::mpc::{MpcConfig, MpcError, Weight};
use alip_core::textfmt::{self, format_float, ParseError};
use thiserror::Error;

const MAGIC: &str = "ALIPCFG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Mpc(#[from] MpcError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub params: RobotParams,
    pub mpc: MpcConfig,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            params: RobotParams::with_mass(32.0).expect("positive mass"),
            mpc: MpcConfig::default(),
        }
    }
}

impl ControllerConfig {
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut mass = 32.0;
        let mut gravity = RobotParams::STANDARD_GRAVITY;
        let mut mpc = MpcConfig::default();
        for line in textfmt::parse(text, MAGIC, 1)? {
            let count = |line: &textfmt::Line| -> Result<usize, ParseError> {
                line.expect_args(1)?;
                line.args[0]
                    .parse()
                    .map_err(|_| line.error(format!("`{}` is not a count", line.args[0])))
            };
            let weight = |line: &textfmt::Line| -> Result<Weight, ParseError> {
                line.expect_args(3)?;
                let v = line.floats_from(0)?;
                Ok(Weight::new(v[0], v[1], v[1], v[2]))
            };
            let scalar = |line: &textfmt::Line| -> Result<f64, ParseError> {
                line.expect_args(1)?;
                line.float(0)
            };
            match line.keyword {
                "mass" => mass = scalar(&line)?,
                "gravity" => gravity = scalar(&line)?,
                "horizon" => mpc.horizon = count(&line)?,
                "dt" => mpc.dt = scalar(&line)?,
                "torque_limit" => mpc.torque_limit = scalar(&line)?,
                "q" => mpc.q = weight(&line)?,
                "r" => mpc.r = scalar(&line)?,
                "q_terminal" => mpc.q_terminal = weight(&line)?,
                "max_iterations" => mpc.max_iterations = count(&line)?,
                "kkt_tolerance" => mpc.kkt_tolerance = scalar(&line)?,
                other => return Err(line.error(format!("unknown key `{other}`")).into()),
            }
        }
        mpc.validate()?;
        Ok(Self { params: RobotParams::new(mass, gravity)?, mpc })
    }

    pub fn to_text(&self) -> String {
        let w = |m: &Weight| format!("{} {} {}", format_float(m[(0, 0)]), format_float(m[(0, 1)]), format_float(m[(1, 1)]));
        let c = &self.mpc;
        format!(
            "{MAGIC} 1\nmass {}\ngravity {}\nhorizon {}\ndt {}\ntorque_limit {}\nq {}\nr {}\nq_terminal {}\nmax_iterations {}\nkkt_tolerance {}\n",
            format_float(self.params.mass()),
            format_float(self.params.gravity()),
            c.horizon,
            format_float(c.dt),
            format_float(c.torque_limit),
            w(&c.q),
            format_float(c.r),
            w(&c.q_terminal),
            c.max_iterations,
            format_float(c.kkt_tolerance),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_text(&text)
    }
}
