//! Fixed-rate latency probe.

use std::fmt;
use std::io;
use std::net::SocketAddr;
use std::time::{Duration, Instant};

use alip_core::model::AlipState;
use alip_core::NominalTrajectory;

use crate::client::{ClientPolicy, MpcClient, TorqueSource};

#[derive(Debug, Clone)]
pub struct ProbeOptions {
    pub rate_hz: f64,
    pub duration: Duration,
    pub traj_id: u16,
    /// Synthetic states are drawn around this orbit; without it a fixed
    /// off-nominal state is used.
    pub nominal: Option<NominalTrajectory>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub requests: u64,
    pub responses: u64,
    pub rtt_p50_us: f64,
    pub rtt_p99_us: f64,
    pub rtt_max_us: f64,
    pub compute_p50_us: f64,
    pub compute_p99_us: f64,
    pub compute_max_us: f64,
    pub compute_mean_us: f64,
}

impl ProbeReport {
    pub fn loss_percent(&self) -> f64 {
        if self.requests == 0 {
            return 0.0;
        }
        100.0 * (self.requests - self.responses) as f64 / self.requests as f64
    }
}

impl fmt::Display for ProbeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "requests {}", self.requests)?;
        writeln!(f, "responses {}", self.responses)?;
        writeln!(f, "loss_pct {:.3}", self.loss_percent())?;
        writeln!(f, "rtt_p50_us {:.1}", self.rtt_p50_us)?;
        writeln!(f, "rtt_p99_us {:.1}", self.rtt_p99_us)?;
        writeln!(f, "rtt_max_us {:.1}", self.rtt_max_us)?;
        writeln!(f, "compute_p50_us {:.1}", self.compute_p50_us)?;
        writeln!(f, "compute_p99_us {:.1}", self.compute_p99_us)?;
        writeln!(f, "compute_max_us {:.1}", self.compute_max_us)?;
        writeln!(f, "compute_mean_us {:.1}", self.compute_mean_us)
    }
}

/// Nearest-rank percentile of an ascending slice; 0 when empty.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn synthetic(k: u64, nominal: Option<&NominalTrajectory>) -> (AlipState, f64) {
    // Deterministic pseudo-phase sweep with a small bounded perturbation.
    let wobble = ((k as f64) * 0.7).sin();
    match nominal {
        Some(traj) => {
            let t = traj.duration() * ((k % 37) as f64 / 37.0);
            let x = traj.nominal_state(t);
            (AlipState::new(x.theta + 0.02 * wobble, x.momentum * (1.0 + 0.05 * wobble)), t)
        }
        None => (AlipState::new(0.05 + 0.02 * wobble, -5.0), 0.0),
    }
}

/// Streams requests at `rate_hz` for `duration`. A request whose answer has
/// not arrived within one period counts as lost.
pub fn latency_probe(target: SocketAddr, opts: &ProbeOptions) -> io::Result<ProbeReport> {
    if !(opts.rate_hz.is_finite() && opts.rate_hz > 0.0) {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "rate must be positive"));
    }
    let period = Duration::from_secs_f64(1.0 / opts.rate_hz);
    let mut client = MpcClient::connect(target, ClientPolicy { timeout: period, max_hold: 0 })?;
    let total = (opts.duration.as_secs_f64() * opts.rate_hz).round() as u64;
    let mut rtt = Vec::with_capacity(total as usize);
    let mut compute = Vec::with_capacity(total as usize);
    let start = Instant::now();
    for k in 0..total {
        let due = start + period.mul_f64(k as f64);
        if let Some(wait) = due.checked_duration_since(Instant::now()) {
            std::thread::sleep(wait);
        }
        let (state, phase) = synthetic(k, opts.nominal.as_ref());
        let incline = opts.nominal.as_ref().map_or(0.0, |t| t.incline_deg());
        let reply = client.query(&state, phase, opts.traj_id, incline);
        if reply.source == TorqueSource::Fresh {
            rtt.push(reply.rtt.map_or(0.0, |d| d.as_secs_f64() * 1e6));
            compute.push(f64::from(reply.compute_us.unwrap_or(0)));
        }
    }
    rtt.sort_by(f64::total_cmp);
    compute.sort_by(f64::total_cmp);
    let mean = if compute.is_empty() { 0.0 } else { compute.iter().sum::<f64>() / compute.len() as f64 };
    Ok(ProbeReport {
        requests: total,
        responses: rtt.len() as u64,
        rtt_p50_us: percentile(&rtt, 50.0),
        rtt_p99_us: percentile(&rtt, 99.0),
        rtt_max_us: rtt.last().copied().unwrap_or(0.0),
        compute_p50_us: percentile(&compute, 50.0),
        compute_p99_us: percentile(&compute, 99.0),
        compute_max_us: compute.last().copied().unwrap_or(0.0),
        compute_mean_us: mean,
    })
}
