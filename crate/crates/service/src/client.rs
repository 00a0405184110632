//! Synchronous MPC client with staleness rejection and hold-last fallback.

use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::time::{Duration, Instant};

use alip_core::model::AlipState;

use crate::wire::{MpcRequest, MpcResponse, RESPONSE_LEN};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClientPolicy {
    pub timeout: Duration,
    /// Consecutive misses during which the last torque is held before
    /// falling back to zero.
    pub max_hold: u32,
}

impl Default for ClientPolicy {
    fn default() -> Self {
        Self { timeout: Duration::from_micros(2000), max_hold: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TorqueSource {
    Fresh,
    Held,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClientReply {
    pub torque: f64,
    pub source: TorqueSource,
    pub rtt: Option<Duration>,
    pub compute_us: Option<u32>,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClientStats {
    pub sent: u64,
    pub fresh: u64,
    pub misses: u64,
    pub stale_discarded: u64,
}

pub struct MpcClient {
    socket: UdpSocket,
    policy: ClientPolicy,
    epoch: Instant,
    seq: u32,
    last_torque: Option<f64>,
    consecutive_misses: u32,
    stats: ClientStats,
}

impl MpcClient {
    pub fn connect(server: SocketAddr, policy: ClientPolicy) -> io::Result<Self> {
        if policy.timeout.is_zero() {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "client timeout must be positive"));
        }
        let local: SocketAddr = if server.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" }.parse().expect("literal address");
        let socket = UdpSocket::bind(local)?;
        socket.connect(server)?;
        Ok(Self {
            socket,
            policy,
            epoch: Instant::now(),
            seq: 0,
            last_torque: None,
            consecutive_misses: 0,
            stats: ClientStats::default(),
        })
    }

    pub fn policy(&self) -> ClientPolicy {
        self.policy
    }

    pub fn set_policy(&mut self, policy: ClientPolicy) {
        if !policy.timeout.is_zero() {
            self.policy = policy;
        }
    }

    pub fn stats(&self) -> ClientStats {
        self.stats
    }

    /// Sequence number of the most recent request.
    pub fn last_seq(&self) -> u32 {
        self.seq
    }

    /// Sends one request and waits up to the policy timeout for its answer.
    pub fn query(&mut self, state: &AlipState, phase_time: f64, traj_id: u16, incline_deg: f64) -> ClientReply {
        self.seq = self.seq.wrapping_add(1);
        let request = MpcRequest {
            seq: self.seq,
            sent_us: u64::try_from(self.epoch.elapsed().as_micros()).unwrap_or(u64::MAX),
            traj_id,
            theta: state.theta,
            momentum: state.momentum,
            phase_time,
            incline_deg,
        };
        let start = Instant::now();
        self.stats.sent += 1;
        let answer = match self.socket.send(&request.encode()) {
            Ok(_) => self.await_response(start + self.policy.timeout),
            Err(_) => None,
        };
        match answer {
            Some(resp) => {
                self.stats.fresh += 1;
                self.consecutive_misses = 0;
                self.last_torque = Some(resp.torque);
                ClientReply {
                    torque: resp.torque,
                    source: TorqueSource::Fresh,
                    rtt: Some(start.elapsed()),
                    compute_us: Some(resp.compute_us),
                    converged: resp.converged,
                }
            }
            None => self.miss(),
        }
    }

    fn await_response(&mut self, deadline: Instant) -> Option<MpcResponse> {
        let mut buf = [0u8; 64];
        loop {
            let remaining = deadline.checked_duration_since(Instant::now()).filter(|d| !d.is_zero())?;
            self.socket.set_read_timeout(Some(remaining)).ok()?;
            let n = match self.socket.recv(&mut buf) {
                Ok(n) => n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(_) => return None,
            };
            if n != RESPONSE_LEN {
                continue;
            }
            let Ok(resp) = MpcResponse::decode(&buf[..n]) else { continue };
            if resp.seq == self.seq {
                return Some(resp);
            }
            self.stats.stale_discarded += 1;
        }
    }

    fn miss(&mut self) -> ClientReply {
        self.stats.misses += 1;
        self.consecutive_misses = self.consecutive_misses.saturating_add(1);
        let (torque, source) = match self.last_torque {
            Some(t) if self.consecutive_misses <= self.policy.max_hold => (t, TorqueSource::Held),
            _ => (0.0, TorqueSource::Zero),
        };
        ClientReply { torque, source, rtt: None, compute_us: None, converged: false }
    }
}
