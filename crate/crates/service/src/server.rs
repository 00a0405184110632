//! Single-threaded UDP server hosting the ankle MPC.

use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use alip_core::model::AlipState;
use alip_core::mpc::{solve_ankle_mpc, MpcWorkspace};
use alip_core::TrajectoryLibrary;

use crate::config::ControllerConfig;
use crate::wire::{MpcRequest, MpcResponse, REQUEST_LEN};

const POLL: Duration = Duration::from_millis(50);

#[derive(Debug, Default)]
pub struct ServerStats {
    pub received: AtomicU64,
    pub answered: AtomicU64,
    pub dropped: AtomicU64,
    pub not_converged: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatsSnapshot {
    pub received: u64,
    pub answered: u64,
    pub dropped: u64,
    pub not_converged: u64,
}

impl ServerStats {
    pub fn snapshot(&self) -> StatsSnapshot {
        StatsSnapshot {
            received: self.received.load(Ordering::Relaxed),
            answered: self.answered.load(Ordering::Relaxed),
            dropped: self.dropped.load(Ordering::Relaxed),
            not_converged: self.not_converged.load(Ordering::Relaxed),
        }
    }
}

pub struct Server {
    socket: UdpSocket,
    library: TrajectoryLibrary,
    config: ControllerConfig,
    workspace: MpcWorkspace,
    stats: Arc<ServerStats>,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, library: TrajectoryLibrary, config: ControllerConfig) -> io::Result<Self> {
        let socket = UdpSocket::bind(addr)?;
        socket.set_read_timeout(Some(POLL))?;
        let workspace = MpcWorkspace::for_config(&config.mpc);
        Ok(Self { socket, library, config, workspace, stats: Arc::default() })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.socket.local_addr()
    }

    pub fn stats(&self) -> Arc<ServerStats> {
        Arc::clone(&self.stats)
    }

    /// Answers one request. `None` means the datagram was dropped.
    pub fn handle(&mut self, datagram: &[u8]) -> Option<MpcResponse> {
        let request = MpcRequest::decode(datagram).ok()?;
        let traj = self.library.get(usize::from(request.traj_id))?;
        let state = AlipState::new(request.theta, request.momentum);
        let start = Instant::now();
        let solved = solve_ankle_mpc(&state, request.phase_time, traj, &self.config.mpc, &self.config.params, &mut self.workspace);
        let compute_us = u32::try_from(start.elapsed().as_micros()).unwrap_or(u32::MAX);
        let (torque, converged) = match solved {
            Ok(s) => (s.torque, s.converged),
            Err(_) => (0.0, false),
        };
        Some(MpcResponse { seq: request.seq, torque, compute_us, converged })
    }

    /// Serves until `stop` is set. Checked at least every 50 ms.
    pub fn run(&mut self, stop: &AtomicBool) -> io::Result<()> {
        let mut buf = [0u8; 2048];
        while !stop.load(Ordering::Relaxed) {
            let (n, peer) = match self.socket.recv_from(&mut buf) {
                Ok(v) => v,
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut | io::ErrorKind::Interrupted) => continue,
                Err(e) if e.kind() == io::ErrorKind::ConnectionReset => continue,
                Err(e) => return Err(e),
            };
            self.stats.received.fetch_add(1, Ordering::Relaxed);
            let datagram = &buf[..n];
            match (n == REQUEST_LEN).then(|| self.handle(datagram)).flatten() {
                Some(resp) => {
                    if !resp.converged {
                        self.stats.not_converged.fetch_add(1, Ordering::Relaxed);
                    }
                    match self.socket.send_to(&resp.encode(), peer) {
                        Ok(_) => self.stats.answered.fetch_add(1, Ordering::Relaxed),
                        Err(_) => self.stats.dropped.fetch_add(1, Ordering::Relaxed),
                    };
                }
                None => {
                    self.stats.dropped.fetch_add(1, Ordering::Relaxed);
                }
            }
        }
        Ok(())
    }

    /// Runs the server on a background thread.
    pub fn spawn(mut self) -> io::Result<ServerHandle> {
        let addr = self.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let stats = self.stats();
        let flag = Arc::clone(&stop);
        let join = std::thread::Builder::new().name("mpc-server".into()).spawn(move || self.run(&flag))?;
        Ok(ServerHandle { addr, stop, stats, join: Some(join) })
    }
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    stats: Arc<ServerStats>,
    join: Option<JoinHandle<io::Result<()>>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stats(&self) -> StatsSnapshot {
        self.stats.snapshot()
    }

    pub fn shutdown(mut self) -> io::Result<StatsSnapshot> {
        self.stop_and_join()?;
        Ok(self.stats.snapshot())
    }

    fn stop_and_join(&mut self) -> io::Result<()> {
        self.stop.store(true, Ordering::Relaxed);
        match self.join.take() {
            Some(j) => j.join().unwrap_or_else(|_| Err(io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.stop_and_join();
    }
}
