//! UDP offload of the ankle-torque MPC.
//!
//! A [`server::Server`] hosts the solver on one thread and answers fixed-size
//! datagrams; [`client::MpcClient`] is the synchronous side embedded in the
//! control loop, and [`probe::latency_probe`] measures round trips.

pub mod client;
pub mod config;
pub mod probe;
pub mod server;
pub mod wire;

pub use client::{ClientPolicy, ClientReply, MpcClient, TorqueSource};
pub use config::{ConfigError, ControllerConfig};
pub use probe::{latency_probe, ProbeOptions, ProbeReport};
pub use server::{Server, ServerHandle, StatsSnapshot};
pub use wire::{MpcRequest, MpcResponse, WireError};
