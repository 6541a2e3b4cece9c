//! Safety-shielded double DQN for highway lane-change decisions on a
//! deterministic ring-road traffic simulator.
//!
//! The numeric kernels ([`qnet`], [`reward`], the gap checks in [`shield`])
//! are generic over [`Scalar`]; the simulator and trainer run in `f64`.

pub mod affordance;
pub mod config;
pub mod ddqn;
pub mod env;
pub mod error;
pub mod eval;
pub mod qnet;
pub mod reward;
pub mod scalar;
pub mod shield;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision Q-network, the type the trainer and checkpoints use.
pub type QNetwork = qnet::Mlp<f64>;
pub type QNetwork32 = qnet::Mlp<f32>;
pub type Adam = qnet::AdamState<f64>;
pub type Adam32 = qnet::AdamState<f32>;
