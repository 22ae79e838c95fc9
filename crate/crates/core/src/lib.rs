//! Crowd navigation toolkit: a seedable crowd simulator, ORCA and social
//! force controllers, the decentralized structural-RNN policy with an
//! attention ablation, a recurrent PPO trainer and an evaluation harness.

pub mod agents;
pub mod config;
pub mod error;
pub mod eval;
pub mod geom;
pub mod net;
pub mod ppo;
pub mod sim;

pub use error::{Error, Result};
pub use geom::Vec2;
