//! Cascaded channel estimation for group-connected beyond-diagonal RIS
//! multi-user mmWave uplinks: channel synthesis, the three-stage estimation
//! protocol, baselines and Monte Carlo evaluation.

pub mod baselines;
pub mod bdris;
pub mod channel;
pub mod config;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod protocol;
pub mod selftest;
pub mod sparse;
pub mod stage1;
pub mod stage2;
pub mod stage3;

pub use error::{Error, Result};
