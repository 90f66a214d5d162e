//! Simulator-agnostic robot environment kernel.

pub mod assets;
pub mod augment;
pub mod backends;
pub mod config;
pub mod env;
pub mod math;
pub mod retarget;
pub mod state;
