//! Simulation and control of a fully actuated aerial manipulator: a rigid
//! platform driven by tilted fixed-pitch rotors, carrying a four-joint arm.
//!
//! - [`spatial`]: rotations, poses, twists and wrenches.
//! - [`kinematics`]: modified Denavit-Hartenberg chains and recursive link motion.
//! - [`dynamics`]: the internal-wrench system of platform plus arm, solved for
//!   platform acceleration and the platform-arm reaction.
//! - [`control`]: pose PID with dynamic compensation of the arm reaction.
//! - [`allocation`]: rotor coupling matrix and bounded squared-speed allocation.
//! - [`sim`]: closed-loop scenarios, logs and step-response metrics.
//! - [`config`]: TOML model and scenario files.
//! - [`cli`]: batch run, mode comparison and actuation rank report.

pub mod allocation;
pub mod cli;
pub mod config;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod kinematics;
pub mod sim;
pub mod spatial;

pub use error::{Error, Result};
