//! Type II singularity detection and avoidance for parallel robots based on
//! output twist screw (OTS) angles.
//!
//! The crate is layered: [`screw`] and [`numkit`] are the numeric core,
//! [`model`] defines the robot abstraction with two implementations
//! ([`five_bar`], [`spatial`]), [`avoidance`] is the per-tick state machine and
//! [`planner`] drives it over whole trajectories. [`io`] holds the file formats.

pub mod avoidance;
pub mod error;
pub mod five_bar;
pub mod io;
pub mod model;
pub mod numkit;
pub mod planner;
pub mod screw;
pub mod spatial;

pub use error::{Error, Result};
pub use model::{alpha, jacobians, Alpha, JointVector, Pose, RobotModel};
pub use screw::{LimbPair, Screw};
