//! Identification and optimization of cyclic gaits for slow, drag-dominated
//! locomotors driven by a single low-bandwidth input.
//!
//! The crate covers the full loop: synthesize input cycles, simulate a
//! built-in plant (a three-link low Reynolds number swimmer, or a surrogate
//! with asymmetric actuator rates), estimate phase from observed shape,
//! regress phase-indexed velocity models, predict and score trajectories,
//! and optimize cycle parameters against the identified model.

pub mod error;
pub mod experiment;
pub mod gait_model;
pub mod io;
pub mod optimize;
pub mod phase;
pub mod plant;
pub mod predict;
pub mod se2;
pub mod signal;
pub mod waveform;

pub use error::{Error, Result};
