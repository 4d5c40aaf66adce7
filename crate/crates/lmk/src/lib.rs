//! World-coordinate multi-object tracking with object permanence.
//!
//! The toolkit lifts partial 2D observations into 3D world coordinates,
//! matches them over time into persistent tracks, and keeps those tracks
//! alive while their objects are occluded or out of the camera's view.
//! It ships with a synthetic egocentric-scenario generator, the naive
//! comparison methods, and the full location-accuracy evaluation protocol,
//! so tracking behaviour can be verified end to end against known ground
//! truth without any learned components.
//!
//! Crate layout:
//! - [`geometry`]: pinhole projection/unprojection and depth alignment
//! - [`tracker`]: the lift-match-keep core (tracks, cost model, matcher)
//! - [`cognition`]: visibility / reach / motion state classification
//! - [`baselines`]: random, out-of-sight-lost, out-of-sight-out-of-mind,
//!   and appearance-retrieval comparison methods
//! - [`simulator`]: seeded synthetic kitchen scenarios with ground truth
//! - [`eval`]: keyframe selection, location-accuracy metric, breakdowns
//! - [`obslog`]: the line-delimited observation log format
//! - [`report`]: CSV/JSON report emission
//! - [`runner`]: end-to-end orchestration, suites, and sweeps

pub mod baselines;
pub mod cognition;
pub mod eval;
pub mod geometry;
pub mod obslog;
pub mod report;
pub mod runner;
pub mod simulator;
pub mod tracker;

pub use geometry::{CameraIntrinsics, CameraPose, Pixel, Point3};
pub use tracker::{FrameAssignment, LiftedObservation, MatcherConfig, TrackSet};
