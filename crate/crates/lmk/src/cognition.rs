//! Spatial state classification for tracked objects: visibility
//! (in-sight / occluded / out-of-view), reach (in-reach / out-of-reach),
//! and motion (moved / stationary).
//!
//! All classifiers are pure functions over immutable snapshots.

use serde::{Deserialize, Serialize};

use crate::geometry::{in_fov, CameraFrame, Point3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CognitionConfig {
    /// Reach radius in meters: how far the wearer can grab.
    pub eta: f64,
    /// Motion threshold in meters: displacements below it are noise.
    pub epsilon: f64,
}

impl Default for CognitionConfig {
    fn default() -> Self {
        Self {
            eta: 0.70,
            epsilon: 0.30,
        }
    }
}

impl CognitionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.eta.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(format!("eta must be positive, got {}", self.eta));
        }
        if self.epsilon.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(format!("epsilon must be positive, got {}", self.epsilon));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Visibility {
    /// The track received an observation this frame.
    InSight,
    /// Inside the camera frustum but unobserved. Indistinguishable from a
    /// missed observation without extra knowledge, by definition.
    Occluded,
    /// Outside the camera frustum.
    OutOfView,
}

impl Visibility {
    pub const ALL: [Visibility; 3] = [Visibility::InSight, Visibility::Occluded, Visibility::OutOfView];

    pub fn label(&self) -> &'static str {
        match self {
            Visibility::InSight => "in_sight",
            Visibility::Occluded => "occluded",
            Visibility::OutOfView => "out_of_view",
        }
    }

    /// Occluded and out-of-view together.
    pub fn is_out_of_sight(&self) -> bool {
        !matches!(self, Visibility::InSight)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Reach {
    InReach,
    OutOfReach,
}

impl Reach {
    pub const ALL: [Reach; 2] = [Reach::InReach, Reach::OutOfReach];

    pub fn label(&self) -> &'static str {
        match self {
            Reach::InReach => "in_reach",
            Reach::OutOfReach => "out_of_reach",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Motion {
    Moved,
    Stationary,
}

impl Motion {
    pub const ALL: [Motion; 2] = [Motion::Moved, Motion::Stationary];

    pub fn label(&self) -> &'static str {
        match self {
            Motion::Moved => "moved",
            Motion::Stationary => "stationary",
        }
    }
}

/// Visibility and reach are independent axes: an object may be occluded
/// yet in reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectState {
    pub visibility: Visibility,
    pub reach: Reach,
}

/// Assignment takes precedence over geometry: an observed object is in
/// sight no matter where its track says it is.
pub fn classify_visibility(assigned: bool, location: Point3, camera: &CameraFrame) -> Visibility {
    if assigned {
        Visibility::InSight
    } else if in_fov(location, &camera.intrinsics, &camera.pose) {
        Visibility::Occluded
    } else {
        Visibility::OutOfView
    }
}

/// In reach iff the distance to the camera center is within eta
/// (boundary inclusive).
pub fn classify_reach(location: Point3, camera: &CameraFrame, config: &CognitionConfig) -> Reach {
    if location.distance(&camera.pose.center()) <= config.eta {
        Reach::InReach
    } else {
        Reach::OutOfReach
    }
}

/// Moved iff the displacement between the two sampled locations reaches
/// epsilon (boundary inclusive).
pub fn classify_motion(a: Point3, b: Point3, config: &CognitionConfig) -> Motion {
    if a.distance(&b) >= config.epsilon {
        Motion::Moved
    } else {
        Motion::Stationary
    }
}

pub fn classify_state(
    assigned: bool,
    location: Point3,
    camera: &CameraFrame,
    config: &CognitionConfig,
) -> ObjectState {
    ObjectState {
        visibility: classify_visibility(assigned, location, camera),
        reach: classify_reach(location, camera, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraIntrinsics, CameraPose};

    fn camera() -> CameraFrame {
        CameraFrame {
            intrinsics: CameraIntrinsics::new(300.0, 300.0, 320.0, 180.0, 640.0, 360.0).unwrap(),
            pose: CameraPose::identity(),
        }
    }

    #[test]
    fn assigned_wins_regardless_of_geometry() {
        let cam = camera();
        let behind = Point3::new(0.0, 0.0, -5.0);
        assert_eq!(classify_visibility(true, behind, &cam), Visibility::InSight);
    }

    #[test]
    fn unassigned_in_frustum_is_occluded() {
        let cam = camera();
        assert_eq!(
            classify_visibility(false, Point3::new(0.0, 0.0, 2.0), &cam),
            Visibility::Occluded
        );
    }

    #[test]
    fn unassigned_behind_camera_is_out_of_view() {
        let cam = camera();
        let v = classify_visibility(false, Point3::new(0.0, 0.0, -2.0), &cam);
        assert_eq!(v, Visibility::OutOfView);
        assert!(v.is_out_of_sight());
    }

    #[test]
    fn reach_boundary_is_inclusive() {
        let cam = camera();
        let cfg = CognitionConfig::default();
        let at = |d: f64| classify_reach(Point3::new(0.0, 0.0, d), &cam, &cfg);
        assert_eq!(at(0.69), Reach::InReach);
        assert_eq!(at(0.70), Reach::InReach);
        assert_eq!(at(0.71), Reach::OutOfReach);
    }

    #[test]
    fn motion_boundary_is_inclusive_and_symmetric() {
        let cfg = CognitionConfig::default();
        let origin = Point3::new(0.0, 0.0, 0.0);
        assert_eq!(
            classify_motion(origin, Point3::new(0.35, 0.0, 0.0), &cfg),
            Motion::Moved
        );
        assert_eq!(classify_motion(origin, origin, &cfg), Motion::Stationary);
        // Exactly epsilon counts as moved.
        assert_eq!(
            classify_motion(origin, Point3::new(0.30, 0.0, 0.0), &cfg),
            Motion::Moved
        );
        assert_eq!(
            classify_motion(Point3::new(0.35, 0.0, 0.0), origin, &cfg),
            classify_motion(origin, Point3::new(0.35, 0.0, 0.0), &cfg)
        );
    }

    #[test]
    fn occluded_but_in_reach_is_representable() {
        let cam = camera();
        let cfg = CognitionConfig::default();
        let state = classify_state(false, Point3::new(0.0, 0.0, 0.5), &cam, &cfg);
        assert_eq!(state.visibility, Visibility::Occluded);
        assert_eq!(state.reach, Reach::InReach);
    }
}
