//! Pinhole camera math: unprojection of 2D observations to world
//! coordinates, projection for field-of-view tests, and least-squares
//! scale-shift alignment of depth estimates.
//!
//! Conventions: the camera looks down +Z in its own frame, +X right and
//! +Y down in the image; a [`CameraPose`] stores the camera-to-world
//! rotation and the camera center in world coordinates. World units are
//! meters throughout.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("depth must be finite and positive, got {0}")]
    InvalidDepth(f64),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("degenerate depth fit: {0}")]
    DegenerateFit(String),
}

/// A point in the fixed world coordinate frame, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

/// Continuous pixel coordinates; sub-pixel positions are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Pinhole intrinsics: focal lengths and principal point in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: f64,
    pub height: f64,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: f64,
        height: f64,
    ) -> Result<Self, GeometryError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        if !(cx > 0.0 && cx < width && cy > 0.0 && cy < height) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "principal point ({cx}, {cy}) outside image {width}x{height}"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }
}

/// Rigid camera-to-world transform: `rotation * p_cam + translation`.
///
/// `translation` is the camera center expressed in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

const POSE_TOL: f64 = 1e-9;

impl CameraPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let gram = rotation.transpose() * rotation;
        let ortho_err = (gram - Matrix3::identity()).norm();
        if ortho_err > POSE_TOL {
            return Err(GeometryError::InvalidPose(format!(
                "rotation not orthonormal (|R'R - I| = {ortho_err:.3e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > POSE_TOL {
            return Err(GeometryError::InvalidPose(format!(
                "rotation determinant {det} != +1"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Point3 {
        Point3::from_vector(self.translation)
    }

    /// Compose a rigid world transform on the left: `g ∘ self`.
    pub fn transformed_by(&self, rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Self {
        Self {
            rotation: rotation * self.rotation,
            translation: rotation * self.translation + translation,
        }
    }
}

/// Intrinsics plus pose for one frame: everything lifting and
/// field-of-view tests need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraFrame {
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
}

/// One (estimated, reference) depth sample at the same pixel, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthSamplePair {
    /// Raw monocular depth estimate.
    pub estimated: f64,
    /// Mesh / oracle depth at the same pixel.
    pub reference: f64,
}

/// Lift a pixel observation at a known camera-frame depth into world
/// coordinates.
pub fn unproject(
    pixel: Pixel,
    depth: f64,
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
) -> Result<Point3, GeometryError> {
    if !depth.is_finite() || depth <= 0.0 {
        return Err(GeometryError::InvalidDepth(depth));
    }
    let cam = Vector3::new(
        depth * (pixel.u - intrinsics.cx) / intrinsics.fx,
        depth * (pixel.v - intrinsics.cy) / intrinsics.fy,
        depth,
    );
    Ok(Point3::from_vector(pose.rotation * cam + pose.translation))
}

/// Project a world point into the image plane. The returned depth is the
/// camera-frame z and may be non-positive (point behind the camera);
/// callers must check it before trusting the pixel.
pub fn project(point: Point3, intrinsics: &CameraIntrinsics, pose: &CameraPose) -> (Pixel, f64) {
    let cam = pose.rotation.transpose() * (point.to_vector() - pose.translation);
    let pixel = Pixel::new(
        intrinsics.cx + intrinsics.fx * cam.x / cam.z,
        intrinsics.cy + intrinsics.fy * cam.y / cam.z,
    );
    (pixel, cam.z)
}

/// True iff the point projects in front of the camera and inside the
/// image bounds.
pub fn in_fov(point: Point3, intrinsics: &CameraIntrinsics, pose: &CameraPose) -> bool {
    let (pixel, depth) = project(point, intrinsics, pose);
    depth > 0.0
        && pixel.u >= 0.0
        && pixel.u < intrinsics.width
        && pixel.v >= 0.0
        && pixel.v < intrinsics.height
}

/// Closed-form least squares for the scale-shift `(a, b)` minimizing
/// `sum (a * estimated_i + b - reference_i)^2`.
pub fn align_depth(pairs: &[DepthSamplePair]) -> Result<(f64, f64), GeometryError> {
    if pairs.len() < 2 {
        return Err(GeometryError::DegenerateFit(format!(
            "need at least 2 samples, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mean_e = pairs.iter().map(|p| p.estimated).sum::<f64>() / n;
    let mean_r = pairs.iter().map(|p| p.reference).sum::<f64>() / n;
    let mut var_e = 0.0;
    let mut cov_er = 0.0;
    for p in pairs {
        let de = p.estimated - mean_e;
        var_e += de * de;
        cov_er += de * (p.reference - mean_r);
    }
    // Relative threshold: all-equal estimates leave the scale unconstrained.
    if var_e <= 1e-18 * n * (1.0 + mean_e * mean_e) {
        return Err(GeometryError::DegenerateFit(
            "estimated depths are all equal; scale is unconstrained".into(),
        ));
    }
    let a = cov_er / var_e;
    let b = mean_r - a * mean_e;
    Ok((a, b))
}
