//! Pinhole camera geometry: rotations, world-to-image projection, and the
//! world-coordinate relative lane position that the image-space pipeline is
//! checked against.
//!
//! World convention: Z forward along the road, X lateral (right positive),
//! Y down. Lane markings are parallel to the Z axis.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Points closer than this (in meters of camera-frame depth) are rejected
/// instead of clamped, so a sign flip can never slip through projection.
pub const MIN_DEPTH_M: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("point projects behind the camera (depth {depth} m)")]
    PointBehindCamera { depth: f64 },
    #[error("degenerate lane: both markings at the same lateral position")]
    DegenerateLane,
    #[error("invalid intrinsics: focal lengths must be positive (fx={fx}, fy={fy})")]
    InvalidIntrinsics { fx: f64, fy: f64 },
}

/// Focal lengths and principal point, all in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub u0: f64,
    pub v0: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, u0: f64, v0: f64) -> Result<Self, GeometryError> {
        if fx <= 0.0 || fy <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics { fx, fy });
        }
        Ok(Self { fx, fy, u0, v0 })
    }
}

/// Camera position (meters, world frame) and orientation angles (radians).
///
/// The rotation applied to world points is `R_z(yaw_z) * R_x(pitch_x) * R_y(yaw_y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: [f64; 3],
    /// (theta_x, theta_y, theta_z)
    pub angles: [f64; 3],
}

impl CameraPose {
    pub fn new(position: [f64; 3], angles: [f64; 3]) -> Self {
        Self { position, angles }
    }

    pub fn rotation(&self) -> Mat3 {
        rotation_matrix(self.angles[0], self.angles[1], self.angles[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WorldPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
}

/// A projected point: pixel coordinates plus the camera-frame depth it was
/// projected at. `depth > 0` for anything returned by [`project`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImagePoint {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

/// Minimal row-major 3x3 matrix. Enough linear algebra for this module;
/// nothing more.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub fn identity() -> Self {
        Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn mul(&self, rhs: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[i][k] * rhs.0[k][j]).sum();
            }
        }
        Mat3(out)
    }

    pub fn mul_vec(&self, v: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.0[i][0] * v[0] + self.0[i][1] * v[1] + self.0[i][2] * v[2];
        }
        out
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
}

fn rot_x(t: f64) -> Mat3 {
    let (s, c) = t.sin_cos();
    Mat3([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
}

fn rot_y(t: f64) -> Mat3 {
    let (s, c) = t.sin_cos();
    Mat3([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
}

fn rot_z(t: f64) -> Mat3 {
    let (s, c) = t.sin_cos();
    Mat3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
}

/// Composite rotation `R_z(theta_z) * R_x(theta_x) * R_y(theta_y)`.
pub fn rotation_matrix(theta_x: f64, theta_y: f64, theta_z: f64) -> Mat3 {
    rot_z(theta_z).mul(&rot_x(theta_x)).mul(&rot_y(theta_y))
}

/// Transform a world point into the camera frame: `P_c = A * (P_w - C)`.
///
/// The pose stores the camera *location* C, so the translation column of the
/// extrinsic matrix is `-A*C`.
pub fn world_to_camera(p: WorldPoint, pose: &CameraPose) -> [f64; 3] {
    let a = pose.rotation();
    a.mul_vec([
        p.x - pose.position[0],
        p.y - pose.position[1],
        p.z - pose.position[2],
    ])
}

/// Project a world point through the pinhole model.
///
/// Returns `PointBehindCamera` when the camera-frame depth is at or below
/// [`MIN_DEPTH_M`].
pub fn project(
    p: WorldPoint,
    intr: &CameraIntrinsics,
    pose: &CameraPose,
) -> Result<ImagePoint, GeometryError> {
    let [xc, yc, zc] = world_to_camera(p, pose);
    project_camera(xc, yc, zc, intr)
}

/// Pinhole projection of a point already expressed in the camera frame.
pub fn project_camera(
    xc: f64,
    yc: f64,
    zc: f64,
    intr: &CameraIntrinsics,
) -> Result<ImagePoint, GeometryError> {
    if zc <= MIN_DEPTH_M {
        return Err(GeometryError::PointBehindCamera { depth: zc });
    }
    Ok(ImagePoint {
        u: intr.fx * xc / zc + intr.u0,
        v: intr.fy * yc / zc + intr.v0,
        depth: zc,
    })
}

/// Relative lane position of an object in world coordinates:
/// `(2*x_o - (x_1 + x_2)) / (2*|x_1 - x_2|)`.
///
/// 0 is the lane center, -0.5 the left marking, +0.5 the right marking.
/// This is the ground-truth oracle the image-space normalization is
/// validated against.
pub fn relative_position_world(x_o: f64, x_1: f64, x_2: f64) -> Result<f64, GeometryError> {
    if x_1 == x_2 {
        return Err(GeometryError::DegenerateLane);
    }
    Ok((2.0 * x_o - (x_1 + x_2)) / (2.0 * (x_1 - x_2).abs()))
}
