//! Rigid-body poses, the pinhole camera and analytic projection Jacobians.
//!
//! Conventions used everywhere in the crate:
//!
//! * A [`Pose3`] maps points from its local frame into the parent frame,
//!   `p_parent = R * p_local + t`.
//! * Cameras look down their local `+z` axis, `x` to the right, `y` down.
//! * Pose perturbations are right-multiplicative on the rotation with the
//!   translation moved along the local axes:
//!   `R' = R * Exp(phi)`, `t' = t + R * rho`, tangent ordered `[phi; rho]`.

use nalgebra::{Matrix2x3, Matrix3, Rotation3, SMatrix, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix2x6 = SMatrix<f64, 2, 6>;

/// Rigid transform in SE(3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose3 {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose3 {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose, checking that `rotation` is a proper rotation to 1e-9.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        let det = rotation.determinant();
        if !(ortho <= 1e-9 && (det - 1.0).abs() <= 1e-9) {
            return Err(Error::InvalidRotation { ortho, det });
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("pose translation must be finite"));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Pose with a rotation of `yaw` radians about the parent `z` axis.
    pub fn from_yaw(yaw: f64, translation: Vector3<f64>) -> Self {
        Self {
            rotation: rot_z(yaw),
            translation,
        }
    }

    pub fn compose(&self, other: &Pose3) -> Pose3 {
        Pose3 {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose3 {
        let rt = self.rotation.transpose();
        Pose3 {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Maps a parent-frame point into this pose's local frame.
    pub fn inverse_transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.translation)
    }

    /// Applies a tangent increment `[phi; rho]` with the crate-wide
    /// right-perturbation convention.
    pub fn retract(&self, delta: &Vector6<f64>) -> Pose3 {
        let phi = delta.fixed_rows::<3>(0).into_owned();
        let rho = delta.fixed_rows::<3>(3).into_owned();
        Pose3 {
            rotation: self.rotation * so3_exp(&phi),
            translation: self.translation + self.rotation * rho,
        }
    }

    /// Yaw of the local `x` axis measured in the parent `xy` plane.
    pub fn heading(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }
}

pub fn rot_z(yaw: f64) -> Matrix3<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn so3_exp(phi: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::new(*phi).into_inner()
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Geodesic angle between two rotations, in `[0, pi]`.
pub fn rotation_angle(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let rel = a.transpose() * b;
    ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Pinhole intrinsics plus the noise and range model of one camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub focal_px: f64,
    pub principal_point: [f64; 2],
    pub image_size: [u32; 2],
    pub pixel_sigma: f64,
    pub max_range: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            focal_px: 300.0,
            principal_point: [320.0, 240.0],
            image_size: [640, 480],
            pixel_sigma: 1.0,
            max_range: 20.0,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        let [w, h] = self.image_size;
        let [cx, cy] = self.principal_point;
        if !(self.focal_px > 0.0) {
            return Err(Error::invalid("focal_px must be positive"));
        }
        if !(self.pixel_sigma > 0.0) {
            return Err(Error::invalid("pixel_sigma must be positive"));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::invalid("max_range must be positive"));
        }
        if w == 0 || h == 0 {
            return Err(Error::invalid("image_size must be positive"));
        }
        if !(cx >= 0.0 && cx <= w as f64 && cy >= 0.0 && cy <= h as f64) {
            return Err(Error::invalid("principal point outside the image"));
        }
        Ok(())
    }

    pub fn in_bounds(&self, pixel: &Vector2<f64>) -> bool {
        pixel.x >= 0.0
            && pixel.y >= 0.0
            && pixel.x < self.image_size[0] as f64
            && pixel.y < self.image_size[1] as f64
    }

    /// Pinhole projection of a camera-frame point, without visibility checks.
    pub fn project_camera_point(&self, pc: &Vector3<f64>) -> Vector2<f64> {
        Vector2::new(
            self.focal_px * pc.x / pc.z + self.principal_point[0],
            self.focal_px * pc.y / pc.z + self.principal_point[1],
        )
    }

    pub fn is_visible(&self, pc: &Vector3<f64>) -> Option<Vector2<f64>> {
        if !(pc.z > 0.0) || pc.norm() > self.max_range {
            return None;
        }
        let pixel = self.project_camera_point(pc);
        self.in_bounds(&pixel).then_some(pixel)
    }
}

/// Projects a world landmark through a camera at world pose `cam_world`.
///
/// Returns `None` when the landmark is behind the camera, outside the image or
/// beyond `max_range`.
pub fn project(
    cam_world: &Pose3,
    intr: &CameraIntrinsics,
    lm: &Vector3<f64>,
) -> Option<(Vector2<f64>, f64)> {
    let pc = cam_world.inverse_transform_point(lm);
    intr.is_visible(&pc).map(|px| (px, pc.z))
}

/// Jacobians of the predicted pixel for one robot pose, one mount, one landmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionJacobians {
    /// d pixel / d [phi; rho] of the robot (body) pose.
    pub j_pose: Matrix2x6,
    /// d pixel / d landmark world position.
    pub j_lm: Matrix2x3<f64>,
    pub pixel: Vector2<f64>,
    pub depth: f64,
}

/// Unchecked variant used by the estimator, which must keep linearizing even
/// when an iterate wanders out of the image.
pub(crate) fn projection_jacobians_unchecked(
    robot_pose: &Pose3,
    extrinsic: &Pose3,
    intr: &CameraIntrinsics,
    lm: &Vector3<f64>,
) -> ProjectionJacobians {
    let pb = robot_pose.inverse_transform_point(lm);
    let re_t = extrinsic.rotation.transpose();
    let pc = re_t * (pb - extrinsic.translation);
    let pixel = intr.project_camera_point(&pc);

    let (x, y, z) = (pc.x, pc.y, pc.z);
    let f = intr.focal_px;
    let d_pix_d_pc = Matrix2x3::new(
        f / z,
        0.0,
        -f * x / (z * z),
        0.0,
        f / z,
        -f * y / (z * z),
    );

    // p_b' = Exp(-phi) (p_b - rho)  =>  d p_b = [p_b]x phi - rho
    let d_pix_d_pb = d_pix_d_pc * re_t;
    let mut j_pose = Matrix2x6::zeros();
    j_pose
        .fixed_view_mut::<2, 3>(0, 0)
        .copy_from(&(d_pix_d_pb * skew(&pb)));
    j_pose.fixed_view_mut::<2, 3>(0, 3).copy_from(&(-d_pix_d_pb));
    let j_lm = d_pix_d_pb * robot_pose.rotation.transpose();

    ProjectionJacobians {
        j_pose,
        j_lm,
        pixel,
        depth: z,
    }
}

/// Analytic projection Jacobians; `None` whenever [`project`] is `None` for the
/// camera pose `robot_pose * extrinsic`.
pub fn projection_jacobians(
    robot_pose: &Pose3,
    extrinsic: &Pose3,
    intr: &CameraIntrinsics,
    lm: &Vector3<f64>,
) -> Option<ProjectionJacobians> {
    let cam = robot_pose.compose(extrinsic);
    project(&cam, intr, lm)?;
    Some(projection_jacobians_unchecked(
        robot_pose, extrinsic, intr, lm,
    ))
}
