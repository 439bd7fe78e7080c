//! Pinhole projection, rotation representations, and pose algebra.
//!
//! Conventions used throughout the crate: right-handed camera frame with +z
//! pointing into the scene, image u to the right and v down, angles in
//! radians. Translations are in meters, pixel quantities in pixels.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Points whose camera-frame depth falls at or below this are rejected by
/// projection instead of producing huge coordinates.
pub const EPS_DEPTH: f64 = 1e-6;

/// Degeneracy threshold for the two-vector rotation representation: the
/// first vector's norm and the orthogonalized second vector's norm must both
/// exceed this.
pub const EPS_GRAM_SCHMIDT: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("camera-frame depth {depth} is at or behind the camera (min {EPS_DEPTH})")]
    PointBehindCamera { depth: f64 },
    #[error("degenerate rotation vectors: {reason}")]
    DegenerateRotation { reason: &'static str },
    #[error("focal length must be positive, got {0}")]
    NonPositiveFocal(f64),
}

/// Pinhole intrinsics with a single focal length (`f_x = f_y = f`) and a
/// principal point, all in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(f: f64, cx: f64, cy: f64) -> Result<Self, GeometryError> {
        if !(f > 0.0) {
            return Err(GeometryError::NonPositiveFocal(f));
        }
        Ok(Self { f, cx, cy })
    }

    /// Intrinsics with the principal point at the center of a `w` x `h` image.
    pub fn centered(f: f64, image_w: f64, image_h: f64) -> Result<Self, GeometryError> {
        Self::new(f, image_w / 2.0, image_h / 2.0)
    }

    /// The 3x3 calibration matrix `[[f, 0, cx], [0, f, cy], [0, 0, 1]]`.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.f, 0.0, self.cx, 0.0, self.f, self.cy, 0.0, 0.0, 1.0)
    }
}

/// A rigid camera-from-object transform: rotation followed by translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Map an object-frame point into the camera frame: `R p + t`.
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }
}

/// An image-plane position in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

/// Check the rotation-matrix invariants: orthonormal within `tol` (Frobenius
/// norm of `R^T R - I`) and determinant within `tol` of +1.
pub fn is_rotation_matrix(r: &Matrix3<f64>, tol: f64) -> bool {
    let rtr = r.transpose() * r;
    let ortho_err = (rtr - Matrix3::identity()).norm();
    ortho_err <= tol && (r.determinant() - 1.0).abs() <= tol
}

/// Project an object-frame point through a pose and pinhole intrinsics.
///
/// Fails when the camera-frame depth is at or below [`EPS_DEPTH`].
pub fn project_point(
    intr: &CameraIntrinsics,
    pose: &Pose,
    p: &Vector3<f64>,
) -> Result<PixelPoint, GeometryError> {
    let cam = pose.transform_point(p);
    if cam.z <= EPS_DEPTH {
        return Err(GeometryError::PointBehindCamera { depth: cam.z });
    }
    Ok(PixelPoint {
        u: intr.f * cam.x / cam.z + intr.cx,
        v: intr.f * cam.y / cam.z + intr.cy,
    })
}

/// Build a rotation matrix from two 3-vectors by Gram-Schmidt
/// orthonormalization.
///
/// The first column is `v1` normalized, the second is the component of `v2`
/// orthogonal to it, and the third is their cross product. Zero or collinear
/// inputs are rejected rather than patched up: the callers in this crate
/// never produce degenerate vectors, so a degenerate input is a bug.
///
/// ```
/// use camber::geometry::rotation_from_6d;
/// use nalgebra::{Matrix3, Vector3};
///
/// let r = rotation_from_6d(&Vector3::new(2.0, 0.0, 0.0), &Vector3::new(1.0, 1.0, 0.0)).unwrap();
/// assert_eq!(r, Matrix3::identity());
/// ```
pub fn rotation_from_6d(
    v1: &Vector3<f64>,
    v2: &Vector3<f64>,
) -> Result<Matrix3<f64>, GeometryError> {
    let n1 = v1.norm();
    if n1 <= EPS_GRAM_SCHMIDT {
        return Err(GeometryError::DegenerateRotation {
            reason: "first vector has (near-)zero norm",
        });
    }
    let e1 = v1 / n1;
    let u2 = v2 - e1.dot(v2) * e1;
    let n2 = u2.norm();
    if n2 <= EPS_GRAM_SCHMIDT {
        return Err(GeometryError::DegenerateRotation {
            reason: "second vector is (near-)collinear with the first",
        });
    }
    let e2 = u2 / n2;
    let e3 = e1.cross(&e2);
    Ok(Matrix3::from_columns(&[e1, e2, e3]))
}

/// Geodesic distance on SO(3): the angle in `[0, pi]` of the relative
/// rotation `r1^T r2`. Equals the Frobenius norm of the matrix logarithm of
/// `r1^T r2` divided by sqrt(2).
///
/// The angle is recovered with `atan2(sin, cos)` where the sine comes from
/// the skew part and the cosine from the trace. The plain
/// `acos((trace - 1) / 2)` form is the same function mathematically but
/// cannot resolve angles below ~1e-8 (the acos loses half the working
/// precision near 1); atan2 stays accurate over the whole range, which the
/// convergence checks in this crate rely on.
pub fn rotation_geodesic(r1: &Matrix3<f64>, r2: &Matrix3<f64>) -> f64 {
    let rel = r1.transpose() * r2;
    let sin = sin_vector(&rel).norm();
    let cos = (rel.trace() - 1.0) / 2.0;
    sin.atan2(cos)
}

/// Half the skew part of a rotation matrix: `sin(theta) * axis`.
fn sin_vector(rel: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        (rel[(2, 1)] - rel[(1, 2)]) / 2.0,
        (rel[(0, 2)] - rel[(2, 0)]) / 2.0,
        (rel[(1, 0)] - rel[(0, 1)]) / 2.0,
    )
}

/// Axis-angle (rotation vector) of a rotation matrix, `theta * axis` with
/// `theta` in `[0, pi]`.
///
/// For angles below pi/3 the vector is taken from the skew part with the
/// atan2 angle, which keeps full precision down to zero; larger angles go
/// through the quaternion conversion, which is well behaved up to and at pi.
pub fn rotation_scaled_axis(rel: &Matrix3<f64>) -> Vector3<f64> {
    let sv = sin_vector(rel);
    let sin = sv.norm();
    let cos = (rel.trace() - 1.0) / 2.0;
    if cos > 0.5 {
        if sin == 0.0 {
            return Vector3::zeros();
        }
        let theta = sin.atan2(cos);
        sv * (theta / sin)
    } else {
        nalgebra::UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(
            *rel,
        ))
        .scaled_axis()
    }
}
