//! The non-linear parameter update rule, its exact inverse, and state
//! initialization.
//!
//! An update is applied in a fixed order: focal length first (the translation
//! equations read the *updated* focal), then depth, then the in-plane
//! translation components, then rotation. The inverse ([`ideal_update`]) is
//! defined operationally: applying it must reproduce the target state.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::geometry::{rotation_from_6d, CameraIntrinsics, GeometryError, Pose};

/// Default initial focal length in pixels used by [`init_state`] callers
/// when no external estimate (EXIF or otherwise) is available.
pub const DEFAULT_INIT_FOCAL: f64 = 600.0;

/// Initial object depth in meters used by [`init_state`].
pub const INIT_DEPTH: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UpdateError {
    #[error("depth ratio must be positive, got {0}")]
    NonPositiveDepthRatio(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid state: {0}")]
    InvalidState(&'static str),
    #[error("invalid detection box [{x1}, {y1}, {x2}, {y2}]: requires x1 < x2 and y1 < y2")]
    InvalidDetection { x1: f64, y1: f64, x2: f64, y2: f64 },
}

/// The full estimated state at one iteration: object pose plus focal length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamState {
    pub pose: Pose,
    pub focal: f64,
}

impl ParamState {
    pub fn new(pose: Pose, focal: f64) -> Result<Self, UpdateError> {
        if !(focal > 0.0) {
            return Err(UpdateError::InvalidState("focal length must be positive"));
        }
        if !(pose.translation.z > 0.0) {
            return Err(UpdateError::InvalidState(
                "translation depth must be positive",
            ));
        }
        Ok(Self { pose, focal })
    }
}

/// The predictor output: in-plane shift of the projected object center in
/// pixels, a depth ratio, two 3-vectors encoding the rotation update, and a
/// log-focal increment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateVector {
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub rot1: Vector3<f64>,
    pub rot2: Vector3<f64>,
    pub vf: f64,
}

impl UpdateVector {
    /// The canonical no-op update: zero shifts, unit depth ratio, identity
    /// rotation columns, zero log-focal increment.
    pub fn identity() -> Self {
        Self {
            vx: 0.0,
            vy: 0.0,
            vz: 1.0,
            rot1: Vector3::new(1.0, 0.0, 0.0),
            rot2: Vector3::new(0.0, 1.0, 0.0),
            vf: 0.0,
        }
    }

    /// The rotation increment encoded by the two direction vectors.
    pub fn rotation(&self) -> Result<Matrix3<f64>, GeometryError> {
        rotation_from_6d(&self.rot1, &self.rot2)
    }
}

/// An axis-aligned detection box in pixels with `x1 < x2`, `y1 < y2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection2D {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl Detection2D {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, UpdateError> {
        if !(x1 < x2 && y1 < y2) {
            return Err(UpdateError::InvalidDetection { x1, y1, x2, y2 });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }
}

/// Apply an update vector to a state.
///
/// Evaluation order is part of the contract:
/// 1. `f' = exp(vf) * f`
/// 2. `z' = vz * z`
/// 3. `x' = (vx / f' + x / z) * z'`, same for y (the in-plane equations use
///    the *updated* focal length)
/// 4. `R' = R(rot1, rot2) * R`
pub fn apply_update(state: &ParamState, delta: &UpdateVector) -> Result<ParamState, UpdateError> {
    if !(delta.vz > 0.0) {
        return Err(UpdateError::NonPositiveDepthRatio(delta.vz));
    }
    let focal = delta.vf.exp() * state.focal;
    let t = state.pose.translation;
    let z = delta.vz * t.z;
    // Grouped as vx * z' / f' + x * vz (algebraically the same as
    // (vx / f' + x / z) * z') so the identity update is an exact fixed point.
    let x = delta.vx * z / focal + t.x * delta.vz;
    let y = delta.vy * z / focal + t.y * delta.vz;
    let rotation = delta.rotation()? * state.pose.rotation;
    Ok(ParamState {
        pose: Pose::new(rotation, Vector3::new(x, y, z)),
        focal,
    })
}

/// The closed-form update that maps `state` onto `target` in a single
/// [`apply_update`] application.
///
/// ```
/// use camber::geometry::Pose;
/// use camber::update::{apply_update, ideal_update, ParamState};
/// use nalgebra::{Matrix3, Vector3};
///
/// let state = ParamState {
///     pose: Pose::new(Matrix3::identity(), Vector3::new(0.0, 0.0, 1.0)),
///     focal: 600.0,
/// };
/// let target = ParamState {
///     pose: Pose::new(Matrix3::identity(), Vector3::new(0.05, -0.02, 1.8)),
///     focal: 420.0,
/// };
/// let reached = apply_update(&state, &ideal_update(&state, &target)).unwrap();
/// assert!((reached.focal - target.focal).abs() < 1e-9);
/// assert!((reached.pose.translation - target.pose.translation).norm() < 1e-9);
/// ```
pub fn ideal_update(state: &ParamState, target: &ParamState) -> UpdateVector {
    let t = state.pose.translation;
    let t_hat = target.pose.translation;
    let rel = target.pose.rotation * state.pose.rotation.transpose();
    UpdateVector {
        vx: target.focal * (t_hat.x / t_hat.z - t.x / t.z),
        vy: target.focal * (t_hat.y / t_hat.z - t.y / t.z),
        vz: t_hat.z / t.z,
        rot1: rel.column(0).into_owned(),
        rot2: rel.column(1).into_owned(),
        vf: (target.focal / state.focal).ln(),
    }
}

/// Build the initial state for a detection: identity rotation, depth
/// [`INIT_DEPTH`], and an in-plane translation chosen so the object origin
/// projects onto the detection-box center under `intr`.
pub fn init_state(det: &Detection2D, intr: &CameraIntrinsics) -> ParamState {
    let (u, v) = det.center();
    let x = (u - intr.cx) * INIT_DEPTH / intr.f;
    let y = (v - intr.cy) * INIT_DEPTH / intr.f;
    ParamState {
        pose: Pose::new(Matrix3::identity(), Vector3::new(x, y, INIT_DEPTH)),
        focal: intr.f,
    }
}
