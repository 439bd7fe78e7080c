//! C ABI for the camber pose/focal refinement library.
//!
//! Conventions shared by every function here:
//!
//! - Fixed-size `double` arrays encode the math types:
//!   - state (13): rotation row-major `r00..r22`, translation `tx ty tz`,
//!     focal length `f`
//!   - update (10): `vx vy vz  r1x r1y r1z  r2x r2y r2z  vf`
//!   - box (4): `x1 y1 x2 y2`
//!   - record (6): `pose_err rot_err trans_err focal_err proj_err iou`
//!   - noise (4): `focal_rel_sigma trans_xy_sigma depth_sigma
//!     euler_sigma_rad`
//! - Meshes and sampled point sets are opaque handles created and released
//!   by the `camber_mesh_*` / `camber_points_*` functions.
//! - Every fallible function returns a [`CamberStatus`]; outputs are written
//!   only on `CAMBER_STATUS_OK`.

// Validation uses `!(x > 0.0)` so NaN fails the checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::sync::OnceLock;

use camber::geometry::{
    project_point, rotation_from_6d, rotation_geodesic, CameraIntrinsics, Pose,
};
use camber::loss::{total_loss, ModelPoints};
use camber::metrics::eval_pair;
use camber::refine::{run_refinement, PredictorSpec};
use camber::scene::{load_mesh, sample_mesh_points, NoiseConfig, SceneSample, TriMesh};
use camber::update::{
    apply_update, ideal_update, init_state, Detection2D, ParamState, UpdateVector,
};

use nalgebra::{Matrix3, Vector3};

/// Result of a camber C API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CamberStatus {
    /// Success.
    CamberStatusOk = 0,
    /// A required pointer argument was null.
    CamberStatusNullPointer = 1,
    /// An argument failed validation (bad range, degenerate input, schema).
    CamberStatusInvalidArgument = 2,
    /// The operating system reported an I/O failure.
    CamberStatusIoError = 3,
    /// A numeric/domain failure (point behind camera, resample exhaustion).
    CamberStatusNumericError = 4,
}

use CamberStatus::*;

/// Opaque triangle-mesh handle.
pub struct CamberMesh {
    inner: TriMesh,
}

/// Opaque handle to points sampled on a mesh surface.
pub struct CamberPoints {
    inner: ModelPoints,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn camber_version() -> *const c_char {
    static VERSION: OnceLock<CString> = OnceLock::new();
    VERSION
        .get_or_init(|| CString::new(env!("CARGO_PKG_VERSION")).expect("version has no NUL"))
        .as_ptr()
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn camber_status_message(status: CamberStatus) -> *const c_char {
    let msg: &'static [u8] = match status {
        CamberStatusOk => b"ok\0",
        CamberStatusNullPointer => b"null pointer argument\0",
        CamberStatusInvalidArgument => b"invalid argument\0",
        CamberStatusIoError => b"i/o error\0",
        CamberStatusNumericError => b"numeric error\0",
    };
    msg.as_ptr() as *const c_char
}

unsafe fn read_array<const N: usize>(ptr: *const f64) -> Option<[f64; N]> {
    if ptr.is_null() {
        return None;
    }
    let mut out = [0.0; N];
    std::ptr::copy_nonoverlapping(ptr, out.as_mut_ptr(), N);
    Some(out)
}

unsafe fn write_array(ptr: *mut f64, values: &[f64]) {
    std::ptr::copy_nonoverlapping(values.as_ptr(), ptr, values.len());
}

fn state_from(buf: &[f64; 13]) -> ParamState {
    ParamState {
        pose: Pose::new(
            Matrix3::new(
                buf[0], buf[1], buf[2], buf[3], buf[4], buf[5], buf[6], buf[7], buf[8],
            ),
            Vector3::new(buf[9], buf[10], buf[11]),
        ),
        focal: buf[12],
    }
}

fn state_to(state: &ParamState) -> [f64; 13] {
    let r = &state.pose.rotation;
    let t = &state.pose.translation;
    [
        r[(0, 0)],
        r[(0, 1)],
        r[(0, 2)],
        r[(1, 0)],
        r[(1, 1)],
        r[(1, 2)],
        r[(2, 0)],
        r[(2, 1)],
        r[(2, 2)],
        t.x,
        t.y,
        t.z,
        state.focal,
    ]
}

fn delta_from(buf: &[f64; 10]) -> UpdateVector {
    UpdateVector {
        vx: buf[0],
        vy: buf[1],
        vz: buf[2],
        rot1: Vector3::new(buf[3], buf[4], buf[5]),
        rot2: Vector3::new(buf[6], buf[7], buf[8]),
        vf: buf[9],
    }
}

fn delta_to(delta: &UpdateVector) -> [f64; 10] {
    [
        delta.vx,
        delta.vy,
        delta.vz,
        delta.rot1.x,
        delta.rot1.y,
        delta.rot1.z,
        delta.rot2.x,
        delta.rot2.y,
        delta.rot2.z,
        delta.vf,
    ]
}

fn box_from(buf: &[f64; 4]) -> Result<Detection2D, CamberStatus> {
    Detection2D::new(buf[0], buf[1], buf[2], buf[3]).map_err(|_| CamberStatusInvalidArgument)
}

/// Load a plain-text triangle mesh (`v x y z` / `f i j k` lines).
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
/// The returned handle must be released with `camber_mesh_free`.
#[no_mangle]
pub unsafe extern "C" fn camber_mesh_load(
    path: *const c_char,
    out: *mut *mut CamberMesh,
) -> CamberStatus {
    if path.is_null() || out.is_null() {
        return CamberStatusNullPointer;
    }
    let Ok(path) = CStr::from_ptr(path).to_str() else {
        return CamberStatusInvalidArgument;
    };
    match load_mesh(Path::new(path)) {
        Ok(mesh) => {
            *out = Box::into_raw(Box::new(CamberMesh { inner: mesh }));
            CamberStatusOk
        }
        Err(camber::scene::SceneError::Io { .. }) => CamberStatusIoError,
        Err(_) => CamberStatusInvalidArgument,
    }
}

/// Create a procedural mesh: `"cube"` (1 m edges) or `"icosphere"`
/// (1 m diameter), uniformly scaled by `scale`.
///
/// # Safety
/// `name` must be a valid NUL-terminated string and `out` a valid pointer.
/// The returned handle must be released with `camber_mesh_free`.
#[no_mangle]
pub unsafe extern "C" fn camber_mesh_builtin(
    name: *const c_char,
    scale: f64,
    out: *mut *mut CamberMesh,
) -> CamberStatus {
    if name.is_null() || out.is_null() {
        return CamberStatusNullPointer;
    }
    if !(scale > 0.0) {
        return CamberStatusInvalidArgument;
    }
    let Ok(name) = CStr::from_ptr(name).to_str() else {
        return CamberStatusInvalidArgument;
    };
    let mesh = match name {
        "cube" => TriMesh::unit_cube(),
        "icosphere" => TriMesh::icosphere(0.5, 2),
        _ => return CamberStatusInvalidArgument,
    };
    let mesh = if scale == 1.0 {
        mesh
    } else {
        mesh.scaled(scale)
    };
    *out = Box::into_raw(Box::new(CamberMesh { inner: mesh }));
    CamberStatusOk
}

/// Release a mesh handle; null is ignored.
///
/// # Safety
/// `mesh` must be null or a handle returned by a `camber_mesh_*` function
/// that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn camber_mesh_free(mesh: *mut CamberMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Sample `n` points uniformly over the mesh surface (area-weighted,
/// deterministic for a given seed).
///
/// # Safety
/// `mesh` must be a live mesh handle and `out` a valid pointer. The
/// returned handle must be released with `camber_points_free`.
#[no_mangle]
pub unsafe extern "C" fn camber_points_sample(
    mesh: *const CamberMesh,
    n: usize,
    seed: u64,
    out: *mut *mut CamberPoints,
) -> CamberStatus {
    if mesh.is_null() || out.is_null() {
        return CamberStatusNullPointer;
    }
    match sample_mesh_points(&(*mesh).inner, n, seed) {
        Ok(points) => {
            *out = Box::into_raw(Box::new(CamberPoints { inner: points }));
            CamberStatusOk
        }
        Err(_) => CamberStatusInvalidArgument,
    }
}

/// Number of points in a sampled set; 0 for null.
///
/// # Safety
/// `points` must be null or a live points handle.
#[no_mangle]
pub unsafe extern "C" fn camber_points_len(points: *const CamberPoints) -> usize {
    if points.is_null() {
        0
    } else {
        (*points).inner.len()
    }
}

/// Copy point `index` into `out_xyz[3]`.
///
/// # Safety
/// `points` must be a live points handle and `out_xyz` must point to at
/// least 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn camber_points_get(
    points: *const CamberPoints,
    index: usize,
    out_xyz: *mut f64,
) -> CamberStatus {
    if points.is_null() || out_xyz.is_null() {
        return CamberStatusNullPointer;
    }
    let pts = (*points).inner.as_slice();
    let Some(p) = pts.get(index) else {
        return CamberStatusInvalidArgument;
    };
    write_array(out_xyz, &[p.x, p.y, p.z]);
    CamberStatusOk
}

/// Release a points handle; null is ignored.
///
/// # Safety
/// `points` must be null or a handle returned by `camber_points_sample`
/// that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn camber_points_free(points: *mut CamberPoints) {
    if !points.is_null() {
        drop(Box::from_raw(points));
    }
}

/// Project an object-frame point under `state[13]` with the principal point
/// at `(cx, cy)`, writing pixel coordinates to `out_uv[2]`.
///
/// # Safety
/// `state` and `point` must point to 13 and 3 readable doubles; `out_uv`
/// to 2 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn camber_project_point(
    state: *const f64,
    cx: f64,
    cy: f64,
    point: *const f64,
    out_uv: *mut f64,
) -> CamberStatus {
    let (Some(state_buf), Some(point_buf)) = (read_array::<13>(state), read_array::<3>(point))
    else {
        return CamberStatusNullPointer;
    };
    if out_uv.is_null() {
        return CamberStatusNullPointer;
    }
    let s = state_from(&state_buf);
    let Ok(intr) = CameraIntrinsics::new(s.focal, cx, cy) else {
        return CamberStatusInvalidArgument;
    };
    let p = Vector3::new(point_buf[0], point_buf[1], point_buf[2]);
    match project_point(&intr, &s.pose, &p) {
        Ok(px) => {
            write_array(out_uv, &[px.u, px.v]);
            CamberStatusOk
        }
        Err(_) => CamberStatusNumericError,
    }
}

/// Orthonormalize two 3-vectors into a rotation matrix (`out_r[9]`,
/// row-major).
///
/// # Safety
/// `v1`, `v2` must point to 3 readable doubles each; `out_r` to 9 writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn camber_rotation_from_6d(
    v1: *const f64,
    v2: *const f64,
    out_r: *mut f64,
) -> CamberStatus {
    let (Some(a), Some(b)) = (read_array::<3>(v1), read_array::<3>(v2)) else {
        return CamberStatusNullPointer;
    };
    if out_r.is_null() {
        return CamberStatusNullPointer;
    }
    match rotation_from_6d(
        &Vector3::new(a[0], a[1], a[2]),
        &Vector3::new(b[0], b[1], b[2]),
    ) {
        Ok(r) => {
            write_array(
                out_r,
                &[
                    r[(0, 0)],
                    r[(0, 1)],
                    r[(0, 2)],
                    r[(1, 0)],
                    r[(1, 1)],
                    r[(1, 2)],
                    r[(2, 0)],
                    r[(2, 1)],
                    r[(2, 2)],
                ],
            );
            CamberStatusOk
        }
        Err(_) => CamberStatusInvalidArgument,
    }
}

/// Geodesic angle in radians between two rotation matrices (`r1[9]`,
/// `r2[9]`, row-major), written to `out_angle`.
///
/// # Safety
/// `r1`, `r2` must point to 9 readable doubles each; `out_angle` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn camber_rotation_geodesic(
    r1: *const f64,
    r2: *const f64,
    out_angle: *mut f64,
) -> CamberStatus {
    let (Some(a), Some(b)) = (read_array::<9>(r1), read_array::<9>(r2)) else {
        return CamberStatusNullPointer;
    };
    if out_angle.is_null() {
        return CamberStatusNullPointer;
    }
    let m = |v: [f64; 9]| Matrix3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]);
    *out_angle = rotation_geodesic(&m(a), &m(b));
    CamberStatusOk
}

/// Apply an update vector to a state: `out_state = U(state, delta)`.
///
/// # Safety
/// `state`, `delta` must point to 13 and 10 readable doubles; `out_state`
/// to 13 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn camber_apply_update(
    state: *const f64,
    delta: *const f64,
    out_state: *mut f64,
) -> CamberStatus {
    let (Some(s), Some(d)) = (read_array::<13>(state), read_array::<10>(delta)) else {
        return CamberStatusNullPointer;
    };
    if out_state.is_null() {
        return CamberStatusNullPointer;
    }
    match apply_update(&state_from(&s), &delta_from(&d)) {
        Ok(next) => {
            write_array(out_state, &state_to(&next));
            CamberStatusOk
        }
        Err(_) => CamberStatusInvalidArgument,
    }
}

/// Closed-form update mapping `state` onto `target` in one application.
///
/// # Safety
/// `state`, `target` must point to 13 readable doubles each; `out_delta`
/// to 10 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn camber_ideal_update(
    state: *const f64,
    target: *const f64,
    out_delta: *mut f64,
) -> CamberStatus {
    let (Some(s), Some(t)) = (read_array::<13>(state), read_array::<13>(target)) else {
        return CamberStatusNullPointer;
    };
    if out_delta.is_null() {
        return CamberStatusNullPointer;
    }
    let delta = ideal_update(&state_from(&s), &state_from(&t));
    write_array(out_delta, &delta_to(&delta));
    CamberStatusOk
}

/// Initial state for a detection box under a centered pinhole camera with
/// focal length `f`: identity rotation, 1 m depth, in-plane translation
/// chosen so the origin projects to the box center.
///
/// # Safety
/// `det_box` must point to 4 readable doubles; `out_state` to 13 writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn camber_init_state(
    det_box: *const f64,
    f: f64,
    cx: f64,
    cy: f64,
    out_state: *mut f64,
) -> CamberStatus {
    let Some(b) = read_array::<4>(det_box) else {
        return CamberStatusNullPointer;
    };
    if out_state.is_null() {
        return CamberStatusNullPointer;
    }
    let det = match box_from(&b) {
        Ok(det) => det,
        Err(status) => return status,
    };
    let Ok(intr) = CameraIntrinsics::new(f, cx, cy) else {
        return CamberStatusInvalidArgument;
    };
    write_array(out_state, &state_to(&init_state(&det, &intr)));
    CamberStatusOk
}

/// Full training loss of a predicted update against a target state.
/// Writes `[pose, huber_focal, disent_reproj, total]` to `out_breakdown[4]`.
///
/// # Safety
/// `state`, `delta`, `target` must point to 13/10/13 readable doubles;
/// `points` must be a live points handle; `out_breakdown` must point to 4
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn camber_total_loss(
    state: *const f64,
    delta: *const f64,
    target: *const f64,
    points: *const CamberPoints,
    cx: f64,
    cy: f64,
    alpha: f64,
    beta: f64,
    out_breakdown: *mut f64,
) -> CamberStatus {
    let (Some(s), Some(d), Some(t)) = (
        read_array::<13>(state),
        read_array::<10>(delta),
        read_array::<13>(target),
    ) else {
        return CamberStatusNullPointer;
    };
    if points.is_null() || out_breakdown.is_null() {
        return CamberStatusNullPointer;
    }
    match total_loss(
        &state_from(&s),
        &delta_from(&d),
        &state_from(&t),
        &(*points).inner,
        (cx, cy),
        alpha,
        beta,
    ) {
        Ok(bd) => {
            write_array(
                out_breakdown,
                &[bd.pose, bd.huber_focal, bd.disent_reproj, bd.total],
            );
            CamberStatusOk
        }
        Err(_) => CamberStatusNumericError,
    }
}

/// Benchmark errors of a prediction against ground truth. Writes
/// `[pose_err, rot_err, trans_err, focal_err, proj_err, iou]` to
/// `out_record[6]`. The ground-truth box sets the normalizing diagonal and
/// the principal point sits at the image center.
///
/// # Safety
/// `pred`, `gt` must point to 13 readable doubles; `pred_box`, `gt_box` to
/// 4 readable doubles; `points` must be a live points handle; `out_record`
/// must point to 6 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn camber_eval_record(
    pred: *const f64,
    gt: *const f64,
    pred_box: *const f64,
    gt_box: *const f64,
    points: *const CamberPoints,
    image_w: f64,
    image_h: f64,
    out_record: *mut f64,
) -> CamberStatus {
    let (Some(p), Some(g), Some(pb), Some(gb)) = (
        read_array::<13>(pred),
        read_array::<13>(gt),
        read_array::<4>(pred_box),
        read_array::<4>(gt_box),
    ) else {
        return CamberStatusNullPointer;
    };
    if points.is_null() || out_record.is_null() {
        return CamberStatusNullPointer;
    }
    let (pred_det, gt_det) = match (box_from(&pb), box_from(&gb)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return CamberStatusInvalidArgument,
    };
    match eval_pair(
        &state_from(&p),
        &state_from(&g),
        &pred_det,
        &gt_det,
        &(*points).inner,
        image_w,
        image_h,
    ) {
        Ok(r) => {
            write_array(
                out_record,
                &[
                    r.pose_err,
                    r.rot_err,
                    r.trans_err,
                    r.focal_err,
                    r.proj_err,
                    r.iou,
                ],
            );
            CamberStatusOk
        }
        Err(_) => CamberStatusNumericError,
    }
}

/// Predictor selector for [`camber_refine`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CamberPredictor {
    /// Exact update onto the ground truth each step.
    CamberPredictorIdeal = 0,
    /// Fractional step of `gamma` per iteration in natural spaces.
    CamberPredictorDamped = 1,
    /// Noise-perturbed coarse step at k = 0, damped steps afterwards.
    CamberPredictorNoisy = 2,
}

/// Run `iters` refinement iterations from `init` against `gt` and write the
/// per-iteration evaluation records (including iteration 0) as
/// `(iters + 1) * 6` doubles to `out_records`, laid out record-major.
///
/// `noise` selects the noisy predictor's sigmas and may be null for the
/// defaults; it is ignored by the other predictors.
///
/// # Safety
/// `init`, `gt` must point to 13 readable doubles; `gt_box` to 4;
/// `noise` to 4 when non-null; `points` must be a live points handle;
/// `out_records` must point to `(iters + 1) * 6` writable doubles.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn camber_refine(
    init: *const f64,
    gt: *const f64,
    gt_box: *const f64,
    points: *const CamberPoints,
    image_w: f64,
    image_h: f64,
    predictor: CamberPredictor,
    gamma: f64,
    seed: u64,
    noise: *const f64,
    iters: u32,
    out_records: *mut f64,
) -> CamberStatus {
    let (Some(i), Some(g), Some(gb)) = (
        read_array::<13>(init),
        read_array::<13>(gt),
        read_array::<4>(gt_box),
    ) else {
        return CamberStatusNullPointer;
    };
    if points.is_null() || out_records.is_null() {
        return CamberStatusNullPointer;
    }
    let detection = match box_from(&gb) {
        Ok(b) => b,
        Err(status) => return status,
    };
    if image_w <= 0.0 || image_h <= 0.0 || iters == 0 {
        return CamberStatusInvalidArgument;
    }

    let noise_cfg = if noise.is_null() {
        NoiseConfig::default()
    } else {
        let Some(n) = read_array::<4>(noise) else {
            return CamberStatusNullPointer;
        };
        NoiseConfig {
            focal_rel_sigma: n[0],
            trans_xy_sigma: n[1],
            depth_sigma: n[2],
            euler_sigma: n[3],
        }
    };
    let spec = match predictor {
        CamberPredictor::CamberPredictorIdeal => PredictorSpec::Ideal,
        CamberPredictor::CamberPredictorDamped => PredictorSpec::Damped { gamma },
        CamberPredictor::CamberPredictorNoisy => PredictorSpec::Noisy {
            noise: noise_cfg,
            gamma,
            seed,
        },
    };

    let scene = SceneSample {
        gt: state_from(&g),
        model_points: (*points).inner.clone(),
        image_w: image_w as u32,
        image_h: image_h as u32,
        detection,
        seed,
    };
    match run_refinement(&state_from(&i), &scene, &spec, iters as usize) {
        Ok(traj) => {
            for (k, step) in traj.steps.iter().enumerate() {
                let r = step.record;
                write_array(
                    out_records.add(k * 6),
                    &[
                        r.pose_err,
                        r.rot_err,
                        r.trans_err,
                        r.focal_err,
                        r.proj_err,
                        r.iou,
                    ],
                );
            }
            CamberStatusOk
        }
        Err(camber::refine::RefineError::InvalidGamma(_)) => CamberStatusInvalidArgument,
        Err(_) => CamberStatusNumericError,
    }
}
