//! Benchmark evaluation metrics and their aggregation.
//!
//! The per-sample errors use L2 norms per point, unlike the L1 training
//! losses; the two families deliberately share no code paths so a norm swap
//! in one cannot silently leak into the other.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::geometry::{project_point, rotation_geodesic, CameraIntrinsics, GeometryError, Pose};
use crate::loss::ModelPoints;
use crate::update::{Detection2D, ParamState};

/// Rotation accuracy threshold: pi/6 radians (30 degrees), inclusive.
pub const ACC_ROTATION_THRESHOLD: f64 = std::f64::consts::FRAC_PI_6;

/// Reprojection accuracy threshold (fraction of the box diagonal), inclusive.
pub const ACC_PROJECTION_THRESHOLD: f64 = 0.1;

/// Detection accuracy threshold on IoU, inclusive.
pub const ACC_DETECTION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("ground-truth translation has zero norm")]
    ZeroGtTranslation,
    #[error("{name} must be positive, got {value}")]
    NonPositiveLength { name: &'static str, value: f64 },
    #[error("cannot aggregate an empty record list")]
    EmptyRecordList,
    #[error("model point set must not be empty")]
    EmptyPointSet,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// All per-sample errors for one prediction/ground-truth pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRecord {
    /// Normalized point-matching error of the 6D pose.
    pub pose_err: f64,
    /// Geodesic rotation error in radians.
    pub rot_err: f64,
    /// Normalized translation error.
    pub trans_err: f64,
    /// Relative focal length error.
    pub focal_err: f64,
    /// Normalized reprojection error.
    pub proj_err: f64,
    /// Detection-box intersection over union.
    pub iou: f64,
}

/// Medians and threshold accuracies over a set of [`EvalRecord`]s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub median_pose: f64,
    pub median_rot: f64,
    pub median_trans: f64,
    pub median_focal: f64,
    pub median_proj: f64,
    /// Fraction of records with rotation error <= pi/6.
    pub acc_rot: f64,
    /// Fraction of records with reprojection error <= 0.1.
    pub acc_proj: f64,
    /// Fraction of records with detection IoU >= 0.5.
    pub acc_det: f64,
    pub count: usize,
}

/// Point-matching pose error: mean per-point L2 displacement between the
/// model points under the two poses, normalized by the ground-truth
/// camera-object distance and scaled by the relative object size
/// `d_bbox / d_img`.
pub fn point_matching_error(
    pred: &Pose,
    gt: &Pose,
    pts: &ModelPoints,
    d_bbox: f64,
    d_img: f64,
) -> Result<f64, MetricsError> {
    if pts.is_empty() {
        return Err(MetricsError::EmptyPointSet);
    }
    if !(d_img > 0.0) {
        return Err(MetricsError::NonPositiveLength {
            name: "image diagonal",
            value: d_img,
        });
    }
    let t_norm = gt.translation.norm();
    if t_norm == 0.0 {
        return Err(MetricsError::ZeroGtTranslation);
    }
    let mut sum = 0.0;
    for p in pts.iter() {
        sum += (pred.transform_point(p) - gt.transform_point(p)).norm();
    }
    Ok((d_bbox / d_img) * sum / pts.len() as f64 / t_norm)
}

/// Geodesic rotation error in radians.
pub fn rotation_error(pred: &Matrix3<f64>, gt: &Matrix3<f64>) -> f64 {
    rotation_geodesic(gt, pred)
}

/// Translation error normalized by the ground-truth distance:
/// `||t - t_hat|| / ||t_hat||`.
pub fn translation_error(pred: &Vector3<f64>, gt: &Vector3<f64>) -> Result<f64, MetricsError> {
    let n = gt.norm();
    if n == 0.0 {
        return Err(MetricsError::ZeroGtTranslation);
    }
    Ok((pred - gt).norm() / n)
}

/// Relative focal length error `|f_hat - f| / f_hat`.
pub fn focal_error(pred: f64, gt: f64) -> Result<f64, MetricsError> {
    if !(gt > 0.0) {
        return Err(MetricsError::NonPositiveLength {
            name: "ground-truth focal length",
            value: gt,
        });
    }
    Ok((gt - pred).abs() / gt)
}

/// Reprojection error: mean per-point L2 pixel displacement between the
/// projections under the predicted and ground-truth states, normalized by
/// the ground-truth box diagonal. Both projections share the principal
/// point `center`.
pub fn reprojection_error(
    pred: &ParamState,
    gt: &ParamState,
    pts: &ModelPoints,
    center: (f64, f64),
    d_bbox: f64,
) -> Result<f64, MetricsError> {
    if pts.is_empty() {
        return Err(MetricsError::EmptyPointSet);
    }
    if !(d_bbox > 0.0) {
        return Err(MetricsError::NonPositiveLength {
            name: "box diagonal",
            value: d_bbox,
        });
    }
    let intr_pred = CameraIntrinsics::new(pred.focal, center.0, center.1)?;
    let intr_gt = CameraIntrinsics::new(gt.focal, center.0, center.1)?;
    let mut sum = 0.0;
    for p in pts.iter() {
        let a = project_point(&intr_pred, &pred.pose, p)?;
        let b = project_point(&intr_gt, &gt.pose, p)?;
        sum += (a.u - b.u).hypot(a.v - b.v);
    }
    Ok(sum / pts.len() as f64 / d_bbox)
}

/// Intersection over union of two axis-aligned boxes; 0 when disjoint.
pub fn bbox_iou(a: &Detection2D, b: &Detection2D) -> f64 {
    let ix = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let iy = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = ix * iy;
    let union = a.width() * a.height() + b.width() * b.height() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Aggregate records into per-field medians and threshold accuracies.
///
/// Medians over an even count are the midpoint of the two central order
/// statistics. Error thresholds are inclusive (`<=`), the IoU threshold is
/// inclusive from above (`>=`). The input is never mutated.
pub fn aggregate(records: &[EvalRecord]) -> Result<MetricReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRecordList);
    }
    let sorted_field = |get: fn(&EvalRecord) -> f64| {
        let mut v: Vec<f64> = records.iter().map(get).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let count = records.len() as f64;
    Ok(MetricReport {
        median_pose: median(&sorted_field(|r| r.pose_err)),
        median_rot: median(&sorted_field(|r| r.rot_err)),
        median_trans: median(&sorted_field(|r| r.trans_err)),
        median_focal: median(&sorted_field(|r| r.focal_err)),
        median_proj: median(&sorted_field(|r| r.proj_err)),
        acc_rot: records
            .iter()
            .filter(|r| r.rot_err <= ACC_ROTATION_THRESHOLD)
            .count() as f64
            / count,
        acc_proj: records
            .iter()
            .filter(|r| r.proj_err <= ACC_PROJECTION_THRESHOLD)
            .count() as f64
            / count,
        acc_det: records
            .iter()
            .filter(|r| r.iou >= ACC_DETECTION_THRESHOLD)
            .count() as f64
            / count,
        count: records.len(),
    })
}

/// Compute the full [`EvalRecord`] for a prediction/ground-truth pair.
///
/// `pred_box` is compared against `gt_box` for the IoU; `gt_box` supplies the
/// normalizing diagonal, `(image_w, image_h)` the image diagonal, and the
/// principal point sits at the image center.
#[allow(clippy::too_many_arguments)]
pub fn eval_pair(
    pred: &ParamState,
    gt: &ParamState,
    pred_box: &Detection2D,
    gt_box: &Detection2D,
    pts: &ModelPoints,
    image_w: f64,
    image_h: f64,
) -> Result<EvalRecord, MetricsError> {
    let d_bbox = gt_box.diagonal();
    let d_img = image_w.hypot(image_h);
    let center = (image_w / 2.0, image_h / 2.0);
    Ok(EvalRecord {
        pose_err: point_matching_error(&pred.pose, &gt.pose, pts, d_bbox, d_img)?,
        rot_err: rotation_error(&pred.pose.rotation, &gt.pose.rotation),
        trans_err: translation_error(&pred.pose.translation, &gt.pose.translation)?,
        focal_err: focal_error(pred.focal, gt.focal)?,
        proj_err: reprojection_error(pred, gt, pts, center, d_bbox)?,
        iou: bbox_iou(pred_box, gt_box),
    })
}
