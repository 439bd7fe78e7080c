//! Training losses: point-matching pose distance, disentangled pose loss,
//! Huber loss on log focal length, reprojection losses, and their weighted
//! combination.
//!
//! All losses are pure deterministic functions; per-point sums are reduced in
//! index order so repeated evaluation is bitwise reproducible.

use nalgebra::Vector3;
use thiserror::Error;

use crate::geometry::{project_point, CameraIntrinsics, GeometryError, Pose};
use crate::update::{apply_update, ideal_update, ParamState, UpdateError, UpdateVector};

/// Default weight of the focal term in [`total_loss`].
pub const DEFAULT_ALPHA: f64 = 1e-2;

/// Default weight of the Huber log-focal term inside the focal loss.
pub const DEFAULT_BETA: f64 = 1.0;

/// Default Huber transition point in log-focal space.
pub const DEFAULT_HUBER_DELTA: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("model point set must not be empty")]
    EmptyPointSet,
    #[error("model point {index} has non-finite coordinates")]
    NonFinitePoint { index: usize },
    #[error("focal length must be positive, got {0}")]
    NonPositiveFocal(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Update(#[from] UpdateError),
}

/// Points sampled on an object model, expressed in the object frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPoints {
    points: Vec<Vector3<f64>>,
}

impl ModelPoints {
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self, LossError> {
        if points.is_empty() {
            return Err(LossError::EmptyPointSet);
        }
        for (index, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(LossError::NonFinitePoint { index });
            }
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vector3<f64>> {
        self.points.iter()
    }

    pub fn as_slice(&self) -> &[Vector3<f64>] {
        &self.points
    }
}

/// The components of [`total_loss`]. `total` always equals
/// `pose + alpha * (beta * huber_focal + disent_reproj)` for the weights the
/// breakdown was computed with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub pose: f64,
    pub huber_focal: f64,
    pub disent_reproj: f64,
    pub total: f64,
}

/// Mean L1 distance between the model points transformed by two poses:
/// `1/|M| * sum_p ||(R1 p + t1) - (R2 p + t2)||_1`.
pub fn pose_distance(pose1: &Pose, pose2: &Pose, pts: &ModelPoints) -> Result<f64, LossError> {
    if pts.is_empty() {
        return Err(LossError::EmptyPointSet);
    }
    let mut sum = 0.0;
    for p in pts.iter() {
        let a = pose1.transform_point(p);
        let b = pose2.transform_point(p);
        sum += (a.x - b.x).abs() + (a.y - b.y).abs() + (a.z - b.z).abs();
    }
    Ok(sum / pts.len() as f64)
}

/// Variant of [`pose_distance`] that *subtracts* the second translation
/// (`(R1 p + t1) - (R2 p - t2)`). With this convention the distance between
/// a pose and itself is generally nonzero, so it is unsuitable as a training
/// loss; it is kept only for cross-checking against implementations that use
/// this sign.
pub fn pose_distance_opposing(
    pose1: &Pose,
    pose2: &Pose,
    pts: &ModelPoints,
) -> Result<f64, LossError> {
    if pts.is_empty() {
        return Err(LossError::EmptyPointSet);
    }
    let mut sum = 0.0;
    for p in pts.iter() {
        let a = pose1.transform_point(p);
        let b = pose2.rotation * p - pose2.translation;
        sum += (a.x - b.x).abs() + (a.y - b.y).abs() + (a.z - b.z).abs();
    }
    Ok(sum / pts.len() as f64)
}

/// The three terms of the disentangled pose loss.
///
/// Each term applies a hybrid update in which exactly one component group
/// (in-plane translation, depth, rotation) comes from the prediction and
/// every other component is the ideal one, then measures [`pose_distance`]
/// to the target pose. Term 0 isolates `vx, vy`; term 1 isolates `vz`;
/// term 2 isolates the rotation update. The log-focal component is ideal in
/// all three terms.
pub fn disentangled_pose_terms(
    state: &ParamState,
    delta: &UpdateVector,
    target: &ParamState,
    pts: &ModelPoints,
) -> Result<[f64; 3], LossError> {
    let ideal = ideal_update(state, target);
    let hybrids = [
        UpdateVector {
            vx: delta.vx,
            vy: delta.vy,
            ..ideal
        },
        UpdateVector {
            vz: delta.vz,
            ..ideal
        },
        UpdateVector {
            rot1: delta.rot1,
            rot2: delta.rot2,
            ..ideal
        },
    ];
    let mut terms = [0.0; 3];
    for (term, hybrid) in terms.iter_mut().zip(hybrids.iter()) {
        let reached = apply_update(state, hybrid)?;
        *term = pose_distance(&reached.pose, &target.pose, pts)?;
    }
    Ok(terms)
}

/// Sum of the three [`disentangled_pose_terms`].
pub fn disentangled_pose_loss(
    state: &ParamState,
    delta: &UpdateVector,
    target: &ParamState,
    pts: &ModelPoints,
) -> Result<f64, LossError> {
    let [a, b, c] = disentangled_pose_terms(state, delta, target, pts)?;
    Ok(a + b + c)
}

/// Huber loss on the log-focal residual `r = ln(f) - ln(f_hat)` with the
/// default transition point [`DEFAULT_HUBER_DELTA`].
pub fn huber_log_focal(f: f64, f_hat: f64) -> Result<f64, LossError> {
    huber_log_focal_with_delta(f, f_hat, DEFAULT_HUBER_DELTA)
}

/// Huber loss on the log-focal residual with an explicit transition point:
/// `r^2 / 2` for `|r| <= delta`, `delta * (|r| - delta / 2)` beyond.
pub fn huber_log_focal_with_delta(f: f64, f_hat: f64, delta: f64) -> Result<f64, LossError> {
    if !(f > 0.0) {
        return Err(LossError::NonPositiveFocal(f));
    }
    if !(f_hat > 0.0) {
        return Err(LossError::NonPositiveFocal(f_hat));
    }
    let r = (f.ln() - f_hat.ln()).abs();
    Ok(if r <= delta {
        r * r / 2.0
    } else {
        delta * (r - delta / 2.0)
    })
}

fn reprojection_sum(
    pose_a: &Pose,
    f_a: f64,
    pose_b: &Pose,
    f_b: f64,
    pts: &ModelPoints,
    center: (f64, f64),
) -> Result<f64, LossError> {
    if pts.is_empty() {
        return Err(LossError::EmptyPointSet);
    }
    let intr_a = CameraIntrinsics::new(f_a, center.0, center.1)?;
    let intr_b = CameraIntrinsics::new(f_b, center.0, center.1)?;
    let mut sum = 0.0;
    for p in pts.iter() {
        let a = project_point(&intr_a, pose_a, p)?;
        let b = project_point(&intr_b, pose_b, p)?;
        sum += (a.u - b.u).abs() + (a.v - b.v).abs();
    }
    Ok(sum)
}

/// Summed L1 reprojection error of the model points under the predicted and
/// target states: `sum_p ||pi(f, R, t, p) - pi(f_hat, R_hat, t_hat, p)||_1`.
/// Both projections share the principal point `center`. This is a sum, not a
/// mean; divide by [`ModelPoints::len`] to normalize externally.
pub fn reprojection_loss(
    pred: &ParamState,
    gt: &ParamState,
    pts: &ModelPoints,
    center: (f64, f64),
) -> Result<f64, LossError> {
    reprojection_sum(&pred.pose, pred.focal, &gt.pose, gt.focal, pts, center)
}

/// Reprojection loss split so pose errors and focal errors contribute
/// through separate terms:
/// `1/2 * L_proj((R, t, f_hat), gt) + 1/2 * L_proj((R_hat, t_hat, f), gt)`.
/// The first term is literally independent of the predicted focal length,
/// the second literally independent of the predicted pose.
pub fn disentangled_reprojection_loss(
    pred: &ParamState,
    gt: &ParamState,
    pts: &ModelPoints,
    center: (f64, f64),
) -> Result<f64, LossError> {
    let [pose_term, focal_term] = disentangled_reprojection_terms(pred, gt, pts, center)?;
    Ok(0.5 * pose_term + 0.5 * focal_term)
}

/// The two unweighted terms of [`disentangled_reprojection_loss`]:
/// `[L_proj((R, t, f_hat), gt), L_proj((R_hat, t_hat, f), gt)]`.
pub fn disentangled_reprojection_terms(
    pred: &ParamState,
    gt: &ParamState,
    pts: &ModelPoints,
    center: (f64, f64),
) -> Result<[f64; 2], LossError> {
    let pose_term = reprojection_sum(&pred.pose, gt.focal, &gt.pose, gt.focal, pts, center)?;
    let focal_term = reprojection_sum(&gt.pose, pred.focal, &gt.pose, gt.focal, pts, center)?;
    Ok([pose_term, focal_term])
}

/// The full training loss for one predicted update:
/// disentangled pose loss plus `alpha * (beta * huber + disentangled
/// reprojection)`, with the focal terms evaluated at the post-update state
/// `apply_update(state, delta)`.
pub fn total_loss(
    state: &ParamState,
    delta: &UpdateVector,
    target: &ParamState,
    pts: &ModelPoints,
    center: (f64, f64),
    alpha: f64,
    beta: f64,
) -> Result<LossBreakdown, LossError> {
    let pose = disentangled_pose_loss(state, delta, target, pts)?;
    let pred = apply_update(state, delta)?;
    let huber_focal = huber_log_focal(pred.focal, target.focal)?;
    let disent_reproj = disentangled_reprojection_loss(&pred, target, pts, center)?;
    Ok(LossBreakdown {
        pose,
        huber_focal,
        disent_reproj,
        total: pose + alpha * (beta * huber_focal + disent_reproj),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        let u3: f64 = rng.gen();
        let two_pi = std::f64::consts::TAU;
        let q = nalgebra::Quaternion::new(
            u1.sqrt() * (two_pi * u3).cos(),
            (1.0 - u1).sqrt() * (two_pi * u2).sin(),
            (1.0 - u1).sqrt() * (two_pi * u2).cos(),
            u1.sqrt() * (two_pi * u3).sin(),
        );
        nalgebra::UnitQuaternion::from_quaternion(q)
            .to_rotation_matrix()
            .into_inner()
    }

    fn random_state(rng: &mut impl Rng) -> ParamState {
        ParamState {
            pose: Pose::new(
                random_rotation(rng),
                Vector3::new(
                    rng.gen_range(-0.075..0.075),
                    rng.gen_range(-0.075..0.075),
                    rng.gen_range(0.8..3.0),
                ),
            ),
            focal: rng.gen_range(200.0..1000.0),
        }
    }

    fn random_points(rng: &mut impl Rng, n: usize) -> ModelPoints {
        ModelPoints::new(
            (0..n)
                .map(|_| {
                    Vector3::new(
                        rng.gen_range(-0.2..0.2),
                        rng.gen_range(-0.2..0.2),
                        rng.gen_range(-0.2..0.2),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    const CENTER: (f64, f64) = (320.0, 240.0);

    #[test]
    fn pose_distance_zero_at_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let pts = random_points(&mut rng, 50);
        let pose = Pose::new(random_rotation(&mut rng), Vector3::new(0.1, -0.05, 2.0));
        assert_eq!(pose_distance(&pose, &pose, &pts).unwrap(), 0.0);
    }

    #[test]
    fn pose_distance_pure_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let pts = random_points(&mut rng, 100);
        let p1 = Pose::identity();
        let p2 = Pose::new(Matrix3::identity(), Vector3::new(0.0, 0.0, 0.2));
        let d = pose_distance(&p1, &p2, &pts).unwrap();
        assert!((d - 0.2).abs() < 1e-12, "d = {d}");
    }

    #[test]
    fn pose_distance_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..20 {
            let pts = random_points(&mut rng, 100);
            let p1 = Pose::new(random_rotation(&mut rng), Vector3::new(0.3, -0.2, 1.5));
            let p2 = Pose::new(random_rotation(&mut rng), Vector3::new(-0.1, 0.4, 2.5));

            // Straight-line double loop with scalar arithmetic only.
            let mut sum = 0.0;
            for p in pts.iter() {
                let mut a = [p1.translation.x, p1.translation.y, p1.translation.z];
                let mut b = [p2.translation.x, p2.translation.y, p2.translation.z];
                for i in 0..3 {
                    for j in 0..3 {
                        a[i] += p1.rotation[(i, j)] * p[j];
                        b[i] += p2.rotation[(i, j)] * p[j];
                    }
                }
                for i in 0..3 {
                    sum += (a[i] - b[i]).abs();
                }
            }
            let expect = sum / pts.len() as f64;
            let got = pose_distance(&p1, &p2, &pts).unwrap();
            assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
        }
    }

    #[test]
    fn pose_distance_opposing_nonzero_at_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let pts = random_points(&mut rng, 10);
        let pose = Pose::new(Matrix3::identity(), Vector3::new(0.0, 0.0, 2.0));
        let d = pose_distance_opposing(&pose, &pose, &pts).unwrap();
        // t - (-t) displaces every point by 2|t| in z.
        assert!((d - 4.0).abs() < 1e-12, "d = {d}");
    }

    #[test]
    fn empty_point_set_rejected() {
        assert!(matches!(
            ModelPoints::new(vec![]),
            Err(LossError::EmptyPointSet)
        ));
        assert!(ModelPoints::new(vec![Vector3::new(0.0, 0.0, f64::NAN)]).is_err());
    }

    #[test]
    fn disentangled_pose_loss_zero_at_ideal() {
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        for _ in 0..50 {
            let pts = random_points(&mut rng, 30);
            let state = random_state(&mut rng);
            let target = random_state(&mut rng);
            let ideal = ideal_update(&state, &target);
            let loss = disentangled_pose_loss(&state, &ideal, &target, &pts).unwrap();
            assert!(loss < 1e-12, "loss at ideal = {loss}");
        }
    }

    #[test]
    fn disentangled_pose_terms_isolate_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let pts = random_points(&mut rng, 30);
        let state = random_state(&mut rng);
        let target = random_state(&mut rng);
        let ideal = ideal_update(&state, &target);
        let base = disentangled_pose_terms(&state, &ideal, &target, &pts).unwrap();

        // Doubling vz moves only the middle term.
        let delta = UpdateVector {
            vz: 2.0 * ideal.vz,
            ..ideal
        };
        let terms = disentangled_pose_terms(&state, &delta, &target, &pts).unwrap();
        assert_eq!(terms[0], base[0]);
        assert!(terms[1] > 1e-3, "vz term did not react: {}", terms[1]);
        assert_eq!(terms[2], base[2]);

        // Perturbing vx moves only the first term.
        let delta = UpdateVector {
            vx: ideal.vx + 25.0,
            ..ideal
        };
        let terms = disentangled_pose_terms(&state, &delta, &target, &pts).unwrap();
        assert!(terms[0] > 1e-6);
        assert_eq!(terms[1], base[1]);
        assert_eq!(terms[2], base[2]);

        // Perturbing the rotation vectors moves only the last term.
        let twist = crate::geometry::rotation_from_6d(
            &Vector3::new(1.0, 0.2, 0.0),
            &Vector3::new(0.0, 1.0, 0.1),
        )
        .unwrap();
        let delta = UpdateVector {
            rot1: twist.column(0).into_owned(),
            rot2: twist.column(1).into_owned(),
            ..ideal
        };
        let terms = disentangled_pose_terms(&state, &delta, &target, &pts).unwrap();
        assert_eq!(terms[0], base[0]);
        assert_eq!(terms[1], base[1]);
        assert!(terms[2] > 1e-6);

        // The focal component is ideal in every term: perturbing vf moves none.
        let delta = UpdateVector {
            vf: ideal.vf + 0.7,
            ..ideal
        };
        let terms = disentangled_pose_terms(&state, &delta, &target, &pts).unwrap();
        assert_eq!(terms, base);
    }

    #[test]
    fn disentangled_pose_loss_matches_straight_line_eval() {
        // Independent evaluation: build each hybrid explicitly and apply the
        // update equations inline.
        let mut rng = ChaCha8Rng::seed_from_u64(89);
        for _ in 0..20 {
            let pts = random_points(&mut rng, 25);
            let state = random_state(&mut rng);
            let target = random_state(&mut rng);
            let delta = UpdateVector {
                vx: rng.gen_range(-50.0..50.0),
                vy: rng.gen_range(-50.0..50.0),
                vz: rng.gen_range(0.5..2.0),
                vf: rng.gen_range(-0.5..0.5),
                ..ideal_update(&state, &target)
            };

            let ideal = ideal_update(&state, &target);
            let mut expect = 0.0;
            for which in 0..3 {
                let (vx, vy) = if which == 0 {
                    (delta.vx, delta.vy)
                } else {
                    (ideal.vx, ideal.vy)
                };
                let vz = if which == 1 { delta.vz } else { ideal.vz };
                let (r1, r2) = if which == 2 {
                    (delta.rot1, delta.rot2)
                } else {
                    (ideal.rot1, ideal.rot2)
                };
                let vf = ideal.vf;

                let f_new = vf.exp() * state.focal;
                let z_new = vz * state.pose.translation.z;
                let x_new =
                    (vx / f_new + state.pose.translation.x / state.pose.translation.z) * z_new;
                let y_new =
                    (vy / f_new + state.pose.translation.y / state.pose.translation.z) * z_new;
                let r_new =
                    crate::geometry::rotation_from_6d(&r1, &r2).unwrap() * state.pose.rotation;
                let reached = Pose::new(r_new, Vector3::new(x_new, y_new, z_new));
                expect += pose_distance(&reached, &target.pose, &pts).unwrap();
            }

            let got = disentangled_pose_loss(&state, &delta, &target, &pts).unwrap();
            assert!(
                (got - expect).abs() <= 1e-12 * expect.max(1.0),
                "{got} vs {expect}"
            );
        }
    }

    #[test]
    fn huber_values() {
        assert_eq!(huber_log_focal(600.0, 600.0).unwrap(), 0.0);
        let e = std::f64::consts::E;
        let at_boundary = huber_log_focal(e * 600.0, 600.0).unwrap();
        assert!((at_boundary - 0.5).abs() < 1e-12, "{at_boundary}");
        let linear = huber_log_focal(e.powi(3) * 600.0, 600.0).unwrap();
        assert!((linear - 2.5).abs() < 1e-12, "{linear}");
        assert!(huber_log_focal(-1.0, 600.0).is_err());
        assert!(huber_log_focal(600.0, 0.0).is_err());

        // Custom transition point: |r| = 3 is still quadratic under delta=4.
        let wide = huber_log_focal_with_delta(e.powi(3) * 600.0, 600.0, 4.0).unwrap();
        assert!((wide - 4.5).abs() < 1e-12, "{wide}");
    }

    #[test]
    fn reprojection_loss_zero_at_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        let pts = random_points(&mut rng, 40);
        let s = random_state(&mut rng);
        assert_eq!(reprojection_loss(&s, &s, &pts, CENTER).unwrap(), 0.0);
    }

    #[test]
    fn reprojection_loss_focal_scaling_single_point() {
        // Equal poses, f = 2 f_hat, one point: per-point error is
        // f_hat * (|x_c| + |y_c|) / z_c.
        let pose = Pose::new(Matrix3::identity(), Vector3::new(0.1, -0.2, 2.0));
        let pts = ModelPoints::new(vec![Vector3::zeros()]).unwrap();
        let f_hat = 500.0;
        let pred = ParamState {
            pose,
            focal: 2.0 * f_hat,
        };
        let gt = ParamState { pose, focal: f_hat };
        let loss = reprojection_loss(&pred, &gt, &pts, CENTER).unwrap();
        let cam = pose.transform_point(&Vector3::zeros());
        let expect = f_hat * (cam.x.abs() + cam.y.abs()) / cam.z;
        assert!((loss - expect).abs() < 1e-9, "{loss} vs {expect}");
    }

    #[test]
    fn reprojection_loss_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for _ in 0..20 {
            let pts = random_points(&mut rng, 50);
            let pred = random_state(&mut rng);
            let gt = random_state(&mut rng);

            let mut expect = 0.0;
            for p in pts.iter() {
                let a = pred.pose.rotation * p + pred.pose.translation;
                let b = gt.pose.rotation * p + gt.pose.translation;
                let (au, av) = (
                    pred.focal * a.x / a.z + CENTER.0,
                    pred.focal * a.y / a.z + CENTER.1,
                );
                let (bu, bv) = (
                    gt.focal * b.x / b.z + CENTER.0,
                    gt.focal * b.y / b.z + CENTER.1,
                );
                expect += (au - bu).abs() + (av - bv).abs();
            }
            let got = reprojection_loss(&pred, &gt, &pts, CENTER).unwrap();
            assert!(
                (got - expect).abs() <= 1e-9 * expect.max(1.0),
                "{got} vs {expect}"
            );
        }
    }

    #[test]
    fn reprojection_loss_rejects_point_behind_camera() {
        let pts = ModelPoints::new(vec![Vector3::new(0.0, 0.0, -5.0)]).unwrap();
        let s = ParamState {
            pose: Pose::new(Matrix3::identity(), Vector3::new(0.0, 0.0, 1.0)),
            focal: 600.0,
        };
        assert!(matches!(
            reprojection_loss(&s, &s, &pts, CENTER),
            Err(LossError::Geometry(GeometryError::PointBehindCamera { .. }))
        ));
    }

    #[test]
    fn disentangled_reprojection_isolates_focal_and_pose() {
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        let pts = random_points(&mut rng, 30);
        let gt = random_state(&mut rng);

        // Focal-only error: the pose term is exactly zero.
        let pred = ParamState {
            focal: gt.focal * 1.7,
            ..gt
        };
        let [pose_term, focal_term] =
            disentangled_reprojection_terms(&pred, &gt, &pts, CENTER).unwrap();
        assert_eq!(pose_term, 0.0);
        assert!(focal_term > 0.0);

        // Pose-only error: the focal term is exactly zero.
        let mut pred = gt;
        pred.pose.translation.x += 0.05;
        let [pose_term, focal_term] =
            disentangled_reprojection_terms(&pred, &gt, &pts, CENTER).unwrap();
        assert!(pose_term > 0.0);
        assert_eq!(focal_term, 0.0);

        // Identical states: both zero.
        assert_eq!(
            disentangled_reprojection_loss(&gt, &gt, &pts, CENTER).unwrap(),
            0.0
        );
    }

    #[test]
    fn total_loss_zero_at_ideal_and_weight_ablation() {
        let mut rng = ChaCha8Rng::seed_from_u64(107);
        for _ in 0..50 {
            let pts = random_points(&mut rng, 20);
            let state = random_state(&mut rng);
            let target = random_state(&mut rng);
            let ideal = ideal_update(&state, &target);
            let bd = total_loss(
                &state,
                &ideal,
                &target,
                &pts,
                CENTER,
                DEFAULT_ALPHA,
                DEFAULT_BETA,
            )
            .unwrap();
            assert!(bd.total < 1e-12, "total at ideal = {}", bd.total);
            assert!(bd.pose < 1e-12);
            assert!(bd.huber_focal < 1e-12);
            assert!(bd.disent_reproj < 1e-10);
        }

        // alpha = 0 reduces the total to the pose term alone.
        let pts = random_points(&mut rng, 20);
        let state = random_state(&mut rng);
        let target = random_state(&mut rng);
        let delta = UpdateVector {
            vx: 10.0,
            ..ideal_update(&state, &target)
        };
        let bd = total_loss(&state, &delta, &target, &pts, CENTER, 0.0, DEFAULT_BETA).unwrap();
        assert_eq!(bd.total, bd.pose);
    }

    #[test]
    fn breakdown_recombines_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(109);
        for _ in 0..100 {
            let pts = random_points(&mut rng, 10);
            let state = random_state(&mut rng);
            let target = random_state(&mut rng);
            let delta = UpdateVector {
                vx: rng.gen_range(-20.0..20.0),
                vf: rng.gen_range(-0.3..0.3),
                ..ideal_update(&state, &target)
            };
            let (alpha, beta) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..2.0));
            let bd = total_loss(&state, &delta, &target, &pts, CENTER, alpha, beta).unwrap();
            let recombined = bd.pose + alpha * (beta * bd.huber_focal + bd.disent_reproj);
            assert!((bd.total - recombined).abs() < 1e-12);
        }
    }

    #[test]
    fn losses_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(113);
        let pts = random_points(&mut rng, 30);
        let state = random_state(&mut rng);
        let target = random_state(&mut rng);
        let delta = UpdateVector {
            vy: -12.0,
            ..ideal_update(&state, &target)
        };
        let a = total_loss(
            &state,
            &delta,
            &target,
            &pts,
            CENTER,
            DEFAULT_ALPHA,
            DEFAULT_BETA,
        )
        .unwrap();
        let b = total_loss(
            &state,
            &delta,
            &target,
            &pts,
            CENTER,
            DEFAULT_ALPHA,
            DEFAULT_BETA,
        )
        .unwrap();
        assert_eq!(a, b);
    }
}
