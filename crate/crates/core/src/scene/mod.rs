//! Synthetic scene generation: ground-truth state sampling, refiner-input
//! perturbation, detection boxes, and crop geometry.
//!
//! Every sampler is a pure function of an explicit seed plus configuration;
//! parallel callers partition the seed space instead of sharing RNG state.

mod mesh;

pub use mesh::{load_mesh, parse_mesh, sample_mesh_points, TriMesh};

use nalgebra::{Rotation3 as NRotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;
use thiserror::Error;

use crate::geometry::{project_point, CameraIntrinsics, Pose};
use crate::loss::ModelPoints;
use crate::update::{Detection2D, ParamState};

/// Default enlargement factor for [`compute_crop`].
pub const CROP_LAMBDA: f64 = 1.4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("mesh parse error at line {line}: {reason}")]
    MeshParse { line: usize, reason: String },
    #[error("degenerate mesh: {0}")]
    DegenerateMesh(&'static str),
    #[error("failed to read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid scene config: {0}")]
    InvalidConfig(String),
    #[error("object projected outside the image in {attempts} consecutive attempts")]
    TooManyResamples { attempts: u32 },
}

/// Standard deviations of the refiner-input error distribution.
///
/// The focal sigma is relative to the ground-truth focal length; translation
/// sigmas are in meters; the Euler sigma (radians) applies independently to
/// each of the three angles of the rotation perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(try_from = "NoiseConfigFile")]
pub struct NoiseConfig {
    pub focal_rel_sigma: f64,
    pub trans_xy_sigma: f64,
    pub depth_sigma: f64,
    pub euler_sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            focal_rel_sigma: 0.15,
            trans_xy_sigma: 0.01,
            depth_sigma: 0.05,
            euler_sigma: 15.0_f64.to_radians(),
        }
    }
}

impl NoiseConfig {
    /// All sigmas zero: perturbation becomes the identity.
    pub fn zero() -> Self {
        Self {
            focal_rel_sigma: 0.0,
            trans_xy_sigma: 0.0,
            depth_sigma: 0.0,
            euler_sigma: 0.0,
        }
    }

    fn validate(&self) -> Result<(), SceneError> {
        let all = [
            self.focal_rel_sigma,
            self.trans_xy_sigma,
            self.depth_sigma,
            self.euler_sigma,
        ];
        if all.iter().any(|s| !(*s >= 0.0)) {
            return Err(SceneError::InvalidConfig(
                "noise sigmas must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// File representation of [`NoiseConfig`]: angles are written in degrees at
/// this boundary and converted to radians on load.
#[derive(Debug, Clone, Deserialize)]
struct NoiseConfigFile {
    focal_rel_sigma: Option<f64>,
    trans_xy_sigma: Option<f64>,
    depth_sigma: Option<f64>,
    euler_sigma_deg: Option<f64>,
}

impl TryFrom<NoiseConfigFile> for NoiseConfig {
    type Error = String;

    fn try_from(raw: NoiseConfigFile) -> Result<Self, String> {
        let d = NoiseConfig::default();
        let cfg = NoiseConfig {
            focal_rel_sigma: raw.focal_rel_sigma.unwrap_or(d.focal_rel_sigma),
            trans_xy_sigma: raw.trans_xy_sigma.unwrap_or(d.trans_xy_sigma),
            depth_sigma: raw.depth_sigma.unwrap_or(d.depth_sigma),
            euler_sigma: raw
                .euler_sigma_deg
                .map(f64::to_radians)
                .unwrap_or(d.euler_sigma),
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

/// Scene generation ranges and sizes.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "SceneConfigFile")]
pub struct SceneConfig {
    pub image_w: u32,
    pub image_h: u32,
    /// Ground-truth focal length range in pixels, sampled uniformly.
    pub focal_range: (f64, f64),
    /// Camera-object distance range in meters, sampled uniformly; the
    /// translation norm lands in this interval.
    pub depth_range: (f64, f64),
    /// Full side length in meters of the box the in-plane position is drawn
    /// from (position is uniform in +-`xy_box / 2`).
    pub xy_box: f64,
    /// Number of surface points sampled per scene.
    pub n_points: usize,
    /// Gaussian pixel noise added to each detection-box coordinate;
    /// 0 keeps boxes at the exact projected-point bounds.
    pub box_jitter: f64,
    /// Resample budget before a scene whose object will not fit in the
    /// image is reported as an error.
    pub max_resample: u32,
    pub noise: NoiseConfig,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            image_w: 640,
            image_h: 480,
            focal_range: (200.0, 1000.0),
            depth_range: (0.8, 3.0),
            xy_box: 0.15,
            n_points: 1000,
            box_jitter: 0.0,
            max_resample: 64,
            noise: NoiseConfig::default(),
        }
    }
}

impl SceneConfig {
    /// The shorter distance range used for indoor-furniture style scenes.
    pub fn with_depth_range(mut self, lo: f64, hi: f64) -> Self {
        self.depth_range = (lo, hi);
        self
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.image_w == 0 || self.image_h == 0 {
            return Err(SceneError::InvalidConfig(
                "image dimensions must be nonzero".into(),
            ));
        }
        for (name, (lo, hi)) in [
            ("focal_range", self.focal_range),
            ("depth_range", self.depth_range),
        ] {
            if !(lo > 0.0 && hi > lo) {
                return Err(SceneError::InvalidConfig(format!(
                    "{name} must satisfy 0 < lo < hi, got ({lo}, {hi})"
                )));
            }
        }
        if !(self.xy_box >= 0.0) {
            return Err(SceneError::InvalidConfig("xy_box must be >= 0".into()));
        }
        // The depth coordinate is sqrt(d^2 - x^2 - y^2); the minimum distance
        // must dominate the largest possible in-plane offset.
        let max_xy_sq = 2.0 * (self.xy_box / 2.0) * (self.xy_box / 2.0);
        if self.depth_range.0 * self.depth_range.0 <= max_xy_sq {
            return Err(SceneError::InvalidConfig(
                "depth_range lower bound must exceed the in-plane box half-diagonal".into(),
            ));
        }
        if self.n_points == 0 {
            return Err(SceneError::InvalidConfig(
                "n_points must be at least 1".into(),
            ));
        }
        if !(self.box_jitter >= 0.0) {
            return Err(SceneError::InvalidConfig("box_jitter must be >= 0".into()));
        }
        if self.max_resample == 0 {
            return Err(SceneError::InvalidConfig(
                "max_resample must be at least 1".into(),
            ));
        }
        self.noise.validate()
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SceneError> {
        let cfg: SceneConfig =
            toml::from_str(text).map_err(|e| SceneError::InvalidConfig(e.to_string()))?;
        Ok(cfg)
    }

    /// Parse a config file whose unset keys fall back to `base` instead of
    /// the built-in defaults (used to layer files over CLI profiles).
    pub fn from_toml_str_over(text: &str, base: &SceneConfig) -> Result<Self, SceneError> {
        let raw: SceneConfigFile =
            toml::from_str(text).map_err(|e| SceneError::InvalidConfig(e.to_string()))?;
        let cfg = raw.over(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path).map_err(|e| SceneError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneConfigFile {
    image_w: Option<u32>,
    image_h: Option<u32>,
    focal_range: Option<(f64, f64)>,
    depth_range: Option<(f64, f64)>,
    xy_box: Option<f64>,
    n_points: Option<usize>,
    box_jitter: Option<f64>,
    max_resample: Option<u32>,
    noise: Option<NoiseConfig>,
}

impl SceneConfigFile {
    fn over(self, base: &SceneConfig) -> SceneConfig {
        SceneConfig {
            image_w: self.image_w.unwrap_or(base.image_w),
            image_h: self.image_h.unwrap_or(base.image_h),
            focal_range: self.focal_range.unwrap_or(base.focal_range),
            depth_range: self.depth_range.unwrap_or(base.depth_range),
            xy_box: self.xy_box.unwrap_or(base.xy_box),
            n_points: self.n_points.unwrap_or(base.n_points),
            box_jitter: self.box_jitter.unwrap_or(base.box_jitter),
            max_resample: self.max_resample.unwrap_or(base.max_resample),
            noise: self.noise.unwrap_or(base.noise),
        }
    }
}

impl TryFrom<SceneConfigFile> for SceneConfig {
    type Error = String;

    fn try_from(raw: SceneConfigFile) -> Result<Self, String> {
        let cfg = raw.over(&SceneConfig::default());
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

/// One synthetic trial: ground-truth state, the sampled surface points, the
/// image dimensions, and the detection box of the projected points.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSample {
    pub gt: ParamState,
    pub model_points: ModelPoints,
    pub image_w: u32,
    pub image_h: u32,
    pub detection: Detection2D,
    pub seed: u64,
}

impl SceneSample {
    /// Principal point of the scene camera (the image center).
    pub fn center(&self) -> (f64, f64) {
        (self.image_w as f64 / 2.0, self.image_h as f64 / 2.0)
    }

    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics {
            f: self.gt.focal,
            cx: self.image_w as f64 / 2.0,
            cy: self.image_h as f64 / 2.0,
        }
    }
}

/// Mix a base seed with a stream index into an independent substream seed
/// (splitmix64-style finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Rotation drawn uniformly on SO(3) via uniform unit quaternions.
pub fn sample_uniform_rotation(rng: &mut impl Rng) -> nalgebra::Matrix3<f64> {
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

/// Generate one scene: uniform rotation, in-plane position uniform in the
/// configured box, camera-object distance uniform in `depth_range`, focal
/// length uniform in `focal_range`. States whose projected points leave the
/// image are resampled up to `max_resample` times.
pub fn sample_scene(
    seed: u64,
    config: &SceneConfig,
    mesh: &TriMesh,
) -> Result<SceneSample, SceneError> {
    config.validate()?;
    let model_points = sample_mesh_points(mesh, config.n_points, derive_seed(seed, 1))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));

    let (w, h) = (config.image_w as f64, config.image_h as f64);
    let half_box = config.xy_box / 2.0;

    for _attempt in 0..config.max_resample {
        let rotation = sample_uniform_rotation(&mut rng);
        let x = rng.gen_range(-half_box..=half_box);
        let y = rng.gen_range(-half_box..=half_box);
        let dist = rng.gen_range(config.depth_range.0..config.depth_range.1);
        let focal = rng.gen_range(config.focal_range.0..config.focal_range.1);
        let z = (dist * dist - x * x - y * y).sqrt();

        let gt = ParamState {
            pose: Pose::new(rotation, Vector3::new(x, y, z)),
            focal,
        };
        let intr = CameraIntrinsics {
            f: focal,
            cx: w / 2.0,
            cy: h / 2.0,
        };

        let mut bounds: Option<(f64, f64, f64, f64)> = None;
        let mut ok = true;
        for p in model_points.iter() {
            match project_point(&intr, &gt.pose, p) {
                Ok(px) if px.u >= 0.0 && px.u <= w && px.v >= 0.0 && px.v <= h => {
                    bounds = Some(match bounds {
                        None => (px.u, px.v, px.u, px.v),
                        Some((x1, y1, x2, y2)) => {
                            (x1.min(px.u), y1.min(px.v), x2.max(px.u), y2.max(px.v))
                        }
                    });
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let (mut x1, mut y1, mut x2, mut y2) =
            bounds.expect("point set is non-empty by construction");

        if config.box_jitter > 0.0 {
            let normal = Normal::new(0.0, config.box_jitter)
                .map_err(|e| SceneError::InvalidConfig(e.to_string()))?;
            let mut jitter_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 3));
            x1 += normal.sample(&mut jitter_rng);
            y1 += normal.sample(&mut jitter_rng);
            x2 += normal.sample(&mut jitter_rng);
            y2 += normal.sample(&mut jitter_rng);
            if x2 <= x1 {
                std::mem::swap(&mut x1, &mut x2);
                x2 += 1e-9;
            }
            if y2 <= y1 {
                std::mem::swap(&mut y1, &mut y2);
                y2 += 1e-9;
            }
        }

        let detection = Detection2D::new(x1, y1, x2, y2)
            .map_err(|e| SceneError::InvalidConfig(e.to_string()))?;

        return Ok(SceneSample {
            gt,
            model_points,
            image_w: config.image_w,
            image_h: config.image_h,
            detection,
            seed,
        });
    }

    Err(SceneError::TooManyResamples {
        attempts: config.max_resample,
    })
}

/// Perturb a ground-truth state with the configured error distribution:
/// focal scaled by a truncated-positive Gaussian, in-plane translation and
/// depth shifted by Gaussians (depth truncated positive), and the rotation
/// composed with a random Euler-angle rotation.
///
/// Truncation is by rejection resampling, so all sigmas zero reproduces the
/// input exactly.
pub fn perturb_state(gt: &ParamState, noise: &NoiseConfig, seed: u64) -> ParamState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let focal_dist = Normal::new(gt.focal, noise.focal_rel_sigma * gt.focal)
        .expect("sigma is validated non-negative");
    let mut focal = focal_dist.sample(&mut rng);
    while focal <= 0.0 {
        focal = focal_dist.sample(&mut rng);
    }

    let xy_dist = Normal::new(0.0, noise.trans_xy_sigma).expect("sigma is validated non-negative");
    let x = gt.pose.translation.x + xy_dist.sample(&mut rng);
    let y = gt.pose.translation.y + xy_dist.sample(&mut rng);

    let z_dist = Normal::new(0.0, noise.depth_sigma).expect("sigma is validated non-negative");
    let mut z = gt.pose.translation.z + z_dist.sample(&mut rng);
    while z <= 0.0 {
        z = gt.pose.translation.z + z_dist.sample(&mut rng);
    }

    let euler_dist = Normal::new(0.0, noise.euler_sigma).expect("sigma is validated non-negative");
    let roll = euler_dist.sample(&mut rng);
    let pitch = euler_dist.sample(&mut rng);
    let yaw = euler_dist.sample(&mut rng);
    let rotation = NRotation3::from_euler_angles(roll, pitch, yaw).into_inner() * gt.pose.rotation;

    ParamState {
        pose: Pose::new(rotation, Vector3::new(x, y, z)),
        focal,
    }
}

/// Crop window for a detection box around a projected object center.
///
/// `x_dist`/`y_dist` are the largest horizontal/vertical distances from the
/// center to a box edge; the window is `2 * lambda` times those extents,
/// widened to respect the aspect ratio `r = width / height`.
pub fn compute_crop(
    det: &Detection2D,
    projected_center: &crate::geometry::PixelPoint,
    aspect: f64,
    lambda: f64,
) -> (f64, f64) {
    let x_dist = (det.x1 - projected_center.u)
        .abs()
        .max((det.x2 - projected_center.u).abs());
    let y_dist = (det.y1 - projected_center.v)
        .abs()
        .max((det.y2 - projected_center.v).abs());
    let w = x_dist.max(y_dist / aspect) * 2.0 * lambda;
    let h = (x_dist / aspect).max(y_dist) * 2.0 * lambda;
    (w, h)
}
