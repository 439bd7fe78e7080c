//! Joint 6D object pose and focal length refinement.
//!
//! The crate implements the mathematical core of an iterative
//! render-and-compare estimator for the pose of a known object together
//! with the camera focal length: the pinhole camera model, the non-linear
//! parameter update rule and its exact inverse, disentangled training
//! losses, benchmark metrics, and a synthetic experiment harness in which
//! oracle predictors stand in for a learned model.
//!
//! Modules:
//! - [`geometry`]: projection, rotation representations, geodesic distance
//! - [`update`]: the parameter update rule, its inverse, initialization
//! - [`loss`]: training losses and their disentangled variants
//! - [`metrics`]: evaluation errors, accuracies, aggregation
//! - [`scene`]: synthetic scene sampling, meshes, perturbation, cropping
//! - [`refine`]: the refinement loop and experiment runner
//! - [`io`]: versioned file schemas for scenes, states, and reports
//! - [`cli`]: the subcommand implementations behind the `camber` binary

// Validation uses `!(x > 0.0)` so NaN fails the checks; `x <= 0.0` would let it through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod geometry;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod refine;
pub mod scene;
pub mod update;

pub use geometry::{CameraIntrinsics, PixelPoint, Pose};
pub use loss::{LossBreakdown, ModelPoints};
pub use metrics::{EvalRecord, MetricReport};
pub use refine::{PredictorSpec, Trajectory};
pub use scene::{NoiseConfig, SceneConfig, SceneSample, TriMesh};
pub use update::{Detection2D, ParamState, UpdateVector};
