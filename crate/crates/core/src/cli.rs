//! Subcommand implementations behind the `camber` binary.
//!
//! Functions here take resolved inputs (parsed configs, loaded meshes, file
//! contents) and write to any `Write`, so they are directly testable; the
//! binary is a thin argument-parsing layer. Errors carry one of three exit
//! classes: configuration/input problems (exit 2), OS-level I/O failures
//! (exit 3), and numeric/domain failures (exit 4).

use std::io::Write;

use thiserror::Error;

use crate::geometry::{project_point, GeometryError, PixelPoint};
use crate::io::{
    parse_scenes, parse_states, write_histogram, write_points, write_reports, write_scenes,
    write_thresholds, write_trajectories, OutputFormat, ParseError, SceneRecord, StateRecord,
};
use crate::loss::LossError;
use crate::metrics::{aggregate, eval_pair, EvalRecord, MetricReport, MetricsError};
use crate::refine::{run_experiment_on_scenes, ExperimentResult, PredictorSpec, RefineError};
use crate::scene::{
    derive_seed, sample_mesh_points, SceneConfig, SceneError, SceneSample, TriMesh,
};
use crate::update::UpdateError;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl From<SceneError> for CliError {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::Io { .. } => CliError::Io(e.to_string()),
            SceneError::InvalidConfig(_)
            | SceneError::MeshParse { .. }
            | SceneError::DegenerateMesh(_) => CliError::Config(e.to_string()),
            SceneError::TooManyResamples { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<RefineError> for CliError {
    fn from(e: RefineError) -> Self {
        match e {
            RefineError::InvalidGamma(_) | RefineError::NoIterations | RefineError::NoScenes => {
                CliError::Config(e.to_string())
            }
            RefineError::Scene(inner) => inner.into(),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::EmptyRecordList | MetricsError::EmptyPointSet => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<UpdateError> for CliError {
    fn from(e: UpdateError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<LossError> for CliError {
    fn from(e: LossError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// What `cmd_refine` writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitMode {
    /// One aggregated report row per iteration.
    Report,
    /// Per-scene, per-iteration error rows.
    Trajectories,
    /// Final-iteration rotation/reprojection errors per scene.
    Histogram,
    /// Accuracy swept over acceptance thresholds.
    Thresholds,
}

/// Scene source for `cmd_refine`: generate inline or reuse a scenes file.
#[derive(Debug, Clone)]
pub enum SceneSource {
    Generate {
        n_scenes: usize,
    },
    /// Contents of a file previously written by [`cmd_simulate`].
    FromFile {
        text: String,
    },
}

fn scene_to_record(s: &SceneSample) -> SceneRecord {
    SceneRecord {
        seed: s.seed,
        record: StateRecord {
            image_w: s.image_w,
            image_h: s.image_h,
            state: s.gt,
            detection: s.detection,
        },
    }
}

fn record_to_scene(
    rec: &SceneRecord,
    mesh: &TriMesh,
    n_points: usize,
) -> Result<SceneSample, CliError> {
    Ok(SceneSample {
        gt: rec.record.state,
        model_points: sample_mesh_points(mesh, n_points, derive_seed(rec.seed, 1))?,
        image_w: rec.record.image_w,
        image_h: rec.record.image_h,
        detection: rec.record.detection,
        seed: rec.seed,
    })
}

/// Generate `n_scenes` scenes and write their records.
pub fn cmd_simulate<W: Write + ?Sized>(
    config: &SceneConfig,
    mesh: &TriMesh,
    n_scenes: usize,
    seed: u64,
    format: OutputFormat,
    out: &mut W,
) -> Result<(), CliError> {
    if n_scenes == 0 {
        return Err(CliError::Config("scene count must be at least 1".into()));
    }
    let scenes = crate::refine::generate_scenes(config, mesh, n_scenes, seed)?;
    let records: Vec<SceneRecord> = scenes.iter().map(scene_to_record).collect();
    write_scenes(out, &records, format)?;
    Ok(())
}

/// Run a refinement experiment and emit the requested view of its results.
#[allow(clippy::too_many_arguments)]
pub fn cmd_refine<W: Write + ?Sized>(
    config: &SceneConfig,
    mesh: &TriMesh,
    predictor: &PredictorSpec,
    iterations: usize,
    source: &SceneSource,
    seed: u64,
    init_focal: f64,
    emit: EmitMode,
    format: OutputFormat,
    out: &mut W,
) -> Result<(), CliError> {
    let scenes: Vec<SceneSample> = match source {
        SceneSource::Generate { n_scenes } => {
            if *n_scenes == 0 {
                return Err(CliError::Config("scene count must be at least 1".into()));
            }
            crate::refine::generate_scenes(config, mesh, *n_scenes, seed)?
        }
        SceneSource::FromFile { text } => parse_scenes(text)?
            .iter()
            .map(|rec| record_to_scene(rec, mesh, config.n_points))
            .collect::<Result<_, _>>()?,
    };

    let result: ExperimentResult =
        run_experiment_on_scenes(&scenes, predictor, iterations, init_focal)?;

    match emit {
        EmitMode::Report => {
            let reports = result.per_iteration_reports()?;
            write_reports(out, &reports, format)?;
        }
        EmitMode::Trajectories => {
            let rows: Vec<Vec<EvalRecord>> = result
                .trajectories
                .iter()
                .map(|t| t.steps.iter().map(|s| s.record).collect())
                .collect();
            write_trajectories(out, &rows, format)?;
        }
        EmitMode::Histogram => {
            write_histogram(out, &result.final_records(), format)?;
        }
        EmitMode::Thresholds => {
            write_thresholds(out, &result.final_records(), format)?;
        }
    }
    Ok(())
}

/// Score externally supplied prediction/ground-truth state files.
///
/// Both files use the `states` schema and must have the same record count;
/// metrics for pair `i` use the ground-truth record's box and image
/// dimensions for normalization. Model points are sampled once from `mesh`.
pub fn cmd_eval<W: Write + ?Sized>(
    pred_text: &str,
    gt_text: &str,
    mesh: &TriMesh,
    n_points: usize,
    seed: u64,
    format: OutputFormat,
    out: &mut W,
) -> Result<MetricReport, CliError> {
    let preds = parse_states(pred_text)?;
    let gts = parse_states(gt_text)?;
    if preds.len() != gts.len() {
        return Err(CliError::Config(format!(
            "record count mismatch: {} predictions vs {} ground-truth records",
            preds.len(),
            gts.len()
        )));
    }
    if preds.is_empty() {
        return Err(CliError::Config("no records to evaluate".into()));
    }
    let pts = sample_mesh_points(mesh, n_points, seed)?;
    let records: Vec<EvalRecord> = preds
        .iter()
        .zip(gts.iter())
        .enumerate()
        .map(|(i, (p, g))| {
            eval_pair(
                &p.state,
                &g.state,
                &p.detection,
                &g.detection,
                &pts,
                g.image_w as f64,
                g.image_h as f64,
            )
            .map_err(|e| CliError::Numeric(format!("record {i}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let report = aggregate(&records)?;
    write_reports(out, &[report], format)?;
    Ok(report)
}

/// Project the model points under the first state record of `state_text`
/// and write `(index, u, v)` rows.
pub fn cmd_project<W: Write + ?Sized>(
    state_text: &str,
    mesh: &TriMesh,
    n_points: usize,
    seed: u64,
    format: OutputFormat,
    out: &mut W,
) -> Result<(), CliError> {
    let states = parse_states(state_text)?;
    let rec = states
        .first()
        .ok_or_else(|| CliError::Config("state file contains no records".into()))?;
    let pts = sample_mesh_points(mesh, n_points, seed)?;
    let intr = crate::geometry::CameraIntrinsics::centered(
        rec.state.focal,
        rec.image_w as f64,
        rec.image_h as f64,
    )?;

    let mut projected: Vec<PixelPoint> = Vec::with_capacity(pts.len());
    let mut behind: Vec<usize> = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        match project_point(&intr, &rec.state.pose, p) {
            Ok(px) => projected.push(px),
            Err(_) => behind.push(i),
        }
    }
    if !behind.is_empty() {
        let shown: Vec<String> = behind.iter().take(10).map(usize::to_string).collect();
        return Err(CliError::Numeric(format!(
            "{} points at or behind the camera (indices {}{})",
            behind.len(),
            shown.join(", "),
            if behind.len() > 10 { ", ..." } else { "" }
        )));
    }
    write_points(out, &projected, format)?;
    Ok(())
}
