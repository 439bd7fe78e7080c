//! File schemas for scene sets, state records, metric reports, and plot
//! data.
//!
//! Every file starts with a version header line: `# camber.<schema> v1` for
//! CSV, `{"schema":"camber.<schema>","version":1}` for JSON lines. Floats
//! are written in shortest round-trip form, so rewriting parsed records
//! reproduces the bytes exactly.

use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{PixelPoint, Pose};
use crate::metrics::{EvalRecord, MetricReport};
use crate::update::{Detection2D, ParamState};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    JsonLines,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error(
        "missing or unrecognized header; expected a `# camber.{expected} v1` or JSON schema line"
    )]
    BadHeader { expected: &'static str },
    #[error("schema mismatch: expected camber.{expected}, found {found}")]
    SchemaMismatch {
        expected: &'static str,
        found: String,
    },
}

/// A serialized state: image dimensions, focal length, pose, detection box.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRecord {
    pub image_w: u32,
    pub image_h: u32,
    pub state: ParamState,
    pub detection: Detection2D,
}

/// A [`StateRecord`] plus the seed it was generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub seed: u64,
    pub record: StateRecord,
}

#[derive(Serialize, Deserialize)]
struct SchemaHeader {
    schema: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct StateRowJson {
    image_w: u32,
    image_h: u32,
    f: f64,
    r: [f64; 9],
    t: [f64; 3],
    #[serde(rename = "box")]
    bbox: [f64; 4],
}

#[derive(Serialize, Deserialize)]
struct SceneRowJson {
    seed: u64,
    #[serde(flatten)]
    state: StateRowJson,
}

impl StateRecord {
    fn to_row(&self) -> StateRowJson {
        let r = &self.state.pose.rotation;
        let t = &self.state.pose.translation;
        StateRowJson {
            image_w: self.image_w,
            image_h: self.image_h,
            f: self.state.focal,
            r: [
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
            t: [t.x, t.y, t.z],
            bbox: [
                self.detection.x1,
                self.detection.y1,
                self.detection.x2,
                self.detection.y2,
            ],
        }
    }

    fn from_row(row: StateRowJson, line: usize) -> Result<Self, ParseError> {
        let r = row.r;
        let detection = Detection2D::new(row.bbox[0], row.bbox[1], row.bbox[2], row.bbox[3])
            .map_err(|e| ParseError::Line {
                line,
                reason: e.to_string(),
            })?;
        Ok(StateRecord {
            image_w: row.image_w,
            image_h: row.image_h,
            state: ParamState {
                pose: Pose::new(
                    Matrix3::new(r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8]),
                    Vector3::new(row.t[0], row.t[1], row.t[2]),
                ),
                focal: row.f,
            },
            detection,
        })
    }

    fn csv_fields(&self) -> Vec<String> {
        let row = self.to_row();
        let mut fields = vec![
            row.image_w.to_string(),
            row.image_h.to_string(),
            row.f.to_string(),
        ];
        fields.extend(row.r.iter().map(|v| v.to_string()));
        fields.extend(row.t.iter().map(|v| v.to_string()));
        fields.extend(row.bbox.iter().map(|v| v.to_string()));
        fields
    }
}

const STATE_COLUMNS: &str =
    "image_w,image_h,f,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz,x1,y1,x2,y2";

fn parse_f64(token: &str, line: usize) -> Result<f64, ParseError> {
    token.trim().parse().map_err(|_| ParseError::Line {
        line,
        reason: format!("expected a number, found {token:?}"),
    })
}

fn parse_u64(token: &str, line: usize) -> Result<u64, ParseError> {
    token.trim().parse().map_err(|_| ParseError::Line {
        line,
        reason: format!("expected an integer, found {token:?}"),
    })
}

fn parse_state_fields(fields: &[&str], line: usize) -> Result<StateRecord, ParseError> {
    if fields.len() != 19 {
        return Err(ParseError::Line {
            line,
            reason: format!("expected 19 state columns, found {}", fields.len()),
        });
    }
    let mut nums = [0.0_f64; 19];
    for (slot, token) in nums.iter_mut().zip(fields.iter()) {
        *slot = parse_f64(token, line)?;
    }
    let row = StateRowJson {
        image_w: parse_u64(fields[0], line)? as u32,
        image_h: parse_u64(fields[1], line)? as u32,
        f: nums[2],
        r: nums[3..12].try_into().expect("slice length checked"),
        t: nums[12..15].try_into().expect("slice length checked"),
        bbox: nums[15..19].try_into().expect("slice length checked"),
    };
    StateRecord::from_row(row, line)
}

/// Split a file into its header (schema name) and data lines. CSV comment
/// lines (`#`) after the header are skipped.
fn split_header(
    text: &str,
    expected: &'static str,
) -> Result<(OutputFormat, Vec<(usize, String)>), ParseError> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or(ParseError::BadHeader { expected })?;
    let format = if first.trim_start().starts_with('{') {
        let header: SchemaHeader =
            serde_json::from_str(first).map_err(|_| ParseError::BadHeader { expected })?;
        let full = format!("camber.{expected}");
        if header.schema != full {
            return Err(ParseError::SchemaMismatch {
                expected,
                found: header.schema,
            });
        }
        OutputFormat::JsonLines
    } else if let Some(rest) = first.trim().strip_prefix("# camber.") {
        let mut parts = rest.split_whitespace();
        let found = parts.next().unwrap_or("");
        if found != expected {
            return Err(ParseError::SchemaMismatch {
                expected,
                found: format!("camber.{found}"),
            });
        }
        OutputFormat::Csv
    } else {
        return Err(ParseError::BadHeader { expected });
    };

    let data = lines
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !(format == OutputFormat::Csv && t.starts_with('#'))
        })
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect();
    Ok((format, data))
}

fn write_header<W: Write + ?Sized>(
    w: &mut W,
    format: OutputFormat,
    schema: &str,
    columns: &str,
) -> std::io::Result<()> {
    match format {
        OutputFormat::Csv => {
            writeln!(w, "# camber.{schema} v{FORMAT_VERSION}")?;
            writeln!(w, "# columns: {columns}")
        }
        OutputFormat::JsonLines => {
            let header = SchemaHeader {
                schema: format!("camber.{schema}"),
                version: FORMAT_VERSION,
            };
            writeln!(
                w,
                "{}",
                serde_json::to_string(&header).expect("header serializes")
            )
        }
    }
}

pub fn write_scenes<W: Write + ?Sized>(
    w: &mut W,
    records: &[SceneRecord],
    format: OutputFormat,
) -> std::io::Result<()> {
    write_header(w, format, "scenes", &format!("seed,{STATE_COLUMNS}"))?;
    for rec in records {
        match format {
            OutputFormat::Csv => {
                let mut fields = vec![rec.seed.to_string()];
                fields.extend(rec.record.csv_fields());
                writeln!(w, "{}", fields.join(","))?;
            }
            OutputFormat::JsonLines => {
                let row = SceneRowJson {
                    seed: rec.seed,
                    state: rec.record.to_row(),
                };
                writeln!(
                    w,
                    "{}",
                    serde_json::to_string(&row).expect("row serializes")
                )?;
            }
        }
    }
    Ok(())
}

pub fn parse_scenes(text: &str) -> Result<Vec<SceneRecord>, ParseError> {
    let (format, data) = split_header(text, "scenes")?;
    data.into_iter()
        .map(|(line, raw)| match format {
            OutputFormat::Csv => {
                let fields: Vec<&str> = raw.split(',').collect();
                if fields.len() != 20 {
                    return Err(ParseError::Line {
                        line,
                        reason: format!("expected 20 columns, found {}", fields.len()),
                    });
                }
                Ok(SceneRecord {
                    seed: parse_u64(fields[0], line)?,
                    record: parse_state_fields(&fields[1..], line)?,
                })
            }
            OutputFormat::JsonLines => {
                let row: SceneRowJson =
                    serde_json::from_str(&raw).map_err(|e| ParseError::Line {
                        line,
                        reason: e.to_string(),
                    })?;
                Ok(SceneRecord {
                    seed: row.seed,
                    record: StateRecord::from_row(row.state, line)?,
                })
            }
        })
        .collect()
}

pub fn write_states<W: Write + ?Sized>(
    w: &mut W,
    records: &[StateRecord],
    format: OutputFormat,
) -> std::io::Result<()> {
    write_header(w, format, "states", STATE_COLUMNS)?;
    for rec in records {
        match format {
            OutputFormat::Csv => writeln!(w, "{}", rec.csv_fields().join(","))?,
            OutputFormat::JsonLines => writeln!(
                w,
                "{}",
                serde_json::to_string(&rec.to_row()).expect("row serializes")
            )?,
        }
    }
    Ok(())
}

pub fn parse_states(text: &str) -> Result<Vec<StateRecord>, ParseError> {
    let (format, data) = split_header(text, "states")?;
    data.into_iter()
        .map(|(line, raw)| match format {
            OutputFormat::Csv => {
                let fields: Vec<&str> = raw.split(',').collect();
                parse_state_fields(&fields, line)
            }
            OutputFormat::JsonLines => {
                let row: StateRowJson =
                    serde_json::from_str(&raw).map_err(|e| ParseError::Line {
                        line,
                        reason: e.to_string(),
                    })?;
                StateRecord::from_row(row, line)
            }
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct ReportRowJson {
    iter: usize,
    count: usize,
    med_pose: f64,
    med_rot: f64,
    med_trans: f64,
    med_focal: f64,
    med_proj: f64,
    acc_rot: f64,
    acc_proj: f64,
    acc_det: f64,
}

/// Write one report row per iteration, `iter` being the row index.
pub fn write_reports<W: Write + ?Sized>(
    w: &mut W,
    reports: &[MetricReport],
    format: OutputFormat,
) -> std::io::Result<()> {
    write_header(
        w,
        format,
        "report",
        "iter,count,med_pose,med_rot,med_trans,med_focal,med_proj,acc_rot,acc_proj,acc_det",
    )?;
    for (iter, r) in reports.iter().enumerate() {
        let row = ReportRowJson {
            iter,
            count: r.count,
            med_pose: r.median_pose,
            med_rot: r.median_rot,
            med_trans: r.median_trans,
            med_focal: r.median_focal,
            med_proj: r.median_proj,
            acc_rot: r.acc_rot,
            acc_proj: r.acc_proj,
            acc_det: r.acc_det,
        };
        match format {
            OutputFormat::Csv => writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                row.iter,
                row.count,
                row.med_pose,
                row.med_rot,
                row.med_trans,
                row.med_focal,
                row.med_proj,
                row.acc_rot,
                row.acc_proj,
                row.acc_det
            )?,
            OutputFormat::JsonLines => writeln!(
                w,
                "{}",
                serde_json::to_string(&row).expect("row serializes")
            )?,
        }
    }
    Ok(())
}

/// Per-scene, per-iteration error rows.
pub fn write_trajectories<W: Write + ?Sized>(
    w: &mut W,
    trajectories: &[Vec<EvalRecord>],
    format: OutputFormat,
) -> std::io::Result<()> {
    write_header(
        w,
        format,
        "trajectories",
        "scene,iter,pose_err,rot_err,trans_err,focal_err,proj_err,iou",
    )?;
    for (scene, steps) in trajectories.iter().enumerate() {
        for (iter, r) in steps.iter().enumerate() {
            match format {
                OutputFormat::Csv => writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    scene, iter, r.pose_err, r.rot_err, r.trans_err, r.focal_err, r.proj_err, r.iou
                )?,
                OutputFormat::JsonLines => writeln!(
                    w,
                    "{}",
                    serde_json::json!({
                        "scene": scene,
                        "iter": iter,
                        "pose_err": r.pose_err,
                        "rot_err": r.rot_err,
                        "trans_err": r.trans_err,
                        "focal_err": r.focal_err,
                        "proj_err": r.proj_err,
                        "iou": r.iou,
                    })
                )?,
            }
        }
    }
    Ok(())
}

/// Final-iteration rotation and reprojection errors, one row per scene, for
/// external histogram plotting.
pub fn write_histogram<W: Write + ?Sized>(
    w: &mut W,
    finals: &[EvalRecord],
    format: OutputFormat,
) -> std::io::Result<()> {
    write_header(w, format, "histogram", "scene,rot_err,proj_err")?;
    for (scene, r) in finals.iter().enumerate() {
        match format {
            OutputFormat::Csv => writeln!(w, "{},{},{}", scene, r.rot_err, r.proj_err)?,
            OutputFormat::JsonLines => writeln!(
                w,
                "{}",
                serde_json::json!({"scene": scene, "rot_err": r.rot_err, "proj_err": r.proj_err})
            )?,
        }
    }
    Ok(())
}

/// Number of evenly spaced thresholds in [`write_thresholds`] sweeps.
pub const THRESHOLD_SWEEP_STEPS: usize = 50;

/// Accuracy as a function of the acceptance threshold, swept from 0 up to
/// the standard loose thresholds (pi/6 for rotation, 0.1 for reprojection).
pub fn write_thresholds<W: Write + ?Sized>(
    w: &mut W,
    finals: &[EvalRecord],
    format: OutputFormat,
) -> std::io::Result<()> {
    write_header(w, format, "thresholds", "metric,threshold,accuracy")?;
    type ErrorGetter = fn(&EvalRecord) -> f64;
    let sweeps: [(&str, f64, ErrorGetter); 2] = [
        ("rotation", crate::metrics::ACC_ROTATION_THRESHOLD, |r| {
            r.rot_err
        }),
        (
            "projection",
            crate::metrics::ACC_PROJECTION_THRESHOLD,
            |r| r.proj_err,
        ),
    ];
    for (name, max, get) in sweeps {
        for i in 0..=THRESHOLD_SWEEP_STEPS {
            let threshold = max * i as f64 / THRESHOLD_SWEEP_STEPS as f64;
            let acc = finals.iter().filter(|r| get(r) <= threshold).count() as f64
                / finals.len().max(1) as f64;
            match format {
                OutputFormat::Csv => writeln!(w, "{name},{threshold},{acc}")?,
                OutputFormat::JsonLines => writeln!(
                    w,
                    "{}",
                    serde_json::json!({"metric": name, "threshold": threshold, "accuracy": acc})
                )?,
            }
        }
    }
    Ok(())
}

/// Projected point rows `(index, u, v)`.
pub fn write_points<W: Write + ?Sized>(
    w: &mut W,
    points: &[PixelPoint],
    format: OutputFormat,
) -> std::io::Result<()> {
    write_header(w, format, "points", "index,u,v")?;
    for (index, p) in points.iter().enumerate() {
        match format {
            OutputFormat::Csv => writeln!(w, "{},{},{}", index, p.u, p.v)?,
            OutputFormat::JsonLines => writeln!(
                w,
                "{}",
                serde_json::json!({"index": index, "u": p.u, "v": p.v})
            )?,
        }
    }
    Ok(())
}
