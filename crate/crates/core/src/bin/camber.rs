//! Command-line front end: synthetic scene generation, refinement
//! experiments, metric evaluation, and projection dumps.

// Validation uses `!(x > 0.0)` so NaN fails the checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use camber::cli::{
    cmd_eval, cmd_project, cmd_refine, cmd_simulate, CliError, EmitMode, SceneSource,
};
use camber::io::OutputFormat;
use camber::refine::PredictorSpec;
use camber::scene::{derive_seed, load_mesh, SceneConfig, TriMesh};
use camber::update::DEFAULT_INIT_FOCAL;

/// Random stream tag separating predictor noise from scene sampling.
const PREDICTOR_STREAM: u64 = 0x7072_6564;

#[derive(Parser)]
#[command(
    name = "camber",
    version,
    about = "Joint 6D pose and focal-length refinement: synthetic experiments, metrics, projections"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenes and write their records.
    Simulate(SimulateArgs),
    /// Run a refinement experiment and emit reports or plot data.
    Refine(RefineArgs),
    /// Score prediction/ground-truth state files with the benchmark metrics.
    Eval(EvalArgs),
    /// Project the model points under a state record.
    Project(ProjectArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    #[value(name = "json-lines", alias = "jsonl")]
    JsonLines,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::JsonLines => OutputFormat::JsonLines,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PredictorArg {
    Ideal,
    Damped,
    Noisy,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    /// Indoor-furniture profile: 15 iterations, 0.8-2.4 m distances.
    Pix3d,
    /// Car profile: 55 iterations, 0.8-3.0 m distances.
    Cars,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmitArg {
    Report,
    Trajectories,
    Histogram,
    Thresholds,
}

impl From<EmitArg> for EmitMode {
    fn from(e: EmitArg) -> Self {
        match e {
            EmitArg::Report => EmitMode::Report,
            EmitArg::Trajectories => EmitMode::Trajectories,
            EmitArg::Histogram => EmitMode::Histogram,
            EmitArg::Thresholds => EmitMode::Thresholds,
        }
    }
}

#[derive(Args)]
struct MeshArgs {
    /// Path to a plain-text triangle mesh (`v x y z` / `f i j k` lines).
    #[arg(long, conflicts_with = "builtin")]
    mesh: Option<PathBuf>,
    /// Procedural mesh: `cube` (1 m) or `icosphere` (1 m diameter).
    #[arg(long, default_value = "cube")]
    builtin: String,
    /// Uniform scale applied to the mesh vertices (meters per unit).
    #[arg(long, default_value_t = 0.1)]
    scale: f64,
}

impl MeshArgs {
    fn load(&self) -> Result<TriMesh, CliError> {
        let mesh = match &self.mesh {
            Some(path) => load_mesh(path)?,
            None => match self.builtin.as_str() {
                "cube" => TriMesh::unit_cube(),
                "icosphere" => TriMesh::icosphere(0.5, 2),
                other => {
                    return Err(CliError::Config(format!(
                        "unknown builtin mesh {other:?}; available: cube, icosphere"
                    )))
                }
            },
        };
        if !(self.scale > 0.0) {
            return Err(CliError::Config(format!(
                "mesh scale must be positive, got {}",
                self.scale
            )));
        }
        Ok(if self.scale == 1.0 {
            mesh
        } else {
            mesh.scaled(self.scale)
        })
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Scene configuration file (TOML); unset keys use profile defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parameter profile selecting iteration count and distance range.
    #[arg(long)]
    profile: Option<ProfileArg>,
    /// Override the number of model points sampled per scene.
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

impl CommonArgs {
    fn scene_config(&self) -> Result<SceneConfig, CliError> {
        let base = match self.profile {
            Some(ProfileArg::Pix3d) => SceneConfig::default().with_depth_range(0.8, 2.4),
            Some(ProfileArg::Cars) | None => SceneConfig::default(),
        };
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::Io(format!("cannot read config {}: {e}", path.display()))
                })?;
                SceneConfig::from_toml_str_over(&text, &base)?
            }
            None => base,
        };
        if let Some(points) = self.points {
            cfg.n_points = points;
            cfg.validate()?;
        }
        Ok(cfg)
    }

    fn default_iters(&self) -> usize {
        match self.profile {
            Some(ProfileArg::Cars) => 55,
            _ => 15,
        }
    }

    fn write_output(
        &self,
        produce: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
    ) -> Result<(), CliError> {
        match &self.out {
            Some(path) => {
                let file = fs::File::create(path)
                    .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
                let mut w = BufWriter::new(file);
                produce(&mut w)?;
                w.flush()?;
                Ok(())
            }
            None => {
                let stdout = std::io::stdout();
                let mut w = BufWriter::new(stdout.lock());
                produce(&mut w)?;
                w.flush()?;
                Ok(())
            }
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    mesh: MeshArgs,
    /// Number of scenes to generate.
    #[arg(long, default_value_t = 100)]
    scenes: usize,
}

#[derive(Args)]
struct RefineArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    mesh: MeshArgs,
    #[arg(long, value_enum, default_value = "ideal")]
    predictor: PredictorArg,
    /// Damping factor for damped/noisy predictors, in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Refinement iterations; defaults to the profile's count.
    #[arg(long)]
    iters: Option<usize>,
    /// Number of scenes to generate inline.
    #[arg(long, default_value_t = 100)]
    scenes: usize,
    /// Reuse scenes from a file written by `simulate` instead of generating.
    #[arg(long)]
    scenes_file: Option<PathBuf>,
    /// Initial focal length in pixels.
    #[arg(long, default_value_t = DEFAULT_INIT_FOCAL)]
    init_focal: f64,
    #[arg(long, value_enum, default_value = "report")]
    emit: EmitArg,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    mesh: MeshArgs,
    /// Predicted states file (`states` schema).
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth states file (`states` schema).
    #[arg(long)]
    gt: PathBuf,
}

#[derive(Args)]
struct ProjectArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    mesh: MeshArgs,
    /// States file; the first record is projected.
    #[arg(long)]
    state: PathBuf,
}

fn read_input(path: &PathBuf) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = args.common.scene_config()?;
            let mesh = args.mesh.load()?;
            let format = args.common.format.into();
            let (scenes, seed) = (args.scenes, args.common.seed);
            args.common
                .write_output(|w| cmd_simulate(&cfg, &mesh, scenes, seed, format, w))
        }
        Command::Refine(args) => {
            let cfg = args.common.scene_config()?;
            let mesh = args.mesh.load()?;
            let format = args.common.format.into();
            let iterations = args.iters.unwrap_or_else(|| args.common.default_iters());
            let predictor = match args.predictor {
                PredictorArg::Ideal => PredictorSpec::Ideal,
                PredictorArg::Damped => PredictorSpec::Damped { gamma: args.gamma },
                PredictorArg::Noisy => PredictorSpec::Noisy {
                    noise: cfg.noise,
                    gamma: args.gamma,
                    seed: derive_seed(args.common.seed, PREDICTOR_STREAM),
                },
            };
            let source = match &args.scenes_file {
                Some(path) => SceneSource::FromFile {
                    text: read_input(path)?,
                },
                None => SceneSource::Generate {
                    n_scenes: args.scenes,
                },
            };
            let (seed, init_focal, emit) = (args.common.seed, args.init_focal, args.emit.into());
            args.common.write_output(|w| {
                cmd_refine(
                    &cfg, &mesh, &predictor, iterations, &source, seed, init_focal, emit, format, w,
                )
            })
        }
        Command::Eval(args) => {
            let cfg = args.common.scene_config()?;
            let mesh = args.mesh.load()?;
            let format = args.common.format.into();
            let pred_text = read_input(&args.pred)?;
            let gt_text = read_input(&args.gt)?;
            let (n_points, seed) = (cfg.n_points, args.common.seed);
            args.common.write_output(|w| {
                cmd_eval(&pred_text, &gt_text, &mesh, n_points, seed, format, w).map(|_| ())
            })
        }
        Command::Project(args) => {
            let cfg = args.common.scene_config()?;
            let mesh = args.mesh.load()?;
            let format = args.common.format.into();
            let state_text = read_input(&args.state)?;
            let (n_points, seed) = (cfg.n_points, args.common.seed);
            args.common
                .write_output(|w| cmd_project(&state_text, &mesh, n_points, seed, format, w))
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
