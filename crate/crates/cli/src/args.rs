use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use projconn::metrics::Sampler;
use projconn::{Axis, LossMode};

#[derive(Debug, Parser)]
#[command(
    name = "projconn",
    version,
    about = "Connectivity losses on projected distance maps"
)]
pub struct Cli {
    /// Worker threads (0 or unset: one per core). Not recorded in run.json.
    #[arg(long, global = true, env = "PROJCONN_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Distance map of an SWC annotation.
    Gengt(GengtArgs),
    /// Composite loss and gradient of a prediction.
    Loss(LossArgs),
    /// Gradient descent on the voxels of a prediction.
    Optimize(OptimizeArgs),
    /// CCQ, APLS and TLTS of a prediction against an annotation.
    Eval(EvalArgs),
    /// Synthetic ground truth and corrupted prediction from a scene file.
    Synth(SynthArgs),
    /// Finite-difference check of the analytic gradient.
    Gradcheck(GradcheckArgs),
    /// Minimum-intensity projection as a 16-bit PGM.
    Project(ProjectArgs),
    /// Re-run a command recorded in a run.json.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum Mode {
    #[value(name = "3d")]
    #[serde(rename = "3d")]
    ThreeD,
    #[value(name = "2d")]
    #[serde(rename = "2d")]
    TwoD,
}

impl From<Mode> for LossMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::ThreeD => LossMode::Loss3d,
            Mode::TwoD => LossMode::Loss2d,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerArg {
    All,
    Leaves,
}

impl From<SamplerArg> for Sampler {
    fn from(s: SamplerArg) -> Self {
        match s {
            SamplerArg::All => Sampler::All,
            SamplerArg::Leaves => Sampler::Leaves,
        }
    }
}

fn parse_dims(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected X,Y,Z, got '{s}'"));
    }
    let mut out = [0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| format!("invalid extent '{p}'"))?;
    }
    Ok(out)
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct GengtArgs {
    /// SWC annotation.
    #[arg(long)]
    pub graph: PathBuf,
    /// Volume extent X,Y,Z (Z = 1 for a 2D map).
    #[arg(long, value_parser = parse_dims)]
    pub dims: [usize; 3],
    #[arg(long, default_value_t = 15.0)]
    pub dmax: f64,
    /// Sampling step used to rasterize the centerline.
    #[arg(long, default_value_t = 0.25)]
    pub step: f64,
    /// Output basename; writes <out>.vol and <out>.json.
    #[arg(long)]
    pub out: PathBuf,
}

/// Supervision shared by `loss` and `optimize`.
#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct TargetArgs {
    /// Prediction volume (basename, .vol or .json).
    #[arg(long)]
    pub pred: PathBuf,
    /// 3D ground-truth volume.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Three SWC files annotating the x, y and z projections.
    #[arg(long, value_delimiter = ',')]
    pub gt2d: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::ThreeD)]
    pub mode: Mode,
    #[arg(long, default_value_t = 1e-3)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    pub beta: f64,
    #[arg(long, default_value_t = 48)]
    pub window: usize,
    #[arg(long, default_value_t = 3)]
    pub dilation: usize,
    /// Projection axes to include.
    #[arg(long, value_delimiter = ',', default_values_t = Axis::ALL)]
    pub axes: Vec<Axis>,
    /// Use raw pair counts instead of per-window normalized ones.
    #[arg(long)]
    pub raw_pairs: bool,
    /// Truncation distance for maps rendered from --gt2d.
    #[arg(long, default_value_t = 15.0)]
    pub dmax: f64,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct LossArgs {
    #[command(flatten)]
    pub targets: TargetArgs,
    /// Loss report (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Gradient volume basename.
    #[arg(long)]
    pub grad_out: Option<PathBuf>,
    /// Per-event CSV dump.
    #[arg(long)]
    pub events_out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub targets: TargetArgs,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rate: f64,
    /// Volume whose positive voxels are left out of the MSE (3D mode).
    #[arg(long)]
    pub withhold: Option<PathBuf>,
    /// Final volume basename.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-step loss CSV.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Predicted distance volume.
    #[arg(long, conflicts_with = "pred_graph")]
    pub pred_vol: Option<PathBuf>,
    /// Predicted graph (SWC), rendered then extracted like the annotation.
    #[arg(long)]
    pub pred_graph: Option<PathBuf>,
    /// Reference annotation (SWC).
    #[arg(long)]
    pub gt_graph: PathBuf,
    /// Volume extent; defaults to the extent of --pred-vol.
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<[usize; 3]>,
    #[arg(long, default_value_t = 15.0)]
    pub dmax: f64,
    #[arg(long, default_value_t = 2.0)]
    pub threshold: f64,
    #[arg(long, default_value_t = 3.0)]
    pub ccq_tolerance: f64,
    #[arg(long, default_value_t = 0.15)]
    pub tlts_band: f64,
    #[arg(long, default_value_t = 500)]
    pub pairs: usize,
    #[arg(long, default_value_t = 5.0)]
    pub snap_radius: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SamplerArg::All)]
    pub sampler: SamplerArg,
    /// Metrics CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Prefix for the extracted graphs (<prefix>_pred.swc, <prefix>_gt.swc).
    #[arg(long)]
    pub graphs_out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    /// Scene description (JSON).
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    pub scene: Option<PathBuf>,
    /// Built-in scene instead of a file.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Output prefix: <out>_gt, <out>_pred, <out>_withheld volumes and <out>.swc.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// 32^3 straight tube with a 4-voxel gap in the middle.
    Gap,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 8)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::ThreeD)]
    pub mode: Mode,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    #[arg(long, hide = true)]
    pub corrupt_gradient: bool,
    /// Report (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ProjectArgs {
    #[arg(long)]
    pub vol: PathBuf,
    #[arg(long)]
    pub axis: Axis,
    /// Value mapped to 4096 in the image.
    #[arg(long, default_value_t = 15.0)]
    pub dmax: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// A run.json written by an earlier invocation.
    pub run: PathBuf,
}

fn absolute(p: &mut PathBuf) -> std::io::Result<()> {
    *p = std::path::absolute(&*p)?;
    Ok(())
}

fn absolute_opt(p: &mut Option<PathBuf>) -> std::io::Result<()> {
    if let Some(p) = p {
        absolute(p)?;
    }
    Ok(())
}

impl TargetArgs {
    fn resolve(&mut self) -> std::io::Result<()> {
        absolute(&mut self.pred)?;
        absolute_opt(&mut self.gt)?;
        self.gt2d.iter_mut().try_for_each(absolute)?;
        // canonical axis order
        self.axes = Axis::ALL
            .into_iter()
            .filter(|a| self.axes.contains(a))
            .collect();
        Ok(())
    }
}

impl Command {
    /// Makes every path absolute so the record replays from any directory.
    pub fn resolve(&mut self) -> std::io::Result<()> {
        match self {
            Command::Gengt(a) => {
                absolute(&mut a.graph)?;
                absolute(&mut a.out)
            }
            Command::Loss(a) => {
                a.targets.resolve()?;
                absolute(&mut a.out)?;
                absolute_opt(&mut a.grad_out)?;
                absolute_opt(&mut a.events_out)
            }
            Command::Optimize(a) => {
                a.targets.resolve()?;
                absolute_opt(&mut a.withhold)?;
                absolute(&mut a.out)?;
                absolute_opt(&mut a.trace_out)
            }
            Command::Eval(a) => {
                absolute_opt(&mut a.pred_vol)?;
                absolute_opt(&mut a.pred_graph)?;
                absolute(&mut a.gt_graph)?;
                absolute(&mut a.out)?;
                absolute_opt(&mut a.graphs_out)
            }
            Command::Synth(a) => {
                absolute_opt(&mut a.scene)?;
                absolute(&mut a.out)
            }
            Command::Gradcheck(a) => absolute(&mut a.out),
            Command::Project(a) => {
                absolute(&mut a.vol)?;
                absolute(&mut a.out)
            }
            Command::Replay(a) => absolute(&mut a.run),
        }
    }

    /// The primary output; run.json is written next to it.
    pub fn primary_output(&self) -> Option<&Path> {
        match self {
            Command::Gengt(a) => Some(&a.out),
            Command::Loss(a) => Some(&a.out),
            Command::Optimize(a) => Some(&a.out),
            Command::Eval(a) => Some(&a.out),
            Command::Synth(a) => Some(&a.out),
            Command::Gradcheck(a) => Some(&a.out),
            Command::Project(a) => Some(&a.out),
            Command::Replay(_) => None,
        }
    }
}
