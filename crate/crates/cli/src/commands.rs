use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use projconn::gradcheck::{run_gradcheck, GradcheckConfig};
use projconn::io::{read_volume, write_gradient, write_pgm, write_volume};
use projconn::metrics::{
    extract_graph, score_graphs, voxel_coords, ExtractionConfig, MetricConfig,
};
use projconn::optimize::trajectory_csv;
use projconn::swc::{graph_to_swc, load_graph};
use projconn::synth::{gap_fixture, synth_volume, Scene};
use projconn::topo::events_csv;
use projconn::{
    gen_distance_map, gen_distance_map_2d, min_projection, optimize, topo_loss, Axis, AxisTargets,
    CompositeConfig, Dims, DistanceVolume, GenConfig, Grid2, OptimizeConfig, Targets, TopoConfig,
    VolumeKind,
};

use crate::args::{
    EvalArgs, GengtArgs, GradcheckArgs, LossArgs, Mode, OptimizeArgs, Preset, ProjectArgs,
    SynthArgs, TargetArgs,
};

/// Outcome of a command that ran to completion.
#[derive(Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// A check performed by the command did not pass.
    Failed,
}

/// Input or validation problem detected by the CLI itself.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Usage(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
        }
        _ => Ok(()),
    }
}

fn dims_of(d: [usize; 3]) -> Result<Dims> {
    Ok(Dims::new(d[0], d[1], d[2])?)
}

fn gen_config(d_max: f64) -> GenConfig {
    GenConfig {
        d_max,
        ..GenConfig::default()
    }
}

pub fn gengt(a: &GengtArgs) -> Result<Status> {
    let dims = dims_of(a.dims)?;
    let cfg = GenConfig {
        d_max: a.dmax,
        step: a.step,
    };
    let graph = load_graph(&a.graph, dims)?;
    let vol = gen_distance_map(&graph, dims, &cfg)?;
    ensure_parent(&a.out)?;
    write_volume(&a.out, &vol)?;
    Ok(Status::Ok)
}

impl TargetArgs {
    fn config(&self) -> CompositeConfig {
        CompositeConfig {
            alpha: self.alpha,
            axes: self.axes.clone(),
            mode: self.mode.into(),
            topo: TopoConfig {
                window: self.window,
                dilation_radius: self.dilation,
                beta: self.beta,
                normalize_pairs: !self.raw_pairs,
            },
        }
    }

    /// Loads the prediction and builds the supervision for the chosen mode.
    fn load(&self) -> Result<(DistanceVolume, Targets)> {
        let pred = read_volume(&self.pred)?;
        let targets = match self.mode {
            Mode::ThreeD => {
                if !self.gt2d.is_empty() {
                    return Err(usage("--gt2d needs --mode 2d"));
                }
                let Some(gt) = &self.gt else {
                    return Err(usage("--mode 3d needs --gt"));
                };
                Targets::volume(read_volume(gt)?.with_kind(VolumeKind::GroundTruth))
            }
            Mode::TwoD => {
                if self.gt.is_some() {
                    return Err(usage("--gt needs --mode 3d"));
                }
                if self.gt2d.len() != 3 {
                    return Err(usage(format!(
                        "--mode 2d needs three --gt2d files (x,y,z), got {}",
                        self.gt2d.len()
                    )));
                }
                let dims = pred.dims();
                let cfg = gen_config(self.dmax);
                let mut maps = Vec::with_capacity(3);
                for (axis, path) in Axis::ALL.into_iter().zip(&self.gt2d) {
                    let (w, h) = dims.projected(axis);
                    let graph = load_graph(path, Dims::new(w, h, 1)?)?;
                    maps.push(gen_distance_map_2d(&graph, w, h, &cfg)?);
                }
                let [x, y, z]: [Grid2; 3] = maps.try_into().expect("three maps");
                Targets::Projections(AxisTargets { x, y, z })
            }
        };
        Ok((pred, targets))
    }
}

fn target_map(targets: &Targets, axis: Axis) -> Grid2 {
    match targets {
        Targets::Volume { gt, .. } => min_projection(gt, axis).values,
        Targets::Projections(t) => t.get(axis).clone(),
    }
}

pub fn loss(a: &LossArgs) -> Result<Status> {
    let cfg = a.targets.config();
    let (pred, targets) = a.targets.load()?;
    let report = targets.evaluate(&pred, &cfg)?;
    write_text(&a.out, &report.summary.to_json())?;
    if let Some(path) = &a.grad_out {
        ensure_parent(path)?;
        write_gradient(path, report.dims, &report.gradient)?;
    }
    if let Some(path) = &a.events_out {
        let mut csv = String::from("axis,");
        let mut header_done = false;
        for axis in cfg.canonical_axes() {
            let r = topo_loss(
                &min_projection(&pred, axis).values,
                &target_map(&targets, axis),
                &cfg.topo,
            )?;
            let dump = events_csv(&r);
            let mut lines = dump.lines();
            let header = lines.next().unwrap_or_default();
            if !header_done {
                csv.push_str(header);
                csv.push('\n');
                header_done = true;
            }
            for line in lines {
                csv.push_str(axis.name());
                csv.push(',');
                csv.push_str(line);
                csv.push('\n');
            }
        }
        write_text(path, &csv)?;
    }
    Ok(Status::Ok)
}

pub fn optimize_cmd(a: &OptimizeArgs) -> Result<Status> {
    let cfg = a.targets.config();
    let (pred, mut targets) = a.targets.load()?;
    if let Some(path) = &a.withhold {
        let Targets::Volume { supervised, .. } = &mut targets else {
            return Err(usage("--withhold needs --mode 3d"));
        };
        let mask = read_volume(path)?;
        mask.ensure_same_shape(&pred)?;
        *supervised = Some(mask.values().iter().map(|&v| v <= 0.0).collect());
    }
    let opt = OptimizeConfig {
        steps: a.steps,
        rate: a.rate,
        d_max: a.targets.dmax,
    };
    let t = optimize(&pred, &targets, &cfg, &opt)?;
    ensure_parent(&a.out)?;
    write_volume(&a.out, &t.volume)?;
    if let Some(path) = &a.trace_out {
        write_text(path, &trajectory_csv(&t.records))?;
    }
    Ok(Status::Ok)
}

fn prefixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn eval(a: &EvalArgs) -> Result<Status> {
    let gen = gen_config(a.dmax);
    let pred = match (&a.pred_vol, &a.pred_graph) {
        (Some(p), None) => read_volume(p)?,
        (None, Some(g)) => {
            let Some(d) = a.dims else {
                return Err(usage("--pred-graph needs --dims"));
            };
            let dims = dims_of(d)?;
            gen_distance_map(&load_graph(g, dims)?, dims, &gen)?
        }
        _ => {
            return Err(usage(
                "exactly one of --pred-vol and --pred-graph is required",
            ))
        }
    };
    let dims = match a.dims {
        Some(d) => dims_of(d)?,
        None => pred.dims(),
    };
    if dims != pred.dims() {
        return Err(usage(format!(
            "--dims {dims} disagrees with the prediction extent {}",
            pred.dims()
        )));
    }
    let gt = gen_distance_map(&load_graph(&a.gt_graph, dims)?, dims, &gen)?;

    let extraction = ExtractionConfig {
        threshold: a.threshold,
    };
    extraction.validate()?;
    let metric = MetricConfig {
        ccq_tolerance: a.ccq_tolerance,
        tlts_band: a.tlts_band,
        apls_pairs: a.pairs,
        snap_radius: a.snap_radius,
        rng_seed: a.seed,
        sampler: a.sampler.into(),
    };
    let (pg, gg) = rayon::join(
        || extract_graph(&pred, &extraction),
        || extract_graph(&gt, &extraction),
    );
    let (pg, gg) = (pg?, gg?);
    let report = score_graphs(
        &pg,
        &gg,
        &voxel_coords(&pg, &pred),
        &voxel_coords(&gg, &gt),
        &metric,
    )?;
    write_text(&a.out, &report.to_csv())?;
    if let Some(prefix) = &a.graphs_out {
        write_text(&prefixed(prefix, "_pred.swc"), &pg.to_swc())?;
        write_text(&prefixed(prefix, "_gt.swc"), &gg.to_swc())?;
    }
    Ok(Status::Ok)
}

pub fn synth(a: &SynthArgs) -> Result<Status> {
    let scene: Scene = match (&a.scene, a.preset) {
        (Some(path), None) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        (None, Some(Preset::Gap)) => gap_fixture(),
        _ => return Err(usage("exactly one of --scene and --preset is required")),
    };
    let out = synth_volume(&scene)?;
    ensure_parent(&a.out)?;
    write_volume(&prefixed(&a.out, "_gt"), &out.ground_truth)?;
    write_volume(&prefixed(&a.out, "_pred"), &out.prediction)?;
    let withheld = DistanceVolume::from_values(
        out.ground_truth.dims(),
        out.gap_mask
            .iter()
            .map(|&m| if m { 1.0 } else { 0.0 })
            .collect(),
        VolumeKind::Predicted,
    )?;
    write_volume(&prefixed(&a.out, "_withheld"), &withheld)?;
    write_text(&prefixed(&a.out, ".swc"), &graph_to_swc(&out.graph))?;
    Ok(Status::Ok)
}

pub fn gradcheck(a: &GradcheckArgs) -> Result<Status> {
    let check = GradcheckConfig {
        size: a.size,
        seed: a.seed,
        mode: a.mode.into(),
        samples: a.samples,
        step: a.step,
        tolerance: a.tolerance,
        corrupt: a.corrupt_gradient,
    };
    let report = run_gradcheck(&check)?;
    let text = serde_json::to_string(&report)?;
    write_text(&a.out, &text)?;
    println!("{text}");
    Ok(if report.passed {
        Status::Ok
    } else {
        Status::Failed
    })
}

pub fn project(a: &ProjectArgs) -> Result<Status> {
    if !(a.dmax > 0.0 && a.dmax.is_finite()) {
        return Err(usage(format!("--dmax must be > 0, got {}", a.dmax)));
    }
    let vol = read_volume(&a.vol)?;
    ensure_parent(&a.out)?;
    write_pgm(&a.out, &min_projection(&vol, a.axis).values, a.dmax)?;
    Ok(Status::Ok)
}
