//! The four subcommands. Each one checks every input it needs before it
//! writes anything, then runs its stages in a fixed order.

use std::path::{Path, PathBuf};

use inkportrait_core::maskops::{
    binarize, derive_sparsity_mask, fuse_eyebrows, remove_background, renew_eyeballs, style_fuse_hair, FaceAnnotations,
    FuseStatus, LabelMap,
};
use inkportrait_core::pathplan::{plan, PlanConfig, StrokeKind};
use inkportrait_core::plotemit::{emit_gcode, emit_svg, jaccard, rasterize_to_sketch, simulate, to_machine};
use inkportrait_core::raster::SketchImage;
use inkportrait_core::stylenet::{loss_log_csv, synthesize, train, Checkpoint, ContentSample, LossRecord, TrainData};
use log::{info, warn};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{PipelineConfig, SKETCH_BINARY, SKETCH_GRAY};
use crate::error::{CliError, CliResult};
use crate::io;

pub const LOSS_LOG: &str = "loss_log.csv";
pub const GCODE: &str = "plot.gcode";
pub const SVG: &str = "plot.svg";
pub const TRAJECTORY: &str = "trajectory.txt";
pub const SIMULATION: &str = "simulation.png";
pub const REPORT: &str = "report.json";
pub const MANIFEST: &str = "manifest.json";

pub fn candidate_name(i: usize) -> String {
    format!("candidate_{i}.png")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Artifact {
    /// File name inside the output directory, or the configured path's key.
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

impl Artifact {
    fn of(name: impl Into<String>, bytes: &[u8]) -> Self {
        Self {
            name: name.into(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        }
    }
}

/// Writes into the output directory and remembers what it wrote.
struct OutDir<'a> {
    dir: &'a Path,
    written: Vec<Artifact>,
}

impl<'a> OutDir<'a> {
    fn new(dir: &'a Path) -> Self {
        Self {
            dir,
            written: Vec::new(),
        }
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        io::write_file(&self.dir.join(name), bytes)?;
        self.written.push(Artifact::of(name, bytes));
        Ok(())
    }
}

fn require_file(key: &str, path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "paths.{key}: no such file {}",
            path.display()
        )))
    }
}

fn require_opt<'p>(key: &str, path: &'p Option<PathBuf>) -> CliResult<&'p Path> {
    let p = path
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("paths.{key} is required")))?;
    require_file(key, p)?;
    Ok(p)
}

fn require_list(key: &str, paths: &[PathBuf]) -> CliResult<()> {
    if paths.is_empty() {
        return Err(CliError::Config(format!("paths.{key} must list at least one file")));
    }
    for (i, p) in paths.iter().enumerate() {
        require_file(&format!("{key}[{i}]"), p)?;
    }
    Ok(())
}

fn prepare_out(cfg: &PipelineConfig) -> CliResult<()> {
    let out = &cfg.paths.out;
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Config(format!("paths.out: cannot create {}: {e}", out.display())))
}

fn check_sketch_inputs(cfg: &PipelineConfig) -> CliResult<()> {
    let p = &cfg.paths;
    require_opt("photo", &p.photo)?;
    require_list("styles", &p.styles)?;
    require_file("checkpoint", &p.checkpoint)?;
    if cfg.toggles.fusion && p.labels.is_none() {
        return Err(CliError::Config(
            "paths.labels is required while fusion is enabled (disable with --no-fusion)".into(),
        ));
    }
    if p.labels.is_some() {
        require_opt("labels", &p.labels)?;
    }
    if p.annotations.is_some() {
        require_opt("annotations", &p.annotations)?;
    }
    Ok(())
}

fn read_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Checkpoint::from_bytes(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_optional_labels(cfg: &PipelineConfig) -> CliResult<Option<LabelMap>> {
    cfg.paths.labels.as_deref().map(io::read_labels).transpose()
}

fn check_dims(what: &str, path: &Path, w: usize, h: usize, want: (usize, usize)) -> CliResult<()> {
    if (w, h) == want {
        Ok(())
    } else {
        Err(CliError::Data(format!(
            "{what} {} is {w}x{h}, expected {}x{}",
            path.display(),
            want.0,
            want.1
        )))
    }
}

// ---------------------------------------------------------------- train

#[derive(Debug, Clone)]
pub struct TrainOutputs {
    pub checkpoint: Checkpoint,
    pub log: Vec<LossRecord>,
    pub artifacts: Vec<Artifact>,
}

/// Train a decoder on `paths.train_photos` / `paths.train_labels` against
/// `paths.styles`; writes the checkpoint and `loss_log.csv`.
pub fn cmd_train(cfg: &PipelineConfig) -> CliResult<TrainOutputs> {
    let p = &cfg.paths;
    require_list("train_photos", &p.train_photos)?;
    require_list("styles", &p.styles)?;
    if p.train_labels.len() != p.train_photos.len() {
        return Err(CliError::Config(format!(
            "paths.train_labels lists {} files but paths.train_photos lists {}",
            p.train_labels.len(),
            p.train_photos.len()
        )));
    }
    require_list("train_labels", &p.train_labels)?;
    prepare_out(cfg)?;

    let contents = p
        .train_photos
        .iter()
        .zip(&p.train_labels)
        .map(|(photo, labels)| {
            let l = io::read_labels(labels)?;
            let raw = io::read_raster(photo)?;
            check_dims("label map", labels, l.width(), l.height(), (raw.width(), raw.height()))?;
            Ok(ContentSample {
                photo: remove_background(&raw, &l)?,
                mask: derive_sparsity_mask(&l),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let styles = p
        .styles
        .iter()
        .map(|s| io::read_raster(s))
        .collect::<CliResult<Vec<_>>>()?;
    let tc = cfg.effective_train();
    info!(
        "training on {} photos and {} styles for {} iterations",
        contents.len(),
        styles.len(),
        tc.iterations
    );
    let outcome = train(&tc, &TrainData { contents, styles })?;

    let bytes = outcome.checkpoint.to_bytes();
    io::write_file(&p.checkpoint, &bytes)?;
    let mut out = OutDir::new(&p.out);
    out.put(LOSS_LOG, loss_log_csv(&outcome.log).as_bytes())?;
    let mut artifacts = vec![Artifact::of("checkpoint", &bytes)];
    artifacts.append(&mut out.written);
    Ok(TrainOutputs {
        checkpoint: outcome.checkpoint,
        log: outcome.log,
        artifacts,
    })
}

// ---------------------------------------------------------------- sketch

#[derive(Debug, Clone)]
pub struct SketchOutputs {
    /// Global synthesis with the first style.
    pub gray: SketchImage,
    /// Binarized first-style synthesis before any post-processing.
    pub global: SketchImage,
    /// The post-processed binary sketch.
    pub sketch: SketchImage,
    /// Binarized synthesis for every configured style, in order.
    pub candidates: Vec<SketchImage>,
    pub artifacts: Vec<Artifact>,
}

/// Post-processing, in this fixed order: eyebrow fusion, eyeball renewal,
/// hair fusion. Hair fusion runs only when a second style exists.
pub fn post_process(
    global: &SketchImage,
    hair: Option<&SketchImage>,
    labels: &LabelMap,
    annotations: &FaceAnnotations,
    cfg: &PipelineConfig,
) -> CliResult<SketchImage> {
    let (s, status) = fuse_eyebrows(global, annotations, labels, cfg.sketch.brow_thin_iterations)?;
    if let FuseStatus::Applied(n) = status {
        info!("eyebrow fusion replaced {n} pixels");
    }
    let s = renew_eyeballs(&s, annotations, &cfg.sketch.eyeballs())?;
    Ok(match hair {
        Some(h) => style_fuse_hair(&s, h, labels)?,
        None => s,
    })
}

/// remove_background → synthesize → binarize → post-processing; writes
/// `sketch_gray.png`, `sketch.png` and one `candidate_<i>.png` per style.
pub fn cmd_sketch(cfg: &PipelineConfig) -> CliResult<SketchOutputs> {
    check_sketch_inputs(cfg)?;
    prepare_out(cfg)?;
    let p = &cfg.paths;
    let ckpt = read_checkpoint(&p.checkpoint)?;
    let photo_path = p.photo.as_deref().expect("checked above");
    let raw = io::read_raster(photo_path)?;
    let dims = (raw.width(), raw.height());
    let labels = read_optional_labels(cfg)?;
    let photo = match &labels {
        Some(l) => {
            check_dims("label map", p.labels.as_deref().unwrap(), l.width(), l.height(), dims)?;
            remove_background(&raw, l)?
        }
        None => {
            warn!("no label map configured; background kept");
            raw
        }
    };
    let annotations = match &p.annotations {
        Some(a) => io::read_annotations(a)?,
        None => FaceAnnotations::default(),
    };

    let mut grays = Vec::with_capacity(p.styles.len());
    let mut candidates = Vec::with_capacity(p.styles.len());
    for style_path in &p.styles {
        let style = io::read_raster(style_path)?;
        let g = synthesize(&photo, &style, &ckpt)?;
        candidates.push(binarize(g.raster(), cfg.sketch.threshold));
        grays.push(g);
    }
    let global = candidates[0].clone();
    let sketch = match (&labels, cfg.toggles.fusion) {
        (Some(l), true) => post_process(&global, candidates.get(1), l, &annotations, cfg)?,
        _ => global.clone(),
    };

    let mut out = OutDir::new(&p.out);
    let gray = grays.swap_remove(0);
    out.put(SKETCH_GRAY, &io::raster_png(gray.raster()))?;
    out.put(SKETCH_BINARY, &io::raster_png(sketch.raster()))?;
    for (i, c) in candidates.iter().enumerate() {
        out.put(&candidate_name(i), &io::raster_png(c.raster()))?;
    }
    info!("sketch: {} ink pixels", sketch.ink_count());
    Ok(SketchOutputs {
        gray,
        global,
        sketch,
        candidates,
        artifacts: out.written,
    })
}

// ---------------------------------------------------------------- plot

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotReport {
    pub sketch_width: usize,
    pub sketch_height: usize,
    pub strokes: usize,
    pub line_strokes: usize,
    pub fill_loops: usize,
    pub points: usize,
    pub draw_mm: f64,
    pub travel_mm: f64,
    pub pen_lifts: usize,
    pub estimated_seconds: f64,
    /// Program drawn back in sketch pixels against skeleton plus fills.
    pub jaccard: f64,
}

#[derive(Debug, Clone)]
pub struct PlotOutputs {
    pub report: PlotReport,
    pub artifacts: Vec<Artifact>,
}

fn plot_files(cfg: &PipelineConfig, sketch_path: &Path, gray_path: Option<&Path>) -> CliResult<PlotOutputs> {
    let raw = io::read_raster(sketch_path)?;
    let dims = (raw.width(), raw.height());
    let binary = SketchImage::binary(raw)
        .map_err(|e| CliError::Data(format!("{}: plot needs a binary sketch: {e}", sketch_path.display())))?;
    let gray = match gray_path {
        Some(g) => {
            let r = io::read_raster(g)?;
            check_dims("gray sketch", g, r.width(), r.height(), dims)?;
            r
        }
        None => binary.raster().clone(),
    };
    let labels = if cfg.toggles.fills {
        read_optional_labels(cfg)?
    } else {
        None
    };
    if let (Some(l), Some(path)) = (&labels, &cfg.paths.labels) {
        check_dims("label map", path, l.width(), l.height(), dims)?;
    }

    let pc = PlanConfig {
        fills: cfg.toggles.fills,
        ..PlanConfig::default()
    };
    let plan = plan(&binary, &gray, labels.as_ref(), &pc)?;
    let traj = &plan.trajectory;
    let prog = to_machine(traj, &cfg.workspace)?;
    let gcode = emit_gcode(&prog)?;
    let svg = emit_svg(&prog);
    let sim = simulate(&prog, cfg.plot.sim_px_per_mm)?;
    let back = rasterize_to_sketch(&prog, traj.width, traj.height)?;
    let stats = sim.stats;
    let report = PlotReport {
        sketch_width: traj.width,
        sketch_height: traj.height,
        strokes: traj.strokes.len(),
        line_strokes: traj.strokes.iter().filter(|s| s.kind == StrokeKind::Line).count(),
        fill_loops: traj.strokes.iter().filter(|s| s.kind == StrokeKind::FillLoop).count(),
        points: traj.point_count(),
        draw_mm: stats.draw_mm,
        travel_mm: stats.travel_mm,
        pen_lifts: stats.lifts,
        estimated_seconds: stats.time_s,
        jaccard: jaccard(&back, &plan.obligations())?,
    };
    let r = &sim.raster;
    let sim_png = io::png_bytes(
        r.width(),
        r.height(),
        r.bits().iter().map(|&ink| if ink { 0 } else { 255 }).collect(),
    );
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');

    let mut out = OutDir::new(&cfg.paths.out);
    out.put(GCODE, gcode.as_bytes())?;
    out.put(SVG, svg.as_bytes())?;
    out.put(TRAJECTORY, traj.dump().as_bytes())?;
    out.put(SIMULATION, &sim_png)?;
    out.put(REPORT, json.as_bytes())?;
    info!(
        "plot: {} strokes, {:.1} mm drawn, {:.1} mm travel, {:.1} s, jaccard {:.4}",
        report.strokes, report.draw_mm, report.travel_mm, report.estimated_seconds, report.jaccard
    );
    Ok(PlotOutputs {
        report,
        artifacts: out.written,
    })
}

/// skeletonize → trace → fills → order → machine program; writes G-code,
/// SVG, the trajectory dump, the simulated drawing and `report.json`.
pub fn cmd_plot(cfg: &PipelineConfig) -> CliResult<PlotOutputs> {
    let sketch = cfg.sketch_path();
    require_file("sketch", &sketch)?;
    let gray = cfg.sketch_gray_path();
    if let Some(g) = &gray {
        require_file("sketch_gray", g)?;
    }
    if cfg.toggles.fills && cfg.paths.labels.is_some() {
        require_opt("labels", &cfg.paths.labels)?;
    }
    prepare_out(cfg)?;
    plot_files(cfg, &sketch, gray.as_deref())
}

// ---------------------------------------------------------------- run

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageStatus {
    pub name: &'static str,
    /// `ok`, `failed` or `skipped`.
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Contents of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    /// `ok` or `failed`.
    pub status: &'static str,
    pub seed: u64,
    pub stages: Vec<StageStatus>,
    pub inputs: Vec<Artifact>,
    pub artifacts: Vec<Artifact>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PlotReport>,
}

fn input_hashes(cfg: &PipelineConfig) -> CliResult<Vec<Artifact>> {
    let p = &cfg.paths;
    let mut named: Vec<(String, &Path)> = vec![("checkpoint".into(), &p.checkpoint)];
    for (key, v) in [
        ("photo", &p.photo),
        ("labels", &p.labels),
        ("annotations", &p.annotations),
    ] {
        if let Some(path) = v {
            named.push((key.into(), path));
        }
    }
    named.extend(
        p.styles
            .iter()
            .enumerate()
            .map(|(i, s)| (format!("styles[{i}]"), s.as_path())),
    );
    named
        .into_iter()
        .map(|(name, path)| {
            let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
            Ok(Artifact::of(name, &bytes))
        })
        .collect()
}

fn write_manifest(cfg: &PipelineConfig, m: &Manifest) -> CliResult<()> {
    let mut json = serde_json::to_string_pretty(m).expect("manifest serializes");
    json.push('\n');
    io::write_file(&cfg.out_path(MANIFEST), json.as_bytes())
}

fn stage(name: &'static str, r: &Result<(), &CliError>) -> StageStatus {
    StageStatus {
        name,
        status: if r.is_ok() { "ok" } else { "failed" },
        error: r.as_ref().err().map(|e| e.to_string()),
    }
}

/// `sketch` then `plot` on the sketch just written, plus `manifest.json`.
///
/// A stage failure still writes the manifest, marking the failed stage and
/// listing the artifacts that exist; missing inputs fail before any write.
pub fn cmd_run(cfg: &PipelineConfig) -> CliResult<Manifest> {
    check_sketch_inputs(cfg)?;
    prepare_out(cfg)?;
    let mut m = Manifest {
        status: "failed",
        seed: cfg.seed,
        stages: Vec::new(),
        inputs: input_hashes(cfg)?,
        artifacts: Vec::new(),
        report: None,
    };
    let sketch = cmd_sketch(cfg);
    m.stages.push(stage("sketch", &sketch.as_ref().map(|_| ())));
    let plot = match sketch {
        Ok(s) => {
            m.artifacts.extend(s.artifacts);
            plot_files(cfg, &cfg.out_path(SKETCH_BINARY), Some(&cfg.out_path(SKETCH_GRAY)))
        }
        Err(e) => {
            m.stages.push(StageStatus {
                name: "plot",
                status: "skipped",
                error: None,
            });
            write_manifest(cfg, &m)?;
            return Err(e);
        }
    };
    m.stages.push(stage("plot", &plot.as_ref().map(|_| ())));
    match plot {
        Ok(p) => {
            m.artifacts.extend(p.artifacts);
            m.report = Some(p.report);
            m.status = "ok";
            write_manifest(cfg, &m)?;
            Ok(m)
        }
        Err(e) => {
            write_manifest(cfg, &m)?;
            Err(e)
        }
    }
}
