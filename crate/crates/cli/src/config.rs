//! Pipeline configuration: a sectioned TOML file plus path overrides.
//!
//! Relative paths in the file resolve against the file's directory. The
//! `INKPORTRAIT_*` environment variables may replace paths and nothing else;
//! list-valued paths use the platform path-list separator.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use inkportrait_core::maskops::{EyeballConfig, BINARIZE_THRESHOLD};
use inkportrait_core::plotemit::WorkspaceConfig;
use inkportrait_core::stylenet::TrainConfig;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub photo: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    /// Candidate styles. The first drives the sketch; with hair fusion on, the
    /// second supplies the hair region.
    #[serde(default)]
    pub styles: Vec<PathBuf>,
    pub checkpoint: PathBuf,
    pub out: PathBuf,
    /// Binary sketch read by `plot`; defaults to `<out>/sketch.png`.
    pub sketch: Option<PathBuf>,
    pub sketch_gray: Option<PathBuf>,
    /// Training photos and their label maps, paired by position.
    #[serde(default)]
    pub train_photos: Vec<PathBuf>,
    #[serde(default)]
    pub train_labels: Vec<PathBuf>,
}

/// Independent stage switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toggles {
    /// Sparsity term during training.
    pub sparsity: bool,
    /// Eyebrow fusion, eyeball renewal and hair fusion.
    pub fusion: bool,
    /// Fill loops for solid regions.
    pub fills: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Self {
            sparsity: true,
            fusion: true,
            fills: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SketchOptions {
    pub threshold: f32,
    pub brow_thin_iterations: usize,
    pub eyeball_check_radius: usize,
    pub eyeball_spot_fraction: f64,
}

impl Default for SketchOptions {
    fn default() -> Self {
        let e = EyeballConfig::default();
        Self {
            threshold: BINARIZE_THRESHOLD,
            brow_thin_iterations: 1,
            eyeball_check_radius: e.check_radius,
            eyeball_spot_fraction: e.spot_fraction,
        }
    }
}

impl SketchOptions {
    pub fn eyeballs(&self) -> EyeballConfig {
        EyeballConfig {
            check_radius: self.eyeball_check_radius,
            spot_fraction: self.eyeball_spot_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotOptions {
    /// Resolution of the simulated drawing.
    pub sim_px_per_mm: f64,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self { sim_px_per_mm: 4.0 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    paths: Paths,
    train: Option<toml::Table>,
    #[serde(default)]
    workspace: WorkspaceConfig,
    #[serde(default)]
    toggles: Toggles,
    #[serde(default)]
    sketch: SketchOptions,
    #[serde(default)]
    plot: PlotOptions,
}

const TRAIN_KEYS: [&str; 6] = [
    "weights",
    "toggles",
    "sparse_reduction",
    "iterations",
    "batch_size",
    "lr",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub paths: Paths,
    /// `train.seed` always equals `seed`.
    pub train: TrainConfig,
    pub workspace: WorkspaceConfig,
    pub toggles: Toggles,
    pub sketch: SketchOptions,
    pub plot: PlotOptions,
    pub seed: u64,
}

fn parse_train(table: Option<toml::Table>) -> CliResult<TrainConfig> {
    let Some(table) = table else {
        return Ok(TrainConfig::default());
    };
    for key in table.keys() {
        if key == "seed" {
            return Err(CliError::Config("train.seed: set the top-level seed instead".into()));
        }
        if !TRAIN_KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("train.{key}: unknown field")));
        }
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| CliError::Config(format!("train: {}", e.message())))
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    /// Parse TOML text; relative paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path) -> CliResult<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let at = e
                .span()
                .map(|s| {
                    let line = text[..s.start].matches('\n').count() + 1;
                    format!(" (line {line})")
                })
                .unwrap_or_default();
            CliError::Config(format!("{}{at}", e.message().trim_end()))
        })?;
        let mut paths = raw.paths;
        for p in [&mut paths.checkpoint, &mut paths.out] {
            resolve(base, p);
        }
        for p in [
            &mut paths.photo,
            &mut paths.labels,
            &mut paths.annotations,
            &mut paths.sketch,
            &mut paths.sketch_gray,
        ]
        .into_iter()
        .flatten()
        {
            resolve(base, p);
        }
        for p in paths
            .styles
            .iter_mut()
            .chain(&mut paths.train_photos)
            .chain(&mut paths.train_labels)
        {
            resolve(base, p);
        }
        let mut cfg = Self {
            paths,
            train: parse_train(raw.train)?,
            workspace: raw.workspace,
            toggles: raw.toggles,
            sketch: raw.sketch,
            plot: raw.plot,
            seed: raw.seed,
        };
        cfg.set_seed(raw.seed);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read `path`, then apply the process environment's path overrides.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = Self::from_toml(&text, base)?;
        cfg.apply_env(|k| std::env::var_os(k));
        Ok(cfg)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
    }

    /// Replace paths from `INKPORTRAIT_*` variables found by `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<OsString>) {
        let p = &mut self.paths;
        let one = |k: &str| lookup(k).filter(|v| !v.is_empty()).map(PathBuf::from);
        let list = |k: &str| lookup(k).map(|v| std::env::split_paths(&v).collect::<Vec<_>>());
        if let Some(v) = one("INKPORTRAIT_PHOTO") {
            p.photo = Some(v);
        }
        if let Some(v) = one("INKPORTRAIT_LABELS") {
            p.labels = Some(v);
        }
        if let Some(v) = one("INKPORTRAIT_ANNOTATIONS") {
            p.annotations = Some(v);
        }
        if let Some(v) = one("INKPORTRAIT_CHECKPOINT") {
            p.checkpoint = v;
        }
        if let Some(v) = one("INKPORTRAIT_OUT") {
            p.out = v;
        }
        if let Some(v) = one("INKPORTRAIT_SKETCH") {
            p.sketch = Some(v);
        }
        if let Some(v) = one("INKPORTRAIT_SKETCH_GRAY") {
            p.sketch_gray = Some(v);
        }
        if let Some(v) = list("INKPORTRAIT_STYLES") {
            p.styles = v;
        }
        if let Some(v) = list("INKPORTRAIT_TRAIN_PHOTOS") {
            p.train_photos = v;
        }
        if let Some(v) = list("INKPORTRAIT_TRAIN_LABELS") {
            p.train_labels = v;
        }
    }

    /// Checks that need no file system access.
    pub fn validate(&self) -> CliResult<()> {
        self.workspace.validate()?;
        self.train.validate()?;
        let s = &self.sketch;
        if !(0.0..=1.0).contains(&s.threshold) {
            return Err(CliError::Config(format!(
                "sketch.threshold must lie in [0, 1], got {}",
                s.threshold
            )));
        }
        if !(s.eyeball_spot_fraction.is_finite() && s.eyeball_spot_fraction > 0.0) {
            return Err(CliError::Config("sketch.eyeball_spot_fraction must be positive".into()));
        }
        let r = self.plot.sim_px_per_mm;
        if !(r.is_finite() && r > 0.0) {
            return Err(CliError::Config(format!(
                "plot.sim_px_per_mm must be positive, got {r}"
            )));
        }
        Ok(())
    }

    /// Training with the sparsity toggle folded into the loss switches.
    pub fn effective_train(&self) -> TrainConfig {
        let mut t = self.train.clone();
        t.toggles.sparse &= self.toggles.sparsity;
        t
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.paths.out.join(name)
    }

    pub fn sketch_path(&self) -> PathBuf {
        self.paths
            .sketch
            .clone()
            .unwrap_or_else(|| self.out_path(SKETCH_BINARY))
    }

    /// Gray companion of the plotted sketch, if there is one.
    pub fn sketch_gray_path(&self) -> Option<PathBuf> {
        match (&self.paths.sketch_gray, &self.paths.sketch) {
            (Some(g), _) => Some(g.clone()),
            (None, None) => Some(self.out_path(SKETCH_GRAY)).filter(|p| p.is_file()),
            (None, Some(_)) => None,
        }
    }
}

pub const SKETCH_BINARY: &str = "sketch.png";
pub const SKETCH_GRAY: &str = "sketch_gray.png";
