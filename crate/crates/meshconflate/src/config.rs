//! TOML conflation config.
//!
//! ```toml
//! voxel_size = 0.5
//! max_bandwidth = 5.0
//! output = "fused.ply"
//!
//! [[sources]]
//! path = "drone.ply"
//! weight = 3.0
//! bandwidth = 1.0
//!
//! [[sources]]
//! path = "aerial.obj"
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use meshconflate_core::camera::{DEFAULT_RAYS_PER_CAMERA, DEFAULT_WINDOW};
use meshconflate_core::eval::{DEFAULT_SAMPLES, DEFAULT_TAU};
use meshconflate_core::occupancy::DEFAULT_CELL_BUDGET;
use meshconflate_core::raycast::DEFAULT_SKIP_EPSILON;
use meshconflate_core::tsdf::{ConflationParams, SourceProfile};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SourceEntry {
    pub path: PathBuf,
    /// Weight constant; defaults to 1.
    pub weight: Option<f64>,
    /// Truncation bandwidth in meters; defaults to `max_bandwidth`.
    pub bandwidth: Option<f64>,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DebugExports {
    /// Camera centers as a PLY point cloud.
    pub cameras: Option<PathBuf>,
    /// Centers of occupied coarse cells as a PLY point cloud.
    pub occupancy: Option<PathBuf>,
    /// Every ray hit point as a PLY point cloud.
    pub hit_points: Option<PathBuf>,
    /// Text dump of the volume, one `i j k D W` line per voxel.
    pub volume: Option<PathBuf>,
}

/// Reference comparison run after conflation.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EvaluationEntry {
    pub reference: PathBuf,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Key-value report path.
    pub report: Option<PathBuf>,
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ConflationConfig {
    pub voxel_size: f64,
    pub max_bandwidth: f64,
    pub coarse_cell_factor: f64,
    pub window_phi: usize,
    pub rays_per_camera: usize,
    pub adaptive_band: bool,
    pub skip_epsilon: f64,
    pub cell_budget: u64,
    pub sources: Vec<SourceEntry>,
    pub output: Option<PathBuf>,
    /// Worker threads; 0 or absent means available parallelism.
    pub threads: Option<usize>,
    /// Seed of the surface sampling used by evaluation.
    pub seed: u64,
    pub debug: DebugExports,
    pub evaluation: Option<EvaluationEntry>,
}

impl Default for ConflationConfig {
    fn default() -> Self {
        let p = ConflationParams::default();
        ConflationConfig {
            voxel_size: p.voxel_size,
            max_bandwidth: p.max_bandwidth,
            coarse_cell_factor: p.coarse_cell_factor,
            window_phi: DEFAULT_WINDOW,
            rays_per_camera: DEFAULT_RAYS_PER_CAMERA,
            adaptive_band: true,
            skip_epsilon: DEFAULT_SKIP_EPSILON,
            cell_budget: DEFAULT_CELL_BUDGET,
            sources: Vec::new(),
            output: None,
            threads: None,
            seed: 0,
            debug: DebugExports::default(),
            evaluation: None,
        }
    }
}

impl ConflationConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads and parses `path`, resolving relative paths against its
    /// directory. Does not validate.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for s in &mut self.sources {
            fix(&mut s.path);
        }
        for p in [
            self.output.as_mut(),
            self.debug.cameras.as_mut(),
            self.debug.occupancy.as_mut(),
            self.debug.hit_points.as_mut(),
            self.debug.volume.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        if let Some(e) = self.evaluation.as_mut() {
            fix(&mut e.reference);
            if let Some(r) = e.report.as_mut() {
                fix(r);
            }
        }
    }

    pub fn params(&self) -> ConflationParams {
        ConflationParams {
            voxel_size: self.voxel_size,
            max_bandwidth: self.max_bandwidth,
            coarse_cell_factor: self.coarse_cell_factor,
            window: self.window_phi,
            rays_per_camera: self.rays_per_camera,
            adaptive_band: self.adaptive_band,
            skip_epsilon: self.skip_epsilon,
            cell_budget: self.cell_budget,
        }
    }

    pub fn profiles(&self) -> Vec<SourceProfile> {
        self.sources
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let mut p = SourceProfile::new(
                    k,
                    s.weight.unwrap_or(1.0),
                    s.bandwidth.unwrap_or(self.max_bandwidth),
                );
                p.note = s.note.clone();
                p
            })
            .collect()
    }

    /// Checks every scalar and per-source invariant. Needs no file access.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.sources.is_empty() {
            return invalid("at least one source is required".into());
        }
        if !(self.voxel_size > 0.0) || !self.voxel_size.is_finite() {
            return invalid(format!("voxel_size must be > 0, got {}", self.voxel_size));
        }
        if !(self.max_bandwidth >= self.voxel_size) || !self.max_bandwidth.is_finite() {
            return invalid(format!(
                "max_bandwidth must be >= voxel_size ({}), got {}",
                self.voxel_size, self.max_bandwidth
            ));
        }
        for (k, p) in self.profiles().iter().enumerate() {
            if !(p.weight > 0.0) || !p.weight.is_finite() {
                return invalid(format!("source {k}: weight must be > 0, got {}", p.weight));
            }
            if !(p.bandwidth > 0.0) || p.bandwidth > self.max_bandwidth {
                return invalid(format!(
                    "source {k}: bandwidth must be in (0, max_bandwidth = {}], got {}",
                    self.max_bandwidth, p.bandwidth
                ));
            }
        }
        if let Some(e) = &self.evaluation {
            if !(e.tau > 0.0) || e.samples == 0 {
                return invalid("evaluation needs tau > 0 and samples >= 1".into());
            }
        }
        self.params()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}
