//! Run configuration and deterministic seed derivation.
//!
//! Every random draw in the pipeline traces back to one master seed through
//! [`derive_seed`] / [`derive_seed_indexed`]: each concern (temporal
//! sampling, position sampling, policy, per-cell ablation runs, ...) names
//! its own stream with a tag, so reseeding one concern never shifts another.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("referenced path does not exist: {0}")]
    MissingPath(String),
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable per-concern RNG stream: FNV-1a over the tag, mixed with the master
/// seed.
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(master ^ h)
}

/// Indexed variant for per-spawn / per-cell / per-trial streams.
pub fn derive_seed_indexed(master: u64, tag: &str, index: u64) -> u64 {
    splitmix64(derive_seed(master, tag) ^ splitmix64(index))
}

/// DBSCAN settings published for the three reference scenes.
pub fn clustering_preset(name: &str) -> Option<(f64, usize)> {
    match name {
        "gc" => Some((0.2, 20)),
        "forum" => Some((2.0, 5)),
        "eth" => Some((0.8, 3)),
        _ => None,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub master_seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    #[serde(default)]
    pub ntpp: NtppConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub synth: Option<crate::synth::SynthSpec>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Optional affine transform [a, b, c, d, tx, ty] applied at load:
    /// (x, y) -> (a x + b y + tx, c x + d y + ty). Converts pixel or
    /// homography coordinates into scene-local meters.
    #[serde(default)]
    pub transform: Option<[f64; 6]>,
    #[serde(default)]
    pub occupancy: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringConfig {
    /// Named preset ("gc", "forum", "eth") overriding eps/min_samples.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_min_samples")]
    pub min_samples: usize,
}

fn default_eps() -> f64 {
    0.5
}
fn default_min_samples() -> usize {
    5
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            preset: None,
            eps: default_eps(),
            min_samples: default_min_samples(),
        }
    }
}

impl ClusteringConfig {
    /// (eps, min_samples) after applying any preset.
    pub fn resolve(&self) -> Result<(f64, usize), ConfigError> {
        match &self.preset {
            Some(name) => clustering_preset(name).ok_or_else(|| {
                ConfigError::Invalid(format!("unknown clustering preset '{name}'"))
            }),
            None => Ok((self.eps, self.min_samples)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NtppConfig {
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default = "default_overlap")]
    pub overlap: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
}

fn default_window() -> f64 {
    500.0
}
fn default_overlap() -> f64 {
    50.0
}
fn default_epochs() -> usize {
    500
}
fn default_lr() -> f64 {
    1e-4
}

impl Default for NtppConfig {
    fn default() -> Self {
        NtppConfig {
            window: default_window(),
            overlap: default_overlap(),
            epochs: default_epochs(),
            lr: default_lr(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_n_rollouts")]
    pub n_rollouts: usize,
}

fn default_length() -> f64 {
    10_000.0
}
fn default_n_rollouts() -> usize {
    1
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            length: default_length(),
            n_rollouts: default_n_rollouts(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    #[serde(default = "default_policy_kind")]
    pub kind: String,
    /// Speed cap in meters per second; divided by `fps` to get the per-frame
    /// displacement cap.
    #[serde(default = "default_v_max")]
    pub v_max_mps: f64,
    #[serde(default = "default_fps")]
    pub fps: f64,
    #[serde(default)]
    pub ray_count: usize,
    #[serde(default = "default_bc_epochs")]
    pub bc_epochs: usize,
    #[serde(default = "default_lr")]
    pub bc_lr: f64,
}

fn default_policy_kind() -> String {
    "scripted".to_string()
}
fn default_v_max() -> f64 {
    1.5
}
fn default_fps() -> f64 {
    1.0
}
fn default_bc_epochs() -> usize {
    1000
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            kind: default_policy_kind(),
            v_max_mps: default_v_max(),
            fps: default_fps(),
            ray_count: 0,
            bc_epochs: default_bc_epochs(),
            bc_lr: default_lr(),
        }
    }
}

impl PolicyConfig {
    pub fn v_max_per_frame(&self) -> f64 {
        self.v_max_mps / self.fps
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "default_goal_radius")]
    pub goal_radius: f64,
    #[serde(default = "default_max_lifetime")]
    pub max_lifetime: u64,
}

fn default_goal_radius() -> f64 {
    0.5
}
fn default_max_lifetime() -> u64 {
    5000
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            goal_radius: default_goal_radius(),
            max_lifetime: default_max_lifetime(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Range checks on every numeric field. With `require_dataset`, the
    /// dataset path (and occupancy map, if named) must exist.
    pub fn validate(&self, require_dataset: bool) -> Result<(), ConfigError> {
        let (eps, min_samples) = self.clustering.resolve()?;
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(ConfigError::Invalid(format!("clustering.eps must be > 0, got {eps}")));
        }
        if min_samples == 0 {
            return Err(ConfigError::Invalid("clustering.min_samples must be >= 1".into()));
        }
        let n = &self.ntpp;
        if !(n.window > 0.0 && n.window.is_finite()) {
            return Err(ConfigError::Invalid(format!("ntpp.window must be > 0, got {}", n.window)));
        }
        if !(n.overlap >= 0.0 && n.overlap < n.window) {
            return Err(ConfigError::Invalid(format!(
                "ntpp.overlap must satisfy 0 <= o < w, got o={} w={}",
                n.overlap, n.window
            )));
        }
        if n.epochs == 0 || n.epochs > crate::tpp::MAX_EPOCHS {
            return Err(ConfigError::Invalid(format!(
                "ntpp.epochs must be in 1..={}, got {}",
                crate::tpp::MAX_EPOCHS,
                n.epochs
            )));
        }
        if !(n.lr > 0.0 && n.lr.is_finite()) {
            return Err(ConfigError::Invalid(format!("ntpp.lr must be > 0, got {}", n.lr)));
        }
        let s = &self.sampling;
        if !(s.length > 0.0 && s.length.is_finite()) {
            return Err(ConfigError::Invalid(format!("sampling.length must be > 0, got {}", s.length)));
        }
        if s.n_rollouts == 0 {
            return Err(ConfigError::Invalid("sampling.n_rollouts must be >= 1".into()));
        }
        let p = &self.policy;
        if p.kind != "scripted" && p.kind != "cloned" {
            return Err(ConfigError::Invalid(format!(
                "policy.kind must be 'scripted' or 'cloned', got '{}'",
                p.kind
            )));
        }
        if !(p.v_max_mps > 0.0 && p.fps > 0.0) {
            return Err(ConfigError::Invalid("policy.v_max_mps and policy.fps must be > 0".into()));
        }
        if p.bc_epochs == 0 || p.bc_epochs > 10_000 {
            return Err(ConfigError::Invalid(format!(
                "policy.bc_epochs must be in 1..=10000, got {}",
                p.bc_epochs
            )));
        }
        if !(p.bc_lr > 0.0 && p.bc_lr.is_finite()) {
            return Err(ConfigError::Invalid(format!("policy.bc_lr must be > 0, got {}", p.bc_lr)));
        }
        if p.ray_count > 256 {
            return Err(ConfigError::Invalid(format!(
                "policy.ray_count must be <= 256, got {}",
                p.ray_count
            )));
        }
        let sim = &self.simulation;
        if !(sim.goal_radius > 0.0 && sim.goal_radius.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "simulation.goal_radius must be > 0, got {}",
                sim.goal_radius
            )));
        }
        if sim.max_lifetime == 0 {
            return Err(ConfigError::Invalid("simulation.max_lifetime must be >= 1".into()));
        }
        if require_dataset {
            match &self.dataset.path {
                Some(path) if path.exists() => {}
                Some(path) => {
                    return Err(ConfigError::MissingPath(path.display().to_string()));
                }
                None => {
                    return Err(ConfigError::Invalid("dataset.path is required".into()));
                }
            }
            if let Some(occ) = &self.dataset.occupancy {
                if !occ.exists() {
                    return Err(ConfigError::MissingPath(occ.display().to_string()));
                }
            }
        }
        Ok(())
    }
}
