//! Experiment configuration.
//!
//! A config is one TOML file. Unknown keys anywhere are rejected, and every
//! nested invariant (grid, partition, solver) is checked at load time.
//!
//! ```toml
//! kind = "evolve"        # optional; must agree with the CLI subcommand
//! seed = 7
//! samples = 4
//!
//! [grid]
//! dim = 3
//! points = 32
//! half_width = 6.283185307179586
//!
//! [partition]            # randomization cubes
//! dim = 3
//! s = -0.2
//! a = 1
//! n_max = 2
//!
//! [solver]
//! dim = 3
//! dt = 1e-3
//! t_final = 1.0
//! snapshot_stride = 10
//! n0 = 4.0
//!
//! [data]
//! profile = "packet"
//! amplitude = 0.5
//! ```

use std::path::{Path, PathBuf};

use rnls_core::linear_flow::CompositeKind;
use rnls_core::partition::PartitionConfig;
use rnls_core::solver::SolverConfig;
use rnls_core::spectral::GridSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    PartitionReport,
    LinearStats,
    Evolve,
    MorawetzAudit,
    TwinLadder,
    Sweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::PartitionReport => "partition-report",
            ExperimentKind::LinearStats => "linear-stats",
            ExperimentKind::Evolve => "evolve",
            ExperimentKind::MorawetzAudit => "morawetz-audit",
            ExperimentKind::TwinLadder => "twin-ladder",
            ExperimentKind::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// `A e^{−|x−c|²/2σ²}`.
    Gaussian,
    /// Gaussian envelope times the plane wave `e^{ik·x}`.
    Packet,
    /// Gaussian envelope times a random-phase field with spectrum `⟨ξ⟩^{−(d/2+s)}`.
    Rough,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub profile: Profile,
    /// Peak modulus of the deterministic datum.
    pub amplitude: f64,
    #[serde(default = "one")]
    pub width: f64,
    #[serde(default)]
    pub center: Vec<f64>,
    #[serde(default)]
    pub wavevector: Vec<f64>,
    /// Sobolev index of the rough profile.
    #[serde(default)]
    pub sobolev: f64,
    /// Seed for the rough profile's phases; independent of the master seed.
    #[serde(default)]
    pub phase_seed: u64,
    /// Multiply by the cube Gaussians; when false every sample uses `f` itself.
    #[serde(default = "yes")]
    pub randomize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    pub t_final: f64,
    pub snapshots: usize,
    pub norms: Vec<CompositeKind>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Cutoff of `P_{≥N₀}`; taken from `[solver]` when absent.
    #[serde(default)]
    pub n0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    /// Constant `A` in the almost-conservation bounds; the smallest
    /// admissible value is used when absent.
    #[serde(default)]
    pub a_const: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwinConfig {
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: ExperimentKind,
    /// Dotted path of a numeric field, e.g. `solver.n0`.
    pub axis: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub kind: Option<ExperimentKind>,
    pub seed: u64,
    #[serde(default = "one_usize")]
    pub samples: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Refuse runs whose estimated footprint exceeds this many MiB.
    #[serde(default = "default_memory")]
    pub memory_limit_mb: f64,
    /// Persist each run's trajectory as manifest plus binary snapshots.
    #[serde(default)]
    pub save_trajectories: bool,
    pub grid: GridSpec,
    #[serde(default)]
    pub partition: Option<PartitionConfig>,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
    #[serde(default)]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub linear: Option<LinearConfig>,
    #[serde(default)]
    pub monitor: Option<MonitorConfig>,
    #[serde(default)]
    pub twin: Option<TwinConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn default_epsilon() -> f64 {
    rnls_core::linear_flow::DEFAULT_EPSILON
}

fn default_memory() -> f64 {
    8192.0
}

fn missing(section: &str, kind: ExperimentKind) -> HarnessError {
    HarnessError::Config(format!("[{section}] is required for {}", kind.name()))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Resolve the experiment kind against a CLI subcommand and check every
    /// section that kind needs.
    pub fn resolve(&mut self, requested: ExperimentKind) -> Result<(), HarnessError> {
        match self.kind {
            Some(k) if k != requested => {
                return Err(HarnessError::Config(format!(
                    "config declares kind = \"{}\" but subcommand runs {}",
                    k.name(),
                    requested.name()
                )))
            }
            _ => self.kind = Some(requested),
        }
        self.validate()
    }

    pub fn kind(&self) -> ExperimentKind {
        self.kind.unwrap_or(ExperimentKind::Evolve)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let cfg_err = |e: rnls_core::Error| HarnessError::Config(e.to_string());
        self.grid.validate().map_err(cfg_err)?;
        if !(self.memory_limit_mb > 0.0) {
            return Err(HarnessError::Config("memory_limit_mb must be positive".into()));
        }
        let kind = self.kind();
        let effective = match kind {
            ExperimentKind::Sweep => {
                let sw = self.sweep.as_ref().ok_or_else(|| missing("sweep", kind))?;
                if sw.base == ExperimentKind::Sweep {
                    return Err(HarnessError::Config("a sweep cannot sweep a sweep".into()));
                }
                if sw.values.is_empty() {
                    return Err(HarnessError::Config("sweep.values is empty".into()));
                }
                crate::sweep::expand(self)?;
                sw.base
            }
            k => k,
        };
        let partition = self.partition.as_ref().ok_or_else(|| missing("partition", effective))?;
        partition.validate(&self.grid).map_err(cfg_err)?;
        if effective == ExperimentKind::PartitionReport {
            return Ok(());
        }
        let data = self.data.as_ref().ok_or_else(|| missing("data", effective))?;
        self.check_data(data)?;
        if effective == ExperimentKind::LinearStats {
            let lin = self.linear.as_ref().ok_or_else(|| missing("linear", effective))?;
            if lin.snapshots < 1 || !(lin.t_final >= 0.0) {
                return Err(HarnessError::Config("linear.snapshots must be >= 1 and t_final >= 0".into()));
            }
            if lin.norms.is_empty() {
                return Err(HarnessError::Config("linear.norms is empty".into()));
            }
            if let Some(k) = lin.norms.iter().find(|k| k.dim() != self.grid.dim) {
                return Err(HarnessError::Config(format!(
                    "norm {} needs d = {}, grid has d = {}",
                    k.name(),
                    k.dim(),
                    self.grid.dim
                )));
            }
            // The free evolution fills only the v channel.
            if let Some(k) = lin.norms.iter().find(|k| matches!(k, CompositeKind::X3 | CompositeKind::X4)) {
                return Err(HarnessError::Config(format!(
                    "linear.norms: {} measures the nonlinear part and has no linear-flow value",
                    k.name()
                )));
            }
            if lin.n0.is_none() && self.solver.is_none() {
                return Err(HarnessError::Config("linear.n0 or [solver] must set N0".into()));
            }
            return Ok(());
        }
        let solver = self.solver.as_ref().ok_or_else(|| missing("solver", effective))?;
        solver.validate().map_err(cfg_err)?;
        if solver.dim != self.grid.dim {
            return Err(HarnessError::Config(format!(
                "solver.dim = {} but grid.dim = {}",
                solver.dim, self.grid.dim
            )));
        }
        if !(solver.n0 > 0.0) || solver.n0.log2().fract() != 0.0 {
            return Err(HarnessError::Config(format!(
                "solver.n0 must be a power of two, got {}",
                solver.n0
            )));
        }
        if effective == ExperimentKind::TwinLadder {
            let twin = self.twin.as_ref().ok_or_else(|| missing("twin", effective))?;
            if twin.alphas.is_empty() || twin.alphas.iter().any(|a| !(*a >= 0.0)) {
                return Err(HarnessError::Config("twin.alphas must be nonempty and >= 0".into()));
            }
        }
        if effective == ExperimentKind::MorawetzAudit && !(3..=4).contains(&self.grid.dim) {
            return Err(HarnessError::Config("morawetz audits need d = 3 or 4".into()));
        }
        Ok(())
    }

    fn check_data(&self, data: &DataConfig) -> Result<(), HarnessError> {
        let d = self.grid.dim;
        if !(data.amplitude >= 0.0 && data.width > 0.0) {
            return Err(HarnessError::Config("data.amplitude must be >= 0 and data.width > 0".into()));
        }
        for (name, v) in [("center", &data.center), ("wavevector", &data.wavevector)] {
            if !v.is_empty() && v.len() != d {
                return Err(HarnessError::Config(format!(
                    "data.{name} has {} entries for a {d}-dimensional grid",
                    v.len()
                )));
            }
        }
        Ok(())
    }

    /// Content hash over everything that can change a per-sample metric.
    /// Output directory, resource limit, sample count and artifact saving
    /// are excluded, so a run can be extended in place.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = None;
        canonical.memory_limit_mb = 0.0;
        canonical.samples = 0;
        canonical.save_trajectories = false;
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Copy with the numeric field at dotted `path` replaced by `value`.
    pub fn with_axis(&self, path: &str, value: f64) -> Result<Self, HarnessError> {
        let mut doc = toml::Value::try_from(self).map_err(|e| HarnessError::Config(e.to_string()))?;
        let unknown = || HarnessError::Config(format!("unknown sweep axis `{path}`"));
        let (parents, leaf) = match path.rsplit_once('.') {
            Some((p, l)) => (p.split('.').collect::<Vec<_>>(), l),
            None => (Vec::new(), path),
        };
        let mut table = doc.as_table_mut().ok_or_else(unknown)?;
        for part in parents {
            table = table.get_mut(part).and_then(|v| v.as_table_mut()).ok_or_else(unknown)?;
        }
        let slot = table.get_mut(leaf).ok_or_else(unknown)?;
        *slot = match slot {
            toml::Value::Float(_) => toml::Value::Float(value),
            toml::Value::Integer(_) if value.fract() == 0.0 => toml::Value::Integer(value as i64),
            toml::Value::Integer(_) => {
                return Err(HarnessError::Config(format!(
                    "axis `{path}` is an integer field, got {value}"
                )))
            }
            _ => return Err(HarnessError::Config(format!("sweep axis `{path}` is not numeric"))),
        };
        let mut out: Self = doc
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        out.sweep = None;
        Ok(out)
    }

    /// Rough peak memory in MiB: stored snapshots plus working buffers.
    pub fn estimated_memory_mb(&self, workers: usize) -> f64 {
        let field = self.grid.len() as f64 * 16.0;
        let per_run = match self.kind() {
            ExperimentKind::PartitionReport => {
                let cubes = self
                    .partition
                    .map(|p| p.n_max as f64 * 4.0 * 3f64.powi(self.grid.dim as i32))
                    .unwrap_or(1.0);
                field * (4.0 + cubes / 4.0)
            }
            ExperimentKind::LinearStats => {
                let snaps = self.linear.as_ref().map_or(1, |l| l.snapshots) as f64;
                field * (snaps + 8.0)
            }
            _ => {
                let snaps = self
                    .solver
                    .and_then(|s| s.steps().ok().map(|n| n / s.snapshot_stride.max(1) + 1))
                    .unwrap_or(1) as f64;
                let rungs = self.twin.as_ref().map_or(1, |t| t.alphas.len() + 1) as f64;
                field * (3.0 * snaps + 12.0) * rungs
            }
        };
        per_run * workers.max(1) as f64 / (1024.0 * 1024.0)
    }
}
