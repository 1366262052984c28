//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decompose::{GeneratorTemplate, LossKind, Mode, SnapshotPolicy};
use crate::error::{Error, Result};
use crate::forward::NoiseKind;
use crate::io::phantom::PhantomKind;
use crate::optim::{LrSchedule, ScheduleKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Subcommand this config was written for.
    pub task: String,
    /// Realizations to run; see [`ExperimentConfig::seeds`] for the default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub decompose: DecomposeSection,
    #[serde(default)]
    pub generator: GeneratorTemplate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseKind>,
    #[serde(default)]
    pub operator: OperatorConfig,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub bench: BenchSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeSection {
    pub mode: Mode,
    pub rank: usize,
    pub loss: LossKind,
    pub factor_l1_weight: f64,
    pub epochs: usize,
    pub lr: f64,
    pub schedule: ScheduleKind,
    pub snapshot: SnapshotPolicy,
}

impl Default for DecomposeSection {
    fn default() -> Self {
        Self {
            mode: Mode::Matrix,
            rank: 10,
            loss: LossKind::L2,
            factor_l1_weight: 0.0,
            epochs: 2000,
            lr: 1e-3,
            schedule: ScheduleKind::Fixed,
            snapshot: SnapshotPolicy::BestLoss,
        }
    }
}

impl DecomposeSection {
    pub fn lr_schedule(&self) -> Result<LrSchedule> {
        LrSchedule::new(self.schedule, self.lr)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorConfig {
    #[default]
    Identity,
    CodedExposure { frames: usize },
    Radon { angles: usize },
}

/// Input signal: a tensor file, or a phantom when no file is given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Clean reference for PSNR tracking.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<PathBuf>,
    pub phantom: PhantomKind,
    pub extents: Vec<usize>,
    pub rank: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            input: None,
            oracle: None,
            phantom: PhantomKind::GaussianLowrank,
            extents: vec![64, 64],
            rank: 10,
        }
    }
}

/// Sweep settings; every field left out falls back to the bench's own
/// default (which also depends on `quick`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub quick: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranks: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_lrs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_counts: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
}

impl ExperimentConfig {
    /// Defaults for `task` with nothing overridden.
    pub fn for_task(task: &str) -> Self {
        Self {
            task: task.to_string(),
            seeds: None,
            out_dir: None,
            decompose: DecomposeSection::default(),
            generator: GeneratorTemplate::default(),
            noise: None,
            operator: OperatorConfig::default(),
            data: DataSection::default(),
            bench: BenchSection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Parses and validates; relative data paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data.input, &mut cfg.data.oracle].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Configured seeds, or `[0]` for `decompose` and five realizations
    /// for the benches.
    pub fn seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None if self.task.starts_with("bench") => (0..5).collect(),
            None => vec![0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.seeds.as_ref().is_some_and(|s| s.is_empty()) {
            return bad("seeds must not be empty".into());
        }
        if self.decompose.rank == 0 {
            return bad("decompose.rank must be ≥ 1".into());
        }
        if self.decompose.epochs == 0 {
            return bad("decompose.epochs must be ≥ 1".into());
        }
        self.decompose.lr_schedule()?;
        for p in [&self.data.input, &self.data.oracle].into_iter().flatten() {
            if !p.exists() {
                return bad(format!("referenced file {} does not exist", p.display()));
            }
        }
        if let Some(kind) = &self.noise {
            crate::forward::NoiseSpec::new(*kind, 0).validate()?;
        }
        Ok(())
    }

    /// Canonical TOML rendering (fixed field order, defaults filled in).
    pub fn canonical(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical`].
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.canonical()?.as_bytes());
        Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
    }
}
