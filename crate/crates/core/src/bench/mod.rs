//! Experiment drivers behind the `bench-*` subcommands.
//!
//! Every driver returns deterministic result tables (one row per run plus a
//! per-setting summary) and a separate wall-clock table, so reruns with the
//! same config produce byte-identical result CSVs.

mod single;
mod studies;
mod table;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use single::{build_operator, run_decompose, DecomposeReport};
pub use studies::{decay_slope, underparam_template, voxel_descent};
pub use table::{mean, median, std_dev, Cell, Table};

use crate::decompose::{run_decomposition, DecompositionProblem, DecompositionResult, GeneratorTemplate, Mode};
use crate::error::{Error, Result};
use crate::io::ExperimentConfig;
use crate::optim::LrSchedule;
use crate::tensor::DenseTensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchKind {
    Noise,
    Pca,
    Lr,
    Stop,
    Rank,
    Timing,
    Nmf,
    Inverse,
}

impl BenchKind {
    pub const ALL: [BenchKind; 8] = [
        BenchKind::Noise,
        BenchKind::Pca,
        BenchKind::Lr,
        BenchKind::Stop,
        BenchKind::Rank,
        BenchKind::Timing,
        BenchKind::Nmf,
        BenchKind::Inverse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchKind::Noise => "bench-noise",
            BenchKind::Pca => "bench-pca",
            BenchKind::Lr => "bench-lr",
            BenchKind::Stop => "bench-stop",
            BenchKind::Rank => "bench-rank",
            BenchKind::Timing => "bench-timing",
            BenchKind::Nmf => "bench-nmf",
            BenchKind::Inverse => "bench-inverse",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    fn stem(self) -> &'static str {
        &self.name()["bench-".len()..]
    }
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub kind: BenchKind,
    /// Deterministic result tables.
    pub tables: Vec<Table>,
    /// Wall-clock time of every run.
    pub timing: Table,
}

impl BenchReport {
    pub fn table(&self, name: &str) -> Result<&Table> {
        self.tables
            .iter()
            .chain(std::iter::once(&self.timing))
            .find(|t| t.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("{} produced no table {name}", self.kind.name())))
    }

    /// Writes `<name>.csv` for every table; returns the paths in order.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for t in self.tables.iter().chain(std::iter::once(&self.timing)) {
            let p = dir.join(format!("{}.csv", t.name));
            std::fs::write(&p, t.to_csv())?;
            paths.push(p);
        }
        Ok(paths)
    }
}

/// Runs `kind` with the sweep settings from `cfg` (and its `bench.quick`
/// flag).
pub fn run_bench(kind: BenchKind, cfg: &ExperimentConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let mut ctx = Ctx::new(kind, cfg)?;
    let mut tables = match kind {
        BenchKind::Noise => studies::noise(&mut ctx)?,
        BenchKind::Pca => studies::pca(&mut ctx)?,
        BenchKind::Lr => studies::lr(&mut ctx)?,
        BenchKind::Stop => studies::stop(&mut ctx)?,
        BenchKind::Rank => studies::rank(&mut ctx)?,
        BenchKind::Timing => studies::timing(&mut ctx)?,
        BenchKind::Nmf => studies::nmf(&mut ctx)?,
        BenchKind::Inverse => studies::inverse(&mut ctx)?,
    };
    for t in &mut tables {
        t.sort();
    }
    ctx.timing.sort();
    Ok(BenchReport {
        kind,
        tables,
        timing: ctx.timing,
    })
}

struct Ctx<'a> {
    kind: BenchKind,
    cfg: &'a ExperimentConfig,
    hash: String,
    quick: bool,
    seeds: Vec<u64>,
    timing: Table,
}

impl<'a> Ctx<'a> {
    fn new(kind: BenchKind, cfg: &'a ExperimentConfig) -> Result<Self> {
        let quick = cfg.bench.quick;
        let mut seeds = cfg.seeds();
        if quick && cfg.seeds.is_none() {
            seeds.truncate(3);
        }
        Ok(Self {
            kind,
            cfg,
            hash: cfg.hash()?,
            quick,
            seeds,
            timing: Table::new(
                &format!("{}_timing", kind.stem()),
                &["run", "seed", "config_hash", "wall_time_s", "seconds_per_epoch"],
            ),
        })
    }

    fn table(&self, suffix: &str, header: &[&str]) -> Table {
        Table::new(&format!("{}_{suffix}", self.kind.stem()), header)
    }

    /// Epoch budget: `bench.epochs`, else the decompose setting, capped at
    /// `quick_cap` in quick mode.
    fn epochs(&self, quick_cap: usize) -> usize {
        match self.cfg.bench.epochs {
            Some(e) => e,
            None if self.quick => self.cfg.decompose.epochs.min(quick_cap),
            None => self.cfg.decompose.epochs,
        }
    }

    fn schedule(&self) -> Result<LrSchedule> {
        self.cfg.decompose.lr_schedule()
    }

    fn seeds_label(&self) -> String {
        self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
    }

    /// Direct fit of `target` with the configured loop settings, PSNR
    /// tracked against `oracle`.
    fn problem(
        &self,
        target: DenseTensor,
        mode: Mode,
        rank: usize,
        template: &GeneratorTemplate,
        seed: u64,
        oracle: &DenseTensor,
        epochs: usize,
    ) -> Result<DecompositionProblem> {
        self.configure(DecompositionProblem::new(target, mode, rank, template)?, seed, oracle, epochs)
    }

    fn configure(
        &self,
        problem: DecompositionProblem,
        seed: u64,
        oracle: &DenseTensor,
        epochs: usize,
    ) -> Result<DecompositionProblem> {
        Ok(problem
            .with_epochs(epochs)
            .with_schedule(self.schedule()?)
            .with_loss(self.cfg.decompose.loss)
            .with_factor_l1(self.cfg.decompose.factor_l1_weight)
            .with_seed(seed)
            .with_oracle(oracle.clone())
            .with_snapshot(self.cfg.decompose.snapshot))
    }

    fn fit(&mut self, run: &str, problem: &DecompositionProblem) -> Result<DecompositionResult> {
        let start = Instant::now();
        let res = run_decomposition(problem)?;
        let secs = start.elapsed().as_secs_f64();
        self.record_time(run, problem.seed, secs, res.wall_time_per_epoch);
        Ok(res)
    }

    fn record_time(&mut self, run: &str, seed: u64, secs: f64, per_epoch: f64) {
        self.timing.push(vec![
            run.into(),
            seed.into(),
            self.hash.clone().into(),
            secs.into(),
            per_epoch.into(),
        ]);
    }

    /// Mean, sample standard deviation and median of each metric, grouped
    /// by the key columns.
    fn summarize(&self, runs: &Table, keys: &[&str], metrics: &[&str]) -> Result<Table> {
        let mut header: Vec<String> = keys.iter().map(|k| k.to_string()).collect();
        header.push("seeds".into());
        header.push("config_hash".into());
        for m in metrics {
            for stat in ["mean", "std", "median"] {
                header.push(format!("{stat}_{m}"));
            }
        }
        let hrefs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut out = self.table("summary", &hrefs);
        let key_cols = keys.iter().map(|k| runs.column(k)).collect::<Result<Vec<_>>>()?;
        let mut groups: Vec<Vec<Cell>> = Vec::new();
        for row in &runs.rows {
            let key: Vec<Cell> = key_cols.iter().map(|&c| row[c].clone()).collect();
            if !groups.contains(&key) {
                groups.push(key);
            }
        }
        for key in groups {
            let labels: Vec<String> = key.iter().map(Cell::to_string).collect();
            let filters: Vec<(&str, &str)> = keys.iter().copied().zip(labels.iter().map(String::as_str)).collect();
            let mut row = key.clone();
            row.push(self.seeds_label().into());
            row.push(self.hash.clone().into());
            for m in metrics {
                let v = runs.values(m, &filters)?;
                row.push(mean(&v).into());
                row.push(std_dev(&v).into());
                row.push(median(&v).into());
            }
            out.push(row);
        }
        Ok(out)
    }
}
