//! The `decompose` subcommand: one fit per seed from a config file.

use std::path::{Path, PathBuf};

use super::{Ctx, Table};
use crate::decompose::{DecompositionProblem, DecompositionResult};
use crate::error::{Error, Result};
use crate::forward::{degrade, make_coded_mask, LinearOperator, NoiseSpec, ProjectionGeometry, RadonProjector};
use crate::io::{make_phantom, read_tensor, write_tensor, ExperimentConfig, OperatorConfig};
use crate::tensor::DenseTensor;

#[derive(Clone, Debug)]
pub struct DecomposeReport {
    /// One row per seed.
    pub runs: Table,
    pub timing: Table,
    pub results: Vec<(u64, DecompositionResult)>,
}

impl DecomposeReport {
    /// Writes the run and timing tables, and per seed the epoch history and
    /// the reconstruction as a tensor file.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for t in [&self.runs, &self.timing] {
            let p = dir.join(format!("{}.csv", t.name));
            std::fs::write(&p, t.to_csv())?;
            paths.push(p);
        }
        for (seed, res) in &self.results {
            let p = dir.join(format!("history_seed{seed}.csv"));
            let mut buf = Vec::new();
            res.write_history_csv(&mut buf)?;
            std::fs::write(&p, buf)?;
            paths.push(p);
            let p = dir.join(format!("reconstruction_seed{seed}.dtn"));
            write_tensor(&p, &res.reconstruction)?;
            paths.push(p);
        }
        Ok(paths)
    }
}

/// Builds the operator named in the config for a signal of `shape`.
pub fn build_operator(cfg: &OperatorConfig, shape: &[usize], seed: u64) -> Result<LinearOperator> {
    match *cfg {
        OperatorConfig::Identity => Ok(LinearOperator::Identity),
        OperatorConfig::CodedExposure { frames } => match *shape {
            [h, w, _] => Ok(LinearOperator::CodedExposure(make_coded_mask(h, w, frames, seed)?)),
            _ => Err(Error::InvalidArgument(format!("coded exposure needs a video, got shape {shape:?}"))),
        },
        OperatorConfig::Radon { angles } => match *shape {
            [n, m, _] if n == m => Ok(LinearOperator::Radon(RadonProjector::new(ProjectionGeometry::uniform(n, angles))?)),
            _ => Err(Error::InvalidArgument(format!(
                "radon needs an N × N × S volume, got shape {shape:?}"
            ))),
        },
    }
}

/// Signal is the input file or a phantom; noise is added to the signal
/// (identity operator) or to its measurements. PSNR is tracked against
/// the oracle file, else the clean signal.
pub fn run_decompose(cfg: &ExperimentConfig) -> Result<DecomposeReport> {
    cfg.validate()?;
    let mut ctx = Ctx::new(super::BenchKind::Noise, cfg)?;
    ctx.timing.name = "decompose_timing".into();
    let d = &cfg.decompose;
    let mut runs = Table::new(
        "decompose_runs",
        &[
            "seed",
            "config_hash",
            "mode",
            "rank",
            "epochs",
            "best_epoch",
            "final_loss",
            "best_psnr",
            "final_psnr",
            "parameter_count",
        ],
    );
    let input = cfg.data.input.as_deref().map(read_tensor).transpose()?;
    let oracle = cfg.data.oracle.as_deref().map(read_tensor).transpose()?;
    let mut results = Vec::new();
    for seed in ctx.seeds.clone() {
        let signal: DenseTensor = match &input {
            Some(t) => t.clone(),
            None => make_phantom(cfg.data.phantom, &cfg.data.extents, cfg.data.rank, seed)?.data,
        };
        let reference = oracle.clone().unwrap_or_else(|| signal.clone());
        reference.check_same_shape(&signal)?;
        let op = build_operator(&cfg.operator, signal.shape(), seed)?;
        let measured = op.apply(&signal)?;
        let measured = match cfg.noise {
            Some(kind) => degrade(&measured, &NoiseSpec::new(kind, seed))?,
            None => measured,
        };
        let problem = match op {
            LinearOperator::Identity => DecompositionProblem::new(measured, d.mode, d.rank, &cfg.generator)?,
            op => DecompositionProblem::inverse(measured, op, signal.shape().to_vec(), d.mode, d.rank, &cfg.generator)?,
        };
        let problem = ctx.configure(problem, seed, &reference, d.epochs)?;
        let res = ctx.fit(&format!("seed={seed}"), &problem)?;
        runs.push(vec![
            seed.into(),
            ctx.hash.clone().into(),
            d.mode.name().into(),
            d.rank.into(),
            d.epochs.into(),
            res.best_epoch.into(),
            res.loss_history.last().copied().unwrap_or(f64::NAN).into(),
            res.best_psnr().unwrap_or(f64::NAN).into(),
            res.final_psnr().unwrap_or(f64::NAN).into(),
            res.parameter_count.into(),
        ]);
        results.push((seed, res));
    }
    runs.sort();
    ctx.timing.sort();
    Ok(DecomposeReport {
        runs,
        timing: ctx.timing,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(task: &str) -> ExperimentConfig {
        let mut c = ExperimentConfig::for_task(task);
        c.decompose.epochs = 20;
        c.decompose.rank = 3;
        c.generator.hidden = 8;
        c.generator.depth = 2;
        c.data.extents = vec![16, 16];
        c.data.rank = 3;
        c
    }

    #[test]
    fn phantom_run_writes_every_artifact() {
        let mut c = small("decompose");
        c.noise = Some(crate::forward::NoiseKind::Gaussian { sigma: 0.1 });
        let rep = run_decompose(&c).unwrap();
        assert_eq!(rep.runs.rows.len(), 1);
        let dir = tempfile::tempdir().unwrap();
        let paths = rep.write(dir.path()).unwrap();
        assert_eq!(paths.len(), 4);
        let back = read_tensor(&paths[3]).unwrap();
        let rounded = rep.results[0].1.reconstruction.map(|v| v as f32 as f64);
        assert_eq!(back, rounded);
        let hist = std::fs::read_to_string(&paths[2]).unwrap();
        assert_eq!(hist.lines().count(), 21);
    }

    #[test]
    fn operators_from_config() {
        let mut c = small("decompose");
        c.data.phantom = crate::io::PhantomKind::MovingSquareVideo;
        c.data.extents = vec![8, 8, 4];
        c.decompose.mode = crate::decompose::Mode::Cp;
        c.operator = OperatorConfig::CodedExposure { frames: 4 };
        let rep = run_decompose(&c).unwrap();
        assert!(rep.results[0].1.best_psnr().unwrap().is_finite());
        c.operator = OperatorConfig::Radon { angles: 6 };
        run_decompose(&c).unwrap();
        assert!(build_operator(&OperatorConfig::Radon { angles: 6 }, &[8, 4, 2], 0).is_err());
        assert!(build_operator(&OperatorConfig::CodedExposure { frames: 2 }, &[8, 8], 0).is_err());
    }
}
