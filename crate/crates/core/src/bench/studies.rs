use super::{Cell, Ctx, Table};
use crate::autograd::Activation;
use crate::baselines::{nmf_multiplicative, parafac_als, pca as pca_baseline, principal_angle, truncated_svd};
use crate::decompose::{DecompositionProblem, GeneratorTemplate, Mode, SnapshotPolicy};
use crate::error::Result;
use crate::forward::{degrade, make_coded_mask, LinearOperator, NoiseKind, NoiseSpec, ProjectionGeometry, RadonProjector};
use crate::generators::NetworkKind;
use crate::io::{make_phantom, PhantomKind};
use crate::metrics::{psnr, Peak};
use crate::optim::{AdamConfig, AdamState, LrSchedule, ScheduleKind};
use crate::rng::{self, Stream};
use crate::tensor::DenseTensor;

fn peak(clean: &DenseTensor) -> f64 {
    Peak::DynamicRange.resolve(clean)
}

fn first_or(v: &Option<Vec<f64>>, d: f64) -> f64 {
    v.as_ref().and_then(|v| v.first().copied()).unwrap_or(d)
}

/// Rank-`rank` matrix with iid Gaussian factors, scaled into `[0, 1]`,
/// plus white Gaussian noise.
fn toy_task(size: usize, rank: usize, sigma: f64, seed: u64) -> Result<(DenseTensor, DenseTensor)> {
    let raw = make_phantom(PhantomKind::GaussianLowrank, &[size, size], rank, seed)?.data;
    let (lo, hi) = (raw.min(), raw.max());
    let clean = raw.map(|v| (v - lo) / (hi - lo));
    let noisy = degrade(&clean, &NoiseSpec::new(NoiseKind::Gaussian { sigma }, seed))?;
    Ok((clean, noisy))
}

fn svd_psnr(noisy: &DenseTensor, clean: &DenseTensor, rank: usize) -> Result<f64> {
    psnr(&truncated_svd(noisy, rank)?.reconstruct(), clean, peak(clean))
}

fn lr_label(lr: f64) -> String {
    format!("{lr:e}")
}

pub(super) fn noise(ctx: &mut Ctx) -> Result<Vec<Table>> {
    let b = &ctx.cfg.bench;
    let size = b.size.unwrap_or(64);
    let ranks = b
        .ranks
        .clone()
        .unwrap_or_else(|| if ctx.quick { vec![10, 30, 60] } else { vec![10, 20, 30, 40, 50, 60] });
    let sigma = first_or(&b.sigmas, 0.1);
    let epochs = ctx.epochs(200);
    let pairings = [
        ("gaussian_gaussian", PhantomKind::GaussianLowrank, NoiseKind::Gaussian { sigma }),
        (
            "piecewise_poisson",
            PhantomKind::PiecewiseLowrank,
            NoiseKind::Poisson { lambda_max: 1000.0, readout: 0.0 },
        ),
        ("piecewise_rician", PhantomKind::PiecewiseLowrank, NoiseKind::Rician { sigma: 0.02 }),
    ];
    let mut runs = ctx.table(
        "runs",
        &["pairing", "rank", "seed", "config_hash", "psnr_deeptensor", "psnr_deeptensor_final", "psnr_svd", "best_epoch"],
    );
    let template = ctx.cfg.generator.clone();
    for (name, kind, noise) in pairings {
        for &rank in &ranks {
            for seed in ctx.seeds.clone() {
                let clean = make_phantom(kind, &[size, size], rank, seed)?.data;
                let noisy = degrade(&clean, &NoiseSpec::new(noise, seed))?;
                let svd = svd_psnr(&noisy, &clean, rank)?;
                let p = ctx.problem(noisy, Mode::Matrix, rank, &template, seed, &clean, epochs)?;
                let res = ctx.fit(&format!("{name}/rank={rank}"), &p)?;
                runs.push(vec![
                    name.into(),
                    rank.into(),
                    seed.into(),
                    ctx.hash.clone().into(),
                    res.best_psnr().unwrap_or(f64::NAN).into(),
                    res.final_psnr().unwrap_or(f64::NAN).into(),
                    svd.into(),
                    res.best_epoch.into(),
                ]);
            }
        }
    }
    let summary = ctx.summarize(&runs, &["pairing", "rank"], &["psnr_deeptensor", "psnr_svd"])?;
    Ok(vec![runs, summary])
}

pub(super) fn lr(ctx: &mut Ctx) -> Result<Vec<Table>> {
    let b = &ctx.cfg.bench;
    let size = b.size.unwrap_or(64);
    let rank = b.true_rank.unwrap_or(16);
    let sigma = first_or(&b.sigmas, 0.3);
    let epochs = ctx.epochs(300);
    let lrs = b
        .base_lrs
        .clone()
        .unwrap_or_else(|| if ctx.quick { vec![1e-2, 1e-3] } else { vec![1e-2, 1e-3, 1e-4, 1e-5] });
    let schedules = [
        ScheduleKind::Fixed,
        ScheduleKind::standard_step(),
        ScheduleKind::standard_exponential(),
        ScheduleKind::Cosine { t_max: epochs },
    ];
    let mut runs = ctx.table(
        "runs",
        &["schedule", "base_lr", "seed", "config_hash", "best_psnr", "best_epoch", "final_psnr", "svd_psnr"],
    );
    let template = ctx.cfg.generator.clone();
    for seed in ctx.seeds.clone() {
        let (clean, noisy) = toy_task(size, rank, sigma, seed)?;
        let svd = svd_psnr(&noisy, &clean, rank)?;
        for kind in schedules {
            for &base in &lrs {
                let p = ctx
                    .problem(noisy.clone(), Mode::Matrix, rank, &template, seed, &clean, epochs)?
                    .with_schedule(LrSchedule::new(kind, base)?);
                let res = ctx.fit(&format!("{}/lr={}", kind.name(), lr_label(base)), &p)?;
                runs.push(vec![
                    kind.name().into(),
                    lr_label(base).into(),
                    seed.into(),
                    ctx.hash.clone().into(),
                    res.best_psnr().unwrap_or(f64::NAN).into(),
                    res.best_epoch.into(),
                    res.final_psnr().unwrap_or(f64::NAN).into(),
                    svd.into(),
                ]);
            }
        }
    }
    let summary = ctx.summarize(&runs, &["schedule", "base_lr"], &["best_psnr", "svd_psnr"])?;
    Ok(vec![runs, summary])
}

/// Deep-decoder template used as the underparameterized contender.
pub fn underparam_template() -> GeneratorTemplate {
    GeneratorTemplate {
        kind: NetworkKind::Underparam,
        depth: 2,
        hidden: 16,
        ..GeneratorTemplate::default()
    }
}

/// PSNR change per epoch between the best epoch and the last one.
pub fn decay_slope(psnr_history: &[f64], best_epoch: usize) -> f64 {
    let last = psnr_history.len() - 1;
    if best_epoch >= last {
        return 0.0;
    }
    (psnr_history[last] - psnr_history[best_epoch]) / (last - best_epoch) as f64
}

pub(super) fn stop(ctx: &mut Ctx) -> Result<Vec<Table>> {
    let b = &ctx.cfg.bench;
    let size = b.size.unwrap_or(64);
    let rank = b.true_rank.unwrap_or(16);
    let sigmas = b.sigmas.clone().unwrap_or_else(|| vec![0.05, 0.2, 0.5]);
    let epochs = ctx.epochs(300);
    let over = GeneratorTemplate {
        kind: NetworkKind::Overparam,
        ..ctx.cfg.generator.clone()
    };
    let nets = [("overparam", over), ("underparam", underparam_template())];
    let mut runs = ctx.table(
        "runs",
        &[
            "generator",
            "sigma",
            "seed",
            "config_hash",
            "best_epoch",
            "best_psnr",
            "final_psnr",
            "decay_slope",
            "parameter_count",
        ],
    );
    let mut curves = ctx.table("curves", &["generator", "sigma", "seed", "config_hash", "epoch", "psnr"]);
    for &sigma in &sigmas {
        for seed in ctx.seeds.clone() {
            let (clean, noisy) = toy_task(size, rank, sigma, seed)?;
            for (name, template) in &nets {
                let p = ctx.problem(noisy.clone(), Mode::Matrix, rank, template, seed, &clean, epochs)?;
                let res = ctx.fit(&format!("{name}/sigma={sigma}"), &p)?;
                let h = &res.psnr_history;
                for (e, v) in h.iter().enumerate() {
                    if e % 10 == 0 || e + 1 == h.len() {
                        curves.push(vec![
                            (*name).into(),
                            sigma.into(),
                            seed.into(),
                            ctx.hash.clone().into(),
                            e.into(),
                            (*v).into(),
                        ]);
                    }
                }
                runs.push(vec![
                    (*name).into(),
                    sigma.into(),
                    seed.into(),
                    ctx.hash.clone().into(),
                    res.best_epoch.into(),
                    res.best_psnr().unwrap_or(f64::NAN).into(),
                    res.final_psnr().unwrap_or(f64::NAN).into(),
                    decay_slope(h, res.best_epoch).into(),
                    res.parameter_count.into(),
                ]);
            }
        }
    }
    let summary = ctx.summarize(
        &runs,
        &["generator", "sigma"],
        &["best_epoch", "best_psnr", "final_psnr", "decay_slope"],
    )?;
    Ok(vec![runs, summary, curves])
}

pub(super) fn rank(ctx: &mut Ctx) -> Result<Vec<Table>> {
    let b = &ctx.cfg.bench;
    let size = b.size.unwrap_or(64);
    let true_rank = b.true_rank.unwrap_or(20);
    let ranks = b.ranks.clone().unwrap_or_else(|| {
        if ctx.quick {
            vec![true_rank / 2, true_rank, true_rank * 3 / 2]
        } else {
            vec![true_rank / 2, true_rank * 3 / 4, true_rank, true_rank * 5 / 4, true_rank * 3 / 2]
        }
    });
    let epochs = ctx.epochs(300);
    let noise = NoiseKind::Poisson { lambda_max: 100.0, readout: 0.0 };
    let template = ctx.cfg.generator.clone();
    let mut runs = ctx.table(
        "runs",
        &["structure", "rank", "seed", "config_hash", "psnr_deeptensor", "psnr_baseline"],
    );
    // Cube side and rank of the CP study.
    let (side, cp_rank) = (16, 5);
    for seed in ctx.seeds.clone() {
        let clean = make_phantom(PhantomKind::PiecewiseLowrank, &[size, size], true_rank, seed)?.data;
        let noisy = degrade(&clean, &NoiseSpec::new(noise, seed))?;
        for &r in &ranks {
            let svd = svd_psnr(&noisy, &clean, r)?;
            let p = ctx.problem(noisy.clone(), Mode::Matrix, r, &template, seed, &clean, epochs)?;
            let res = ctx.fit(&format!("matrix/rank={r}"), &p)?;
            runs.push(vec![
                "matrix".into(),
                r.into(),
                seed.into(),
                ctx.hash.clone().into(),
                res.best_psnr().unwrap_or(f64::NAN).into(),
                svd.into(),
            ]);
        }
        let clean = make_phantom(PhantomKind::PiecewiseLowrank, &[side; 3], cp_rank, seed)?.data;
        let noisy = degrade(&clean, &NoiseSpec::new(noise, seed))?;
        for r in [cp_rank - 2, cp_rank, cp_rank + 3] {
            let als = parafac_als(&noisy, r, 200, seed)?.reconstruct();
            let als = psnr(&als, &clean, peak(&clean))?;
            let p = ctx.problem(noisy.clone(), Mode::Cp, r, &template, seed, &clean, epochs)?;
            let res = ctx.fit(&format!("tensor/rank={r}"), &p)?;
            runs.push(vec![
                "tensor".into(),
                r.into(),
                seed.into(),
                ctx.hash.clone().into(),
                res.best_psnr().unwrap_or(f64::NAN).into(),
                als.into(),
            ]);
        }
    }
    let summary = ctx.summarize(&runs, &["structure", "rank"], &["psnr_deeptensor", "psnr_baseline"])?;
    Ok(vec![runs, summary])
}

pub(super) fn timing(ctx: &mut Ctx) -> Result<Vec<Table>> {
    let b = &ctx.cfg.bench;
    let size = b.size.unwrap_or(if ctx.quick { 32 } else { 64 });
    let rank = b.ranks.as_ref().and_then(|r| r.first().copied()).unwrap_or(16);
    let epochs = b.epochs.unwrap_or(if ctx.quick { 1 } else { 2 });
    let template = ctx.cfg.generator.clone();
    let mut runs = ctx.table(
        "runs",
        &["architecture", "seed", "config_hash", "epochs", "parameter_count", "final_psnr"],
    );
    for seed in ctx.seeds.clone() {
        let clean = make_phantom(PhantomKind::FacesLikeTensor, &[size; 3], 8, seed)?.data;
        for (name, mode) in [("three_1d", Mode::Cp), ("split_2d_1d", Mode::Split2d1d), ("single_3d", Mode::SingleNd)] {
            let p = ctx.problem(clean.clone(), mode, rank, &template, seed, &clean, epochs)?;
            let res = ctx.fit(name, &p)?;
            runs.push(vec![
                name.into(),
                seed.into(),
                ctx.hash.clone().into(),
                epochs.into(),
                res.parameter_count.into(),
                res.final_psnr().unwrap_or(f64::NAN).into(),
            ]);
        }
    }
    Ok(vec![runs])
}

fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Relu => "relu",
        Activation::Softplus => "softplus",
        Activation::Abs => "abs",
        _ => "identity",
    }
}

pub(super) fn nmf(ctx: &mut Ctx) -> Result<Vec<Table>> {
    let b = &ctx.cfg.bench;
    let size = b.size.unwrap_or(64);
    let rank = b.true_rank.unwrap_or(10);
    let epochs = ctx.epochs(300);
    let noise = NoiseKind::SkewedGaussian { a: 0.3, b: 0.3 };
    let mut runs = ctx.table(
        "runs",
        &["method", "activation", "seed", "config_hash", "psnr", "min_constrained_entry", "objective_monotone"],
    );
    for seed in ctx.seeds.clone() {
        let clean = make_phantom(PhantomKind::PiecewiseLowrank, &[size, size], rank, seed)?.data;
        let noisy = degrade(&clean, &NoiseSpec::new(noise, seed))?;
        let p = peak(&clean);
        // Multiplicative updates need a nonnegative input.
        let mu = nmf_multiplicative(&noisy.map(|v| v.max(0.0)), rank, 1000, seed)?;
        let monotone = mu.objective.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
        let min_entry = mu.w.min().min(mu.h.min());
        runs.push(vec![
            "multiplicative".into(),
            "none".into(),
            seed.into(),
            ctx.hash.clone().into(),
            psnr(&mu.reconstruct(), &clean, p)?.into(),
            min_entry.into(),
            monotone.into(),
        ]);
        for act in [Activation::Relu, Activation::Softplus, Activation::Abs] {
            let template = GeneratorTemplate {
                out_activation: act,
                ..ctx.cfg.generator.clone()
            };
            for (method, semi) in [("deeptensor_nmf", false), ("deeptensor_semi_nmf", true)] {
                let mut prob = ctx.problem(noisy.clone(), Mode::Matrix, rank, &template, seed, &clean, epochs)?;
                if semi {
                    prob.networks[0].out_activation = Activation::Identity;
                }
                let res = ctx.fit(&format!("{method}/{}", activation_name(act)), &prob)?;
                let constrained = if semi { &res.factors[1..] } else { &res.factors[..] };
                let min_entry = constrained.iter().map(DenseTensor::min).fold(f64::INFINITY, f64::min);
                runs.push(vec![
                    method.into(),
                    activation_name(act).into(),
                    seed.into(),
                    ctx.hash.clone().into(),
                    res.best_psnr().unwrap_or(f64::NAN).into(),
                    min_entry.into(),
                    "n/a".into(),
                ]);
            }
        }
    }
    let summary = ctx.summarize(&runs, &["method", "activation"], &["psnr", "min_constrained_entry"])?;
    Ok(vec![runs, summary])
}

/// Unregularized Adam descent on the voxels of `x` for `‖A x − y‖²`,
/// started from zero. Returns the best PSNR against `oracle`.
pub fn voxel_descent(
    y: &DenseTensor,
    op: &LinearOperator,
    shape: &[usize],
    epochs: usize,
    schedule: &LrSchedule,
    oracle: &DenseTensor,
) -> Result<f64> {
    let mut x = vec![DenseTensor::zeros(shape)];
    let mut adam = AdamState::new(&x, AdamConfig::default());
    let p = peak(oracle);
    let scale = 2.0 / y.len() as f64;
    let mut best = f64::NEG_INFINITY;
    for e in 0..epochs {
        let r = op.apply(&x[0])?.sub(y)?;
        let g = op.adjoint(&r)?.scale(scale);
        adam.step(&mut x, &[g], schedule.lr(e)?)?;
        best = best.max(psnr(&x[0], oracle, p)?);
    }
    Ok(best)
}

pub(super) fn inverse(ctx: &mut Ctx) -> Result<Vec<Table>> {
    let b = &ctx.cfg.bench;
    let angles = b.sample_counts.as_ref().and_then(|s| s.first().copied()).unwrap_or(40);
    let cp_rank = b.ranks.as_ref().and_then(|r| r.first().copied()).unwrap_or(64);
    let sino_noise = first_or(&b.sigmas, 0.01);
    let epochs = ctx.epochs(300);
    let template = ctx.cfg.generator.clone();
    let mut runs = ctx.table("runs", &["task", "method", "seed", "config_hash", "psnr"]);
    let push = |runs: &mut Table, task: &str, method: &str, seed: u64, hash: &str, v: f64| {
        runs.push(vec![task.into(), method.into(), seed.into(), Cell::from(hash), v.into()]);
    };
    for seed in ctx.seeds.clone() {
        // Video compressive sensing: one coded snapshot of 8 frames.
        let (h, w, t) = (16, 16, 8);
        let video = make_phantom(PhantomKind::MovingSquareVideo, &[h, w, t], 1, seed)?.data;
        let op = LinearOperator::CodedExposure(make_coded_mask(h, w, t, seed)?);
        let coded = op.apply(&video)?;
        let zero_fill = psnr(&op.adjoint(&coded)?, &video, peak(&video))?;
        let p = DecompositionProblem::inverse(coded, op, vec![h, w, t], Mode::Split2d1d, t, &template)?;
        let p = ctx.configure(p, seed, &video, epochs)?;
        let res = ctx.fit("video/deeptensor", &p)?;
        let hash = ctx.hash.clone();
        push(&mut runs, "video", "zero_fill", seed, &hash, zero_fill);
        push(&mut runs, "video", "deeptensor", seed, &hash, res.best_psnr().unwrap_or(f64::NAN));

        // Sparse-view CT of a volume, slice by slice.
        let (n, s) = (32, 8);
        let vol = make_phantom(PhantomKind::SheppLikeVolume, &[n, n, s], 1, seed)?.data;
        let op = LinearOperator::Radon(RadonProjector::new(ProjectionGeometry::uniform(n, angles))?);
        let clean_sino = op.apply(&vol)?;
        let sigma = sino_noise * clean_sino.max();
        let sino = degrade(&clean_sino, &NoiseSpec::new(NoiseKind::Gaussian { sigma }, seed))?;
        let voxel = voxel_descent(&sino, &op, &[n, n, s], epochs, &ctx.schedule()?, &vol)?;
        let p = DecompositionProblem::inverse(sino, op, vec![n, n, s], Mode::Cp, cp_rank, &template)?;
        let p = ctx.configure(p, seed, &vol, epochs)?;
        let res = ctx.fit("radon/deeptensor", &p)?;
        push(&mut runs, "radon", "voxel_descent", seed, &hash, voxel);
        push(&mut runs, "radon", "deeptensor", seed, &hash, res.best_psnr().unwrap_or(f64::NAN));
    }
    let summary = ctx.summarize(&runs, &["task", "method"], &["psnr"])?;
    Ok(vec![runs, summary])
}

/// Sample covariance (`features × features`) of `samples × features` data.
fn covariance(data: &DenseTensor) -> Result<DenseTensor> {
    let (n, f) = data.matrix_dims()?;
    let d = data.data();
    let mean: Vec<f64> = (0..f).map(|j| (0..n).map(|i| d[i * f + j]).sum::<f64>() / n as f64).collect();
    let centered = DenseTensor::from_fn(&[n, f], |i| d[i[0] * f + i[1]] - mean[i[1]]);
    Ok(centered.transpose()?.matmul(&centered)?.scale(1.0 / (n - 1) as f64))
}

pub(super) fn pca(ctx: &mut Ctx) -> Result<Vec<Table>> {
    let b = &ctx.cfg.bench;
    let dim = b.size.unwrap_or(64);
    let k = b.true_rank.unwrap_or(10);
    let sigmas = b
        .sigmas
        .clone()
        .unwrap_or_else(|| if ctx.quick { vec![0.5] } else { vec![0.1, 0.5, 1.0] });
    let counts = b
        .sample_counts
        .clone()
        .unwrap_or_else(|| if ctx.quick { vec![32, 256] } else { vec![32, 64, 128, 256, 512, 1024] });
    let epochs = ctx.epochs(300);
    let template = ctx.cfg.generator.clone();
    let mut runs = ctx.table(
        "runs",
        &["samples", "noise", "seed", "config_hash", "angle_pca_deg", "angle_deeptensor_deg"],
    );
    for seed in ctx.seeds.clone() {
        let mut g = rng::stream(seed, Stream::Phantom, 100);
        // Intrinsic `dim × k` matrix with iid N(0, 1) entries.
        let intrinsic = DenseTensor::from_fn(&[dim, k], |_| rng::normal(&mut g));
        let basis = truncated_svd(&intrinsic, k)?.u;
        for &n in &counts {
            for &noise in &sigmas {
                let z = DenseTensor::from_fn(&[n, k], |_| rng::normal(&mut g));
                let data = z
                    .matmul(&intrinsic.transpose()?)?
                    .add(&DenseTensor::from_fn(&[n, dim], |_| noise * rng::normal(&mut g)))?;
                let classic = principal_angle(&pca_baseline(&data, k)?.components, &basis)?;
                let cov = covariance(&data)?;
                let p = ctx
                    .problem(cov.clone(), Mode::Matrix, k, &template, seed, &cov, epochs)?
                    .with_snapshot(SnapshotPolicy::Final);
                let res = ctx.fit(&format!("samples={n}/noise={noise}"), &p)?;
                let est = truncated_svd(&res.factors[0], k)?.u;
                let dt = principal_angle(&est, &basis)?;
                runs.push(vec![
                    n.into(),
                    noise.into(),
                    seed.into(),
                    ctx.hash.clone().into(),
                    classic.to_degrees().into(),
                    dt.to_degrees().into(),
                ]);
            }
        }
    }
    let summary = ctx.summarize(&runs, &["samples", "noise"], &["angle_pca_deg", "angle_deeptensor_deg"])?;
    Ok(vec![runs, summary])
}
