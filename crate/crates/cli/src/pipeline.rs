//! End-to-end pipelines: dataset generation, network training, evaluation,
//! and the linearized-inversion baseline on the same data.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use waveband_core::field::{AcquisitionGeometry, FarFieldCube};
use waveband_core::grid::GridSpec;
use waveband_core::net::{format_inputs, NetworkConfig, WideBNet};
use waveband_core::nn::adam::{adam_step, learning_rate, AdamConfig, AdamState};
use waveband_core::nn::params::init_params;
use waveband_physics::born::BornOperator;
use waveband_physics::fbp::{fbp_solve, normal_operator_norm, FbpOptions};
use waveband_physics::helmholtz::{forward_map, PmlSpec, StencilOrder};
use waveband_physics::media::{self, Family};
use waveband_physics::PhysicsError;

use crate::checkpoint::{save_checkpoint, Checkpoint};
use crate::config::{CliError, Config};
use crate::dataset::{crc32, Dataset};
use crate::noise::{derive_seed, inject_noise_seeded};
use crate::pool::parallel_map;
use crate::smooth::smooth_target;
use crate::stats::NormalizationStats;

pub fn physics_err(e: PhysicsError) -> CliError {
    match e {
        PhysicsError::Config(m) => CliError::Config(m),
        other => CliError::Numerical(format!("{other:?}")),
    }
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct GenSpec {
    pub grid: GridSpec,
    pub family: Family,
    pub count: usize,
    pub seed_base: u64,
    pub order: StencilOrder,
}

/// Draw `count` media from the family and simulate their clean scattering
/// data. Sample `i` uses seed `seed_base + i`; the acquisition ring is the
/// one aligned with the grid.
pub fn generate_dataset(spec: &GenSpec) -> Result<Dataset, CliError> {
    let geom = AcquisitionGeometry::aligned_with(&spec.grid);
    let pml = PmlSpec::default();
    let seeds: Vec<u64> = (0..spec.count as u64).map(|i| spec.seed_base + i).collect();
    let results = parallel_map(&seeds, |&seed| -> Result<(Vec<f32>, FarFieldCube), CliError> {
        let field = media::generate(spec.family, &spec.grid, seed).map_err(physics_err)?;
        let cube = forward_map(&field, &geom, spec.order, &pml).map_err(physics_err)?;
        let eta32: Vec<f32> = field.eta.iter().map(|&v| v as f32).collect();
        Ok((eta32, cube))
    });
    let mut etas = Vec::with_capacity(spec.count);
    let mut cubes = Vec::with_capacity(spec.count);
    for r in results {
        let (eta, cube) = r?;
        etas.push(eta);
        cubes.push(cube);
    }
    Ok(Dataset {
        grid: spec.grid.clone(),
        family: spec.family.name().to_string(),
        seed_base: spec.seed_base,
        stencil_order: spec.order.as_u8(),
        etas,
        cubes,
    })
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

/// Squared error summed over pixels for one sample, with the gradient with
/// respect to the prediction. Accumulated in f64 regardless of the network
/// precision.
pub fn sample_loss_and_grad(pred: &[f32], target: &[f32]) -> (f64, Vec<f32>) {
    assert_eq!(pred.len(), target.len());
    let mut loss = 0.0f64;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.iter().zip(target) {
        let d = p as f64 - t as f64;
        loss += d * d;
        grad.push((2.0 * d) as f32);
    }
    (loss, grad)
}

/// Batch loss: per-pixel-summed squared error averaged over the batch.
pub fn batch_loss(preds: &[Vec<f32>], targets: &[&[f32]]) -> f64 {
    assert_eq!(preds.len(), targets.len());
    let total: f64 = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| sample_loss_and_grad(p, t).0)
        .sum();
    total / preds.len() as f64
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct TrainSpec {
    pub net: NetworkConfig,
    pub epochs: usize,
    pub batch: usize,
    /// Noise level applied dynamically to every training view.
    pub sigma: f64,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Periodic checkpoint cadence in epochs.
    pub checkpoint_every: usize,
    /// When set, checkpoints and the loss history are written here.
    pub out_dir: Option<PathBuf>,
    /// Verbatim launch configuration, echoed into the checkpoint.
    pub config_echo: String,
    /// Optional cap on optimizer steps (the epoch loop exits early).
    pub max_steps: Option<u64>,
    /// Optional early exit once the epoch mean loss drops this low.
    pub stop_at_loss: Option<f64>,
    /// Print an epoch summary to stderr every this many epochs (0 = silent).
    pub log_every: usize,
}

impl TrainSpec {
    pub fn new(net: NetworkConfig, epochs: usize, sigma: f64, seed: u64) -> Self {
        TrainSpec {
            net,
            epochs,
            batch: 32,
            sigma,
            seed,
            adam: AdamConfig::default(),
            checkpoint_every: 50,
            out_dir: None,
            config_echo: String::new(),
            max_steps: None,
            stop_at_loss: None,
            log_every: 0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct HistoryRow {
    pub epoch: usize,
    /// Completed optimizer steps at the end of the epoch.
    pub step: u64,
    /// Learning rate in effect at that step count.
    pub lr: f64,
    /// Mean per-sample loss (pixel-summed squared error) over the epoch.
    pub train_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<HistoryRow>,
}

/// Relative shuffle stream: kept clear of the per-sample noise stream.
const SHUFFLE_TAG: u64 = u64::MAX;

fn cube_digest(cube: &FarFieldCube) -> u32 {
    let mut bytes = Vec::with_capacity(cube.slices[0].len() * 16);
    for z in &cube.slices[0] {
        bytes.extend_from_slice(&z.re.to_le_bytes());
        bytes.extend_from_slice(&z.im.to_le_bytes());
    }
    crc32(&bytes)
}

pub fn history_csv(history: &[HistoryRow]) -> String {
    let mut s = String::from("epoch,step,lr,train_loss\n");
    for row in history {
        s.push_str(&format!(
            "{},{},{},{}\n",
            row.epoch, row.step, row.lr, row.train_loss
        ));
    }
    s
}

/// Train a network on a dataset: per-frequency standardization from the
/// clean training cubes, fresh multiplicative noise every epoch, smoothed
/// targets, Adam with a staircase learning rate. Deterministic for a fixed
/// seed when the worker pool is capped to one thread.
pub fn train(ds: &Dataset, spec: &TrainSpec) -> Result<TrainOutcome, CliError> {
    let cfg = &spec.net;
    if ds.grid.n != cfg.n() {
        return Err(CliError::Config(format!(
            "dataset grid is {}, network expects {}",
            ds.grid.n,
            cfg.n()
        )));
    }
    if ds.count() == 0 {
        return Err(CliError::Data("training dataset is empty".into()));
    }
    if spec.batch == 0 {
        return Err(CliError::Config("batch size must be positive".into()));
    }
    let net = WideBNet::new(cfg.clone())
        .map_err(|e| CliError::Config(format!("network configuration: {e}")))?;
    let stats = NormalizationStats::from_training(&ds.cubes)?;
    let targets: Vec<Vec<f32>> = ds
        .etas
        .iter()
        .map(|eta| {
            let eta64: Vec<f64> = eta.iter().map(|&v| v as f64).collect();
            smooth_target(&eta64, ds.grid.n)
                .into_iter()
                .map(|v| v as f32)
                .collect()
        })
        .collect();

    let nparams = net.param_count();
    let mut params: Vec<f32> = init_params(&net.registry, spec.seed);
    let mut adam = AdamState::<f32>::new(nparams);
    let mut history = Vec::with_capacity(spec.epochs);
    let mut indices: Vec<usize> = (0..ds.count()).collect();
    let mut prev_digest: Option<u32> = None;
    let echo = format!(
        "{}\n[provenance]\ntrain_seeds = {}..{}\ntrain_order = {}\ntrain_family = {}\n",
        spec.config_echo.trim_end(),
        ds.seed_base,
        ds.seed_base + ds.count() as u64,
        ds.stencil_order,
        ds.family,
    );
    let make_checkpoint = |params: &Vec<f32>, adam: &AdamState<f32>| Checkpoint {
        config_echo: echo.clone(),
        net: cfg.clone(),
        grid: ds.grid.clone(),
        stats: stats.clone(),
        params: params.clone(),
        opt: Some((adam.m.clone(), adam.v.clone())),
        step: adam.step,
    };
    if let Some(dir) = &spec.out_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    }

    let mut done = false;
    for epoch in 0..spec.epochs {
        let mut shuffle_rng =
            ChaCha20Rng::seed_from_u64(derive_seed(spec.seed, SHUFFLE_TAG, epoch as u64));
        indices.shuffle(&mut shuffle_rng);

        // Probability-one invariant: this epoch's noisy view of sample 0
        // must differ from last epoch's.
        if spec.sigma > 0.0 {
            let probe = inject_noise_seeded(
                &ds.cubes[0],
                spec.sigma,
                derive_seed(spec.seed, epoch as u64, 0),
            );
            let digest = cube_digest(&probe);
            if let Some(prev) = prev_digest {
                assert_ne!(
                    prev, digest,
                    "noise was not resampled between epochs {} and {epoch}",
                    epoch - 1
                );
            }
            prev_digest = Some(digest);
        }

        let mut epoch_loss = 0.0f64;
        let mut seen = 0usize;
        for chunk in indices.chunks(spec.batch) {
            let lr_now = learning_rate(&spec.adam, adam.step);
            let results = parallel_map(chunk, |&i| -> Result<(f64, Vec<f32>), CliError> {
                let noisy = inject_noise_seeded(
                    &ds.cubes[i],
                    spec.sigma,
                    derive_seed(spec.seed, epoch as u64, i as u64),
                );
                let standardized = stats.standardize(&noisy)?;
                let inputs = format_inputs::<f32>(&standardized, cfg.levels, cfg.leaf)
                    .map_err(|e| CliError::Data(format!("sample {i}: {e}")))?;
                let cache = net.forward_train(&params, &inputs);
                let (loss, dout) = sample_loss_and_grad(&cache.output, &targets[i]);
                let mut grad = vec![0f32; nparams];
                net.backward(&params, &inputs, &cache, &dout, &mut grad);
                Ok((loss, grad))
            });
            // Ordered reduction keeps the update deterministic.
            let mut grad = vec![0f32; nparams];
            let mut batch_total = 0.0f64;
            for r in results {
                let (loss, g) = r?;
                batch_total += loss;
                for (acc, x) in grad.iter_mut().zip(&g) {
                    *acc += x;
                }
            }
            let inv_b = 1.0 / chunk.len() as f32;
            for g in &mut grad {
                *g *= inv_b;
            }
            let mean_loss = batch_total / chunk.len() as f64;
            if !mean_loss.is_finite() {
                return Err(CliError::Numerical(format!(
                    "loss is not finite ({mean_loss}) at epoch {epoch} step {} lr {lr_now}",
                    adam.step
                )));
            }
            epoch_loss += batch_total;
            seen += chunk.len();
            adam_step(&spec.adam, &mut adam, &mut params, &grad);
            if let Some(cap) = spec.max_steps {
                if adam.step >= cap {
                    done = true;
                    break;
                }
            }
        }

        let row = HistoryRow {
            epoch,
            step: adam.step,
            lr: learning_rate(&spec.adam, adam.step),
            train_loss: epoch_loss / seen as f64,
        };
        history.push(row);
        if spec.log_every > 0 && (epoch + 1) % spec.log_every == 0 {
            eprintln!(
                "epoch {:>4}/{} step {:>7} lr {:.3e} train_loss {:.6e}",
                epoch + 1,
                spec.epochs,
                row.step,
                row.lr,
                row.train_loss
            );
        }
        if let Some(dir) = &spec.out_dir {
            if spec.checkpoint_every > 0 && (epoch + 1) % spec.checkpoint_every == 0 {
                save_checkpoint(&dir.join("checkpoint.wbck"), &make_checkpoint(&params, &adam))?;
            }
        }
        if let Some(stop) = spec.stop_at_loss {
            if row.train_loss <= stop {
                done = true;
            }
        }
        if done {
            break;
        }
    }

    let checkpoint = make_checkpoint(&params, &adam);
    if let Some(dir) = &spec.out_dir {
        save_checkpoint(&dir.join("checkpoint.wbck"), &checkpoint)?;
        std::fs::write(dir.join("history.csv"), history_csv(&history))
            .map_err(|e| CliError::Data(format!("cannot write history: {e}")))?;
    }
    Ok(TrainOutcome {
        checkpoint,
        history,
    })
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct SampleMetrics {
    /// Mean squared error per pixel.
    pub mse_per_pixel: f64,
    /// Relative squared l2 error: ||pred - target||^2 / ||target||^2.
    pub rel_l2_per_image: f64,
}

#[derive(Clone, Debug, Default)]
pub struct EvalReport {
    pub per_sample: Vec<SampleMetrics>,
    pub mean_mse: f64,
    pub mean_rel: f64,
}

/// Metrics for a set of predictions against the smoothed ground truth.
pub fn metrics_against_targets(preds: &[Vec<f64>], targets: &[Vec<f64>]) -> EvalReport {
    assert_eq!(preds.len(), targets.len());
    let mut per_sample = Vec::with_capacity(preds.len());
    for (p, t) in preds.iter().zip(targets) {
        assert_eq!(p.len(), t.len());
        let mut num = 0.0;
        let mut den = 0.0;
        for (&a, &b) in p.iter().zip(t) {
            num += (a - b) * (a - b);
            den += b * b;
        }
        per_sample.push(SampleMetrics {
            mse_per_pixel: num / p.len() as f64,
            rel_l2_per_image: if den > 0.0 {
                num / den
            } else if num > 0.0 {
                f64::INFINITY
            } else {
                0.0
            },
        });
    }
    let n = per_sample.len().max(1) as f64;
    EvalReport {
        mean_mse: per_sample.iter().map(|m| m.mse_per_pixel).sum::<f64>() / n,
        mean_rel: per_sample.iter().map(|m| m.rel_l2_per_image).sum::<f64>() / n,
        per_sample,
    }
}

/// Smoothed ground-truth targets of a dataset, in f64.
pub fn dataset_targets(ds: &Dataset) -> Vec<Vec<f64>> {
    ds.etas
        .iter()
        .map(|eta| {
            let eta64: Vec<f64> = eta.iter().map(|&v| v as f64).collect();
            smooth_target(&eta64, ds.grid.n)
        })
        .collect()
}

fn seed_range_from_echo(echo: &str) -> Option<(u64, u64)> {
    let cfg = Config::parse(echo).ok()?;
    let s = cfg.get("provenance.train_seeds")?.to_string();
    let (a, b) = s.split_once("..")?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

/// Guard that an evaluation dataset shares no samples with the training
/// split recorded in the checkpoint (same family and overlapping seeds).
pub fn assert_disjoint_from_training(ck: &Checkpoint, ds: &Dataset) -> Result<(), CliError> {
    if let Some((lo, hi)) = seed_range_from_echo(&ck.config_echo) {
        let fam = Config::parse(&ck.config_echo)
            .ok()
            .map(|c| c.str_or("provenance.train_family", ""))
            .unwrap_or_default();
        let ds_lo = ds.seed_base;
        let ds_hi = ds.seed_base + ds.count() as u64;
        if fam == ds.family && ds_lo < hi && lo < ds_hi {
            return Err(CliError::Config(format!(
                "evaluation dataset seeds {ds_lo}..{ds_hi} overlap the training split {lo}..{hi}"
            )));
        }
    }
    Ok(())
}

/// Run the network over every sample of a dataset at noise level `sigma`.
/// Noise is deterministic given `eval_seed`; predictions are returned in
/// dataset order.
pub fn predict_all(
    ck: &Checkpoint,
    ds: &Dataset,
    sigma: f64,
    eval_seed: u64,
) -> Result<Vec<Vec<f64>>, CliError> {
    let cfg = &ck.net;
    if ds.grid != ck.grid {
        return Err(CliError::Config(format!(
            "dataset grid ({}x{}, {} frequencies) does not match the checkpoint's \
             acquisition grid ({}x{}, {} frequencies)",
            ds.grid.n,
            ds.grid.n,
            ds.grid.frequencies.len(),
            ck.grid.n,
            ck.grid.n,
            ck.grid.frequencies.len()
        )));
    }
    let net = WideBNet::new(cfg.clone())
        .map_err(|e| CliError::Config(format!("checkpoint network configuration: {e}")))?;
    let idx: Vec<usize> = (0..ds.count()).collect();
    let preds = parallel_map(&idx, |&i| -> Result<Vec<f64>, CliError> {
        let noisy = inject_noise_seeded(&ds.cubes[i], sigma, derive_seed(eval_seed, 0, i as u64));
        let standardized = ck.stats.standardize(&noisy)?;
        let inputs = format_inputs::<f32>(&standardized, cfg.levels, cfg.leaf)
            .map_err(|e| CliError::Data(format!("sample {i}: {e}")))?;
        let out = net.forward(&ck.params, &inputs);
        Ok(out.into_iter().map(|v| v as f64).collect())
    });
    preds.into_iter().collect()
}

/// Evaluate a checkpoint on a dataset: standardization stats come from the
/// checkpoint, noise from `eval_seed`, metrics against smoothed targets.
pub fn evaluate(
    ck: &Checkpoint,
    ds: &Dataset,
    sigma: f64,
    eval_seed: u64,
) -> Result<(EvalReport, Vec<Vec<f64>>), CliError> {
    assert_disjoint_from_training(ck, ds)?;
    let preds = predict_all(ck, ds, sigma, eval_seed)?;
    let targets = dataset_targets(ds);
    Ok((metrics_against_targets(&preds, &targets), preds))
}

pub fn metrics_csv(report: &EvalReport) -> String {
    let mut s = String::from("sample,mse_per_pixel,rel_l2_per_image\n");
    for (i, m) in report.per_sample.iter().enumerate() {
        s.push_str(&format!("{i},{},{}\n", m.mse_per_pixel, m.rel_l2_per_image));
    }
    s.push_str(&format!("mean,{},{}\n", report.mean_mse, report.mean_rel));
    s
}

// ---------------------------------------------------------------------------
// Linearized-inversion baseline
// ---------------------------------------------------------------------------

/// Invert every sample of a dataset with the damped linearized normal
/// equations, using the same noise realizations as a network evaluation
/// with the same `eval_seed`.
pub fn fbp_predict_all(
    ds: &Dataset,
    sigma: f64,
    eval_seed: u64,
    epsilon: f64,
) -> Result<Vec<Vec<f64>>, CliError> {
    let geom = AcquisitionGeometry::aligned_with(&ds.grid);
    let ops: Vec<BornOperator> = ds
        .grid
        .frequencies
        .iter()
        .map(|f| BornOperator::new(&ds.grid, &geom, f.hertz))
        .collect();
    let rho = normal_operator_norm(&ops, 30, 0x0F_B0);
    let opts = FbpOptions {
        epsilon,
        rho: Some(rho),
        ..FbpOptions::default()
    };
    let idx: Vec<usize> = (0..ds.count()).collect();
    let results = parallel_map(&idx, |&i| -> Result<Vec<f64>, CliError> {
        let noisy = inject_noise_seeded(&ds.cubes[i], sigma, derive_seed(eval_seed, 0, i as u64));
        let slices: Vec<&[Complex64]> = noisy.slices.iter().map(|s| s.as_slice()).collect();
        let sol = fbp_solve(&ops, &slices, &opts).map_err(physics_err)?;
        Ok(sol.eta)
    });
    results.into_iter().collect()
}

/// Write per-sample prediction images next to their targets.
pub fn emit_prediction_images(
    dir: &Path,
    tag: &str,
    preds: &[Vec<f64>],
    targets: &[Vec<f64>],
    n: usize,
    limit: usize,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    for (i, (p, t)) in preds.iter().zip(targets).enumerate().take(limit) {
        crate::pgm::emit_image(&dir.join(format!("{tag}_{i:03}_pred")), p, n, n, None)?;
        crate::pgm::emit_image(&dir.join(format!("{tag}_{i:03}_target")), t, n, n, None)?;
    }
    Ok(())
}
