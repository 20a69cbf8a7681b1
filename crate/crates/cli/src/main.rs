//! `waveband`: far-field simulation, training, inversion, and benchmark
//! front end.
//!
//! Subcommands exit 0 on success; 2 on configuration errors, 3 on data or
//! I/O errors, 4 on numerical failures. Every failure prints exactly one
//! machine-parsable line (`error=<kind> reason=<...>`) to stderr. Logs go
//! to stderr; machine-readable artifacts go under `--out`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use waveband_cli::bench::{
    bench_collision, bench_noise, generalization_matrix, CollisionSpec,
};
use waveband_cli::checkpoint::{load_checkpoint, Checkpoint};
use waveband_cli::config::{CliError, Config};
use waveband_cli::dataset::{load_dataset, write_blob, Blob, BlobData, Dataset};
use waveband_cli::pipeline::{
    dataset_targets, emit_prediction_images, evaluate, fbp_predict_all, generate_dataset,
    metrics_against_targets, metrics_csv, predict_all, train, GenSpec,
    TrainSpec,
};
use waveband_core::grid::GridSpec;
use waveband_core::net::{NetworkConfig, Variant};
use waveband_physics::helmholtz::StencilOrder;
use waveband_physics::media::Family;

#[derive(Parser)]
#[command(
    name = "waveband",
    version,
    about = "Inverse wave-scattering workbench: simulate far-field data, train butterfly networks, invert classically, and benchmark."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a far-field dataset for a media family.
    GenerateData(GenerateArgs),
    /// Train a butterfly network on a dataset directory.
    Train(TrainArgs),
    /// Score a checkpoint on a held-out dataset.
    Eval(EvalArgs),
    /// Run a checkpoint over a dataset; emit images and a prediction blob.
    Infer(InferArgs),
    /// Classical linearized inversion baseline over a dataset.
    Fbp(FbpArgs),
    /// Two-scatterer separation sweep against fresh simulated media.
    BenchCollision(BenchCollisionArgs),
    /// Noise-robustness sweep of a checkpoint over one dataset.
    BenchNoise(BenchNoiseArgs),
    /// Cross-family generalization matrix (models x datasets).
    GenMatrix(GenMatrixArgs),
    /// Central-difference check of the end-to-end training gradient.
    Gradcheck(GradcheckArgs),
    /// Fast invariant suite over the numerical core.
    Selftest,
}

#[derive(Args)]
struct GenerateArgs {
    /// INI config with [grid] (n, levels, leaf, f_max) and [data]
    /// (family, count, seed, order) sections.
    #[arg(long)]
    config: PathBuf,
    /// Override [data] seed: base RNG seed; sample i uses seed+i.
    #[arg(long)]
    seed: Option<u64>,
    /// Override [data] order: finite-difference stencil order (2 or 4).
    #[arg(long)]
    order: Option<u8>,
    /// Override [data] count: number of samples.
    #[arg(long)]
    count: Option<usize>,
    /// Output directory for the dataset (manifest + blobs).
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset directory (from generate-data).
    #[arg(long)]
    data: PathBuf,
    /// INI config with [net] (rank, variant, n_cnn, n_rnn, conv_kernel,
    /// conv_hidden) and [train] (epochs, batch, sigma, seed,
    /// checkpoint_every, lr0, decay, decay_every) sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override [train] seed: parameter init, shuffling, and noise.
    #[arg(long)]
    seed: Option<u64>,
    /// Override [train] sigma: relative noise level applied per epoch.
    #[arg(long)]
    sigma: Option<f64>,
    /// Override [net] variant: wide, narrow, or switchless.
    #[arg(long)]
    variant: Option<String>,
    /// Output directory for checkpoint.wbck and history.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Trained checkpoint file.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Held-out dataset directory; must not overlap the training split.
    #[arg(long)]
    data: PathBuf,
    /// Relative noise level applied to the data before inversion.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Seed of the evaluation noise stream.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// When set, write metrics.csv and sample images here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    /// Trained checkpoint file.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Input dataset directory to reconstruct.
    #[arg(long)]
    input: PathBuf,
    /// Relative noise level applied to the data before inversion.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Seed of the noise stream (unused at sigma = 0).
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory for per-sample images and predictions.f32.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct FbpArgs {
    /// Dataset directory to invert.
    #[arg(long)]
    data: PathBuf,
    /// Relative noise level applied to the data before inversion.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Tikhonov weight; defaults to 1e-3 clean / 1.0 when sigma > 0.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Seed of the evaluation noise stream.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// When set, write metrics.csv and sample images here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchCollisionArgs {
    /// Trained checkpoint(s); repeat the flag to compare models.
    #[arg(long, required = true)]
    checkpoint: Vec<PathBuf>,
    /// Relative noise level for the probe data.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Seed of the media/noise streams.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Number of random placements per gap.
    #[arg(long, default_value_t = 20)]
    draws: usize,
    /// Skip the classical baseline column.
    #[arg(long, default_value_t = false)]
    no_baseline: bool,
    /// Output directory for collision.csv and first-draw images.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchNoiseArgs {
    /// Trained checkpoint file.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Held-out dataset directory.
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated noise levels to sweep.
    #[arg(long, default_value = "0,0.5,1,1.5,2,3")]
    sigmas: String,
    /// Seed of the evaluation noise stream.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory for noise.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct GenMatrixArgs {
    /// Trained checkpoint(s), one row per model.
    #[arg(long, required = true)]
    checkpoint: Vec<PathBuf>,
    /// Dataset director(ies), one column per dataset.
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    /// Relative noise level applied to every cell.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Seed of the evaluation noise stream.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory for matrix.csv and matrix.pgm.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Seed for parameters, probe data, and coordinate sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Coordinates to probe by central differences.
    #[arg(long, default_value_t = 300)]
    coords: usize,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("{}", e.one_line());
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::GenerateData(a) => cmd_generate(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Infer(a) => cmd_infer(a),
        Cmd::Fbp(a) => cmd_fbp(a),
        Cmd::BenchCollision(a) => cmd_bench_collision(a),
        Cmd::BenchNoise(a) => cmd_bench_noise(a),
        Cmd::GenMatrix(a) => cmd_gen_matrix(a),
        Cmd::Gradcheck(a) => cmd_gradcheck(a),
        Cmd::Selftest => selftest::run(),
    }
}

fn grid_from_config(cfg: &Config) -> Result<GridSpec, CliError> {
    let n = cfg.usize_or("grid.n", 32)?;
    let levels = cfg.u32_or("grid.levels", 3)?;
    let default_leaf = n >> levels.min(31);
    let leaf = cfg.usize_or("grid.leaf", default_leaf.max(1))?;
    let f_max = cfg.f64_or("grid.f_max", 4.0)?;
    GridSpec::with_standard_band(n, levels, leaf, f_max)
        .map_err(|e| CliError::Config(format!("grid: {e}")))
}

fn order_from(v: u8) -> Result<StencilOrder, CliError> {
    StencilOrder::from_u8(v)
        .ok_or_else(|| CliError::Config(format!("stencil order must be 2 or 4, got {v}")))
}

fn family_from(name: &str) -> Result<Family, CliError> {
    Family::parse(name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown media family {name:?}; one of: {}",
            Family::catalogue()
                .iter()
                .map(|f| f.name())
                .collect::<Vec<_>>()
                .join(", ")
        ))
    })
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn cmd_generate(a: GenerateArgs) -> Result<(), CliError> {
    let cfg = Config::load(&a.config)?;
    let grid = grid_from_config(&cfg)?;
    let family = family_from(&cfg.str_or("data.family", "squares"))?;
    let count = match a.count {
        Some(c) => c,
        None => cfg.usize_or("data.count", 100)?,
    };
    let seed_base = match a.seed {
        Some(s) => s,
        None => cfg.u64_or("data.seed", 0)?,
    };
    let order = order_from(match a.order {
        Some(o) => o,
        None => cfg.u64_or("data.order", 2)? as u8,
    })?;
    eprintln!(
        "generating {count} {} samples at n={} ({} frequencies, order {})",
        family.name(),
        grid.n,
        grid.frequencies.len(),
        order.as_u8()
    );
    let started = Instant::now();
    let ds = generate_dataset(&GenSpec {
        grid,
        family,
        count,
        seed_base,
        order,
    })?;
    ensure_dir(&a.out)?;
    waveband_cli::dataset::save_dataset(&a.out, &ds)?;
    eprintln!(
        "wrote {count} samples to {} in {:.1}s",
        a.out.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<(), CliError> {
    let (cfg, echo) = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
            (Config::parse(&text)?, text)
        }
        None => (Config::parse("")?, String::new()),
    };
    let ds = load_dataset(&a.data)?;
    let variant_name = match &a.variant {
        Some(v) => v.clone(),
        None => cfg.str_or("net.variant", "wide"),
    };
    let variant = Variant::parse(&variant_name)
        .ok_or_else(|| CliError::Config(format!("unknown variant {variant_name:?}")))?;
    let mut net = NetworkConfig::new(
        ds.grid.levels,
        ds.grid.leaf,
        cfg.usize_or("net.rank", 4)?,
        variant,
    );
    net.n_cnn = cfg.usize_or("net.n_cnn", net.n_cnn)?;
    net.n_rnn = cfg.usize_or("net.n_rnn", net.n_rnn)?;
    net.conv_kernel = cfg.usize_or("net.conv_kernel", net.conv_kernel)?;
    net.conv_hidden = cfg.usize_or("net.conv_hidden", net.conv_hidden)?;

    let sigma = match a.sigma {
        Some(s) => s,
        None => cfg.f64_or("train.sigma", 1.0)?,
    };
    let seed = match a.seed {
        Some(s) => s,
        None => cfg.u64_or("train.seed", 0)?,
    };
    let mut spec = TrainSpec::new(net, cfg.usize_or("train.epochs", 100)?, sigma, seed);
    spec.batch = cfg.usize_or("train.batch", spec.batch)?;
    spec.checkpoint_every = cfg.usize_or("train.checkpoint_every", spec.checkpoint_every)?;
    spec.adam.lr0 = cfg.f64_or("train.lr0", spec.adam.lr0)?;
    spec.adam.decay = cfg.f64_or("train.decay", spec.adam.decay)?;
    spec.adam.decay_every = cfg.u64_or("train.decay_every", spec.adam.decay_every)?;
    spec.log_every = cfg.usize_or("train.log_every", 1)?;
    spec.out_dir = Some(a.out.clone());
    let mut echo = echo;
    echo.push_str(&format!(
        "\n[launch]\nvariant = {}\nsigma = {sigma}\nseed = {seed}\n",
        variant.name()
    ));
    spec.config_echo = echo;

    eprintln!(
        "training {} (rank {}, {} levels) on {} samples, sigma={sigma}, {} epochs",
        variant.name(),
        spec.net.rank,
        spec.net.levels,
        ds.count(),
        spec.epochs
    );
    let started = Instant::now();
    let outcome = train(&ds, &spec)?;
    let last = outcome.history.last();
    eprintln!(
        "done in {:.1}s; {} steps, final train_loss {}",
        started.elapsed().as_secs_f64(),
        outcome.checkpoint.step,
        last.map_or("n/a".into(), |r| format!("{:.6e}", r.train_loss)),
    );
    println!(
        "checkpoint={} steps={} train_loss={}",
        a.out.join("checkpoint.wbck").display(),
        outcome.checkpoint.step,
        last.map_or("n/a".into(), |r| format!("{:.6e}", r.train_loss)),
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let ds = load_dataset(&a.data)?;
    let (report, preds) = evaluate(&ck, &ds, a.sigma, a.seed)?;
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        write_text(&dir.join("metrics.csv"), &metrics_csv(&report))?;
        let targets = dataset_targets(&ds);
        emit_prediction_images(dir, "eval", &preds, &targets, ds.grid.n, 8)?;
        eprintln!("wrote metrics.csv and sample images to {}", dir.display());
    }
    println!(
        "samples={} sigma={} mean_mse={:.6e} mean_rel={:.6e}",
        ds.count(),
        a.sigma,
        report.mean_mse,
        report.mean_rel
    );
    Ok(())
}

fn cmd_infer(a: InferArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let ds = load_dataset(&a.input)?;
    let started = Instant::now();
    let preds = predict_all(&ck, &ds, a.sigma, a.seed)?;
    let per_image = started.elapsed().as_secs_f64() / ds.count().max(1) as f64;
    ensure_dir(&a.out)?;
    let n = ds.grid.n;
    let flat: Vec<f32> = preds
        .iter()
        .flat_map(|p| p.iter().map(|&v| v as f32))
        .collect();
    let blob = Blob::new(
        vec![preds.len() as u64, n as u64, n as u64],
        BlobData::F32(flat),
    )?;
    write_blob(&a.out.join("predictions.f32"), &blob)?;
    for (i, p) in preds.iter().enumerate() {
        waveband_cli::pgm::emit_image(&a.out.join(format!("pred_{i:04}")), p, n, n, None)?;
    }
    eprintln!(
        "reconstructed {} images at {:.3}s per image; wrote {}",
        preds.len(),
        per_image,
        a.out.display()
    );
    println!(
        "images={} seconds_per_image={per_image:.4} out={}",
        preds.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_fbp(a: FbpArgs) -> Result<(), CliError> {
    let ds = load_dataset(&a.data)?;
    let epsilon = a.epsilon.unwrap_or(if a.sigma > 0.0 { 1.0 } else { 1e-3 });
    eprintln!(
        "inverting {} samples with the linearized baseline (sigma={}, epsilon={epsilon})",
        ds.count(),
        a.sigma
    );
    let preds = fbp_predict_all(&ds, a.sigma, a.seed, epsilon)?;
    let targets = dataset_targets(&ds);
    let report = metrics_against_targets(&preds, &targets);
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        write_text(&dir.join("metrics.csv"), &metrics_csv(&report))?;
        emit_prediction_images(dir, "fbp", &preds, &targets, ds.grid.n, 8)?;
        eprintln!("wrote metrics.csv and sample images to {}", dir.display());
    }
    println!(
        "samples={} sigma={} epsilon={epsilon} mean_mse={:.6e} mean_rel={:.6e}",
        ds.count(),
        a.sigma,
        report.mean_mse,
        report.mean_rel
    );
    Ok(())
}

fn stem_label(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn cmd_bench_collision(a: BenchCollisionArgs) -> Result<(), CliError> {
    let loaded: Vec<(String, Checkpoint)> = a
        .checkpoint
        .iter()
        .map(|p| Ok((stem_label(p), load_checkpoint(p)?)))
        .collect::<Result<_, CliError>>()?;
    let models: Vec<(&str, &Checkpoint)> = loaded
        .iter()
        .map(|(label, ck)| (label.as_str(), ck))
        .collect();
    let mut spec = CollisionSpec::desk(loaded[0].1.grid.clone(), a.seed);
    spec.sigma = a.sigma;
    spec.draws = a.draws;
    ensure_dir(&a.out)?;
    eprintln!(
        "collision sweep: gaps {:?} px, {} draws each, sigma={}",
        spec.deltas, spec.draws, spec.sigma
    );
    let report = bench_collision(&models, &spec, !a.no_baseline, Some(&a.out))?;
    write_text(&a.out.join("collision.csv"), &report.csv())?;
    print!("{}", report.csv());
    eprintln!("wrote collision.csv and images to {}", a.out.display());
    Ok(())
}

fn cmd_bench_noise(a: BenchNoiseArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let ds = load_dataset(&a.data)?;
    let sigmas: Vec<f64> = a
        .sigmas
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("bad sigma {t:?}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let report = bench_noise(&ck, &ds, &sigmas, a.seed)?;
    ensure_dir(&a.out)?;
    write_text(&a.out.join("noise.csv"), &report.csv())?;
    print!("{}", report.csv());
    eprintln!("wrote noise.csv to {}", a.out.display());
    Ok(())
}

fn cmd_gen_matrix(a: GenMatrixArgs) -> Result<(), CliError> {
    let loaded_models: Vec<(String, Checkpoint)> = a
        .checkpoint
        .iter()
        .map(|p| Ok((stem_label(p), load_checkpoint(p)?)))
        .collect::<Result<_, CliError>>()?;
    let loaded_data: Vec<(String, Dataset)> = a
        .data
        .iter()
        .map(|p| {
            let ds = load_dataset(p)?;
            Ok((format!("{} ({})", stem_label(p), ds.family), ds))
        })
        .collect::<Result<_, CliError>>()?;
    let models: Vec<(&str, &Checkpoint)> = loaded_models
        .iter()
        .map(|(l, c)| (l.as_str(), c))
        .collect();
    let datasets: Vec<(&str, &Dataset)> = loaded_data
        .iter()
        .map(|(l, d)| (l.as_str(), d))
        .collect();
    let report = generalization_matrix(&models, &datasets, a.sigma, a.seed)?;
    ensure_dir(&a.out)?;
    write_text(&a.out.join("matrix.csv"), &report.csv())?;
    report.emit_heatmap(&a.out.join("matrix"))?;
    print!("{}", report.csv());
    eprintln!("wrote matrix.csv and heatmap to {}", a.out.display());
    Ok(())
}

fn cmd_gradcheck(a: GradcheckArgs) -> Result<(), CliError> {
    let report = selftest::end_to_end_gradcheck(a.seed, a.coords)?;
    println!(
        "checked={} max_rel_err={:.3e} worst_index={}",
        report.checked, report.max_rel_err, report.worst_index
    );
    if report.max_rel_err > 1e-5 {
        return Err(CliError::Numerical(format!(
            "end-to-end gradient check failed: max rel err {:.3e} at coordinate {} exceeds 1e-5",
            report.max_rel_err, report.worst_index
        )));
    }
    eprintln!("gradient check passed");
    Ok(())
}

mod selftest {
    //! Fast invariant checks over the numerical core. Each check prints one
    //! line to stderr; any failure aborts with a numerical-error exit.

    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    use waveband_cli::config::CliError;
    use waveband_cli::dataset::{blob_from_bytes, blob_to_bytes, crc32, Blob, BlobData};
    use waveband_cli::pipeline::physics_err;
    use waveband_core::field::{AcquisitionGeometry, FarFieldCube, SlownessField};
    use waveband_core::grid::{Frequency, GridSpec};
    use waveband_core::net::{format_inputs, NetworkConfig, Variant, WideBNet};
    use waveband_core::nn::gradcheck::{central_diff_check, GradCheckReport};
    use waveband_core::nn::params::init_params;
    use waveband_core::special::hankel1_0;
    use waveband_core::tensor::{
        depth_to_space, detensorize, space_to_depth, switch_permute, tensorize, Tensor3,
    };
    use waveband_physics::born::BornOperator;
    use waveband_physics::fbp::{fbp_solve, FbpOptions};
    use waveband_physics::helmholtz::{forward_map, HelmholtzSolver, PmlSpec, StencilOrder};
    use waveband_physics::media::{self, add_gaussian_bump, Family};

    fn fail(name: &str, detail: String) -> CliError {
        CliError::Numerical(format!("selftest {name}: {detail}"))
    }

    fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den).sqrt()
    }

    pub fn run() -> Result<(), CliError> {
        let checks: [(&str, fn() -> Result<(), CliError>); 8] = [
            ("tensor round-trips", tensor_round_trips),
            ("switch involution", switch_involution),
            ("free-space Green's function", green_oracle),
            ("media determinism and bounds", media_determinism),
            ("forward-map linearity", forward_linearity),
            ("linearized adjoint", born_adjoint),
            ("classical localization", fbp_localization),
            ("end-to-end gradient", tiny_gradcheck),
        ];
        let total = checks.len();
        for (i, (name, check)) in checks.into_iter().enumerate() {
            check()?;
            eprintln!("selftest {}/{total} {name}: ok", i + 1);
        }
        eprintln!("selftest passed");
        Ok(())
    }

    fn tensor_round_trips() -> Result<(), CliError> {
        let name = "tensor round-trips";
        let (levels, leaf) = (2u32, 4usize);
        let n = (1usize << levels) * leaf;
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let img: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>() - 0.5).collect();
        for level in 1..=levels {
            let t = tensorize(&img, levels, leaf, level, 1)
                .map_err(|e| fail(name, e.to_string()))?;
            let back =
                detensorize(&t, levels, leaf, level, 1).map_err(|e| fail(name, e.to_string()))?;
            if back != img {
                return Err(fail(name, format!("tensorize level {level} not bit-exact")));
            }
            let deep = space_to_depth(&t).map_err(|e| fail(name, e.to_string()))?;
            let shallow = depth_to_space(&deep).map_err(|e| fail(name, e.to_string()))?;
            if shallow.data != t.data {
                return Err(fail(name, format!("depth shuffle level {level} not exact")));
            }
        }
        // CRC-sealed container round-trip shares the bit-exactness claim.
        let blob = Blob::new(vec![2, 3], BlobData::F32(vec![1.5, -0.25, 3.0, 0.1, -2.0, 0.0]))
            .map_err(|e| fail(name, e.to_string()))?;
        let bytes = blob_to_bytes(&blob);
        let back = blob_from_bytes(&bytes).map_err(|e| fail(name, e.to_string()))?;
        if blob_to_bytes(&back) != bytes || crc32(b"123456789") != 0xCBF4_3926 {
            return Err(fail(name, "container round-trip failed".into()));
        }
        Ok(())
    }

    fn switch_involution() -> Result<(), CliError> {
        let name = "switch involution";
        let m = 2u32;
        let side = 1usize << m;
        let blocks = side * side;
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let mut t = Tensor3::zeros(side, side, blocks * 3);
        for v in t.data.iter_mut() {
            *v = rng.random::<f64>() - 0.5;
        }
        let once = switch_permute(&t, m).map_err(|e| fail(name, e.to_string()))?;
        let twice = switch_permute(&once, m).map_err(|e| fail(name, e.to_string()))?;
        if twice.data != t.data {
            return Err(fail(name, "applying the switch twice is not the identity".into()));
        }
        if once.data == t.data {
            return Err(fail(name, "switch permutation is trivially the identity".into()));
        }
        Ok(())
    }

    fn green_oracle() -> Result<(), CliError> {
        let name = "free-space Green's function";
        let n = 40usize;
        let hertz = 5.0;
        let grid = GridSpec::with_standard_band(n, 2, n / 4, hertz)
            .map_err(|e| fail(name, e.to_string()))?;
        let field = SlownessField::new(grid, vec![0.0; n * n], "probe", 0)
            .map_err(|e| fail(name, e.to_string()))?;
        let solver = HelmholtzSolver::with_pml(&field, hertz, StencilOrder::Four, &PmlSpec::default())
            .map_err(physics_err)?;
        let m = solver.n_ext();
        let ic = m / 2;
        let src = solver.node_coord(ic, ic);
        let u = solver.solve_point_source(src).map_err(physics_err)?;
        let omega = solver.omega();
        let h = solver.h();
        let w = solver.width();
        let mut num = 0.0;
        let mut den = 0.0;
        // Absorbing-layer nodes carry a deliberately damped field; compare
        // only inside the imaging region.
        for iy in w..w + n {
            for ix in w..w + n {
                let p = solver.node_coord(ix, iy);
                let r = ((p[0] - src[0]).powi(2) + (p[1] - src[1]).powi(2)).sqrt();
                if r < 2.0 * h || r > 0.45 {
                    continue;
                }
                let exact = Complex64::new(0.0, 0.25) * hankel1_0(omega * r);
                let got = u[iy * m + ix];
                num += (got - exact).norm_sqr();
                den += exact.norm_sqr();
            }
        }
        let rel = (num / den).sqrt();
        if rel > 0.05 {
            return Err(fail(
                name,
                format!("rel l2 error {rel:.4} vs analytic solution exceeds 0.05"),
            ));
        }
        Ok(())
    }

    fn media_determinism() -> Result<(), CliError> {
        let name = "media determinism and bounds";
        let grid = GridSpec::with_standard_band(32, 3, 4, 4.0)
            .map_err(|e| fail(name, e.to_string()))?;
        for family in [Family::Squares, Family::Triangles, Family::Gaussians] {
            let a = media::generate(family, &grid, 99).map_err(physics_err)?;
            let b = media::generate(family, &grid, 99).map_err(physics_err)?;
            if a.eta != b.eta {
                return Err(fail(name, format!("{} is not deterministic", family.name())));
            }
            let c = media::generate(family, &grid, 100).map_err(physics_err)?;
            if a.eta == c.eta {
                return Err(fail(name, format!("{} ignores its seed", family.name())));
            }
            let max = a.eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = a.eta.iter().cloned().fold(f64::INFINITY, f64::min);
            if !(min.is_finite() && max.is_finite()) || max > 1.0 || min < -1.0 || max <= 0.0 {
                return Err(fail(
                    name,
                    format!("{} range [{min}, {max}] out of bounds", family.name()),
                ));
            }
        }
        Ok(())
    }

    fn forward_linearity() -> Result<(), CliError> {
        let name = "forward-map linearity";
        let n = 16usize;
        let grid = GridSpec::with_standard_band(n, 2, 4, 2.0)
            .map_err(|e| fail(name, e.to_string()))?;
        let geom = AcquisitionGeometry::aligned_with(&grid);
        // Zero perturbation scatters nothing, exactly.
        let zero = SlownessField::new(grid.clone(), vec![0.0; n * n], "zero", 0)
            .map_err(|e| fail(name, e.to_string()))?;
        let cube0 = forward_map(&zero, &geom, StencilOrder::Two, &PmlSpec::default())
            .map_err(physics_err)?;
        if cube0
            .slices
            .iter()
            .flatten()
            .any(|z| z.norm_sqr() != 0.0)
        {
            return Err(fail(name, "zero medium produced nonzero data".into()));
        }
        // In the weak regime F[2eta] is 2 F[eta] within a few percent.
        let base = media::generate(Family::Squares, &grid, 3).map_err(physics_err)?;
        let peak = base.eta.iter().cloned().fold(0.0, f64::max);
        let scale = 0.005 / peak;
        let mut small = base.clone();
        for v in small.eta.iter_mut() {
            *v *= scale;
        }
        let mut double = small.clone();
        for v in double.eta.iter_mut() {
            *v *= 2.0;
        }
        let f1 = forward_map(&small, &geom, StencilOrder::Two, &PmlSpec::default())
            .map_err(physics_err)?;
        let f2 = forward_map(&double, &geom, StencilOrder::Two, &PmlSpec::default())
            .map_err(physics_err)?;
        for fi in 0..f1.frequencies.len() {
            let doubled: Vec<Complex64> = f1.slice(fi).iter().map(|z| z * 2.0).collect();
            let rel = rel_l2(f2.slice(fi), &doubled);
            if rel > 0.03 {
                return Err(fail(
                    name,
                    format!("doubling defect {rel:.4} at {} Hz exceeds 0.03", f1.frequencies[fi].hertz),
                ));
            }
        }
        Ok(())
    }

    fn born_adjoint() -> Result<(), CliError> {
        let name = "linearized adjoint";
        let n = 16usize;
        let grid = GridSpec::with_standard_band(n, 2, 4, 2.0)
            .map_err(|e| fail(name, e.to_string()))?;
        let geom = AcquisitionGeometry::aligned_with(&grid);
        let op = BornOperator::new(&grid, &geom, 2.0);
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        for _ in 0..5 {
            let eta: Vec<Complex64> = (0..n * n)
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let lam: Vec<Complex64> = (0..geom.n_dir * geom.n_dir)
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let f_eta = op.apply(&eta);
            let fs_lam = op.adjoint(&lam);
            let lhs: Complex64 = f_eta.iter().zip(&lam).map(|(a, b)| a * b.conj()).sum();
            let rhs: Complex64 = eta.iter().zip(&fs_lam).map(|(a, b)| a * b.conj()).sum();
            let nf: f64 = f_eta.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let nl: f64 = lam.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let defect = (lhs - rhs).norm() / (nf * nl).max(1e-300);
            if defect > 1e-10 {
                return Err(fail(name, format!("dot-product defect {defect:.3e} exceeds 1e-10")));
            }
        }
        Ok(())
    }

    fn fbp_localization() -> Result<(), CliError> {
        let name = "classical localization";
        let n = 32usize;
        let grid = GridSpec::with_standard_band(n, 3, 4, 4.0)
            .map_err(|e| fail(name, e.to_string()))?;
        let geom = AcquisitionGeometry::aligned_with(&grid);
        let center = [20.0, 12.0];
        let mut eta = vec![0.0; n * n];
        add_gaussian_bump(&mut eta, n, center, 2.0, 0.2);
        let field = SlownessField::new(grid.clone(), eta, "probe", 0)
            .map_err(|e| fail(name, e.to_string()))?;
        let cube = forward_map(&field, &geom, StencilOrder::Two, &PmlSpec::default())
            .map_err(physics_err)?;
        let ops: Vec<BornOperator> = cube
            .frequencies
            .iter()
            .map(|f| BornOperator::new(&grid, &geom, f.hertz))
            .collect();
        let slices: Vec<&[Complex64]> = (0..cube.frequencies.len())
            .map(|fi| cube.slice(fi))
            .collect();
        let result = fbp_solve(&ops, &slices, &FbpOptions::default()).map_err(physics_err)?;
        if !result.converged {
            return Err(fail(name, "iterative solve did not converge".into()));
        }
        let (mut best, mut at) = (f64::NEG_INFINITY, (0usize, 0usize));
        for r in 0..n {
            for c in 0..n {
                if result.eta[r * n + c] > best {
                    best = result.eta[r * n + c];
                    at = (r, c);
                }
            }
        }
        let dist = ((at.0 as f64 - center[0]).powi(2) + (at.1 as f64 - center[1]).powi(2)).sqrt();
        if dist > 2.0 {
            return Err(fail(
                name,
                format!("argmax at ({}, {}) is {dist:.2} px from the scatterer", at.0, at.1),
            ));
        }
        Ok(())
    }

    /// Shared by `selftest` (few coordinates) and `gradcheck` (many).
    pub fn end_to_end_gradcheck(seed: u64, coords: usize) -> Result<GradCheckReport, CliError> {
        let cfg = NetworkConfig::new(2, 2, 2, Variant::Wide);
        let n = cfg.n();
        let net = WideBNet::new(cfg.clone())
            .map_err(|e| CliError::Config(format!("network configuration: {e}")))?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5EED);
        let frequencies = vec![
            Frequency { hertz: 1.0, level: 1 },
            Frequency { hertz: 2.0, level: 2 },
        ];
        let slices: Vec<Vec<Complex64>> = (0..frequencies.len())
            .map(|_| {
                (0..n * n)
                    .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                    .collect()
            })
            .collect();
        let cube = FarFieldCube::new(n, frequencies, slices, 2)
            .map_err(|e| CliError::Data(e.to_string()))?;
        let inputs = format_inputs::<f64>(&cube, cfg.levels, cfg.leaf)
            .map_err(|e| CliError::Data(e.to_string()))?;
        let mut params: Vec<f64> = init_params(&net.registry, seed);
        let cache = net.forward_train(&params, &inputs);
        let dout: Vec<f64> = cache.output.iter().map(|&v| 2.0 * v).collect();
        let mut grad = vec![0.0; params.len()];
        net.backward(&params, &inputs, &cache, &dout, &mut grad);
        let loss = |p: &[f64]| -> f64 {
            net.forward(p, &inputs).iter().map(|v| v * v).sum::<f64>()
        };
        Ok(central_diff_check(
            &mut params,
            &grad,
            loss,
            seed,
            coords,
            1e-5,
        ))
    }

    fn tiny_gradcheck() -> Result<(), CliError> {
        let name = "end-to-end gradient";
        let report = end_to_end_gradcheck(0, 60)?;
        if report.max_rel_err > 1e-5 {
            return Err(fail(
                name,
                format!(
                    "max rel err {:.3e} at coordinate {} exceeds 1e-5",
                    report.max_rel_err, report.worst_index
                ),
            ));
        }
        Ok(())
    }
}
