//! Benchmark harnesses: sub-wavelength collision sweeps, noise-degradation
//! curves, and the cross-family generalization matrix.

use std::path::Path;

use num_complex::Complex64;

use waveband_core::field::AcquisitionGeometry;
use waveband_core::grid::GridSpec;
use waveband_core::net::{format_inputs, WideBNet};
use waveband_physics::born::BornOperator;
use waveband_physics::fbp::{fbp_solve, normal_operator_norm, FbpOptions};
use waveband_physics::helmholtz::{forward_map, PmlSpec, StencilOrder};
use waveband_physics::media::{generate_collision, CollisionSample, CollisionShape};

use crate::checkpoint::Checkpoint;
use crate::config::CliError;
use crate::dataset::Dataset;
use crate::noise::{derive_seed, inject_noise_seeded};
use crate::pgm::emit_image;
use crate::pipeline::{evaluate, physics_err};
use crate::pool::parallel_map;
use crate::smooth::smooth_target;

// ---------------------------------------------------------------------------
// Peak detection
// ---------------------------------------------------------------------------

/// Strict 8-neighbour local maxima of a row-major image (border pixels
/// compare against their existing neighbours only).
pub fn local_maxima(img: &[f64], n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for r in 0..n {
        for c in 0..n {
            let v = img[r * n + c];
            let mut is_max = true;
            'scan: for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let rr = r as i64 + dr;
                    let cc = c as i64 + dc;
                    if rr < 0 || cc < 0 || rr >= n as i64 || cc >= n as i64 {
                        continue;
                    }
                    if img[rr as usize * n + cc as usize] >= v {
                        is_max = false;
                        break 'scan;
                    }
                }
            }
            if is_max {
                out.push((r, c));
            }
        }
    }
    out
}

/// Whether a significant local maximum lies within `radius` pixels of
/// `center` (fractional row/col). Predictions are smoothed with the target
/// mollifier first so oscillatory reconstructions and network outputs are
/// judged by the same rule; "significant" means at least 10% of the global
/// maximum (and the global maximum must be positive).
pub fn detects_scatterer(pred: &[f64], n: usize, center: [f64; 2], radius: f64) -> bool {
    let smoothed = smooth_target(pred, n);
    let gmax = smoothed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(gmax > 0.0) {
        return false;
    }
    let thresh = 0.1 * gmax;
    local_maxima(&smoothed, n).into_iter().any(|(r, c)| {
        let dr = r as f64 - center[0];
        let dc = c as f64 - center[1];
        smoothed[r * n + c] >= thresh && (dr * dr + dc * dc).sqrt() <= radius
    })
}

// ---------------------------------------------------------------------------
// Shared single-sample inference
// ---------------------------------------------------------------------------

/// Run one standardized cube through a checkpointed network.
pub fn infer_cube(
    ck: &Checkpoint,
    net: &WideBNet,
    cube: &waveband_core::field::FarFieldCube,
) -> Result<Vec<f64>, CliError> {
    let standardized = ck.stats.standardize(cube)?;
    let inputs = format_inputs::<f32>(&standardized, ck.net.levels, ck.net.leaf)
        .map_err(|e| CliError::Data(e.to_string()))?;
    Ok(net
        .forward(&ck.params, &inputs)
        .into_iter()
        .map(|v| v as f64)
        .collect())
}

fn build_net(ck: &Checkpoint) -> Result<WideBNet, CliError> {
    WideBNet::new(ck.net.clone())
        .map_err(|e| CliError::Config(format!("checkpoint network configuration: {e}")))
}

// ---------------------------------------------------------------------------
// Collision sweep
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct CollisionSpec {
    pub grid: GridSpec,
    pub shape: CollisionShape,
    /// Side lengths of the two scatterers in pixels.
    pub sides: (usize, usize),
    /// Bounding-box gaps to sweep, in pixels.
    pub deltas: Vec<usize>,
    pub sigma: f64,
    pub draws: usize,
    pub seed: u64,
    /// Detection radius around each true centre, in pixels.
    pub radius: f64,
}

impl CollisionSpec {
    pub fn desk(grid: GridSpec, seed: u64) -> Self {
        CollisionSpec {
            grid,
            shape: CollisionShape::Square,
            sides: (3, 5),
            deltas: vec![2, 4, 8, 16],
            sigma: 1.0,
            draws: 20,
            seed,
            radius: 3.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CollisionRow {
    pub label: String,
    pub delta: usize,
    pub draws: usize,
    /// Draws in which both scatterers were detected.
    pub full_detections: usize,
    /// Individual scatterer detections (2 per draw possible).
    pub scatterer_hits: usize,
}

impl CollisionRow {
    pub fn rate(&self) -> f64 {
        self.full_detections as f64 / self.draws as f64
    }
}

#[derive(Clone, Debug)]
pub struct CollisionReport {
    pub rows: Vec<CollisionRow>,
}

impl CollisionReport {
    pub fn rate_of(&self, label: &str, delta: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.label == label && r.delta == delta)
            .map(|r| r.rate())
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("model,delta_px,draws,full_detections,scatterer_hits,rate\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.label,
                r.delta,
                r.draws,
                r.full_detections,
                r.scatterer_hits,
                r.rate()
            ));
        }
        s
    }
}

/// Sweep bounding-box gaps: for each gap and draw, place two scatterers,
/// simulate order-4 data, add noise, and ask each model (plus the
/// linearized baseline) whether it resolves both scatterers.
pub fn bench_collision(
    models: &[(&str, &Checkpoint)],
    spec: &CollisionSpec,
    with_baseline: bool,
    image_dir: Option<&Path>,
) -> Result<CollisionReport, CliError> {
    let geom = AcquisitionGeometry::aligned_with(&spec.grid);
    let pml = PmlSpec::default();
    let nets: Vec<WideBNet> = models
        .iter()
        .map(|(_, ck)| build_net(ck))
        .collect::<Result<_, _>>()?;
    let (ops, rho) = if with_baseline {
        let ops: Vec<BornOperator> = spec
            .grid
            .frequencies
            .iter()
            .map(|f| BornOperator::new(&spec.grid, &geom, f.hertz))
            .collect();
        let rho = normal_operator_norm(&ops, 30, 0x0F_B0);
        (ops, rho)
    } else {
        (Vec::new(), 0.0)
    };
    let n = spec.grid.n;
    let mut rows: Vec<CollisionRow> = Vec::new();

    for &delta in &spec.deltas {
        // Simulate all draws for this gap in parallel.
        let draw_ids: Vec<usize> = (0..spec.draws).collect();
        let cases = parallel_map(&draw_ids, |&d| -> Result<_, CliError> {
            let sample: CollisionSample = generate_collision(
                &spec.grid,
                spec.shape,
                spec.sides,
                delta,
                derive_seed(spec.seed, delta as u64, d as u64),
            )
            .map_err(physics_err)?;
            let cube = forward_map(&sample.field, &geom, StencilOrder::Four, &pml)
                .map_err(physics_err)?;
            let noisy = inject_noise_seeded(
                &cube,
                spec.sigma,
                derive_seed(spec.seed ^ 0xC011, delta as u64, d as u64),
            );
            Ok((sample.centers, noisy))
        });
        let mut cases_ok = Vec::with_capacity(spec.draws);
        for c in cases {
            cases_ok.push(c?);
        }

        for (mi, (label, ck)) in models.iter().enumerate() {
            let mut full = 0;
            let mut hits = 0;
            for (d, (centers, noisy)) in cases_ok.iter().enumerate() {
                let pred = infer_cube(ck, &nets[mi], noisy)?;
                let got: Vec<bool> = centers
                    .iter()
                    .map(|&c| detects_scatterer(&pred, n, c, spec.radius))
                    .collect();
                hits += got.iter().filter(|&&b| b).count();
                if got.iter().all(|&b| b) {
                    full += 1;
                }
                if let Some(dir) = image_dir {
                    if d == 0 {
                        emit_image(
                            &dir.join(format!("collision_{label}_gap{delta:02}")),
                            &pred,
                            n,
                            n,
                            None,
                        )?;
                    }
                }
            }
            rows.push(CollisionRow {
                label: label.to_string(),
                delta,
                draws: spec.draws,
                full_detections: full,
                scatterer_hits: hits,
            });
        }

        if with_baseline {
            let opts = FbpOptions {
                epsilon: if spec.sigma > 0.0 { 1.0 } else { 1e-3 },
                rho: Some(rho),
                ..FbpOptions::default()
            };
            let mut full = 0;
            let mut hits = 0;
            for (d, (centers, noisy)) in cases_ok.iter().enumerate() {
                let slices: Vec<&[Complex64]> =
                    noisy.slices.iter().map(|s| s.as_slice()).collect();
                let pred = fbp_solve(&ops, &slices, &opts).map_err(physics_err)?.eta;
                let got: Vec<bool> = centers
                    .iter()
                    .map(|&c| detects_scatterer(&pred, n, c, spec.radius))
                    .collect();
                hits += got.iter().filter(|&&b| b).count();
                if got.iter().all(|&b| b) {
                    full += 1;
                }
                if let Some(dir) = image_dir {
                    if d == 0 {
                        emit_image(
                            &dir.join(format!("collision_baseline_gap{delta:02}")),
                            &pred,
                            n,
                            n,
                            None,
                        )?;
                    }
                }
            }
            rows.push(CollisionRow {
                label: "baseline".to_string(),
                delta,
                draws: spec.draws,
                full_detections: full,
                scatterer_hits: hits,
            });
        }
    }
    Ok(CollisionReport { rows })
}

// ---------------------------------------------------------------------------
// Noise sweep
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct NoiseRow {
    pub sigma: f64,
    pub mean_mse: f64,
    pub mean_rel: f64,
}

#[derive(Clone, Debug)]
pub struct NoiseReport {
    pub rows: Vec<NoiseRow>,
}

impl NoiseReport {
    pub fn csv(&self) -> String {
        let mut s = String::from("sigma,mean_mse,mean_rel_l2\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{}\n", r.sigma, r.mean_mse, r.mean_rel));
        }
        s
    }

    pub fn mse_at(&self, sigma: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.sigma == sigma)
            .map(|r| r.mean_mse)
    }
}

/// Evaluate one checkpoint on the same test split at several noise levels.
pub fn bench_noise(
    ck: &Checkpoint,
    ds: &Dataset,
    sigmas: &[f64],
    eval_seed: u64,
) -> Result<NoiseReport, CliError> {
    let mut rows = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let (report, _) = evaluate(ck, ds, sigma, eval_seed)?;
        rows.push(NoiseRow {
            sigma,
            mean_mse: report.mean_mse,
            mean_rel: report.mean_rel,
        });
    }
    Ok(NoiseReport { rows })
}

// ---------------------------------------------------------------------------
// Generalization matrix
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct MatrixReport {
    pub model_labels: Vec<String>,
    pub dataset_labels: Vec<String>,
    /// `log10` of mean per-pixel MSE, indexed `[model][dataset]`.
    pub log10_mse: Vec<Vec<f64>>,
}

impl MatrixReport {
    pub fn csv(&self) -> String {
        let mut s = String::from("model");
        for d in &self.dataset_labels {
            s.push_str(&format!(",{d}"));
        }
        s.push('\n');
        for (i, m) in self.model_labels.iter().enumerate() {
            s.push_str(m);
            for v in &self.log10_mse[i] {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }

    /// Emit the matrix as a grayscale heat map (one pixel per cell).
    pub fn emit_heatmap(&self, base: &Path) -> Result<(), CliError> {
        let flat: Vec<f64> = self.log10_mse.iter().flatten().cloned().collect();
        emit_image(
            base,
            &flat,
            self.dataset_labels.len(),
            self.model_labels.len(),
            None,
        )
    }
}

/// Evaluate every model on every dataset's test split.
pub fn generalization_matrix(
    models: &[(&str, &Checkpoint)],
    datasets: &[(&str, &Dataset)],
    sigma: f64,
    eval_seed: u64,
) -> Result<MatrixReport, CliError> {
    let mut log10_mse = Vec::with_capacity(models.len());
    for (_, ck) in models {
        let mut row = Vec::with_capacity(datasets.len());
        for (_, ds) in datasets {
            let (report, _) = evaluate(ck, ds, sigma, eval_seed)?;
            row.push(report.mean_mse.log10());
        }
        log10_mse.push(row);
    }
    Ok(MatrixReport {
        model_labels: models.iter().map(|(l, _)| l.to_string()).collect(),
        dataset_labels: datasets.iter().map(|(l, _)| l.to_string()).collect(),
        log10_mse,
    })
}

/// Verify a metric curve is non-decreasing up to a per-step slack fraction.
pub fn non_decreasing_within(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] >= w[0] * (1.0 - slack))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_maxima_finds_isolated_peaks() {
        let n = 8;
        let mut img = vec![0.0; n * n];
        img[2 * n + 2] = 1.0;
        img[5 * n + 6] = 0.8;
        let peaks = local_maxima(&img, n);
        assert!(peaks.contains(&(2, 2)));
        assert!(peaks.contains(&(5, 6)));
        assert_eq!(peaks.len(), 2);
    }

    #[test]
    fn detection_requires_a_nearby_significant_peak() {
        let n = 16;
        let mut img = vec![0.0; n * n];
        img[5 * n + 5] = 1.0;
        assert!(detects_scatterer(&img, n, [5.0, 5.0], 3.0));
        assert!(detects_scatterer(&img, n, [7.0, 6.0], 3.0), "within radius");
        assert!(
            !detects_scatterer(&img, n, [12.0, 12.0], 3.0),
            "far from the peak"
        );
        // A flat image detects nothing.
        assert!(!detects_scatterer(&vec![0.0; n * n], n, [5.0, 5.0], 3.0));
        // A peak below 10% of the maximum does not count.
        let mut two = img.clone();
        two[12 * n + 12] = 0.01;
        assert!(!detects_scatterer(&two, n, [12.0, 12.0], 1.5));
    }

    #[test]
    fn merged_bumps_duck_the_second_detection() {
        // One wide bump centred between two putative scatterers 8 px apart:
        // the single maximum can serve only the nearer centre.
        let n = 24;
        let mut img = vec![0.0; n * n];
        img[12 * n + 12] = 1.0;
        let img = smooth_target(&img, n);
        assert!(detects_scatterer(&img, n, [12.0, 12.0], 3.0));
        assert!(!detects_scatterer(&img, n, [12.0, 4.0], 3.0));
    }

    #[test]
    fn monotonicity_helper_honours_slack() {
        assert!(non_decreasing_within(&[1.0, 1.5, 2.0], 0.1));
        assert!(non_decreasing_within(&[1.0, 0.95, 2.0], 0.1), "5% dip ok");
        assert!(!non_decreasing_within(&[1.0, 0.5, 2.0], 0.1), "50% dip");
    }

    #[test]
    fn matrix_report_layout() {
        let report = MatrixReport {
            model_labels: vec!["a".into(), "b".into()],
            dataset_labels: vec!["x".into(), "y".into(), "z".into()],
            log10_mse: vec![vec![-1.0, -0.5, 0.0], vec![-2.0, -1.5, -1.0]],
        };
        let csv = report.csv();
        assert!(csv.starts_with("model,x,y,z\n"));
        assert_eq!(csv.lines().count(), 3);
        let dir = tempfile::tempdir().unwrap();
        report.emit_heatmap(&dir.path().join("matrix")).unwrap();
        let (px, cols, rows) =
            crate::pgm::read_pgm(&dir.path().join("matrix.pgm")).unwrap();
        assert_eq!((cols, rows), (3, 2));
        assert_eq!(px.len(), 6);
    }
}
