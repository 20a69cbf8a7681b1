//! Seeded generators for the scattering-medium families used to train and
//! probe the inversion pipelines: piecewise-constant shapes (squares,
//! triangles), point-like Gaussian bumps, a jittered ellipse phantom, band-
//! limited Gaussian random fields, star-shaped blobs, and two-scatterer
//! collision configurations with a controlled bounding-box separation.
//!
//! All generators are deterministic in `(family, grid, seed)`. Media whose
//! random draw stacks perturbations above `eta = 1` are resampled from a
//! derived seed a bounded number of times, so callers always get
//! `max_eta <= 1` or an error.

use crate::PhysicsError;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rustfft::FftPlanner;
use waveband_core::field::SlownessField;
use waveband_core::grid::GridSpec;

/// Height each geometric scatterer adds to the perturbation.
pub const GEOMETRIC_AMPLITUDE: f64 = 0.2;
/// Scatterer centres are drawn from a disk of this radius (domain units).
pub const PLACEMENT_RADIUS: f64 = 0.35;
/// Standard deviation of the Gaussian random-field family.
pub const GRF_STD: f64 = 0.1;
/// Hard cap on the perturbation; draws above it are resampled.
pub const MAX_ETA: f64 = 1.0;

const MAX_RESAMPLE: u64 = 16;
const MAX_PLACEMENT_TRIES: usize = 100;

/// The seeded medium families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    /// 2-4 axis-aligned squares, sides from {3, 5, 10} px, +0.2 each.
    Squares,
    /// 2-4 axis-aligned right triangles, legs from {3, 5, 10} px.
    Triangles,
    /// Exactly ten squares of side 10 px.
    TenSquares,
    /// 2-4 isotropic Gaussian bumps, std 2 px, peak exactly 0.2.
    Gaussians,
    /// Ten-ellipse head phantom; `jitter` scales the per-seed geometry
    /// randomization (0 reproduces the classical phantom).
    SheppLogan { jitter: f64 },
    /// Stationary Gaussian random field with squared-exponential
    /// covariance of characteristic length `corr_len` (domain units).
    Grf { corr_len: f64 },
    /// Single star-shaped region with wavelength-scale boundary features.
    Blob,
}

impl Family {
    /// Stable name used in manifests and on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            Family::Squares => "squares",
            Family::Triangles => "triangles",
            Family::TenSquares => "ten-squares",
            Family::Gaussians => "gaussians",
            Family::SheppLogan { jitter } if *jitter == 0.0 => "shepp-logan-classic",
            Family::SheppLogan { .. } => "shepp-logan",
            Family::Grf { corr_len } if *corr_len < 0.02 => "grf-fine",
            Family::Grf { .. } => "grf-coarse",
            Family::Blob => "blob",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        match s {
            "squares" => Some(Family::Squares),
            "triangles" => Some(Family::Triangles),
            "ten-squares" => Some(Family::TenSquares),
            "gaussians" => Some(Family::Gaussians),
            "shepp-logan" => Some(Family::SheppLogan { jitter: 1.0 }),
            "shepp-logan-classic" => Some(Family::SheppLogan { jitter: 0.0 }),
            "grf-fine" => Some(Family::Grf { corr_len: 0.01 }),
            "grf-coarse" => Some(Family::Grf { corr_len: 0.04 }),
            "blob" => Some(Family::Blob),
            _ => None,
        }
    }

    /// Every nameable family, for sweeps over the whole catalogue.
    pub fn catalogue() -> Vec<Family> {
        [
            "squares",
            "triangles",
            "ten-squares",
            "gaussians",
            "shepp-logan",
            "grf-coarse",
            "blob",
        ]
        .iter()
        .map(|s| Family::parse(s).unwrap())
        .collect()
    }
}

/// splitmix64 step, used to derive independent resample seeds.
fn derived_seed(seed: u64, attempt: u64) -> u64 {
    let mut z = seed
        .wrapping_add(attempt.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Generate one medium. Deterministic in all arguments.
pub fn generate(family: Family, grid: &GridSpec, seed: u64) -> Result<SlownessField, PhysicsError> {
    for attempt in 0..MAX_RESAMPLE {
        let mut rng = ChaCha20Rng::seed_from_u64(derived_seed(seed, attempt));
        let eta = draw_family(family, grid, &mut rng)?;
        let max = eta.iter().cloned().fold(f64::MIN, f64::max);
        if max <= MAX_ETA {
            return SlownessField::new(grid.clone(), eta, family.name(), seed)
                .map_err(|e| PhysicsError::Config(e.to_string()));
        }
    }
    Err(PhysicsError::Config(format!(
        "family {} kept exceeding eta = {MAX_ETA} after {MAX_RESAMPLE} resamples (seed {seed})",
        family.name()
    )))
}

fn draw_family(family: Family, grid: &GridSpec, rng: &mut ChaCha20Rng) -> Result<Vec<f64>, PhysicsError> {
    let n = grid.n;
    match family {
        Family::Squares => Ok(draw_shapes(n, rng, false, None)),
        Family::Triangles => Ok(draw_shapes(n, rng, true, None)),
        Family::TenSquares => Ok(draw_shapes(n, rng, false, Some((10, 10)))),
        Family::Gaussians => Ok(draw_gaussians(grid, rng)),
        Family::SheppLogan { jitter } => Ok(draw_phantom(grid, rng, jitter)),
        Family::Grf { corr_len } => {
            if corr_len <= 0.0 {
                return Err(PhysicsError::Config(format!(
                    "correlation length must be positive, got {corr_len}"
                )));
            }
            Ok(draw_grf(grid, rng, corr_len))
        }
        Family::Blob => Ok(draw_blob(grid, rng)),
    }
}

/// Draw a centre inside the placement disk, in pixel units.
fn disk_center_px(n: usize, rng: &mut ChaCha20Rng) -> [f64; 2] {
    loop {
        let x = rng.random_range(-PLACEMENT_RADIUS..PLACEMENT_RADIUS);
        let y = rng.random_range(-PLACEMENT_RADIUS..PLACEMENT_RADIUS);
        if x * x + y * y <= PLACEMENT_RADIUS * PLACEMENT_RADIUS {
            // Domain [-0.5, 0.5] maps to pixel coordinates [0, n].
            return [(y + 0.5) * n as f64, (x + 0.5) * n as f64];
        }
    }
}

/// Squares or right triangles; `fixed` pins (count, side) as for the
/// ten-squares family.
fn draw_shapes(
    n: usize,
    rng: &mut ChaCha20Rng,
    triangles: bool,
    fixed: Option<(usize, usize)>,
) -> Vec<f64> {
    let mut eta = vec![0.0; n * n];
    let count = match fixed {
        Some((count, _)) => count,
        None => rng.random_range(2..=4usize),
    };
    for _ in 0..count {
        let side = match fixed {
            Some((_, side)) => side,
            None => [3usize, 5, 10][rng.random_range(0..3usize)],
        };
        // Reject placements whose bounding box leaves the grid.
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_TRIES {
            let [cr, cc] = disk_center_px(n, rng);
            let r0 = (cr - side as f64 / 2.0).round() as isize;
            let c0 = (cc - side as f64 / 2.0).round() as isize;
            if r0 < 0 || c0 < 0 || r0 + side as isize > n as isize || c0 + side as isize > n as isize
            {
                continue;
            }
            let (r0, c0) = (r0 as usize, c0 as usize);
            let orient = if triangles {
                rng.random_range(0..4u8)
            } else {
                0
            };
            for a in 0..side {
                for b in 0..side {
                    let keep = if !triangles {
                        true
                    } else {
                        match orient {
                            0 => a + b < side,
                            1 => a + b >= side - 1,
                            2 => a <= b,
                            _ => a >= b,
                        }
                    };
                    if keep {
                        eta[(r0 + a) * n + c0 + b] += GEOMETRIC_AMPLITUDE;
                    }
                }
            }
            placed = true;
            break;
        }
        // An unplaceable scatterer (possible only on tiny grids) is simply
        // dropped; the resample loop upstream keeps statistics healthy.
        let _ = placed;
    }
    eta
}

/// Additive isotropic Gaussian bump with an exact peak value at the pixel
/// nearest `center_px` (pixel-index coordinates), truncated at 4 sigma.
pub fn add_gaussian_bump(eta: &mut [f64], n: usize, center_px: [f64; 2], sigma_px: f64, peak: f64) {
    let cr = center_px[0].round().clamp(0.0, (n - 1) as f64) as usize;
    let cc = center_px[1].round().clamp(0.0, (n - 1) as f64) as usize;
    let radius = (4.0 * sigma_px).ceil() as isize;
    for dr in -radius..=radius {
        for dc in -radius..=radius {
            let r = cr as isize + dr;
            let c = cc as isize + dc;
            if r < 0 || c < 0 || r >= n as isize || c >= n as isize {
                continue;
            }
            let d2 = (dr * dr + dc * dc) as f64;
            if d2 <= (radius * radius) as f64 {
                eta[r as usize * n + c as usize] +=
                    peak * (-d2 / (2.0 * sigma_px * sigma_px)).exp();
            }
        }
    }
}

fn draw_gaussians(grid: &GridSpec, rng: &mut ChaCha20Rng) -> Vec<f64> {
    let n = grid.n;
    let mut eta = vec![0.0; n * n];
    let count = rng.random_range(2..=4usize);
    for _ in 0..count {
        let c = disk_center_px(n, rng);
        add_gaussian_bump(&mut eta, n, c, 2.0, GEOMETRIC_AMPLITUDE);
    }
    eta
}

/// The classical ten-ellipse head phantom: (intensity, semi-axis a,
/// semi-axis b, centre x, centre y, rotation degrees) on the [-1, 1]^2
/// square. Values sum where ellipses overlap; the perturbation is half the
/// summed intensity so the skull ring tops out at 1.
const PHANTOM: [(f64, f64, f64, f64, f64, f64); 10] = [
    (2.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.98, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.02, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.02, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.01, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.01, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.01, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.01, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.01, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.01, 0.023, 0.046, 0.06, -0.605, 0.0),
];

fn draw_phantom(grid: &GridSpec, rng: &mut ChaCha20Rng, jitter: f64) -> Vec<f64> {
    let n = grid.n;
    // Per-ellipse jitter: centres +-0.05 (phantom units), axes and
    // intensity +-10% multiplicative, angle +-10 degrees; `jitter` scales
    // all ranges. Draw order is fixed so seeds stay comparable.
    let mut ellipses = Vec::with_capacity(PHANTOM.len());
    for &(a, sa, sb, x0, y0, deg) in &PHANTOM {
        let u = |rng: &mut ChaCha20Rng| rng.random_range(-1.0..1.0);
        let (dx, dy) = (0.05 * jitter * u(rng), 0.05 * jitter * u(rng));
        let (fa, fb) = (
            1.0 + 0.1 * jitter * u(rng),
            1.0 + 0.1 * jitter * u(rng),
        );
        let dth = 10.0 * jitter * u(rng);
        let fi = 1.0 + 0.1 * jitter * u(rng);
        ellipses.push((a * fi, sa * fa, sb * fb, x0 + dx, y0 + dy, deg + dth));
    }
    let mut eta = vec![0.0; n * n];
    for r in 0..n {
        // The phantom table lives on [-1, 1]^2 with y up; our grid is
        // [-0.5, 0.5] with rows increasing along y.
        let y = 2.0 * grid.coord(r);
        for c in 0..n {
            let x = 2.0 * grid.coord(c);
            let mut v = 0.0;
            for &(a, sa, sb, x0, y0, deg) in &ellipses {
                let th = deg.to_radians();
                let (dx, dy) = (x - x0, y - y0);
                let xr = dx * th.cos() + dy * th.sin();
                let yr = -dx * th.sin() + dy * th.cos();
                if (xr / sa) * (xr / sa) + (yr / sb) * (yr / sb) <= 1.0 {
                    v += a;
                }
            }
            eta[r * n + c] = 0.5 * v;
        }
    }
    eta
}

fn fft2(data: &mut [Complex64], n: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    // Rows.
    for row in data.chunks_mut(n) {
        fft.process(row);
    }
    // Columns via transpose, row transform, transpose back.
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
    for row in data.chunks_mut(n) {
        fft.process(row);
    }
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
    if inverse {
        let scale = 1.0 / (n * n) as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }
}

/// Stationary Gaussian random field on the pixel torus: eigenvalues of the
/// wrapped squared-exponential covariance via FFT, white noise coloured in
/// the Fourier domain, then rescaled to the configured standard deviation.
fn draw_grf(grid: &GridSpec, rng: &mut ChaCha20Rng, corr_len: f64) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let n = grid.n;
    let h = grid.h();
    let ell_px = corr_len / h;

    // Wrapped covariance kernel (distance on the torus).
    let mut cov: Vec<Complex64> = Vec::with_capacity(n * n);
    for r in 0..n {
        let dr = (r.min(n - r)) as f64;
        for c in 0..n {
            let dc = (c.min(n - c)) as f64;
            let d2 = dr * dr + dc * dc;
            cov.push(Complex64::new(
                (-d2 / (2.0 * ell_px * ell_px)).exp(),
                0.0,
            ));
        }
    }
    fft2(&mut cov, n, false);

    let mut field: Vec<Complex64> = (0..n * n)
        .map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            Complex64::new(g, 0.0)
        })
        .collect();
    fft2(&mut field, n, false);
    for (f, lam) in field.iter_mut().zip(&cov) {
        // Tiny negative eigenvalues from wrapping truncation are clamped.
        *f *= lam.re.max(0.0).sqrt();
    }
    fft2(&mut field, n, true);

    let raw: Vec<f64> = field.iter().map(|z| z.re).collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let var = raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / raw.len() as f64;
    if var == 0.0 {
        return vec![0.0; n * n];
    }
    let scale = GRF_STD / var.sqrt();
    raw.iter().map(|v| (v - mean) * scale).collect()
}

/// Empirical correlation length (domain units) of a zero-mean field: the
/// normalized axial autocovariance is fit to exp(-d^2 / (2 l^2)) over lags
/// with correlation above 0.05.
pub fn estimate_corr_len(eta: &[f64], n: usize, h: f64) -> f64 {
    assert_eq!(eta.len(), n * n);
    let mean = eta.iter().sum::<f64>() / eta.len() as f64;
    let z: Vec<f64> = eta.iter().map(|v| v - mean).collect();
    let c0 = z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64;
    if c0 == 0.0 {
        return 0.0;
    }
    let mut weights = 0.0;
    let mut total = 0.0;
    for lag in 1..n / 2 {
        // Average the (periodic) autocovariance over both axes.
        let mut acc = 0.0;
        for r in 0..n {
            for c in 0..n {
                let right = z[r * n + (c + lag) % n];
                let down = z[((r + lag) % n) * n + c];
                acc += z[r * n + c] * (right + down) / 2.0;
            }
        }
        let rho = acc / (n * n) as f64 / c0;
        if rho <= 0.05 {
            break;
        }
        // rho = exp(-d^2/(2 l^2))  =>  l = d / sqrt(-2 ln rho).
        let l = lag as f64 / (-2.0 * rho.ln()).sqrt();
        let w = rho; // trust large-correlation lags more
        total += w * l;
        weights += w;
    }
    if weights == 0.0 {
        // Correlation fell below threshold at lag 1: sub-pixel length.
        return 0.5 * h;
    }
    total / weights * h
}

/// Star-shaped region r(theta) = r0 (1 + sum_k a_k cos(k theta + phi_k)),
/// k = 1..5, filled at the geometric amplitude.
fn draw_blob(grid: &GridSpec, rng: &mut ChaCha20Rng) -> Vec<f64> {
    let n = grid.n;
    let r0 = rng.random_range(0.1..0.2);
    let mut coeffs = [(0.0, 0.0); 5];
    for kc in coeffs.iter_mut() {
        *kc = (
            rng.random_range(-0.15..0.15),
            rng.random_range(0.0..std::f64::consts::TAU),
        );
    }
    let radius_at = |theta: f64| -> f64 {
        let mut s = 1.0;
        for (k, (a, phi)) in coeffs.iter().enumerate() {
            s += a * ((k as f64 + 1.0) * theta + phi).cos();
        }
        r0 * s
    };
    let r_max = r0 * (1.0 + coeffs.iter().map(|(a, _)| a.abs()).sum::<f64>());
    // Centre such that the whole blob stays well inside the domain.
    let mut center = [0.0, 0.0];
    for _ in 0..MAX_PLACEMENT_TRIES {
        let x = rng.random_range(-PLACEMENT_RADIUS..PLACEMENT_RADIUS);
        let y = rng.random_range(-PLACEMENT_RADIUS..PLACEMENT_RADIUS);
        if x * x + y * y <= PLACEMENT_RADIUS * PLACEMENT_RADIUS
            && (x * x + y * y).sqrt() + r_max <= 0.45
        {
            center = [x, y];
            break;
        }
    }
    let mut eta = vec![0.0; n * n];
    for r in 0..n {
        let y = grid.coord(r) - center[1];
        for c in 0..n {
            let x = grid.coord(c) - center[0];
            let rad = (x * x + y * y).sqrt();
            let theta = y.atan2(x);
            if rad <= radius_at(theta) {
                eta[r * n + c] = GEOMETRIC_AMPLITUDE;
            }
        }
    }
    eta
}

/// One collision configuration: two scatterers with an exact bounding-box
/// separation along one axis and overlapping extents along the other, so
/// the stated gap is the true separation.
#[derive(Clone, Debug)]
pub struct CollisionSample {
    pub field: SlownessField,
    /// Scatterer bounding-box centres in fractional pixel-index
    /// coordinates (row, col), small scatterer first.
    pub centers: [[f64; 2]; 2],
    pub gap_px: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CollisionShape {
    Square,
    Triangle,
}

/// Generate a two-scatterer medium with bounding boxes exactly `gap_px`
/// pixels apart. `sides` gives the two pixel side lengths.
pub fn generate_collision(
    grid: &GridSpec,
    shape: CollisionShape,
    sides: (usize, usize),
    gap_px: usize,
    seed: u64,
) -> Result<CollisionSample, PhysicsError> {
    let n = grid.n;
    let (s1, s2) = sides;
    let margin = 1usize;
    let span = s1 + gap_px + s2;
    if span + 2 * margin > n {
        return Err(PhysicsError::Config(format!(
            "collision span {span} px does not fit an n = {n} grid"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    // Axis 0: the gap runs along rows; axis 1: along columns.
    let axis = rng.random_range(0..2u8);
    let small_first = rng.random::<bool>();

    let a0 = rng.random_range(margin..=n - margin - span);
    let (first_len, second_len) = if small_first { (s1, s2) } else { (s2, s1) };
    let first_a = a0;
    let second_a = a0 + first_len + gap_px;

    // Perpendicular placement with guaranteed interval overlap.
    let p1 = rng.random_range(margin..=n - margin - first_len);
    let lo = p1.saturating_sub(second_len - 1).max(margin);
    let hi = (p1 + first_len - 1).min(n - margin - second_len);
    let p2 = if lo >= hi { lo } else { rng.random_range(lo..=hi) };

    let mut eta = vec![0.0; n * n];
    let mut stamp = |a: usize, p: usize, side: usize, orient: u8| {
        for da in 0..side {
            for dp in 0..side {
                let keep = match shape {
                    CollisionShape::Square => true,
                    CollisionShape::Triangle => match orient {
                        0 => da + dp < side,
                        1 => da + dp >= side - 1,
                        2 => da <= dp,
                        _ => da >= dp,
                    },
                };
                if keep {
                    let (r, c) = if axis == 0 { (a + da, p + dp) } else { (p + dp, a + da) };
                    eta[r * n + c] += GEOMETRIC_AMPLITUDE;
                }
            }
        }
    };
    let orient1 = rng.random_range(0..4u8);
    let orient2 = rng.random_range(0..4u8);
    stamp(first_a, p1, first_len, orient1);
    stamp(second_a, p2, second_len, orient2);

    let center_of = |a: usize, p: usize, side: usize| -> [f64; 2] {
        let ca = a as f64 + (side as f64 - 1.0) / 2.0;
        let cp = p as f64 + (side as f64 - 1.0) / 2.0;
        if axis == 0 {
            [ca, cp]
        } else {
            [cp, ca]
        }
    };
    let c_first = center_of(first_a, p1, first_len);
    let c_second = center_of(second_a, p2, second_len);
    let centers = if small_first {
        [c_first, c_second]
    } else {
        [c_second, c_first]
    };

    let field = SlownessField::new(grid.clone(), eta, "collision", seed)
        .map_err(|e| PhysicsError::Config(e.to_string()))?;
    Ok(CollisionSample {
        field,
        centers,
        gap_px,
    })
}
