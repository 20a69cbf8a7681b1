//! Single-scattering (first Born) approximation of the far-field map.
//!
//! Linearizing the scattered field around the homogeneous background and
//! evaluating the outgoing Green's function at a receiver distance `R` large
//! against the wavelength turns the forward map into a linear operator on
//! the perturbation image:
//!
//! ```text
//! d[k, j] = pref * sum_y exp(i w s_k . y) eta(y) exp(-i w r_j . y) h^2,
//! pref    = w^2 (i/4) sqrt(2 / (pi w R)) exp(i (w R - pi/4)),
//! ```
//!
//! with `s_k` the incident directions and `r_j` the receiver directions.
//! The operator factorizes over sources and receivers, so both the forward
//! and the adjoint application cost `O(n_dir * n^2)` instead of
//! `O(n_dir^2 * n^2)`.

use num_complex::Complex64;
use waveband_core::field::AcquisitionGeometry;
use waveband_core::grid::GridSpec;

/// Linearized far-field operator for one frequency on a fixed grid.
pub struct BornOperator {
    pub n: usize,
    pub n_dir: usize,
    pub hertz: f64,
    /// `exp(i w s_k . y) * h^2 * pref` for each direction k and pixel y
    /// (prefactor folded into the source side).
    source_phases: Vec<Complex64>,
    /// `exp(-i w r_j . y)` for each direction j and pixel y.
    receiver_phases: Vec<Complex64>,
}

impl BornOperator {
    pub fn new(grid: &GridSpec, geom: &AcquisitionGeometry, hertz: f64) -> Self {
        let n = grid.n;
        let h = grid.h();
        let omega = 2.0 * std::f64::consts::PI * hertz;
        let radius = geom.radius;

        // Outgoing Green's function at distance R in the far zone:
        // (i/4) H0(wR) ~ (i/4) sqrt(2/(pi w R)) exp(i (wR - pi/4)).
        let amp = 0.25 * (2.0 / (std::f64::consts::PI * omega * radius)).sqrt();
        let phase = omega * radius - std::f64::consts::FRAC_PI_4 + std::f64::consts::FRAC_PI_2;
        let pref = omega * omega * amp * Complex64::new(phase.cos(), phase.sin());
        let cell = pref * h * h;

        let mut source_phases = vec![Complex64::ZERO; geom.n_dir * n * n];
        let mut receiver_phases = vec![Complex64::ZERO; geom.n_dir * n * n];
        for k in 0..geom.n_dir {
            let dir = geom.direction(k);
            for r in 0..n {
                let y = grid.coord(r);
                for c in 0..n {
                    let x = grid.coord(c);
                    let dot = omega * (dir[0] * x + dir[1] * y);
                    let e = Complex64::new(dot.cos(), dot.sin());
                    source_phases[k * n * n + r * n + c] = cell * e;
                    receiver_phases[k * n * n + r * n + c] = e.conj();
                }
            }
        }
        BornOperator {
            n,
            n_dir: geom.n_dir,
            hertz,
            source_phases,
            receiver_phases,
        }
    }

    /// Forward: image (n*n complex) -> far-field slice (n_dir*n_dir).
    pub fn apply(&self, eta: &[Complex64]) -> Vec<Complex64> {
        let np = self.n * self.n;
        assert_eq!(eta.len(), np);
        let nd = self.n_dir;
        // t[k][y] = s_k(y) * eta(y), then d[k][j] = sum_y t[k][y] r_j(y):
        // contract the pixel index once per (k, j) pair but reuse the
        // source-weighted image across receivers.
        let mut out = vec![Complex64::ZERO; nd * nd];
        let mut weighted = vec![Complex64::ZERO; np];
        for k in 0..nd {
            let src = &self.source_phases[k * np..(k + 1) * np];
            for ((w, s), e) in weighted.iter_mut().zip(src).zip(eta) {
                *w = s * e;
            }
            for j in 0..nd {
                let rcv = &self.receiver_phases[j * np..(j + 1) * np];
                out[k * nd + j] = weighted.iter().zip(rcv).map(|(w, r)| w * r).sum();
            }
        }
        out
    }

    /// Adjoint: far-field slice -> image; the exact conjugate transpose of
    /// `apply` in the standard inner products.
    pub fn adjoint(&self, data: &[Complex64]) -> Vec<Complex64> {
        let np = self.n * self.n;
        let nd = self.n_dir;
        assert_eq!(data.len(), nd * nd);
        let mut out = vec![Complex64::ZERO; np];
        // For each source k accumulate sum_j conj(r_j) d[k][j] first (a
        // receiver-combined plane), then scatter conj(s_k) through it.
        let mut combined = vec![Complex64::ZERO; np];
        for k in 0..nd {
            combined.iter_mut().for_each(|z| *z = Complex64::ZERO);
            for j in 0..nd {
                let d = data[k * nd + j];
                if d == Complex64::ZERO {
                    continue;
                }
                let rcv = &self.receiver_phases[j * np..(j + 1) * np];
                for (cz, r) in combined.iter_mut().zip(rcv) {
                    *cz += r.conj() * d;
                }
            }
            let src = &self.source_phases[k * np..(k + 1) * np];
            for ((o, s), cz) in out.iter_mut().zip(src).zip(&combined) {
                *o += s.conj() * cz;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::helmholtz::standard_grid;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rand_cvec(rng: &mut ChaCha20Rng, len: usize) -> Vec<Complex64> {
        (0..len)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    }

    #[test]
    fn adjoint_is_exact_conjugate_transpose() {
        // <A x, y> == <x, A* y> for random x, y at double precision.
        let grid = standard_grid(16, 2, 4);
        let geom = AcquisitionGeometry {
            n_dir: 12,
            radius: 0.5,
        };
        let op = BornOperator::new(&grid, &geom, 2.0);
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let x = rand_cvec(&mut rng, 16 * 16);
        let y = rand_cvec(&mut rng, 12 * 12);
        let ax = op.apply(&x);
        let aty = op.adjoint(&y);
        let lhs: Complex64 = ax.iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
        let rhs: Complex64 = x.iter().zip(&aty).map(|(a, b)| a.conj() * b).sum();
        let scale = lhs.norm().max(rhs.norm()).max(1e-30);
        assert!(
            (lhs - rhs).norm() / scale < 1e-12,
            "adjoint mismatch {lhs} vs {rhs}"
        );
    }

    #[test]
    fn linear_in_the_image() {
        let grid = standard_grid(16, 2, 4);
        let geom = AcquisitionGeometry {
            n_dir: 8,
            radius: 0.5,
        };
        let op = BornOperator::new(&grid, &geom, 2.0);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let x = rand_cvec(&mut rng, 256);
        let y = rand_cvec(&mut rng, 256);
        let sum: Vec<Complex64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let lhs = op.apply(&sum);
        let ax = op.apply(&x);
        let ay = op.apply(&y);
        for ((l, a), b) in lhs.iter().zip(&ax).zip(&ay) {
            assert!((l - (a + b)).norm() < 1e-10);
        }
    }

    #[test]
    fn single_pixel_image_has_unit_modulus_ratio_across_data() {
        // For a one-pixel image the data are pref * h^2 * exp(i phi(k, j)):
        // every entry must share one modulus.
        let grid = standard_grid(16, 2, 4);
        let geom = AcquisitionGeometry {
            n_dir: 8,
            radius: 0.5,
        };
        let op = BornOperator::new(&grid, &geom, 2.0);
        let mut eta = vec![Complex64::ZERO; 256];
        eta[5 * 16 + 9] = Complex64::ONE;
        let d = op.apply(&eta);
        let m0 = d[0].norm();
        assert!(m0 > 0.0);
        for v in &d {
            assert!((v.norm() - m0).abs() / m0 < 1e-12);
        }
    }

    #[test]
    fn matches_full_solver_for_weak_scatterers() {
        // A small, weak square: single scattering dominates, so the
        // linearized data should match the full simulation to ~10%.
        use crate::helmholtz::{HelmholtzSolver, PmlSpec, StencilOrder};
        use waveband_core::field::SlownessField;

        let n = 40;
        let grid = standard_grid(n, 3, 5);
        let mut eta = vec![0.0; n * n];
        for r in 18..22 {
            for c in 18..22 {
                eta[r * n + c] = 0.01;
            }
        }
        let field = SlownessField::new(grid.clone(), eta.clone(), "custom", 0).unwrap();
        let geom = AcquisitionGeometry {
            n_dir: 16,
            radius: 0.5,
        };
        let hertz = 5.0;
        let solver =
            HelmholtzSolver::with_pml(&field, hertz, StencilOrder::Four, &PmlSpec::default())
                .unwrap();
        let full = solver.far_field_slice(&geom).unwrap();

        let op = BornOperator::new(&grid, &geom, hertz);
        let eta_c: Vec<Complex64> = eta.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        let lin = op.apply(&eta_c);

        let num: f64 = full
            .iter()
            .zip(&lin)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let den: f64 = full.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(num / den < 0.12, "linearization error {}", num / den);
    }
}
