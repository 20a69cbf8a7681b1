//! Per-frequency standardization of scattering data.
//!
//! For each frequency, one scalar mean and one scalar standard deviation
//! are computed over the pooled real and imaginary entries of every
//! training cube; standardizing subtracts the mean from both parts and
//! divides both by the standard deviation. Statistics are computed from the
//! training split only and reused verbatim at evaluation time.

use crate::config::CliError;
use waveband_core::field::FarFieldCube;

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizationStats {
    /// One pooled mean per frequency.
    pub mean: Vec<f64>,
    /// One pooled standard deviation per frequency; always positive.
    pub std: Vec<f64>,
}

impl NormalizationStats {
    /// Pool real and imaginary entries of all training cubes per frequency.
    /// Uses the population standard deviation so re-standardizing the same
    /// pool yields unit variance exactly (up to rounding).
    pub fn from_training(cubes: &[FarFieldCube]) -> Result<Self, CliError> {
        let first = cubes
            .first()
            .ok_or_else(|| CliError::Data("no training cubes to pool statistics from".into()))?;
        let nf = first.frequencies.len();
        for (i, c) in cubes.iter().enumerate() {
            if c.frequencies.len() != nf {
                return Err(CliError::Data(format!(
                    "cube {i} has {} frequencies, expected {nf}",
                    c.frequencies.len()
                )));
            }
        }
        let mut mean = Vec::with_capacity(nf);
        let mut std = Vec::with_capacity(nf);
        for fi in 0..nf {
            let mut sum = 0.0f64;
            let mut count = 0usize;
            for c in cubes {
                for z in c.slice(fi) {
                    sum += z.re + z.im;
                    count += 2;
                }
            }
            let mu = sum / count as f64;
            let mut ss = 0.0f64;
            for c in cubes {
                for z in c.slice(fi) {
                    ss += (z.re - mu).powi(2) + (z.im - mu).powi(2);
                }
            }
            let var = ss / count as f64;
            let sd = var.sqrt();
            if !(sd > 0.0) || !sd.is_finite() {
                return Err(CliError::Data(format!(
                    "frequency {fi}: pooled standard deviation is {sd}; data is degenerate"
                )));
            }
            mean.push(mu);
            std.push(sd);
        }
        Ok(NormalizationStats { mean, std })
    }

    /// Apply `(x - mean) / std` to both parts of every entry, per frequency.
    pub fn standardize(&self, cube: &FarFieldCube) -> Result<FarFieldCube, CliError> {
        if cube.frequencies.len() != self.mean.len() {
            return Err(CliError::Data(format!(
                "cube has {} frequencies, statistics cover {}",
                cube.frequencies.len(),
                self.mean.len()
            )));
        }
        let mut out = cube.clone();
        for (fi, slice) in out.slices.iter_mut().enumerate() {
            let mu = self.mean[fi];
            let inv = 1.0 / self.std[fi];
            for z in slice.iter_mut() {
                z.re = (z.re - mu) * inv;
                z.im = (z.im - mu) * inv;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use waveband_core::grid::Frequency;

    fn freqs(nf: usize) -> Vec<Frequency> {
        (0..nf)
            .map(|i| Frequency {
                hertz: (i + 1) as f64,
                level: 2 + i as u32,
            })
            .collect()
    }

    #[test]
    fn hand_computed_pool() {
        // Pool {1, 2, 3, 4}: mean 2.5, population variance 1.25.
        let cube = FarFieldCube::new(
            1,
            freqs(2),
            vec![
                vec![Complex64::new(1.0, 2.0)],
                vec![Complex64::new(10.0, 10.0)],
            ],
            0,
        )
        .unwrap();
        let cube2 = FarFieldCube::new(
            1,
            freqs(2),
            vec![
                vec![Complex64::new(3.0, 4.0)],
                vec![Complex64::new(10.0, 14.0)],
            ],
            0,
        )
        .unwrap();
        let stats = NormalizationStats::from_training(&[cube.clone(), cube2]).unwrap();
        assert!((stats.mean[0] - 2.5).abs() < 1e-15);
        assert!((stats.std[0] - 1.25f64.sqrt()).abs() < 1e-15);
        assert!((stats.mean[1] - 11.0).abs() < 1e-15);
        let z = stats.standardize(&cube).unwrap().slices[0][0];
        assert!((z.re - (1.0 - 2.5) / 1.25f64.sqrt()).abs() < 1e-15);
        assert!((z.im - (2.0 - 2.5) / 1.25f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn standardized_training_pool_has_zero_mean_unit_std() {
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        let nf = 3;
        let cubes: Vec<FarFieldCube> = (0..10)
            .map(|_| {
                let slices = (0..nf)
                    .map(|fi| {
                        (0..64)
                            .map(|_| {
                                let scale = 10f64.powi(fi as i32 - 1);
                                Complex64::new(
                                    scale * (rng.random::<f64>() - 0.3),
                                    scale * (rng.random::<f64>() + 0.8),
                                )
                            })
                            .collect()
                    })
                    .collect();
                FarFieldCube::new(8, freqs(nf), slices, 0).unwrap()
            })
            .collect();
        let stats = NormalizationStats::from_training(&cubes).unwrap();
        for fi in 0..nf {
            let mut pool = Vec::new();
            for c in &cubes {
                let s = stats.standardize(c).unwrap();
                for z in s.slice(fi) {
                    pool.push(z.re);
                    pool.push(z.im);
                }
            }
            let n = pool.len() as f64;
            let mu = pool.iter().sum::<f64>() / n;
            let sd = (pool.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n).sqrt();
            assert!(mu.abs() <= 1e-6, "frequency {fi}: post-norm mean {mu}");
            assert!((sd - 1.0).abs() <= 1e-4, "frequency {fi}: post-norm std {sd}");
        }
    }

    #[test]
    fn degenerate_pool_is_rejected() {
        let cube = FarFieldCube::new(
            2,
            freqs(1),
            vec![vec![Complex64::new(3.0, 3.0); 4]],
            0,
        )
        .unwrap();
        match NormalizationStats::from_training(&[cube]) {
            Err(CliError::Data(msg)) => assert!(msg.contains("degenerate")),
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn frequency_count_mismatch_is_rejected() {
        let a = FarFieldCube::new(1, freqs(1), vec![vec![Complex64::ONE]], 0).unwrap();
        let b = FarFieldCube::new(
            1,
            freqs(2),
            vec![vec![Complex64::ONE], vec![Complex64::new(0.0, 2.0)]],
            0,
        )
        .unwrap();
        assert!(NormalizationStats::from_training(&[a.clone(), b.clone()]).is_err());
        let stats = NormalizationStats::from_training(&[b]).unwrap();
        assert!(stats.standardize(&a).is_err());
    }
}
