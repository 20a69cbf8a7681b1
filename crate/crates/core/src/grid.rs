//! Imaging-grid geometry and the multi-frequency band attached to it.
//!
//! The image lives on a square of `n` cell-centred pixels per dimension over
//! `[domain_min, domain_max]^2`, with `n = 2^levels * leaf` so the quad-tree
//! layout of [`crate::tensor`] applies. Each probing frequency is tagged with
//! the quad-tree level at which its data enters the network; the band is
//! dyadic, halving the frequency per level below the finest one.

use std::fmt;

/// Background wave speed; wavelength is `1 / hertz` in domain units.
pub const BACKGROUND_SPEED: f64 = 1.0;

/// One probing frequency and the quad-tree level at which it is assimilated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frequency {
    pub hertz: f64,
    pub level: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridError {
    Dimension(String),
    Frequency(String),
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridError::Dimension(msg) => write!(f, "grid dimension error: {msg}"),
            GridError::Frequency(msg) => write!(f, "frequency band error: {msg}"),
        }
    }
}

impl std::error::Error for GridError {}

/// Square cell-centred imaging grid plus its frequency band.
///
/// Pixel `(row, col)` is centred at
/// `(domain_min + (col + 1/2) h, domain_min + (row + 1/2) h)` with
/// `h = (domain_max - domain_min) / n`; images are stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub domain_min: f64,
    pub domain_max: f64,
    /// Pixels per dimension; `n = 2^levels * leaf`.
    pub n: usize,
    /// Quad-tree depth `L`.
    pub levels: u32,
    /// Leaf block size `s`: a level-`L` cell covers `s x s` pixels.
    pub leaf: usize,
    /// Ascending by level; level `L` carries the highest frequency.
    pub frequencies: Vec<Frequency>,
}

impl GridSpec {
    pub fn new(
        domain_min: f64,
        domain_max: f64,
        n: usize,
        levels: u32,
        leaf: usize,
        frequencies: Vec<Frequency>,
    ) -> Result<Self, GridError> {
        if !domain_min.is_finite() || !domain_max.is_finite() || domain_max <= domain_min {
            return Err(GridError::Dimension(format!(
                "empty domain [{domain_min}, {domain_max}]"
            )));
        }
        if levels < 2 {
            return Err(GridError::Dimension(format!(
                "need at least two quad-tree levels, got {levels}"
            )));
        }
        if leaf == 0 {
            return Err(GridError::Dimension("leaf block size must be positive".into()));
        }
        let expect = (1usize << levels) * leaf;
        if n != expect {
            return Err(GridError::Dimension(format!(
                "n = {n} but 2^{levels} * {leaf} = {expect}"
            )));
        }
        let spec = GridSpec {
            domain_min,
            domain_max,
            n,
            levels,
            leaf,
            frequencies,
        };
        spec.check_band()?;
        Ok(spec)
    }

    /// Standard dyadic band: `f_max` at level `L`, halving per level down to
    /// the coarsest assimilation level `ceil(L/2)`.
    pub fn with_standard_band(
        n: usize,
        levels: u32,
        leaf: usize,
        f_max: f64,
    ) -> Result<Self, GridError> {
        let min_level = min_assimilation_level(levels);
        let frequencies = (min_level..=levels)
            .map(|level| Frequency {
                hertz: f_max / f64::powi(2.0, (levels - level) as i32),
                level,
            })
            .collect();
        GridSpec::new(-0.5, 0.5, n, levels, leaf, frequencies)
    }

    fn check_band(&self) -> Result<(), GridError> {
        let min_level = self.min_level();
        let want = (self.levels - min_level + 1) as usize;
        if self.frequencies.len() != want {
            return Err(GridError::Frequency(format!(
                "expected one frequency per level {min_level}..={}, got {}",
                self.levels,
                self.frequencies.len()
            )));
        }
        for (i, fr) in self.frequencies.iter().enumerate() {
            let level = min_level + i as u32;
            if fr.level != level {
                return Err(GridError::Frequency(format!(
                    "frequency {i} tagged level {}, expected {level}",
                    fr.level
                )));
            }
            if !fr.hertz.is_finite() || fr.hertz <= 0.0 {
                return Err(GridError::Frequency(format!(
                    "frequency at level {level} must be positive, got {}",
                    fr.hertz
                )));
            }
        }
        // Dyadic ladder: f(l) = f_max / 2^(L - l).
        let f_max = self.frequencies.last().unwrap().hertz;
        for fr in &self.frequencies {
            let want = f_max / f64::powi(2.0, (self.levels - fr.level) as i32);
            if (fr.hertz - want).abs() > 1e-9 * want {
                return Err(GridError::Frequency(format!(
                    "level {} frequency {} breaks the dyadic ladder (expected {want})",
                    fr.level, fr.hertz
                )));
            }
        }
        Ok(())
    }

    /// Coarsest assimilation level (`L/2`, rounded up for odd `L`).
    pub fn min_level(&self) -> u32 {
        min_assimilation_level(self.levels)
    }

    /// Pixel spacing.
    pub fn h(&self) -> f64 {
        (self.domain_max - self.domain_min) / self.n as f64
    }

    /// Cell-centred coordinate of pixel index `idx` along either axis.
    pub fn coord(&self, idx: usize) -> f64 {
        self.domain_min + (idx as f64 + 0.5) * self.h()
    }

    pub fn f_max(&self) -> f64 {
        self.frequencies.last().expect("validated band").hertz
    }

    pub fn frequency_at_level(&self, level: u32) -> Option<&Frequency> {
        self.frequencies.iter().find(|f| f.level == level)
    }

    /// Wavelength of `hertz` in pixels.
    pub fn wavelength_px(&self, hertz: f64) -> f64 {
        BACKGROUND_SPEED / hertz / self.h()
    }

    /// Pixel block covered by cell `(ci, cj)` at `level`: row and column
    /// ranges, each of width `2^(L - level) * leaf`.
    pub fn cell_block(
        &self,
        level: u32,
        ci: usize,
        cj: usize,
    ) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let b = (1usize << (self.levels - level)) * self.leaf;
        (ci * b..(ci + 1) * b, cj * b..(cj + 1) * b)
    }
}

/// `ceil(levels / 2)`: the level of the coarsest assimilated frequency and of
/// the switch permutation.
pub fn min_assimilation_level(levels: u32) -> u32 {
    levels.div_ceil(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_band_ladder() {
        let g = GridSpec::with_standard_band(80, 4, 5, 10.0).unwrap();
        assert_eq!(g.min_level(), 2);
        let hz: Vec<f64> = g.frequencies.iter().map(|f| f.hertz).collect();
        assert_eq!(hz, vec![2.5, 5.0, 10.0]);
        assert!((g.h() - 1.0 / 80.0).abs() < 1e-15);
        // 10 Hz at n = 80 is eight points per wavelength.
        assert!((g.wavelength_px(10.0) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn desk_band_uses_ceil_half() {
        let g = GridSpec::with_standard_band(32, 3, 4, 4.0).unwrap();
        assert_eq!(g.min_level(), 2);
        let hz: Vec<f64> = g.frequencies.iter().map(|f| f.hertz).collect();
        assert_eq!(hz, vec![2.0, 4.0]);
    }

    #[test]
    fn rejects_mismatched_n() {
        assert!(GridSpec::with_standard_band(81, 4, 5, 10.0).is_err());
    }

    #[test]
    fn rejects_broken_ladder() {
        let freqs = vec![
            Frequency { hertz: 3.0, level: 1 },
            Frequency { hertz: 4.0, level: 2 },
        ];
        assert!(GridSpec::new(-0.5, 0.5, 8, 2, 2, freqs).is_err());
    }

    #[test]
    fn cell_blocks_partition_pixels() {
        let g = GridSpec::with_standard_band(32, 3, 4, 4.0).unwrap();
        for level in g.min_level()..=g.levels {
            let cells = 1usize << level;
            let mut seen = vec![0u32; g.n * g.n];
            for ci in 0..cells {
                for cj in 0..cells {
                    let (rr, cc) = g.cell_block(level, ci, cj);
                    for r in rr.clone() {
                        for c in cc.clone() {
                            seen[r * g.n + c] += 1;
                        }
                    }
                }
            }
            assert!(seen.iter().all(|&k| k == 1), "level {level} not a partition");
        }
    }

    #[test]
    fn coords_are_cell_centred() {
        let g = GridSpec::with_standard_band(32, 3, 4, 4.0).unwrap();
        assert!((g.coord(0) - (-0.5 + 0.5 / 32.0)).abs() < 1e-15);
        assert!((g.coord(31) - (0.5 - 0.5 / 32.0)).abs() < 1e-15);
    }
}
