//! Scattering media, probe geometry, and multi-frequency far-field records.

use crate::grid::{Frequency, GridSpec};
use num_complex::Complex64;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum FieldError {
    Shape(String),
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldError::Shape(msg) => write!(f, "field shape error: {msg}"),
        }
    }
}

impl std::error::Error for FieldError {}

/// A medium as a perturbation `eta` of the unit-slowness background: the
/// squared slowness at pixel `(r, c)` is `1 + eta[r * n + c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SlownessField {
    pub grid: GridSpec,
    /// Row-major `n x n` perturbation, zero outside scatterers.
    pub eta: Vec<f64>,
    /// Generator family name, e.g. "squares"; "custom" when hand-built.
    pub family: String,
    /// Seed the sample was drawn with; 0 for deterministic media.
    pub seed: u64,
}

impl SlownessField {
    pub fn new(
        grid: GridSpec,
        eta: Vec<f64>,
        family: impl Into<String>,
        seed: u64,
    ) -> Result<Self, FieldError> {
        if eta.len() != grid.n * grid.n {
            return Err(FieldError::Shape(format!(
                "eta length {} does not match {0}x{0} grid",
                eta.len(),
            )));
        }
        Ok(SlownessField {
            grid,
            eta,
            family: family.into(),
            seed,
        })
    }

    pub fn max_eta(&self) -> f64 {
        self.eta.iter().cloned().fold(0.0, f64::max)
    }

    /// Squared slowness at pixel `(r, c)`.
    #[inline]
    pub fn m(&self, r: usize, c: usize) -> f64 {
        1.0 + self.eta[r * self.grid.n + c]
    }
}

/// Equispaced directions on a circle: plane-wave sources come in along
/// `direction(k)` and far-field receivers sit at `radius * direction(k)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcquisitionGeometry {
    pub n_dir: usize,
    pub radius: f64,
}

impl AcquisitionGeometry {
    /// One direction per grid pixel across, receivers on the circle that
    /// circumscribes half the domain width.
    pub fn aligned_with(grid: &GridSpec) -> Self {
        AcquisitionGeometry {
            n_dir: grid.n,
            radius: 0.5 * (grid.domain_max - grid.domain_min),
        }
    }

    #[inline]
    pub fn angle(&self, k: usize) -> f64 {
        2.0 * std::f64::consts::PI * k as f64 / self.n_dir as f64
    }

    /// Unit direction of probe `k`.
    #[inline]
    pub fn direction(&self, k: usize) -> [f64; 2] {
        let a = self.angle(k);
        [a.cos(), a.sin()]
    }

    /// Receiver position of probe `k`.
    #[inline]
    pub fn receiver(&self, k: usize) -> [f64; 2] {
        let [dx, dy] = self.direction(k);
        [self.radius * dx, self.radius * dy]
    }
}

/// Far-field scattering data: one `n_dir x n_dir` complex matrix per
/// frequency, indexed `[source, receiver]` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FarFieldCube {
    pub n_dir: usize,
    pub frequencies: Vec<Frequency>,
    pub slices: Vec<Vec<Complex64>>,
    /// Discretization order of the solver that produced the data (2 or 4);
    /// 0 marks data not produced by a wave solver (e.g. linearized models).
    pub stencil_order: u8,
}

impl FarFieldCube {
    pub fn new(
        n_dir: usize,
        frequencies: Vec<Frequency>,
        slices: Vec<Vec<Complex64>>,
        stencil_order: u8,
    ) -> Result<Self, FieldError> {
        if slices.len() != frequencies.len() {
            return Err(FieldError::Shape(format!(
                "{} slices for {} frequencies",
                slices.len(),
                frequencies.len()
            )));
        }
        for (i, s) in slices.iter().enumerate() {
            if s.len() != n_dir * n_dir {
                return Err(FieldError::Shape(format!(
                    "slice {i} has {} entries, want {}",
                    s.len(),
                    n_dir * n_dir
                )));
            }
        }
        Ok(FarFieldCube {
            n_dir,
            frequencies,
            slices,
            stencil_order,
        })
    }

    #[inline]
    pub fn slice(&self, fi: usize) -> &[Complex64] {
        &self.slices[fi]
    }

    #[inline]
    pub fn at(&self, fi: usize, src: usize, rcv: usize) -> Complex64 {
        self.slices[fi][src * self.n_dir + rcv]
    }
}
