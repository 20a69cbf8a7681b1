//! Wave physics for the inverse-scattering workbench: a frequency-domain
//! Helmholtz solver with absorbing boundary layers, random scattering media,
//! the linearized (single-scattering) forward operator, and a regularized
//! least-squares inverter built on restarted GMRES.

pub mod band;
pub mod born;
pub mod fbp;
pub mod gmres;
pub mod helmholtz;
pub mod media;

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum PhysicsError {
    /// A factorization hit a zero pivot.
    Singular(usize),
    /// A request fell outside the computational domain.
    Domain(String),
    /// Inconsistent sizes or options.
    Config(String),
}

impl fmt::Display for PhysicsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhysicsError::Singular(col) => {
                write!(f, "matrix is singular at column {col}")
            }
            PhysicsError::Domain(msg) => write!(f, "domain error: {msg}"),
            PhysicsError::Config(msg) => write!(f, "config error: {msg}"),
        }
    }
}

impl std::error::Error for PhysicsError {}
