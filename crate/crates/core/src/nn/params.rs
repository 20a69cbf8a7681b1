//! Flat parameter vector with a named registry of slices.
//!
//! Layers reserve contiguous ranges in one `Vec<T>`; the registry records
//! name, shape, and initializer for each range. Initialization draws from a
//! single seeded stream in registration order, so a given (architecture,
//! seed) pair always produces the same parameters, and checkpoints can
//! address parameters by name.

use super::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Uniform on `[-a, a]` with `a = sqrt(6 / (fan_in + fan_out))`.
    GlorotUniform { fan_in: usize, fan_out: usize },
    Zero,
}

#[derive(Clone, Debug)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
    pub init: Init,
}

#[derive(Clone, Debug, Default)]
pub struct ParamRegistry {
    pub entries: Vec<ParamSpec>,
    total: usize,
}

impl ParamRegistry {
    pub fn new() -> Self {
        ParamRegistry::default()
    }

    /// Reserve a parameter block; returns its offset into the flat vector.
    pub fn add(&mut self, name: impl Into<String>, shape: Vec<usize>, init: Init) -> usize {
        let name = name.into();
        debug_assert!(
            self.by_name(&name).is_none(),
            "duplicate parameter name {name}"
        );
        let len: usize = shape.iter().product();
        let offset = self.total;
        self.entries.push(ParamSpec {
            name,
            shape,
            offset,
            len,
            init,
        });
        self.total += len;
        offset
    }

    pub fn by_name(&self, name: &str) -> Option<&ParamSpec> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn total(&self) -> usize {
        self.total
    }
}

/// Materialize the parameter vector: one seeded stream, entries filled in
/// registration order. `Zero` blocks consume no random draws, so adding or
/// removing zero-initialized entries does not shift other blocks' values.
pub fn init_params<T: Scalar>(reg: &ParamRegistry, seed: u64) -> Vec<T> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = vec![T::zero(); reg.total];
    for spec in &reg.entries {
        match spec.init {
            Init::GlorotUniform { fan_in, fan_out } => {
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for v in &mut out[spec.offset..spec.offset + spec.len] {
                    *v = T::from_f64(rng.random_range(-a..a));
                }
            }
            Init::Zero => {}
        }
    }
    out
}
