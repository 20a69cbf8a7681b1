//! Core building blocks of the wave-scattering workbench: imaging-grid
//! geometry, the quad-tree tensor layout shared by data formatting and the
//! network, a small reverse-mode layer kit, and the wide-band butterfly
//! network assembled from those pieces.
//!
//! Everything here is deterministic: random draws go through seeded ChaCha
//! streams and all shape bookkeeping is explicit, so two runs with the same
//! seeds produce bit-identical results.

pub mod field;
pub mod grid;
pub mod net;
pub mod nn;
pub mod special;
pub mod tensor;
