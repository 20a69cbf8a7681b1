//! Dense rank-3 tensors and the quad-tree reshapes used by the network.
//!
//! A [`Tensor3`] is a `rows x cols` grid of cells with a contiguous channel
//! vector per cell (row-major cells, channel-minor storage). The reshapes
//! here move data between flat images and per-level cell layouts without any
//! arithmetic: tensorize/detensorize, space-to-depth and its inverse, the
//! mid-level switch permutation, and channel concatenation/splitting. All of
//! them are exact permutations, so round-trips are bit-identical.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorError {
    Shape(String),
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorError::Shape(msg) => write!(f, "tensor shape error: {msg}"),
        }
    }
}

impl std::error::Error for TensorError {}

/// Row-major grid of cells, channel-minor: entry `(r, c, k)` lives at
/// `(r * cols + c) * channels + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3<T> {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
    pub data: Vec<T>,
}

impl<T: Copy + Default> Tensor3<T> {
    pub fn zeros(rows: usize, cols: usize, channels: usize) -> Self {
        Tensor3 {
            rows,
            cols,
            channels,
            data: vec![T::default(); rows * cols * channels],
        }
    }
}

impl<T> Tensor3<T> {
    pub fn from_data(
        rows: usize,
        cols: usize,
        channels: usize,
        data: Vec<T>,
    ) -> Result<Self, TensorError> {
        if data.len() != rows * cols * channels {
            return Err(TensorError::Shape(format!(
                "data length {} does not match {rows}x{cols}x{channels}",
                data.len()
            )));
        }
        Ok(Tensor3 {
            rows,
            cols,
            channels,
            data,
        })
    }

    #[inline]
    pub fn idx(&self, r: usize, c: usize, k: usize) -> usize {
        (r * self.cols + c) * self.channels + k
    }

    /// Channel vector of cell `(r, c)`.
    #[inline]
    pub fn cell(&self, r: usize, c: usize) -> &[T] {
        let base = (r * self.cols + c) * self.channels;
        &self.data[base..base + self.channels]
    }

    #[inline]
    pub fn cell_mut(&mut self, r: usize, c: usize) -> &mut [T] {
        let base = (r * self.cols + c) * self.channels;
        &mut self.data[base..base + self.channels]
    }
}

/// Reshape an `n x n x cmult` image (row-major, channel-minor) into the cell
/// layout of quad-tree `level`: one cell per `B x B` pixel block with
/// `B = 2^(levels - level) * leaf`, channel index `(pi * B + pj) * cmult + k`
/// for pixel offset `(pi, pj)` inside the block.
pub fn tensorize<T: Copy + Default>(
    image: &[T],
    levels: u32,
    leaf: usize,
    level: u32,
    cmult: usize,
) -> Result<Tensor3<T>, TensorError> {
    if level > levels || level == 0 {
        return Err(TensorError::Shape(format!(
            "level {level} outside 1..={levels}"
        )));
    }
    let n = (1usize << levels) * leaf;
    if image.len() != n * n * cmult {
        return Err(TensorError::Shape(format!(
            "image length {} does not match {n}x{n}x{cmult}",
            image.len()
        )));
    }
    let cells = 1usize << level;
    let b = (1usize << (levels - level)) * leaf;
    let mut out = Tensor3::zeros(cells, cells, b * b * cmult);
    for ci in 0..cells {
        for cj in 0..cells {
            let dst = out.cell_mut(ci, cj);
            for pi in 0..b {
                let row = ci * b + pi;
                let src_base = (row * n + cj * b) * cmult;
                let dst_base = pi * b * cmult;
                dst[dst_base..dst_base + b * cmult]
                    .copy_from_slice(&image[src_base..src_base + b * cmult]);
            }
        }
    }
    Ok(out)
}

/// Inverse of [`tensorize`]: flatten the cell layout back to an
/// `n x n x cmult` row-major image.
pub fn detensorize<T: Copy + Default>(
    t: &Tensor3<T>,
    levels: u32,
    leaf: usize,
    level: u32,
    cmult: usize,
) -> Result<Vec<T>, TensorError> {
    if level > levels || level == 0 {
        return Err(TensorError::Shape(format!(
            "level {level} outside 1..={levels}"
        )));
    }
    let cells = 1usize << level;
    let b = (1usize << (levels - level)) * leaf;
    if t.rows != cells || t.cols != cells || t.channels != b * b * cmult {
        return Err(TensorError::Shape(format!(
            "tensor {}x{}x{} does not match level {level} ({cells}x{cells}x{})",
            t.rows,
            t.cols,
            t.channels,
            b * b * cmult
        )));
    }
    let n = cells * b;
    let mut image = vec![T::default(); n * n * cmult];
    for ci in 0..cells {
        for cj in 0..cells {
            let src = t.cell(ci, cj);
            for pi in 0..b {
                let row = ci * b + pi;
                let dst_base = (row * n + cj * b) * cmult;
                let src_base = pi * b * cmult;
                image[dst_base..dst_base + b * cmult]
                    .copy_from_slice(&src[src_base..src_base + b * cmult]);
            }
        }
    }
    Ok(image)
}

/// Merge each 2x2 block of cells into one cell, stacking the four channel
/// vectors in NW, NE, SW, SE order.
pub fn space_to_depth<T: Copy + Default>(t: &Tensor3<T>) -> Result<Tensor3<T>, TensorError> {
    if !t.rows.is_multiple_of(2) || !t.cols.is_multiple_of(2) {
        return Err(TensorError::Shape(format!(
            "space_to_depth needs even dims, got {}x{}",
            t.rows, t.cols
        )));
    }
    let c = t.channels;
    let mut out = Tensor3::zeros(t.rows / 2, t.cols / 2, 4 * c);
    for r in 0..out.rows {
        for cc in 0..out.cols {
            let dst = out.cell_mut(r, cc);
            for (q, (qr, qc)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
                dst[q * c..(q + 1) * c].copy_from_slice(t.cell(2 * r + qr, 2 * cc + qc));
            }
        }
    }
    Ok(out)
}

/// Inverse of [`space_to_depth`].
pub fn depth_to_space<T: Copy + Default>(t: &Tensor3<T>) -> Result<Tensor3<T>, TensorError> {
    if !t.channels.is_multiple_of(4) {
        return Err(TensorError::Shape(format!(
            "depth_to_space needs channels divisible by 4, got {}",
            t.channels
        )));
    }
    let c = t.channels / 4;
    let mut out = Tensor3::zeros(t.rows * 2, t.cols * 2, c);
    for r in 0..t.rows {
        for cc in 0..t.cols {
            let src = t.cell(r, cc);
            for (q, (qr, qc)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
                out.cell_mut(2 * r + qr, 2 * cc + qc)
                    .copy_from_slice(&src[q * c..(q + 1) * c]);
            }
        }
    }
    Ok(out)
}

/// Mid-level switch: on a `2^m x 2^m` cell grid whose channel count is a
/// multiple of `4^m`, exchange the cell index with the leading channel-block
/// index. Writing `C = 4^m * p`,
/// `out[a][b][(c * 2^m + d) * p + q] = in[c][d][(a * 2^m + b) * p + q]`.
/// The map is an involution.
pub fn switch_permute<T: Copy + Default>(
    t: &Tensor3<T>,
    m: u32,
) -> Result<Tensor3<T>, TensorError> {
    let side = 1usize << m;
    if t.rows != side || t.cols != side {
        return Err(TensorError::Shape(format!(
            "switch at level {m} needs a {side}x{side} grid, got {}x{}",
            t.rows, t.cols
        )));
    }
    let blocks = side * side;
    if !t.channels.is_multiple_of(blocks) {
        return Err(TensorError::Shape(format!(
            "switch at level {m} needs channels divisible by {blocks}, got {}",
            t.channels
        )));
    }
    let p = t.channels / blocks;
    let mut out = Tensor3::zeros(side, side, t.channels);
    for a in 0..side {
        for b in 0..side {
            for c in 0..side {
                for d in 0..side {
                    let src = t.cell(c, d);
                    let dst = out.cell_mut(a, b);
                    let src_base = (a * side + b) * p;
                    let dst_base = (c * side + d) * p;
                    dst[dst_base..dst_base + p].copy_from_slice(&src[src_base..src_base + p]);
                }
            }
        }
    }
    Ok(out)
}

/// Per-cell channel concatenation: `a`'s channels first, then `b`'s.
pub fn concat_channels<T: Copy + Default>(
    a: &Tensor3<T>,
    b: &Tensor3<T>,
) -> Result<Tensor3<T>, TensorError> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(TensorError::Shape(format!(
            "concat needs matching grids, got {}x{} and {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = Tensor3::zeros(a.rows, a.cols, a.channels + b.channels);
    for r in 0..a.rows {
        for c in 0..a.cols {
            let dst = out.cell_mut(r, c);
            dst[..a.channels].copy_from_slice(a.cell(r, c));
            dst[a.channels..].copy_from_slice(b.cell(r, c));
        }
    }
    Ok(out)
}

/// Inverse of [`concat_channels`]: split each cell's channels at `c1`.
pub fn split_channels<T: Copy + Default>(
    t: &Tensor3<T>,
    c1: usize,
) -> Result<(Tensor3<T>, Tensor3<T>), TensorError> {
    if c1 > t.channels {
        return Err(TensorError::Shape(format!(
            "split at {c1} exceeds {} channels",
            t.channels
        )));
    }
    let mut a = Tensor3::zeros(t.rows, t.cols, c1);
    let mut b = Tensor3::zeros(t.rows, t.cols, t.channels - c1);
    for r in 0..t.rows {
        for c in 0..t.cols {
            let src = t.cell(r, c);
            a.cell_mut(r, c).copy_from_slice(&src[..c1]);
            b.cell_mut(r, c).copy_from_slice(&src[c1..]);
        }
    }
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn tensorize_two_by_two_blocks() {
        // 4x4 image 1..16, quad-tree with L = 2, leaf 1, at level 1: each cell
        // is a 2x2 pixel block read row by row.
        let image: Vec<f64> = (1..=16).map(|v| v as f64).collect();
        let t = tensorize(&image, 2, 1, 1, 1).unwrap();
        assert_eq!((t.rows, t.cols, t.channels), (2, 2, 4));
        assert_eq!(t.cell(0, 0), &[1.0, 2.0, 5.0, 6.0]);
        assert_eq!(t.cell(0, 1), &[3.0, 4.0, 7.0, 8.0]);
        assert_eq!(t.cell(1, 0), &[9.0, 10.0, 13.0, 14.0]);
        assert_eq!(t.cell(1, 1), &[11.0, 12.0, 15.0, 16.0]);
    }

    #[test]
    fn tensorize_at_finest_level_with_unit_leaf_is_identity() {
        let image: Vec<f64> = (0..64).map(|v| v as f64).collect();
        let t = tensorize(&image, 3, 1, 3, 1).unwrap();
        assert_eq!((t.rows, t.cols, t.channels), (8, 8, 1));
        assert_eq!(t.data, image);
    }

    #[test]
    fn tensorize_encodes_expected_pixels() {
        // Encode each entry as row * n * cmult + col * cmult + k and check the
        // cell layout decodes every one at its predicted spot.
        let (levels, leaf, cmult) = (3u32, 4usize, 2usize);
        let n = (1usize << levels) * leaf;
        let image: Vec<f64> = (0..n * n * cmult).map(|v| v as f64).collect();
        for level in 1..=levels {
            let t = tensorize(&image, levels, leaf, level, cmult).unwrap();
            let b = (1usize << (levels - level)) * leaf;
            for ci in 0..t.rows {
                for cj in 0..t.cols {
                    let cell = t.cell(ci, cj);
                    for pi in 0..b {
                        for pj in 0..b {
                            for k in 0..cmult {
                                let want = ((ci * b + pi) * n + cj * b + pj) * cmult + k;
                                let got = cell[(pi * b + pj) * cmult + k];
                                assert_eq!(got, want as f64);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn space_to_depth_quadrant_order() {
        // [[a, b], [c, d]] single-channel -> one cell [a, b, c, d].
        let t = Tensor3::from_data(2, 2, 1, vec![10.0, 20.0, 30.0, 40.0]).unwrap();
        let d = space_to_depth(&t).unwrap();
        assert_eq!((d.rows, d.cols, d.channels), (1, 1, 4));
        assert_eq!(d.data, vec![10.0, 20.0, 30.0, 40.0]);
    }

    #[test]
    fn round_trips_are_bit_exact() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let levels = rng.random_range(2..=4u32);
            let leaf = rng.random_range(1..=3usize);
            let level = rng.random_range(1..=levels);
            let cmult = rng.random_range(1..=2usize);
            let n = (1usize << levels) * leaf;
            let image: Vec<f32> = (0..n * n * cmult).map(|_| rng.random::<f32>()).collect();
            let t = tensorize(&image, levels, leaf, level, cmult).unwrap();
            let back = detensorize(&t, levels, leaf, level, cmult).unwrap();
            assert_eq!(back, image);

            if t.rows % 2 == 0 {
                let d = space_to_depth(&t).unwrap();
                let u = depth_to_space(&d).unwrap();
                assert_eq!(u, t);
            }
        }
    }

    #[test]
    fn switch_is_a_full_permutation_and_involution() {
        // Level-2 grid (4x4 cells) with p = 3.
        let m = 2u32;
        let side = 1usize << m;
        let p = 3usize;
        let channels = side * side * p;
        let data: Vec<f64> = (0..side * side * channels).map(|v| v as f64).collect();
        let t = Tensor3::from_data(side, side, channels, data.clone()).unwrap();
        let s = switch_permute(&t, m).unwrap();

        // Every input value appears exactly once.
        let mut sorted = s.data.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want = data.clone();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(sorted, want);

        // Applying the switch twice restores the input.
        let ss = switch_permute(&s, m).unwrap();
        assert_eq!(ss.data, t.data);

        // Spot-check the index law out[a][b][(c*side+d)p+q] = in[c][d][(a*side+b)p+q].
        for a in 0..side {
            for b in 0..side {
                for c in 0..side {
                    for d in 0..side {
                        for q in 0..p {
                            let got = s.cell(a, b)[(c * side + d) * p + q];
                            let want = t.cell(c, d)[(a * side + b) * p + q];
                            assert_eq!(got, want);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn concat_then_split_round_trips() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let a_data: Vec<f32> = (0..2 * 2 * 3).map(|_| rng.random()).collect();
        let b_data: Vec<f32> = (0..2 * 2 * 5).map(|_| rng.random()).collect();
        let a = Tensor3::from_data(2, 2, 3, a_data).unwrap();
        let b = Tensor3::from_data(2, 2, 5, b_data).unwrap();
        let joined = concat_channels(&a, &b).unwrap();
        assert_eq!(joined.channels, 8);
        let (a2, b2) = split_channels(&joined, 3).unwrap();
        assert_eq!(a2, a);
        assert_eq!(b2, b);
    }

    #[test]
    fn shape_errors_are_reported() {
        let t = Tensor3::<f64>::zeros(3, 3, 4);
        assert!(space_to_depth(&t).is_err());
        assert!(switch_permute(&t, 1).is_err());
        let img = vec![0.0f64; 10];
        assert!(tensorize(&img, 2, 1, 1, 1).is_err());
    }
}
