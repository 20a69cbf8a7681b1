//! Wide-band butterfly network for multi-frequency scattering inversion.
//!
//! The network mirrors the structure of a 2-D butterfly factorization over a
//! quad-tree of depth `L` with leaf cells of `s x s` pixels. Channel widths
//! follow `c(l) = 4^(L-l) * r` for a rank parameter `r`. Data flows:
//!
//! * per-frequency embeddings `V^l` turn each level's scattering matrix into
//!   `r` channels per cell of that level's grid;
//! * a downsweep of locally-connected maps `H^l` walks from the finest level
//!   `L` to the middle level `m = ceil(L/2)`, merging 2x2 cell blocks
//!   (space-to-depth) and, in the wide variant, concatenating the matching
//!   embedding before each map;
//! * a switch permutation at level `m` exchanges cell and channel-block
//!   indices (the transposition at the waist of a butterfly factorization),
//!   followed by residual blocks;
//! * an upsweep of locally-connected maps `G^l` walks back to level `L`
//!   (depth-to-space), a per-cell linear map `U` emits `s^2` values per leaf
//!   cell, and the result is flattened to an `n x n` image;
//! * a small chain of periodic convolutions refines the image.
//!
//! Variants: `Wide` is the full model; `Narrow` drops the per-level
//! embeddings below `L` and the concatenations (keeping the switch);
//! `Switchless` is `Wide` with the switch permutation removed and an
//! otherwise identical parameter layout.

use crate::field::FarFieldCube;
use crate::grid::min_assimilation_level;
use crate::nn::layers::{Activation, Conv2dPeriodic, LocallyConnected, ResidualBlock};
use crate::nn::params::ParamRegistry;
use crate::nn::Scalar;
use crate::tensor::{
    concat_channels, depth_to_space, detensorize, space_to_depth, split_channels, switch_permute,
    tensorize, Tensor3,
};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Wide,
    Narrow,
    Switchless,
}

impl Variant {
    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "wide" => Some(Variant::Wide),
            "narrow" => Some(Variant::Narrow),
            "switchless" => Some(Variant::Switchless),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Wide => "wide",
            Variant::Narrow => "narrow",
            Variant::Switchless => "switchless",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetError {
    Config(String),
    Input(String),
}

impl fmt::Display for NetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetError::Config(msg) => write!(f, "network config error: {msg}"),
            NetError::Input(msg) => write!(f, "network input error: {msg}"),
        }
    }
}

impl std::error::Error for NetError {}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetworkConfig {
    /// Quad-tree depth `L`.
    pub levels: u32,
    /// Leaf block size `s` (a level-`L` cell covers `s x s` pixels).
    pub leaf: usize,
    /// Butterfly rank `r`: channels per cell at level `L`.
    pub rank: usize,
    pub variant: Variant,
    pub n_cnn: usize,
    pub n_rnn: usize,
    pub conv_kernel: usize,
    pub conv_hidden: usize,
}

impl NetworkConfig {
    pub fn new(levels: u32, leaf: usize, rank: usize, variant: Variant) -> Self {
        NetworkConfig {
            levels,
            leaf,
            rank,
            variant,
            n_cnn: 3,
            n_rnn: 3,
            conv_kernel: 5,
            conv_hidden: 8,
        }
    }

    /// Image side in pixels.
    pub fn n(&self) -> usize {
        (1usize << self.levels) * self.leaf
    }

    /// Middle level `m = ceil(L/2)`: coarsest assimilated frequency, switch
    /// location.
    pub fn min_level(&self) -> u32 {
        min_assimilation_level(self.levels)
    }

    /// Channels per cell at `level`: `4^(L-level) * rank`.
    pub fn channels_at(&self, level: u32) -> usize {
        (1usize << (2 * (self.levels - level))) * self.rank
    }

    /// Input channels at `level`: real+imaginary parts of one scattering
    /// matrix block, `2 * (2^(L-level) * leaf)^2`.
    pub fn input_channels(&self, level: u32) -> usize {
        let b = (1usize << (self.levels - level)) * self.leaf;
        2 * b * b
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.levels < 2 {
            return Err(NetError::Config(format!(
                "need at least two levels, got {}",
                self.levels
            )));
        }
        if self.leaf == 0 || self.rank == 0 {
            return Err(NetError::Config("leaf and rank must be positive".into()));
        }
        if self.n_cnn == 0 {
            return Err(NetError::Config("need at least one convolution".into()));
        }
        if self.conv_kernel.is_multiple_of(2) {
            return Err(NetError::Config("convolution kernel must be odd".into()));
        }
        let m = self.min_level();
        let blocks = 1usize << (2 * m);
        if !self.channels_at(m).is_multiple_of(blocks) {
            return Err(NetError::Config(format!(
                "switch at level {m} needs channels divisible by {blocks}, got {} \
                 (for odd depths the rank must be a multiple of 4)",
                self.channels_at(m)
            )));
        }
        Ok(())
    }
}

/// Everything the backward pass needs from a forward pass: layer inputs and
/// preactivations in application order, plus the final image.
pub struct ForwardCache<T> {
    /// Embedding preactivations, ascending by level; `None` where the variant
    /// has no embedding.
    pub v_pre: Vec<Option<Tensor3<T>>>,
    pub h_in: Vec<Tensor3<T>>,
    pub h_pre: Vec<Tensor3<T>>,
    pub res_in: Vec<Tensor3<T>>,
    pub res_pre: Vec<Tensor3<T>>,
    pub g_in: Vec<Tensor3<T>>,
    pub g_pre: Vec<Tensor3<T>>,
    pub u_in: Tensor3<T>,
    pub u_pre: Tensor3<T>,
    pub conv_in: Vec<Tensor3<T>>,
    pub conv_pre: Vec<Tensor3<T>>,
    /// Recovered `n x n` image, row-major.
    pub output: Vec<T>,
}

pub struct WideBNet {
    pub config: NetworkConfig,
    pub registry: ParamRegistry,
    /// Embeddings ascending by level (`index = level - min_level`).
    v: Vec<Option<LocallyConnected>>,
    /// Downsweep maps, descending: `h[j]` acts at level `L - 1 - j`.
    h: Vec<LocallyConnected>,
    res: Vec<ResidualBlock>,
    /// Upsweep maps ascending: `g[j]` acts on the level `m + j` grid.
    g: Vec<LocallyConnected>,
    u: LocallyConnected,
    conv: Vec<Conv2dPeriodic>,
    switch_on: bool,
}

impl WideBNet {
    pub fn new(config: NetworkConfig) -> Result<Self, NetError> {
        config.validate()?;
        let mut reg = ParamRegistry::new();
        let levels = config.levels;
        let m = config.min_level();
        let has_embeddings = !matches!(config.variant, Variant::Narrow);

        // Parameter blocks are registered in a fixed canonical order so that
        // initialization draws are reproducible per (architecture, seed).
        let mut v_desc: Vec<Option<LocallyConnected>> = Vec::new();
        for level in (m..=levels).rev() {
            if level == levels || has_embeddings {
                let side = 1usize << level;
                v_desc.push(Some(LocallyConnected::register(
                    &mut reg,
                    &format!("v{level}"),
                    side,
                    side,
                    config.input_channels(level),
                    config.rank,
                    Activation::Relu,
                )));
            } else {
                v_desc.push(None);
            }
        }
        v_desc.reverse();

        let mut h = Vec::new();
        for level in (m..levels).rev() {
            let side = 1usize << level;
            let c = config.channels_at(level);
            let c_in = c + if has_embeddings { config.rank } else { 0 };
            h.push(LocallyConnected::register(
                &mut reg,
                &format!("h{level}"),
                side,
                side,
                c_in,
                c,
                Activation::Relu,
            ));
        }

        let side_m = 1usize << m;
        let c_m = config.channels_at(m);
        let res = (0..config.n_rnn)
            .map(|i| ResidualBlock::register(&mut reg, &format!("res{i}"), side_m, side_m, c_m))
            .collect();

        let mut g = Vec::new();
        for level in m + 1..=levels {
            let side = 1usize << (level - 1);
            let c = config.channels_at(level - 1);
            g.push(LocallyConnected::register(
                &mut reg,
                &format!("g{level}"),
                side,
                side,
                c,
                c,
                Activation::Relu,
            ));
        }

        let side_l = 1usize << levels;
        let u = LocallyConnected::register(
            &mut reg,
            "u",
            side_l,
            side_l,
            config.rank,
            config.leaf * config.leaf,
            Activation::Linear,
        );

        let mut conv = Vec::new();
        for i in 0..config.n_cnn {
            let c_in = if i == 0 { 1 } else { config.conv_hidden };
            let c_out = if i + 1 == config.n_cnn {
                1
            } else {
                config.conv_hidden
            };
            let act = if i + 1 == config.n_cnn {
                Activation::Linear
            } else {
                Activation::Relu
            };
            conv.push(Conv2dPeriodic::register(
                &mut reg,
                &format!("conv{i}"),
                c_in,
                c_out,
                config.conv_kernel,
                act,
            ));
        }

        Ok(WideBNet {
            config,
            registry: reg,
            v: v_desc,
            h,
            res,
            g,
            u,
            conv,
            switch_on: !matches!(config.variant, Variant::Switchless),
        })
    }

    pub fn param_count(&self) -> usize {
        self.registry.total()
    }

    fn check_inputs<T: Scalar>(&self, inputs: &[Tensor3<T>]) {
        let m = self.config.min_level();
        let want = (self.config.levels - m + 1) as usize;
        assert_eq!(inputs.len(), want, "expected {want} input levels");
        for (i, x) in inputs.iter().enumerate() {
            let level = m + i as u32;
            let side = 1usize << level;
            assert_eq!(
                (x.rows, x.cols, x.channels),
                (side, side, self.config.input_channels(level)),
                "input at level {level} has the wrong shape"
            );
        }
    }

    /// Run the network, keeping everything the backward pass needs.
    /// `inputs` are per-level tensors ascending from the middle level
    /// (see [`format_inputs`]).
    pub fn forward_train<T: Scalar>(&self, params: &[T], inputs: &[Tensor3<T>]) -> ForwardCache<T> {
        self.check_inputs(inputs);
        let cfg = &self.config;
        let m = cfg.min_level();
        let lm = (cfg.levels - m) as usize;
        let shape_ok = "shapes validated at construction";

        let mut v_pre: Vec<Option<Tensor3<T>>> = (0..=lm).map(|_| None).collect();
        let vl = self.v[lm].as_ref().expect("finest embedding always exists");
        let (mut x, pre) = vl.forward(params, &inputs[lm]);
        v_pre[lm] = Some(pre);

        let mut h_in = Vec::with_capacity(lm);
        let mut h_pre = Vec::with_capacity(lm);
        for j in 0..lm {
            let level = cfg.levels - 1 - j as u32;
            let idx = (level - m) as usize;
            let t = space_to_depth(&x).expect(shape_ok);
            let hin = if let Some(v) = &self.v[idx] {
                let (v_out, pre) = v.forward(params, &inputs[idx]);
                v_pre[idx] = Some(pre);
                concat_channels(&t, &v_out).expect(shape_ok)
            } else {
                t
            };
            let (nx, pre) = self.h[j].forward(params, &hin);
            h_in.push(hin);
            h_pre.push(pre);
            x = nx;
        }

        if self.switch_on {
            x = switch_permute(&x, m).expect(shape_ok);
        }

        let mut res_in = Vec::with_capacity(self.res.len());
        let mut res_pre = Vec::with_capacity(self.res.len());
        for block in &self.res {
            let (nx, pre) = block.forward(params, &x);
            res_in.push(x);
            res_pre.push(pre);
            x = nx;
        }

        let mut g_in = Vec::with_capacity(self.g.len());
        let mut g_pre = Vec::with_capacity(self.g.len());
        for gmap in &self.g {
            let (y, pre) = gmap.forward(params, &x);
            g_in.push(x);
            g_pre.push(pre);
            x = depth_to_space(&y).expect(shape_ok);
        }

        let (u_out, u_pre) = self.u.forward(params, &x);
        let u_in = x;
        let img = detensorize(&u_out, cfg.levels, cfg.leaf, cfg.levels, 1).expect(shape_ok);
        let n = cfg.n();
        let mut x = Tensor3::from_data(n, n, 1, img).expect(shape_ok);

        let mut conv_in = Vec::with_capacity(self.conv.len());
        let mut conv_pre = Vec::with_capacity(self.conv.len());
        for cv in &self.conv {
            let (y, pre) = cv.forward(params, &x);
            conv_in.push(x);
            conv_pre.push(pre);
            x = y;
        }

        ForwardCache {
            v_pre,
            h_in,
            h_pre,
            res_in,
            res_pre,
            g_in,
            g_pre,
            u_in,
            u_pre,
            conv_in,
            conv_pre,
            output: x.data,
        }
    }

    /// Convenience forward returning only the image.
    pub fn forward<T: Scalar>(&self, params: &[T], inputs: &[Tensor3<T>]) -> Vec<T> {
        self.forward_train(params, inputs).output
    }

    /// Reverse-mode sweep. `d_output` is the loss gradient with respect to
    /// the final image; parameter gradients are accumulated (`+=`) into
    /// `dparams`.
    pub fn backward<T: Scalar>(
        &self,
        params: &[T],
        inputs: &[Tensor3<T>],
        cache: &ForwardCache<T>,
        d_output: &[T],
        dparams: &mut [T],
    ) {
        self.check_inputs(inputs);
        let cfg = &self.config;
        let m = cfg.min_level();
        let lm = (cfg.levels - m) as usize;
        let n = cfg.n();
        let shape_ok = "shapes validated at construction";
        assert_eq!(d_output.len(), n * n, "image cotangent length mismatch");

        let mut dx = Tensor3::from_data(n, n, 1, d_output.to_vec()).expect(shape_ok);
        for j in (0..self.conv.len()).rev() {
            dx = self.conv[j].backward(params, &cache.conv_in[j], &cache.conv_pre[j], &dx, dparams);
        }

        let d_img = dx.data;
        let d_u_out = tensorize(&d_img, cfg.levels, cfg.leaf, cfg.levels, 1).expect(shape_ok);
        let mut dx = self
            .u
            .backward(params, &cache.u_in, &cache.u_pre, &d_u_out, dparams);

        for j in (0..self.g.len()).rev() {
            let d_y = space_to_depth(&dx).expect(shape_ok);
            dx = self.g[j].backward(params, &cache.g_in[j], &cache.g_pre[j], &d_y, dparams);
        }

        for j in (0..self.res.len()).rev() {
            dx = self.res[j].backward(params, &cache.res_in[j], &cache.res_pre[j], &dx, dparams);
        }

        if self.switch_on {
            // The switch is a symmetric permutation, so it is its own
            // transpose.
            dx = switch_permute(&dx, m).expect(shape_ok);
        }

        for j in (0..lm).rev() {
            let level = cfg.levels - 1 - j as u32;
            let idx = (level - m) as usize;
            let d_hin = self.h[j].backward(params, &cache.h_in[j], &cache.h_pre[j], &dx, dparams);
            let d_t = if let Some(v) = &self.v[idx] {
                let c_t = cfg.channels_at(level);
                let (d_t, d_v_out) = split_channels(&d_hin, c_t).expect(shape_ok);
                let pre = cache.v_pre[idx].as_ref().expect("embedding ran forward");
                let _ = v.backward(params, &inputs[idx], pre, &d_v_out, dparams);
                d_t
            } else {
                d_hin
            };
            dx = depth_to_space(&d_t).expect(shape_ok);
        }

        let vl = self.v[lm].as_ref().expect("finest embedding always exists");
        let pre = cache.v_pre[lm].as_ref().expect("embedding ran forward");
        let _ = vl.backward(params, &inputs[lm], pre, &dx, dparams);
    }
}

/// Smallest relu preactivation magnitude across the whole forward pass.
/// Finite-difference gradient checks use this to stay away from relu kinks.
pub fn min_relu_preact<T: Scalar>(net: &WideBNet, cache: &ForwardCache<T>) -> f64 {
    let mut m = f64::INFINITY;
    let mut scan = |t: &Tensor3<T>| {
        for v in &t.data {
            m = m.min(v.as_f64().abs());
        }
    };
    for pre in cache.v_pre.iter().flatten() {
        scan(pre);
    }
    for pre in &cache.h_pre {
        scan(pre);
    }
    for pre in &cache.res_pre {
        scan(pre);
    }
    for pre in &cache.g_pre {
        scan(pre);
    }
    // The final convolution is linear; only the relu ones have kinks.
    let n_conv = cache.conv_pre.len();
    for pre in &cache.conv_pre[..n_conv.saturating_sub(1)] {
        scan(pre);
    }
    let _ = net;
    m
}

/// Closed-form parameter count for a configuration; cross-checks the layer
/// registry.
pub fn param_count(cfg: &NetworkConfig) -> usize {
    let m = cfg.min_level();
    let cells = |level: u32| 1usize << (2 * level);
    let mut total = 0usize;

    for level in m..=cfg.levels {
        if level == cfg.levels || !matches!(cfg.variant, Variant::Narrow) {
            total += cells(level) * cfg.rank * (cfg.input_channels(level) + 1);
        }
    }
    for level in m..cfg.levels {
        let c = cfg.channels_at(level);
        let c_in = c + if matches!(cfg.variant, Variant::Narrow) {
            0
        } else {
            cfg.rank
        };
        total += cells(level) * c * (c_in + 1);
    }
    let c_m = cfg.channels_at(m);
    total += cfg.n_rnn * cells(m) * c_m * (c_m + 1);
    for level in m + 1..=cfg.levels {
        let c = cfg.channels_at(level - 1);
        total += cells(level - 1) * c * (c + 1);
    }
    total += cells(cfg.levels) * cfg.leaf * cfg.leaf * (cfg.rank + 1);
    let k2 = cfg.conv_kernel * cfg.conv_kernel;
    for i in 0..cfg.n_cnn {
        let c_in = if i == 0 { 1 } else { cfg.conv_hidden };
        let c_out = if i + 1 == cfg.n_cnn { 1 } else { cfg.conv_hidden };
        total += c_out * (c_in * k2 + 1);
    }
    total
}

/// Lay out a scattering data cube as network inputs: each frequency's
/// `n x n` complex matrix becomes a real/imaginary channel pair and is
/// reshaped to its level's cell grid. Returned ascending by level.
pub fn format_inputs<T: Scalar>(
    cube: &FarFieldCube,
    levels: u32,
    leaf: usize,
) -> Result<Vec<Tensor3<T>>, NetError> {
    let n = (1usize << levels) * leaf;
    if cube.n_dir != n {
        return Err(NetError::Input(format!(
            "cube has {} directions, network expects {n}",
            cube.n_dir
        )));
    }
    let m = min_assimilation_level(levels);
    let want = (levels - m + 1) as usize;
    if cube.frequencies.len() != want {
        return Err(NetError::Input(format!(
            "cube has {} frequencies, network expects {want}",
            cube.frequencies.len()
        )));
    }
    let mut out = Vec::with_capacity(want);
    for (i, freq) in cube.frequencies.iter().enumerate() {
        let level = m + i as u32;
        if freq.level != level {
            return Err(NetError::Input(format!(
                "cube frequency {i} is tagged level {}, expected {level}",
                freq.level
            )));
        }
        let slice = cube.slice(i);
        let mut planes = vec![T::zero(); n * n * 2];
        for (j, z) in slice.iter().enumerate() {
            planes[2 * j] = T::from_f64(z.re);
            planes[2 * j + 1] = T::from_f64(z.im);
        }
        let t = tensorize(&planes, levels, leaf, level, 2)
            .map_err(|e| NetError::Input(e.to_string()))?;
        out.push(t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Frequency;
    use crate::nn::gradcheck::central_diff_check;
    use crate::nn::params::init_params;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_inputs<T: Scalar>(net: &WideBNet, seed: u64) -> Vec<Tensor3<T>> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let cfg = &net.config;
        let m = cfg.min_level();
        (m..=cfg.levels)
            .map(|level| {
                let side = 1usize << level;
                let c = cfg.input_channels(level);
                let data: Vec<T> = (0..side * side * c)
                    .map(|_| T::from_f64(rng.random_range(-1.0..1.0)))
                    .collect();
                Tensor3::from_data(side, side, c, data).unwrap()
            })
            .collect()
    }

    #[test]
    fn validate_rejects_odd_depth_with_unaligned_rank() {
        let bad = NetworkConfig::new(3, 4, 6, Variant::Wide);
        assert!(bad.validate().is_err());
        let good = NetworkConfig::new(3, 4, 4, Variant::Wide);
        assert!(good.validate().is_ok());
    }

    #[test]
    fn parameter_counts_match_registry_and_frozen_values() {
        let cases = [
            (NetworkConfig::new(3, 4, 4, Variant::Wide), 46_625),
            (NetworkConfig::new(3, 4, 4, Variant::Narrow), 37_345),
            (NetworkConfig::new(3, 4, 4, Variant::Switchless), 46_625),
            (NetworkConfig::new(2, 5, 4, Variant::Wide), 16_193),
            (NetworkConfig::new(4, 5, 4, Variant::Wide), 564_769),
            (NetworkConfig::new(6, 5, 4, Variant::Wide), 27_749_601),
        ];
        for (cfg, want) in cases {
            let net = WideBNet::new(cfg).unwrap();
            assert_eq!(net.param_count(), want, "registry for {:?}", cfg.variant);
            assert_eq!(param_count(&cfg), want, "closed form for {:?}", cfg.variant);
        }
    }

    #[test]
    fn doubling_rank_doubles_embeddings_exactly() {
        let a = WideBNet::new(NetworkConfig::new(3, 4, 4, Variant::Wide)).unwrap();
        let b = WideBNet::new(NetworkConfig::new(3, 4, 8, Variant::Wide)).unwrap();
        let sum = |net: &WideBNet, prefix: &str| -> usize {
            net.registry
                .entries
                .iter()
                .filter(|e| e.name.starts_with(prefix) && e.name[1..2].parse::<u32>().is_ok())
                .map(|e| e.len)
                .sum()
        };
        assert_eq!(sum(&b, "v"), 2 * sum(&a, "v"));
        assert!(sum(&b, "h") > 2 * sum(&a, "h"));
    }

    #[test]
    fn forward_output_has_image_shape_and_is_deterministic() {
        let cfg = NetworkConfig::new(3, 4, 4, Variant::Wide);
        let net = WideBNet::new(cfg).unwrap();
        let params: Vec<f32> = init_params(&net.registry, 5);
        let inputs = random_inputs::<f32>(&net, 6);
        let out1 = net.forward(&params, &inputs);
        let out2 = net.forward(&params, &inputs);
        assert_eq!(out1.len(), 32 * 32);
        assert_eq!(out1, out2);
        assert!(out1.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn switch_changes_the_output() {
        let wide = WideBNet::new(NetworkConfig::new(3, 4, 4, Variant::Wide)).unwrap();
        let less = WideBNet::new(NetworkConfig::new(3, 4, 4, Variant::Switchless)).unwrap();
        // Same registry layout, so the same seed gives identical parameters.
        let params: Vec<f32> = init_params(&wide.registry, 5);
        let inputs = random_inputs::<f32>(&wide, 6);
        let a = wide.forward(&params, &inputs);
        let b = less.forward(&params, &inputs);
        assert_ne!(a, b);
    }

    #[test]
    fn wide_with_zeroed_extras_reproduces_narrow() {
        let cfg_w = NetworkConfig::new(3, 4, 4, Variant::Wide);
        let cfg_n = NetworkConfig::new(3, 4, 4, Variant::Narrow);
        let wide = WideBNet::new(cfg_w).unwrap();
        let narrow = WideBNet::new(cfg_n).unwrap();
        let p_narrow: Vec<f32> = init_params(&narrow.registry, 9);
        let mut p_wide: Vec<f32> = vec![0.0; wide.param_count()];

        // Transplant every narrow block into the wide layout by name. The
        // only shape mismatch is the downsweep weight, whose wide version has
        // `rank` extra input columns; those stay zero, as do the extra
        // embeddings, so the wide network computes exactly the narrow map.
        for spec_n in &narrow.registry.entries {
            let spec_w = wide.registry.by_name(&spec_n.name).unwrap();
            if spec_n.shape == spec_w.shape {
                p_wide[spec_w.offset..spec_w.offset + spec_w.len]
                    .copy_from_slice(&p_narrow[spec_n.offset..spec_n.offset + spec_n.len]);
            } else {
                // [cells, cells, c_out, c_in]: copy row by row.
                let c_in_n = *spec_n.shape.last().unwrap();
                let c_in_w = *spec_w.shape.last().unwrap();
                assert!(c_in_w > c_in_n);
                let rows = spec_n.len / c_in_n;
                for row in 0..rows {
                    let src = spec_n.offset + row * c_in_n;
                    let dst = spec_w.offset + row * c_in_w;
                    p_wide[dst..dst + c_in_n].copy_from_slice(&p_narrow[src..src + c_in_n]);
                }
            }
        }

        let inputs = random_inputs::<f32>(&wide, 14);
        let out_w = wide.forward(&p_wide, &inputs);
        let out_n = narrow.forward(&p_narrow, &inputs);
        assert_eq!(out_w, out_n);
    }

    #[test]
    fn format_inputs_places_entries_at_their_levels() {
        // n = 4, L = 2, s = 1: levels 1 and 2 assimilated.
        let n = 4;
        let freqs = vec![
            Frequency {
                hertz: 1.0,
                level: 1,
            },
            Frequency {
                hertz: 2.0,
                level: 2,
            },
        ];
        let mut slices = Vec::new();
        for fi in 0..2 {
            let slice: Vec<Complex64> = (0..n * n)
                .map(|j| Complex64::new((100 * fi + j) as f64, -((100 * fi + j) as f64)))
                .collect();
            slices.push(slice);
        }
        let cube = FarFieldCube::new(n, freqs, slices, 2).unwrap();
        let inputs = format_inputs::<f64>(&cube, 2, 1).unwrap();

        // Level 2: 4x4 cells, 2 channels; cell (r, c) holds entry r*4+c.
        assert_eq!(
            (inputs[1].rows, inputs[1].cols, inputs[1].channels),
            (4, 4, 2)
        );
        assert_eq!(inputs[1].cell(1, 2), &[106.0, -106.0]);
        // Level 1: 2x2 cells, 2x2 pixel blocks, 8 channels ordered
        // (pixel-row, pixel-col, re/im).
        assert_eq!(
            (inputs[0].rows, inputs[0].cols, inputs[0].channels),
            (2, 2, 8)
        );
        // Slice 0 belongs to level 1, so its entries carry no offset.
        assert_eq!(
            inputs[0].cell(0, 1),
            &[2.0, -2.0, 3.0, -3.0, 6.0, -6.0, 7.0, -7.0]
        );
    }

    #[test]
    fn whole_network_gradients_pass_central_differences() {
        // Tiny f64 network: L = 2, s = 1, r = 4 (n = 4), all variants.
        for variant in [Variant::Wide, Variant::Narrow, Variant::Switchless] {
            let cfg = NetworkConfig::new(2, 1, 4, variant);
            let net = WideBNet::new(cfg).unwrap();

            // Draw parameters and inputs, re-drawing until every relu
            // preactivation clears a margin so finite differences never
            // cross a kink.
            let mut seed = 100;
            let (params, inputs) = loop {
                let params: Vec<f64> = init_params(&net.registry, seed);
                // Biases are zero-initialized, which parks relu inputs near
                // the kink; nudge them off zero deterministically.
                let mut params = params;
                let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xb1a5);
                for spec in &net.registry.entries {
                    if spec.name.ends_with(".bias") {
                        for v in &mut params[spec.offset..spec.offset + spec.len] {
                            *v = rng.random_range(-0.05..0.05);
                        }
                    }
                }
                let inputs = random_inputs::<f64>(&net, seed ^ 0xdead);
                let cache = net.forward_train(&params, &inputs);
                if min_relu_preact(&net, &cache) > 1e-3 {
                    break (params, inputs);
                }
                seed += 1;
            };

            let target: Vec<f64> = {
                let mut rng = ChaCha20Rng::seed_from_u64(77);
                (0..16).map(|_| rng.random_range(-0.5..0.5)).collect()
            };

            let cache = net.forward_train(&params, &inputs);
            let d_out: Vec<f64> = cache
                .output
                .iter()
                .zip(&target)
                .map(|(p, t)| 2.0 * (p - t))
                .collect();
            let mut dparams = vec![0.0; net.param_count()];
            net.backward(&params, &inputs, &cache, &d_out, &mut dparams);

            let mut theta = params.clone();
            let rep = central_diff_check(
                &mut theta,
                &dparams,
                |t| {
                    let out = net.forward(t, &inputs);
                    out.iter()
                        .zip(&target)
                        .map(|(p, tg)| (p - tg) * (p - tg))
                        .sum()
                },
                31,
                200,
                1e-6,
            );
            assert!(
                rep.max_rel_err < 1e-5,
                "{:?}: rel err {} at {}",
                variant,
                rep.max_rel_err,
                rep.worst_index
            );
        }
    }
}
