//! Trained-model checkpoints: network configuration, normalization
//! statistics, parameter payload, and (optionally) optimizer state.
//!
//! Binary layout, all little-endian, with a trailing CRC-32 over every
//! preceding byte: magic `WBCK`, version u16, config echo (length-prefixed
//! UTF-8), network fields, per-frequency statistics, a parameter-registry
//! echo (name and shape per parameter, used to cross-check against the
//! registry rebuilt from the configuration on load), the f32 parameter
//! payload, optional first/second-moment accumulators, and the completed
//! optimizer step count (which also positions the learning-rate schedule).

use std::path::Path;

use waveband_core::grid::{Frequency, GridSpec};
use waveband_core::net::{NetworkConfig, Variant, WideBNet};

use crate::config::CliError;
use crate::dataset::crc32;
use crate::stats::NormalizationStats;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"WBCK";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    /// Verbatim text of the configuration the run was launched with.
    pub config_echo: String,
    pub net: NetworkConfig,
    /// Acquisition grid the model was trained on; makes the checkpoint
    /// self-contained for inference and for simulating fresh probe media.
    pub grid: GridSpec,
    pub stats: NormalizationStats,
    /// Parameters in registry order.
    pub params: Vec<f32>,
    /// Adam first/second moments, when training is meant to be resumable.
    pub opt: Option<(Vec<f32>, Vec<f32>)>,
    /// Completed optimizer steps; also drives the learning-rate staircase.
    pub step: u64,
}

fn push_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn push_f32s(out: &mut Vec<u8>, v: &[f32]) {
    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        if self.pos + n > self.bytes.len() {
            return Err(CliError::Data("checkpoint truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CliError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CliError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2")))
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4")))
    }

    fn u64(&mut self) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8")))
    }

    fn f64(&mut self) -> Result<f64, CliError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8")))
    }

    fn string(&mut self) -> Result<String, CliError> {
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec())
            .map_err(|e| CliError::Data(format!("checkpoint holds invalid text: {e}")))
    }

    fn f32s(&mut self) -> Result<Vec<f32>, CliError> {
        let len = self.u64()? as usize;
        let raw = self.take(len * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4")))
            .collect())
    }
}

pub fn checkpoint_to_bytes(ck: &Checkpoint) -> Result<Vec<u8>, CliError> {
    let net = WideBNet::new(ck.net.clone())
        .map_err(|e| CliError::Config(format!("checkpoint configuration is invalid: {e}")))?;
    if ck.params.len() != net.param_count() {
        return Err(CliError::Data(format!(
            "checkpoint holds {} parameters, configuration requires {}",
            ck.params.len(),
            net.param_count()
        )));
    }
    if let Some((m, v)) = &ck.opt {
        if m.len() != ck.params.len() || v.len() != ck.params.len() {
            return Err(CliError::Data(
                "optimizer state length does not match parameter count".into(),
            ));
        }
    }
    if ck.stats.mean.len() != ck.stats.std.len() {
        return Err(CliError::Data("statistics mean/std length mismatch".into()));
    }
    if ck.grid.n != ck.net.n() || ck.grid.levels != ck.net.levels || ck.grid.leaf != ck.net.leaf {
        return Err(CliError::Data(format!(
            "grid ({}x{}, {} levels, leaf {}) does not match network ({}x{}, {} levels, leaf {})",
            ck.grid.n,
            ck.grid.n,
            ck.grid.levels,
            ck.grid.leaf,
            ck.net.n(),
            ck.net.n(),
            ck.net.levels,
            ck.net.leaf
        )));
    }
    if ck.grid.frequencies.len() != ck.stats.mean.len() {
        return Err(CliError::Data(format!(
            "grid carries {} frequencies but statistics cover {}",
            ck.grid.frequencies.len(),
            ck.stats.mean.len()
        )));
    }

    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    push_str(&mut out, &ck.config_echo);
    out.extend_from_slice(&ck.net.levels.to_le_bytes());
    out.extend_from_slice(&(ck.net.leaf as u64).to_le_bytes());
    out.extend_from_slice(&(ck.net.rank as u64).to_le_bytes());
    push_str(&mut out, ck.net.variant.name());
    out.extend_from_slice(&(ck.net.n_cnn as u64).to_le_bytes());
    out.extend_from_slice(&(ck.net.n_rnn as u64).to_le_bytes());
    out.extend_from_slice(&(ck.net.conv_kernel as u64).to_le_bytes());
    out.extend_from_slice(&(ck.net.conv_hidden as u64).to_le_bytes());
    out.extend_from_slice(&ck.grid.domain_min.to_le_bytes());
    out.extend_from_slice(&ck.grid.domain_max.to_le_bytes());
    out.extend_from_slice(&(ck.grid.frequencies.len() as u64).to_le_bytes());
    for f in &ck.grid.frequencies {
        out.extend_from_slice(&f.level.to_le_bytes());
        out.extend_from_slice(&f.hertz.to_le_bytes());
    }
    out.extend_from_slice(&(ck.stats.mean.len() as u64).to_le_bytes());
    for &m in &ck.stats.mean {
        out.extend_from_slice(&m.to_le_bytes());
    }
    for &s in &ck.stats.std {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out.extend_from_slice(&(net.registry.entries.len() as u64).to_le_bytes());
    for spec in &net.registry.entries {
        push_str(&mut out, &spec.name);
        out.push(spec.shape.len() as u8);
        for &d in &spec.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
    }
    push_f32s(&mut out, &ck.params);
    match &ck.opt {
        None => out.push(0),
        Some((m, v)) => {
            out.push(1);
            push_f32s(&mut out, m);
            push_f32s(&mut out, v);
        }
    }
    out.extend_from_slice(&ck.step.to_le_bytes());
    let crc = crc32(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Checkpoint, CliError> {
    if bytes.len() < 11 {
        return Err(CliError::Data("checkpoint truncated".into()));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().expect("4-byte trailer"));
    let actual = crc32(body);
    if stored != actual {
        return Err(CliError::Data(format!(
            "checkpoint checksum mismatch: stored {stored:#010x}, computed {actual:#010x}"
        )));
    }
    let mut r = Reader { bytes: body, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(CliError::Data("not a checkpoint file".into()));
    }
    let version = r.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(CliError::Data(format!(
            "unsupported checkpoint version {version}, this build reads version {CHECKPOINT_VERSION}"
        )));
    }
    let config_echo = r.string()?;
    let levels = r.u32()?;
    let leaf = r.u64()? as usize;
    let rank = r.u64()? as usize;
    let variant_name = r.string()?;
    let variant = Variant::parse(&variant_name)
        .ok_or_else(|| CliError::Data(format!("unknown model variant {variant_name:?}")))?;
    let n_cnn = r.u64()? as usize;
    let n_rnn = r.u64()? as usize;
    let conv_kernel = r.u64()? as usize;
    let conv_hidden = r.u64()? as usize;
    let net_cfg = NetworkConfig {
        levels,
        leaf,
        rank,
        variant,
        n_cnn,
        n_rnn,
        conv_kernel,
        conv_hidden,
    };
    let domain_min = r.f64()?;
    let domain_max = r.f64()?;
    let n_grid_freq = r.u64()? as usize;
    let mut frequencies = Vec::with_capacity(n_grid_freq);
    for _ in 0..n_grid_freq {
        let level = r.u32()?;
        let hertz = r.f64()?;
        frequencies.push(Frequency { hertz, level });
    }
    let grid = GridSpec::new(domain_min, domain_max, net_cfg.n(), levels, leaf, frequencies)
        .map_err(|e| CliError::Data(format!("checkpoint grid is invalid: {e}")))?;
    let nf = r.u64()? as usize;
    let mut mean = Vec::with_capacity(nf);
    for _ in 0..nf {
        mean.push(r.f64()?);
    }
    let mut std = Vec::with_capacity(nf);
    for _ in 0..nf {
        std.push(r.f64()?);
    }
    let stats = NormalizationStats { mean, std };
    if grid.frequencies.len() != stats.mean.len() {
        return Err(CliError::Data(format!(
            "checkpoint grid carries {} frequencies but statistics cover {}",
            grid.frequencies.len(),
            stats.mean.len()
        )));
    }

    let net = WideBNet::new(net_cfg.clone())
        .map_err(|e| CliError::Data(format!("checkpoint configuration is invalid: {e}")))?;
    let nspec = r.u64()? as usize;
    if nspec != net.registry.entries.len() {
        return Err(CliError::Data(format!(
            "checkpoint lists {nspec} parameters, configuration builds {}",
            net.registry.entries.len()
        )));
    }
    for spec in &net.registry.entries {
        let name = r.string()?;
        let rank = r.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        if name != spec.name || shape != spec.shape {
            return Err(CliError::Data(format!(
                "checkpoint parameter {name:?} {shape:?} does not match registry entry {:?} {:?}",
                spec.name, spec.shape
            )));
        }
    }
    let params = r.f32s()?;
    if params.len() != net.param_count() {
        return Err(CliError::Data(format!(
            "checkpoint payload holds {} parameters, registry requires {}",
            params.len(),
            net.param_count()
        )));
    }
    let opt = match r.u8()? {
        0 => None,
        1 => {
            let m = r.f32s()?;
            let v = r.f32s()?;
            if m.len() != params.len() || v.len() != params.len() {
                return Err(CliError::Data(
                    "optimizer state length does not match parameter count".into(),
                ));
            }
            Some((m, v))
        }
        other => {
            return Err(CliError::Data(format!(
                "bad optimizer-state flag {other} in checkpoint"
            )))
        }
    };
    let step = r.u64()?;
    if r.pos != body.len() {
        return Err(CliError::Data(format!(
            "checkpoint has {} trailing bytes",
            body.len() - r.pos
        )));
    }
    Ok(Checkpoint {
        config_echo,
        net: net_cfg,
        grid,
        stats,
        params,
        opt,
        step,
    })
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), CliError> {
    let bytes = checkpoint_to_bytes(ck)?;
    std::fs::write(path, bytes)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    checkpoint_from_bytes(&bytes).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use waveband_core::nn::params::init_params;

    fn sample(with_opt: bool) -> Checkpoint {
        let cfg = NetworkConfig::new(2, 2, 2, Variant::Wide);
        let net = WideBNet::new(cfg.clone()).unwrap();
        let params: Vec<f32> = init_params(&net.registry, 11);
        let opt = with_opt.then(|| {
            let m: Vec<f32> = params.iter().map(|p| p * 0.125).collect();
            let v: Vec<f32> = params.iter().map(|p| p * p).collect();
            (m, v)
        });
        Checkpoint {
            config_echo: "[net]\nlevels = 2\nvariant = wide\n".into(),
            net: cfg,
            grid: GridSpec::with_standard_band(8, 2, 2, 2.0).unwrap(),
            stats: NormalizationStats {
                mean: vec![0.25, -1.5],
                std: vec![2.0, 0.125],
            },
            params,
            opt,
            step: 4321,
        }
    }

    fn bits(v: &[f32]) -> Vec<u32> {
        v.iter().map(|x| x.to_bits()).collect()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for with_opt in [false, true] {
            let ck = sample(with_opt);
            let bytes = checkpoint_to_bytes(&ck).unwrap();
            let back = checkpoint_from_bytes(&bytes).unwrap();
            assert_eq!(back.config_echo, ck.config_echo);
            assert_eq!(back.net, ck.net);
            assert_eq!(back.grid, ck.grid);
            assert_eq!(back.stats, ck.stats);
            assert_eq!(bits(&back.params), bits(&ck.params));
            assert_eq!(back.step, ck.step);
            match (&back.opt, &ck.opt) {
                (None, None) => {}
                (Some((bm, bv)), Some((m, v))) => {
                    assert_eq!(bits(bm), bits(m));
                    assert_eq!(bits(bv), bits(v));
                }
                other => panic!("optimizer state mismatch: {other:?}"),
            }
            // Second serialization reproduces the bytes exactly.
            assert_eq!(checkpoint_to_bytes(&back).unwrap(), bytes);
        }
    }

    #[test]
    fn file_round_trip_and_corruption_detection() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.wbck");
        let ck = sample(true);
        save_checkpoint(&path, &ck).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(bits(&back.params), bits(&ck.params));
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 3;
        bytes[mid] ^= 0x10;
        std::fs::write(&path, &bytes).unwrap();
        match load_checkpoint(&path) {
            Err(CliError::Data(msg)) => assert!(msg.contains("checksum"), "{msg}"),
            other => panic!("corruption not caught: {other:?}"),
        }
    }

    #[test]
    fn future_versions_are_rejected() {
        let ck = sample(false);
        let mut bytes = checkpoint_to_bytes(&ck).unwrap();
        let v = CHECKPOINT_VERSION + 1;
        bytes[4..6].copy_from_slice(&v.to_le_bytes());
        let crc = crc32(&bytes[..bytes.len() - 4]);
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        match checkpoint_from_bytes(&bytes) {
            Err(CliError::Data(msg)) => assert!(msg.contains("version"), "{msg}"),
            other => panic!("future version accepted: {other:?}"),
        }
    }

    #[test]
    fn wrong_parameter_count_is_rejected() {
        let mut ck = sample(false);
        ck.params.pop();
        assert!(matches!(checkpoint_to_bytes(&ck), Err(CliError::Data(_))));
    }
}
