//! On-disk dataset container: a text manifest plus checksummed binary blobs.
//!
//! A dataset directory holds:
//! - `manifest.txt` — key-value text describing the grid, medium family,
//!   seed range, solver stencil order, frequency list, and sample count;
//! - `eta.f32` — ground-truth images, rank-3 `(count, n, n)`, f32;
//! - `data.c64` — clean scattering data, rank-4 `(count, n_freq, n_dir,
//!   n_dir)`, complex128.
//!
//! Every blob is framed as: magic `WBDS`, format version (u16 LE), element
//! type (u8: 0 = f32, 1 = complex128), rank (u8), dimensions (u64 LE each),
//! row-major little-endian payload, then a CRC-32 of all preceding bytes.
//! Readers verify the checksum before trusting any header field. Writers
//! are fully deterministic: identical inputs produce identical bytes.

use std::path::Path;
use std::sync::OnceLock;

use num_complex::Complex64;
use waveband_core::field::FarFieldCube;
use waveband_core::grid::{Frequency, GridSpec};

use crate::config::{CliError, Config};

pub const BLOB_MAGIC: &[u8; 4] = b"WBDS";
pub const BLOB_VERSION: u16 = 1;

// ---------------------------------------------------------------------------
// CRC-32 (IEEE 802.3, reflected polynomial 0xEDB88320), table-driven.
// ---------------------------------------------------------------------------

fn crc_table() -> &'static [u32; 256] {
    static TABLE: OnceLock<[u32; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [0u32; 256];
        for (i, entry) in table.iter_mut().enumerate() {
            let mut c = i as u32;
            for _ in 0..8 {
                c = if c & 1 != 0 { 0xEDB8_8320 ^ (c >> 1) } else { c >> 1 };
            }
            *entry = c;
        }
        table
    })
}

/// CRC-32 checksum of a byte slice.
pub fn crc32(bytes: &[u8]) -> u32 {
    let table = crc_table();
    let mut c = 0xFFFF_FFFFu32;
    for &b in bytes {
        c = table[((c ^ b as u32) & 0xFF) as usize] ^ (c >> 8);
    }
    !c
}

// ---------------------------------------------------------------------------
// Blob framing
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub enum BlobData {
    F32(Vec<f32>),
    C64(Vec<Complex64>),
}

impl BlobData {
    pub fn len(&self) -> usize {
        match self {
            BlobData::F32(v) => v.len(),
            BlobData::C64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dtype_code(&self) -> u8 {
        match self {
            BlobData::F32(_) => 0,
            BlobData::C64(_) => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Blob {
    pub dims: Vec<u64>,
    pub data: BlobData,
}

impl Blob {
    pub fn new(dims: Vec<u64>, data: BlobData) -> Result<Self, CliError> {
        let want: u64 = dims.iter().product();
        if want != data.len() as u64 {
            return Err(CliError::Data(format!(
                "blob dims {:?} imply {want} elements, payload has {}",
                dims,
                data.len()
            )));
        }
        Ok(Blob { dims, data })
    }
}

/// Serialize a blob to its framed byte representation.
pub fn blob_to_bytes(blob: &Blob) -> Vec<u8> {
    let elem_bytes = match blob.data {
        BlobData::F32(_) => 4,
        BlobData::C64(_) => 16,
    };
    let mut out =
        Vec::with_capacity(4 + 2 + 1 + 1 + 8 * blob.dims.len() + elem_bytes * blob.data.len() + 4);
    out.extend_from_slice(BLOB_MAGIC);
    out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
    out.push(blob.data.dtype_code());
    out.push(blob.dims.len() as u8);
    for &d in &blob.dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    match &blob.data {
        BlobData::F32(v) => {
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        BlobData::C64(v) => {
            for z in v {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
    }
    let crc = crc32(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Parse a framed blob, verifying the trailing checksum before reading any
/// header field.
pub fn blob_from_bytes(bytes: &[u8]) -> Result<Blob, CliError> {
    if bytes.len() < 4 + 2 + 1 + 1 + 4 {
        return Err(CliError::Data("blob truncated: shorter than header".into()));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().expect("4-byte trailer"));
    let actual = crc32(body);
    if stored != actual {
        return Err(CliError::Data(format!(
            "blob checksum mismatch: stored {stored:#010x}, computed {actual:#010x}"
        )));
    }
    if &body[0..4] != BLOB_MAGIC {
        return Err(CliError::Data("blob magic mismatch: not a WBDS blob".into()));
    }
    let version = u16::from_le_bytes(body[4..6].try_into().expect("2 bytes"));
    if version != BLOB_VERSION {
        return Err(CliError::Data(format!(
            "unsupported blob version {version}, this build reads version {BLOB_VERSION}"
        )));
    }
    let dtype = body[6];
    let rank = body[7] as usize;
    let mut pos = 8;
    if body.len() < pos + 8 * rank {
        return Err(CliError::Data("blob truncated in dimension list".into()));
    }
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        dims.push(u64::from_le_bytes(
            body[pos..pos + 8].try_into().expect("8 bytes"),
        ));
        pos += 8;
    }
    let count: u64 = dims.iter().product();
    let elem = match dtype {
        0 => 4usize,
        1 => 16usize,
        other => {
            return Err(CliError::Data(format!("unknown blob element type {other}")));
        }
    };
    let need = count as usize * elem;
    if body.len() - pos != need {
        return Err(CliError::Data(format!(
            "blob payload is {} bytes, dims {:?} require {need}",
            body.len() - pos,
            dims
        )));
    }
    let data = match dtype {
        0 => {
            let mut v = Vec::with_capacity(count as usize);
            for chunk in body[pos..].chunks_exact(4) {
                v.push(f32::from_le_bytes(chunk.try_into().expect("4 bytes")));
            }
            BlobData::F32(v)
        }
        _ => {
            let mut v = Vec::with_capacity(count as usize);
            for chunk in body[pos..].chunks_exact(16) {
                let re = f64::from_le_bytes(chunk[0..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(chunk[8..16].try_into().expect("8 bytes"));
                v.push(Complex64::new(re, im));
            }
            BlobData::C64(v)
        }
    };
    Ok(Blob { dims, data })
}

pub fn write_blob(path: &Path, blob: &Blob) -> Result<(), CliError> {
    std::fs::write(path, blob_to_bytes(blob))
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

pub fn read_blob(path: &Path) -> Result<Blob, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    blob_from_bytes(&bytes).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

// ---------------------------------------------------------------------------
// Dataset container
// ---------------------------------------------------------------------------

/// In-memory dataset: ground-truth images and the clean scattering data
/// produced from them, plus enough metadata to regenerate or validate.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub grid: GridSpec,
    pub family: String,
    /// Base of the contiguous seed range; sample `i` used `seed_base + i`.
    pub seed_base: u64,
    pub stencil_order: u8,
    /// Ground-truth images, one `n*n` row-major slice per sample.
    pub etas: Vec<Vec<f32>>,
    /// Clean scattering data, one cube per sample.
    pub cubes: Vec<FarFieldCube>,
}

impl Dataset {
    pub fn count(&self) -> usize {
        self.etas.len()
    }
}

fn format_float(v: f64) -> String {
    // Shortest round-trip representation keeps manifests deterministic.
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

fn manifest_text(ds: &Dataset) -> String {
    let g = &ds.grid;
    let freq_list: Vec<String> = g
        .frequencies
        .iter()
        .map(|f| format!("{}:{}", f.level, format_float(f.hertz)))
        .collect();
    let mut s = String::new();
    s.push_str("format = wbds-dataset\n");
    s.push_str(&format!("version = {BLOB_VERSION}\n"));
    s.push_str(&format!("count = {}\n", ds.count()));
    s.push_str(&format!("family = {}\n", ds.family));
    s.push_str(&format!(
        "seeds = {}..{}\n",
        ds.seed_base,
        ds.seed_base + ds.count() as u64
    ));
    s.push_str(&format!("stencil_order = {}\n", ds.stencil_order));
    s.push_str(&format!("n = {}\n", g.n));
    s.push_str(&format!("levels = {}\n", g.levels));
    s.push_str(&format!("leaf = {}\n", g.leaf));
    s.push_str(&format!("domain_min = {}\n", format_float(g.domain_min)));
    s.push_str(&format!("domain_max = {}\n", format_float(g.domain_max)));
    s.push_str(&format!("frequencies = {}\n", freq_list.join(", ")));
    s
}

/// Write `manifest.txt`, `eta.f32`, and `data.c64` into `dir` (created if
/// needed). Deterministic: equal datasets produce byte-identical files.
pub fn save_dataset(dir: &Path, ds: &Dataset) -> Result<(), CliError> {
    let n = ds.grid.n as u64;
    let nf = ds.grid.frequencies.len() as u64;
    let count = ds.count() as u64;
    if ds.cubes.len() != ds.etas.len() {
        return Err(CliError::Data(format!(
            "{} images but {} data cubes",
            ds.etas.len(),
            ds.cubes.len()
        )));
    }
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;

    let mut eta_flat = Vec::with_capacity((count * n * n) as usize);
    for (i, img) in ds.etas.iter().enumerate() {
        if img.len() != (n * n) as usize {
            return Err(CliError::Data(format!(
                "image {i} has {} pixels, grid implies {}",
                img.len(),
                n * n
            )));
        }
        eta_flat.extend_from_slice(img);
    }
    let mut data_flat = Vec::with_capacity((count * nf * n * n) as usize);
    for (i, cube) in ds.cubes.iter().enumerate() {
        if cube.n_dir != ds.grid.n || cube.frequencies.len() != nf as usize {
            return Err(CliError::Data(format!(
                "cube {i} shape ({} directions, {} frequencies) does not match grid",
                cube.n_dir,
                cube.frequencies.len()
            )));
        }
        for slice in &cube.slices {
            data_flat.extend_from_slice(slice);
        }
    }

    std::fs::write(dir.join("manifest.txt"), manifest_text(ds))
        .map_err(|e| CliError::Data(format!("cannot write manifest: {e}")))?;
    write_blob(
        &dir.join("eta.f32"),
        &Blob::new(vec![count, n, n], BlobData::F32(eta_flat))?,
    )?;
    write_blob(
        &dir.join("data.c64"),
        &Blob::new(vec![count, nf, n, n], BlobData::C64(data_flat))?,
    )?;
    Ok(())
}

fn parse_seed_range(s: &str) -> Result<(u64, u64), CliError> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| CliError::Data(format!("manifest seeds {s:?}: expected start..end")))?;
    let lo = a
        .trim()
        .parse::<u64>()
        .map_err(|e| CliError::Data(format!("manifest seed start {a:?}: {e}")))?;
    let hi = b
        .trim()
        .parse::<u64>()
        .map_err(|e| CliError::Data(format!("manifest seed end {b:?}: {e}")))?;
    Ok((lo, hi))
}

/// Load a dataset directory, verifying checksums and that blob shapes match
/// the manifest.
pub fn load_dataset(dir: &Path) -> Result<Dataset, CliError> {
    let manifest = Config::load(&dir.join("manifest.txt"))?;
    if manifest.str_or("format", "") != "wbds-dataset" {
        return Err(CliError::Data(format!(
            "{}: manifest.txt is not a dataset manifest",
            dir.display()
        )));
    }
    let version = manifest.u64_or("version", 0).map_err(data_err)?;
    if version != BLOB_VERSION as u64 {
        return Err(CliError::Data(format!(
            "unsupported dataset version {version}, this build reads version {BLOB_VERSION}"
        )));
    }
    let count = manifest.usize_or("count", 0).map_err(data_err)?;
    let n = manifest.usize_or("n", 0).map_err(data_err)?;
    let levels = manifest.u32_or("levels", 0).map_err(data_err)?;
    let leaf = manifest.usize_or("leaf", 0).map_err(data_err)?;
    let stencil_order = manifest.u64_or("stencil_order", 0).map_err(data_err)? as u8;
    let family = manifest.str_or("family", "");
    let (seed_base, seed_end) = parse_seed_range(&manifest.str_or("seeds", ""))?;
    if seed_end - seed_base != count as u64 {
        return Err(CliError::Data(format!(
            "manifest seed range {seed_base}..{seed_end} does not cover count {count}"
        )));
    }
    let domain_min = manifest.f64_or("domain_min", -0.5).map_err(data_err)?;
    let domain_max = manifest.f64_or("domain_max", 0.5).map_err(data_err)?;
    let mut frequencies = Vec::new();
    for tok in manifest.str_or("frequencies", "").split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        let (lvl, hz) = tok
            .split_once(':')
            .ok_or_else(|| CliError::Data(format!("manifest frequency {tok:?}: want level:hertz")))?;
        frequencies.push(Frequency {
            level: lvl
                .trim()
                .parse()
                .map_err(|e| CliError::Data(format!("frequency level {lvl:?}: {e}")))?,
            hertz: hz
                .trim()
                .parse()
                .map_err(|e| CliError::Data(format!("frequency value {hz:?}: {e}")))?,
        });
    }
    let grid = GridSpec::new(domain_min, domain_max, n, levels, leaf, frequencies.clone())
        .map_err(|e| CliError::Data(format!("manifest grid is inconsistent: {e:?}")))?;

    let eta_blob = read_blob(&dir.join("eta.f32"))?;
    let data_blob = read_blob(&dir.join("data.c64"))?;
    let nf = frequencies.len() as u64;
    if eta_blob.dims != vec![count as u64, n as u64, n as u64] {
        return Err(CliError::Data(format!(
            "eta blob dims {:?} do not match manifest (count {count}, n {n})",
            eta_blob.dims
        )));
    }
    if data_blob.dims != vec![count as u64, nf, n as u64, n as u64] {
        return Err(CliError::Data(format!(
            "data blob dims {:?} do not match manifest (count {count}, {nf} frequencies, n {n})",
            data_blob.dims
        )));
    }
    let eta_flat = match eta_blob.data {
        BlobData::F32(v) => v,
        _ => return Err(CliError::Data("eta blob must hold f32 elements".into())),
    };
    let data_flat = match data_blob.data {
        BlobData::C64(v) => v,
        _ => {
            return Err(CliError::Data(
                "data blob must hold complex128 elements".into(),
            ))
        }
    };

    let np = n * n;
    let etas: Vec<Vec<f32>> = (0..count)
        .map(|i| eta_flat[i * np..(i + 1) * np].to_vec())
        .collect();
    let per_cube = nf as usize * np;
    let cubes = (0..count)
        .map(|i| {
            let chunk = &data_flat[i * per_cube..(i + 1) * per_cube];
            let slices: Vec<Vec<Complex64>> = (0..nf as usize)
                .map(|fi| chunk[fi * np..(fi + 1) * np].to_vec())
                .collect();
            FarFieldCube::new(n, frequencies.clone(), slices, stencil_order)
                .map_err(|e| CliError::Data(format!("cube {i}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(Dataset {
        grid,
        family,
        seed_base,
        stencil_order,
        etas,
        cubes,
    })
}

fn data_err(e: CliError) -> CliError {
    match e {
        CliError::Config(m) => CliError::Data(format!("manifest: {m}")),
        other => other,
    }
}
