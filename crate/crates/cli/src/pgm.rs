//! Grayscale image emission: binary PGM always, PNG behind a feature flag.
//!
//! Pixel values are mapped linearly onto 0..=255 using the image's own
//! min/max unless a fixed range is supplied, in which case values outside
//! the range clip to its ends. A constant image maps to mid-gray.

use std::path::Path;

use crate::config::CliError;

/// Quantize a row-major image to 8-bit gray levels.
pub fn to_gray(img: &[f64], range: Option<(f64, f64)>) -> Vec<u8> {
    let (lo, hi) = match range {
        Some((lo, hi)) => (lo, hi),
        None => {
            let lo = img.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = img.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        }
    };
    if !(hi > lo) {
        return vec![128u8; img.len()];
    }
    let scale = 255.0 / (hi - lo);
    img.iter()
        .map(|&v| ((v - lo) * scale).round().clamp(0.0, 255.0) as u8)
        .collect()
}

/// Write a binary (P5) PGM file.
pub fn write_pgm(
    path: &Path,
    img: &[f64],
    cols: usize,
    rows: usize,
    range: Option<(f64, f64)>,
) -> Result<(), CliError> {
    if img.len() != cols * rows {
        return Err(CliError::Data(format!(
            "image has {} pixels, dimensions are {cols}x{rows}",
            img.len()
        )));
    }
    let gray = to_gray(img, range);
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend_from_slice(&gray);
    std::fs::write(path, out)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// Read a binary (P5) PGM file back; returns (pixels, cols, rows).
pub fn read_pgm(path: &Path) -> Result<(Vec<u8>, usize, usize), CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let bad = |m: &str| CliError::Data(format!("{}: {m}", path.display()));
    // Header: magic, width, height, maxval as whitespace-separated tokens.
    let mut pos = 0usize;
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("binary header"))?);
    }
    if tokens[0] != "P5" {
        return Err(bad("not a binary PGM file"));
    }
    let cols: usize = tokens[1].parse().map_err(|_| bad("bad width"))?;
    let rows: usize = tokens[2].parse().map_err(|_| bad("bad height"))?;
    if tokens[3] != "255" {
        return Err(bad("unsupported max value"));
    }
    pos += 1; // single whitespace after maxval
    if bytes.len() - pos != cols * rows {
        return Err(bad("payload size does not match dimensions"));
    }
    Ok((bytes[pos..].to_vec(), cols, rows))
}

#[cfg(feature = "png")]
pub fn write_png(
    path: &Path,
    img: &[f64],
    cols: usize,
    rows: usize,
    range: Option<(f64, f64)>,
) -> Result<(), CliError> {
    if img.len() != cols * rows {
        return Err(CliError::Data(format!(
            "image has {} pixels, dimensions are {cols}x{rows}",
            img.len()
        )));
    }
    let gray = to_gray(img, range);
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    let mut encoder = png::Encoder::new(std::io::BufWriter::new(file), cols as u32, rows as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| CliError::Data(format!("png header: {e}")))?;
    writer
        .write_image_data(&gray)
        .map_err(|e| CliError::Data(format!("png payload: {e}")))
}

/// Emit `base.pgm` (always) and `base.png` (when built with PNG support).
pub fn emit_image(
    base: &Path,
    img: &[f64],
    cols: usize,
    rows: usize,
    range: Option<(f64, f64)>,
) -> Result<(), CliError> {
    write_pgm(&base.with_extension("pgm"), img, cols, rows, range)?;
    #[cfg(feature = "png")]
    write_png(&base.with_extension("png"), img, cols, rows, range)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_mapping_and_round_trip() {
        let img = vec![0.0, 0.5, 1.0, 0.25];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        write_pgm(&path, &img, 2, 2, None).unwrap();
        let (gray, cols, rows) = read_pgm(&path).unwrap();
        assert_eq!((cols, rows), (2, 2));
        assert_eq!(gray, vec![0, 128, 255, 64]);
    }

    #[test]
    fn fixed_range_clips() {
        let img = vec![-2.0, 0.0, 0.5, 3.0];
        let gray = to_gray(&img, Some((0.0, 1.0)));
        assert_eq!(gray, vec![0, 0, 128, 255]);
    }

    #[test]
    fn constant_image_is_mid_gray() {
        let gray = to_gray(&[7.25; 9], None);
        assert!(gray.iter().all(|&g| g == 128));
    }

    #[test]
    fn quantization_round_trip_stays_within_one_level() {
        // Emit, read back, dequantize: every pixel within one gray level of
        // the original, and re-emitting the dequantized image reproduces the
        // same bytes (the images are indistinguishable at 8 bits).
        let n = 16usize;
        let img: Vec<f64> = (0..n * n)
            .map(|i| {
                let (r, c) = (i / n, i % n);
                0.3 * ((r as f64 * 0.7).sin() * (c as f64 * 0.41).cos()) - 0.05
            })
            .collect();
        let lo = img.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = img.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eta.pgm");
        write_pgm(&path, &img, n, n, None).unwrap();
        let (gray, _, _) = read_pgm(&path).unwrap();
        let dequant: Vec<f64> = gray
            .iter()
            .map(|&g| lo + g as f64 / 255.0 * (hi - lo))
            .collect();
        let step = (hi - lo) / 255.0;
        for (&v, &orig) in dequant.iter().zip(&img) {
            assert!((v - orig).abs() <= step + 1e-12, "{v} vs {orig}");
        }
        let path2 = dir.path().join("eta2.pgm");
        write_pgm(&path2, &dequant, n, n, None).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[cfg(feature = "png")]
    #[test]
    fn png_file_is_emitted_alongside() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("img");
        emit_image(&base, &[0.0, 1.0, 0.5, 0.75], 2, 2, None).unwrap();
        assert!(base.with_extension("pgm").exists());
        let png_bytes = std::fs::read(base.with_extension("png")).unwrap();
        assert_eq!(&png_bytes[1..4], b"PNG");
    }
}
