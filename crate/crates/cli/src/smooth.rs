//! Gaussian smoothing of square images with circular (periodic) padding.
//!
//! Training targets are mollified with a fixed-width Gaussian before the
//! loss is taken, so the regression target has a few pixels of support even
//! for point-like scatterers. The kernel is truncated at four widths and
//! renormalized to unit sum, and the convolution wraps around the image
//! edges, so the image mean is preserved exactly.

/// Default mollifier width in pixels.
pub const TARGET_WIDTH_PX: f64 = 0.75;

/// Sampled Gaussian kernel truncated at four widths, unit sum.
/// Radius matches `floor(4 * sigma + 0.5)` so the support is symmetric.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "kernel width must be positive");
    let radius = (4.0 * sigma + 0.5).floor() as usize;
    let mut w = Vec::with_capacity(2 * radius + 1);
    for k in -(radius as i64)..=(radius as i64) {
        let x = k as f64 / sigma;
        w.push((-0.5 * x * x).exp());
    }
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

/// Smooth an `n x n` row-major image with a separable periodic Gaussian.
pub fn gaussian_smooth(img: &[f64], n: usize, sigma: f64) -> Vec<f64> {
    assert_eq!(img.len(), n * n, "image must be n*n");
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;
    let m = n as i64;
    // Rows, then columns; wrap-around indexing supports any kernel radius.
    let mut tmp = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n as i64 {
            let mut acc = 0.0;
            for (j, &w) in kernel.iter().enumerate() {
                let cc = (c + j as i64 - radius).rem_euclid(m) as usize;
                acc += w * img[r * n + cc];
            }
            tmp[r * n + c as usize] = acc;
        }
    }
    let mut out = vec![0.0; n * n];
    for r in 0..n as i64 {
        for c in 0..n {
            let mut acc = 0.0;
            for (j, &w) in kernel.iter().enumerate() {
                let rr = (r + j as i64 - radius).rem_euclid(m) as usize;
                acc += w * tmp[rr * n + c];
            }
            out[r as usize * n + c] = acc;
        }
    }
    out
}

/// Smooth with the standard target width.
pub fn smooth_target(img: &[f64], n: usize) -> Vec<f64> {
    gaussian_smooth(img, n, TARGET_WIDTH_PX)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_unit_sum_symmetric_and_truncated_at_four_widths() {
        let k = gaussian_kernel(TARGET_WIDTH_PX);
        assert_eq!(k.len(), 7, "radius 3 for width 0.75");
        let sum: f64 = k.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        for j in 0..k.len() / 2 {
            assert_eq!(k[j], k[k.len() - 1 - j], "kernel must be symmetric");
        }
        let mid = k.len() / 2;
        assert!(k[mid] > k[mid + 1], "kernel must peak at the centre");
    }

    #[test]
    fn delta_response_matches_reference_values() {
        // Frozen reference: scipy.ndimage.gaussian_filter(delta_at_(2,3),
        // sigma=0.75, mode='wrap', truncate=4.0) on an 8x8 image.
        let n = 8;
        let mut img = vec![0.0; n * n];
        img[2 * n + 3] = 1.0;
        let out = smooth_target(&img, n);
        let cases = [
            (2usize, 3usize, 0.282925475545323),
            (2, 4, 0.11631414029427298),
            (3, 4, 0.047818172634752916),
            (2, 5, 0.008081907893659212),
            (2, 6, 9.491092352700191e-05),
        ];
        for (r, c, want) in cases {
            let got = out[r * n + c];
            assert!(
                (got - want).abs() < 1e-12,
                "pixel ({r},{c}): got {got}, want {want}"
            );
        }
    }

    #[test]
    fn wraps_correctly_when_kernel_exceeds_image() {
        // Frozen reference: scipy on a 4x4 ramp (kernel radius 3 nearly
        // covers the whole axis, so wrap-around dominates).
        let n = 4;
        let img: Vec<f64> = (0..16).map(|v| v as f64).collect();
        let out = smooth_target(&img, n);
        assert!((out[0] - 4.680926062317587).abs() < 1e-12, "got {}", out[0]);
        assert!(
            (out[n + 3] - 6.3069220047204).abs() < 1e-12,
            "got {}",
            out[n + 3]
        );
    }

    #[test]
    fn preserves_image_mean() {
        let n = 16;
        let img: Vec<f64> = (0..n * n).map(|v| ((v * 37) % 11) as f64 - 3.0).collect();
        let out = gaussian_smooth(&img, n, 1.3);
        let a: f64 = img.iter().sum();
        let b: f64 = out.iter().sum();
        assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn constant_image_is_unchanged() {
        let n = 8;
        let img = vec![0.2; n * n];
        let out = smooth_target(&img, n);
        for &v in &out {
            assert!((v - 0.2).abs() <= 1e-6, "got {v}");
        }
    }

    #[test]
    fn vanishing_width_is_the_identity() {
        let n = 8;
        let img: Vec<f64> = (0..n * n).map(|v| (v as f64 * 0.37).sin()).collect();
        // Radius floor(4*sigma + 0.5) hits zero, so the kernel is [1].
        let out = gaussian_smooth(&img, n, 1e-8);
        assert_eq!(out, img);
    }
}
