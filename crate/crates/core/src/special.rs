//! Bessel functions of order zero and the outgoing Hankel function.
//!
//! Polynomial approximations from Abramowitz & Stegun (sections 9.4.1-9.4.3):
//! a 12th-degree polynomial in `(x/3)^2` below `x = 3` and a modulus/phase
//! expansion in `3/x` above. Absolute error is below `2e-7` everywhere, which
//! is plenty for validating the wave solver against analytic fields.

use num_complex::Complex64;

/// Bessel function of the first kind, order zero.
pub fn j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 3.0 {
        let t = (ax / 3.0) * (ax / 3.0);
        1.0 + t
            * (-2.249_999_7
                + t * (1.265_620_8
                    + t * (-0.316_386_6
                        + t * (0.044_447_9 + t * (-0.003_944_4 + t * 0.000_210_0)))))
    } else {
        let (f, theta) = modulus_phase(ax);
        f * theta.cos() / ax.sqrt()
    }
}

/// Bessel function of the second kind, order zero. Requires `x > 0`.
pub fn y0(x: f64) -> f64 {
    assert!(x > 0.0, "y0 is only defined for positive arguments");
    if x <= 3.0 {
        let t = (x / 3.0) * (x / 3.0);
        let series = 0.367_466_91
            + t * (0.605_593_66
                + t * (-0.743_503_84
                    + t * (0.253_001_17
                        + t * (-0.042_612_14 + t * (0.004_279_16 + t * (-0.000_248_46))))));
        2.0 / std::f64::consts::PI * (x / 2.0).ln() * j0(x) + series
    } else {
        let (f, theta) = modulus_phase(x);
        f * theta.sin() / x.sqrt()
    }
}

/// Outgoing Hankel function `H0 = J0 + i Y0`. Requires `x > 0`.
pub fn hankel1_0(x: f64) -> Complex64 {
    Complex64::new(j0(x), y0(x))
}

/// Asymptotic modulus `f0` and phase `theta0` for `x >= 3`, so that
/// `J0 = f0 cos(theta0) / sqrt(x)` and `Y0 = f0 sin(theta0) / sqrt(x)`.
fn modulus_phase(x: f64) -> (f64, f64) {
    let t = 3.0 / x;
    let f = 0.797_884_56
        + t * (-0.000_000_77
            + t * (-0.005_527_40
                + t * (-0.000_095_12
                    + t * (0.001_372_37 + t * (-0.000_728_05 + t * 0.000_144_76)))));
    let theta = x - std::f64::consts::FRAC_PI_4
        + t * (-0.041_663_97
            + t * (-0.000_039_54
                + t * (0.002_625_73
                    + t * (-0.000_541_25 + t * (-0.000_293_33 + t * 0.000_135_58)))));
    (f, theta)
}
