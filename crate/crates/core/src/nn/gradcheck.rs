//! Central-difference validation of hand-written gradients.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
}

/// Compare `grad` against central differences of `f` at `theta`.
///
/// Checks up to `max_coords` coordinates (a seeded shuffle picks which when
/// `theta` is longer); each coordinate is perturbed by `±h` in place and
/// restored. The relative error of coordinate `i` is
/// `|fd - grad[i]| / max(|fd|, |grad[i]|, 1e-12)`.
pub fn central_diff_check<F>(
    theta: &mut [f64],
    grad: &[f64],
    mut f: F,
    seed: u64,
    max_coords: usize,
    h: f64,
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(theta.len(), grad.len());
    let mut order: Vec<usize> = (0..theta.len()).collect();
    if theta.len() > max_coords {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        order.truncate(max_coords);
    }

    let mut report = GradCheckReport {
        checked: order.len(),
        max_rel_err: 0.0,
        worst_index: 0,
    };
    for &i in &order {
        let saved = theta[i];
        theta[i] = saved + h;
        let fp = f(theta);
        theta[i] = saved - h;
        let fm = f(theta);
        theta[i] = saved;
        let fd = (fp - fm) / (2.0 * h);
        let denom = fd.abs().max(grad[i].abs()).max(1e-12);
        let rel = (fd - grad[i]).abs() / denom;
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_index = i;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_exact_gradient_of_quadratic() {
        // f(x) = sum of x_i^2 / 2, gradient x.
        let mut theta: Vec<f64> = (0..20).map(|i| 0.3 * i as f64 - 2.0).collect();
        let grad = theta.clone();
        let rep = central_diff_check(
            &mut theta,
            &grad,
            |t| 0.5 * t.iter().map(|v| v * v).sum::<f64>(),
            1,
            50,
            1e-6,
        );
        assert_eq!(rep.checked, 20);
        // Central differences cancel ~10 digits on a loss of this size, so
        // the floor is set by roundoff, not by the gradient.
        assert!(rep.max_rel_err < 1e-6, "rel err {}", rep.max_rel_err);
    }

    #[test]
    fn flags_a_wrong_gradient() {
        let mut theta = vec![1.0, 2.0, 3.0];
        let mut grad = theta.clone();
        grad[1] *= 1.5;
        let rep = central_diff_check(
            &mut theta,
            &grad,
            |t| 0.5 * t.iter().map(|v| v * v).sum::<f64>(),
            1,
            10,
            1e-6,
        );
        assert!(rep.max_rel_err > 0.1);
        assert_eq!(rep.worst_index, 1);
    }

    #[test]
    fn respects_coordinate_budget() {
        let mut theta = vec![0.5; 100];
        let grad = vec![0.5; 100];
        let rep = central_diff_check(
            &mut theta,
            &grad,
            |t| 0.5 * t.iter().map(|v| v * v).sum::<f64>(),
            9,
            17,
            1e-6,
        );
        assert_eq!(rep.checked, 17);
    }
}
