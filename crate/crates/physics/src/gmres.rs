//! Restarted GMRES for complex linear systems given as a matrix-free
//! operator. Arnoldi with modified Gram-Schmidt, least-squares update via
//! Givens rotations, explicit restart.

use num_complex::Complex64;

#[derive(Clone, Copy, Debug)]
pub struct GmresOptions {
    /// Krylov subspace dimension between restarts.
    pub restart: usize,
    /// Relative residual target `|b - Ax| / |b|`.
    pub rel_tol: f64,
    /// Cap on the total number of inner iterations across restarts.
    pub max_iters: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            restart: 10,
            rel_tol: 1e-4,
            max_iters: 500,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GmresResult {
    pub x: Vec<Complex64>,
    /// Total inner iterations performed.
    pub iterations: usize,
    /// Relative residual after each inner iteration (estimated from the
    /// Givens recurrence, exact at restart boundaries).
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Solve `A x = b` where `apply` computes `A v`. `x0` seeds the iteration
/// (pass zeros when no better guess exists).
pub fn gmres(
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
    b: &[Complex64],
    x0: &[Complex64],
    opts: &GmresOptions,
) -> GmresResult {
    let n = b.len();
    assert_eq!(x0.len(), n);
    assert!(opts.restart > 0, "restart length must be positive");
    let b_norm = norm(b);
    let mut x = x0.to_vec();
    let mut history = Vec::new();
    let mut total_iters = 0;

    if b_norm == 0.0 {
        return GmresResult {
            x: vec![Complex64::ZERO; n],
            iterations: 0,
            residual_history: history,
            converged: true,
        };
    }

    'outer: loop {
        // Fresh residual for this cycle.
        let ax = apply(&x);
        let mut r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        if beta / b_norm <= opts.rel_tol {
            return GmresResult {
                x,
                iterations: total_iters,
                residual_history: history,
                converged: true,
            };
        }
        if total_iters >= opts.max_iters {
            return GmresResult {
                x,
                iterations: total_iters,
                residual_history: history,
                converged: false,
            };
        }

        let m = opts.restart;
        // Krylov basis, Hessenberg columns, Givens rotations, rhs of the
        // small least-squares problem.
        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
        for z in r.iter_mut() {
            *z /= beta;
        }
        basis.push(r);
        let mut hess: Vec<Vec<Complex64>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<Complex64> = Vec::with_capacity(m);
        let mut g = vec![Complex64::ZERO; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;

        for k in 0..m {
            if total_iters >= opts.max_iters {
                break;
            }
            let mut w = apply(&basis[k]);
            let mut hcol = vec![Complex64::ZERO; k + 2];
            // Modified Gram-Schmidt against all previous basis vectors.
            for (j, vj) in basis.iter().enumerate() {
                let hjk = dot(vj, &w);
                hcol[j] = hjk;
                for (wi, vji) in w.iter_mut().zip(vj) {
                    *wi -= hjk * vji;
                }
            }
            let wnorm = norm(&w);
            hcol[k + 1] = Complex64::new(wnorm, 0.0);

            // Apply accumulated rotations to the new column.
            for j in 0..k {
                let t = cs[j] * hcol[j] + sn[j] * hcol[j + 1];
                hcol[j + 1] = -sn[j].conj() * hcol[j] + cs[j] * hcol[j + 1];
                hcol[j] = t;
            }
            // New rotation annihilating the subdiagonal entry.
            let (c, s) = givens(hcol[k], hcol[k + 1]);
            let t = c * hcol[k] + s * hcol[k + 1];
            hcol[k + 1] = Complex64::ZERO;
            hcol[k] = t;
            cs.push(c);
            sn.push(s);
            let gk = g[k];
            g[k] = c * gk;
            g[k + 1] = -s.conj() * gk;

            hess.push(hcol);
            k_used = k + 1;
            total_iters += 1;
            let rel = g[k + 1].norm() / b_norm;
            history.push(rel);

            if rel <= opts.rel_tol {
                update_solution(&mut x, &basis, &hess, &g, k_used);
                // Convergence is verified against the true residual at the
                // top of the next cycle (guards against MGS drift).
                continue 'outer;
            }
            if wnorm == 0.0 {
                // Lucky breakdown: the Krylov space is invariant; the
                // current least-squares solution is exact.
                update_solution(&mut x, &basis, &hess, &g, k_used);
                continue 'outer;
            }
            for z in w.iter_mut() {
                *z /= wnorm;
            }
            basis.push(w);
        }

        if k_used > 0 {
            update_solution(&mut x, &basis, &hess, &g, k_used);
        }
    }
}

/// Back-substitute the triangularized Hessenberg system and push the
/// correction `V_k y` into `x`.
fn update_solution(
    x: &mut [Complex64],
    basis: &[Vec<Complex64>],
    hess: &[Vec<Complex64>],
    g: &[Complex64],
    k: usize,
) {
    let mut y = vec![Complex64::ZERO; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= hess[j][i] * y[j];
        }
        y[i] = s / hess[i][i];
    }
    for (j, yj) in y.iter().enumerate() {
        for (xi, vji) in x.iter_mut().zip(&basis[j]) {
            *xi += yj * vji;
        }
    }
}

/// Complex Givens rotation: returns `(c, s)` with `c` real such that
/// `[c, s; -conj(s), c] [a; b] = [r; 0]`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, Complex64::ZERO);
    }
    let an = a.norm();
    let r = (an * an + bn * bn).sqrt();
    if an == 0.0 {
        // Rotate b straight into the diagonal slot.
        return (0.0, b.conj() / bn);
    }
    let c = an / r;
    let s = (a / an) * b.conj() / r;
    (c, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn dense_apply(a: &[Vec<Complex64>]) -> impl Fn(&[Complex64]) -> Vec<Complex64> + '_ {
        move |v: &[Complex64]| {
            a.iter()
                .map(|row| row.iter().zip(v).map(|(aij, vj)| aij * vj).sum())
                .collect()
        }
    }

    fn random_complex(rng: &mut ChaCha20Rng) -> Complex64 {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    }

    #[test]
    fn identity_converges_immediately() {
        let b = vec![Complex64::new(1.0, 2.0), Complex64::new(-3.0, 0.5)];
        let res = gmres(
            |v| v.to_vec(),
            &b,
            &[Complex64::ZERO; 2],
            &GmresOptions::default(),
        );
        assert!(res.converged);
        assert!(res.iterations <= 1);
        for (xi, bi) in res.x.iter().zip(&b) {
            assert!((xi - bi).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_solution_on_dense_system() {
        let n = 50;
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut a = vec![vec![Complex64::ZERO; n]; n];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = random_complex(&mut rng) * 0.3;
                if i == j {
                    // Diagonally dominant so the unpreconditioned iteration
                    // converges quickly.
                    *v += Complex64::new(4.0, 1.0);
                }
            }
        }
        let xtrue: Vec<Complex64> = (0..n).map(|_| random_complex(&mut rng)).collect();
        let b = dense_apply(&a)(&xtrue);
        let opts = GmresOptions {
            restart: 10,
            rel_tol: 1e-10,
            max_iters: 400,
        };
        let res = gmres(dense_apply(&a), &b, &vec![Complex64::ZERO; n], &opts);
        assert!(res.converged, "no convergence in {} iters", res.iterations);
        let err: f64 = res
            .x
            .iter()
            .zip(&xtrue)
            .map(|(p, q)| (p - q).norm_sqr())
            .sum::<f64>()
            .sqrt()
            / xtrue.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-8, "relative error {err}");
    }

    #[test]
    fn restarting_still_converges() {
        // Restart length 3 on a 20-dim system forces many cycles.
        let n = 20;
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let mut a = vec![vec![Complex64::ZERO; n]; n];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = random_complex(&mut rng) * 0.2;
                if i == j {
                    *v += Complex64::new(3.0, 0.0);
                }
            }
        }
        let xtrue: Vec<Complex64> = (0..n).map(|_| random_complex(&mut rng)).collect();
        let b = dense_apply(&a)(&xtrue);
        let opts = GmresOptions {
            restart: 3,
            rel_tol: 1e-8,
            max_iters: 300,
        };
        let res = gmres(dense_apply(&a), &b, &vec![Complex64::ZERO; n], &opts);
        assert!(res.converged);
        assert!(res.iterations > 3, "should have needed at least one restart");
        let r = dense_apply(&a)(&res.x);
        let resid: f64 = r
            .iter()
            .zip(&b)
            .map(|(p, q)| (p - q).norm_sqr())
            .sum::<f64>()
            .sqrt()
            / b.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt();
        assert!(resid < 1e-7, "true residual {resid}");
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let res = gmres(
            |v| v.to_vec(),
            &[Complex64::ZERO; 4],
            &[Complex64::ONE; 4],
            &GmresOptions::default(),
        );
        assert!(res.converged);
        assert!(res.x.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn residual_history_is_monotone_within_cycle() {
        let n = 30;
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut a = vec![vec![Complex64::ZERO; n]; n];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = random_complex(&mut rng) * 0.4;
                if i == j {
                    *v += Complex64::new(2.5, -0.5);
                }
            }
        }
        let b: Vec<Complex64> = (0..n).map(|_| random_complex(&mut rng)).collect();
        let opts = GmresOptions {
            restart: 30,
            rel_tol: 1e-9,
            max_iters: 30,
        };
        let res = gmres(dense_apply(&a), &b, &vec![Complex64::ZERO; n], &opts);
        for w in res.residual_history.windows(2) {
            assert!(
                w[1] <= w[0] * (1.0 + 1e-12),
                "GMRES residual must not increase within a cycle"
            );
        }
    }
}
