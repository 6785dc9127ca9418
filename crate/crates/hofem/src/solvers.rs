//! Krylov and smoothing kernels: preconditioned conjugate gradients,
//! Chebyshev-accelerated Jacobi smoothing, and a power-method eigenvalue
//! estimate. Everything here is deterministic: fixed seeds, fixed iteration
//! policies, sequential reductions.

use crate::error::{Error, Result};
use crate::gfmt::g17;
use crate::rng::SplitMix64;

/// Iteration report of a Krylov solve.
#[derive(Clone, Debug)]
pub struct IterStats {
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
    /// Preconditioned residual norms, one entry per iteration.
    pub history: Vec<f64>,
}

impl IterStats {
    pub fn csv_header() -> &'static str {
        "solver,p,elements,dofs,iterations,rel_res,seconds"
    }

    pub fn csv_row(&self, solver: &str, p: usize, elements: usize, dofs: usize, seconds: f64) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            solver,
            p,
            elements,
            dofs,
            self.iterations,
            g17(self.rel_residual),
            g17(seconds)
        )
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioned conjugate gradients. Convergence is declared when the
/// preconditioned residual norm sqrt(r^T M r) drops below `rel_tol` times
/// its initial value. A nonpositive curvature p^T A p aborts with an
/// indefiniteness error.
pub fn cg(
    apply_a: impl Fn(&[f64], &mut [f64]),
    apply_m: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x0: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, IterStats)> {
    let n = b.len();
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut ap = vec![0.0; n];
    apply_a(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    apply_m(&r, &mut z);
    let mut rz = dot(&r, &z);
    let norm0 = rz.max(0.0).sqrt();
    let mut history = Vec::new();
    if norm0 == 0.0 {
        return Ok((
            x,
            IterStats {
                iterations: 0,
                rel_residual: 0.0,
                converged: true,
                history,
            },
        ));
    }
    let mut p = z.clone();
    let mut iterations = 0;
    let mut rel = 1.0;
    let mut converged = false;
    for it in 1..=max_iter {
        apply_a(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::IndefiniteOperator {
                iteration: it,
                curvature: pap,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        apply_m(&r, &mut z);
        let rz_next = dot(&r, &z);
        iterations = it;
        rel = rz_next.max(0.0).sqrt() / norm0;
        history.push(rel);
        if rel <= rel_tol {
            converged = true;
            break;
        }
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok((
        x,
        IterStats {
            iterations,
            rel_residual: rel,
            converged,
            history,
        },
    ))
}

/// CG without preconditioning.
pub fn cg_unpreconditioned(
    apply_a: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x0: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, IterStats)> {
    cg(apply_a, |r, z| z.copy_from_slice(r), b, x0, rel_tol, max_iter)
}

/// Chebyshev smoother interval: the polynomial targets
/// [lambda_ub / LOWER_FRACTION, lambda_ub] where lambda_ub is the estimate
/// inflated by the built-in safety factor.
const CHEB_LOWER_FRACTION: f64 = 30.0;
const CHEB_SAFETY: f64 = 1.1;

/// In-place Chebyshev smoothing of `x` for A x = b, degree `order`, using
/// only the operator diagonal. Fixed-point form: no inner products.
pub fn chebyshev_smooth(
    apply_a: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    lambda_max_est: f64,
    order: usize,
    b: &[f64],
    x: &mut [f64],
) -> Result<()> {
    let n = b.len();
    for (i, &d) in diag.iter().enumerate() {
        if d <= 0.0 {
            return Err(Error::NonPositiveDiagonal { index: i, value: d });
        }
    }
    let ub = CHEB_SAFETY * lambda_max_est;
    let lb = ub / CHEB_LOWER_FRACTION;
    let theta = 0.5 * (ub + lb);
    let delta = 0.5 * (ub - lb);
    let sigma = theta / delta;
    let mut rho = 1.0 / sigma;
    let mut r = vec![0.0; n];
    let mut d = vec![0.0; n];
    apply_a(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
        d[i] = r[i] / (diag[i] * theta);
    }
    for i in 0..n {
        x[i] += d[i];
    }
    let mut ad = vec![0.0; n];
    for _k in 2..=order {
        apply_a(&d, &mut ad);
        for i in 0..n {
            r[i] -= ad[i];
        }
        let rho_next = 1.0 / (2.0 * sigma - rho);
        for i in 0..n {
            d[i] = rho_next * rho * d[i] + 2.0 * rho_next / delta * r[i] / diag[i];
        }
        rho = rho_next;
        for i in 0..n {
            x[i] += d[i];
        }
    }
    Ok(())
}

/// Largest eigenvalue of D^{-1} A by power iteration from a fixed seeded
/// start vector; returns the D-weighted Rayleigh quotient.
pub fn power_method_lmax(
    apply_a: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    iters: usize,
) -> f64 {
    const POWER_SEED: u64 = 0x5eed_1234;
    let n = diag.len();
    let mut v = SplitMix64::new(POWER_SEED).vector(n);
    let mut av = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..iters {
        apply_a(&v, &mut av);
        // Rayleigh quotient of the D-symmetric pencil: v'Av / v'Dv.
        let vav = dot(&v, &av);
        let vdv: f64 = v.iter().zip(diag).map(|(x, d)| x * x * d).sum();
        estimate = vav / vdv;
        let mut norm = 0.0;
        for i in 0..n {
            v[i] = av[i] / diag[i];
            norm += v[i] * v[i];
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        for vi in &mut v {
            *vi /= norm;
        }
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::{Continuity, FESpace};
    use crate::mesh::CartesianMesh;
    use crate::operators::{constant_coefficient, OperatorKind, PAOperator};
    use crate::sparse::SkylineCholesky;
    use crate::test_oracles::{dense_from_apply, jacobi_eigenvalues};
    use std::sync::Arc;

    fn poisson_op(n: usize, p: usize) -> PAOperator {
        let mesh = Arc::new(CartesianMesh::unit_square(n, n, 1).unwrap());
        let fes = Arc::new(FESpace::new(&mesh, p, Continuity::H1, 1).unwrap());
        let mut op =
            PAOperator::new(&fes, OperatorKind::Diffusion, constant_coefficient(1.0), None)
                .unwrap();
        op.set_essential_dofs(fes.boundary_dofs(None).unwrap());
        op
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let b = vec![3.0, -1.0, 2.0];
        let (x, stats) =
            cg_unpreconditioned(|x, y| y.copy_from_slice(x), &b, &[0.0; 3], 1e-12, 10).unwrap();
        assert_eq!(stats.iterations, 1);
        assert!(stats.converged);
        for (a, bb) in x.iter().zip(&b) {
            assert!((a - bb).abs() <= 1e-14);
        }
    }

    #[test]
    fn hand_solved_2x2_system() {
        // [[4,1],[1,3]] x = (1,2) has solution (1/11, 7/11).
        let apply = |x: &[f64], y: &mut [f64]| {
            y[0] = 4.0 * x[0] + x[1];
            y[1] = x[0] + 3.0 * x[1];
        };
        let (x, stats) = cg_unpreconditioned(apply, &[1.0, 2.0], &[0.0; 2], 1e-12, 10).unwrap();
        assert!(stats.iterations <= 2);
        assert!((x[0] - 1.0 / 11.0).abs() <= 1e-12);
        assert!((x[1] - 7.0 / 11.0).abs() <= 1e-12);
    }

    #[test]
    fn cg_reports_indefiniteness() {
        let apply = |x: &[f64], y: &mut [f64]| {
            y[0] = -x[0];
            y[1] = -x[1];
        };
        match cg_unpreconditioned(apply, &[1.0, 1.0], &[0.0; 2], 1e-12, 10) {
            Err(Error::IndefiniteOperator { .. }) => {}
            other => panic!("expected indefiniteness, got {other:?}"),
        }
    }

    #[test]
    fn cg_flags_max_iter() {
        let op = poisson_op(8, 2);
        let b = vec![1.0; op.size()];
        let (_, stats) =
            cg_unpreconditioned(|x, y| op.apply(x, y).unwrap(), &b, &vec![0.0; op.size()], 1e-14, 3)
                .unwrap();
        assert!(!stats.converged);
        assert_eq!(stats.iterations, 3);
        assert_eq!(stats.history.len(), 3);
    }

    #[test]
    fn jacobi_preconditioned_poisson() {
        let op = poisson_op(8, 2);
        let n = op.size();
        let b = crate::operators::linear_form(op.fes(), op.fes().degree() + 2, &|_| 1.0).unwrap();
        let mut b = b;
        op.eliminate_bc(&vec![0.0; n], &mut b).unwrap();
        let diag = op.diagonal();
        let (x, stats) = cg(
            |x, y| op.apply(x, y).unwrap(),
            |r, z| {
                for i in 0..r.len() {
                    z[i] = r[i] / diag[i];
                }
            },
            &b,
            &vec![0.0; n],
            1e-8,
            500,
        )
        .unwrap();
        assert!(stats.converged);
        assert_eq!(stats.history.len(), stats.iterations);
        // Compare with the direct solve of the assembled system.
        let a = op.full_assemble();
        let x_star = SkylineCholesky::factor(&a).unwrap().solve(&b);
        let err: f64 = x
            .iter()
            .zip(&x_star)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let x_norm = norm2(&x_star);
        assert!(err <= 1e-6 * x_norm.max(1.0), "err {err:e}");
    }

    #[test]
    fn chebyshev_order_one_is_damped_jacobi() {
        let diag = vec![2.0, 3.0, 5.0];
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..3 {
                y[i] = diag[i] * x[i];
            }
        };
        let b = vec![1.0, 1.0, 1.0];
        let lmax = 1.0; // exact lambda_max of D^{-1}A
        let mut x = vec![0.2, -0.3, 0.4];
        let x0 = x.clone();
        chebyshev_smooth(&apply, &diag, lmax, 1, &b, &mut x).unwrap();
        // One step of damped Jacobi with the Chebyshev midpoint damping.
        let ub = 1.1 * lmax;
        let theta = 0.5 * (ub + ub / 30.0);
        for i in 0..3 {
            let want = x0[i] + (b[i] - diag[i] * x0[i]) / (diag[i] * theta);
            assert!((x[i] - want).abs() <= 1e-15);
        }
    }

    #[test]
    fn chebyshev_reduces_top_eigencomponent() {
        // A = diag(1, 2, 4) with D = I: the error component along the top
        // eigenvector must shrink at least by the Chebyshev bound.
        let a = [1.0, 2.0, 4.0];
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..3 {
                y[i] = a[i] * x[i];
            }
        };
        let diag = vec![1.0; 3];
        let order = 3;
        // Solve A x = 0 starting from the top eigenvector: the remaining x
        // IS the smoothed error.
        let mut x = vec![0.0, 0.0, 1.0];
        chebyshev_smooth(&apply, &diag, 4.0, order, &[0.0; 3], &mut x).unwrap();
        let ub = 1.1 * 4.0;
        let lb = ub / 30.0;
        // |p_k(lambda)| <= 1/cosh(k acosh(sigma)) on [lb, ub].
        let sigma: f64 = (ub + lb) / (ub - lb);
        let bound = 1.0 / (order as f64 * sigma.acosh()).cosh();
        assert!(
            x[2].abs() <= bound + 1e-12,
            "component {} vs bound {bound}",
            x[2]
        );
    }

    #[test]
    fn chebyshev_smooths_poisson_error() {
        // Three order-2 sweeps must cut the A-norm of a random error at
        // least in half (measured through the assembled matrix).
        let op = poisson_op(8, 3);
        let n = op.size();
        let diag = op.diagonal();
        let lmax = power_method_lmax(|x, y| op.apply(x, y).unwrap(), &diag, 20);
        let a = op.full_assemble();
        let mut e = crate::rng::SplitMix64::new(4242).vector(n);
        for &d in op.essential_dofs() {
            e[d] = 0.0;
        }
        let mut ae = vec![0.0; n];
        a.mul_vec(&e, &mut ae);
        let norm_before = dot(&e, &ae).sqrt();
        // Smoothing the system A x = 0 from x = e leaves exactly the error.
        let mut x = e;
        for _ in 0..3 {
            chebyshev_smooth(|x, y| op.apply(x, y).unwrap(), &diag, lmax, 2, &vec![0.0; n], &mut x)
                .unwrap();
        }
        a.mul_vec(&x, &mut ae);
        let norm_after = dot(&x, &ae).sqrt();
        assert!(
            norm_after <= 0.5 * norm_before,
            "{norm_after} vs {norm_before}"
        );
    }

    #[test]
    fn chebyshev_rejects_bad_diagonal() {
        let mut x = vec![0.0; 2];
        let r = chebyshev_smooth(
            |x: &[f64], y: &mut [f64]| y.copy_from_slice(x),
            &[1.0, 0.0],
            1.0,
            1,
            &[1.0, 1.0],
            &mut x,
        );
        assert!(matches!(r, Err(Error::NonPositiveDiagonal { .. })));
    }

    #[test]
    fn power_method_identity() {
        let est = power_method_lmax(|x, y| y.copy_from_slice(x), &[1.0; 10], 20);
        assert!((est - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn power_method_diagonal_gap() {
        let apply = |x: &[f64], y: &mut [f64]| {
            y[0] = x[0];
            y[1] = 10.0 * x[1];
        };
        let est = power_method_lmax(apply, &[1.0, 1.0], 20);
        assert!((est - 10.0).abs() <= 0.01 * 10.0, "estimate {est}");
    }

    #[test]
    fn power_method_matches_dense_eigensolve() {
        // Small Poisson problem (49 dofs), oracle = dense Jacobi eigensolve
        // of the symmetrized D^{-1/2} A D^{-1/2}.
        let op = poisson_op(3, 2);
        let n = op.size();
        assert!(n <= 200);
        let diag = op.diagonal();
        let dense = dense_from_apply(n, |x, y| op.apply(x, y).unwrap());
        let mut sym = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                sym[i * n + j] = dense[i * n + j] / (diag[i] * diag[j]).sqrt();
            }
        }
        let eigs = jacobi_eigenvalues(&sym, n);
        let lmax_true = eigs[n - 1];
        let est = power_method_lmax(|x, y| op.apply(x, y).unwrap(), &diag, 20);
        assert!(
            est >= 0.9 * lmax_true && est <= 1.1 * lmax_true,
            "estimate {est} vs true {lmax_true}"
        );
    }

    #[test]
    fn deterministic_iteration_counts() {
        let op = poisson_op(6, 3);
        let n = op.size();
        let b = crate::rng::SplitMix64::new(99).vector(n);
        let run = || {
            let diag = op.diagonal();
            cg(
                |x, y| op.apply(x, y).unwrap(),
                |r, z| {
                    for i in 0..r.len() {
                        z[i] = r[i] / diag[i];
                    }
                },
                &b,
                &vec![0.0; n],
                1e-10,
                1000,
            )
            .unwrap()
        };
        let (x1, s1) = run();
        let (x2, s2) = run();
        assert_eq!(s1.iterations, s2.iterations);
        assert!(x1.iter().zip(&x2).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(s1.history, s2.history);
    }

    #[test]
    fn stats_csv_row_format() {
        let stats = IterStats {
            iterations: 12,
            rel_residual: 1.5e-9,
            converged: true,
            history: vec![],
        };
        assert_eq!(IterStats::csv_header(), "solver,p,elements,dofs,iterations,rel_res,seconds");
        let row = stats.csv_row("lor", 3, 16, 169, 0.25);
        assert_eq!(row, "lor,3,16,169,12,1.5e-09,0.25");
    }
}
