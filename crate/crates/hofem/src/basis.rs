//! 1D Gauss–Lobatto nodal bases and Gauss–Legendre quadrature on [0, 1].
//!
//! All tabulations use the unit reference interval. Nodes are computed by
//! safeguarded Newton iteration on Legendre polynomials (tolerance 1e-15,
//! at most 100 iterations) and symmetrized about 1/2, so repeated calls
//! produce bit-identical values.

use crate::error::{Error, Result};

const ROOT_TOL: f64 = 1e-15;
const MAX_NEWTON_ITERS: usize = 100;

/// Legendre polynomial P_n and its derivative on [-1, 1].
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let dp = if x.abs() == 1.0 {
        let s: f64 = if x > 0.0 { 1.0 } else { -1.0 };
        s.powi(n as i32 - 1) * (n * (n + 1)) as f64 / 2.0
    } else {
        (n as f64) * (x * p - p_prev) / (x * x - 1.0)
    };
    (p, dp)
}

/// Newton iteration safeguarded by bisection inside a sign-changing bracket.
fn newton_bisection(f: impl Fn(f64) -> (f64, f64), mut lo: f64, mut hi: f64) -> f64 {
    let (flo, _) = f(lo);
    let mut sign_lo = flo >= 0.0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_NEWTON_ITERS {
        let (v, dv) = f(x);
        if v == 0.0 {
            return x;
        }
        if (v >= 0.0) == sign_lo {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - v / dv;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= ROOT_TOL {
            return next;
        }
        x = next;
        // Refresh the bracket orientation in case lo moved.
        let (flo2, _) = f(lo);
        sign_lo = flo2 >= 0.0;
    }
    x
}

/// Sign-change brackets of `f` sampled on a Chebyshev-distributed grid of [-1, 1].
fn bracket_roots(f: impl Fn(f64) -> f64, expected: usize, samples: usize) -> Vec<(f64, f64)> {
    let mut brackets = Vec::with_capacity(expected);
    let grid: Vec<f64> = (0..=samples)
        .map(|j| -(std::f64::consts::PI * j as f64 / samples as f64).cos())
        .collect();
    let mut prev_x = grid[0];
    let mut prev_f = f(prev_x);
    for &x in &grid[1..] {
        let fx = f(x);
        if prev_f == 0.0 {
            // Root exactly on a sample; nudge the bracket around it.
            brackets.push((prev_x - 1e-12, prev_x + 1e-12));
        } else if (prev_f > 0.0) != (fx > 0.0) && fx != 0.0 {
            brackets.push((prev_x, x));
        }
        prev_x = x;
        prev_f = fx;
    }
    assert_eq!(brackets.len(), expected, "root bracketing failed");
    brackets
}

/// Enforce exact symmetry about the origin, then map [-1, 1] -> [0, 1] so
/// that paired points come out bitwise symmetric about 1/2.
fn symmetrize_and_map(roots: Vec<f64>) -> Vec<f64> {
    let n = roots.len();
    let mut out = vec![0.0; n];
    for i in 0..n / 2 {
        let m = 0.5 * (roots[n - 1 - i] - roots[i]);
        out[i] = 0.5 * (1.0 - m);
        out[n - 1 - i] = 1.0 - out[i];
    }
    if n % 2 == 1 {
        out[n / 2] = 0.5;
    }
    out
}

/// Gauss–Lobatto nodes of degree `p` on [0, 1]: endpoints plus the roots of P_p'.
pub fn gll_nodes(p: usize) -> Result<Vec<f64>> {
    if p == 0 {
        return Err(Error::ZeroDegree);
    }
    let mut nodes = Vec::with_capacity(p + 1);
    nodes.push(0.0);
    if p >= 2 {
        let interior = bracket_roots(|x| legendre(p, x).1, p - 1, 8 * p)
            .into_iter()
            .map(|(lo, hi)| {
                newton_bisection(
                    |x| {
                        let (v, dv) = legendre(p, x);
                        // P_p'' from the Legendre differential equation.
                        let d2 = (2.0 * x * dv - (p * (p + 1)) as f64 * v) / (1.0 - x * x);
                        (dv, d2)
                    },
                    lo,
                    hi,
                )
            })
            .collect::<Vec<_>>();
        nodes.extend(symmetrize_and_map(interior));
    }
    nodes.push(1.0);
    Ok(nodes)
}

/// q-point Gauss–Legendre rule on [0, 1]; exact for polynomials of degree 2q-1.
pub fn gauss_quadrature(q: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if q == 0 {
        return Err(Error::ZeroQuadrature);
    }
    let roots: Vec<f64> = bracket_roots(|x| legendre(q, x).0, q, 8 * q)
        .into_iter()
        .map(|(lo, hi)| newton_bisection(|x| legendre(q, x), lo, hi))
        .collect();
    let points = symmetrize_and_map(roots.clone());
    // Weights on [-1, 1] are 2 / ((1 - x^2) P_q'(x)^2); halve for [0, 1].
    // Evaluate at the symmetrized roots so paired weights come out identical.
    let mut weights: Vec<f64> = points
        .iter()
        .map(|&y| {
            let x = 2.0 * y - 1.0;
            let (_, dp) = legendre(q, x);
            1.0 / ((1.0 - x * x) * dp * dp)
        })
        .collect();
    for i in 0..q / 2 {
        let w = 0.5 * (weights[i] + weights[q - 1 - i]);
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    Ok((points, weights))
}

/// Barycentric weights for the given interpolation nodes, normalized to
/// max |w| = 1 to keep them in range for high degrees.
pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![1.0; n];
    for i in 0..n {
        for j in 0..n {
            if j != i {
                w[i] /= nodes[i] - nodes[j];
            }
        }
    }
    let scale = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for v in &mut w {
        *v /= scale;
    }
    w
}

/// Evaluate all Lagrange basis values at `x` via the barycentric formula.
pub fn eval_lagrange(nodes: &[f64], bary: &[f64], x: f64, out: &mut [f64]) {
    debug_assert_eq!(nodes.len(), out.len());
    for (j, &node) in nodes.iter().enumerate() {
        if x == node {
            out.fill(0.0);
            out[j] = 1.0;
            return;
        }
    }
    let mut denom = 0.0;
    for i in 0..nodes.len() {
        let t = bary[i] / (x - nodes[i]);
        out[i] = t;
        denom += t;
    }
    for v in out {
        *v /= denom;
    }
}

/// Evaluate all Lagrange basis derivatives at `x`.
pub fn eval_lagrange_deriv(nodes: &[f64], bary: &[f64], x: f64, out: &mut [f64]) {
    debug_assert_eq!(nodes.len(), out.len());
    let n = nodes.len();
    for (j, &node) in nodes.iter().enumerate() {
        if x == node {
            // Differentiation-matrix row at a node.
            let mut sum = 0.0;
            for i in 0..n {
                if i != j {
                    let d = (bary[i] / bary[j]) / (node - nodes[i]);
                    out[i] = d;
                    sum += d;
                }
            }
            out[j] = -sum;
            return;
        }
    }
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    for i in 0..n {
        let d = x - nodes[i];
        let t = bary[i] / d;
        out[i] = t;
        s0 += t;
        s1 += t / d;
    }
    for (i, v) in out.iter_mut().enumerate() {
        let li = *v / s0;
        *v = li * (s1 / s0 - 1.0 / (x - nodes[i]));
    }
}

/// 1D nodal basis of degree `p` tabulated at a q-point Gauss rule: the values
/// `b[k*(p+1)+i] = l_i(x_k)` and derivatives `g[k*(p+1)+i] = l_i'(x_k)`.
#[derive(Clone, Debug)]
pub struct Basis1D {
    pub p: usize,
    pub q: usize,
    pub nodes: Vec<f64>,
    pub quad_points: Vec<f64>,
    pub quad_weights: Vec<f64>,
    pub b: Vec<f64>,
    pub g: Vec<f64>,
    bary: Vec<f64>,
}

impl Basis1D {
    pub fn new(p: usize, q: usize) -> Result<Self> {
        let nodes = gll_nodes(p)?;
        let (quad_points, quad_weights) = gauss_quadrature(q)?;
        let bary = barycentric_weights(&nodes);
        let n = p + 1;
        let mut b = vec![0.0; q * n];
        let mut g = vec![0.0; q * n];
        for (k, &x) in quad_points.iter().enumerate() {
            eval_lagrange(&nodes, &bary, x, &mut b[k * n..(k + 1) * n]);
            eval_lagrange_deriv(&nodes, &bary, x, &mut g[k * n..(k + 1) * n]);
        }
        Ok(Self {
            p,
            q,
            nodes,
            quad_points,
            quad_weights,
            b,
            g,
            bary,
        })
    }

    /// Default quadrature count for bilinear forms: q = p + 2.
    pub fn with_default_rule(p: usize) -> Result<Self> {
        Self::new(p, p + 2)
    }

    pub fn num_nodes(&self) -> usize {
        self.p + 1
    }

    /// Basis values at an arbitrary point of [0, 1].
    pub fn eval(&self, x: f64, out: &mut [f64]) {
        eval_lagrange(&self.nodes, &self.bary, x, out);
    }

    /// Basis derivatives at an arbitrary point of [0, 1].
    pub fn eval_deriv(&self, x: f64, out: &mut [f64]) {
        eval_lagrange_deriv(&self.nodes, &self.bary, x, out);
    }
}
