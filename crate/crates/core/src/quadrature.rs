//! Gauss-Legendre rules and adaptive integration of complex-valued integrands.

use std::sync::OnceLock;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("adaptive quadrature on [{a}, {b}] did not reach tolerance (estimate {estimate:e})")]
    NoConvergence { a: f64, b: f64, estimate: f64 },
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton iteration from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// The shared 16-point rule.
pub fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

fn panel<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Complex64 {
    let (x, w) = gl16();
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    let mut s = Complex64::new(0.0, 0.0);
    for (xi, wi) in x.iter().zip(w) {
        s += f(mid + half * xi) * *wi;
    }
    s * half
}

/// Adaptive bisection with the 16-point rule: a panel is accepted when its
/// value agrees with the sum over its two halves within its share of the
/// tolerance. `initial` fixes the number of equal starting panels.
pub fn integrate<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, tol: f64, initial: usize) -> Result<(Complex64, f64), QuadratureError> {
    const MAX_DEPTH: u32 = 40;
    let n = initial.max(1);
    let h = (b - a) / n as f64;
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    for i in 0..n {
        let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
        let whole = panel(f, lo, hi);
        let (v, e) = refine(f, lo, hi, whole, tol / n as f64, MAX_DEPTH).ok_or(QuadratureError::NoConvergence {
            a: lo,
            b: hi,
            estimate: f64::NAN,
        })?;
        total += v;
        err += e;
    }
    Ok((total, err))
}

fn refine<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, whole: Complex64, tol: f64, depth: u32) -> Option<(Complex64, f64)> {
    let mid = (a + b) / 2.0;
    let left = panel(f, a, mid);
    let right = panel(f, mid, b);
    let est = (left + right - whole).norm();
    if est <= tol || (b - a) < 1e-12 * (a.abs() + b.abs()).max(1.0) {
        return Some((left + right, est));
    }
    if depth == 0 {
        return None;
    }
    let (l, el) = refine(f, a, mid, left, tol / 2.0, depth - 1)?;
    let (r, er) = refine(f, mid, b, right, tol / 2.0, depth - 1)?;
    Some((l + r, el + er))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 20] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            for k in 0..2 * n {
                let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k as i32)).sum();
                let want = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((got - want).abs() < 1e-13, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn adaptive_oscillatory() {
        let f = |x: f64| Complex64::new(0.0, 40.0 * x).exp();
        let (v, _) = integrate(&f, 0.0, 2.0, 1e-13, 4).unwrap();
        let want = (Complex64::new(0.0, 80.0).exp() - 1.0) / Complex64::new(0.0, 40.0);
        assert!((v - want).norm() < 1e-13);
    }

    #[test]
    fn adaptive_endpoint_singularity_in_derivative() {
        let f = |x: f64| Complex64::new(x.sqrt(), 0.0);
        let (v, _) = integrate(&f, 0.0, 1.0, 1e-12, 1).unwrap();
        assert!((v.re - 2.0 / 3.0).abs() < 1e-11);
    }
}
