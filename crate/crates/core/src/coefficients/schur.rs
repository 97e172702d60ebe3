//! Schur polynomials in Satake parameters.

use num_complex::Complex64;

/// Elementary symmetric polynomials `e_0..e_N` of `alphas`.
pub fn elementary(alphas: &[Complex64]) -> Vec<Complex64> {
    let mut e = vec![Complex64::new(0.0, 0.0); alphas.len() + 1];
    e[0] = Complex64::new(1.0, 0.0);
    for (k, &a) in alphas.iter().enumerate() {
        for j in (1..=k + 1).rev() {
            let prev = e[j - 1];
            e[j] += a * prev;
        }
    }
    e
}

/// Complete homogeneous symmetric polynomials `h_0..h_max` by the recurrence
/// `h_k = sum_{i=1}^{min(k,N)} (-1)^{i-1} e_i h_{k-i}`.
pub fn complete(alphas: &[Complex64], max: usize) -> Vec<Complex64> {
    let e = elementary(alphas);
    let n = alphas.len();
    let mut h = vec![Complex64::new(0.0, 0.0); max + 1];
    h[0] = Complex64::new(1.0, 0.0);
    for k in 1..=max {
        let mut s = Complex64::new(0.0, 0.0);
        for i in 1..=k.min(n) {
            let term = e[i] * h[k - i];
            if i % 2 == 1 {
                s += term;
            } else {
                s -= term;
            }
        }
        h[k] = s;
    }
    h
}

/// `s_mu` from precomputed complete symmetric polynomials, by the
/// Jacobi-Trudi determinant `det[h_{mu_i - i + j}]`.
pub fn schur_from_complete(partition: &[u32], h: &[Complex64]) -> Complex64 {
    let parts: Vec<i64> = partition.iter().filter(|&&p| p > 0).map(|&p| p as i64).collect();
    let l = parts.len();
    if l == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let entry = |k: i64| -> Complex64 {
        if k < 0 {
            Complex64::new(0.0, 0.0)
        } else {
            h[k as usize]
        }
    };
    let mut m: Vec<Vec<Complex64>> = (0..l)
        .map(|i| (0..l).map(|j| entry(parts[i] - i as i64 + j as i64)).collect())
        .collect();
    determinant(&mut m)
}

pub fn schur(partition: &[u32], alphas: &[Complex64]) -> Complex64 {
    let top = partition.iter().copied().max().unwrap_or(0) as usize + partition.len();
    schur_from_complete(partition, &complete(alphas, top))
}

/// Determinant by Gaussian elimination with partial pivoting (destroys `m`).
pub fn determinant(m: &mut [Vec<Complex64>]) -> Complex64 {
    let n = m.len();
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].norm().total_cmp(&m[b][col].norm()))
            .expect("non-empty");
        if m[pivot][col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for k in col..n {
                let v = m[col][k];
                m[r][k] -= f * v;
            }
        }
    }
    det
}
