//! The summation formula with an `(N-2)`-tuple `q` and a plain additive
//! twist on one side, written out independently of the balanced code.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{BalancedParams, VoronoiError};
use crate::coefficients::CoefficientProvider;
use crate::kloosterman::{self, admissible_dvecs, kloosterman_by_residue};
use crate::modarith::{self, e_frac, mod_inverse};
use crate::transforms::{OmegaCache, TestFunction};

type C64 = Complex64;

fn graded(v: &[u64], top: usize) -> f64 {
    v.iter().enumerate().map(|(i, &x)| (x as f64).powi((top - i) as i32)).product()
}

fn check_rank(provider: &CoefficientProvider, qvec: &[u64]) -> Result<usize, VoronoiError> {
    let n = provider.rank();
    if n < 3 || qvec.len() != n - 2 {
        return Err(VoronoiError::InvalidParams(format!("rank {n} needs {} entries in q, got {}", n.saturating_sub(2), qvec.len())));
    }
    Ok(n)
}

/// `sum_{n in range} F(q_{N-2}, ..., q_1, n) e(h n / c) weight(n / (q_1^{N-2} ... q_{N-2}))`.
pub fn additive_side(
    provider: &CoefficientProvider,
    qvec: &[u64],
    h: i64,
    c: u64,
    weight: &(dyn Fn(f64) -> C64 + Sync),
    n_range: (u64, u64),
) -> Result<C64, VoronoiError> {
    let n = check_rank(provider, qvec)?;
    let scale = graded(qvec, n - 2);
    let hr = modarith::reduce(h as i128, c);
    let terms: Vec<Result<C64, VoronoiError>> = (n_range.0.max(1)..=n_range.1)
        .into_par_iter()
        .map(|m| {
            let w = weight(m as f64 / scale);
            if w == C64::new(0.0, 0.0) {
                return Ok(w);
            }
            let mut idx: Vec<u64> = qvec.iter().rev().copied().collect();
            idx.push(m);
            Ok(provider.coeff(&idx)? * e_frac(hr as i128 * m as i128, c) * w)
        })
        .collect();
    let mut s = C64::new(0.0, 0.0);
    for t in terms {
        s += t?;
    }
    Ok(s)
}

/// `sum_d d_1^{N-2} ... d_{N-2} sum_{n <= y_max / Y} F(n, d_{N-2}, ..., d_1) / c^{N-1}
/// [Kl(a, n) phi(-n Y) + Kl(a, -n) phi(n Y)]` with `Y = d_1^{N-1} ... d_{N-2}^2 / c^N`.
/// `phi` must vanish for `|y| > y_max`.
pub fn kloosterman_side(
    provider: &CoefficientProvider,
    qvec: &[u64],
    a: i64,
    c: u64,
    phi: &(dyn Fn(f64) -> C64 + Sync),
    y_max: f64,
) -> Result<C64, VoronoiError> {
    let n = check_rank(provider, qvec)?;
    let budget = kloosterman::work_budget();
    let cn = (c as f64).powi(n as i32);
    let mut total = C64::new(0.0, 0.0);
    for dvec in admissible_dvecs(c, qvec)? {
        let kl = kloosterman_by_residue(a, c, qvec, &dvec, budget)?;
        let m = kl.len() as i128;
        let y = graded(&dvec, n - 1) / cn;
        let w = graded(&dvec, n - 2) / (c as f64).powi(n as i32 - 1);
        let n_max = (y_max / y).floor() as u64;
        let terms: Vec<Result<C64, VoronoiError>> = (1..=n_max)
            .into_par_iter()
            .map(|k| {
                let arg = k as f64 * y;
                let (neg, pos) = (phi(-arg), phi(arg));
                if neg == C64::new(0.0, 0.0) && pos == C64::new(0.0, 0.0) {
                    return Ok(neg);
                }
                let mut idx = vec![k];
                idx.extend(dvec.iter().rev());
                let kp = kl[(k as i128).rem_euclid(m) as usize];
                let kn = kl[(-(k as i128)).rem_euclid(m) as usize];
                Ok(provider.coeff(&idx)? * (kp * neg + kn * pos))
            })
            .collect();
        let mut s = C64::new(0.0, 0.0);
        for t in terms {
            s += t?;
        }
        total += s * w;
    }
    Ok(total)
}

/// Both balanced sides for an empty `q` tuple through the functions above,
/// using the contragredient provider. The dual side runs over `1..=n_end`.
pub fn balanced_via_original(
    provider: &CoefficientProvider,
    params: &BalancedParams,
    omega: &TestFunction,
    cache: &OmegaCache,
    n_end: u64,
) -> Result<(C64, C64), VoronoiError> {
    params.validate()?;
    if params.l() != 0 {
        return Err(VoronoiError::InvalidParams("the original-formula path needs an empty q tuple".into()));
    }
    let dual = provider.contragredient();
    let (n, m, c) = (params.rank as i32, params.m(), params.c);
    let cn = (c as f64).powi(n);
    let a_bar = mod_inverse(params.a, c)?.value() as i64;
    let c_pow = (c as f64).powi(n - 1);
    let phi = |y: f64| if y < 0.0 { C64::new(c_pow * omega.eval(-y * cn), 0.0) } else { C64::new(0.0, 0.0) };
    let lhs = kloosterman_side(&dual, &params.big_q, a_bar, c, &phi, omega.support().1 / cn)?;

    let s1 = if (m + 1) % 2 == 0 { 1.0 } else { -1.0 };
    let first = |x: f64| cache.get(s1 * x / cn).map(|v| v.value / c as f64).unwrap_or(C64::new(f64::NAN, 0.0));
    let second = |x: f64| cache.get(-s1 * x / cn).map(|v| v.value / c as f64).unwrap_or(C64::new(f64::NAN, 0.0));
    let rhs = additive_side(&dual, &params.big_q, params.a, c, &first, (1, n_end))?
        + additive_side(&dual, &params.big_q, -params.a, c, &second, (1, n_end))?;
    Ok((lhs, rhs))
}
