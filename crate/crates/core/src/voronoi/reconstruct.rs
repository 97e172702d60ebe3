//! The balanced sides rebuilt as finite averages of instances of the
//! formula with an additive twist, through the opened outer sums.

use num_complex::Complex64;
use rayon::prelude::*;

use super::original::{additive_side, kloosterman_side};
use super::{graded_product, rhs_chains, support_range, BalancedParams, VoronoiError};
use crate::coefficients::CoefficientProvider;
use crate::identities::{outer_chains, outer_weights};
use crate::kloosterman::chain_moduli;
use crate::modarith::{self, mod_inverse};
use crate::transforms::TestFunction;

type C64 = Complex64;

/// One `D` chain with its opened weights: the modulus `c'`, the tuple
/// `q' = (D_M, ..., D_1, q_1, ..., q_L)`, `P = D_1 ... D_M` and the weight
/// `D_1^M ... D_M`.
struct Opened {
    dvec: Vec<u64>,
    c_last: u64,
    qprime: Vec<u64>,
    p: f64,
    weight: f64,
    outer: Vec<(u64, C64)>,
}

fn opened(params: &BalancedParams) -> Result<Vec<Opened>, VoronoiError> {
    params.validate()?;
    let m = params.m() as u32;
    outer_chains(params.c, &params.big_q)
        .map_err(|e| VoronoiError::InvalidParams(e.to_string()))?
        .into_iter()
        .map(|dvec| {
            let c_last = *chain_moduli(params.c, &params.big_q, &dvec)?.last().expect("m_0");
            let qprime: Vec<u64> = dvec.iter().rev().chain(&params.qvec).copied().collect();
            let outer = outer_weights(params.a, params.c, &params.big_q, &dvec).map_err(|e| VoronoiError::InvalidParams(e.to_string()))?;
            Ok(Opened {
                p: dvec.iter().map(|&d| d as f64).product(),
                weight: graded_product(&dvec, m)? as f64,
                dvec,
                c_last,
                qprime,
                outer,
            })
        })
        .collect()
}

/// Left side as `sum_D W_D sum_x w(x) * additive_side(q', inv(x) mod c', c', omega(. P^N))`.
pub fn reconstructed_lhs(provider: &CoefficientProvider, params: &BalancedParams, omega: &TestFunction) -> Result<C64, VoronoiError> {
    let n = params.rank as i32;
    let (l, m) = (params.l() as u32, params.m() as u32);
    let mut total = C64::new(0.0, 0.0);
    for o in opened(params)? {
        let pn = o.p.powi(n);
        let weight = move |x: f64| C64::new(omega.eval(x * pn), 0.0);
        let range = support_range(omega, graded_product(&o.dvec, m + 1)?, graded_product(&params.qvec, l)?);
        let mut s = C64::new(0.0, 0.0);
        for &(x, w) in &o.outer {
            let h = mod_inverse(x as i64, o.c_last)?.value() as i64;
            s += additive_side(provider, &o.qprime, h, o.c_last, &weight, range)? * w;
        }
        total += s * o.weight;
    }
    Ok(total)
}

/// Right side with `Omega` replaced by a function `phi` vanishing for
/// `|y| > y_max`, summed directly over the `d` chains.
pub fn balanced_rhs_compact(
    provider: &CoefficientProvider,
    params: &BalancedParams,
    phi: &(dyn Fn(f64) -> C64 + Sync),
    y_max: f64,
) -> Result<C64, VoronoiError> {
    params.validate()?;
    let mut total = C64::new(0.0, 0.0);
    for ch in rhs_chains(params)? {
        let step = ch.num as f64 / ch.den as f64;
        let n_max = (y_max / step).floor() as u64;
        let m = ch.kl.len() as u64;
        let terms: Vec<Result<C64, VoronoiError>> = (1..=n_max)
            .into_par_iter()
            .map(|n| {
                let y = super::dual_argument(n, ch.num, ch.den);
                let (first, second) = (phi(ch.first_sign * y), phi(-ch.first_sign * y));
                let kp = ch.kl[modarith::reduce(n as i128, m) as usize];
                let kn = ch.kl[modarith::reduce(-(n as i128), m) as usize];
                let mut idx = vec![n];
                idx.extend(ch.dvec.iter().rev());
                idx.extend(&params.big_q);
                Ok(provider.coeff(&idx)? * (kp * first + kn * second) * ch.weight)
            })
            .collect();
        for t in terms {
            total += t?;
        }
    }
    Ok(total)
}

/// The same right side as `sum_D W_D sum_x w(x) * kloosterman_side(q', x, c', P^{-N} phi(. / P^N))`.
pub fn reconstructed_rhs(
    provider: &CoefficientProvider,
    params: &BalancedParams,
    phi: &(dyn Fn(f64) -> C64 + Sync),
    y_max: f64,
) -> Result<C64, VoronoiError> {
    let n = params.rank as i32;
    let mut total = C64::new(0.0, 0.0);
    for o in opened(params)? {
        let pn = o.p.powi(n);
        let scaled = move |y: f64| phi(y / pn) / pn;
        let mut s = C64::new(0.0, 0.0);
        for &(x, w) in &o.outer {
            s += kloosterman_side(provider, &o.qprime, x as i64, o.c_last, &scaled, y_max * pn)? * w;
        }
        total += s * o.weight;
    }
    Ok(total)
}
