//! Partial sums of the Dirichlet series attached to the two sides.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::VoronoiError;
use crate::coefficients::CoefficientProvider;
use crate::kloosterman::{self, admissible_dvecs, kloosterman_by_residue};
use crate::modarith::{self, e_frac, gcd};

type C64 = Complex64;

/// Which series: the balanced one with `Kl_M` twists, or the plain additive
/// twist with an `(N-2)`-tuple `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesKind {
    Balanced,
    Additive,
}

/// Enumeration order of the double sum over chains and `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumOrder {
    ChainsOuter,
    TermsOuter,
}

/// Series data. `twist` is the residue placed in the exponential sum
/// (`inv(a)` for the primal series, `a` or `-a` for the dual ones).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub c: u64,
    pub twist: i64,
    pub qvec: Vec<u64>,
    pub big_q: Vec<u64>,
}

fn pow_c(x: u64, e: C64) -> C64 {
    C64::new(x as f64, 0.0).powc(e)
}

/// Partial sum over `n <= n_max`; for the dual side pass the contragredient
/// provider with `q` and `Q` exchanged.
pub fn dirichlet_partial(
    provider: &CoefficientProvider,
    spec: &SeriesSpec,
    s: C64,
    n_max: u64,
    kind: SeriesKind,
    order: SumOrder,
) -> Result<C64, VoronoiError> {
    if spec.c == 0 || gcd(spec.twist, spec.c as i64) != 1 {
        return Err(VoronoiError::InvalidParams(format!("twist {} is not a unit modulo {}", spec.twist, spec.c)));
    }
    let rank = provider.rank();
    if spec.qvec.len() + spec.big_q.len() + 2 != rank {
        return Err(VoronoiError::InvalidParams("len(q) + len(Q) + 2 must equal the rank".into()));
    }
    match kind {
        SeriesKind::Additive => additive(provider, spec, s, n_max),
        SeriesKind::Balanced => balanced(provider, spec, s, n_max, order),
    }
}

fn additive(provider: &CoefficientProvider, spec: &SeriesSpec, s: C64, n_max: u64) -> Result<C64, VoronoiError> {
    if !spec.big_q.is_empty() {
        return Err(VoronoiError::InvalidParams("the additive series takes no Q tuple".into()));
    }
    let k = spec.qvec.len();
    let mut norm = C64::new(1.0, 0.0);
    for (i, &q) in spec.qvec.iter().enumerate() {
        norm *= pow_c(q, s * (k - i) as f64);
    }
    let h = modarith::reduce(spec.twist as i128, spec.c);
    let mut idx: Vec<u64> = spec.qvec.iter().rev().copied().collect();
    idx.push(0);
    let mut total = C64::new(0.0, 0.0);
    for n in 1..=n_max {
        *idx.last_mut().expect("n slot") = n;
        total += provider.coeff(&idx)? * e_frac(h as i128 * n as i128, spec.c) / pow_c(n, s);
    }
    Ok(total * norm)
}

fn balanced(provider: &CoefficientProvider, spec: &SeriesSpec, s: C64, n_max: u64, order: SumOrder) -> Result<C64, VoronoiError> {
    let (l, m) = (spec.qvec.len(), spec.big_q.len());
    let budget = kloosterman::work_budget();
    let mut qnorm = C64::new(1.0, 0.0);
    for (i, &q) in spec.qvec.iter().enumerate() {
        qnorm *= pow_c(q, s * (l - i) as f64);
    }
    struct Chain {
        idx: Vec<u64>,
        factor: C64,
        kl: Vec<C64>,
    }
    let chains = admissible_dvecs(spec.c, &spec.big_q)?
        .into_iter()
        .map(|dvec| {
            let mut den = C64::new(1.0, 0.0);
            for (j, &d) in dvec.iter().enumerate() {
                den *= pow_c(d, s * (m + 1 - j) as f64 - (m - j) as f64);
            }
            let kl = kloosterman_by_residue(spec.twist, spec.c, &spec.big_q, &dvec, budget)?;
            let mut idx: Vec<u64> = spec.qvec.iter().rev().chain(&dvec).copied().collect();
            idx.push(0);
            Ok(Chain { idx, factor: qnorm / den, kl })
        })
        .collect::<Result<Vec<_>, VoronoiError>>()?;
    let term = |ch: &Chain, n: u64| -> Result<C64, VoronoiError> {
        let mut idx = ch.idx.clone();
        *idx.last_mut().expect("n slot") = n;
        let kl = ch.kl[modarith::reduce(n as i128, ch.kl.len() as u64) as usize];
        Ok(provider.coeff(&idx)? * kl * ch.factor / pow_c(n, s))
    };
    let mut total = C64::new(0.0, 0.0);
    match order {
        SumOrder::ChainsOuter => {
            for ch in &chains {
                for n in 1..=n_max {
                    total += term(ch, n)?;
                }
            }
        }
        SumOrder::TermsOuter => {
            for n in 1..=n_max {
                for ch in chains.iter().rev() {
                    total += term(ch, n)?;
                }
            }
        }
    }
    Ok(total)
}
