//! Both sides of the balanced Voronoi summation formula, the special case
//! with an empty `q` tuple written independently, and partial sums of the
//! associated Dirichlet series.

pub mod dirichlet;
pub mod original;
pub mod presets;
pub mod reconstruct;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::coefficients::{CoeffError, CoefficientProvider};
use crate::kloosterman::{self, admissible_dvecs, kloosterman_by_residue, KloostermanError};
use crate::modarith::{self, gcd, mod_inverse, ArithError};
use crate::report::VerificationReport;
use crate::transforms::{OmegaCache, TestFunction, TransformError};

type C64 = Complex64;

#[derive(Debug, Error)]
pub enum VoronoiError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error(transparent)]
    Kloosterman(#[from] KloostermanError),
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("dual sum for d = {dvec:?} did not stabilize by n = {n}")]
    NotStabilized { dvec: Vec<u64>, n: u64 },
}

/// `(N, a, c, q, Q)` with `L = len(q)`, `M = len(Q)` and `L + M + 2 = N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalancedParams {
    pub rank: usize,
    pub a: i64,
    pub c: u64,
    pub qvec: Vec<u64>,
    pub big_q: Vec<u64>,
}

impl BalancedParams {
    pub fn new(rank: usize, a: i64, c: u64, qvec: Vec<u64>, big_q: Vec<u64>) -> Result<Self, VoronoiError> {
        let p = BalancedParams { rank, a, c, qvec, big_q };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), VoronoiError> {
        if self.rank < 3 || self.qvec.len() + self.big_q.len() + 2 != self.rank {
            return Err(VoronoiError::InvalidParams(format!(
                "need len(q) + len(Q) + 2 = N >= 3, got {} + {} + 2 vs {}",
                self.qvec.len(),
                self.big_q.len(),
                self.rank
            )));
        }
        if self.c == 0 || gcd(self.a, self.c as i64) != 1 {
            return Err(VoronoiError::InvalidParams(format!("a = {} is not coprime to c = {}", self.a, self.c)));
        }
        if self.qvec.iter().chain(&self.big_q).any(|&v| v == 0) {
            return Err(VoronoiError::InvalidParams("q and Q entries must be positive".into()));
        }
        Ok(())
    }

    pub fn l(&self) -> usize {
        self.qvec.len()
    }

    pub fn m(&self) -> usize {
        self.big_q.len()
    }

    /// Inverse of `a` modulo `c`.
    pub fn a_bar(&self) -> Result<i64, VoronoiError> {
        Ok(mod_inverse(self.a, self.c)?.value() as i64)
    }

    pub fn to_json(&self) -> Value {
        json!({"N": self.rank, "L": self.l(), "M": self.m(), "a": self.a, "c": self.c, "q": self.qvec, "Q": self.big_q})
    }

    fn check_provider(&self, provider: &CoefficientProvider) -> Result<(), VoronoiError> {
        self.validate()?;
        if provider.rank() != self.rank {
            return Err(VoronoiError::InvalidParams(format!("provider has rank {}, parameters need {}", provider.rank(), self.rank)));
        }
        Ok(())
    }
}

/// `prod_j v_j^{top - j}` for `j = 0, 1, ...`, as an exact integer.
pub(crate) fn graded_product(v: &[u64], top: u32) -> Result<u128, VoronoiError> {
    let mut acc: u128 = 1;
    for (j, &x) in v.iter().enumerate() {
        let p = (x as u128).checked_pow(top - j as u32);
        acc = p.and_then(|p| acc.checked_mul(p)).ok_or_else(|| VoronoiError::InvalidParams("weights overflow u128".into()))?;
    }
    Ok(acc)
}

pub(crate) fn reduced_ratio(num: u128, den: u128) -> (u128, u128) {
    let g = num_integer::gcd(num, den);
    (num / g, den / g)
}

/// One `D` chain of the left side: its weight, the factor in the argument of
/// `omega`, and the `Kl_M` values by residue of `n`.
struct LhsChain {
    dvec: Vec<u64>,
    weight: f64,
    /// `omega` is evaluated at `n * num / den`.
    num: u128,
    den: u128,
    kl: Vec<C64>,
}

fn lhs_chains(params: &BalancedParams) -> Result<Vec<LhsChain>, VoronoiError> {
    let (l, m) = (params.l() as u32, params.m() as u32);
    let a_bar = params.a_bar()?;
    let budget = kloosterman::work_budget();
    let qs_rev: Vec<u64> = params.qvec.clone();
    let den = graded_product(&qs_rev, l)?;
    admissible_dvecs(params.c, &params.big_q)?
        .into_iter()
        .map(|dvec| {
            let weight = graded_product(&dvec, m)? as f64;
            let num = graded_product(&dvec, m + 1)?;
            let kl = kloosterman_by_residue(a_bar, params.c, &params.big_q, &dvec, budget)?;
            Ok(LhsChain { dvec, weight, num, den, kl })
        })
        .collect()
}

/// `n` range on which `omega(n * num / den)` can be nonzero.
pub(crate) fn support_range(omega: &TestFunction, num: u128, den: u128) -> (u64, u64) {
    let (lo, hi) = omega.support();
    let step = num as f64 / den as f64;
    let first = ((lo / step).floor() as u64).max(1);
    let last = (hi / step).ceil() as u64;
    (first, last)
}

/// Left side: the finite sum over `D` chains and the `n` with `omega` nonzero.
pub fn balanced_lhs(provider: &CoefficientProvider, params: &BalancedParams, omega: &TestFunction) -> Result<C64, VoronoiError> {
    params.check_provider(provider)?;
    let chains = lhs_chains(params)?;
    let prefix: Vec<u64> = params.qvec.iter().rev().copied().collect();
    let parts: Vec<Result<C64, VoronoiError>> = chains
        .par_iter()
        .map(|ch| {
            let (first, last) = support_range(omega, ch.num, ch.den);
            let mut idx: Vec<u64> = prefix.iter().chain(&ch.dvec).copied().collect();
            idx.push(0);
            let modulus = ch.kl.len() as u64;
            let mut s = C64::new(0.0, 0.0);
            for n in first..=last {
                let w = omega.eval(n as f64 * ch.num as f64 / ch.den as f64);
                if w == 0.0 {
                    continue;
                }
                *idx.last_mut().expect("n slot") = n;
                s += provider.coeff(&idx)? * ch.kl[modarith::reduce(n as i128, modulus) as usize] * w;
            }
            Ok(s * ch.weight)
        })
        .collect();
    let mut total = C64::new(0.0, 0.0);
    for p in parts {
        total += p?;
    }
    Ok(total)
}

/// Stopping rule for the dual `n` sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    /// Size below which a term counts as negligible is `tol / 10`.
    pub tol: f64,
    /// Never stop before this many terms.
    pub floor: u64,
    /// Number of consecutive negligible terms required.
    pub window: usize,
    /// `Omega` level defining the onset of decay.
    pub decay_level: f64,
    /// Give up past this `n`.
    pub n_limit: u64,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { tol: 1e-10, floor: 200, window: 5, decay_level: 1e-14, n_limit: 200_000 }
    }
}

/// Where one dual chain sum stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTruncation {
    pub dvec: Vec<u64>,
    pub y_step: f64,
    pub n_end: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSum {
    pub value: C64,
    pub chains: Vec<ChainTruncation>,
    /// Sum over terms of the coefficient size times the `Omega` tail bound.
    pub omega_tail: f64,
}

/// One `d` chain of the right side.
pub(crate) struct RhsChain {
    pub dvec: Vec<u64>,
    /// `d_1^L ... d_L / c^{L+1}`.
    pub weight: f64,
    /// `|Omega|` is evaluated at `n * num / den`.
    pub num: u128,
    pub den: u128,
    /// `Kl_L(a, n)` by residue of `n`.
    pub kl: Vec<C64>,
    /// Sign of the argument in the term carrying `Kl_L(a, n)`.
    pub first_sign: f64,
}

pub(crate) fn rhs_chains(params: &BalancedParams) -> Result<Vec<RhsChain>, VoronoiError> {
    let (l, m, n) = (params.l() as u32, params.m() as u32, params.rank as u32);
    let budget = kloosterman::work_budget();
    let cn = (params.c as u128).checked_pow(n).ok_or_else(|| VoronoiError::InvalidParams("c^N overflows".into()))?;
    let den = cn
        .checked_mul(graded_product(&params.big_q, m)?)
        .ok_or_else(|| VoronoiError::InvalidParams("c^N Q weights overflow".into()))?;
    let first_sign = if (m + 1) % 2 == 0 { 1.0 } else { -1.0 };
    admissible_dvecs(params.c, &params.qvec)?
        .into_iter()
        .map(|dvec| {
            let weight = graded_product(&dvec, l)? as f64 / (params.c as f64).powi(l as i32 + 1);
            let (num, den) = reduced_ratio(graded_product(&dvec, l + 1)?, den);
            let kl = kloosterman_by_residue(params.a, params.c, &params.qvec, &dvec, budget)?;
            Ok(RhsChain { dvec, weight, num, den, kl, first_sign })
        })
        .collect()
}

/// `|y|` for the `n`-th term of a chain, from the reduced exact ratio.
pub(crate) fn dual_argument(n: u64, num: u128, den: u128) -> f64 {
    let (a, b) = reduced_ratio(n as u128 * num, den);
    a as f64 / b as f64
}

impl RhsChain {
    fn index(&self, params: &BalancedParams, n: u64) -> Vec<u64> {
        let mut idx = Vec::with_capacity(params.rank - 1);
        idx.push(n);
        idx.extend(self.dvec.iter().rev());
        idx.extend(&params.big_q);
        idx
    }

    /// `Kl_L(a, n)` and `Kl_L(a, -n)`.
    fn kl_pair(&self, n: u64) -> (C64, C64) {
        let m = self.kl.len() as u64;
        (self.kl[modarith::reduce(n as i128, m) as usize], self.kl[modarith::reduce(-(n as i128), m) as usize])
    }
}

/// The `n`-th term of a dual chain and its coefficient size (for tail bounds).
fn dual_term(provider: &CoefficientProvider, params: &BalancedParams, ch: &RhsChain, cache: &OmegaCache, n: u64) -> Result<(C64, f64, f64), VoronoiError> {
    let x = dual_argument(n, ch.num, ch.den);
    let (op, om) = cache.pair(x);
    // Omega(+x) = op + om, Omega(-x) = op - om
    let (first, second) = if ch.first_sign > 0.0 { (op + om, op - om) } else { (op - om, op + om) };
    let (k_pos, k_neg) = ch.kl_pair(n);
    let coeff = provider.coeff(&ch.index(params, n))? * ch.weight;
    let size = coeff.norm() * (k_pos.norm() + k_neg.norm());
    Ok((coeff * (k_pos * first + k_neg * second), size, x))
}

/// Right side with `Omega` served by `cache`; each chain is summed until the
/// stopping rule of `trunc` is met.
pub fn balanced_rhs_with(provider: &CoefficientProvider, params: &BalancedParams, cache: &OmegaCache, trunc: &Truncation) -> Result<DualSum, VoronoiError> {
    params.check_provider(provider)?;
    let kernel = cache.kernel();
    let y_star = kernel.decay_threshold(trunc.decay_level);
    let mut value = C64::new(0.0, 0.0);
    let mut chains = Vec::new();
    let mut omega_tail = 0.0;
    for ch in rhs_chains(params)? {
        let step = ch.num as f64 / ch.den as f64;
        let start = ((y_star / step).ceil() as u64).max(trunc.floor).min(trunc.n_limit);
        let terms: Vec<Result<(C64, f64, f64), VoronoiError>> = (1..=start).into_par_iter().map(|n| dual_term(provider, params, &ch, cache, n)).collect();
        let mut quiet = 0usize;
        let mut s = C64::new(0.0, 0.0);
        for t in terms {
            let (v, size, x) = t?;
            s += v;
            omega_tail += size * 2.0 * kernel.tail_bound(x);
            quiet = if v.norm() < trunc.tol / 10.0 { quiet + 1 } else { 0 };
        }
        let mut n = start;
        while quiet < trunc.window {
            n += 1;
            if n > trunc.n_limit {
                return Err(VoronoiError::NotStabilized { dvec: ch.dvec.clone(), n: trunc.n_limit });
            }
            let (v, size, x) = dual_term(provider, params, &ch, cache, n)?;
            s += v;
            omega_tail += size * 2.0 * kernel.tail_bound(x);
            quiet = if v.norm() < trunc.tol / 10.0 { quiet + 1 } else { 0 };
        }
        value += s;
        chains.push(ChainTruncation { dvec: ch.dvec.clone(), y_step: step, n_end: n });
    }
    Ok(DualSum { value, chains, omega_tail })
}

/// Right side with explicit `n` ends per chain (same order as the chains).
pub fn balanced_rhs_fixed(provider: &CoefficientProvider, params: &BalancedParams, cache: &OmegaCache, n_ends: &[u64]) -> Result<C64, VoronoiError> {
    params.check_provider(provider)?;
    let chains = rhs_chains(params)?;
    if chains.len() != n_ends.len() {
        return Err(VoronoiError::InvalidParams("one n end per chain is required".into()));
    }
    let mut value = C64::new(0.0, 0.0);
    for (ch, &end) in chains.iter().zip(n_ends) {
        let terms: Vec<Result<(C64, f64, f64), VoronoiError>> = (1..=end).into_par_iter().map(|n| dual_term(provider, params, ch, cache, n)).collect();
        for t in terms {
            value += t?.0;
        }
    }
    Ok(value)
}

/// Settings and outcome shared by the balanced checks.
#[derive(Debug, Clone)]
pub struct VoronoiCheck<'a> {
    pub provider: &'a CoefficientProvider,
    pub omega: &'a TestFunction,
    pub cache: &'a OmegaCache,
    pub trunc: &'a Truncation,
    /// Relative tolerance of the comparison.
    pub tolerance: f64,
}

/// Agreement required between the balanced path and the dedicated path for
/// an empty `q` tuple.
pub const ORIGINAL_PATH_TOLERANCE: f64 = 1e-12;

/// Both sides and their discrepancy. For an empty `q` tuple, both sides are
/// also recomputed through [`original`] and the report fails if they differ
/// by more than [`ORIGINAL_PATH_TOLERANCE`] (relative).
pub fn verify_balanced(check: &VoronoiCheck<'_>, params: &BalancedParams) -> Result<VerificationReport, VoronoiError> {
    let lhs = balanced_lhs(check.provider, params, check.omega)?;
    let rhs = balanced_rhs_with(check.provider, params, check.cache, check.trunc)?;
    let kernel = check.cache.kernel();
    let mut spec = params.to_json();
    spec["provider"] = json!(check.provider.label());
    let mut report = VerificationReport::relative("balanced-voronoi", spec, lhs, rhs.value, check.tolerance)
        .with_meta("omega", kernel.label())
        .with_meta("sigma", kernel.sigma())
        .with_meta("contour_height", kernel.height())
        .with_meta("contour_nodes", kernel.node_count() as u64)
        .with_meta("omega_tail_total", rhs.omega_tail)
        .with_meta("truncation", serde_json::to_value(check.trunc).expect("serializes"))
        .with_meta("chains", serde_json::to_value(&rhs.chains).expect("serializes"));
    if params.l() == 0 {
        let n_end = rhs.chains.first().map(|c| c.n_end).unwrap_or(0);
        let (lhs_orig, rhs_orig) = original::balanced_via_original(check.provider, params, check.omega, check.cache, n_end)?;
        let scale = lhs.norm().max(rhs.value.norm()).max(1e-30);
        let dl = (lhs_orig - lhs).norm() / scale;
        let dr = (rhs_orig - rhs.value).norm() / scale;
        report = report.with_meta("original_path_lhs_diff", dl).with_meta("original_path_rhs_diff", dr);
        if dl > ORIGINAL_PATH_TOLERANCE || dr > ORIGINAL_PATH_TOLERANCE {
            report.passed = false;
        }
    }
    Ok(report)
}
