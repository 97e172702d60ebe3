//! Finite exponential-sum identities behind the balanced summation formula:
//! the divisor-sum cancellation lemma and the collapse of a partially opened
//! hyper-Kloosterman sum.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::kloosterman::{
    self, admissible_dvecs, additive_terminal, chain_moduli, ChainLevel, KloostermanError, KloostermanSpec, Link, PhaseChain,
};
use crate::modarith::{self, gcd, mod_inverse, ArithError, PhaseHistogram};
use crate::report::VerificationReport;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IdentityError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Kloosterman(#[from] KloostermanError),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalMode {
    Float,
    Exact,
}

/// Parameters of the cancellation lemma
/// `sum_{D | QC} sum*_{x mod QC/D} e(D x a / C + b y x / (QC/D))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CancelSpec {
    pub big_c: u64,
    pub big_q: u64,
    pub b: u64,
    pub y: i64,
    pub a: i64,
}

impl CancelSpec {
    pub fn validate(&self) -> Result<(), IdentityError> {
        let qc = self.big_q * self.big_c;
        if self.big_c == 0 || self.big_q == 0 || self.b == 0 || qc % self.b != 0 {
            return Err(IdentityError::InvalidSpec(format!("b = {} must divide QC = {qc}", self.b)));
        }
        if gcd(self.y, (qc / self.b) as i64) != 1 {
            return Err(IdentityError::InvalidSpec(format!("y = {} not coprime to QC/b = {}", self.y, qc / self.b)));
        }
        if gcd(self.a, self.big_c as i64) != 1 {
            return Err(IdentityError::InvalidSpec(format!("a = {} not coprime to C = {}", self.a, self.big_c)));
        }
        Ok(())
    }

    /// Whether the lemma predicts the nonzero value `QC`.
    pub fn predicts_nonzero(&self) -> bool {
        self.b == self.big_q && (self.y + self.a).rem_euclid(self.big_c as i64) == 0
    }
}

/// The three evaluations of the lemma as formal sums over `e(r/QC)`.
#[derive(Debug, Clone)]
pub struct CancelValues {
    pub direct: PhaseHistogram,
    pub closed: PhaseHistogram,
    pub oracle: PhaseHistogram,
}

pub fn lemma_cancel_values(spec: &CancelSpec) -> Result<CancelValues, IdentityError> {
    spec.validate()?;
    let qc = spec.big_q * spec.big_c;
    let (a, y) = (spec.a as i128, spec.y as i128);
    let mut direct = PhaseHistogram::new(qc)?;
    for d in modarith::divisors(qc)? {
        let m = qc / d;
        for x in modarith::units(m) {
            // D x a / C + b y x / (QC/D) = D x (Q a + b y) / QC
            let num = d as i128 * x as i128 * (spec.big_q as i128 * a + spec.b as i128 * y);
            direct.add(num, 1);
        }
    }
    let mut closed = PhaseHistogram::new(qc)?;
    if spec.predicts_nonzero() {
        closed.add(0, qc as i64);
    }
    let mut oracle = PhaseHistogram::new(qc)?;
    for z in 0..qc {
        oracle.add(z as i128 * (spec.big_q as i128 * a + spec.b as i128 * y), 1);
    }
    Ok(CancelValues { direct, closed, oracle })
}

pub fn lemma_cancel_check(spec: &CancelSpec, mode: EvalMode) -> Result<VerificationReport, IdentityError> {
    let v = lemma_cancel_values(spec)?;
    let (direct, closed, oracle) = (v.direct.evaluate(), v.closed.evaluate(), v.oracle.evaluate());
    let summands = (spec.big_q * spec.big_c) as f64;
    let tol = 1e-9 * summands.max(1.0);
    let spread = (direct - closed).norm().max((oracle - closed).norm()).max((direct - oracle).norm());
    let mut report = VerificationReport::absolute("lemma-cancel", json!(spec), direct, closed, tol)
        .with_meta("oracle", json!([oracle.re, oracle.im]))
        .with_meta("mode", json!(mode));
    report.abs_err = spread;
    report.passed = spread <= tol;
    if mode == EvalMode::Exact {
        let mut d1 = v.direct.clone();
        d1.merge(&v.closed, -1)?;
        let mut d2 = v.oracle.clone();
        d2.merge(&v.closed, -1)?;
        let equal = d1.is_zero_exact()? && d2.is_zero_exact()?;
        report.exact = Some(equal);
        report.passed = equal;
    }
    Ok(report)
}

/// Every valid lemma spec with `C <= max_c`, `Q <= max_q`, in lexicographic order.
pub fn lemma_grid(max_c: u64, max_q: u64) -> Vec<CancelSpec> {
    let mut out = Vec::new();
    for big_c in 1..=max_c {
        for big_q in 1..=max_q {
            let qc = big_q * big_c;
            for b in modarith::divisors(qc).expect("small modulus") {
                for y in modarith::units(qc / b) {
                    for a in modarith::units(big_c) {
                        out.push(CancelSpec { big_c, big_q, b, y: y as i64, a: a as i64 });
                    }
                }
            }
        }
    }
    out
}

/// Parameters of the collapse identity: the weighted sum over `D` chains of a
/// partially opened `Kl_{N-2}` with inner divisors `b` and outer divisors `d`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CollapseSpec {
    pub a: i64,
    pub n: i64,
    pub c: u64,
    pub qvec: Vec<u64>,
    pub big_q: Vec<u64>,
    pub dvec: Vec<u64>,
    pub bvec: Vec<u64>,
}

impl CollapseSpec {
    pub fn validate(&self) -> Result<(), IdentityError> {
        if self.qvec.len() != self.dvec.len() || self.big_q.len() != self.bvec.len() {
            return Err(IdentityError::InvalidSpec("vector lengths differ".into()));
        }
        if self.c == 0 || gcd(self.a, self.c as i64) != 1 {
            return Err(IdentityError::InvalidSpec(format!("a = {} not coprime to c = {}", self.a, self.c)));
        }
        if self.qvec.iter().chain(&self.big_q).chain(&self.dvec).chain(&self.bvec).any(|&v| v == 0) {
            return Err(IdentityError::InvalidSpec("entries must be positive".into()));
        }
        let top: u128 = self.big_q.iter().map(|&q| q as u128).product::<u128>() * self.c as u128;
        let bottom: u128 = self.bvec.iter().map(|&b| b as u128).product();
        if top % bottom != 0 {
            return Err(IdentityError::InvalidSpec("b product does not divide Q product times c".into()));
        }
        let inner = (top / bottom) as u64;
        if !kloosterman::validate_chain(inner, &self.qvec, &self.dvec)? {
            return Err(IdentityError::InvalidSpec("d does not form a chain".into()));
        }
        Ok(())
    }
}

/// `D_1^{M-1} D_2^{M-2} ... D_{M-1}`.
fn opened_weight(dchain: &[u64]) -> f64 {
    let m = dchain.len();
    dchain.iter().enumerate().map(|(j, &d)| (d as f64).powi((m - 1 - j) as i32)).product()
}

/// The opened chain for one outer `D` tuple: outer levels `x_1..x_M` followed
/// by the inner `Kl_{N-2}` levels with divisors `e = (b_M..b_1, d_1..d_L)`.
/// Returns `None` when `e` is not a chain for this `D`.
fn opened_chain(c: u64, big_q: &[u64], dchain: &[u64], qvec: &[u64], evec: &[u64]) -> Result<Option<PhaseChain>, IdentityError> {
    let outer = chain_moduli(c, big_q, dchain)?;
    let c_inner = *outer.last().expect("m_0");
    let inner_q: Vec<u64> = dchain.iter().rev().chain(qvec).copied().collect();
    let inner = match chain_moduli(c_inner, &inner_q, evec) {
        Ok(m) => m,
        Err(KloostermanError::InvalidChain { .. }) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let m = dchain.len();
    let mut levels = Vec::with_capacity(m + evec.len());
    for j in 0..m {
        let link = if j + 1 == m { Link::Identity } else { Link::Inverse };
        levels.push(ChainLevel { coeff: dchain[j], modulus: outer[j + 1], link });
    }
    for (i, &e) in evec.iter().enumerate() {
        levels.push(ChainLevel { coeff: e, modulus: inner[i + 1], link: Link::Inverse });
    }
    Ok(Some(PhaseChain::new(c, levels)?))
}

/// Value handed to the first level: `a` itself when nothing is opened,
/// otherwise its inverse modulo `c`.
fn initial_value(a: i64, c: u64, m: usize) -> Result<i64, IdentityError> {
    if m == 0 {
        Ok(a)
    } else {
        Ok(mod_inverse(a, c)?.value() as i64)
    }
}

/// All `D` chains for `(c, Q)`.
pub fn outer_chains(c: u64, big_q: &[u64]) -> Result<Vec<Vec<u64>>, IdentityError> {
    Ok(admissible_dvecs(c, big_q)?)
}

pub fn collapse_direct(spec: &CollapseSpec, budget: u64) -> Result<Complex64, IdentityError> {
    spec.validate()?;
    let evec: Vec<u64> = spec.bvec.iter().rev().chain(&spec.dvec).copied().collect();
    let u0 = initial_value(spec.a, spec.c, spec.big_q.len())?;
    let mut total = Complex64::new(0.0, 0.0);
    for dchain in outer_chains(spec.c, &spec.big_q)? {
        let Some(chain) = opened_chain(spec.c, &spec.big_q, &dchain, &spec.qvec, &evec)? else {
            continue;
        };
        chain.check_memoized_budget(budget)?;
        let terminal = additive_terminal(spec.n, chain.last_modulus());
        total += chain.evaluate(u0, &terminal) * opened_weight(&dchain);
    }
    Ok(total)
}

/// `c^M Q_1^M Q_2^{M-1} ... Q_M`.
fn collapse_factor(c: u64, big_q: &[u64]) -> f64 {
    let m = big_q.len();
    let mut f = (c as f64).powi(m as i32);
    for (j, &q) in big_q.iter().enumerate() {
        f *= (q as f64).powi((m - j) as i32);
    }
    f
}

pub fn collapse_closed(spec: &CollapseSpec, budget: u64) -> Result<Complex64, IdentityError> {
    spec.validate()?;
    if spec.bvec != spec.big_q {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let sign = if spec.big_q.len() % 2 == 0 { 1 } else { -1 };
    let kl = kloosterman::hyper_kloosterman_with_budget(
        &KloostermanSpec::new(sign * spec.a, spec.n, spec.c, spec.qvec.clone(), spec.dvec.clone()),
        budget,
    )?;
    Ok(kl * collapse_factor(spec.c, &spec.big_q))
}

pub const COLLAPSE_TOLERANCE: f64 = 1e-8;

pub fn collapse_check(spec: &CollapseSpec, budget: u64) -> Result<VerificationReport, IdentityError> {
    let direct = collapse_direct(spec, budget)?;
    let closed = collapse_closed(spec, budget)?;
    Ok(VerificationReport::absolute("collapse", json!(spec), direct, closed, COLLAPSE_TOLERANCE)
        .with_meta("on_locus", spec.bvec == spec.big_q))
}

/// Direct and collapsed values of one spec, produced by [`collapse_block`].
#[derive(Debug, Clone)]
pub struct CollapseValue {
    pub spec: CollapseSpec,
    pub direct: Complex64,
    pub closed: Complex64,
}

impl CollapseValue {
    pub fn report(&self) -> VerificationReport {
        VerificationReport::absolute("collapse", json!(self.spec), self.direct, self.closed, COLLAPSE_TOLERANCE)
            .with_meta("on_locus", self.spec.bvec == self.spec.big_q)
    }
}

/// All collapse specs sharing `(c, q, Q)`, for every reduced `a`, every `n`
/// in `ns`, every admissible `b` and `d`, in lexicographic spec order.
/// One pass over the `D` chains serves all of them at once.
pub fn collapse_block(c: u64, qvec: &[u64], big_q: &[u64], ns: &[i64], budget: u64) -> Result<Vec<CollapseValue>, IdentityError> {
    let m = big_q.len();
    let avals: Vec<i64> = modarith::units(c).into_iter().map(|a| a as i64).collect();
    // key (b, d, a, n) -> direct value
    let mut acc: BTreeMap<(Vec<u64>, Vec<u64>, i64, i64), Complex64> = BTreeMap::new();
    for dchain in outer_chains(c, big_q)? {
        let c_inner = *chain_moduli(c, big_q, &dchain)?.last().expect("m_0");
        let inner_q: Vec<u64> = dchain.iter().rev().chain(qvec).copied().collect();
        let weight = opened_weight(&dchain);
        for evec in admissible_dvecs(c_inner, &inner_q)? {
            let chain = opened_chain(c, big_q, &dchain, qvec, &evec)?.expect("admissible");
            chain.check_memoized_budget(budget)?;
            let last = chain.last_modulus();
            let terminals: Vec<Vec<Complex64>> = ns.iter().map(|&n| additive_terminal(n, last)).collect();
            let tables = chain.evaluate_all_multi(&terminals);
            let bvec: Vec<u64> = evec[..m].iter().rev().copied().collect();
            let dvec = evec[m..].to_vec();
            for &a in &avals {
                let u0 = initial_value(a, c, m)? as usize;
                for (j, &n) in ns.iter().enumerate() {
                    *acc.entry((bvec.clone(), dvec.clone(), a, n)).or_default() += tables[j][u0] * weight;
                }
            }
        }
    }
    // the locus b = Q is always scanned, even if no D tuple produced it
    for dvec in admissible_dvecs(c, qvec)? {
        for &a in &avals {
            for &n in ns {
                acc.entry((big_q.to_vec(), dvec.clone(), a, n)).or_default();
            }
        }
    }
    let sign = if m % 2 == 0 { 1 } else { -1 };
    let factor = collapse_factor(c, big_q);
    let mut closed_cache: BTreeMap<(Vec<u64>, i64), Vec<Complex64>> = BTreeMap::new();
    let mut out = Vec::with_capacity(acc.len());
    for ((bvec, dvec, a, n), direct) in acc {
        let closed = if bvec == big_q {
            let table = match closed_cache.get(&(dvec.clone(), a)) {
                Some(t) => t.clone(),
                None => {
                    let t = kloosterman::kloosterman_by_residue(sign * a, c, qvec, &dvec, budget)?;
                    closed_cache.insert((dvec.clone(), a), t.clone());
                    t
                }
            };
            table[modarith::reduce(n as i128, table.len() as u64) as usize] * factor
        } else {
            Complex64::new(0.0, 0.0)
        };
        let spec = CollapseSpec { a, n, c, qvec: qvec.to_vec(), big_q: big_q.to_vec(), dvec, bvec };
        out.push(CollapseValue { spec, direct, closed });
    }
    Ok(out)
}

fn tuples(len: usize, max_entry: u64) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|t| (1..=max_entry).map(move |x| {
                let mut t = t.clone();
                t.push(x);
                t
            }))
            .collect();
    }
    out
}

/// Every `(c, q, Q)` with `len(q) + len(Q) <= max_len`, `c <= max_c` and
/// entries in `1..=max_entry`, ordered by `(L, M, c, q, Q)`.
pub fn collapse_grid(max_len: usize, max_c: u64, max_entry: u64) -> Vec<(u64, Vec<u64>, Vec<u64>)> {
    let mut out = Vec::new();
    for l in 0..=max_len {
        for m in 0..=max_len - l {
            for c in 1..=max_c {
                for q in tuples(l, max_entry) {
                    for big_q in tuples(m, max_entry) {
                        out.push((c, q.clone(), big_q));
                    }
                }
            }
        }
    }
    out
}

/// Outer opened weights for one `D` chain: for each `x_M` (a reduced residue
/// modulo `Q_1..Q_M c / (D_1..D_M)`), the sum over `x_1..x_{M-1}` of
/// `e(D_1 x_1 inv(a) / c + ... + D_M x_M inv(x_{M-1}) / m_{M-1})`.
/// With `M = 0` this is the single entry `(a mod c, 1)`.
pub fn outer_weights(a: i64, c: u64, big_q: &[u64], dchain: &[u64]) -> Result<Vec<(u64, Complex64)>, IdentityError> {
    if gcd(a, c as i64) != 1 {
        return Err(IdentityError::InvalidSpec(format!("a = {a} not coprime to c = {c}")));
    }
    let m = big_q.len();
    if m == 0 {
        return Ok(vec![(modarith::reduce(a as i128, c), Complex64::new(1.0, 0.0))]);
    }
    let moduli = chain_moduli(c, big_q, dchain)?;
    let levels = (0..m)
        .map(|j| ChainLevel {
            coeff: dchain[j],
            modulus: moduli[j + 1],
            link: if j + 1 == m { Link::Identity } else { Link::Inverse },
        })
        .collect();
    let chain = PhaseChain::new(c, levels)?;
    let last = chain.last_modulus();
    let xs = modarith::units(last);
    let terminals: Vec<Vec<Complex64>> = xs
        .iter()
        .map(|&x| {
            let mut t = vec![Complex64::new(0.0, 0.0); last as usize];
            t[x as usize] = Complex64::new(1.0, 0.0);
            t
        })
        .collect();
    let tables = chain.evaluate_all_multi(&terminals);
    let u0 = mod_inverse(a, c)?.value() as usize;
    Ok(xs.iter().zip(tables).map(|(&x, t)| (x, t[u0])).collect())
}
