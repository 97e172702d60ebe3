//! Classical and hyper-Kloosterman sums.
//!
//! A hyper-Kloosterman sum is a nested sum over reduced residues
//! `x_1 mod m_1, ..., x_N mod m_N` with `m_0 = c` and
//! `m_i = q_1...q_i c / (d_1...d_i)`, whose phase is
//! `d_1 x_1 a / c + d_2 x_2 inv(x_1) / m_1 + ... + n inv(x_N) / m_N`.
//! Floating evaluation runs the nesting from the innermost variable outwards,
//! memoizing each inner partial sum by the residue it depends on.

use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modarith::{self, gcd, mod_inverse, mul_mod, reduce, root_table, ArithError, PhaseHistogram};

/// Default cap on the enumeration size `prod_i m_i`.
pub const DEFAULT_WORK_BUDGET: u64 = 100_000_000;

/// Environment variable overriding the default work budget.
pub const BUDGET_ENV: &str = "VORONOI_WORK_BUDGET";

static BUDGET_OVERRIDE: AtomicU64 = AtomicU64::new(0);

/// Work budget used by the convenience entry points.
pub fn work_budget() -> u64 {
    let set = BUDGET_OVERRIDE.load(Ordering::Relaxed);
    if set > 0 {
        return set;
    }
    std::env::var(BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&b| b > 0)
        .unwrap_or(DEFAULT_WORK_BUDGET)
}

/// Overrides the process-wide default budget (0 restores the default).
pub fn set_work_budget(budget: u64) {
    BUDGET_OVERRIDE.store(budget, Ordering::Relaxed);
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KloostermanError {
    #[error("q and d have different lengths ({q} vs {d})")]
    LengthMismatch { q: usize, d: usize },
    #[error("divisibility chain fails at level {level}: {d} does not divide {modulus}")]
    InvalidChain { level: usize, d: u64, modulus: u128 },
    #[error("a = {a} is not coprime to c = {c}")]
    NotCoprime { a: i64, c: u64 },
    #[error("enumeration size {size} exceeds the work budget {budget}")]
    BudgetExceeded { size: u128, budget: u64 },
    #[error("modulus {0} is too large")]
    ModulusTooLarge(u128),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KloostermanSpec {
    pub a: i64,
    pub n: i64,
    pub c: u64,
    pub qvec: Vec<u64>,
    pub dvec: Vec<u64>,
}

impl KloostermanSpec {
    pub fn new(a: i64, n: i64, c: u64, qvec: Vec<u64>, dvec: Vec<u64>) -> Self {
        KloostermanSpec { a, n, c, qvec, dvec }
    }

    pub fn rank(&self) -> usize {
        self.qvec.len()
    }
}

/// The moduli `m_0 = c, m_1, ..., m_N` of a divisibility chain.
pub fn chain_moduli(c: u64, qvec: &[u64], dvec: &[u64]) -> Result<Vec<u64>, KloostermanError> {
    if qvec.len() != dvec.len() {
        return Err(KloostermanError::LengthMismatch { q: qvec.len(), d: dvec.len() });
    }
    if c == 0 || qvec.contains(&0) || dvec.contains(&0) {
        return Err(ArithError::ZeroModulus.into());
    }
    let mut moduli = vec![c];
    let mut m = c as u128;
    for (i, (&q, &d)) in qvec.iter().zip(dvec).enumerate() {
        let top = m * q as u128;
        if top % d as u128 != 0 {
            return Err(KloostermanError::InvalidChain { level: i + 1, d, modulus: top });
        }
        m = top / d as u128;
        if m > u64::MAX as u128 / 4 {
            return Err(KloostermanError::ModulusTooLarge(m));
        }
        moduli.push(m as u64);
    }
    Ok(moduli)
}

pub fn validate_chain(c: u64, qvec: &[u64], dvec: &[u64]) -> Result<bool, KloostermanError> {
    match chain_moduli(c, qvec, dvec) {
        Ok(_) => Ok(true),
        Err(KloostermanError::InvalidChain { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// All `d` vectors forming a valid chain for `(c, q)`, in lexicographic order.
pub fn admissible_dvecs(c: u64, qvec: &[u64]) -> Result<Vec<Vec<u64>>, KloostermanError> {
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(qvec.len());
    extend_dvecs(c, qvec, &mut prefix, &mut out)?;
    Ok(out)
}

fn extend_dvecs(m: u64, qvec: &[u64], prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) -> Result<(), KloostermanError> {
    if prefix.len() == qvec.len() {
        out.push(prefix.clone());
        return Ok(());
    }
    let top = m * qvec[prefix.len()];
    for d in modarith::divisors(top)? {
        prefix.push(d);
        extend_dvecs(top / d, qvec, prefix, out)?;
        prefix.pop();
    }
    Ok(())
}

/// `S(a, b; c) = sum over reduced r mod c of e((a r + b inv(r)) / c)`.
pub fn classical_kloosterman(a: i64, b: i64, c: u64) -> Complex64 {
    assert!(c > 0, "Kloosterman modulus must be positive");
    let roots = root_table(c);
    let ar = reduce(a as i128, c);
    let br = reduce(b as i128, c);
    let mut sum = Complex64::new(0.0, 0.0);
    for r in modarith::units(c) {
        let inv = mod_inverse(r as i64, c).expect("unit").value();
        let ph = (mul_mod(ar, r, c) + mul_mod(br, inv, c)) % c;
        sum += roots[ph as usize];
    }
    sum
}

/// How a level hands its variable to the next level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    /// The next phase sees the inverse of this level's variable.
    Inverse,
    /// The next phase sees this level's variable itself.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainLevel {
    pub coeff: u64,
    pub modulus: u64,
    pub link: Link,
}

/// A nested exponential sum: level `i` sums a reduced residue `x_i mod m_i`
/// against `e(coeff_i x_i u_{i-1} / m_{i-1})`, where `u_{i-1}` is the value
/// handed down by the previous level (the initial value for `i = 1`).
/// After the last level a terminal function of `u_last mod m_last` is applied.
#[derive(Debug, Clone)]
pub struct PhaseChain {
    m0: u64,
    levels: Vec<ChainLevel>,
}

impl PhaseChain {
    pub fn new(m0: u64, levels: Vec<ChainLevel>) -> Result<Self, KloostermanError> {
        if m0 == 0 {
            return Err(ArithError::ZeroModulus.into());
        }
        let mut prev = m0;
        for (i, lvl) in levels.iter().enumerate() {
            if lvl.modulus == 0 {
                return Err(ArithError::ZeroModulus.into());
            }
            // the phase must be well defined in x_i mod m_i
            let top = lvl.coeff as u128 * lvl.modulus as u128;
            if top % prev as u128 != 0 {
                return Err(KloostermanError::InvalidChain { level: i + 1, d: lvl.coeff, modulus: top });
            }
            prev = lvl.modulus;
        }
        Ok(PhaseChain { m0, levels })
    }

    /// The chain of a hyper-Kloosterman sum with moduli from `(c, q, d)`.
    pub fn kloosterman(c: u64, qvec: &[u64], dvec: &[u64]) -> Result<Self, KloostermanError> {
        let moduli = chain_moduli(c, qvec, dvec)?;
        let levels = dvec
            .iter()
            .zip(&moduli[1..])
            .map(|(&d, &m)| ChainLevel { coeff: d, modulus: m, link: Link::Inverse })
            .collect();
        PhaseChain::new(c, levels)
    }

    pub fn initial_modulus(&self) -> u64 {
        self.m0
    }

    pub fn last_modulus(&self) -> u64 {
        self.levels.last().map_or(self.m0, |l| l.modulus)
    }

    pub fn levels(&self) -> &[ChainLevel] {
        &self.levels
    }

    /// Product of the level moduli, the size of a direct enumeration.
    pub fn enumeration_size(&self) -> u128 {
        self.levels.iter().map(|l| l.modulus as u128).product()
    }

    /// Number of summand evaluations made by the memoized evaluation,
    /// `sum_i m_{i-1} m_i`.
    pub fn memoized_work(&self) -> u128 {
        let mut prev = self.m0 as u128;
        let mut work = 0u128;
        for l in &self.levels {
            work += prev * l.modulus as u128;
            prev = l.modulus as u128;
        }
        work
    }

    pub fn check_memoized_budget(&self, budget: u64) -> Result<(), KloostermanError> {
        let size = self.memoized_work();
        if size > budget as u128 {
            return Err(KloostermanError::BudgetExceeded { size, budget });
        }
        Ok(())
    }

    pub fn check_budget(&self, budget: u64) -> Result<(), KloostermanError> {
        let size = self.enumeration_size();
        if size > budget as u128 {
            return Err(KloostermanError::BudgetExceeded { size, budget });
        }
        Ok(())
    }

    /// Values of the chain for every initial residue `u mod m_0`, given the
    /// terminal function as a table indexed by `u_last mod m_last`.
    pub fn evaluate_all(&self, terminal: &[Complex64]) -> Vec<Complex64> {
        self.evaluate_all_multi(&[terminal.to_vec()]).pop().expect("one terminal")
    }

    /// As [`PhaseChain::evaluate_all`] for several terminal tables at once,
    /// sharing the residue bookkeeping between them.
    pub fn evaluate_all_multi(&self, terminals: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        let k = terminals.len();
        for t in terminals {
            assert_eq!(t.len() as u64, self.last_modulus(), "terminal table has the wrong length");
        }
        // layout: next[u * k + j] is the value for terminal j at residue u
        let mut next = vec![Complex64::new(0.0, 0.0); self.last_modulus() as usize * k];
        for (j, t) in terminals.iter().enumerate() {
            for (u, &v) in t.iter().enumerate() {
                next[u * k + j] = v;
            }
        }
        for i in (0..self.levels.len()).rev() {
            let lvl = self.levels[i];
            let prev = if i == 0 { self.m0 } else { self.levels[i - 1].modulus };
            let roots = root_table(prev);
            let xs = modarith::units(lvl.modulus);
            let coeffs: Vec<u64> = xs.iter().map(|&x| mul_mod(lvl.coeff % prev, x, prev)).collect();
            let handed: Vec<usize> = xs
                .iter()
                .map(|&x| match lvl.link {
                    Link::Inverse => mod_inverse(x as i64, lvl.modulus).expect("unit").value() as usize,
                    Link::Identity => x as usize,
                })
                .collect();
            // inner levels only ever receive reduced residues from their parent
            let needed: Vec<u64> = if i == 0 { (0..prev).collect() } else { modarith::units(prev) };
            let mut cur = vec![Complex64::new(0.0, 0.0); prev as usize * k];
            for u in needed {
                let out = &mut cur[u as usize * k..(u as usize + 1) * k];
                for (x, &cx) in coeffs.iter().enumerate() {
                    let w = roots[mul_mod(cx, u, prev) as usize];
                    let src = &next[handed[x] * k..(handed[x] + 1) * k];
                    for j in 0..k {
                        out[j] += w * src[j];
                    }
                }
            }
            next = cur;
        }
        (0..k).map(|j| (0..self.m0 as usize).map(|u| next[u * k + j]).collect()).collect()
    }

    pub fn evaluate(&self, initial: i64, terminal: &[Complex64]) -> Complex64 {
        self.evaluate_all(terminal)[reduce(initial as i128, self.m0) as usize]
    }

    /// Exact evaluation by direct enumeration with terminal `e(n u_last / m_last)`.
    pub fn histogram(&self, initial: i64, n: i64) -> Result<PhaseHistogram, KloostermanError> {
        let mut den: u64 = self.m0;
        for l in &self.levels {
            den = num_integer::lcm(den, l.modulus);
        }
        let mut hist = PhaseHistogram::new(den)?;
        let unit_lists: Vec<Vec<u64>> = self.levels.iter().map(|l| modarith::units(l.modulus)).collect();
        let mut idx = vec![0usize; self.levels.len()];
        let u0 = reduce(initial as i128, self.m0);
        loop {
            let mut num: u128 = 0;
            let mut u = u0;
            let mut prev = self.m0;
            for (i, lvl) in self.levels.iter().enumerate() {
                let x = unit_lists[i][idx[i]];
                let term = mul_mod(mul_mod(lvl.coeff % prev, x, prev), u, prev) as u128;
                num = (num + term * (den / prev) as u128) % den as u128;
                u = match lvl.link {
                    Link::Inverse => mod_inverse(x as i64, lvl.modulus)?.value(),
                    Link::Identity => x,
                };
                prev = lvl.modulus;
            }
            let last = mul_mod(reduce(n as i128, prev), u, prev) as u128;
            num = (num + last * (den / prev) as u128) % den as u128;
            hist.add(num as i128, 1);
            // odometer with the innermost variable fastest
            let mut k = self.levels.len();
            loop {
                if k == 0 {
                    return Ok(hist);
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < unit_lists[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

/// Terminal table `u -> e(n u / m)`.
pub fn additive_terminal(n: i64, m: u64) -> Vec<Complex64> {
    let roots = root_table(m);
    let nr = reduce(n as i128, m);
    (0..m).map(|u| roots[mul_mod(nr, u, m) as usize]).collect()
}

fn checked_chain(spec: &KloostermanSpec, budget: u64) -> Result<PhaseChain, KloostermanError> {
    let chain = PhaseChain::kloosterman(spec.c, &spec.qvec, &spec.dvec)?;
    if gcd(spec.a, spec.c as i64) != 1 {
        return Err(KloostermanError::NotCoprime { a: spec.a, c: spec.c });
    }
    chain.check_budget(budget)?;
    Ok(chain)
}

/// Floating evaluation of `Kl_N(a, n, c; q, d)` under the default budget.
pub fn hyper_kloosterman(spec: &KloostermanSpec) -> Result<Complex64, KloostermanError> {
    hyper_kloosterman_with_budget(spec, work_budget())
}

pub fn hyper_kloosterman_with_budget(spec: &KloostermanSpec, budget: u64) -> Result<Complex64, KloostermanError> {
    let chain = checked_chain(spec, budget)?;
    let terminal = additive_terminal(spec.n, chain.last_modulus());
    Ok(chain.evaluate(spec.a, &terminal))
}

/// Exact evaluation as a formal sum of roots of unity.
pub fn hyper_kloosterman_exact(spec: &KloostermanSpec, budget: u64) -> Result<PhaseHistogram, KloostermanError> {
    let chain = checked_chain(spec, budget)?;
    chain.histogram(spec.a, spec.n)
}

/// `Kl_N(a, n, c; q, d)` for every `n` modulo the last chain modulus.
pub fn kloosterman_by_residue(a: i64, c: u64, qvec: &[u64], dvec: &[u64], budget: u64) -> Result<Vec<Complex64>, KloostermanError> {
    let spec = KloostermanSpec::new(a, 0, c, qvec.to_vec(), dvec.to_vec());
    let chain = checked_chain(&spec, budget)?;
    let m = chain.last_modulus();
    Ok((0..m as i64).map(|n| chain.evaluate(a, &additive_terminal(n, m))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kl(a: i64, n: i64, c: u64, q: &[u64], d: &[u64]) -> Complex64 {
        hyper_kloosterman(&KloostermanSpec::new(a, n, c, q.to_vec(), d.to_vec())).unwrap()
    }

    // Oracle: the nested sum written out literally for rank 2.
    fn rank_two_literal(a: i64, n: i64, c: u64, q: [u64; 2], d: [u64; 2]) -> Complex64 {
        let m1 = q[0] * c / d[0];
        let m2 = q[0] * q[1] * c / (d[0] * d[1]);
        let mut s = Complex64::new(0.0, 0.0);
        for x1 in 0..m1 {
            if gcd(x1 as i64, m1 as i64) != 1 {
                continue;
            }
            let x1i = mod_inverse(x1 as i64, m1).unwrap().value() as f64;
            for x2 in 0..m2 {
                if gcd(x2 as i64, m2 as i64) != 1 {
                    continue;
                }
                let x2i = mod_inverse(x2 as i64, m2).unwrap().value() as f64;
                let t = (d[0] * x1) as f64 * a as f64 / c as f64
                    + (d[1] * x2) as f64 * x1i / m1 as f64
                    + n as f64 * x2i / m2 as f64;
                s += Complex64::from_polar(1.0, std::f64::consts::TAU * t);
            }
        }
        s
    }

    #[test]
    fn chain_validation_examples() {
        assert!(validate_chain(1, &[2], &[2]).unwrap());
        assert!(validate_chain(3, &[2, 2], &[6, 2]).unwrap());
        assert!(!validate_chain(1, &[2], &[3]).unwrap());
        assert!(matches!(validate_chain(1, &[2], &[]), Err(KloostermanError::LengthMismatch { .. })));
    }

    #[test]
    fn classical_examples() {
        assert!((classical_kloosterman(1, 1, 1) - 1.0).norm() < 1e-15);
        assert!((classical_kloosterman(0, 0, 6) - 2.0).norm() < 1e-14);
        let expect = 2.0 + 2.0 * (4.0 * std::f64::consts::PI / 5.0).cos();
        assert!((classical_kloosterman(1, 1, 5) - expect).norm() < 1e-14);
        assert!((expect - 0.381966).abs() < 1e-6);
    }

    #[test]
    fn hyper_examples() {
        assert!((kl(1, 1, 2, &[], &[]) + 1.0).norm() < 1e-15);
        assert!((kl(1, 1, 3, &[2], &[1]) + 2.0).norm() < 1e-13);
        assert!((kl(1, 1, 1, &[1], &[1]) - 1.0).norm() < 1e-15);
    }

    #[test]
    fn errors() {
        let bad = KloostermanSpec::new(2, 1, 4, vec![1], vec![1]);
        assert!(matches!(hyper_kloosterman(&bad), Err(KloostermanError::NotCoprime { .. })));
        let bad = KloostermanSpec::new(1, 1, 1, vec![2], vec![3]);
        assert!(matches!(hyper_kloosterman(&bad), Err(KloostermanError::InvalidChain { .. })));
        let big = KloostermanSpec::new(1, 1, 101, vec![101, 101], vec![1, 1]);
        assert!(matches!(hyper_kloosterman_with_budget(&big, 1000), Err(KloostermanError::BudgetExceeded { .. })));
    }

    #[test]
    fn rank_two_matches_literal_sum() {
        for c in 1..=6u64 {
            for q1 in 1..=3u64 {
                for q2 in 1..=3u64 {
                    for d in admissible_dvecs(c, &[q1, q2]).unwrap() {
                        for a in modarith::units(c) {
                            for n in -3..=3 {
                                let got = kl(a as i64, n, c, &[q1, q2], &d);
                                let want = rank_two_literal(a as i64, n, c, [q1, q2], [d[0], d[1]]);
                                assert!((got - want).norm() < 1e-9, "c={c} q=({q1},{q2}) d={d:?}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn by_residue_matches_pointwise() {
        let table = kloosterman_by_residue(1, 4, &[2], &[1], DEFAULT_WORK_BUDGET).unwrap();
        assert_eq!(table.len(), 8);
        for (n, v) in table.iter().enumerate() {
            assert!((v - kl(1, n as i64, 4, &[2], &[1])).norm() < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn rank_one_reduces_to_classical(c in 1u64..12, q in 1u64..8, pick in 0usize..64, a in -30i64..30, n in -6i64..6) {
            prop_assume!(gcd(a, c as i64) == 1);
            let ds = modarith::divisors(q * c).unwrap();
            let d = ds[pick % ds.len()];
            let got = kl(a, n, c, &[q], &[d]);
            let want = classical_kloosterman(a * q as i64, n, q * c / d);
            prop_assert!((got - want).norm() < 1e-9);
        }

        #[test]
        fn periodic_and_conjugate(c in 1u64..8, q1 in 1u64..4, q2 in 1u64..4, pick in 0usize..200, a in -20i64..20, n in -6i64..6) {
            prop_assume!(gcd(a, c as i64) == 1);
            let ds = admissible_dvecs(c, &[q1, q2]).unwrap();
            let d = &ds[pick % ds.len()];
            let q = [q1, q2];
            let m = chain_moduli(c, &q, d).unwrap()[2] as i64;
            let base = kl(a, n, c, &q, d);
            prop_assert!((kl(a + c as i64, n, c, &q, d) - base).norm() < 1e-9);
            prop_assert!((kl(a, n + m, c, &q, d) - base).norm() < 1e-9);
            // rank 2 is even: conjugation flips a only
            prop_assert!((kl(-a, n, c, &q, d) - base.conj()).norm() < 1e-9);
            prop_assert!((kl(-a, -n, c, &q[..1], &d[..1]) - kl(a, n, c, &q[..1], &d[..1]).conj()).norm() < 1e-9);
            prop_assert!((kl(-a, -n, c, &[], &[]) - kl(a, n, c, &[], &[])).norm() < 1e-12);
        }

        #[test]
        fn exact_agrees_with_float(c in 1u64..7, q1 in 1u64..4, q2 in 1u64..4, pick in 0usize..200, a in -20i64..20, n in -6i64..6) {
            prop_assume!(gcd(a, c as i64) == 1);
            let ds = admissible_dvecs(c, &[q1, q2]).unwrap();
            let d = ds[pick % ds.len()].clone();
            let spec = KloostermanSpec::new(a, n, c, vec![q1, q2], d);
            let exact = hyper_kloosterman_exact(&spec, 100_000).unwrap();
            prop_assert!((exact.evaluate() - hyper_kloosterman(&spec).unwrap()).norm() < 1e-10);
        }
    }
}
