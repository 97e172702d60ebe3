//! Fourier coefficients `A(m_1, ..., m_{N-1})` of GL(N) forms.
//!
//! Satake-type providers compute a coefficient prime by prime: if
//! `m_i = prod_p p^{k_{i,p}}`, then `A(m) = prod_p s_mu(alpha_p)` with the
//! partition `mu_i = k_{1,p} + ... + k_{N-i,p}`, so that `A(1,..,1,p)` is
//! the sum of the Satake parameters and `A(p,1,..,1)` their `(N-1)`-st
//! elementary symmetric function.

pub mod qexp;
pub mod schur;

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Default largest admissible index entry.
pub const DEFAULT_BOUND: u64 = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoeffError {
    #[error("index {index} exceeds the provider bound {bound}")]
    OutOfRange { index: u64, bound: u64 },
    #[error("no local Satake parameters at p = {0}")]
    MissingPrime(u64),
    #[error("index tuple {0:?} is not in the coefficient table")]
    MissingIndex(Vec<u64>),
    #[error("expected {expected} indices, got {got}")]
    WrongArity { expected: usize, got: usize },
    #[error("indices must be positive")]
    ZeroIndex,
    #[error("rank must be at least 3, got {0}")]
    BadRank(usize),
    #[error("Satake parameters at p = {p} have product {product}, not 1")]
    CentralCharacter { p: u64, product: Complex64 },
    #[error("coefficient file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Satake parameters of one local component.
#[derive(Debug, Clone, PartialEq)]
pub struct SatakeLocal {
    pub p: u64,
    pub alphas: Vec<Complex64>,
}

impl SatakeLocal {
    pub fn new(p: u64, alphas: Vec<Complex64>) -> Result<Self, CoeffError> {
        let product: Complex64 = alphas.iter().product();
        if (product - 1.0).norm() > 1e-9 {
            return Err(CoeffError::CentralCharacter { p, product });
        }
        Ok(SatakeLocal { p, alphas })
    }
}

/// Roots of `X^2 - x X + 1` for the normalized trace `x = tau_p / p^{(k-1)/2}`.
pub fn satake_gl2(tau_p: f64, k: u32, p: u64) -> (Complex64, Complex64) {
    let x = tau_p / (p as f64).powf((k as f64 - 1.0) / 2.0);
    satake_from_trace(x, p)
}

/// Roots `{alpha, 1/alpha}` with `alpha + 1/alpha = x`.
pub fn satake_from_trace(x: f64, p: u64) -> (Complex64, Complex64) {
    let disc = 4.0 - x * x;
    if disc >= 0.0 {
        let s = disc.sqrt() / 2.0;
        (Complex64::new(x / 2.0, s), Complex64::new(x / 2.0, -s))
    } else if disc > -1e-12 {
        // rounding just past the boundary of the Ramanujan range
        (Complex64::new(x / 2.0, 0.0), Complex64::new(x / 2.0, 0.0))
    } else {
        log::warn!("normalized trace {x} at p = {p} violates the Ramanujan bound");
        let s = (-disc).sqrt() / 2.0;
        (Complex64::new(x / 2.0 + s, 0.0), Complex64::new(x / 2.0 - s, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lift {
    /// `{alpha^2, 1, alpha^-2}` from one GL(2) component.
    Sym2,
    /// `{alpha_i beta_j}` from two GL(2) components.
    RankinSelberg,
}

pub fn lift_satake(base: &[(Complex64, Complex64)], p: u64, lift: Lift) -> Result<SatakeLocal, CoeffError> {
    let alphas = match (lift, base) {
        (Lift::Sym2, [(a, b)]) => vec![a * a, a * b, b * b],
        (Lift::RankinSelberg, [(a1, a2), (b1, b2)]) => vec![a1 * b1, a1 * b2, a2 * b1, a2 * b2],
        _ => panic!("lift arity does not match its inputs"),
    };
    SatakeLocal::new(p, alphas)
}

struct SatakeSource {
    locals: BTreeMap<u64, Vec<Complex64>>,
    /// memo of prime-power values keyed by (p, exponent tuple)
    memo: RwLock<HashMap<(u64, Vec<u32>), Complex64>>,
}

enum Source {
    Random { seed: u64 },
    Satake(SatakeSource),
    Table(HashMap<Vec<u64>, Complex64>),
}

/// Immutable, cheaply clonable coefficient source.
#[derive(Clone)]
pub struct CoefficientProvider {
    rank: usize,
    bound: u64,
    reversed: bool,
    label: String,
    source: Arc<Source>,
}

impl std::fmt::Debug for CoefficientProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientProvider")
            .field("label", &self.label)
            .field("rank", &self.rank)
            .field("bound", &self.bound)
            .field("reversed", &self.reversed)
            .finish()
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for the random coefficient at `mvec`: SplitMix64 folded over the
/// kind tag, the user seed and the indices in order.
fn random_seed(seed: u64, mvec: &[u64]) -> u64 {
    const TAG: u64 = 0x7261_6e64_6f6d; // "random"
    let mut h = splitmix64(TAG ^ splitmix64(seed));
    for &m in mvec {
        h = splitmix64(h ^ m);
    }
    h
}

fn factor_with(spf: &[u32], mut m: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    while m > 1 {
        let p = spf[m as usize] as u64;
        let mut e = 0;
        while m % p == 0 {
            m /= p;
            e += 1;
        }
        out.push((p, e));
    }
    out
}

fn smallest_prime_factors(bound: u64) -> Vec<u32> {
    let n = bound as usize;
    let mut spf = vec![0u32; n + 1];
    for i in 2..=n {
        if spf[i] == 0 {
            let mut j = i;
            while j <= n {
                if spf[j] == 0 {
                    spf[j] = i as u32;
                }
                j += i;
            }
        }
    }
    spf
}

static SPF_CACHE: RwLock<Vec<u32>> = RwLock::new(Vec::new());

fn factor_index(m: u64) -> Vec<(u64, u32)> {
    {
        let spf = SPF_CACHE.read().expect("spf lock");
        if (m as usize) < spf.len() {
            return factor_with(&spf, m);
        }
    }
    let mut spf = SPF_CACHE.write().expect("spf lock");
    if (m as usize) >= spf.len() {
        *spf = smallest_prime_factors((m * 2).max(1 << 16));
    }
    factor_with(&spf, m)
}

impl CoefficientProvider {
    pub fn random(rank: usize, seed: u64, bound: u64) -> Result<Self, CoeffError> {
        check_rank(rank)?;
        Ok(CoefficientProvider {
            rank,
            bound,
            reversed: false,
            label: format!("random(seed={seed})"),
            source: Arc::new(Source::Random { seed }),
        })
    }

    /// Satake-type provider; `locals` must cover every prime up to `bound`.
    pub fn satake(rank: usize, locals: Vec<SatakeLocal>, bound: u64, label: &str) -> Result<Self, CoeffError> {
        check_rank(rank)?;
        let mut map = BTreeMap::new();
        for l in locals {
            if l.alphas.len() != rank {
                return Err(CoeffError::WrongArity { expected: rank, got: l.alphas.len() });
            }
            map.insert(l.p, l.alphas);
        }
        Ok(CoefficientProvider {
            rank,
            bound,
            reversed: false,
            label: label.to_string(),
            source: Arc::new(Source::Satake(SatakeSource { locals: map, memo: RwLock::new(HashMap::new()) })),
        })
    }

    pub fn from_table(rank: usize, table: HashMap<Vec<u64>, Complex64>, label: &str) -> Result<Self, CoeffError> {
        check_rank(rank)?;
        let bound = table.keys().flat_map(|k| k.iter().copied()).max().unwrap_or(1);
        Ok(CoefficientProvider { rank, bound, reversed: false, label: label.to_string(), source: Arc::new(Source::Table(table)) })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_contragredient(&self) -> bool {
        self.reversed
    }

    /// Provider of `A~(m_1..m_{N-1}) = A(m_{N-1}..m_1)`.
    pub fn contragredient(&self) -> Self {
        let mut p = self.clone();
        p.reversed = !p.reversed;
        p
    }

    pub fn coeff(&self, mvec: &[u64]) -> Result<Complex64, CoeffError> {
        if mvec.len() != self.rank - 1 {
            return Err(CoeffError::WrongArity { expected: self.rank - 1, got: mvec.len() });
        }
        for &m in mvec {
            if m == 0 {
                return Err(CoeffError::ZeroIndex);
            }
            if m > self.bound {
                return Err(CoeffError::OutOfRange { index: m, bound: self.bound });
            }
        }
        let idx: Vec<u64> = if self.reversed { mvec.iter().rev().copied().collect() } else { mvec.to_vec() };
        match &*self.source {
            Source::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(random_seed(*seed, &idx));
                let r: f64 = rng.gen::<f64>().sqrt();
                let theta: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
                Ok(Complex64::from_polar(r, theta))
            }
            Source::Table(t) => t.get(&idx).copied().ok_or(CoeffError::MissingIndex(idx)),
            Source::Satake(s) => self.satake_coeff(s, &idx),
        }
    }

    fn satake_coeff(&self, s: &SatakeSource, idx: &[u64]) -> Result<Complex64, CoeffError> {
        // exponent tuples per prime, in index order
        let mut per_prime: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
        for (i, &m) in idx.iter().enumerate() {
            for (p, e) in factor_index(m) {
                per_prime.entry(p).or_insert_with(|| vec![0; idx.len()])[i] = e;
            }
        }
        let mut value = Complex64::new(1.0, 0.0);
        for (p, exps) in per_prime {
            value *= self.local_value(s, p, exps)?;
        }
        Ok(value)
    }

    fn local_value(&self, s: &SatakeSource, p: u64, exps: Vec<u32>) -> Result<Complex64, CoeffError> {
        let key = (p, exps);
        if let Some(v) = s.memo.read().expect("memo lock").get(&key) {
            return Ok(*v);
        }
        let alphas = s.locals.get(&p).ok_or(CoeffError::MissingPrime(p))?;
        let exps = &key.1;
        let n1 = exps.len();
        let partition: Vec<u32> = (1..=n1).map(|i| exps[..=n1 - i].iter().sum()).collect();
        let v = schur::schur(&partition, alphas);
        s.memo.write().expect("memo lock").entry(key).or_insert(v);
        Ok(v)
    }

    /// Writes every coefficient with all indices in `1..=max_index`.
    pub fn export<W: Write>(&self, max_index: u64, out: &mut W) -> Result<(), CoeffError> {
        let io = |e: std::io::Error| CoeffError::Io(e.to_string());
        writeln!(out, "N={}", self.rank).map_err(io)?;
        let mut idx = vec![1u64; self.rank - 1];
        loop {
            let v = self.coeff(&idx)?;
            let cols: Vec<String> = idx.iter().map(|m| m.to_string()).collect();
            writeln!(out, "{} {:?} {:?}", cols.join(" "), v.re, v.im).map_err(io)?;
            let mut k = idx.len();
            loop {
                if k == 0 {
                    return Ok(());
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] <= max_index {
                    break;
                }
                idx[k] = 1;
            }
        }
    }

    /// Reads the `N=<rank>` header followed by `m_1 .. m_{N-1} re im` lines.
    pub fn ingest<R: BufRead>(input: R, label: &str) -> Result<Self, CoeffError> {
        let mut rank = None;
        let mut table = HashMap::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| CoeffError::Io(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: &str| CoeffError::Parse { line: i + 1, msg: msg.to_string() };
            let Some(n) = rank else {
                let n: usize = line
                    .strip_prefix("N=")
                    .and_then(|r| r.trim().parse().ok())
                    .ok_or_else(|| parse_err("expected header N=<rank>"))?;
                check_rank(n)?;
                rank = Some(n);
                continue;
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != n + 1 {
                return Err(parse_err(&format!("expected {} fields", n + 1)));
            }
            let idx = fields[..n - 1]
                .iter()
                .map(|f| f.parse::<u64>().ok().filter(|&m| m > 0))
                .collect::<Option<Vec<u64>>>()
                .ok_or_else(|| parse_err("bad index"))?;
            let re: f64 = fields[n - 1].parse().map_err(|_| parse_err("bad real part"))?;
            let im: f64 = fields[n].parse().map_err(|_| parse_err("bad imaginary part"))?;
            table.insert(idx, Complex64::new(re, im));
        }
        let rank = rank.ok_or(CoeffError::Parse { line: 0, msg: "empty file".into() })?;
        Self::from_table(rank, table, label)
    }
}

fn check_rank(rank: usize) -> Result<(), CoeffError> {
    if rank < 3 {
        return Err(CoeffError::BadRank(rank));
    }
    Ok(())
}

/// Local GL(2) parameters of Delta (weight 12) at all primes up to `bound`.
pub fn delta_locals(bound: u64) -> Vec<(u64, (Complex64, Complex64))> {
    let tau = qexp::ramanujan_tau(bound as usize);
    qexp::primes_up_to(bound as usize)
        .into_iter()
        .map(|p| (p, satake_gl2(tau[p as usize] as f64, 12, p)))
        .collect()
}

/// Local GL(2) parameters of the weight 16 cusp form at all primes up to `bound`.
pub fn weight16_locals(bound: u64) -> Vec<(u64, (Complex64, Complex64))> {
    let tau = qexp::ramanujan_tau(bound as usize);
    let primes = qexp::primes_up_to(bound as usize);
    let idx: Vec<usize> = primes.iter().map(|&p| p as usize).collect();
    let coeffs = qexp::weight16_coefficients(&tau, &idx);
    primes
        .into_iter()
        .zip(coeffs)
        .map(|(p, a)| {
            let limit = 2.0 * (p as f64).powf(7.5);
            assert!((a as f64).abs() <= limit * (1.0 + 1e-12), "weight 16 coefficient at {p} outside the Deligne range");
            (p, satake_gl2(a as f64, 16, p))
        })
        .collect()
}

/// The symmetric square of Delta on GL(3).
pub fn sym2_delta(bound: u64) -> Result<CoefficientProvider, CoeffError> {
    let locals = delta_locals(bound)
        .into_iter()
        .map(|(p, ab)| lift_satake(&[ab], p, Lift::Sym2))
        .collect::<Result<Vec<_>, _>>()?;
    CoefficientProvider::satake(3, locals, bound, "sym2-delta")
}

/// The Rankin-Selberg product of Delta with itself on GL(4).
pub fn delta_x_delta(bound: u64) -> Result<CoefficientProvider, CoeffError> {
    let locals = delta_locals(bound)
        .into_iter()
        .map(|(p, ab)| lift_satake(&[ab, ab], p, Lift::RankinSelberg))
        .collect::<Result<Vec<_>, _>>()?;
    CoefficientProvider::satake(4, locals, bound, "delta-x-delta")
}

/// The Rankin-Selberg product of Delta with the weight 16 cusp form on GL(4).
pub fn delta_x_delta16(bound: u64) -> Result<CoefficientProvider, CoeffError> {
    let d = delta_locals(bound);
    let f = weight16_locals(bound);
    let locals = d
        .into_iter()
        .zip(f)
        .map(|((p, ab), (_, cd))| lift_satake(&[ab, cd], p, Lift::RankinSelberg))
        .collect::<Result<Vec<_>, _>>()?;
    CoefficientProvider::satake(4, locals, bound, "delta-x-delta16")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gcd(a: u64, b: u64) -> u64 {
        num_integer::gcd(a, b)
    }

    #[test]
    fn satake_examples() {
        let (a, b) = satake_gl2(-24.0, 12, 2);
        assert!(((a + b).re + 24.0 / 2f64.powf(5.5)).abs() < 1e-14);
        assert!(((a + b).re + 0.5303).abs() < 1e-4);
        assert!((a.norm() - 1.0).abs() < 1e-14);
        let (a, b) = satake_gl2(0.0, 12, 5);
        assert!((a - Complex64::new(0.0, 1.0)).norm() < 1e-15 && (b - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        let (a, b) = satake_from_trace(2.0, 3);
        assert_eq!((a, b), (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn lift_examples() {
        let one = (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
        assert!(lift_satake(&[one], 2, Lift::Sym2).unwrap().alphas.iter().all(|&z| z == Complex64::new(1.0, 0.0)));
        let rs = lift_satake(&[one, one], 2, Lift::RankinSelberg).unwrap();
        assert_eq!(rs.alphas.len(), 4);
        let ab = satake_gl2(-24.0, 12, 2);
        let s = lift_satake(&[ab], 2, Lift::Sym2).unwrap();
        assert!((s.alphas[0] - ab.0 * ab.0).norm() < 1e-15 && (s.alphas[2] - ab.1 * ab.1).norm() < 1e-15);
        assert!(SatakeLocal::new(2, vec![Complex64::new(2.0, 0.0); 3]).is_err());
    }

    #[test]
    fn sym2_values() {
        let p = sym2_delta(200).unwrap();
        assert_eq!(p.coeff(&[1, 1]).unwrap(), Complex64::new(1.0, 0.0));
        let ab = satake_gl2(-24.0, 12, 2);
        let want = ab.0 * ab.0 + 1.0 + ab.1 * ab.1;
        assert!((p.coeff(&[2, 1]).unwrap() - want).norm() < 1e-13);
        assert!((p.coeff(&[1, 2]).unwrap() - want).norm() < 1e-13);
        assert!((want.re + 0.71875).abs() < 1e-13);
        // real at primes, and self-dual on a grid
        for q in qexp::primes_up_to(50) {
            assert!(p.coeff(&[q, 1]).unwrap().im.abs() < 1e-13);
        }
        let dual = p.contragredient();
        for m in 1..20 {
            for n in 1..20 {
                assert!((dual.coeff(&[m, n]).unwrap() - p.coeff(&[m, n]).unwrap()).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn hecke_relation_at_prime_squares() {
        // A(1, p^2) = A(1,p)^2 - A(p,1) on GL(3)
        let p = sym2_delta(200).unwrap();
        for q in [2u64, 3, 5, 7, 11, 13] {
            let lhs = p.coeff(&[1, q * q]).unwrap();
            let rhs = p.coeff(&[1, q]).unwrap().powi(2) - p.coeff(&[q, 1]).unwrap();
            assert!((lhs - rhs).norm() < 1e-11);
        }
    }

    #[test]
    fn errors() {
        let p = sym2_delta(100).unwrap();
        assert!(matches!(p.coeff(&[101, 1]), Err(CoeffError::OutOfRange { .. })));
        assert!(matches!(p.coeff(&[1]), Err(CoeffError::WrongArity { .. })));
        let sparse = CoefficientProvider::satake(3, vec![], 100, "empty").unwrap();
        assert!(matches!(sparse.coeff(&[2, 1]), Err(CoeffError::MissingPrime(2))));
    }

    #[test]
    fn random_is_reproducible_and_in_disc() {
        let a = CoefficientProvider::random(4, 7, 1000).unwrap();
        let b = CoefficientProvider::random(4, 7, 1000).unwrap();
        let c = CoefficientProvider::random(4, 8, 1000).unwrap();
        for m in 1..30 {
            let idx = [m, 2, 3];
            assert_eq!(a.coeff(&idx).unwrap(), b.coeff(&idx).unwrap());
            assert_ne!(a.coeff(&idx).unwrap(), c.coeff(&idx).unwrap());
            assert!(a.coeff(&idx).unwrap().norm() <= 1.0);
        }
        let dual = a.contragredient();
        assert_eq!(dual.coeff(&[2, 3, 5]).unwrap(), a.coeff(&[5, 3, 2]).unwrap());
        let twice = dual.contragredient();
        assert_eq!(twice.coeff(&[2, 3, 5]).unwrap(), a.coeff(&[2, 3, 5]).unwrap());
    }

    #[test]
    fn file_roundtrip() {
        let p = delta_x_delta(50).unwrap();
        let mut buf = Vec::new();
        p.export(4, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("N=4\n"));
        let q = CoefficientProvider::ingest(text.as_bytes(), "file").unwrap();
        assert_eq!(q.coeff(&[2, 3, 4]).unwrap(), p.coeff(&[2, 3, 4]).unwrap());
        assert!(matches!(q.coeff(&[1, 1, 5]), Err(CoeffError::OutOfRange { .. })));
        assert!(CoefficientProvider::ingest("N=3\n1 2 0.5\n".as_bytes(), "bad").is_err());
        let sparse = CoefficientProvider::ingest("N=3\n1 1 1 0\n2 2 0.5 0\n".as_bytes(), "sparse").unwrap();
        assert!(matches!(sparse.coeff(&[1, 2]), Err(CoeffError::MissingIndex(_))));
    }

    proptest! {
        #[test]
        fn multiplicative_on_coprime_tuples(m1 in 1u64..50, m2 in 1u64..50, n1 in 1u64..50, n2 in 1u64..50) {
            prop_assume!(gcd(m1 * m2, n1 * n2) == 1);
            let p = delta_x_delta16(3000).unwrap();
            let whole = p.coeff(&[m1 * n1, 1, m2 * n2]).unwrap();
            let split = p.coeff(&[m1, 1, m2]).unwrap() * p.coeff(&[n1, 1, n2]).unwrap();
            prop_assert!((whole - split).norm() < 1e-10 * (1.0 + whole.norm()));
        }

        #[test]
        fn first_index_is_parameter_sum(k in 0usize..25) {
            let p = sym2_delta(100).unwrap();
            let q = qexp::primes_up_to(100)[k];
            let (a, b) = satake_gl2(qexp::TAU_SMALL_PRIMES[k].1 as f64, 12, q);
            let sum = a * a + a * b + b * b;
            prop_assert!((p.coeff(&[1, q]).unwrap() - sum).norm() < 1e-12);
        }
    }
}
