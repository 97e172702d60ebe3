//! Residues, divisors and exact root-of-unity bookkeeping.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use num_integer::Integer;
use thiserror::Error;

/// Largest modulus accepted by the divisor and factorization helpers.
pub const DEFAULT_MODULUS_LIMIT: u64 = 1_000_000_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArithError {
    #[error("{value} is not invertible modulo {modulus}")]
    NotInvertible { value: i64, modulus: u64 },
    #[error("modulus must be positive")]
    ZeroModulus,
    #[error("value {value} exceeds the configured limit {limit}")]
    Overflow { value: u128, limit: u128 },
    #[error("residues with different moduli {0} and {1}")]
    ModulusMismatch(u64, u64),
    #[error("exact reduction for denominator {0} exceeds the work limit")]
    ExactTooLarge(u64),
}

/// Element of Z/mZ, always stored in canonical form `0 <= value < modulus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Residue {
    value: u64,
    modulus: u64,
}

impl Residue {
    pub fn new(x: i64, modulus: u64) -> Result<Self, ArithError> {
        if modulus == 0 {
            return Err(ArithError::ZeroModulus);
        }
        Ok(Residue { value: reduce(x as i128, modulus), modulus })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn is_unit(&self) -> bool {
        self.value.gcd(&self.modulus) == 1
    }

    pub fn add(&self, other: &Residue) -> Result<Residue, ArithError> {
        self.same_modulus(other)?;
        let v = (self.value as u128 + other.value as u128) % self.modulus as u128;
        Ok(Residue { value: v as u64, modulus: self.modulus })
    }

    pub fn mul(&self, other: &Residue) -> Result<Residue, ArithError> {
        self.same_modulus(other)?;
        Ok(Residue { value: mul_mod(self.value, other.value, self.modulus), modulus: self.modulus })
    }

    pub fn neg(&self) -> Residue {
        let v = if self.value == 0 { 0 } else { self.modulus - self.value };
        Residue { value: v, modulus: self.modulus }
    }

    pub fn inverse(&self) -> Result<Residue, ArithError> {
        mod_inverse(self.value as i64, self.modulus)
    }

    fn same_modulus(&self, other: &Residue) -> Result<(), ArithError> {
        if self.modulus != other.modulus {
            return Err(ArithError::ModulusMismatch(self.modulus, other.modulus));
        }
        Ok(())
    }
}

/// Canonical representative of `x` modulo `m` (m > 0).
pub fn reduce(x: i128, m: u64) -> u64 {
    x.rem_euclid(m as i128) as u64
}

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn gcd(a: i64, b: i64) -> u64 {
    (a as i128).gcd(&(b as i128)) as u64
}

/// Inverse of `x` modulo `m`; modulus 1 is allowed and returns 0.
pub fn mod_inverse(x: i64, m: u64) -> Result<Residue, ArithError> {
    if m == 0 {
        return Err(ArithError::ZeroModulus);
    }
    let r = reduce(x as i128, m) as i128;
    let eg = r.extended_gcd(&(m as i128));
    if eg.gcd != 1 {
        return Err(ArithError::NotInvertible { value: x, modulus: m });
    }
    Ok(Residue { value: reduce(eg.x, m), modulus: m })
}

/// Prime factorization by trial division, primes in increasing order.
pub fn factorize(m: u64) -> Result<Vec<(u64, u32)>, ArithError> {
    factorize_bounded(m, DEFAULT_MODULUS_LIMIT)
}

pub fn factorize_bounded(m: u64, limit: u64) -> Result<Vec<(u64, u32)>, ArithError> {
    if m == 0 {
        return Err(ArithError::ZeroModulus);
    }
    if m > limit {
        return Err(ArithError::Overflow { value: m as u128, limit: limit as u128 });
    }
    let mut out = Vec::new();
    let mut n = m;
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    Ok(out)
}

/// All positive divisors of `m` in increasing order.
pub fn divisors(m: u64) -> Result<Vec<u64>, ArithError> {
    divisors_bounded(m, DEFAULT_MODULUS_LIMIT)
}

pub fn divisors_bounded(m: u64, limit: u64) -> Result<Vec<u64>, ArithError> {
    let fac = factorize_bounded(m, limit)?;
    let mut out = vec![1u64];
    for (p, e) in fac {
        let len = out.len();
        let mut pk = 1u64;
        for _ in 0..e {
            pk *= p;
            for i in 0..len {
                out.push(out[i] * pk);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

pub fn euler_phi(m: u64) -> Result<u64, ArithError> {
    let mut phi = m;
    for (p, _) in factorize(m)? {
        phi = phi / p * (p - 1);
    }
    Ok(phi)
}

pub fn mobius(m: u64) -> Result<i32, ArithError> {
    let fac = factorize(m)?;
    if fac.iter().any(|&(_, e)| e > 1) {
        return Ok(0);
    }
    Ok(if fac.len() % 2 == 0 { 1 } else { -1 })
}

/// Reduced residues modulo `m` in increasing order; modulo 1 this is `[0]`.
pub fn units(m: u64) -> Vec<u64> {
    if m == 1 {
        return vec![0];
    }
    (1..m).filter(|x| x.gcd(&m) == 1).collect()
}

/// `e(num/den) = exp(2 pi i num/den)`, with the exact values at multiples of 1/4.
pub fn e_frac(num: i128, den: u64) -> Complex64 {
    assert!(den > 0, "e_frac with zero denominator");
    let r = reduce(num, den);
    root_of_unity(r, den)
}

/// `exp(2 pi i r/den)` for a canonical `0 <= r < den`.
pub fn root_of_unity(r: u64, den: u64) -> Complex64 {
    let r4 = r as u128 * 4;
    if r4 % den as u128 == 0 {
        return match (r4 / den as u128) as u8 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
    }
    // Use the representative in (-den/2, den/2] so the angle stays small.
    let signed = if 2 * r > den { r as f64 - den as f64 } else { r as f64 };
    let (s, c) = (TAU * signed / den as f64).sin_cos();
    Complex64::new(c, s)
}

/// Table of `e(r/m)` for `0 <= r < m`.
pub fn root_table(m: u64) -> Vec<Complex64> {
    (0..m).map(|r| root_of_unity(r, m)).collect()
}

/// A root of unity `e(num/den)` kept as an exact reduced fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UnitPhase {
    num: u64,
    den: u64,
}

impl UnitPhase {
    pub fn new(num: i128, den: u64) -> Result<Self, ArithError> {
        if den == 0 {
            return Err(ArithError::ZeroModulus);
        }
        let r = reduce(num, den);
        let g = r.gcd(&den);
        Ok(UnitPhase { num: r / g, den: den / g })
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn mul(&self, other: &UnitPhase) -> UnitPhase {
        let den = self.den.lcm(&other.den);
        let num = self.num as u128 * (den / self.den) as u128 + other.num as u128 * (den / other.den) as u128;
        UnitPhase::new(num as i128, den).expect("positive denominator")
    }

    pub fn to_complex(&self) -> Complex64 {
        root_of_unity(self.num, self.den)
    }
}

/// Formal sum `sum_r count[r] e(r/den)` over a common denominator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseHistogram {
    den: u64,
    counts: BTreeMap<u64, i64>,
}

impl PhaseHistogram {
    pub fn new(den: u64) -> Result<Self, ArithError> {
        if den == 0 {
            return Err(ArithError::ZeroModulus);
        }
        Ok(PhaseHistogram { den, counts: BTreeMap::new() })
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    /// Adds `mult * e(num/den)`.
    pub fn add(&mut self, num: i128, mult: i64) {
        if mult == 0 {
            return;
        }
        let r = reduce(num, self.den);
        let entry = self.counts.entry(r).or_insert(0);
        *entry += mult;
        if *entry == 0 {
            self.counts.remove(&r);
        }
    }

    pub fn add_phase(&mut self, phase: &UnitPhase, mult: i64) -> Result<(), ArithError> {
        if self.den % phase.den != 0 {
            return Err(ArithError::ModulusMismatch(self.den, phase.den));
        }
        self.add(phase.num as i128 * (self.den / phase.den) as i128, mult);
        Ok(())
    }

    pub fn merge(&mut self, other: &PhaseHistogram, sign: i64) -> Result<(), ArithError> {
        if self.den != other.den {
            return Err(ArithError::ModulusMismatch(self.den, other.den));
        }
        for (&r, &c) in &other.counts {
            self.add(r as i128, sign * c);
        }
        Ok(())
    }

    pub fn total_count(&self) -> i64 {
        self.counts.values().sum()
    }

    pub fn terms(&self) -> impl Iterator<Item = (u64, i64)> + '_ {
        self.counts.iter().map(|(&r, &c)| (r, c))
    }

    /// Floating value, evaluating each distinct root once.
    pub fn evaluate(&self) -> Complex64 {
        self.counts
            .iter()
            .map(|(&r, &c)| root_of_unity(r, self.den) * c as f64)
            .sum()
    }

    /// Decides whether the formal sum vanishes in Z[e(1/den)], by reduction
    /// modulo the cyclotomic polynomial of order `den`.
    pub fn is_zero_exact(&self) -> Result<bool, ArithError> {
        if self.counts.is_empty() {
            return Ok(true);
        }
        let phi = cyclotomic_polynomial(self.den)?;
        let deg = phi.len() - 1;
        if (self.den - deg as u64).saturating_mul(deg as u64) > 200_000_000 {
            return Err(ArithError::ExactTooLarge(self.den));
        }
        let mut poly = vec![0i128; self.den as usize];
        for (&r, &c) in &self.counts {
            poly[r as usize] += c as i128;
        }
        // phi is monic; eliminate the top coefficients one at a time.
        for k in (deg..poly.len()).rev() {
            let lead = poly[k];
            if lead == 0 {
                continue;
            }
            for j in 0..=deg {
                let idx = k - deg + j;
                poly[idx] = poly[idx]
                    .checked_sub(lead * phi[j] as i128)
                    .ok_or(ArithError::ExactTooLarge(self.den))?;
            }
        }
        Ok(poly[..deg].iter().all(|&c| c == 0))
    }
}

/// Coefficients (constant term first) of the cyclotomic polynomial of order `m`.
pub fn cyclotomic_polynomial(m: u64) -> Result<Vec<i64>, ArithError> {
    if m == 0 {
        return Err(ArithError::ZeroModulus);
    }
    let mut num_factors = Vec::new();
    let mut den_factors = Vec::new();
    for d in divisors(m)? {
        match mobius(m / d)? {
            1 => num_factors.push(d as usize),
            -1 => den_factors.push(d as usize),
            _ => {}
        }
    }
    let mut poly = vec![1i64];
    for d in num_factors {
        // multiply by x^d - 1
        let mut next = vec![0i64; poly.len() + d];
        for (i, &c) in poly.iter().enumerate() {
            next[i] -= c;
            next[i + d] += c;
        }
        poly = next;
    }
    for d in den_factors {
        // exact division by x^d - 1: q_i = q_{i-d} - p_i
        let n = poly.len() - d;
        let mut q = vec![0i64; n];
        for i in 0..n {
            let prev = if i >= d { q[i - d] } else { 0 };
            q[i] = prev - poly[i];
        }
        poly = q;
    }
    Ok(poly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn inverse_examples() {
        assert_eq!(mod_inverse(3, 7).unwrap().value(), 5);
        assert_eq!(mod_inverse(-3, 7).unwrap().value(), 2);
        assert_eq!(mod_inverse(5, 1).unwrap().value(), 0);
        assert!(matches!(mod_inverse(4, 6), Err(ArithError::NotInvertible { .. })));
    }

    #[test]
    fn divisor_examples() {
        assert_eq!(divisors(12).unwrap(), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(divisors(1).unwrap(), vec![1]);
        assert!(divisors(0).is_err());
        assert!(matches!(divisors_bounded(1000, 100), Err(ArithError::Overflow { .. })));
    }

    #[test]
    fn phi_and_mobius() {
        assert_eq!(euler_phi(1).unwrap(), 1);
        assert_eq!(euler_phi(36).unwrap(), 12);
        assert_eq!(mobius(30).unwrap(), -1);
        assert_eq!(mobius(12).unwrap(), 0);
        assert_eq!(units(8), vec![1, 3, 5, 7]);
    }

    #[test]
    fn exact_quarter_turns() {
        assert_eq!(e_frac(1, 4), Complex64::new(0.0, 1.0));
        assert_eq!(e_frac(-1, 2), Complex64::new(-1.0, 0.0));
        assert_eq!(e_frac(12, 12), Complex64::new(1.0, 0.0));
        let z = e_frac(1, 3);
        assert!((z - Complex64::new(-0.5, 3f64.sqrt() / 2.0)).norm() < 1e-15);
    }

    #[test]
    fn cyclotomic_small_orders() {
        assert_eq!(cyclotomic_polynomial(1).unwrap(), vec![-1, 1]);
        assert_eq!(cyclotomic_polynomial(6).unwrap(), vec![1, -1, 1]);
        assert_eq!(cyclotomic_polynomial(12).unwrap(), vec![1, 0, -1, 0, 1]);
        // order 105 is the first with a coefficient of absolute value 2
        let p105 = cyclotomic_polynomial(105).unwrap();
        assert_eq!(p105.len(), 49);
        assert_eq!(p105.iter().map(|c| c.abs()).max(), Some(2));
    }

    #[test]
    fn histogram_zero_tests() {
        // 1 + e(1/3) + e(2/3) = 0
        let mut h = PhaseHistogram::new(3).unwrap();
        for r in 0..3 {
            h.add(r, 1);
        }
        assert!(h.is_zero_exact().unwrap());
        assert!(h.evaluate().norm() < 1e-15);
        // e(1/6) - e(1/3) = 1
        let mut g = PhaseHistogram::new(6).unwrap();
        g.add(1, 1);
        g.add(2, -1);
        assert!(!g.is_zero_exact().unwrap());
        g.add(0, -1);
        assert!(g.is_zero_exact().unwrap());
    }

    proptest! {
        #[test]
        fn inverse_roundtrip(x in -10_000i64..10_000, m in 1u64..5000) {
            match mod_inverse(x, m) {
                Ok(inv) => prop_assert_eq!(mul_mod(reduce(x as i128, m), inv.value(), m), 1 % m),
                Err(_) => prop_assert!(gcd(x, m as i64) != 1),
            }
        }

        #[test]
        fn divisors_divide(m in 1u64..20_000) {
            let ds = divisors(m).unwrap();
            prop_assert!(ds.iter().all(|d| m % d == 0));
            let brute = (1..=m).filter(|d| m % d == 0).count();
            prop_assert_eq!(ds.len(), brute);
        }

        #[test]
        fn zero_test_agrees_with_float(den in 1u64..40, entries in proptest::collection::vec((0i128..40, -3i64..4), 0..12)) {
            let mut h = PhaseHistogram::new(den).unwrap();
            for (r, c) in entries {
                h.add(r, c);
            }
            let exact = h.is_zero_exact().unwrap();
            let small = h.evaluate().norm() < 1e-9;
            prop_assert_eq!(exact, small);
        }

        #[test]
        fn unit_phase_multiplies(a in -100i128..100, b in 1u64..60, c in -100i128..100, d in 1u64..60) {
            let p = UnitPhase::new(a, b).unwrap().mul(&UnitPhase::new(c, d).unwrap());
            let z = e_frac(a, b) * e_frac(c, d);
            prop_assert!((p.to_complex() - z).norm() < 1e-13);
        }
    }
}
