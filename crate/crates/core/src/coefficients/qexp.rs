//! q-expansions of the level one cusp forms of weight 12 and 16.

/// `tau(p)` for the primes below 100.
pub const TAU_SMALL_PRIMES: [(u64, i64); 25] = [
    (2, -24),
    (3, 252),
    (5, 4830),
    (7, -16744),
    (11, 534612),
    (13, -577738),
    (17, -6905934),
    (19, 10661420),
    (23, 18643272),
    (29, 128406630),
    (31, -52843168),
    (37, -182213314),
    (41, 308120442),
    (43, -17125708),
    (47, 2687348496),
    (53, -1596055698),
    (59, -5189203740),
    (61, 6956478662),
    (67, -15481826884),
    (71, 9791485272),
    (73, 1463791322),
    (79, 38116845680),
    (83, -29335099668),
    (89, -24992917110),
    (97, 75013568546),
];

/// `tau(n)` for `0 <= n <= bound` (index 0 holds 0), from
/// `Delta = q prod (1 - q^n)^24 = q (sum_k (-1)^k (2k+1) q^{k(k+1)/2})^8`.
pub fn ramanujan_tau(bound: usize) -> Vec<i128> {
    let len = bound; // coefficients of q^0..q^{bound-1} of the eighth power
    let mut cube = Vec::new();
    let mut k = 0usize;
    while k * (k + 1) / 2 < len {
        let sign = if k % 2 == 0 { 1 } else { -1 };
        cube.push((k * (k + 1) / 2, sign * (2 * k as i128 + 1)));
        k += 1;
    }
    let mut power = vec![0i128; len.max(1)];
    power[0] = 1;
    for _ in 0..8 {
        let mut next = vec![0i128; power.len()];
        for (i, &c) in power.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for &(e, s) in &cube {
                if i + e >= len {
                    break;
                }
                next[i + e] = next[i + e].checked_add(c.checked_mul(s).expect("tau overflow")).expect("tau overflow");
            }
        }
        power = next;
    }
    let mut tau = vec![0i128; bound + 1];
    tau[1..=bound].copy_from_slice(&power[..bound]);
    tau
}

/// Sum of cubes of divisors for `0 <= n <= bound`.
pub fn sigma3(bound: usize) -> Vec<i128> {
    let mut s = vec![0i128; bound + 1];
    for d in 1..=bound {
        let d3 = (d as i128).pow(3);
        let mut m = d;
        while m <= bound {
            s[m] += d3;
            m += d;
        }
    }
    s
}

/// Coefficients at the given indices of the weight 16 cusp form `E_4 Delta`.
///
/// The convolution overflows `i128` in intermediate terms, so it is carried
/// out modulo 2^128; the true coefficients are below `2 n^{7.5} d(n) < 2^126`
/// in the supported range, so the wrapped result is exact.
pub fn weight16_coefficients(tau: &[i128], indices: &[usize]) -> Vec<i128> {
    let bound = tau.len() - 1;
    let s3 = sigma3(bound);
    indices
        .iter()
        .map(|&n| {
            assert!(n >= 1 && n <= bound, "index outside the tau table");
            let mut acc = tau[n];
            for j in 1..n {
                let e4 = s3[j].wrapping_mul(240);
                acc = acc.wrapping_add(e4.wrapping_mul(tau[n - j]));
            }
            acc
        })
        .collect()
}

/// Primes up to `bound` by a sieve.
pub fn primes_up_to(bound: usize) -> Vec<u64> {
    if bound < 2 {
        return Vec::new();
    }
    let mut composite = vec![false; bound + 1];
    let mut out = Vec::new();
    for i in 2..=bound {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= bound {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_table_matches_expansion() {
        let tau = ramanujan_tau(100);
        assert_eq!(tau[1], 1);
        for (p, t) in TAU_SMALL_PRIMES {
            assert_eq!(tau[p as usize], t as i128, "tau({p})");
        }
        // multiplicativity and the Hecke relation at 4
        assert_eq!(tau[6], tau[2] * tau[3]);
        assert_eq!(tau[4], tau[2] * tau[2] - 2048);
    }

    #[test]
    fn weight16_known_values() {
        let tau = ramanujan_tau(20);
        let v = weight16_coefficients(&tau, &[1, 2, 3, 4]);
        assert_eq!(v, vec![1, 216, -3348, 13888]);
    }

    #[test]
    fn weight16_respects_deligne_at_large_primes() {
        let tau = ramanujan_tau(3000);
        let ps: Vec<usize> = primes_up_to(3000).into_iter().rev().take(5).map(|p| p as usize).collect();
        for (p, a) in ps.iter().zip(weight16_coefficients(&tau, &ps)) {
            let bound = 2.0 * (*p as f64).powf(7.5);
            assert!((a as f64).abs() <= bound);
        }
    }
}
