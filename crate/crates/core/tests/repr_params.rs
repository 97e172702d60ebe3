//! Derives the archimedean parameters of the shipped forms by matching
//! `prod_j G_{delta_j}(s + lambda_j)` against `L_inf(s) / L_inf(1 - s)` of the
//! completed L-function. Matches are only determined up to flipping the
//! parities of two entries whose `lambda` differ in parity, which changes
//! neither `gamma_+` nor `gamma_-`; the presets must lie in the match set and
//! every match must give the same `gamma_pm`.

use num_complex::Complex64;
use voronoi_core::gammafactors::{g_delta_ratio, gamma_r, ReprParams, Sign};
use voronoi_core::voronoi::presets::Preset;

type C64 = Complex64;

fn gamma_c(s: C64) -> C64 {
    gamma_r(s) * gamma_r(s + 1.0)
}

/// Archimedean factor of the symmetric square of a weight `k` form.
fn sym2_factor(k: f64) -> impl Fn(C64) -> C64 {
    move |s| gamma_r(s + 1.0) * gamma_c(s + k - 1.0)
}

/// Archimedean factor of the Rankin-Selberg product of weights `k1 >= k2`.
fn rankin_factor(k1: f64, k2: f64) -> impl Fn(C64) -> C64 {
    move |s| gamma_c(s + (k1 + k2) / 2.0 - 1.0) * gamma_c(s + (k1 - k2) / 2.0)
}

const POINTS: [(f64, f64); 3] = [(0.3, 0.7), (0.5, 3.0), (0.2, -5.0)];

fn product(lambda: &[i32], delta: &[u8], s: C64) -> Option<C64> {
    let mut p = C64::new(1.0, 0.0);
    for (&l, &d) in lambda.iter().zip(delta) {
        p *= g_delta_ratio(s + l as f64, d).ok()?;
    }
    Some(p)
}

fn ratios(target: &dyn Fn(C64) -> C64) -> Vec<C64> {
    POINTS
        .iter()
        .map(|&(x, y)| {
            let s = C64::new(x, y);
            target(s) / target(1.0 - s)
        })
        .collect()
}

fn matches(lambda: &[i32], delta: &[u8], wanted: &[C64]) -> bool {
    POINTS.iter().zip(wanted).all(|(&(x, y), w)| {
        product(lambda, delta, C64::new(x, y)).is_some_and(|p| (p - w).norm() <= 1e-10 * w.norm())
    })
}

/// Every non-increasing integer `lambda` in `[-15, 15]` summing to zero,
/// paired with parities of even sum, for which the product matches.
fn search(n: usize, target: &dyn Fn(C64) -> C64) -> Vec<(Vec<i32>, Vec<u8>)> {
    let wanted = ratios(target);
    let mut found = Vec::new();
    let mut lambda = vec![0i32; n];
    fn lambdas(i: usize, max: i32, lambda: &mut Vec<i32>, out: &mut Vec<Vec<i32>>) {
        if i == lambda.len() {
            if lambda.iter().sum::<i32>() == 0 {
                out.push(lambda.clone());
            }
            return;
        }
        for v in (-15..=max).rev() {
            lambda[i] = v;
            lambdas(i + 1, v, lambda, out);
        }
    }
    let mut all = Vec::new();
    lambdas(0, 15, &mut lambda, &mut all);
    for lam in all {
        for mask in 0u32..(1 << n) {
            if mask.count_ones() % 2 == 1 {
                continue;
            }
            let delta: Vec<u8> = (0..n).map(|j| ((mask >> j) & 1) as u8).collect();
            if matches(&lam, &delta, &wanted) {
                found.push((lam.clone(), delta));
            }
        }
    }
    found
}

/// Parameters as a sorted multiset of `(lambda, delta)` pairs.
fn canonical(lambda: &[i32], delta: &[u8]) -> Vec<(i32, u8)> {
    let mut v: Vec<(i32, u8)> = lambda.iter().copied().zip(delta.iter().copied()).collect();
    v.sort_unstable();
    v
}

fn check_preset(name: &str, target: &dyn Fn(C64) -> C64) {
    let preset = Preset::load_with_bound(name, 10).unwrap();
    let lambda: Vec<i32> = preset
        .repr
        .lambda
        .iter()
        .map(|z| {
            assert_eq!(z.im, 0.0);
            z.re as i32
        })
        .collect();
    let found = search(preset.rank(), target);
    let want = canonical(&lambda, &preset.repr.delta);
    assert!(found.iter().any(|(l, d)| canonical(l, d) == want), "{name}: preset parameters not among {found:?}");
    let probe = C64::new(0.3, 2.5);
    for (l, d) in &found {
        let r = ReprParams::real(&l.iter().map(|&x| x as f64).collect::<Vec<_>>(), d).unwrap();
        for sign in [Sign::Plus, Sign::Minus] {
            let a = r.gamma_pm(probe, sign).unwrap();
            let b = preset.repr.gamma_pm(probe, sign).unwrap();
            assert!((a - b).norm() <= 1e-10 * b.norm(), "{name}: {l:?} {d:?} differs for {sign:?}");
        }
    }
}

#[test]
fn sym2_delta_parameters() {
    check_preset("sym2-delta", &sym2_factor(12.0));
}

#[test]
fn delta_x_delta_parameters() {
    check_preset("delta-x-delta", &rankin_factor(12.0, 12.0));
}

#[test]
fn delta_x_delta16_parameters() {
    check_preset("delta-x-delta16", &rankin_factor(16.0, 12.0));
}

#[test]
fn sym2_gamma_plus_at_centre() {
    // self-dual, so gamma_+ at the centre is L_inf(1/2) / L_inf(1/2)
    let p = Preset::load_with_bound("sym2-delta", 10).unwrap();
    let g = p.repr.gamma_pm(C64::new(0.5, 0.0), Sign::Plus).unwrap();
    assert!((g - 1.0).norm() < 1e-12, "{g}");
    let s = C64::new(0.5, 4.0);
    let f = sym2_factor(12.0);
    let want = f(1.0 - s) / f(s);
    assert!((p.repr.gamma_pm(s, Sign::Plus).unwrap() - want).norm() < 1e-12 * want.norm());
}
