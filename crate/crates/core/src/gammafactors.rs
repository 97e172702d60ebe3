//! Complex Gamma function, the archimedean factors `G_delta(s)` and the
//! ratios `gamma_pm(s)` attached to representation parameters.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default radius inside which an argument counts as a pole.
pub const DEFAULT_POLE_RADIUS: f64 = 1e-8;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GammaError {
    #[error("{what} has a pole or zero at s = {s}")]
    Pole { what: &'static str, s: Complex64 },
    #[error("parities must sum to an even number")]
    OddParity,
    #[error("lambda and delta have different lengths")]
    LengthMismatch,
}

/// `log Gamma(z)` on a branch whose exponential is `Gamma(z)`.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        // Gamma(z) Gamma(1-z) = pi / sin(pi z)
        let s = (z * PI).sin();
        return Complex64::new(PI.ln(), 0.0) - s.ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut acc = Complex64::new(LANCZOS[0], 0.0);
    for (k, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

pub fn gamma(z: Complex64) -> Complex64 {
    ln_gamma(z).exp()
}

/// `Gamma_R(s) = pi^{-s/2} Gamma(s/2)`.
pub fn gamma_r(s: Complex64) -> Complex64 {
    ln_gamma_r(s).exp()
}

fn ln_gamma_r(s: Complex64) -> Complex64 {
    -s / 2.0 * PI.ln() + ln_gamma(s / 2.0)
}

/// Distance from `s` to the nearest point of `{start, start - 2, start - 4, ...}`.
fn dist_to_lattice(s: Complex64, start: f64) -> f64 {
    if s.re > start + 0.5 {
        return (s - start).norm();
    }
    let k = ((start - s.re) / 2.0).round().max(0.0);
    (s - (start - 2.0 * k)).norm()
}

/// Singular set of `G_delta`: poles at `-delta - 2k` and zeros at `1 + delta + 2k`.
fn check_regular(s: Complex64, delta: u8, radius: f64) -> Result<(), GammaError> {
    let d = delta as f64;
    if dist_to_lattice(s, -d) < radius {
        return Err(GammaError::Pole { what: "G_delta", s });
    }
    if dist_to_lattice(1.0 - s, -d) < radius {
        return Err(GammaError::Pole { what: "1/G_delta", s });
    }
    Ok(())
}

/// `log G_delta(s)` from the trigonometric form
/// `2 (2 pi)^{-s} Gamma(s) cos(pi s / 2)` resp. `2 i (2 pi)^{-s} Gamma(s) sin(pi s / 2)`.
/// Left of `Re s = 1/2` the reflected form `pi / (2 sin(pi s / 2) Gamma(1 - s))`
/// (resp. with `cos`) replaces `Gamma(s) cos(pi s / 2)`, so the removable
/// points at non-positive integers stay finite.
fn ln_g_trig(s: Complex64, delta: u8) -> Complex64 {
    let half = s * PI / 2.0;
    let unit = if delta % 2 == 0 { Complex64::new(0.0, 0.0) } else { Complex64::new(0.0, PI / 2.0) };
    let core = if s.re >= 0.5 {
        let trig = if delta % 2 == 0 { half.cos() } else { half.sin() };
        ln_gamma(s) + trig.ln()
    } else {
        let trig = if delta % 2 == 0 { half.sin() } else { half.cos() };
        (PI / 2.0).ln() - trig.ln() - ln_gamma(1.0 - s)
    };
    2f64.ln() - s * (2.0 * PI).ln() + unit + core
}

/// `log G_delta(s)` from the form `Gamma_R(s)/Gamma_R(1-s)`
/// resp. `i Gamma_R(s+1)/Gamma_R(2-s)`.
fn ln_g_ratio(s: Complex64, delta: u8) -> Complex64 {
    if delta % 2 == 0 {
        ln_gamma_r(s) - ln_gamma_r(1.0 - s)
    } else {
        Complex64::new(0.0, PI / 2.0) + ln_gamma_r(s + 1.0) - ln_gamma_r(2.0 - s)
    }
}

/// `G_delta(s)` via the trigonometric closed form.
pub fn g_delta_trig(s: Complex64, delta: u8) -> Result<Complex64, GammaError> {
    check_regular(s, delta, DEFAULT_POLE_RADIUS)?;
    Ok(ln_g_trig(s, delta).exp())
}

/// `G_delta(s)` via the `Gamma_R` ratio form.
pub fn g_delta_ratio(s: Complex64, delta: u8) -> Result<Complex64, GammaError> {
    check_regular(s, delta, DEFAULT_POLE_RADIUS)?;
    Ok(ln_g_ratio(s, delta).exp())
}

pub fn g_delta(s: Complex64, delta: u8) -> Result<Complex64, GammaError> {
    g_delta_ratio(s, delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(parity: u8, sign: Sign) -> u8 {
        match sign {
            Sign::Plus => parity % 2,
            Sign::Minus => (parity + 1) % 2,
        }
    }
}

/// Archimedean parameters `(lambda_j, delta_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReprParams {
    pub lambda: Vec<Complex64>,
    pub delta: Vec<u8>,
}

impl ReprParams {
    pub fn new(lambda: Vec<Complex64>, delta: Vec<u8>) -> Result<Self, GammaError> {
        if lambda.len() != delta.len() {
            return Err(GammaError::LengthMismatch);
        }
        if delta.iter().map(|&d| d as u32).sum::<u32>() % 2 != 0 {
            return Err(GammaError::OddParity);
        }
        Ok(ReprParams { lambda, delta: delta.iter().map(|d| d % 2).collect() })
    }

    pub fn real(lambda: &[f64], delta: &[u8]) -> Result<Self, GammaError> {
        Self::new(lambda.iter().map(|&l| Complex64::new(l, 0.0)).collect(), delta.to_vec())
    }

    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    pub fn flipped(&self) -> ReprParams {
        ReprParams { lambda: self.lambda.clone(), delta: self.delta.iter().map(|d| 1 - d).collect() }
    }

    /// `log gamma_pm(s)`; avoids overflow for large `|Im s|`.
    pub fn ln_gamma_pm(&self, s: Complex64, sign: Sign) -> Result<Complex64, GammaError> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (&l, &d) in self.lambda.iter().zip(&self.delta) {
            let p = Sign::flip(d, sign);
            check_regular(s + l, p, DEFAULT_POLE_RADIUS)?;
            acc -= ln_g_ratio(s + l, p);
        }
        Ok(acc)
    }

    pub fn gamma_pm(&self, s: Complex64, sign: Sign) -> Result<Complex64, GammaError> {
        Ok(self.ln_gamma_pm(s, sign)?.exp())
    }

    /// Poles of `gamma_pm` with real part at most `re_max`, after cancelling
    /// coincident poles of one factor against zeros of another. Each pole is
    /// listed once per unit of multiplicity.
    pub fn poles(&self, sign: Sign, re_max: f64) -> Vec<Complex64> {
        // gamma_pm = prod 1/G: poles at zeros of G, i.e. s + lambda = 1 + p + 2k;
        // zeros at poles of G, i.e. s + lambda = -p - 2k.
        let mut poles: Vec<Complex64> = Vec::new();
        for (&l, &d) in self.lambda.iter().zip(&self.delta) {
            let p = Sign::flip(d, sign) as f64;
            let mut z = Complex64::new(1.0 + p, 0.0) - l;
            while z.re <= re_max {
                poles.push(z);
                z += 2.0;
            }
        }
        let floor = poles.iter().map(|z| z.re).fold(f64::INFINITY, f64::min) - 1.0;
        let mut zeros: Vec<Complex64> = Vec::new();
        for (&l, &d) in self.lambda.iter().zip(&self.delta) {
            let p = Sign::flip(d, sign) as f64;
            let mut z = Complex64::new(-p, 0.0) - l;
            while z.re >= floor {
                zeros.push(z);
                z -= 2.0;
            }
        }
        let mut out = Vec::new();
        for pole in poles {
            if let Some(i) = zeros.iter().position(|z| (z - pole).norm() < 1e-9) {
                zeros.swap_remove(i);
            } else {
                out.push(pole);
            }
        }
        out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        out
    }

    /// Smallest real part of an uncancelled pole of either `gamma_+` or `gamma_-`.
    pub fn leftmost_pole(&self) -> Option<f64> {
        let reach = self.lambda.iter().map(|l| l.re.abs()).fold(0.0, f64::max) + 4.0;
        [Sign::Plus, Sign::Minus]
            .iter()
            .flat_map(|&sg| self.poles(sg, reach))
            .map(|p| p.re)
            .min_by(f64::total_cmp)
    }

    /// Whether `s` lies within `radius` of a pole or zero of any factor.
    pub fn near_factor_singularity(&self, s: Complex64, radius: f64) -> bool {
        self.lambda.iter().zip(&self.delta).any(|(&l, &d)| {
            [0u8, 1].iter().any(|&flip| check_regular(s + l, (d + flip) % 2, radius).is_err())
        })
    }
}
