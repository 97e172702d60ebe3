//! Test functions, their Mellin transforms and the dual kernels `Omega_pm`
//! obtained by integrating against `gamma_pm` on a vertical line.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::gammafactors::{GammaError, ReprParams, Sign, DEFAULT_POLE_RADIUS};
use crate::quadrature::{self, gl16, QuadratureError};

type C64 = Complex64;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Gamma(#[from] GammaError),
    #[error("the line Re s = -{sigma} passes within the pole margin of gamma_pm")]
    ContourThroughPole { sigma: f64 },
    #[error("tail bound {bound:e} exceeds tolerance {tol:e}")]
    TailTooLarge { bound: f64, tol: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed table line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type ComplexFn = Arc<dyn Fn(C64) -> C64 + Send + Sync>;

/// A compactly supported weight on the positive reals.
#[derive(Clone)]
pub struct TestFunction {
    label: String,
    lo: f64,
    hi: f64,
    /// `None` for smooth functions.
    smoothness: Option<u32>,
    eval: RealFn,
    closed_mellin: Option<ComplexFn>,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction")
            .field("label", &self.label)
            .field("support", &(self.lo, self.hi))
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

fn bump_profile(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

impl TestFunction {
    pub fn new(label: &str, lo: f64, hi: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self, TransformError> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(TransformError::InvalidArgument(format!("support [{lo}, {hi}] is not a compact interval in (0, inf)")));
        }
        Ok(TestFunction { label: label.to_string(), lo, hi, smoothness: None, eval: Arc::new(f), closed_mellin: None })
    }

    pub fn with_mellin(mut self, m: impl Fn(C64) -> C64 + Send + Sync + 'static) -> Self {
        self.closed_mellin = Some(Arc::new(m));
        self
    }

    pub fn with_smoothness(mut self, order: Option<u32>) -> Self {
        self.smoothness = order;
        self
    }

    /// Rescale to unit mass.
    pub fn normalized(self) -> Result<Self, TransformError> {
        let mass = mellin(&self, C64::new(1.0, 0.0))?.re;
        if mass == 0.0 || !mass.is_finite() {
            return Err(TransformError::InvalidArgument("cannot normalize a function with zero mass".into()));
        }
        Ok(self.scaled(1.0 / mass))
    }

    /// `exp(-1/(1-u^2))` with `u` the affine map of `[lo, hi]` onto `[-1, 1]`,
    /// normalized to unit mass.
    pub fn bump(lo: f64, hi: f64) -> Result<Self, TransformError> {
        let (mid, half) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
        TestFunction::new(&format!("bump[{lo},{hi}]"), lo, hi, move |x| bump_profile((x - mid) / half))?.normalized()
    }

    /// The bump on `[1, 2]`.
    pub fn standard_bump() -> Self {
        Self::bump(1.0, 2.0).expect("valid support")
    }

    /// A Gaussian in `ln(x / center)` with the given variance, cut off smoothly
    /// by a bump at `|ln(x / center)| = half_width`; unit mass.
    pub fn log_gaussian_bump(center: f64, half_width: f64, variance: f64) -> Result<Self, TransformError> {
        if !(center > 0.0 && half_width > 0.0 && variance > 0.0) {
            return Err(TransformError::InvalidArgument("center, half width and variance must be positive".into()));
        }
        let label = format!("log-gaussian(center={center},width={half_width},var={variance})");
        let (lo, hi) = (center * (-half_width).exp(), center * half_width.exp());
        TestFunction::new(&label, lo, hi, move |x| {
            let u = (x / center).ln();
            (-u * u / (2.0 * variance)).exp() * bump_profile(u / half_width)
        })?
        .normalized()
    }

    /// Indicator of `[lo, hi]`. Not smooth; for testing the Mellin quadrature.
    pub fn step(lo: f64, hi: f64) -> Result<Self, TransformError> {
        Ok(TestFunction::new(&format!("step[{lo},{hi}]"), lo, hi, move |x| if x >= lo && x <= hi { 1.0 } else { 0.0 })?
            .with_smoothness(Some(0))
            .with_mellin(move |s| (C64::new(hi, 0.0).powc(s) - C64::new(lo, 0.0).powc(s)) / s))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn smoothness(&self) -> Option<u32> {
        self.smoothness
    }

    pub fn has_closed_mellin(&self) -> bool {
        self.closed_mellin.is_some()
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            0.0
        } else {
            (self.eval)(x)
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        let f = self.eval.clone();
        let m = self.closed_mellin.clone();
        TestFunction {
            label: self.label.clone(),
            lo: self.lo,
            hi: self.hi,
            smoothness: self.smoothness,
            eval: Arc::new(move |x| k * f(x)),
            closed_mellin: m.map(|m| Arc::new(move |s| m(s) * k) as ComplexFn),
        }
    }

    /// `x -> omega(x / k)`, whose Mellin transform is `k^s omega~(s)`.
    pub fn dilate(&self, k: f64) -> Self {
        assert!(k > 0.0);
        let f = self.eval.clone();
        let m = self.closed_mellin.clone();
        TestFunction {
            label: format!("{}(x/{k})", self.label),
            lo: self.lo * k,
            hi: self.hi * k,
            smoothness: self.smoothness,
            eval: Arc::new(move |x| f(x / k)),
            closed_mellin: m.map(|m| Arc::new(move |s: C64| m(s) * C64::new(k, 0.0).powc(s)) as ComplexFn),
        }
    }

    pub fn sum(&self, other: &TestFunction) -> Self {
        let (a, b) = (self.clone(), other.clone());
        let closed = match (&self.closed_mellin, &other.closed_mellin) {
            (Some(f), Some(g)) => {
                let (f, g) = (f.clone(), g.clone());
                Some(Arc::new(move |s| f(s) + g(s)) as ComplexFn)
            }
            _ => None,
        };
        let smoothness = match (self.smoothness, other.smoothness) {
            (None, None) => None,
            (x, y) => Some(x.unwrap_or(u32::MAX).min(y.unwrap_or(u32::MAX))),
        };
        TestFunction {
            label: format!("{}+{}", self.label, other.label),
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
            smoothness,
            eval: Arc::new(move |x| a.eval(x) + b.eval(x)),
            closed_mellin: closed,
        }
    }
}

const MELLIN_TOL: f64 = 1e-13;

/// `omega~(s) = int omega(x) x^{s-1} dx`, from the closed form when one is
/// attached and otherwise by adaptive quadrature in `u = ln x`.
pub fn mellin(omega: &TestFunction, s: C64) -> Result<C64, TransformError> {
    if let Some(m) = &omega.closed_mellin {
        return Ok(m(s));
    }
    mellin_numeric(omega, s)
}

pub fn mellin_numeric(omega: &TestFunction, s: C64) -> Result<C64, TransformError> {
    let (a, b) = (omega.lo.ln(), omega.hi.ln());
    // one starting panel per couple of radians of oscillation
    let panels = (((b - a) * (s.im.abs() + 1.0)) / 2.0).ceil() as usize;
    let f = |u: f64| (s * u).exp() * omega.eval(u.exp());
    let (v, _) = quadrature::integrate(&f, a, b, MELLIN_TOL, panels)?;
    Ok(v)
}

/// Settings for the vertical-line integral.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourControl {
    /// Abscissa `-sigma`; `None` picks a default to the left of all poles.
    pub sigma: Option<f64>,
    /// Fixed truncation height; `None` doubles until the tail is small.
    pub height: Option<f64>,
    /// Panel height away from the real axis.
    pub quad_step: f64,
    /// Target absolute error of `Omega` at arguments `>= y_min`.
    pub tol: f64,
    /// Smallest argument the tail target has to cover.
    pub y_min: f64,
    /// Give up doubling beyond this height.
    pub max_height: f64,
}

impl Default for ContourControl {
    fn default() -> Self {
        ContourControl { sigma: None, height: None, quad_step: 0.5, tol: 1e-10, y_min: 1.0, max_height: 4096.0 }
    }
}

/// Smallest margin kept between the contour and any pole of `gamma_pm`.
const POLE_MARGIN: f64 = 0.05;

/// Default abscissa: a quarter to the left of zero, or of the leftmost pole
/// when that is further left, moved off any cancelled factor singularity.
pub fn default_sigma(repr: &ReprParams) -> f64 {
    let left = repr.leftmost_pole().unwrap_or(f64::INFINITY);
    let mut sigma = 0.25f64.max(0.25 - left);
    while repr.near_factor_singularity(C64::new(-sigma, 0.0), 1e-3) {
        sigma += 0.125;
    }
    sigma
}

pub fn check_sigma(repr: &ReprParams, sigma: f64) -> Result<(), TransformError> {
    let left = repr.leftmost_pole().unwrap_or(f64::INFINITY);
    if !(sigma > 0.0) || -sigma > left - POLE_MARGIN.max(DEFAULT_POLE_RADIUS) {
        return Err(TransformError::ContourThroughPole { sigma });
    }
    if repr.near_factor_singularity(C64::new(-sigma, 0.0), DEFAULT_POLE_RADIUS) {
        return Err(TransformError::ContourThroughPole { sigma });
    }
    Ok(())
}

/// A value of `Omega` with its truncation bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaValue {
    pub value: C64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone)]
struct Line {
    sigma: f64,
    height: f64,
    t: Vec<f64>,
    w: Vec<f64>,
    plus: Vec<C64>,
    minus: Vec<C64>,
    /// `(1/4pi) int_{T/2<|t|<T} (|F_+| + |F_-|) dt` for the final height `T`.
    last_band: f64,
}

impl Line {
    /// `(1/4pi) int (|F_+| + |F_-|) dt` over the computed range.
    fn mass(&self) -> f64 {
        let s: f64 = self.w.iter().zip(self.plus.iter().zip(&self.minus)).map(|(w, (p, m))| w * (p.norm() + m.norm())).sum();
        s / (4.0 * PI)
    }
}

/// Panel edges of `[lo, hi]` (with `0 <= lo < hi`): quarter steps below 2,
/// `step` above.
fn panel_edges(lo: f64, hi: f64, step: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut t = lo;
    while t < hi - 1e-12 {
        let h = if t < 2.0 - 1e-12 { 0.25f64.min(2.0 - t) } else { step };
        let next = (t + h).min(hi);
        out.push((t, next));
        t = next;
    }
    out
}

type Nodes = (Vec<f64>, Vec<f64>);

/// Nodes and weights covering `lo < |t| < hi`, ascending in `t`.
fn band_nodes(lo: f64, hi: f64, step: f64) -> Nodes {
    let (x, w) = gl16();
    let mut pos = Vec::new();
    for (a, b) in panel_edges(lo, hi, step) {
        let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
        for (xi, wi) in x.iter().zip(w) {
            pos.push((mid + half * xi, wi * half));
        }
    }
    let mut t: Vec<f64> = pos.iter().rev().map(|p| -p.0).collect();
    let mut wt: Vec<f64> = pos.iter().rev().map(|p| p.1).collect();
    t.extend(pos.iter().map(|p| p.0));
    wt.extend(pos.iter().map(|p| p.1));
    (t, wt)
}

fn integrand(omega: &TestFunction, repr: &ReprParams, sigma: f64, t: &[f64]) -> Result<(Vec<C64>, Vec<C64>), TransformError> {
    let vals: Vec<Result<(C64, C64), TransformError>> = t
        .par_iter()
        .map(|&ti| {
            let s = C64::new(-sigma, ti);
            let m = mellin(omega, s)?;
            let lp = repr.ln_gamma_pm(s, Sign::Plus)?;
            let lm = repr.ln_gamma_pm(s, Sign::Minus)?;
            if m == C64::new(0.0, 0.0) {
                return Ok((m, m));
            }
            Ok((m * lp.exp(), m * lm.exp()))
        })
        .collect();
    let mut plus = Vec::with_capacity(t.len());
    let mut minus = Vec::with_capacity(t.len());
    for v in vals {
        let (p, m) = v?;
        plus.push(p);
        minus.push(m);
    }
    Ok((plus, minus))
}

/// Roughly the rounding floor of `omega~` on the line, relative to which
/// the computed transform carries no information.
fn mellin_noise(omega: &TestFunction, sigma: f64) -> Result<f64, TransformError> {
    let (a, b) = (omega.lo.ln(), omega.hi.ln());
    let f = |u: f64| C64::new((-sigma * u).exp() * omega.eval(u.exp()).abs(), 0.0);
    let (v, _) = quadrature::integrate(&f, a, b, MELLIN_TOL, 4)?;
    Ok(4.0 * f64::EPSILON * v.re + MELLIN_TOL)
}

/// Integrate along `Re s = -sigma`, doubling the height until the outermost
/// band contributes less than `target` to the absolute integral or is
/// indistinguishable from rounding noise in `omega~`.
fn build_line(omega: &TestFunction, repr: &ReprParams, sigma: f64, ctrl: &ContourControl, target: f64) -> Result<Line, TransformError> {
    let band_mass = |w: &[f64], p: &[C64], m: &[C64]| -> f64 {
        w.iter().zip(p.iter().zip(m)).map(|(w, (p, m))| w * (p.norm() + m.norm())).sum::<f64>() / (4.0 * PI)
    };
    let noise = mellin_noise(omega, sigma)?;
    let mut height = ctrl.height.map(|h| h / 2.0).unwrap_or(8.0);
    let (t, w) = band_nodes(0.0, height, ctrl.quad_step);
    let (plus, minus) = integrand(omega, repr, sigma, &t)?;
    let mut line = Line { sigma, height, t, w, plus, minus, last_band: f64::INFINITY };
    loop {
        let (bt, bw) = band_nodes(height, 2.0 * height, ctrl.quad_step);
        let (bp, bm) = integrand(omega, repr, sigma, &bt)?;
        let band = band_mass(&bw, &bp, &bm);
        let floor: f64 = bt
            .iter()
            .zip(&bw)
            .map(|(&t, w)| {
                let s = C64::new(-sigma, t);
                let g = repr.ln_gamma_pm(s, Sign::Plus).map(|l| l.re.exp()).unwrap_or(0.0)
                    + repr.ln_gamma_pm(s, Sign::Minus).map(|l| l.re.exp()).unwrap_or(0.0);
                w * g * noise
            })
            .sum::<f64>()
            / (4.0 * PI);
        merge_band(&mut line, bt, bw, bp, bm);
        height *= 2.0;
        line.height = height;
        line.last_band = band;
        if ctrl.height.is_some() || band <= target || band <= 4.0 * floor {
            return Ok(line);
        }
        if 2.0 * height > ctrl.max_height {
            return Err(TransformError::TailTooLarge { bound: band, tol: target });
        }
    }
}

fn merge_band(line: &mut Line, t: Vec<f64>, w: Vec<f64>, p: Vec<C64>, m: Vec<C64>) {
    let half = t.len() / 2;
    let splice = |old: &mut Vec<f64>, new: &[f64]| {
        let mut v = new[..half].to_vec();
        v.append(old);
        v.extend_from_slice(&new[half..]);
        *old = v;
    };
    let splice_c = |old: &mut Vec<C64>, new: &[C64]| {
        let mut v = new[..half].to_vec();
        v.append(old);
        v.extend_from_slice(&new[half..]);
        *old = v;
    };
    splice(&mut line.t, &t);
    splice(&mut line.w, &w);
    splice_c(&mut line.plus, &p);
    splice_c(&mut line.minus, &m);
}

/// `Omega_pm` for one test function and one set of representation parameters,
/// tabulated on the contour so that evaluation at any `x` is a single sum.
#[derive(Debug, Clone)]
pub struct OmegaKernel {
    main: Line,
    tol: f64,
    label: String,
}

impl OmegaKernel {
    pub fn build(omega: &TestFunction, repr: &ReprParams, ctrl: &ContourControl) -> Result<Self, TransformError> {
        let sigma = ctrl.sigma.unwrap_or_else(|| default_sigma(repr));
        check_sigma(repr, sigma)?;
        if !(ctrl.tol > 0.0 && ctrl.y_min > 0.0 && ctrl.quad_step > 0.0) {
            return Err(TransformError::InvalidArgument("tol, y_min and quad_step must be positive".into()));
        }
        // tail at y is bounded by y^{-sigma-1} * 2 * last band
        let target = ctrl.tol / 4.0 * ctrl.y_min.powf(sigma + 1.0);
        let main = build_line(omega, repr, sigma, ctrl, target)?;
        let label = format!("{} lambda={:?} delta={:?}", omega.label(), repr.lambda.iter().map(|l| (l.re, l.im)).collect::<Vec<_>>(), repr.delta);
        Ok(OmegaKernel { main, tol: ctrl.tol, label })
    }

    /// Test function and parameters the kernel was built from.
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn sigma(&self) -> f64 {
        self.main.sigma
    }

    pub fn height(&self) -> f64 {
        self.main.height
    }

    pub fn node_count(&self) -> usize {
        self.main.t.len()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn tail_bound(&self, x: f64) -> f64 {
        x.powf(-self.main.sigma - 1.0) * 2.0 * self.main.last_band
    }

    /// `(Omega_+(x), Omega_-(x))` for `x > 0`.
    pub fn omega_pair(&self, x: f64) -> (C64, C64) {
        let lx = x.ln();
        let mut p = C64::new(0.0, 0.0);
        let mut m = C64::new(0.0, 0.0);
        for i in 0..self.main.t.len() {
            let (sn, cs) = (self.main.t[i] * lx).sin_cos();
            let e = C64::new(cs * self.main.w[i], sn * self.main.w[i]);
            p += self.main.plus[i] * e;
            m += self.main.minus[i] * e;
        }
        let scale = x.powf(-self.main.sigma - 1.0) / (4.0 * PI);
        (p * scale, m * scale)
    }

    pub fn omega_pm(&self, x: f64, sign: Sign) -> Result<OmegaValue, TransformError> {
        if !(x > 0.0) {
            return Err(TransformError::InvalidArgument(format!("Omega_pm needs x > 0, got {x}")));
        }
        let (p, m) = self.omega_pair(x);
        let value = match sign {
            Sign::Plus => p,
            Sign::Minus => m,
        };
        Ok(OmegaValue { value, tail_bound: self.tail_bound(x) })
    }

    /// `Omega(y) = Omega_+(|y|) + sgn(y) Omega_-(|y|)`.
    pub fn omega_full(&self, y: f64) -> Result<OmegaValue, TransformError> {
        if y == 0.0 || !y.is_finite() {
            return Err(TransformError::InvalidArgument(format!("Omega needs a nonzero argument, got {y}")));
        }
        let (p, m) = self.omega_pair(y.abs());
        let value = if y > 0.0 { p + m } else { p - m };
        Ok(OmegaValue { value, tail_bound: 2.0 * self.tail_bound(y.abs()) })
    }

    /// Trivial bound `|Omega(y)| <= |y|^{-sigma-1} (1/4pi) int (|F_+| + |F_-|)`.
    pub fn bound(&self, y: f64) -> f64 {
        y.abs().powf(-self.main.sigma - 1.0) * (self.main.mass() + 2.0 * self.main.last_band)
    }

    /// Empirical onset of decay: scanning a geometric grid of `|y|`, the
    /// point past the last sample with `|Omega_+| + |Omega_-|` above `level`.
    /// The scan stops once four consecutive doublings stay below `level`, or
    /// at `|y| = 1e12`.
    pub fn decay_threshold(&self, level: f64) -> f64 {
        let mut y = 1e-3;
        let mut last = 0.0f64;
        while y < 1e12 {
            let (p, m) = self.omega_pair(y);
            if p.norm() + m.norm() > level {
                last = y;
            } else if y > 16.0 * last.max(1.0) {
                break;
            }
            y *= 1.05;
        }
        last * 1.05
    }

    pub fn check(&self, v: OmegaValue) -> Result<OmegaValue, TransformError> {
        if v.tail_bound > self.tol {
            Err(TransformError::TailTooLarge { bound: v.tail_bound, tol: self.tol })
        } else {
            Ok(v)
        }
    }
}

pub fn omega_pm(omega: &TestFunction, repr: &ReprParams, x: f64, sign: Sign, ctrl: &ContourControl) -> Result<OmegaValue, TransformError> {
    let ctrl = ContourControl { y_min: ctrl.y_min.min(x), ..ctrl.clone() };
    let k = OmegaKernel::build(omega, repr, &ctrl)?;
    k.check(k.omega_pm(x, sign)?)
}

pub fn omega_full(omega: &TestFunction, repr: &ReprParams, y: f64, ctrl: &ContourControl) -> Result<OmegaValue, TransformError> {
    let ctrl = ContourControl { y_min: ctrl.y_min.min(y.abs()), ..ctrl.clone() };
    let k = OmegaKernel::build(omega, repr, &ctrl)?;
    k.check(k.omega_full(y)?)
}

/// Memoized `(Omega_+(x), Omega_-(x))` keyed by the bit pattern of `x > 0`,
/// optionally preloaded from a table of `Omega(y)` values.
pub struct OmegaCache {
    kernel: Arc<OmegaKernel>,
    pairs: RwLock<BTreeMap<u64, (C64, C64)>>,
}

impl std::fmt::Debug for OmegaCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OmegaCache").field("kernel", &self.kernel.label()).field("entries", &self.len()).finish()
    }
}

impl OmegaCache {
    pub fn new(kernel: Arc<OmegaKernel>) -> Self {
        OmegaCache { kernel, pairs: RwLock::new(BTreeMap::new()) }
    }

    pub fn kernel(&self) -> &OmegaKernel {
        &self.kernel
    }

    /// Loads records of `Omega(y)`; an entry is used only when both `y` and
    /// `-y` are present.
    pub fn preload(&self, records: &[(f64, OmegaValue)]) -> usize {
        let mut halves: BTreeMap<u64, (Option<C64>, Option<C64>)> = BTreeMap::new();
        for &(y, v) in records {
            let e = halves.entry(y.abs().to_bits()).or_default();
            if y > 0.0 {
                e.0 = Some(v.value);
            } else {
                e.1 = Some(v.value);
            }
        }
        let mut map = self.pairs.write().expect("cache lock");
        let mut loaded = 0;
        for (k, h) in halves {
            if let (Some(pos), Some(neg)) = h {
                map.insert(k, ((pos + neg) / 2.0, (pos - neg) / 2.0));
                loaded += 1;
            }
        }
        loaded
    }

    pub fn len(&self) -> usize {
        self.pairs.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pair(&self, x: f64) -> (C64, C64) {
        let key = x.to_bits();
        if let Some(v) = self.pairs.read().expect("cache lock").get(&key) {
            return *v;
        }
        let v = self.kernel.omega_pair(x);
        self.pairs.write().expect("cache lock").insert(key, v);
        v
    }

    pub fn get(&self, y: f64) -> Result<OmegaValue, TransformError> {
        if y == 0.0 || !y.is_finite() {
            return Err(TransformError::InvalidArgument(format!("Omega needs a nonzero argument, got {y}")));
        }
        let (p, m) = self.pair(y.abs());
        let value = if y > 0.0 { p + m } else { p - m };
        Ok(OmegaValue { value, tail_bound: 2.0 * self.kernel.tail_bound(y.abs()) })
    }

    /// Cached entries as `Omega(y)` records for both signs, ascending in `|y|`.
    pub fn records(&self) -> Vec<(f64, OmegaValue)> {
        let map = self.pairs.read().expect("cache lock");
        let mut out = Vec::with_capacity(2 * map.len());
        for (&k, &(p, m)) in map.iter() {
            let x = f64::from_bits(k);
            let tail = 2.0 * self.kernel.tail_bound(x);
            out.push((x, OmegaValue { value: p + m, tail_bound: tail }));
            out.push((-x, OmegaValue { value: p - m, tail_bound: tail }));
        }
        out
    }
}

/// Write `(y, re, im, tail_bound)` records, one per line, tab separated.
pub fn write_table<W: Write>(out: &mut W, records: &[(f64, OmegaValue)]) -> Result<(), TransformError> {
    writeln!(out, "# y\tre\tim\ttail_bound")?;
    for (y, v) in records {
        writeln!(out, "{y:e}\t{:e}\t{:e}\t{:e}", v.value.re, v.value.im, v.tail_bound)?;
    }
    Ok(())
}

pub fn read_table<R: BufRead>(input: R) -> Result<Vec<(f64, OmegaValue)>, TransformError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(TransformError::Parse { line: i + 1, reason: format!("expected 4 fields, found {}", fields.len()) });
        }
        let num = |k: usize| -> Result<f64, TransformError> {
            fields[k].parse::<f64>().map_err(|e| TransformError::Parse { line: i + 1, reason: e.to_string() })
        };
        out.push((num(0)?, OmegaValue { value: C64::new(num(1)?, num(2)?), tail_bound: num(3)? }));
    }
    Ok(out)
}
