//! `voronoi`: reproducible verification runs from the command line.
//!
//! Records go to standard output, diagnostics to standard error. Exit status
//! is 0 when every check passed, 1 when one failed, 2 on argument errors and
//! 3 when the work budget was exhausted.

mod config;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{CommandFactory, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;

use voronoi_core::coefficients::CoefficientProvider;
use voronoi_core::gammafactors::{g_delta_ratio, g_delta_trig, Sign};
use voronoi_core::identities::{collapse_block, collapse_grid, lemma_cancel_check, lemma_grid, EvalMode, IdentityError};
use voronoi_core::kloosterman::{self, admissible_dvecs, hyper_kloosterman_with_budget, KloostermanError, KloostermanSpec};
use voronoi_core::modarith::units;
use voronoi_core::report::{RecordFormat, VerificationReport};
use voronoi_core::transforms::{read_table, write_table, OmegaCache, OmegaValue};
use voronoi_core::voronoi::presets::{Preset, PRESET_BOUND, PRESET_NAMES};
use voronoi_core::voronoi::{verify_balanced, BalancedParams, VoronoiCheck, VoronoiError};

#[derive(Parser, Debug)]
#[command(name = "voronoi", version, about = "Verification harness for hyper-Kloosterman sums and Voronoi summation", args_override_self = true)]
struct Cli {
    /// Record format: json (one object per line) or tsv.
    #[arg(long, global = true, default_value = "tsv")]
    format: RecordFormat,
    /// Worker threads; output order does not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// `key=value` file of defaults; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Enumeration budget for exponential sums (default from VORONOI_WORK_BUDGET).
    #[arg(long, global = true)]
    budget: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Evaluate Kl(a, n, c; q, d); all admissible d when --d is omitted.
    Kloosterman {
        #[arg(long, allow_negative_numbers = true)]
        a: i64,
        /// Single value, comma list, or range `lo..hi` (inclusive).
        #[arg(long, allow_hyphen_values = true)]
        n: String,
        #[arg(long)]
        c: u64,
        /// Comma-separated q tuple.
        #[arg(long)]
        q: String,
        /// Comma-separated d tuple.
        #[arg(long)]
        d: Option<String>,
    },
    /// Check the divisor-sum cancellation lemma on a full grid.
    VerifyLemma {
        #[arg(long = "max-C", default_value_t = 12)]
        max_c: u64,
        #[arg(long = "max-Q", default_value_t = 12)]
        max_q: u64,
        /// Decide equality in exact cyclotomic arithmetic.
        #[arg(long)]
        exact: bool,
    },
    /// Check the collapse identity on a full grid.
    VerifyCollapse {
        /// Bound on len(q) + len(Q).
        #[arg(long, default_value_t = 3)]
        max_len: usize,
        #[arg(long, default_value_t = 6)]
        max_c: u64,
        /// Bound on the entries of q and Q.
        #[arg(long, default_value_t = 3)]
        max_entry: u64,
        /// Twists n range over -n_max..=n_max.
        #[arg(long, default_value_t = 3)]
        n_max: i64,
    },
    /// Check the balanced Voronoi formula for a preset form.
    VerifyVoronoi {
        #[arg(long, default_value = "sym2-delta")]
        preset: String,
        #[arg(long)]
        c: u64,
        /// Residue a; every unit modulo c when omitted.
        #[arg(long, allow_negative_numbers = true)]
        a: Option<i64>,
        /// Comma-separated q tuple (default `1`).
        #[arg(long)]
        q: Option<String>,
        /// Comma-separated Q tuple (default: ones filling the rank).
        #[arg(long = "Q")]
        big_q: Option<String>,
        /// Coefficient bound; also the hard limit on dual sum length.
        #[arg(long, default_value_t = PRESET_BOUND)]
        bound: u64,
        /// Override the preset's relative tolerance.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Omega table: loaded when present, rewritten after the run.
        #[arg(long)]
        omega_table: Option<PathBuf>,
    },
    /// Write coefficients in the plain text exchange format.
    DumpCoefficients {
        /// Preset name; ignored when --random-rank is given.
        #[arg(long, default_value = "sym2-delta")]
        preset: String,
        /// Use seeded random coefficients of this rank instead of a preset.
        #[arg(long)]
        random_rank: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Every index runs over 1..=max_index.
        #[arg(long, default_value_t = 10)]
        max_index: u64,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Read a coefficient file back and echo it in normalized form.
        #[arg(long)]
        ingest: Option<PathBuf>,
    },
    /// Evaluate G_delta(s) by both closed forms, or gamma_pm of a preset.
    Gamma {
        #[arg(long, allow_negative_numbers = true)]
        re: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        im: f64,
        #[arg(long, default_value_t = 0)]
        delta: u8,
        /// Evaluate gamma_+ and gamma_- of this preset instead.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Tabulate Omega(y) for a preset on a logarithmic grid of +-y.
    Omega {
        #[arg(long, default_value = "sym2-delta")]
        preset: String,
        #[arg(long, default_value_t = 0.1)]
        y_min: f64,
        #[arg(long, default_value_t = 100.0)]
        y_max: f64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        /// Also persist the table to this path.
        #[arg(long)]
        omega_table: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Budget(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Other(e.into())
    }
}

fn kl_failure(e: KloostermanError) -> Failure {
    match e {
        KloostermanError::BudgetExceeded { .. } => Failure::Budget(e.to_string()),
        KloostermanError::LengthMismatch { .. } | KloostermanError::InvalidChain { .. } | KloostermanError::NotCoprime { .. } => {
            Failure::Usage(e.to_string())
        }
        other => Failure::Other(other.into()),
    }
}

fn identity_failure(e: IdentityError) -> Failure {
    match e {
        IdentityError::Kloosterman(k) => kl_failure(k),
        IdentityError::InvalidSpec(s) => Failure::Usage(s),
        other => Failure::Other(other.into()),
    }
}

fn voronoi_failure(e: VoronoiError) -> Failure {
    match e {
        VoronoiError::Kloosterman(k) => kl_failure(k),
        VoronoiError::InvalidParams(s) => Failure::Usage(s),
        other => Failure::Other(other.into()),
    }
}

fn parse_list(s: &str) -> Result<Vec<u64>, Failure> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| Failure::Usage(format!("bad integer {t:?} in list {s:?}")))).collect()
}

fn parse_n(s: &str) -> Result<Vec<i64>, Failure> {
    let bad = || Failure::Usage(format!("bad n {s:?}: expected an integer, a comma list or lo..hi"));
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: i64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: i64 = hi.trim().parse().map_err(|_| bad())?;
        return Ok((lo..=hi).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

/// Writes records and tracks whether all passed.
struct Sink {
    out: BufWriter<io::Stdout>,
    format: RecordFormat,
    header_done: bool,
    failed: usize,
    total: usize,
}

impl Sink {
    fn new(format: RecordFormat) -> Self {
        Sink { out: BufWriter::new(io::stdout()), format, header_done: false, failed: 0, total: 0 }
    }

    fn report(&mut self, r: &VerificationReport) -> io::Result<()> {
        if self.format == RecordFormat::Tsv && !self.header_done {
            writeln!(self.out, "{}", VerificationReport::tsv_header())?;
            self.header_done = true;
        }
        self.total += 1;
        if !r.passed {
            self.failed += 1;
        }
        writeln!(self.out, "{}", r.render(self.format))
    }

    fn status(mut self) -> io::Result<Status> {
        self.out.flush()?;
        if self.failed > 0 {
            eprintln!("{} of {} checks failed", self.failed, self.total);
            Ok(Status::Failed)
        } else {
            eprintln!("{} checks passed", self.total);
            Ok(Status::Passed)
        }
    }
}

enum Status {
    Passed,
    Failed,
}

fn load_preset(name: &str, bound: u64) -> Result<Preset, Failure> {
    if !PRESET_NAMES.contains(&name) {
        return Err(Failure::Usage(format!("unknown preset {name:?}; expected one of {PRESET_NAMES:?}")));
    }
    Preset::load_with_bound(name, bound).map_err(voronoi_failure)
}

fn load_table(path: &Path) -> Result<Vec<(f64, OmegaValue)>, Failure> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_table(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?)
}

fn save_table(path: &Path, records: &[(f64, OmegaValue)]) -> Result<(), Failure> {
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    write_table(&mut f, records).map_err(|e| anyhow!(e))?;
    f.flush()?;
    Ok(())
}

fn c64_json(z: Complex64) -> serde_json::Value {
    json!([z.re, z.im])
}

fn run(cli: Cli) -> Result<Status, Failure> {
    let budget = cli.budget.unwrap_or_else(kloosterman::work_budget);
    if budget == 0 {
        return Err(Failure::Usage("budget must be positive".into()));
    }
    kloosterman::set_work_budget(budget);
    let format = cli.format;
    match cli.cmd {
        Cmd::Kloosterman { a, n, c, q, d } => {
            let qvec = parse_list(&q)?;
            let ns = parse_n(&n)?;
            if c == 0 {
                return Err(Failure::Usage("c must be positive".into()));
            }
            let dvecs = match d {
                Some(d) => vec![parse_list(&d)?],
                None => admissible_dvecs(c, &qvec).map_err(kl_failure)?,
            };
            let mut out = BufWriter::new(io::stdout());
            if format == RecordFormat::Tsv {
                writeln!(out, "a\tn\tc\tq\td\tre\tim")?;
            }
            let join = |v: &[u64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
            for dvec in &dvecs {
                for &n in &ns {
                    let spec = KloostermanSpec::new(a, n, c, qvec.clone(), dvec.clone());
                    let v = hyper_kloosterman_with_budget(&spec, budget).map_err(kl_failure)?;
                    match format {
                        RecordFormat::Tsv => writeln!(out, "{a}\t{n}\t{c}\t{}\t{}\t{:?}\t{:?}", join(&qvec), join(dvec), v.re, v.im)?,
                        RecordFormat::Json => writeln!(out, "{}", json!({"spec": spec, "value": c64_json(v)}))?,
                    }
                }
            }
            out.flush()?;
            Ok(Status::Passed)
        }
        Cmd::VerifyLemma { max_c, max_q, exact } => {
            if max_c == 0 || max_q == 0 {
                return Err(Failure::Usage("grid bounds must be positive".into()));
            }
            let mode = if exact { EvalMode::Exact } else { EvalMode::Float };
            let mut sink = Sink::new(format);
            for spec in lemma_grid(max_c, max_q) {
                let r = lemma_cancel_check(&spec, mode).map_err(identity_failure)?;
                sink.report(&r)?;
            }
            Ok(sink.status()?)
        }
        Cmd::VerifyCollapse { max_len, max_c, max_entry, n_max } => {
            if max_c == 0 || max_entry == 0 || n_max < 0 {
                return Err(Failure::Usage("grid bounds must be positive".into()));
            }
            let ns: Vec<i64> = (-n_max..=n_max).collect();
            let mut sink = Sink::new(format);
            for (c, q, big_q) in collapse_grid(max_len, max_c, max_entry) {
                for v in collapse_block(c, &q, &big_q, &ns, budget).map_err(identity_failure)? {
                    sink.report(&v.report())?;
                }
            }
            Ok(sink.status()?)
        }
        Cmd::VerifyVoronoi { preset, c, a, q, big_q, bound, tolerance, omega_table } => {
            let preset = load_preset(&preset, bound)?;
            let rank = preset.rank();
            let qvec = match q {
                Some(q) => parse_list(&q)?,
                None => vec![1],
            };
            let big_q = match big_q {
                Some(s) => parse_list(&s)?,
                None => vec![1; (rank - 2).saturating_sub(qvec.len())],
            };
            if c == 0 {
                return Err(Failure::Usage("c must be positive".into()));
            }
            let avals: Vec<i64> = match a {
                Some(a) => vec![a],
                None => units(c).into_iter().map(|a| a as i64).collect(),
            };
            let params: Vec<BalancedParams> = avals
                .iter()
                .map(|&a| BalancedParams::new(rank, a, c, qvec.clone(), big_q.clone()))
                .collect::<Result<_, _>>()
                .map_err(voronoi_failure)?;
            let kernel = preset.kernel().map_err(voronoi_failure)?;
            let cache = OmegaCache::new(Arc::new(kernel));
            if let Some(path) = omega_table.as_deref().filter(|p| p.exists()) {
                let loaded = cache.preload(&load_table(path)?);
                eprintln!("loaded {loaded} Omega pairs from {}", path.display());
            }
            let check = VoronoiCheck {
                provider: &preset.provider,
                omega: &preset.omega,
                cache: &cache,
                trunc: &preset.trunc,
                tolerance: tolerance.unwrap_or(preset.tolerance),
            };
            let mut sink = Sink::new(format);
            for p in &params {
                let r = verify_balanced(&check, p).map_err(voronoi_failure)?.with_meta("preset", preset.name.clone()).with_meta("bound", bound);
                sink.report(&r)?;
            }
            if let Some(path) = omega_table.as_deref() {
                save_table(path, &cache.records())?;
            }
            Ok(sink.status()?)
        }
        Cmd::DumpCoefficients { preset, random_rank, seed, max_index, output, ingest } => {
            if max_index == 0 {
                return Err(Failure::Usage("max-index must be positive".into()));
            }
            let provider = match (&ingest, random_rank) {
                (Some(path), _) => {
                    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
                    CoefficientProvider::ingest(BufReader::new(f), &path.display().to_string()).map_err(|e| anyhow!(e))?
                }
                (None, Some(rank)) => CoefficientProvider::random(rank, seed, max_index).map_err(|e| Failure::Usage(e.to_string()))?,
                (None, None) => load_preset(&preset, max_index.max(2))?.provider,
            };
            let write = |w: &mut dyn Write| provider.export(max_index, &mut BufWriter::new(w)).map_err(|e| Failure::Other(anyhow!(e)));
            match output {
                Some(path) => write(&mut File::create(&path).with_context(|| format!("creating {}", path.display()))?)?,
                None => write(&mut io::stdout())?,
            }
            Ok(Status::Passed)
        }
        Cmd::Gamma { re, im, delta, preset } => {
            let s = Complex64::new(re, im);
            let mut out = BufWriter::new(io::stdout());
            match preset {
                Some(name) => {
                    let p = load_preset(&name, 2)?;
                    let gp = p.repr.gamma_pm(s, Sign::Plus).map_err(|e| anyhow!(e))?;
                    let gm = p.repr.gamma_pm(s, Sign::Minus).map_err(|e| anyhow!(e))?;
                    match format {
                        RecordFormat::Tsv => writeln!(out, "{name}\t{re:?}\t{im:?}\t{:?}\t{:?}\t{:?}\t{:?}", gp.re, gp.im, gm.re, gm.im)?,
                        RecordFormat::Json => {
                            writeln!(out, "{}", json!({"preset": name, "s": c64_json(s), "gamma_plus": c64_json(gp), "gamma_minus": c64_json(gm)}))?
                        }
                    }
                }
                None => {
                    if delta > 1 {
                        return Err(Failure::Usage("delta must be 0 or 1".into()));
                    }
                    let trig = g_delta_trig(s, delta).map_err(|e| anyhow!(e))?;
                    let ratio = g_delta_ratio(s, delta).map_err(|e| anyhow!(e))?;
                    match format {
                        RecordFormat::Tsv => writeln!(out, "{delta}\t{re:?}\t{im:?}\t{:?}\t{:?}\t{:?}\t{:?}", trig.re, trig.im, ratio.re, ratio.im)?,
                        RecordFormat::Json => {
                            writeln!(out, "{}", json!({"delta": delta, "s": c64_json(s), "trig": c64_json(trig), "ratio": c64_json(ratio)}))?
                        }
                    }
                }
            }
            out.flush()?;
            Ok(Status::Passed)
        }
        Cmd::Omega { preset, y_min, y_max, points, omega_table } => {
            if !(y_min > 0.0 && y_max >= y_min && points > 0) {
                return Err(Failure::Usage("need 0 < y-min <= y-max and points > 0".into()));
            }
            let p = load_preset(&preset, 2)?;
            let kernel = p.kernel().map_err(voronoi_failure)?;
            let ys: Vec<f64> = (0..points)
                .map(|i| if points == 1 { y_min } else { y_min * (y_max / y_min).powf(i as f64 / (points - 1) as f64) })
                .collect();
            let mut records = Vec::with_capacity(2 * points);
            for &y in &ys {
                for y in [y, -y] {
                    records.push((y, kernel.omega_full(y).map_err(|e| anyhow!(e))?));
                }
            }
            let mut out = BufWriter::new(io::stdout());
            match format {
                RecordFormat::Tsv => write_table(&mut out, &records).map_err(|e| anyhow!(e))?,
                RecordFormat::Json => {
                    for (y, v) in &records {
                        writeln!(out, "{}", json!({"y": y, "value": c64_json(v.value), "tail_bound": v.tail_bound}))?;
                    }
                }
            }
            out.flush()?;
            if let Some(path) = omega_table {
                save_table(&path, &records)?;
            }
            Ok(Status::Passed)
        }
    }
}

fn main() -> ExitCode {
    let mut args: Vec<String> = std::env::args().collect();
    if let Some(path) = config::find_path(&args) {
        match config::merge(&Cli::command(), args, Path::new(&path)) {
            Ok(a) => args = a,
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
        }
    }
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.threads == 0 {
        eprintln!("error: threads must be positive");
        return ExitCode::from(2);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(Status::Passed) => ExitCode::SUCCESS,
        Ok(Status::Failed) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Budget(m)) => {
            eprintln!("budget exhausted: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
