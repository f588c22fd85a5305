//! `newton-sublevel`: parse a phase, then analyze, adapt, resolve, measure,
//! oscillate, sweep or check Van der Corput bounds. Every command writes a JSON
//! report (and CSV tables where there is data) into `--out`.
//!
//! Exit codes: 0 success, 2 a check failed or the computation stopped, 1 bad
//! usage or an unparsable expression.

pub mod config;
pub mod expr;
pub mod report;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};
use sublevel_core::adapt::{analyze_index, default_max_iter, is_superadapted, to_superadapted, GrowthIndex};
use sublevel_core::measure_lab::{
    coefficient_cap, decay_ratios, fit_decay, fit_growth, fit_growth_at, geometric, log_presence, oscillatory_integral,
    sublevel_sweep, vdc_ensemble, write_measure_csv, write_oscillation_csv, Budget, Cutoff, QuadratureParams, Region,
};
use sublevel_core::newton::{bisectrix_classify, newton_distance, newton_polygon_of};
use sublevel_core::rational::{self, Rational};
use sublevel_core::resolve::{coverage, resolve_certified, ResolveMode, ResolveParams};
use sublevel_core::stability::{stability_sweep, theorem_1_3_sweep, write_sweep_csv, ComboRow, Ratio};
use sublevel_core::{Error, PuiseuxPoly};

use crate::config::Config;
use crate::expr::parse_expression;
use crate::report::{ReportEnvelope, Status};

pub const THREADS_ENV: &str = "NEWTON_SUBLEVEL_THREADS";

#[derive(Parser, Debug)]
#[command(name = "newton-sublevel", version, about = "Newton-polygon growth indices, resolutions and sublevel-set experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo samples, verification samples per chart, or instances per k.
    #[arg(long, global = true)]
    pub samples: Option<u64>,
    /// `key = value` file with defaults; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Newton polygon, distance, bisectrix class and growth index.
    Analyze { expr: String },
    /// Trace of the reduction to superadapted coordinates.
    Adapt { expr: String },
    /// Certified decomposition into monomial charts.
    Resolve {
        expr: String,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        xi: Option<String>,
        #[arg(long)]
        delta: Option<String>,
        #[arg(long)]
        eta: Option<String>,
    },
    /// Sublevel-measure sweep over eps with a growth fit.
    Measure {
        expr: String,
        /// `LO..HI[:COUNT]`, geometric.
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        radius: Option<String>,
        /// Estimator: mc, grid or exact.
        #[arg(long)]
        method: Option<String>,
    },
    /// Oscillatory integrals over a lambda sweep with a decay fit.
    Oscillate {
        expr: String,
        /// `LO..HI[:COUNT]`, geometric.
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long)]
        radius: Option<String>,
        /// Quadrature: polar or cartesian.
        #[arg(long)]
        quadrature: Option<String>,
    },
    /// Growth indices of `S + t f` over a t grid (or of `S + r F` with --combine).
    Sweep {
        s: String,
        f: String,
        /// Comma-separated rationals; `inf` is allowed with --combine.
        #[arg(long = "t-grid", allow_hyphen_values = true)]
        t_grid: Option<String>,
        /// Treat the grid as ratios `r` in `S + r F`, with `inf` meaning `F` alone.
        #[arg(long)]
        combine: bool,
    },
    /// Random Van der Corput ensembles.
    CheckVdc {
        /// Comma-separated derivative orders (default 1,2,3).
        #[arg(long)]
        k: Option<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Analyze { .. } => "analyze",
            Command::Adapt { .. } => "adapt",
            Command::Resolve { .. } => "resolve",
            Command::Measure { .. } => "measure",
            Command::Oscillate { .. } => "oscillate",
            Command::Sweep { .. } => "sweep",
            Command::CheckVdc { .. } => "check-vdc",
        }
    }
}

/// Bad command line or input; exit code 1.
#[derive(Debug)]
pub struct Usage(pub String);

impl<E: std::fmt::Display> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.to_string())
    }
}

/// Flag, then config file, then default.
struct Settings {
    cfg: Config,
    echo: BTreeMap<String, Value>,
}

impl Settings {
    fn raw(&mut self, key: &str, flag: Option<String>) -> Option<String> {
        let v = flag.or_else(|| self.cfg.get(key).map(str::to_string));
        if let Some(v) = &v {
            self.echo.insert(key.to_string(), Value::String(v.clone()));
        }
        v
    }

    fn string(&mut self, key: &str, flag: Option<String>, default: &str) -> String {
        let v = self.raw(key, flag).unwrap_or_else(|| default.to_string());
        self.echo.insert(key.to_string(), Value::String(v.clone()));
        v
    }

    fn u64(&mut self, key: &str, flag: Option<u64>, default: u64) -> Result<u64, Usage> {
        let v = match flag {
            Some(v) => v,
            None => match self.cfg.get(key) {
                Some(s) => s.parse().map_err(|_| Usage(format!("{key}: expected an integer, got {s:?}")))?,
                None => default,
            },
        };
        self.echo.insert(key.to_string(), json!(v));
        Ok(v)
    }

    fn rational(&mut self, key: &str, flag: Option<String>) -> Result<Option<Rational>, Usage> {
        match self.raw(key, flag) {
            None => Ok(None),
            Some(s) => {
                let r = rational::parse(s.trim()).map_err(|e| Usage(format!("{key}: {e}")))?;
                self.echo.insert(key.to_string(), Value::String(rational::fmt(&r)));
                Ok(Some(r))
            }
        }
    }
}

fn parse_f64(key: &str, s: &str) -> Result<f64, Usage> {
    let v: f64 = s.trim().parse().map_err(|_| Usage(format!("{key}: not a number: {s:?}")))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(Usage(format!("{key}: must be positive, got {s:?}")));
    }
    Ok(v)
}

/// `LO..HI[:COUNT]` into a geometric schedule, from `HI` down to `LO`.
pub fn parse_range(key: &str, s: &str, default_count: usize) -> Result<Vec<f64>, Usage> {
    let (range, count) = match s.rsplit_once(':') {
        Some((r, c)) => (r, c.trim().parse::<usize>().map_err(|_| Usage(format!("{key}: bad count {c:?}")))?),
        None => (s, default_count),
    };
    let Some((a, b)) = range.split_once("..") else {
        return Err(Usage(format!("{key}: expected LO..HI[:COUNT], got {s:?}")));
    };
    let (a, b) = (parse_f64(key, a)?, parse_f64(key, b)?);
    if count < 1 {
        return Err(Usage(format!("{key}: count must be at least 1")));
    }
    Ok(geometric(a.min(b), a.max(b), count))
}

fn parse_grid(s: &str, allow_inf: bool) -> Result<Vec<Ratio>, Usage> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            if t == "inf" {
                return if allow_inf {
                    Ok(Ratio::inf())
                } else {
                    Err(Usage("t-grid: inf needs --combine".into()))
                };
            }
            rational::parse(t).map(Ratio::Finite).map_err(|e| Usage(format!("t-grid: {e}")))
        })
        .collect()
}

fn phase(src: &str) -> Result<PuiseuxPoly, Usage> {
    parse_expression(src).map(|e| e.poly).map_err(|e| Usage(format!("parse error at {e}")))
}

/// Files a command produced, plus the envelope fields it fills in.
struct Outcome {
    status: Status,
    error: Option<String>,
    results: Value,
    files: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    fn ok(results: Value) -> Self {
        Outcome {
            status: Status::Ok,
            error: None,
            results,
            files: Vec::new(),
        }
    }

    fn failed(e: impl std::fmt::Display, results: Value) -> Self {
        Outcome {
            status: Status::Failed,
            error: Some(e.to_string()),
            results,
            files: Vec::new(),
        }
    }

    fn check(mut self, ok: bool, why: &str) -> Self {
        if !ok && self.status == Status::Ok {
            self.status = Status::VerificationFailed;
            self.error = Some(why.to_string());
        }
        self
    }

    fn file(mut self, name: &str, bytes: Vec<u8>) -> Self {
        self.files.push((name.to_string(), bytes));
        self
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn index_value(g: &GrowthIndex) -> Value {
    to_value(g)
}

fn analyze(p: &PuiseuxPoly) -> Result<Outcome, Usage> {
    let np = newton_polygon_of(p).map_err(Usage::from)?;
    let d = newton_distance(&np);
    let (superadapted, witness) = match is_superadapted(p) {
        Ok(v) => v,
        Err(e) => return Ok(Outcome::failed(e, Value::Null)),
    };
    let mut results = json!({
        "phase": to_value(p),
        "polygon": to_value(&np),
        "d": rational::fmt(&d),
        "bisectrix": to_value(&bisectrix_classify(&np)),
        "superadapted": superadapted,
        "witness": to_value(&witness),
    });
    match analyze_index(p) {
        Ok((g, rep)) => {
            let ad = newton_distance(&newton_polygon_of(&rep.result).map_err(Usage::from)?);
            results["adapted"] = json!({
                "phase": to_value(&rep.result),
                "shears": to_value(&rep.shears_applied),
                "d": rational::fmt(&ad),
            });
            results["index"] = index_value(&g);
            Ok(Outcome::ok(results))
        }
        Err(e) => Ok(Outcome::failed(e, results)),
    }
}

fn adapt(p: &PuiseuxPoly) -> Result<Outcome, Usage> {
    let budget = default_max_iter(p).map_err(Usage::from)?;
    Ok(match to_superadapted(p, budget) {
        Ok(rep) => Outcome::ok(to_value(&rep)),
        Err(Error::MaxIterations { partial, .. }) => {
            Outcome::failed(format!("no superadapted form after {budget} shears"), to_value(&*partial))
        }
        Err(e) => Outcome::failed(e, Value::Null),
    })
}

fn resolve(p: &PuiseuxPoly, params: &ResolveParams, samples: u64, seed: u64) -> Outcome {
    match resolve_certified(p, params, samples as usize, seed) {
        Ok((dec, cert)) => {
            let cov = coverage(&dec, 10_000, seed);
            let tiled = cov.failure_fraction() < 1e-3;
            Outcome::ok(json!({
                "decomposition": to_value(&dec),
                "certificate": to_value(&cert),
                "coverage": to_value(&cov),
            }))
            .check(cert.passed, "chart verification failed at every radius tried")
            .check(tiled, "charts do not tile the sector")
        }
        Err(e) => Outcome::failed(e, Value::Null),
    }
}

fn measure(p: &PuiseuxPoly, eps: &[f64], radius: f64, method: &str, n: u64, seed: u64) -> Result<Outcome, Usage> {
    let region = Region::Disk { radius };
    let samples = match sublevel_sweep(p, &region, eps, method, &Budget { n, grid_depth: 6 }, seed) {
        Ok(s) => s,
        Err(e @ Error::UnknownStrategy { .. }) => return Err(Usage::from(e)),
        Err(e) => return Ok(Outcome::failed(e, Value::Null)),
    };
    let mut csv = Vec::new();
    write_measure_csv(&mut csv, &samples).map_err(Usage::from)?;
    let fit = fit_growth(&samples);
    let predicted = analyze_index(p).ok().map(|(g, _)| g);
    let mut results = json!({
        "samples": to_value(&samples),
        "fit": fit.as_ref().ok().map(to_value),
        "prediction": predicted.as_ref().map(index_value),
    });
    let out = match (&fit, &predicted) {
        (Err(e), _) => Outcome::failed(e, results),
        (Ok(_), None) => Outcome::ok(results),
        (Ok(_), Some(g)) => {
            let j = rational::to_f64(&g.j);
            let presence = log_presence(&samples, j).map_err(Usage::from)?;
            let at = fit_growth_at(&samples, presence.p).map_err(Usage::from)?;
            let j_ok = (at.j_hat - j).abs() <= 0.05;
            let p_ok = presence.p == g.p;
            results["check"] = json!({
                "j_ok": j_ok,
                "p_ok": p_ok,
                "log_presence": to_value(&presence),
                "fit_at_p": to_value(&at),
            });
            Outcome::ok(results).check(j_ok && p_ok, "fitted index disagrees with the symbolic index")
        }
    };
    Ok(out.file("measure.csv", csv))
}

fn oscillate(p: &PuiseuxPoly, lambdas: &[f64], radius: f64, quadrature: &str, n: u64, seed: u64) -> Result<Outcome, Usage> {
    let cutoff = Cutoff { radius, order: 3 };
    let q = QuadratureParams {
        method: quadrature.to_string(),
        ..QuadratureParams::default()
    };
    let mut rows = Vec::new();
    let mut failure = None;
    // each lambda is independent; results are consumed in schedule order
    let values: Vec<_> = lambdas
        .par_iter()
        .map(|&l| (l, oscillatory_integral(p, &cutoff, l, &q)))
        .collect();
    for (l, v) in values {
        match v {
            Ok(j) => rows.push((l, j)),
            Err(e @ Error::UnknownStrategy { .. }) => return Err(Usage::from(e)),
            Err(e) => {
                failure = Some(format!("lambda = {l:e}: {e}"));
                break;
            }
        }
    }
    let mut csv = Vec::new();
    write_oscillation_csv(&mut csv, &rows).map_err(Usage::from)?;
    if let Some(e) = failure {
        return Ok(Outcome::failed(e, json!({ "completed": rows.len() })).file("oscillate.csv", csv));
    }
    let pairs: Vec<(f64, f64)> = rows.iter().map(|(l, j)| (*l, j.norm())).collect();
    let fit = fit_decay(&pairs);
    let mut results = json!({
        "fit": fit.as_ref().ok().map(to_value),
        "fit_error": fit.as_ref().err().map(|e| e.to_string()),
    });
    let out = match analyze_index(p) {
        Err(_) => Outcome::ok(results),
        Ok((g, _)) => {
            let j = rational::to_f64(&g.j);
            let ratios = decay_ratios(&pairs, j, g.p);
            let eps = geometric(1e-6, 1e-2, 8);
            let m = sublevel_sweep(p, &Region::Disk { radius }, &eps, "mc", &Budget { n, grid_depth: 0 }, seed);
            let m = match m {
                Ok(m) => m,
                Err(e) => return Ok(Outcome::failed(e, results).file("oscillate.csv", csv)),
            };
            let cap = coefficient_cap(&m, j, g.p, cutoff.sup());
            let worst = ratios.iter().cloned().fold(0.0, f64::max);
            let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            let osc_p = if g.morse_hyperbolic_flag { 0 } else { g.p };
            results["prediction"] = json!({ "j": rational::fmt(&g.j), "p": g.p, "oscillatory_p": osc_p });
            results["ratios"] = to_value(&ratios);
            results["ratio_band"] = json!(worst / lo);
            results["cap"] = json!(cap);
            results["cap_ok"] = json!(worst <= cap);
            Outcome::ok(results).check(worst <= cap, "|J| exceeds the coefficient cap")
        }
    };
    Ok(out.file("oscillate.csv", csv))
}

fn combo_csv(rows: &[ComboRow]) -> Result<Vec<u8>, Usage> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "j", "p", "flags"])?;
    for r in rows {
        let t = match &r.ratio {
            Ratio::Finite(t) => rational::fmt(t),
            Ratio::Infinite(_) => "inf".into(),
        };
        let (j, p) = match &r.index {
            Some(g) => (rational::fmt(&g.j), g.p.to_string()),
            None => (String::new(), String::new()),
        };
        let flags = if r.candidate { "candidate" } else { "" };
        w.write_record([t, j, p, flags.to_string()])?;
    }
    w.into_inner().map_err(|e| Usage(e.to_string()))
}

fn sweep(s: &PuiseuxPoly, f: &PuiseuxPoly, grid: &[Ratio], combine: bool) -> Result<Outcome, Usage> {
    if combine {
        return Ok(match theorem_1_3_sweep(s, f, grid) {
            Ok(rep) => Outcome::ok(to_value(&rep))
                .check(rep.passed, "a non-candidate ratio is worse than both phases")
                .file("sweep.csv", combo_csv(&rep.rows)?),
            Err(e) => Outcome::failed(e, Value::Null),
        });
    }
    let ts: Vec<Rational> = grid
        .iter()
        .map(|r| match r {
            Ratio::Finite(t) => t.clone(),
            Ratio::Infinite(_) => unreachable!("rejected by the grid parser"),
        })
        .collect();
    Ok(match stability_sweep(s, f, &ts) {
        Ok(rep) => {
            let mut csv = Vec::new();
            write_sweep_csv(&mut csv, &rep.rows).map_err(Usage::from)?;
            Outcome::ok(to_value(&rep))
                .check(rep.passed, "a non-flagged row is worse than the unperturbed phase")
                .file("sweep.csv", csv)
        }
        Err(e) => Outcome::failed(e, Value::Null),
    })
}

fn check_vdc(ks: &[u32], count: u64, seed: u64) -> Outcome {
    let mut ensembles = Vec::new();
    for &k in ks {
        match vdc_ensemble(k, count as usize, seed) {
            Ok(e) => ensembles.push(e),
            Err(e) => return Outcome::failed(e, to_value(&ensembles)),
        }
    }
    let violations: usize = ensembles.iter().map(|e| e.violations).sum();
    Outcome::ok(json!({ "violations": violations, "ensembles": to_value(&ensembles) }))
        .check(violations == 0, "measured sublevel length above the bound")
}

fn configure_threads() -> Result<(), Usage> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn write_outputs(dir: &Path, name: &str, env: &ReportEnvelope, files: &[(String, Vec<u8>)]) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    for (f, bytes) in files {
        std::fs::write(dir.join(f), bytes)?;
    }
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, env.to_json())?;
    Ok(path)
}

fn execute(cli: Cli) -> Result<i32, Usage> {
    configure_threads()?;
    let cfg = match &cli.config {
        Some(p) => Config::load(p).map_err(Usage)?,
        None => Config::default(),
    };
    let mut st = Settings {
        cfg,
        echo: BTreeMap::new(),
    };
    let out = PathBuf::from(st.string("out", cli.out.map(|p| p.display().to_string()), "out"));
    st.echo.remove("out");
    let seed = st.u64("seed", cli.seed, 1)?;
    let name = cli.command.name();
    let mut input = BTreeMap::new();
    let mut echo_phase = |key: &str, src: &str| -> Result<PuiseuxPoly, Usage> {
        let p = phase(src)?;
        input.insert(key.to_string(), src.to_string());
        input.insert(format!("{key}_expanded"), p.to_string());
        Ok(p)
    };
    let outcome = match cli.command {
        Command::Analyze { expr } => analyze(&echo_phase("expr", &expr)?)?,
        Command::Adapt { expr } => adapt(&echo_phase("expr", &expr)?)?,
        Command::Resolve { expr, mode, xi, delta, eta } => {
            let p = echo_phase("expr", &expr)?;
            let mut params = ResolveParams::default();
            params.mode = match st.string("mode", mode, "exact").as_str() {
                "exact" => ResolveMode::Exact,
                "numeric" => ResolveMode::Numeric,
                other => return Err(Usage(format!("mode: expected exact or numeric, got {other:?}"))),
            };
            if let Some(v) = st.rational("xi", xi)? {
                params.xi = v;
            }
            if let Some(v) = st.rational("delta", delta)? {
                params.delta = v;
            }
            params.eta = st.rational("eta", eta)?;
            for (k, v) in [("xi", &params.xi), ("delta", &params.delta)] {
                if !(v > &Rational::from_integer(0.into())) {
                    return Err(Usage(format!("{k} must be positive")));
                }
            }
            let samples = st.u64("samples", cli.samples, 200)?;
            resolve(&p, &params, samples, seed)
        }
        Command::Measure { expr, eps, radius, method } => {
            let p = echo_phase("expr", &expr)?;
            let method = st.string("method", method, "mc");
            let default_eps = if method == "mc" { "1e-6..1e-2:8" } else { "1e-9..1e-3:8" };
            let eps = parse_range("eps", &st.string("eps", eps, default_eps), 8)?;
            let radius = parse_f64("radius", &st.string("radius", radius, "1"))?;
            let n = st.u64("samples", cli.samples, 100_000)?;
            measure(&p, &eps, radius, &method, n, seed)?
        }
        Command::Oscillate { expr, lambda, radius, quadrature } => {
            let p = echo_phase("expr", &expr)?;
            let mut lambdas = parse_range("lambda", &st.string("lambda", lambda, "10..1000:5"), 5)?;
            lambdas.reverse();
            let radius = parse_f64("radius", &st.string("radius", radius, "1"))?;
            let quadrature = st.string("quadrature", quadrature, "polar");
            let n = st.u64("samples", cli.samples, 100_000)?;
            oscillate(&p, &lambdas, radius, &quadrature, n, seed)?
        }
        Command::Sweep { s, f, t_grid, combine } => {
            let sp = echo_phase("s", &s)?;
            let fp = echo_phase("f", &f)?;
            let default = if combine { "0,1/2,1,2,inf" } else { "-2,-1,-1/2,1/2,1,2" };
            let grid = parse_grid(&st.string("t-grid", t_grid, default), combine)?;
            st.echo.insert("combine".into(), json!(combine));
            sweep(&sp, &fp, &grid, combine)?
        }
        Command::CheckVdc { k } => {
            let ks: Vec<u32> = st
                .string("k", k, "1,2,3")
                .split(',')
                .map(|s| s.trim().parse::<u32>().ok().filter(|k| *k > 0))
                .collect::<Option<_>>()
                .ok_or_else(|| Usage("k: expected comma-separated positive integers".into()))?;
            let count = st.u64("samples", cli.samples, 200)?;
            check_vdc(&ks, count, seed)
        }
    };
    let mut env = ReportEnvelope::new(name, input, st.echo);
    env.status = outcome.status;
    env.error = outcome.error;
    env.results = outcome.results;
    let path = write_outputs(&out, name, &env, &outcome.files).map_err(|e| Usage(format!("{}: {e}", out.display())))?;
    let status = serde_json::to_value(env.status).unwrap();
    println!("{name}: {} -> {}", status.as_str().unwrap_or(""), path.display());
    if let Some(e) = &env.error {
        eprintln!("{name}: {e}");
    }
    Ok(env.status.exit_code())
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 1,
            };
            let _ = e.print();
            return if code == 0 && e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 1 } else { code };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}
