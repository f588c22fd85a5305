//! Acceptance run: one PASS/FAIL line per criterion on stdout (written past the
//! test harness capture, so the lines show up without `--nocapture`).
//!
//! The full run takes several minutes in the test profile; the oscillatory
//! criterion dominates.

use std::io::Write;
use std::path::Path;
use std::process::Command;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde_json::Value;
use sublevel_core::adapt::{analyze_index, is_superadapted, to_superadapted, GrowthIndex};
use sublevel_core::measure_lab::{
    coefficient_cap, decay_ratios, fit_decay, geometric, log_presence, fit_growth_at, monomial_measure_exact,
    oscillatory_integral, sublevel_sweep, vdc_ensemble, Budget, Cutoff, QuadratureParams, Regime, Region,
};
use sublevel_core::newton::newton_polygon_of;
use sublevel_core::rational::{int, rat, to_f64};
use sublevel_core::resolve::{
    certify, coverage, jacobian_deviation, resolve_sector, Chart, ChartEval, Decomposition, ResolveMode,
    ResolveParams, TraceNode,
};
use sublevel_core::stability::{exceptional_candidates, spot_check, stability_sweep, RowStatus};
use sublevel_core::exact_poly::CompiledPoly;
use sublevel_core::{Error, PuiseuxPoly, Rational};

const BIN: &str = env!("CARGO_BIN_EXE_newton-sublevel");

fn verdict(n: u32, name: &str, ok: bool, detail: &str) -> bool {
    let line = format!("criterion {n} ({name}): {} -- {detail}\n", if ok { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    ok
}

fn poly(t: &[(i64, i64, i64, u32)]) -> PuiseuxPoly {
    PuiseuxPoly::from_ints(t)
}

fn cli(out: &Path, args: &[&str], threads: Option<&str>) -> i32 {
    let mut cmd = Command::new(BIN);
    cmd.args(args).arg("--out").arg(out).env_remove("NEWTON_SUBLEVEL_THREADS");
    if let Some(t) = threads {
        cmd.env("NEWTON_SUBLEVEL_THREADS", t);
    }
    cmd.output().expect("binary runs").status.code().unwrap_or(-1)
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

/// (expression, j, p)
const CATALOG: &[(&str, &str, u64)] = &[
    ("x^2+y^2", "1", 0),
    ("x*y", "1", 1),
    ("x^2-y^2", "1", 1),
    ("(y-x^2)^2", "1/2", 0),
    ("x^2*y^2+x^5", "1/2", 1),
    ("y^2-x^3", "5/6", 0),
];

#[test]
fn criterion_1_growth_index_catalog() {
    let tmp = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut notes = Vec::new();
    for (i, (expr, j, p)) in CATALOG.iter().enumerate() {
        let dir = tmp.path().join(format!("{i}"));
        let code = cli(&dir, &["analyze", expr], None);
        let a = json(&dir.join("analyze.json"));
        let exact = code == 0 && a["results"]["index"]["j"] == *j && a["results"]["index"]["p"] == *p;
        let code = cli(
            &dir,
            &["measure", expr, "--eps", "1e-6..1e-2:9", "--samples", "1000000", "--radius", "1", "--seed", "7"],
            None,
        );
        let m = json(&dir.join("measure.json"));
        let fit = &m["results"]["check"]["fit_at_p"];
        let fitted = code == 0 && m["results"]["check"]["j_ok"] == true && m["results"]["check"]["p_ok"] == true;
        ok &= exact && fitted;
        notes.push(format!(
            "{expr}: ({},{}) j_hat={:.3} p={}",
            a["results"]["index"]["j"].as_str().unwrap_or("?"),
            a["results"]["index"]["p"],
            fit["j_hat"].as_f64().unwrap_or(f64::NAN),
            m["results"]["check"]["log_presence"]["p"],
        ));
    }
    assert!(verdict(1, "growth-index catalog", ok, &notes.join("; ")));
}

#[test]
fn criterion_2_monomial_closed_forms() {
    // nine exponent pairs per regime, each over three curve exponents m
    let pairs: [(Regime, &[(i64, i64)]); 3] = [
        (Regime::PowerXDominated, &[(0, 1), (0, 2), (1, 2)]),
        (Regime::Logarithmic, &[(1, 1), (2, 2), (3, 3)]),
        (Regime::CornerDominated, &[(1, 0), (2, 1), (3, 1)]),
    ];
    let ms = [rat(1, 2), int(1), int(2)];
    let eps = 1e-3;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut ok = true;
    for (regime, ab) in pairs {
        for &(a, b) in ab {
            for m in &ms {
                let (al, be) = (int(a), int(b));
                let ex = monomial_measure_exact(1.0, &al, &be, m, 1.0, 1.0, eps).unwrap();
                ok &= ex.regime == regime;
                let p = PuiseuxPoly::monomial(int(1), al.clone(), b as u32);
                let region = Region::a_mn(m, &int(1), 1.0);
                let s = sublevel_sweep(&p, &region, &[eps], "mc", &Budget { n: 200_000, grid_depth: 0 }, 100 + count)
                    .unwrap()
                    .remove(0);
                let z = (s.estimate - ex.value).abs() / s.stderr.max(1e-300);
                worst = worst.max(z);
                ok &= z <= 3.0;
                count += 1;
            }
        }
    }
    // x y on 0 < y < x < 1
    let mut rel: f64 = 0.0;
    for e in [1e-1, 1e-3, 1e-6, 1e-9] {
        let v = monomial_measure_exact(1.0, &int(1), &int(1), &int(1), 1.0, 1.0, e).unwrap().value;
        let want = e / 2.0 + e / 2.0 * e.ln().abs();
        rel = rel.max((v - want).abs() / want);
    }
    ok &= count == 27 && rel <= 4.0 * f64::EPSILON;
    let detail = format!("{count} cases, worst |exact-MC|/stderr = {worst:.2}; closed form rel err {rel:.1e}");
    assert!(verdict(2, "monomial closed forms", ok, &detail));
}

#[test]
fn criterion_3_van_der_corput() {
    let mut ok = true;
    let mut notes = Vec::new();
    for k in 1..=3 {
        let e = vdc_ensemble(k, 200, 2024).unwrap();
        ok &= e.instances == 200 && e.violations == 0;
        notes.push(format!("k={k}: {} violations, worst ratio {:.3}", e.violations, e.worst_ratio));
    }
    assert!(verdict(3, "Van der Corput", ok, &notes.join("; ")));
}

fn orders_decrease(n: &TraceNode) -> bool {
    n.children.iter().all(|c| c.order < n.order && orders_decrease(c))
}

/// `x = s^n` and the shear curve `g(x)` in exact arithmetic, for dyadic `s`.
struct ExactCurve {
    n: u32,
    den: BigInt,
    // integer coefficients by power of s, highest first
    coeffs: Vec<BigInt>,
}

impl ExactCurve {
    fn new(g: &PuiseuxPoly) -> Self {
        let n = g.ramification() as u32;
        let den = g.terms().fold(BigInt::one(), |d, (_, c)| d.lcm(c.denom()));
        let top = g.terms().map(|(e, _)| (&e.a * int(n as i64)).to_integer()).max();
        let top = top.and_then(|t| t.to_usize()).unwrap_or(0);
        let mut coeffs = vec![BigInt::zero(); top + 1];
        for (e, c) in g.terms() {
            let k = (&e.a * int(n as i64)).to_integer().to_usize().unwrap();
            coeffs[top - k] = c.numer() * (&den / c.denom());
        }
        ExactCurve { n, den, coeffs }
    }

    fn eval(&self, s: f64) -> (Rational, Rational) {
        let s = Rational::from_float(s).unwrap();
        let (a, b) = (s.numer(), s.denom());
        let mut acc = BigInt::zero();
        let mut bp = BigInt::one();
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                acc *= a;
                bp *= b;
            }
            acc += c * &bp;
        }
        let g = Rational::new(acc, &self.den * bp);
        (num_traits::pow(s, self.n as usize), g)
    }
}

/// Monte Carlo of `|{|S| < eps}|` over one chart, once in the original
/// coordinates and once in the chart's own; returns both with standard errors.
fn transport(p: &PuiseuxPoly, cp: &CompiledPoly, chart: &Chart, seed: u64) -> Option<((f64, f64), (f64, f64))> {
    use rand::{Rng, SeedableRng};
    let ev = ChartEval::new(chart);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let xm = ev.x_max;
    // chart-side box and a threshold that cuts the chart roughly in half
    let mut inside = Vec::new();
    let (mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 1..=400 {
        let x = xm * i as f64 / 400.0;
        ylo = ylo.min(ev.lower(x));
        yhi = yhi.max(ev.upper(x));
    }
    for _ in 0..4000 {
        let x = rng.random::<f64>() * xm;
        let y = ylo + rng.random::<f64>() * (yhi - ylo);
        if ev.contains_local(x, y) {
            inside.push(ev.phase.eval(x, y).abs());
        }
    }
    if inside.len() < 50 {
        return None;
    }
    inside.sort_by(f64::total_cmp);
    let eps = inside[inside.len() / 2];
    // deep charts sit so close to their curve that the original coordinates
    // (or the cancellation inside S there) are beyond f64
    let floating = (1..=64).all(|i| {
        let x = xm * i as f64 / 64.0;
        let (lo, hi) = (ev.lower(x), ev.upper(x));
        let (u, v) = ev.apply(x, 0.5 * (lo + hi));
        let size: f64 = p
            .terms()
            .map(|(e, c)| to_f64(c).abs() * u.abs().powf(to_f64(&e.a)) * v.abs().powi(e.b as i32))
            .sum();
        ev.g(x).abs() * 1e-16 <= 1e-6 * (hi - lo) && size * 1e-15 <= 1e-3 * eps
    });
    let fiber = |(a, b): (f64, f64)| if ev.swap { a } else { b };
    let band = |x: f64| {
        let (lo, hi) = (ev.lower(x), ev.upper(x));
        let pad = 0.02 * (hi - lo);
        (lo - pad, hi + pad)
    };
    // original side: the chart only shears fibers, so sample each fiber of
    // the image (padded) and weight by its length; membership goes through
    // the inverse map and the level through the original polynomial
    let n_direct = if floating { 200_000 } else { 20_000 };
    let exact = (!floating).then(|| (ExactCurve::new(&chart.g), Rational::from_float(eps).unwrap()));
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..n_direct {
        let x = rng.random::<f64>() * xm;
        let w;
        let hit = match &exact {
            None => {
                let v0 = fiber(ev.apply(x, ev.lower(x)));
                let v1 = fiber(ev.apply(x, ev.upper(x)));
                let (lo, hi) = (v0.min(v1), v0.max(v1));
                let pad = 0.02 * (hi - lo);
                let (lo, hi) = (lo - pad, hi + pad);
                w = xm * (hi - lo);
                let v = lo + rng.random::<f64>() * (hi - lo);
                let (a, b) = ev.apply(x, 0.0);
                let (u, v) = if ev.swap { (v, b) } else { (a, v) };
                ev.contains(u, v) && cp.eval(u, v).abs() < eps
            }
            Some((curve, eps)) => {
                // x = s^n exactly, so the curve and S are evaluated without rounding
                let (xs, g) = curve.eval(x.powf(1.0 / curve.n as f64));
                let x = to_f64(&xs);
                let (lo, hi) = band(x);
                w = xm * (hi - lo);
                let y = lo + rng.random::<f64>() * (hi - lo);
                let u = xs * int(ev.sign_x as i64);
                let v = Rational::from_float(y).unwrap() * int(ev.sign_y as i64) - g;
                let (u, v) = if ev.swap { (v, u) } else { (u, v) };
                ev.contains_local(x, y) && p.eval_exact(&u, &v).unwrap().abs() < *eps
            }
        };
        if hit {
            sum += w;
            sum2 += w * w;
        }
    }
    let nd = n_direct as f64;
    let mean = sum / nd;
    let direct = (mean, ((sum2 / nd - mean * mean).max(0.0) / nd).sqrt());
    let n = 200_000;
    let mut hits = 0;
    for _ in 0..n {
        let x = rng.random::<f64>() * xm;
        let y = ylo + rng.random::<f64>() * (yhi - ylo);
        if ev.contains_local(x, y) && ev.phase.eval(x, y).abs() < eps {
            hits += 1;
        }
    }
    let f = hits as f64 / n as f64;
    let area = xm * (yhi - ylo);
    let chart = (area * f, area * (f * (1.0 - f) / n as f64).sqrt());
    Some((direct, chart))
}

struct SectorOutcome {
    label: String,
    ok: bool,
    skipped: Option<String>,
}

fn check_sector(p: &PuiseuxPoly, idx: u8) -> SectorOutcome {
    let mut params = ResolveParams::default();
    let mut dec: Result<Decomposition, Error> = resolve_sector(p, idx, &params);
    if matches!(dec, Err(Error::IrrationalBranch(_))) {
        params.mode = ResolveMode::Numeric;
        dec = resolve_sector(p, idx, &params);
    }
    let label = format!("{p} sector {idx}");
    let mut dec = match dec {
        Ok(d) => d,
        Err(e) => {
            return SectorOutcome {
                label,
                ok: true,
                skipped: Some(e.to_string()),
            }
        }
    };
    let cert = certify(p, &mut dec, 1000, 3).unwrap();
    let cov = coverage(&dec, 100_000, 9);
    let covered = cov.exactly_one as f64 / cov.samples as f64 >= 0.999;
    let orders = dec.recursion_trace.iter().all(orders_decrease);
    let jac = dec.charts.iter().all(|c| jacobian_deviation(c, 1000, 5) <= 1e-6);
    let mut transported = true;
    let cp = p.compile();
    for (i, c) in dec.charts.iter().enumerate() {
        if let Some(((d, sd), (c, sc))) = transport(p, &cp, c, 1000 + i as u64) {
            transported &= (d - c).abs() <= 3.0 * (sd * sd + sc * sc).sqrt();
        }
    }
    let ok = cert.passed && covered && orders && jac && transported;
    SectorOutcome {
        label: format!(
            "{label}: cert={} cover={:.5} orders={orders} jac={jac} transport={transported}",
            cert.passed,
            cov.exactly_one as f64 / cov.samples as f64
        ),
        ok,
        skipped: None,
    }
}

#[test]
fn criterion_4_resolution_invariants() {
    let mut phases: Vec<PuiseuxPoly> = CATALOG
        .iter()
        .map(|(e, _, _)| sublevel_cli::expr::parse_expression(e).unwrap().poly)
        .collect();
    phases.push(sublevel_cli::expr::parse_expression("(y-x^2-x^3)^2-x^9").unwrap().poly);
    phases.push(poly(&[(1, 0, 1, 2), (-2, 2, 1, 1), (1, 4, 1, 0), (-1, 7, 1, 0)]));
    let outcomes: Vec<SectorOutcome> = phases
        .par_iter()
        .flat_map_iter(|p| (0..8u8).map(move |idx| check_sector(p, idx)))
        .collect();
    let checked = outcomes.iter().filter(|o| o.skipped.is_none()).count();
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.ok).map(|o| o.label.as_str()).collect();
    let skipped: Vec<String> = outcomes
        .iter()
        .filter_map(|o| o.skipped.as_ref().map(|s| format!("{} ({s})", o.label)))
        .collect();
    // the positive sector of every phase must be resolvable
    let first_sectors = outcomes.iter().step_by(8).all(|o| o.skipped.is_none());
    let ok = failed.is_empty() && first_sectors;
    let mut detail = format!("{checked} sectors of {} phases checked", phases.len());
    if !skipped.is_empty() {
        detail += &format!("; not resolvable: {}", skipped.join(", "));
    }
    if !failed.is_empty() {
        detail += &format!("; failed: {}", failed.join(" | "));
    }
    assert!(verdict(4, "resolution invariants", ok, &detail));
}

fn fitted(p: &PuiseuxPoly, seed: u64) -> (f64, u8) {
    let eps = geometric(1e-6, 1e-2, 9);
    let s = sublevel_sweep(p, &Region::Disk { radius: 1.0 }, &eps, "mc", &Budget { n: 300_000, grid_depth: 0 }, seed)
        .unwrap();
    let g = analyze_index(p).unwrap().0;
    let presence = log_presence(&s, to_f64(&g.j)).unwrap();
    (fit_growth_at(&s, presence.p).unwrap().j_hat, presence.p)
}

#[test]
fn criterion_5_superadapted_reduction() {
    let parabola = poly(&[(1, 0, 1, 2), (-2, 2, 1, 1), (1, 4, 1, 0)]);
    let hyperbolic = poly(&[(1, 2, 1, 0), (-1, 0, 1, 2)]);
    let r1 = to_superadapted(&parabola, 8).unwrap();
    let r2 = to_superadapted(&hyperbolic, 8).unwrap();
    let y2 = poly(&[(1, 0, 1, 2)]);
    let a = r1.shears_applied.len() == 1 && r1.result == y2;
    let np = newton_polygon_of(&r2.result).unwrap();
    let one = int(1);
    let b = r2.shears_applied.len() == 1 && np.vertices.iter().any(|v| v.a == one && v.b == one);
    let sa = is_superadapted(&r1.result).unwrap().0 && is_superadapted(&r2.result).unwrap().0;
    let mut fits = Vec::new();
    let mut agree = true;
    for (before, after) in [(&parabola, &r1.result), (&hyperbolic, &r2.result)] {
        let (j0, p0) = fitted(before, 21);
        let (j1, p1) = fitted(after, 22);
        agree &= (j0 - j1).abs() <= 0.05 && p0 == p1;
        fits.push(format!("({j0:.3},{p0}) -> ({j1:.3},{p1})"));
    }
    let detail = format!(
        "(y-x^2)^2 -> {} in {} shear(s); x^2-y^2 -> {} in {} shear(s); superadapted={sa}; fits {}",
        r1.result,
        r1.shears_applied.len(),
        r2.result,
        r2.shears_applied.len(),
        fits.join(", ")
    );
    assert!(verdict(5, "superadapted reduction", a && b && sa && agree, &detail));
}

#[test]
fn criterion_6_stability_sweeps() {
    let grid: Vec<Rational> = [(-2, 1), (-1, 1), (-1, 2), (1, 2), (1, 1), (2, 1)].iter().map(|&(n, d)| rat(n, d)).collect();
    let morse = poly(&[(1, 2, 1, 0), (1, 0, 1, 2)]);
    let hyper = poly(&[(1, 2, 1, 0), (-1, 0, 1, 2)]);
    let vertex = poly(&[(1, 2, 1, 2), (1, 5, 1, 0)]);
    let parabola = poly(&[(1, 0, 1, 2), (-2, 2, 1, 1), (1, 4, 1, 0)]);
    let sweeps = [
        ("x^2+y^2 + t(x^2-y^2)", stability_sweep(&morse, &hyper, &grid).unwrap()),
        ("x^2y^2+x^5 + t y^7", stability_sweep(&vertex, &poly(&[(1, 0, 1, 7)]), &grid).unwrap()),
        ("(y-x^2)^2 + t x^7", stability_sweep(&parabola, &poly(&[(1, 7, 1, 0)]), &grid).unwrap()),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, rep) in &sweeps {
        let bound = rep
            .rows
            .iter()
            .filter(|r| r.flags.is_empty() && r.index.is_some())
            .all(|r| r.status == RowStatus::Pass);
        ok &= rep.passed && bound;
        notes.push(format!("{name}: {}", if rep.passed { "bound holds" } else { "bound violated" }));
    }
    // the Morse/Morse pair: 2x^2 at t = 1 decays like eps^(1/2)
    let t1 = sweeps[0].1.rows.iter().find(|r| r.t == int(1)).unwrap();
    let degraded = t1.index == Some(GrowthIndex::new(rat(1, 2), 0));
    ok &= degraded;
    notes.push(format!("t=1 index {:?}", t1.index.as_ref().map(|g| (g.j.to_string(), g.p))));
    // every x^2y^2+x^5 row keeps (1/2, 1), with an MC spot check at t = 1
    let keeps = sweeps[1].1.rows.iter().all(|r| r.index == Some(GrowthIndex::new(rat(1, 2), 1)));
    let perturbed = vertex.add(&poly(&[(1, 0, 1, 7)]));
    let spot = spot_check(&perturbed, &GrowthIndex::new(rat(1, 2), 1), 1.0, 300_000, 5).unwrap();
    ok &= keeps && spot.agrees;
    notes.push(format!(
        "t y^7 rows keep (1/2,1): {keeps}, MC at t=1 j_hat={:.3} p={}",
        spot.fit.j_hat, spot.presence.p
    ));
    let ex = exceptional_candidates(&vertex, &vertex.neg()).unwrap();
    let ex_ok = ex.vertex_ts == vec![int(1)];
    ok &= ex_ok;
    notes.push(format!("vertex_ts(S,-S) = {:?}", ex.vertex_ts.iter().map(|t| t.to_string()).collect::<Vec<_>>()));
    assert!(verdict(6, "stability sweeps", ok, &notes.join("; ")));
}

#[test]
fn criterion_7_oscillatory_decay() {
    let q = QuadratureParams::default();
    let cutoff = Cutoff { radius: 1.0, order: 3 };
    let integrate = |p: &PuiseuxPoly, ls: &[f64]| -> Vec<(f64, f64)> {
        ls.par_iter()
            .map(|&l| (l, oscillatory_integral(p, &cutoff, l, &q).unwrap().norm()))
            .collect()
    };
    let morse = poly(&[(1, 2, 1, 0), (1, 0, 1, 2)]);
    let vertex = poly(&[(1, 2, 1, 2), (1, 5, 1, 0)]);
    let mut ok = true;

    let near = integrate(&morse, &[200.0, 400.0, 800.0]);
    let target = std::f64::consts::PI * cutoff.eval(0.0, 0.0);
    let worst = near.iter().map(|(l, a)| (l * a / target - 1.0).abs()).fold(0.0, f64::max);
    ok &= worst <= 0.05;
    let fit = fit_decay(&integrate(&morse, &geometric(10.0, 1000.0, 5))).unwrap();
    ok &= (fit.j_hat - 1.0).abs() <= 0.05;

    let ls = geometric(1e2, 1e4, 5);
    let pairs = integrate(&vertex, &ls);
    let ratios = decay_ratios(&pairs, 0.5, 1);
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0f64), |(a, b), r| (a.min(*r), b.max(*r)));
    ok &= hi / lo <= 2.0;
    let eps = geometric(1e-6, 1e-2, 9);
    let m = sublevel_sweep(&vertex, &Region::Disk { radius: 1.0 }, &eps, "mc", &Budget { n: 300_000, grid_depth: 0 }, 8)
        .unwrap();
    let cap = coefficient_cap(&m, 0.5, 1, cutoff.sup());
    ok &= hi <= cap;
    let detail = format!(
        "x^2+y^2: max |lambda|J|/pi - 1| = {worst:.4}, fitted j = {:.3}; x^2y^2+x^5: ratio band {:.3}, max ratio {hi:.3} vs cap {cap:.3}",
        fit.j_hat,
        hi / lo
    );
    assert!(verdict(7, "oscillatory decay", ok, &detail));
}

#[test]
fn criterion_8_determinism() {
    let runs: &[&[&str]] = &[
        &["analyze", "x^2*y^2+x^5"],
        &["adapt", "(y-x^2)^2"],
        &["resolve", "(y-x^2-x^3)^2-x^9"],
        &["resolve", "y^2-x^3", "--mode", "numeric"],
        &["measure", "y^2-x^3", "--samples", "200000", "--seed", "5"],
        &["measure", "x*y", "--method", "grid", "--eps", "1e-3..1e-7:5"],
        &["oscillate", "x*y", "--lambda", "10..1000:3", "--samples", "50000"],
        &["sweep", "x^2*y^2+x^5", "y^7"],
        &["sweep", "x^2*y^2+x^5", "x^5+y^4", "--combine", "--t-grid", "0,1,inf"],
        &["check-vdc", "--samples", "100"],
    ];
    let tmp = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for (j, threads) in [Some("1"), Some("1"), Some("4"), None].iter().enumerate() {
            let dir = tmp.path().join(format!("{i}-{j}"));
            cli(&dir, args, *threads);
            let mut files: Vec<_> = std::fs::read_dir(&dir)
                .unwrap()
                .map(|e| {
                    let e = e.unwrap();
                    (e.file_name(), std::fs::read(e.path()).unwrap())
                })
                .collect();
            files.sort();
            outputs.push(files);
        }
        if outputs.iter().any(|o| o != &outputs[0] || o.is_empty()) {
            differing.push(args[0]);
        }
    }
    let detail = format!(
        "{} commands x (1, 1, 4, default) threads; differing: {:?}",
        runs.len(),
        differing
    );
    assert!(verdict(8, "determinism", differing.is_empty(), &detail));
}
