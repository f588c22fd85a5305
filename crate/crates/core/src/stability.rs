//! Perturbation sweeps: where `S + t f` can lose a Newton-polygon vertex or
//! pick up a degenerate edge root, and how the growth index moves with `t`.

use std::io::Write;

use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapt::{analyze_index, lex_compare, to_superadapted, default_max_iter, GrowthIndex};
use crate::error::{Error, Result};
use crate::exact_poly::PuiseuxPoly;
use crate::measure_lab::{fit_growth_at, geometric, log_presence, sublevel_sweep, Budget, FitResult, LogPresence, Region};
use crate::newton::{edge_polynomial, newton_distance, newton_polygon_of, polygon_subset, CompactEdge};
use crate::rational::{self, int, Rational};
use crate::roots::{isolate_real_roots, refine_root, squarefree_factor, IsolatedRoot, RootDomain, UPoly};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeT {
    Exact(#[serde(with = "rational::as_string")] Rational),
    /// Irrational candidate; not verified.
    Isolated(IsolatedRoot),
}

impl EdgeT {
    fn matches(&self, t: &Rational) -> bool {
        match self {
            EdgeT::Exact(r) => r == t,
            EdgeT::Isolated(r) => &r.lo < t && t < &r.hi,
        }
    }

    fn key(&self) -> f64 {
        match self {
            EdgeT::Exact(r) => rational::to_f64(r),
            EdgeT::Isolated(r) => r.approx(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExceptionalSet {
    #[serde(with = "rational::vec_as_string")]
    pub vertex_ts: Vec<Rational>,
    pub edge_ts: Vec<EdgeT>,
    /// Edges that were skipped, with the reason.
    pub notes: Vec<String>,
}

impl ExceptionalSet {
    pub fn vertex_cancel(&self, t: &Rational) -> bool {
        self.vertex_ts.contains(t)
    }

    pub fn edge_degenerate(&self, t: &Rational) -> bool {
        self.edge_ts.iter().any(|e| e.matches(t))
    }
}

// ---------------------------------------------------------------------------
// resultants over Q[t]

/// Determinant by fraction-free (Bareiss) elimination; every division is exact.
fn bareiss_det(mut m: Vec<Vec<UPoly>>) -> UPoly {
    let n = m.len();
    if n == 0 {
        return UPoly::constant(Rational::one());
    }
    let mut sign = 1;
    let mut prev = UPoly::constant(Rational::one());
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            let Some(swap) = (k + 1..n).find(|&i| !m[i][k].is_zero()) else {
                return UPoly::zero();
            };
            m.swap(k, swap);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = m[i][j].mul(&m[k][k]).sub(&m[i][k].mul(&m[k][j]));
                let (q, r) = num.div_rem(&prev);
                debug_assert!(r.is_zero());
                m[i][j] = q;
            }
            m[i][k] = UPoly::zero();
        }
        prev = m[k][k].clone();
    }
    let d = m[n - 1][n - 1].clone();
    if sign < 0 {
        d.scale(&int(-1))
    } else {
        d
    }
}

/// `Res_y(P, Q)` for `P, Q` given as coefficient lists in `y` (ascending) over `Q[t]`.
fn resultant_y(p: &[UPoly], q: &[UPoly]) -> UPoly {
    let n = p.len() - 1;
    let m = q.len() - 1;
    let size = n + m;
    if size == 0 {
        return UPoly::constant(Rational::one());
    }
    let mut rows = vec![vec![UPoly::zero(); size]; size];
    for i in 0..m {
        for (k, c) in p.iter().rev().enumerate() {
            rows[i][i + k] = c.clone();
        }
    }
    for i in 0..n {
        for (k, c) in q.iter().rev().enumerate() {
            rows[m + i][i + k] = c.clone();
        }
    }
    bareiss_det(rows)
}

/// `∂_y^k` of a polynomial in `y` with `Q[t]` coefficients.
fn deriv_y(p: &[UPoly], k: usize) -> Vec<UPoly> {
    (k..p.len())
        .map(|i| p[i].scale(&rational::falling(&int(i as i64), k as u32)))
        .collect()
}

/// Whether `q` has a real nonzero root of multiplicity at least `k`.
fn has_high_root(q: &UPoly, k: u32) -> Result<bool> {
    if q.is_zero() {
        return Ok(true);
    }
    for (factor, mult) in squarefree_factor(q)? {
        if mult < k {
            continue;
        }
        for r in isolate_real_roots(&factor, RootDomain::All)? {
            if r.exact.as_ref().is_none_or(|v| !v.is_zero()) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Candidates `t` at which `S_e(±1, y) + t f_e(±1, y)` has a nonzero real root
/// of order `>= k`: the real roots of `Res_y(P_t, ∂_y^{k-1} P_t)`, with
/// rational roots kept only after an exact check.
fn edge_candidates(s: &PuiseuxPoly, f: &PuiseuxPoly, e: &CompactEdge, x_sign: i32, k: u32) -> Result<(Vec<EdgeT>, Option<String>)> {
    let se = edge_polynomial(s, e, x_sign)?;
    let fe = edge_polynomial(f, e, x_sign)?;
    let n = se.coeffs().len().max(fe.coeffs().len());
    if n == 0 {
        return Ok((Vec::new(), None));
    }
    let coef = |u: &UPoly, i: usize| u.coeffs().get(i).cloned().unwrap_or_else(Rational::zero);
    // P_t(y) = sum_i (s_i + t f_i) y^i, coefficients as polynomials in t
    let pt: Vec<UPoly> = (0..n).map(|i| UPoly::new(vec![coef(&se, i), coef(&fe, i)])).collect();
    if (k as usize) >= pt.len() {
        return Ok((Vec::new(), None));
    }
    let res = resultant_y(&pt, &deriv_y(&pt, k as usize - 1));
    if res.is_zero() {
        return Ok((
            Vec::new(),
            Some(format!("edge m = {}: resultant vanishes identically", rational::fmt(&e.m))),
        ));
    }
    let tiny = Rational::new(1.into(), num_bigint::BigInt::one() << 60usize);
    let mut out = Vec::new();
    for r in isolate_real_roots(&res, RootDomain::All)? {
        match &r.exact {
            Some(t) => {
                let q = se.add(&fe.scale(t));
                if has_high_root(&q, k)? {
                    out.push(EdgeT::Exact(t.clone()));
                }
            }
            None => out.push(EdgeT::Isolated(refine_root(&r, &res, &tiny))),
        }
    }
    Ok((out, None))
}

pub fn exceptional_candidates(s: &PuiseuxPoly, f: &PuiseuxPoly) -> Result<ExceptionalSet> {
    if s.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let np = newton_polygon_of(s)?;
    let mut vertex_ts: Vec<Rational> = np
        .vertices
        .iter()
        .filter_map(|v| {
            let b = v.b.to_integer().to_u32()?;
            let fv = f.coeff(&v.a, b);
            (!fv.is_zero()).then(|| -s.coeff(&v.a, b) / fv)
        })
        .collect();
    vertex_ts.sort();
    vertex_ts.dedup();

    let d = newton_distance(&np);
    let k = d.ceil().to_integer().to_u32().unwrap_or(u32::MAX);
    let mut edge_ts: Vec<EdgeT> = Vec::new();
    let mut notes = Vec::new();
    if k <= 1 {
        notes.push(format!("d = {} <= 1: every real edge root counts, no finite edge set", rational::fmt(&d)));
    } else {
        let signs: &[i32] = if s.has_integer_exponents() && f.has_integer_exponents() { &[1, -1] } else { &[1] };
        for e in &np.edges {
            for &x_sign in signs {
                let (ts, note) = edge_candidates(s, f, e, x_sign, k)?;
                edge_ts.extend(ts);
                notes.extend(note);
            }
        }
    }
    edge_ts.sort_by(|a, b| a.key().total_cmp(&b.key()));
    edge_ts.dedup();
    Ok(ExceptionalSet {
        vertex_ts,
        edge_ts,
        notes,
    })
}

// ---------------------------------------------------------------------------
// sweeps

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    VertexCancel,
    EdgeDegenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RowStatus {
    /// Bound holds.
    Pass,
    /// Bound fails on a non-flagged row.
    Fail,
    /// Bound fails on a flagged row (an allowed exception).
    Excepted,
    /// No index could be computed (irrational shear, zero polynomial, ...).
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(with = "rational::as_string")]
    pub t: Rational,
    pub index: Option<GrowthIndex>,
    pub superadapt_ok: bool,
    #[serde(rename = "polygon_contains_NS")]
    pub polygon_contains_ns: bool,
    pub flags: Vec<Flag>,
    pub status: RowStatus,
    pub error: Option<String>,
}

/// How close `f` is to the small-perturbation regime.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationSize {
    /// Largest total degree among the vertices of `N(S)`.
    pub l: u32,
    /// Largest `|coefficient|` of `f` over terms of total degree `<= l`.
    #[serde(with = "rational::as_string")]
    pub max_coeff: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepReport {
    /// `S` after reduction to superadapted coordinates.
    pub s: PuiseuxPoly,
    /// `f` in the same coordinates.
    pub f: PuiseuxPoly,
    pub base_index: GrowthIndex,
    pub exceptional: ExceptionalSet,
    pub perturbation: PerturbationSize,
    pub rows: Vec<SweepRow>,
    pub passed: bool,
}

/// Applies the shears that made `s` superadapted to `f` as well.
fn shear_along(s: &PuiseuxPoly, f: &PuiseuxPoly) -> Result<(PuiseuxPoly, PuiseuxPoly)> {
    let rep = to_superadapted(s, default_max_iter(s)?)?;
    let mut f = f.clone();
    for sh in &rep.shears_applied {
        let mi = sh.m.to_integer().to_u32().unwrap_or(0);
        let coeff = if sh.sign < 0 && mi % 2 == 1 { -sh.r.clone() } else { sh.r.clone() };
        f = f.subst_shear(1, &PuiseuxPoly::monomial(coeff, sh.m.clone(), 0))?;
    }
    Ok((rep.result, f))
}

fn perturbation_size(s: &PuiseuxPoly, f: &PuiseuxPoly) -> Result<PerturbationSize> {
    let np = newton_polygon_of(s)?;
    let l = np
        .vertices
        .iter()
        .map(|v| (&v.a + &v.b).ceil().to_integer().to_u32().unwrap_or(u32::MAX))
        .max()
        .unwrap_or(0);
    let max_coeff = f
        .terms()
        .filter(|(e, _)| e.degree() <= int(l as i64))
        .map(|(_, c)| c.abs())
        .max()
        .unwrap_or_else(Rational::zero);
    Ok(PerturbationSize { l, max_coeff })
}

fn row(s: &PuiseuxPoly, f: &PuiseuxPoly, base: &GrowthIndex, ex: &ExceptionalSet, t: &Rational) -> SweepRow {
    let mut flags = Vec::new();
    if ex.vertex_cancel(t) {
        flags.push(Flag::VertexCancel);
    }
    if ex.edge_degenerate(t) {
        flags.push(Flag::EdgeDegenerate);
    }
    let q = s.add(&f.scale(t));
    let contains = match (newton_polygon_of(s), newton_polygon_of(&q)) {
        (Ok(a), Ok(b)) => polygon_subset(&a, &b),
        _ => false,
    };
    let (index, superadapt_ok, error) = match analyze_index(&q) {
        Ok((g, rep)) => (Some(g), rep.superadapted, None),
        Err(e) => (None, false, Some(e.to_string())),
    };
    let status = match &index {
        None => RowStatus::Undecided,
        Some(g) if lex_compare(g, base).is_le() => RowStatus::Pass,
        Some(_) if flags.is_empty() => RowStatus::Fail,
        Some(_) => RowStatus::Excepted,
    };
    SweepRow {
        t: t.clone(),
        index,
        superadapt_ok,
        polygon_contains_ns: contains,
        flags,
        status,
        error,
    }
}

/// Growth index of `S + t f` for every `t`; passes when no non-flagged row is worse than `S`.
pub fn stability_sweep(s: &PuiseuxPoly, f: &PuiseuxPoly, t_grid: &[Rational]) -> Result<SweepReport> {
    if s.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let (s, f) = shear_along(s, f)?;
    let (base, _) = analyze_index(&s)?;
    let ex = exceptional_candidates(&s, &f)?;
    let rows: Vec<SweepRow> = t_grid.par_iter().map(|t| row(&s, &f, &base, &ex, t)).collect();
    let passed = rows.iter().all(|r| r.status != RowStatus::Fail);
    Ok(SweepReport {
        perturbation: perturbation_size(&s, &f)?,
        s,
        f,
        base_index: base,
        exceptional: ex,
        rows,
        passed,
    })
}

/// Monte Carlo cross-check of a symbolic index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    /// Fit with the log power the ratio diagnostic found.
    pub fit: FitResult,
    pub presence: LogPresence,
    pub j_expected: f64,
    pub agrees: bool,
}

pub fn spot_check(p: &PuiseuxPoly, expected: &GrowthIndex, radius: f64, n: u64, seed: u64) -> Result<SpotCheck> {
    let eps = geometric(1e-6, 1e-2, 9);
    let s = sublevel_sweep(p, &Region::Disk { radius }, &eps, "mc", &Budget { n, grid_depth: 0 }, seed)?;
    let j = rational::to_f64(&expected.j);
    let presence = log_presence(&s, j)?;
    let fit = fit_growth_at(&s, presence.p)?;
    Ok(SpotCheck {
        agrees: (fit.j_hat - j).abs() <= 0.05 && presence.p == expected.p,
        fit,
        presence,
        j_expected: j,
    })
}

// ---------------------------------------------------------------------------
// two-phase combinations

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Ratio {
    Finite(#[serde(with = "rational::as_string")] Rational),
    Infinite(InfTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfTag {
    #[serde(rename = "inf")]
    Inf,
}

impl Ratio {
    pub fn inf() -> Ratio {
        Ratio::Infinite(InfTag::Inf)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComboRow {
    pub ratio: Ratio,
    pub index: Option<GrowthIndex>,
    /// Oscillatory index: the sublevel index with the Morse-saddle log dropped.
    pub oscillatory: Option<GrowthIndex>,
    pub candidate: bool,
    pub status: RowStatus,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComboReport {
    pub index_1: GrowthIndex,
    pub index_2: GrowthIndex,
    /// The worse of the two in `(-j, p)` order.
    pub bound: GrowthIndex,
    pub oscillatory_bound: GrowthIndex,
    pub candidates: Vec<EdgeT>,
    pub rows: Vec<ComboRow>,
    pub passed: bool,
}

fn oscillatory(g: &GrowthIndex) -> GrowthIndex {
    let mut o = g.clone();
    if o.morse_hyperbolic_flag {
        o.p = 0;
    }
    o
}

fn worse(a: &GrowthIndex, b: &GrowthIndex) -> GrowthIndex {
    if lex_compare(a, b).is_ge() { a.clone() } else { b.clone() }
}

fn has_critical_point(p: &PuiseuxPoly) -> bool {
    !p.is_zero() && p.terms().all(|(e, _)| e.degree() > int(1))
}

/// Indices of `S1 + r S2` over a ratio grid (`inf` meaning `S2` alone),
/// checked against the worse of the two indices off the candidate set.
pub fn theorem_1_3_sweep(s1: &PuiseuxPoly, s2: &PuiseuxPoly, ratios: &[Ratio]) -> Result<ComboReport> {
    if !has_critical_point(s1) || !has_critical_point(s2) {
        return Err(Error::Invalid("both phases need a critical point at the origin".into()));
    }
    let (g1, _) = analyze_index(s1)?;
    let (g2, _) = analyze_index(s2)?;
    let bound = worse(&g1, &g2);
    let obound = worse(&oscillatory(&g1), &oscillatory(&g2));
    // r S2 cancels against S1 at the S1 candidates; S1 / r against S2 at the reciprocals
    let e12 = exceptional_candidates(s1, s2)?;
    let e21 = exceptional_candidates(s2, s1)?;
    let mut cands: Vec<EdgeT> = e12.vertex_ts.iter().cloned().map(EdgeT::Exact).collect();
    cands.extend(e12.edge_ts.iter().cloned());
    for t in &e21.vertex_ts {
        if !t.is_zero() {
            cands.push(EdgeT::Exact(t.recip()));
        }
    }
    for e in &e21.edge_ts {
        match e {
            EdgeT::Exact(t) if !t.is_zero() => cands.push(EdgeT::Exact(t.recip())),
            EdgeT::Isolated(r) if r.lo.is_positive() || r.hi.is_negative() => cands.push(EdgeT::Isolated(IsolatedRoot {
                lo: r.hi.recip(),
                hi: r.lo.recip(),
                multiplicity: r.multiplicity,
                exact: None,
            })),
            // an interval through 0 maps to everything beyond some bound
            _ => {}
        }
    }
    cands.sort_by(|a, b| a.key().total_cmp(&b.key()));
    cands.dedup();
    let rows: Vec<ComboRow> = ratios
        .par_iter()
        .map(|r| {
            let (q, candidate) = match r {
                Ratio::Finite(t) => (s1.add(&s2.scale(t)), cands.iter().any(|c| c.matches(t))),
                Ratio::Infinite(_) => (s2.clone(), false),
            };
            match analyze_index(&q) {
                Ok((g, _)) => {
                    let o = oscillatory(&g);
                    let ok = lex_compare(&g, &bound).is_le() && lex_compare(&o, &obound).is_le();
                    let status = match (ok, candidate) {
                        (true, _) => RowStatus::Pass,
                        (false, true) => RowStatus::Excepted,
                        (false, false) => RowStatus::Fail,
                    };
                    ComboRow {
                        ratio: r.clone(),
                        index: Some(g),
                        oscillatory: Some(o),
                        candidate,
                        status,
                        error: None,
                    }
                }
                Err(e) => ComboRow {
                    ratio: r.clone(),
                    index: None,
                    oscillatory: None,
                    candidate,
                    status: RowStatus::Undecided,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(ComboReport {
        passed: rows.iter().all(|r| r.status != RowStatus::Fail),
        index_1: g1,
        index_2: g2,
        bound,
        oscillatory_bound: obound,
        candidates: cands,
        rows,
    })
}

// ---------------------------------------------------------------------------
// output

fn flag_names(flags: &[Flag]) -> String {
    flags
        .iter()
        .map(|f| match f {
            Flag::VertexCancel => "vertex_cancel",
            Flag::EdgeDegenerate => "edge_degenerate",
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Columns `t, j, p, flags`; `j` and `p` are empty on undecided rows.
pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
    out.write_record(["t", "j", "p", "flags"]).map_err(io)?;
    for r in rows {
        let (j, p) = match &r.index {
            Some(g) => (rational::fmt(&g.j), g.p.to_string()),
            None => (String::new(), String::new()),
        };
        out.write_record([rational::fmt(&r.t), j, p, flag_names(&r.flags)]).map_err(io)?;
    }
    out.flush().map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    Ok(())
}
