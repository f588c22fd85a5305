//! Resolution of a phase near the origin into curved-triangle charts.
//!
//! Inside the sector `0 < y < x^eta` each piece is cut, top to bottom, into
//! bands: vertex bands `T` (the phase is dominated by a vertex monomial),
//! root-free edge strips `U` (the phase is comparable to `x^alpha`) and
//! neighbourhoods `V` of the branch curves through positive edge roots. A `V`
//! band is split along its branch curve into two halves which are resolved
//! recursively after the shear `y -> ±y + curve`. All band boundaries are
//! built from the same curves, so the bands tile each piece exactly.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_poly::{default_truncation, CompiledPoly, PuiseuxPoly};
use crate::newton::{newton_polygon_of, CompactEdge, NewtonPolygon, Point};
use crate::rational::{self, falling, int, rat, to_f64, Rational};
use crate::roots::{isolate_real_roots, refine_root, IsolatedRoot, RootDomain, UPoly};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ResolveMode {
    #[default]
    Exact,
    Numeric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolveParams {
    #[serde(with = "rational::opt_as_string")]
    pub eta: Option<Rational>,
    #[serde(with = "rational::as_string")]
    pub xi: Rational,
    #[serde(with = "rational::as_string")]
    pub delta: Rational,
    #[serde(with = "rational::as_string")]
    pub x_max: Rational,
    pub max_depth: usize,
    pub mode: ResolveMode,
    #[serde(with = "rational::as_string")]
    pub truncation: Rational,
}

impl Default for ResolveParams {
    fn default() -> Self {
        ResolveParams {
            eta: None,
            xi: rat(1, 8),
            delta: rat(1, 4),
            x_max: rat(1, 4),
            max_depth: 16,
            mode: ResolveMode::Exact,
            truncation: default_truncation(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChartMode {
    B,
    C,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    #[serde(with = "rational::opt_as_string")]
    pub coeff_exact: Option<Rational>,
    /// Half-width of the interval around `coeff` (numeric mode), else 0.
    pub coeff_radius: f64,
    #[serde(with = "rational::as_string")]
    pub alpha: Rational,
    pub beta: u32,
}

/// Chart map `(x, y) -> (sign_x x, sign_y y - g(x))`, optionally followed by an
/// axis swap, on the curved triangle `0 < x < x_max, lower(x) < y < upper(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub id: String,
    pub sign_x: i32,
    pub sign_y: i32,
    pub swap: bool,
    pub g: PuiseuxPoly,
    pub lower: PuiseuxPoly,
    pub upper: PuiseuxPoly,
    pub monomial: Monomial,
    pub mode: ChartMode,
    #[serde(with = "rational::as_string")]
    pub x_max: Rational,
    #[serde(with = "rational::as_string")]
    pub delta: Rational,
    /// `S ∘ φ` in chart coordinates.
    pub phase: PuiseuxPoly,
    /// Comparison function: the monomial (mode C) or `x^alpha S_e(1, y'/x^m)` (mode B).
    pub model: PuiseuxPoly,
    /// Mode B: `(c, C)` with `c x^alpha < |S ∘ φ| < C x^alpha`.
    pub comparability: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceNode {
    pub path: String,
    #[serde(with = "rational::as_string")]
    pub edge_m: Rational,
    #[serde(with = "rational::as_string")]
    pub alpha: Rational,
    pub root: f64,
    #[serde(with = "rational::opt_as_string")]
    pub root_exact: Option<Rational>,
    pub order: u32,
    pub curve: PuiseuxPoly,
    /// Largest coefficient discarded as structurally zero (numeric mode).
    pub pruned: f64,
    pub children: Vec<TraceNode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub sign_x: i32,
    pub sign_y: i32,
    pub swap: bool,
    #[serde(with = "rational::as_string")]
    pub eta: Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub path: String,
    #[serde(with = "rational::as_string")]
    pub xi: Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub sector: Sector,
    pub charts: Vec<Chart>,
    pub recursion_trace: Vec<TraceNode>,
    #[serde(with = "rational::as_string")]
    pub truncation_order: Rational,
    pub levels: Vec<Level>,
    pub mode: ResolveMode,
    /// b-span of the top-level polygon (at least 1).
    pub m_gap: u32,
}

impl Decomposition {
    pub fn x_max(&self) -> Rational {
        self.charts
            .iter()
            .map(|c| c.x_max.clone())
            .min()
            .unwrap_or_else(Rational::zero)
    }

    pub fn set_x_max(&mut self, x: &Rational) {
        for c in &mut self.charts {
            c.x_max = x.clone();
        }
    }

    /// Structural cap `8 (2M)^(M+1)` on the number of charts.
    pub fn chart_cap(&self) -> u64 {
        let m = self.m_gap.max(1) as u64;
        8 * (2 * m).pow(m as u32 + 1)
    }

    /// Longest root-to-leaf chain in the recursion trace.
    pub fn depth(&self) -> usize {
        fn d(n: &TraceNode) -> usize {
            1 + n.children.iter().map(d).max().unwrap_or(0)
        }
        self.recursion_trace.iter().map(d).max().unwrap_or(0)
    }

    /// Indices of the charts whose domain contains the original point `(x, y)`.
    pub fn locate(&self, evals: &[ChartEval], x: f64, y: f64) -> Vec<usize> {
        evals
            .iter()
            .enumerate()
            .filter(|(_, e)| e.contains(x, y))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn evaluators(&self) -> Vec<ChartEval> {
        self.charts.iter().map(ChartEval::new).collect()
    }
}

/// Compiled form of a chart for fast numeric use.
pub struct ChartEval {
    pub sign_x: f64,
    pub sign_y: f64,
    pub swap: bool,
    pub x_max: f64,
    g: CompiledPoly,
    lower: CompiledPoly,
    upper: CompiledPoly,
    pub phase: CompiledPoly,
    pub model: CompiledPoly,
}

impl ChartEval {
    pub fn new(c: &Chart) -> Self {
        ChartEval {
            sign_x: c.sign_x as f64,
            sign_y: c.sign_y as f64,
            swap: c.swap,
            x_max: to_f64(&c.x_max),
            g: c.g.compile(),
            lower: c.lower.compile(),
            upper: c.upper.compile(),
            phase: c.phase.compile(),
            model: c.model.compile(),
        }
    }

    pub fn g(&self, x: f64) -> f64 {
        self.g.eval(x, 0.0)
    }

    pub fn lower(&self, x: f64) -> f64 {
        self.lower.eval(x, 0.0)
    }

    pub fn upper(&self, x: f64) -> f64 {
        self.upper.eval(x, 0.0)
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let p = (self.sign_x * x, self.sign_y * y - self.g(x));
        if self.swap {
            (p.1, p.0)
        } else {
            p
        }
    }

    pub fn inverse(&self, xo: f64, yo: f64) -> (f64, f64) {
        let (a, b) = if self.swap { (yo, xo) } else { (xo, yo) };
        let x = self.sign_x * a;
        (x, self.sign_y * (b + self.g(x)))
    }

    pub fn contains_local(&self, x: f64, y: f64) -> bool {
        x > 0.0 && x < self.x_max && y > self.lower(x) && y < self.upper(x)
    }

    pub fn contains(&self, xo: f64, yo: f64) -> bool {
        let (x, y) = self.inverse(xo, yo);
        self.contains_local(x, y)
    }
}

pub fn chart_apply(c: &Chart, x: f64, y: f64) -> (f64, f64) {
    ChartEval::new(c).apply(x, y)
}

pub fn chart_inverse(c: &Chart, x: f64, y: f64) -> (f64, f64) {
    ChartEval::new(c).inverse(x, y)
}

// ---------------------------------------------------------------------------
// branch curves

type XSeries = BTreeMap<Rational, Rational>;

fn xs_mul(a: &XSeries, b: &XSeries, cap: &Rational) -> XSeries {
    let mut out = XSeries::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e = ea + eb;
            if &e >= cap {
                break;
            }
            let slot = out.entry(e).or_insert_with(Rational::zero);
            *slot += ca * cb;
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

/// `1 / a` below `cap`, given the constant term `a0 != 0` of `a`.
fn xs_inv(a: &XSeries, a0: &Rational, cap: &Rational) -> XSeries {
    let two: XSeries = [(Rational::zero(), int(2))].into();
    let mut y: XSeries = [(Rational::zero(), a0.recip())].into();
    let gap = a.keys().find(|e| e.is_positive()).cloned();
    let Some(mut order) = gap else {
        return y;
    };
    // y <- y (2 - a y): the error order doubles
    while &order < cap {
        let ay = xs_mul(a, &y, cap);
        let mut corr = two.clone();
        for (e, c) in ay {
            *corr.entry(e).or_insert_with(Rational::zero) -= c;
        }
        corr.retain(|_, c| !c.is_zero());
        y = xs_mul(&y, &corr, cap);
        order = order * int(2);
    }
    y
}

/// `h(x, t(x))` with x-exponents below `cap`.
fn compose_capped(h: &PuiseuxPoly, t: &XSeries, cap: &Rational) -> XSeries {
    let mut by_b: BTreeMap<u32, XSeries> = BTreeMap::new();
    for (e, c) in h.terms() {
        if &e.a < cap {
            by_b.entry(e.b).or_default().insert(e.a.clone(), c.clone());
        }
    }
    let mut out = XSeries::new();
    let mut power: XSeries = [(Rational::zero(), Rational::one())].into();
    let mut cur = 0;
    for (b, q) in by_b {
        while cur < b {
            power = xs_mul(&power, t, cap);
            cur += 1;
        }
        for (e, c) in xs_mul(&q, &power, cap) {
            *out.entry(e).or_insert_with(Rational::zero) += c;
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn round_dyadic(c: &Rational, bits: usize) -> Rational {
    let s = BigInt::one() << bits;
    let scaled = (c * Rational::from_integer(s.clone())).round();
    scaled / Rational::from_integer(s)
}

/// Lifted branch curve `x^m t(x)` together with bookkeeping.
#[derive(Clone, Debug)]
pub struct Branch {
    pub curve: PuiseuxPoly,
    pub t0: Rational,
    /// Largest residual coefficient treated as zero (numeric mode).
    pub dropped: f64,
    /// The curve solves the lifting equation exactly (no series cut).
    pub exact: bool,
}

/// `s_j(x, y') = S(x, x^m y') / x^alpha` for the edge `e`.
pub fn edge_rescaled(p: &PuiseuxPoly, e: &CompactEdge) -> Result<PuiseuxPoly> {
    p.clone().with_truncation(None)
        .subst_scale(&e.m)
        .divide_out_x(&e.alpha)
}

/// Solves `∂_y^(o-1) s_j(x, t(x)) = 0` with `t(0) = r` by cancelling the lowest
/// residual term at each step; returns the curve `x^m t(x)` truncated below
/// total order `truncation`.
pub fn branch_curve_ext(
    p: &PuiseuxPoly,
    edge: &CompactEdge,
    root: &IsolatedRoot,
    truncation: &Rational,
    mode: ResolveMode,
) -> Result<Branch> {
    let o = root.multiplicity;
    let s = edge_rescaled(p, edge)?;
    let h = s.deriv_y(o - 1);
    let hy = h.deriv_y(1);
    let (mut r, numeric) = match (&root.exact, mode) {
        (Some(r), _) => (r.clone(), false),
        (None, ResolveMode::Exact) => {
            return Err(Error::IrrationalBranch(format!(
                "edge root in ({}, {}]",
                rational::fmt(&root.lo),
                rational::fmt(&root.hi)
            )))
        }
        (None, ResolveMode::Numeric) => {
            let q = crate::newton::edge_polynomial(p, edge, 1)?;
            let fine = refine_root(root, &q, &Rational::new(BigInt::one(), BigInt::one() << 70usize));
            ((&fine.lo + &fine.hi) / int(2), true)
        }
    };
    if numeric {
        r = round_dyadic(&r, 80);
    }
    // ∂_y h at (0, r) from the x^0 part
    let hy0: Rational = hy
        .terms()
        .filter(|(e, _)| e.a.is_zero())
        .map(|(e, c)| c * num_traits::pow::Pow::pow(&r, e.b))
        .sum();
    if hy0.is_zero() {
        return Err(Error::Invariant(
            "∂_y^o s_j vanishes at the root: multiplicity mismatch".into(),
        ));
    }
    let cap = truncation - &edge.m;
    let mut t: XSeries = [(Rational::zero(), r.clone())].into();
    let tol = 1e-24;
    let mut dropped = 0f64;
    // Newton in the series ring: t <- t - h(x,t) / h_y(x,t). The accurate
    // order at least doubles per step, so work at a doubling precision; the
    // solution through (0, r) is unique, so this agrees with term-by-term lifting.
    let mut prec = cap.clone().min(Rational::one());
    for _ in 0..400 {
        let mut res = compose_capped(&h, &t, &prec);
        if numeric {
            res.retain(|_, c| {
                let mag = to_f64(c).abs();
                if mag < tol {
                    dropped = dropped.max(mag);
                    false
                } else {
                    true
                }
            });
        }
        if res.is_empty() && prec < cap {
            prec = (prec * int(2)).min(cap.clone());
            continue;
        }
        if res.is_empty() {
            let curve = PuiseuxPoly::from_terms(
                t.iter()
                    .filter(|(_, c)| !c.is_zero())
                    .map(|(e, c)| (c.clone(), e + &edge.m, 0)),
            );
            // a finite solution sits well below the cap; a cut series does not
            let top = t.keys().next_back().cloned().unwrap_or_else(Rational::zero);
            let exact = !numeric && t.len() < 64 && top * int(2) < cap && {
                let tp = PuiseuxPoly::from_terms(t.iter().map(|(e, c)| (c.clone(), e.clone(), 0)));
                h.compose_y(&tp).map(|r| r.is_zero()).unwrap_or(false)
            };
            return Ok(Branch {
                curve,
                t0: t[&Rational::zero()].clone(),
                dropped,
                exact,
            });
        }
        let low = res.keys().next().cloned().expect("nonempty residual");
        let slope = compose_capped(&hy, &t, &prec);
        let d = xs_mul(&res, &xs_inv(&slope, &hy0, &prec), &prec);
        for (e, c) in d {
            let c = if numeric { round_dyadic(&c, 80) } else { c };
            let slot = t.entry(e.clone()).or_insert_with(Rational::zero);
            *slot -= c;
            if slot.is_zero() && !e.is_zero() {
                t.remove(&e);
            }
        }
        let acc = (low * int(2)).min(prec.clone());
        prec = (acc * int(2)).min(cap.clone()).max(prec);
    }
    Err(Error::Invariant("branch lifting did not terminate".into()))
}

pub fn branch_curve(p: &PuiseuxPoly, edge: &CompactEdge, root: &IsolatedRoot) -> Result<PuiseuxPoly> {
    Ok(branch_curve_ext(p, edge, root, &default_truncation(), ResolveMode::Exact)?.curve)
}

// ---------------------------------------------------------------------------
// recursion

struct Piece {
    phase: PuiseuxPoly,
    /// Original `Y = sy * y + h(x)` for local `y`.
    sy: i32,
    h: PuiseuxPoly,
    roof_c: Rational,
    roof_eta: Rational,
    path: String,
    depth: usize,
    /// Order of the root this piece came from; child roots must have smaller order.
    parent_order: Option<u32>,
    pruned: f64,
}

struct EdgeRoots {
    edge: CompactEdge,
    roof: bool,
    roots: Vec<IsolatedRoot>,
}

/// `p(x, side*y + g(x))` keeping only terms of total order below `cap`. A term
/// of order `k` only feeds orders `>= min(ord g, 1) k`, so the input is cut
/// first and the expansion never builds what would be thrown away.
fn shear_below(p: &PuiseuxPoly, side: i32, g: &PuiseuxPoly, cap: &Rational) -> Result<PuiseuxPoly> {
    let exact_degree = |q: &PuiseuxPoly| q.terms().map(|(e, _)| e.degree()).max();
    if p.truncation_order().is_none() && g.truncation_order().is_none() {
        // small exact expansions stay exact
        let gmax = exact_degree(g).unwrap_or_else(|| int(1)).max(int(1));
        let bound = p.terms().map(|(e, _)| &e.a + &gmax * int(e.b as i64)).max();
        if bound.is_none_or(|b| &b < cap) {
            return p.subst_shear(side, g);
        }
    }
    let gamma = g.x_order().map_or_else(|| int(1), |o| o.min(int(1)));
    let input_cap = cap / &gamma;
    let input_cap = match p.truncation_order() {
        Some(t) if t < &input_cap => t.clone(),
        _ => input_cap,
    };
    let out = p.clone().with_truncation(Some(input_cap)).subst_shear(side, g)?;
    let t = match out.truncation_order() {
        Some(t) if t < cap => t.clone(),
        _ => cap.clone(),
    };
    Ok(out.with_truncation(Some(t)))
}

fn edge_part(p: &PuiseuxPoly, e: &CompactEdge) -> PuiseuxPoly {
    PuiseuxPoly::from_terms(
        p.terms()
            .filter(|(ex, _)| e.on_line(&ex.a, &int(ex.b as i64)))
            .map(|(ex, c)| (c.clone(), ex.a.clone(), ex.b)),
    )
}

fn xmono(c: Rational, a: Rational) -> PuiseuxPoly {
    PuiseuxPoly::monomial(c, a, 0)
}

/// Bound `max_{k<=kmax, l<=d} |(a)_k (b)_l| / |(c)_k (d)_l|` used for derivative domination.
fn derivative_factor(a: &Rational, b: u32, c: &Rational, d: u32) -> f64 {
    let kmax = c.ceil().to_integer().to_u32().unwrap_or(0);
    let mut best = 1f64;
    for k in 0..=kmax {
        let den_k = to_f64(&falling(c, k)).abs();
        if den_k == 0.0 {
            continue;
        }
        let num_k = to_f64(&falling(a, k)).abs();
        for l in 0..=d {
            let den_l = to_f64(&falling(&int(d as i64), l)).abs();
            let num_l = to_f64(&falling(&int(b as i64), l)).abs();
            best = best.max(num_k * num_l / (den_k * den_l));
        }
    }
    best
}

/// Whether `xi` dominates the off-vertex terms of every band controlled by ξ.
fn xi_ok(
    phase: &PuiseuxPoly,
    np: &NewtonPolygon,
    edges: &[EdgeRoots],
    roof_c: &Rational,
    xi: &Rational,
    delta: &Rational,
) -> bool {
    let xf = to_f64(xi);
    // root spacing
    for er in edges {
        let rs: Vec<f64> = er.roots.iter().map(|r| r.approx()).collect();
        let top = if er.roof { to_f64(roof_c) } else { 1.0 / xf };
        if er.roof && xf > to_f64(roof_c) / 2.0 {
            return false;
        }
        if let Some(first) = rs.first() {
            if *first < 4.0 * xf {
                return false;
            }
        }
        for w in rs.windows(2) {
            if w[1] - w[0] < 4.0 * xf {
                return false;
            }
        }
        if let Some(last) = rs.last() {
            if last + 2.0 * xf > top {
                return false;
            }
        }
        if !er.roof && 2.0 * xf > 1.0 / xf {
            return false;
        }
    }
    // vertex bands: terms on the far side of a bounding edge are controlled by ξ^|b-d|
    let budget = to_f64(delta) / 4.0;
    for (j, v) in band_vertices(np, edges).iter().enumerate() {
        let (up, down) = band_edges(edges, j);
        let c = &v.a;
        let d = v.b.to_integer().to_u32().unwrap();
        let s_cd = to_f64(&phase.coeff(c, d)).abs();
        let mut sum = 0f64;
        for (e, coef) in phase.terms() {
            if e.b == d {
                continue;
            }
            // only terms on the bounding edge line are controlled by ξ alone;
            // the rest carry a positive power of x and are left to the radius
            let bound = if e.b > d { up } else { down };
            let Some(edge) = bound else { continue };
            if !edge.edge.on_line(&e.a, &int(e.b as i64)) {
                continue;
            }
            let gap = e.b.abs_diff(d) as i32;
            sum += to_f64(coef).abs() / s_cd * xf.powi(gap) * derivative_factor(&e.a, e.b, c, d);
        }
        if sum > budget {
            return false;
        }
    }
    true
}

/// Vertex of each vertex band, top to bottom.
fn band_vertices(np: &NewtonPolygon, edges: &[EdgeRoots]) -> Vec<Point> {
    let mut out = Vec::new();
    match edges.first() {
        None => {
            out.push(np.vertices.last().unwrap().clone());
            return out;
        }
        Some(first) if !first.roof => out.push(first.edge.lo.clone()),
        _ => {}
    }
    for er in edges {
        out.push(er.edge.hi.clone());
    }
    out
}

/// Edges bounding the j-th vertex band from above / below.
fn band_edges(edges: &[EdgeRoots], j: usize) -> (Option<&EdgeRoots>, Option<&EdgeRoots>) {
    let has_top = edges.first().is_some_and(|e| !e.roof);
    // with a top band, band j sits between edges j-1 and j
    let (ui, di) = if has_top || edges.is_empty() {
        (j.checked_sub(1), Some(j))
    } else {
        (Some(j), Some(j + 1))
    };
    (
        ui.and_then(|i| edges.get(i)),
        di.and_then(|i| edges.get(i)),
    )
}

struct Builder<'a> {
    params: &'a ResolveParams,
    x_max: Rational,
    charts: Vec<Chart>,
    levels: Vec<Level>,
    mode: ResolveMode,
}

impl Builder<'_> {
    fn chart_g(piece: &Piece, shift: &PuiseuxPoly) -> PuiseuxPoly {
        // Y = sy (y + shift) + h  =>  g = -(sy shift + h)
        shift
            .scale(&int(piece.sy as i64))
            .add(&piece.h)
            .neg()
    }

    fn vertex_chart(&mut self, piece: &Piece, id: String, v: &Point, lower: PuiseuxPoly, upper: PuiseuxPoly) {
        let d = v.b.to_integer().to_u32().unwrap();
        let s = piece.phase.coeff(&v.a, d);
        self.charts.push(Chart {
            id,
            sign_x: 1,
            sign_y: piece.sy,
            swap: false,
            g: Self::chart_g(piece, &PuiseuxPoly::zero()),
            lower,
            upper,
            monomial: Monomial {
                coeff: to_f64(&s),
                coeff_exact: (piece.pruned == 0.0).then(|| s.clone()),
                coeff_radius: piece.pruned,
                alpha: v.a.clone(),
                beta: d,
            },
            mode: ChartMode::C,
            x_max: self.x_max.clone(),
            delta: self.params.delta.clone(),
            phase: piece.phase.clone(),
            model: PuiseuxPoly::monomial(s, v.a.clone(), d),
            comparability: None,
        });
    }

    #[allow(clippy::too_many_arguments)]
    fn strip_chart(
        &mut self,
        piece: &Piece,
        id: String,
        e: &CompactEdge,
        bottom: PuiseuxPoly,
        top: PuiseuxPoly,
        y_lo: f64,
        y_hi: f64,
    ) -> Result<()> {
        let se = crate::newton::edge_polynomial(&piece.phase, e, 1)?;
        let (mn, mx, mid) = strip_range(&se, y_lo, y_hi);
        let dl = to_f64(&self.params.delta);
        let cap = &self.params.truncation;
        let phase = shear_below(&piece.phase, 1, &bottom, cap)?;
        let model = shear_below(&edge_part(&piece.phase, e), 1, &bottom, cap)?;
        self.charts.push(Chart {
            id,
            sign_x: 1,
            sign_y: piece.sy,
            swap: false,
            g: Self::chart_g(piece, &bottom),
            lower: PuiseuxPoly::zero(),
            upper: top.sub(&bottom),
            monomial: Monomial {
                coeff: mid,
                coeff_exact: None,
                coeff_radius: piece.pruned,
                alpha: e.alpha.clone(),
                beta: 0,
            },
            mode: ChartMode::B,
            x_max: self.x_max.clone(),
            delta: self.params.delta.clone(),
            phase,
            model,
            comparability: Some(((1.0 - dl) * mn, (1.0 + dl) * mx)),
        });
        Ok(())
    }

    fn piece(&mut self, piece: Piece) -> Result<Vec<TraceNode>> {
        if piece.depth > self.params.max_depth {
            return Err(Error::Invariant(format!(
                "recursion depth {} exceeded at {}",
                self.params.max_depth, piece.path
            )));
        }
        let np = newton_polygon_of(&piece.phase)?;
        let eta = &piece.roof_eta;
        let mut edges = Vec::new();
        for e in np.edges.iter().filter(|e| &e.m >= eta) {
            let roof = &e.m == eta;
            let q = crate::newton::edge_polynomial(&piece.phase, e, 1)?;
            let roots: Vec<IsolatedRoot> = isolate_real_roots(&q, RootDomain::Positive)?
                .into_iter()
                .filter(|r| r.exact.as_ref().is_none_or(|v| v.is_positive()))
                .filter(|r| !roof || r.approx() < to_f64(&piece.roof_c))
                .collect();
            if let Some(po) = piece.parent_order {
                if let Some(bad) = roots.iter().find(|r| r.multiplicity >= po) {
                    return Err(Error::Invariant(format!(
                        "root order {} did not decrease below {po} at {}",
                        bad.multiplicity, piece.path
                    )));
                }
            }
            edges.push(EdgeRoots {
                edge: e.clone(),
                roof,
                roots,
            });
        }

        // ξ for this level
        let mut xi = self.params.xi.clone();
        let mut tries = 0;
        while !xi_ok(&piece.phase, &np, &edges, &piece.roof_c, &xi, &self.params.delta) {
            xi /= int(2);
            tries += 1;
            if tries > 60 {
                return Err(Error::Invariant(format!("no admissible xi at {}", piece.path)));
            }
        }
        self.levels.push(Level {
            path: piece.path.clone(),
            xi: xi.clone(),
        });
        let xinv = Rational::one() / &xi;
        let roof = xmono(piece.roof_c.clone(), piece.roof_eta.clone());
        let verts = band_vertices(&np, &edges);
        let mut vi = 0;
        let mut trace = Vec::new();
        let p = &piece.path;

        // top band
        let mut above = roof.clone();
        if edges.first().is_none_or(|e| !e.roof) {
            let lower = match edges.first() {
                Some(e) => xmono(xinv.clone(), e.edge.m.clone()),
                None => PuiseuxPoly::zero(),
            };
            self.vertex_chart(&piece, format!("{p}T0"), &verts[vi], lower.clone(), roof.clone());
            vi += 1;
            above = lower;
        }
        for (j, er) in edges.iter().enumerate() {
            let e = &er.edge;
            let xm = |c: Rational| xmono(c, e.m.clone());
            let strip_top = if er.roof { roof.clone() } else { xm(xinv.clone()) };
            let strip_top_c = if er.roof { to_f64(&piece.roof_c) } else { to_f64(&xinv) };
            let _ = &above;
            let xf = to_f64(&xi);
            // walk the strip bottom-up: ξ x^m, then around each root
            let mut bottom = xm(xi.clone());
            let mut bottom_c = xf;
            let mut l = 0;
            for root in &er.roots {
                let br = branch_curve_ext(&piece.phase, e, root, &self.params.truncation, self.mode)?;
                let below_v = br.curve.sub(&xm(xi.clone()));
                let above_v = br.curve.add(&xm(xi.clone()));
                let rf = to_f64(&br.t0);
                self.strip_chart(&piece, format!("{p}U{}.{l}", j + 1), e, bottom.clone(), below_v, bottom_c, rf - xf)?;
                l += 1;
                let mut node = TraceNode {
                    path: format!("{p}V{}.{}", j + 1, l),
                    edge_m: e.m.clone(),
                    alpha: e.alpha.clone(),
                    root: root.approx(),
                    root_exact: root.exact.clone(),
                    order: root.multiplicity,
                    curve: br.curve.clone(),
                    pruned: br.dropped,
                    children: Vec::new(),
                };
                for (side, tag) in [(1, "+"), (-1, "-")] {
                    // a cut series leaves residue of total order >= truncation only
                    let cut = match (piece.phase.truncation_order(), br.exact) {
                        (Some(t), _) => Some(t.clone().min(self.params.truncation.clone())),
                        (None, false) => Some(self.params.truncation.clone()),
                        (None, true) => None,
                    };
                    let base = piece.phase.clone().with_truncation(None);
                    let mut child = match &cut {
                        Some(c) => shear_below(&base, side, &br.curve, c)?.with_truncation(cut.clone()),
                        None => base.subst_shear(side, &br.curve)?,
                    };
                    let mut pruned = piece.pruned.max(br.dropped);
                    if self.mode == ResolveMode::Numeric && root.exact.is_none() {
                        let (c2, err) = prune_structural(&child, e, root.multiplicity)?;
                        child = c2;
                        pruned = pruned.max(err);
                    }
                    let cp = Piece {
                        phase: child,
                        sy: piece.sy * side,
                        h: br.curve.scale(&int(piece.sy as i64)).add(&piece.h),
                        roof_c: xi.clone(),
                        roof_eta: e.m.clone(),
                        path: format!("{}{tag}/", node.path),
                        depth: piece.depth + 1,
                        parent_order: Some(root.multiplicity),
                        pruned,
                    };
                    node.children.extend(self.piece(cp)?);
                }
                trace.push(node);
                bottom = above_v;
                bottom_c = rf + xf;
            }
            self.strip_chart(&piece, format!("{p}U{}.{l}", j + 1), e, bottom, strip_top, bottom_c, strip_top_c)?;
            // vertex band below this strip
            let upper = xm(xi.clone());
            let lower = match edges.get(j + 1) {
                Some(n) => xmono(xinv.clone(), n.edge.m.clone()),
                None => PuiseuxPoly::zero(),
            };
            self.vertex_chart(&piece, format!("{p}T{}", j + 1), &verts[vi], lower.clone(), upper);
            vi += 1;
            above = lower;
        }
        Ok(trace)
    }
}

/// Min and max of `|S_e(1, y)|` and its value at the midpoint over `[lo, hi]`.
fn strip_range(se: &UPoly, lo: f64, hi: f64) -> (f64, f64, f64) {
    let n = 512;
    let mut mn = f64::INFINITY;
    let mut mx = 0f64;
    for i in 0..=n {
        let y = lo + (hi - lo) * i as f64 / n as f64;
        let v = se.eval_f64(y).abs();
        mn = mn.min(v);
        mx = mx.max(v);
    }
    // interior critical points
    if se.degree() >= 2 {
        if let Ok(crit) = isolate_real_roots(&se.derivative(), RootDomain::All) {
            for c in crit {
                let y = c.approx();
                if y > lo && y < hi {
                    let v = se.eval_f64(y).abs();
                    mn = mn.min(v);
                    mx = mx.max(v);
                }
            }
        }
    }
    (mn, mx, se.eval_f64(0.5 * (lo + hi)))
}

/// Drops the coefficients that vanish exactly for the true branch curve but
/// survive as round-off of a rational approximation; returns the largest dropped.
fn prune_structural(child: &PuiseuxPoly, e: &CompactEdge, o: u32) -> Result<(PuiseuxPoly, f64)> {
    let scale = child
        .terms()
        .map(|(_, c)| to_f64(c).abs())
        .fold(0f64, f64::max);
    let tol = 1e-12 * scale.max(1.0);
    let mut err = 0f64;
    let mut kept = Vec::new();
    for (ex, c) in child.terms() {
        let w = &ex.a + &e.m * int(ex.b as i64);
        let structural = w < e.alpha || (w == e.alpha && ex.b < o) || ex.b + 1 == o;
        let mag = to_f64(c).abs();
        if structural && mag < tol {
            err = err.max(mag);
            continue;
        }
        kept.push((c.clone(), ex.a.clone(), ex.b));
    }
    Ok((PuiseuxPoly::from_terms(kept), err))
}

fn default_eta(np: &NewtonPolygon) -> Rational {
    let half = rat(1, 2);
    match np.edges.iter().map(|e| e.m.clone()).min() {
        Some(m) => (m / int(2)).min(half),
        None => half,
    }
}

/// Resolves `p` on the sector `0 < x < x_max, 0 < y < x^eta`.
pub fn resolve(p: &PuiseuxPoly, params: &ResolveParams) -> Result<Decomposition> {
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let p = p.clone().with_truncation(None);
    let np = newton_polygon_of(&p)?;
    let eta = params.eta.clone().unwrap_or_else(|| default_eta(&np));
    if !eta.is_positive() {
        return Err(Error::Invalid("eta must be positive".into()));
    }
    let m_gap = np.b_span().to_integer().to_u32().unwrap_or(1).max(1);
    let mut b = Builder {
        params,
        x_max: params.x_max.clone(),
        charts: Vec::new(),
        levels: Vec::new(),
        mode: params.mode,
    };
    let trace = b.piece(Piece {
        phase: p.clone(),
        sy: 1,
        h: PuiseuxPoly::zero(),
        roof_c: Rational::one(),
        roof_eta: eta.clone(),
        path: String::new(),
        depth: 0,
        parent_order: None,
        pruned: 0.0,
    })?;
    Ok(Decomposition {
        sector: Sector {
            sign_x: 1,
            sign_y: 1,
            swap: false,
            eta,
        },
        charts: b.charts,
        recursion_trace: trace,
        truncation_order: params.truncation.clone(),
        levels: b.levels,
        mode: params.mode,
        m_gap,
    })
}

/// Resolves one of the eight sectors: `index & 1` reflects y, `index & 2`
/// reflects x, `index & 4` swaps the axes first (needs integer exponents).
/// Swapped sectors default to the roof `1/eta` of the unswapped one.
pub fn resolve_sector(p: &PuiseuxPoly, index: u8, params: &ResolveParams) -> Result<Decomposition> {
    let sy = if index & 1 == 1 { -1 } else { 1 };
    let sx = if index & 2 == 2 { -1 } else { 1 };
    let swap = index & 4 == 4;
    let mut q = p.clone();
    let mut params = params.clone();
    if swap {
        // the swapped sector is the complement `|x| < |y|^(1/eta)` of the
        // unswapped one, so the eight sectors tile a neighbourhood
        if params.eta.is_none() {
            let eta = default_eta(&newton_polygon_of(p)?);
            params.eta = Some(eta.recip());
        }
        q = q.swap_axes()?;
    }
    q = q.reflect_axes(sx, sy)?;
    let mut dec = resolve(&q, &params)?;
    for c in &mut dec.charts {
        c.sign_x = sx;
        if sy < 0 {
            c.sign_y = -c.sign_y;
            c.g = c.g.neg();
        }
        c.swap = swap;
    }
    dec.sector = Sector {
        sign_x: sx,
        sign_y: sy,
        swap,
        eta: dec.sector.eta.clone(),
    };
    Ok(dec)
}

// ---------------------------------------------------------------------------
// verification

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub chart_id: String,
    pub samples: usize,
    pub max_ratio_violation: f64,
    pub derivative_check: f64,
    pub sign_constant: bool,
    /// Observed min and max of `|S ∘ φ| / x^alpha` (mode B).
    pub observed_range: Option<(f64, f64)>,
    pub passed: bool,
}

/// Seeded sample point in the unit square for sample index `i`.
pub fn unit_sample(seed: u64, i: u64) -> (f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>())
}

fn chart_point(ev: &ChartEval, seed: u64, i: u64) -> (f64, f64) {
    let (u, v, _) = unit_sample(seed, i);
    let u = u.max(1e-12);
    let x = if i % 2 == 0 {
        ev.x_max * (1e-4f64).powf(u)
    } else {
        ev.x_max * u
    };
    let w = match i % 3 {
        0 => v,
        1 => v * v * v,
        _ => 1.0 - v * v * v,
    }
    .clamp(1e-9, 1.0 - 1e-9);
    let (lo, hi) = (ev.lower(x), ev.upper(x));
    (x, lo + w * (hi - lo))
}

struct DerivTerm {
    k: u32,
    l: u32,
    poly: CompiledPoly,
    model: f64,
}

/// Samples the chart and measures the deviation of `S ∘ φ` from its model.
pub fn verify_chart(p: &PuiseuxPoly, c: &Chart, samples: usize, seed: u64) -> Result<VerifyReport> {
    let _ = p;
    let ev = ChartEval::new(c);
    // domain check at a spread of radii
    for i in 0..16 {
        let x = ev.x_max * (1e-4f64).powf(i as f64 / 15.0);
        if ev.upper(x) <= ev.lower(x) {
            return Err(Error::EmptyChart);
        }
    }
    let alpha = to_f64(&c.monomial.alpha);
    let beta = c.monomial.beta;
    let b = c.monomial.coeff;
    let derivs: Vec<DerivTerm> = if c.mode == ChartMode::C {
        let kmax = c.monomial.alpha.ceil().to_integer().to_u32().unwrap_or(0);
        let mut v = Vec::new();
        for k in 0..=kmax {
            for l in 0..=beta {
                if k == 0 && l == 0 {
                    continue;
                }
                let raw = c.phase.deriv_y(l).deriv_x_raw(k);
                let poly = PuiseuxPoly::from_terms(raw.into_iter().map(|(cf, a, bb)| {
                    // shift exponents up by k so they stay nonnegative; divided back below
                    (cf, a + int(k as i64), bb)
                }))
                .compile();
                let model = to_f64(&falling(&c.monomial.alpha, k)) * to_f64(&falling(&int(beta as i64), l));
                v.push(DerivTerm { k, l, poly, model });
            }
        }
        v
    } else {
        Vec::new()
    };
    let dl = to_f64(&c.delta);
    let stats: Vec<(f64, f64, f64, f64)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let (x, y) = chart_point(&ev, seed, i);
            let v = ev.phase.eval(x, y);
            let m = ev.model.eval(x, y);
            let ratio = v / m;
            let norm = (v / x.powf(alpha)).abs();
            let mut dev = 0f64;
            for d in &derivs {
                let val = d.poly.eval(x, y) / x.powi(d.k as i32);
                let scale = b.abs() * x.powf(alpha - d.k as f64) * y.powi(beta as i32 - d.l as i32);
                let target = b * d.model * x.powf(alpha - d.k as f64) * y.powi(beta as i32 - d.l as i32);
                dev = dev.max((val - target).abs() / scale);
            }
            (ratio, dev, v.signum(), norm)
        })
        .collect();
    let mut max_ratio = 0f64;
    let mut max_dev = 0f64;
    let mut sign = 0f64;
    let mut sign_constant = true;
    let (mut lo, mut hi) = (f64::INFINITY, 0f64);
    for (ratio, dev, s, norm) in stats {
        let r = (ratio - 1.0).abs();
        max_ratio = if r.is_nan() { f64::INFINITY } else { max_ratio.max(r) };
        max_dev = if dev.is_nan() { f64::INFINITY } else { max_dev.max(dev) };
        if sign == 0.0 {
            sign = s;
        } else if s != sign {
            sign_constant = false;
        }
        lo = lo.min(norm);
        hi = hi.max(norm);
    }
    let observed_range = (c.mode == ChartMode::B).then_some((lo, hi));
    let passed = max_ratio <= dl && max_dev <= dl && sign_constant;
    Ok(VerifyReport {
        chart_id: c.id.clone(),
        samples,
        max_ratio_violation: max_ratio,
        derivative_check: max_dev,
        sign_constant,
        observed_range,
        passed,
    })
}

/// Chart bands keep `lower < upper` on a log grid of `x` in `(0, x_max]`.
pub fn boundaries_ordered(dec: &Decomposition) -> bool {
    dec.evaluators().iter().all(|ev| {
        (0..60).all(|i| {
            let x = ev.x_max * (1e-8f64).powf(i as f64 / 59.0);
            ev.upper(x) > ev.lower(x)
        })
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    #[serde(with = "rational::as_string")]
    pub x_max: Rational,
    pub retries: usize,
    pub reports: Vec<VerifyReport>,
    pub passed: bool,
}

/// Halves `x_max` (at most 20 times) until every chart verifies and the band
/// boundaries stay ordered.
pub fn certify(p: &PuiseuxPoly, dec: &mut Decomposition, samples: usize, seed: u64) -> Result<Certificate> {
    let mut x = dec.x_max();
    for retries in 0..=20 {
        dec.set_x_max(&x);
        let mut ok = boundaries_ordered(dec);
        let mut reports = Vec::new();
        if ok {
            for c in &dec.charts {
                match verify_chart(p, c, samples, seed) {
                    Ok(r) => {
                        ok &= r.passed;
                        reports.push(r);
                    }
                    Err(Error::EmptyChart) => ok = false,
                    Err(e) => return Err(e),
                }
                if !ok {
                    break;
                }
            }
        }
        if ok {
            return Ok(Certificate {
                x_max: x,
                retries,
                reports,
                passed: true,
            });
        }
        x /= int(2);
    }
    let x = x * int(2);
    dec.set_x_max(&x);
    let reports = dec
        .charts
        .iter()
        .filter_map(|c| verify_chart(p, c, samples, seed).ok())
        .collect();
    Ok(Certificate {
        x_max: x,
        retries: 20,
        reports,
        passed: false,
    })
}

/// `resolve` followed by `certify`.
pub fn resolve_certified(
    p: &PuiseuxPoly,
    params: &ResolveParams,
    samples: usize,
    seed: u64,
) -> Result<(Decomposition, Certificate)> {
    let mut dec = resolve(p, params)?;
    let cert = certify(p, &mut dec, samples, seed)?;
    Ok((dec, cert))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub samples: usize,
    pub exactly_one: usize,
    pub uncovered: usize,
    pub overlapping: usize,
}

impl Coverage {
    pub fn failure_fraction(&self) -> f64 {
        (self.uncovered + self.overlapping) as f64 / self.samples.max(1) as f64
    }
}

/// Counts how many charts contain each of `n` seeded points of the sector
/// `0 < x < x_max, 0 < y < x^eta` (mapped through the sector reflection).
pub fn coverage(dec: &Decomposition, n: usize, seed: u64) -> Coverage {
    let evals = dec.evaluators();
    let xm = to_f64(&dec.x_max());
    let eta = to_f64(&dec.sector.eta);
    let (sx, sy, swap) = (dec.sector.sign_x as f64, dec.sector.sign_y as f64, dec.sector.swap);
    let counts: Vec<usize> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let (u, v, _) = unit_sample(seed, i);
            let x = xm * u;
            let y = v * x.powf(eta);
            let (a, b) = (sx * x, sy * y);
            let (xo, yo) = if swap { (b, a) } else { (a, b) };
            evals.iter().filter(|e| e.contains(xo, yo)).count()
        })
        .collect();
    Coverage {
        samples: n,
        exactly_one: counts.iter().filter(|&&c| c == 1).count(),
        uncovered: counts.iter().filter(|&&c| c == 0).count(),
        overlapping: counts.iter().filter(|&&c| c > 1).count(),
    }
}

/// Largest `| |det Dφ| - 1 |` over `n` seeded points, by central differences.
pub fn jacobian_deviation(c: &Chart, n: usize, seed: u64) -> f64 {
    let ev = ChartEval::new(c);
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let (x, y) = chart_point(&ev, seed, i);
            let h = 1e-6 * x;
            let k = 1e-6 * (y.abs() + ev.g(x).abs()).max(1e-300);
            let (xp, xn) = (ev.apply(x + h, y), ev.apply(x - h, y));
            let (yp, yn) = (ev.apply(x, y + k), ev.apply(x, y - k));
            let j11 = (xp.0 - xn.0) / (2.0 * h);
            let j21 = (xp.1 - xn.1) / (2.0 * h);
            let j12 = (yp.0 - yn.0) / (2.0 * k);
            let j22 = (yp.1 - yn.1) / (2.0 * k);
            ((j11 * j22 - j12 * j21).abs() - 1.0).abs()
        })
        .reduce(|| 0.0, f64::max)
}
