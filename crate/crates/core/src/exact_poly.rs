//! Finite bivariate Puiseux polynomials `Σ c x^a y^b` with rational `a >= 0`,
//! integer `b >= 0` and exact rational coefficients.
//!
//! A polynomial may carry a truncation order `M`: every term with `a + b >= M`
//! has been discarded, so only the stored terms below `M` are known exactly.
//! Operations that can lose tail information record the order that survives.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, int, to_f64, Rational};

/// Exponent pair `(a, b)`; derives the canonical lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exp {
    pub a: Rational,
    pub b: u32,
}

impl Exp {
    pub fn new(a: Rational, b: u32) -> Self {
        Exp { a, b }
    }

    pub fn degree(&self) -> Rational {
        &self.a + int(self.b as i64)
    }
}

/// Default truncation order used when a series has to be cut.
pub fn default_truncation() -> Rational {
    int(40)
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PuiseuxPoly {
    terms: BTreeMap<Exp, Rational>,
    truncation: Option<Rational>,
}

fn min_opt(a: &Option<Rational>, b: &Option<Rational>) -> Option<Rational> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y).clone()),
        (Some(x), None) | (None, Some(x)) => Some(x.clone()),
        (None, None) => None,
    }
}

impl PuiseuxPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        Self::monomial(c, Rational::zero(), 0)
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn monomial(c: Rational, a: Rational, b: u32) -> Self {
        let mut p = Self::zero();
        p.add_term(Exp::new(a, b), c);
        p
    }

    pub fn x() -> Self {
        Self::monomial(Rational::one(), Rational::one(), 0)
    }

    pub fn y() -> Self {
        Self::monomial(Rational::one(), Rational::zero(), 1)
    }

    /// Builds from `(coefficient, a, b)` triples, summing duplicates.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (Rational, Rational, u32)>,
    {
        let mut p = Self::zero();
        for (c, a, b) in terms {
            p.add_term(Exp::new(a, b), c);
        }
        p
    }

    /// Convenience constructor from small integers: `(c, a_num, a_den, b)`.
    pub fn from_ints(terms: &[(i64, i64, i64, u32)]) -> Self {
        Self::from_terms(
            terms
                .iter()
                .map(|&(c, an, ad, b)| (int(c), rational::rat(an, ad), b)),
        )
    }

    pub fn with_truncation(mut self, order: Option<Rational>) -> Self {
        self.truncation = order;
        self.enforce_truncation();
        self
    }

    fn enforce_truncation(&mut self) {
        if let Some(m) = &self.truncation {
            self.terms.retain(|e, _| &e.degree() < m);
        }
    }

    fn add_term(&mut self, e: Exp, c: Rational) {
        assert!(!e.a.is_negative(), "negative x-exponent");
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(e);
        match slot {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exp, &Rational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn truncation_order(&self) -> Option<&Rational> {
        self.truncation.as_ref()
    }

    pub fn coeff(&self, a: &Rational, b: u32) -> Rational {
        self.terms
            .get(&Exp::new(a.clone(), b))
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// Smallest `N` with `N a` integral for every stored exponent.
    pub fn ramification(&self) -> u64 {
        self.terms
            .keys()
            .fold(1, |acc, e| rational::lcm_u64(acc, rational::denom_u64(&e.a)))
    }

    pub fn is_x_only(&self) -> bool {
        self.terms.keys().all(|e| e.b == 0)
    }

    pub fn has_integer_exponents(&self) -> bool {
        self.ramification() == 1
    }

    pub fn y_degree(&self) -> u32 {
        self.terms.keys().map(|e| e.b).max().unwrap_or(0)
    }

    /// Smallest x-exponent among stored terms.
    pub fn x_order(&self) -> Option<Rational> {
        self.terms.keys().map(|e| e.a.clone()).min()
    }

    /// Lowest-order term of an x-only series.
    pub fn leading_x_term(&self) -> Option<(Rational, Rational)> {
        self.terms
            .iter()
            .filter(|(e, _)| e.b == 0)
            .min_by(|l, r| l.0.a.cmp(&r.0.a))
            .map(|(e, c)| (c.clone(), e.a.clone()))
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Rational::one())
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero().with_truncation(self.truncation.clone());
        }
        PuiseuxPoly {
            terms: self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect(),
            truncation: self.truncation.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out.truncation = min_opt(&self.truncation, &other.truncation);
        out.enforce_truncation();
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let trunc = min_opt(&self.truncation, &other.truncation);
        let mut out = PuiseuxPoly {
            terms: BTreeMap::new(),
            truncation: trunc.clone(),
        };
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e = Exp::new(&e1.a + &e2.a, e1.b + e2.b);
                if let Some(m) = &trunc {
                    if &e.degree() >= m {
                        continue;
                    }
                }
                out.add_term(e, c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one().with_truncation(self.truncation.clone());
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Exact `k`-th partial derivative in `y`.
    pub fn deriv_y(&self, k: u32) -> Self {
        let mut out = Self::zero();
        for (e, c) in &self.terms {
            if e.b < k {
                continue;
            }
            let f = rational::falling(&int(e.b as i64), k);
            out.add_term(Exp::new(e.a.clone(), e.b - k), c * f);
        }
        out.truncation = self.truncation.as_ref().map(|m| m - int(k as i64));
        out
    }

    /// Exact `k`-th partial derivative in `x`. Fractional exponents are allowed
    /// to drop below zero only when the caller evaluates at `x > 0`; terms whose
    /// exponent would become negative are kept through [`Self::deriv_x_raw`].
    pub fn deriv_x_raw(&self, k: u32) -> Vec<(Rational, Rational, u32)> {
        self.terms
            .iter()
            .filter_map(|(e, c)| {
                let f = rational::falling(&e.a, k);
                if f.is_zero() {
                    None
                } else {
                    Some((c * f, &e.a - int(k as i64), e.b))
                }
            })
            .collect()
    }

    /// `p(x, sign_y * y + g(x))`, expanded exactly.
    pub fn subst_shear(&self, sign_y: i32, g: &PuiseuxPoly) -> Result<Self> {
        if !g.is_x_only() {
            return Err(Error::NotCurve);
        }
        let sy = int(sign_y.signum() as i64);
        if g.is_zero() {
            let mut out = self.reflect_axes(1, sign_y)?;
            out.truncation = min_opt(&self.truncation, &g.truncation);
            out.enforce_truncation();
            return Ok(out);
        }
        let gamma = g.x_order().expect("nonzero g");
        if !gamma.is_positive() {
            return Err(Error::ShearNotVanishing(rational::fmt(&gamma)));
        }
        let shrink = gamma.clone().min(Rational::one());
        let trunc = min_opt(
            &self.truncation.as_ref().map(|m| m * &shrink),
            &g.truncation,
        );
        let lin = PuiseuxPoly::monomial(sy, Rational::zero(), 1)
            .add(&g.clone().with_truncation(None))
            .with_truncation(trunc.clone());
        // group by y-degree: p = Σ_b q_b(x) y^b
        let mut by_b: BTreeMap<u32, PuiseuxPoly> = BTreeMap::new();
        for (e, c) in &self.terms {
            by_b.entry(e.b)
                .or_default()
                .add_term(Exp::new(e.a.clone(), 0), c.clone());
        }
        let mut out = PuiseuxPoly::zero().with_truncation(trunc.clone());
        let mut power = PuiseuxPoly::one().with_truncation(trunc.clone());
        let mut cur_b = 0u32;
        for (b, q) in by_b {
            while cur_b < b {
                power = power.mul(&lin);
                cur_b += 1;
            }
            out = out.add(&q.with_truncation(trunc.clone()).mul(&power));
        }
        out.truncation = trunc;
        out.enforce_truncation();
        Ok(out)
    }

    /// `p(x, x^m y)`: exponent pairs map `(a, b) -> (a + m b, b)`.
    pub fn subst_scale(&self, m: &Rational) -> Self {
        let mut out = Self::zero();
        for (e, c) in &self.terms {
            out.add_term(Exp::new(&e.a + m * int(e.b as i64), e.b), c.clone());
        }
        out.truncation = self.truncation.clone();
        out.enforce_truncation();
        out
    }

    /// Divides by `x^alpha`; every term must have x-exponent `>= alpha`.
    pub fn divide_out_x(&self, alpha: &Rational) -> Result<Self> {
        let mut out = Self::zero();
        for (e, c) in &self.terms {
            if &e.a < alpha {
                return Err(Error::DivideOut {
                    alpha: rational::fmt(alpha),
                    found: rational::fmt(&e.a),
                });
            }
            out.add_term(Exp::new(&e.a - alpha, e.b), c.clone());
        }
        out.truncation = self.truncation.as_ref().map(|m| m - alpha);
        Ok(out)
    }

    /// `p(sx x, sy y)`.
    pub fn reflect_axes(&self, sx: i32, sy: i32) -> Result<Self> {
        let mut out = Self::zero();
        for (e, c) in &self.terms {
            let mut c = c.clone();
            if sx < 0 {
                if !rational::is_integer(&e.a) {
                    return Err(Error::FractionalReflection(rational::fmt(&e.a)));
                }
                if num_integer::Integer::is_odd(e.a.numer()) {
                    c = -c;
                }
            }
            if sy < 0 && e.b % 2 == 1 {
                c = -c;
            }
            out.add_term(e.clone(), c);
        }
        out.truncation = self.truncation.clone();
        Ok(out)
    }

    /// `p(y, x)`; requires integer exponents.
    pub fn swap_axes(&self) -> Result<Self> {
        let mut out = Self::zero();
        for (e, c) in &self.terms {
            if !rational::is_integer(&e.a) {
                return Err(Error::FractionalReflection(rational::fmt(&e.a)));
            }
            let a: u32 = num_traits::ToPrimitive::to_u32(e.a.numer())
                .ok_or_else(|| Error::Invalid("x-exponent too large to swap".into()))?;
            out.add_term(Exp::new(int(e.b as i64), a), c.clone());
        }
        out.truncation = self.truncation.clone();
        Ok(out)
    }

    /// Substitutes `y -> h(x)` for an x-only series `h`, giving an x-only series.
    pub fn compose_y(&self, h: &PuiseuxPoly) -> Result<Self> {
        if !h.is_x_only() {
            return Err(Error::NotCurve);
        }
        let trunc = min_opt(&self.truncation, &h.truncation);
        let mut by_b: BTreeMap<u32, PuiseuxPoly> = BTreeMap::new();
        for (e, c) in &self.terms {
            by_b.entry(e.b)
                .or_default()
                .add_term(Exp::new(e.a.clone(), 0), c.clone());
        }
        let mut out = PuiseuxPoly::zero().with_truncation(trunc.clone());
        let mut power = PuiseuxPoly::one().with_truncation(trunc.clone());
        let mut cur = 0;
        for (b, q) in by_b {
            while cur < b {
                power = power.mul(h);
                cur += 1;
            }
            out = out.add(&q.with_truncation(trunc.clone()).mul(&power));
        }
        Ok(out)
    }

    /// Floating evaluation with compensated (Neumaier) summation in canonical order.
    pub fn eval_real(&self, x: f64, y: f64) -> Result<f64> {
        if x < 0.0 && !self.has_integer_exponents() {
            return Err(Error::NegativeX(x));
        }
        let mut sum = Neumaier::default();
        for (e, c) in &self.terms {
            sum.add(to_f64(c) * pow_x(x, &e.a) * y.powi(e.b as i32));
        }
        Ok(sum.value())
    }

    /// Exact evaluation at rational `(x, y)`; requires integer x-exponents.
    pub fn eval_exact(&self, x: &Rational, y: &Rational) -> Result<Rational> {
        let mut acc = Rational::zero();
        for (e, c) in &self.terms {
            if !rational::is_integer(&e.a) {
                return Err(Error::FractionalReflection(rational::fmt(&e.a)));
            }
            let a = num_traits::ToPrimitive::to_i32(e.a.numer()).unwrap_or(i32::MAX);
            acc += c * num_traits::pow::Pow::pow(x, a as u32) * num_traits::pow::Pow::pow(y, e.b);
        }
        Ok(acc)
    }

    pub fn compile(&self) -> CompiledPoly {
        CompiledPoly::new(self)
    }
}

fn pow_x(x: f64, a: &Rational) -> f64 {
    if rational::is_integer(a) {
        match num_traits::ToPrimitive::to_i32(a.numer()) {
            Some(k) => x.powi(k),
            None => x.powf(to_f64(a)),
        }
    } else {
        x.powf(to_f64(a))
    }
}

#[derive(Default, Clone, Copy)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl fmt::Display for PuiseuxPoly {
    /// Prints in the expression grammar accepted by the CLI parser.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            first = false;
            let mut factors = Vec::new();
            if !mag.is_one() || (e.a.is_zero() && e.b == 0) {
                factors.push(if rational::is_integer(&mag) {
                    rational::fmt(&mag)
                } else {
                    format!("({})", rational::fmt(&mag))
                });
            }
            if !e.a.is_zero() {
                if e.a.is_one() {
                    factors.push("x".into());
                } else if rational::is_integer(&e.a) {
                    factors.push(format!("x^{}", rational::fmt(&e.a)));
                } else {
                    factors.push(format!("x^({})", rational::fmt(&e.a)));
                }
            }
            if e.b == 1 {
                factors.push("y".into());
            } else if e.b > 1 {
                factors.push(format!("y^{}", e.b));
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

/// Serialized form: terms as `{"c": "num/den", "a": "num/den", "b": n}`.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct PolyJson {
    pub terms: Vec<TermJson>,
    #[serde(with = "rational::opt_as_string", default)]
    pub truncation_order: Option<Rational>,
    pub ramification: u64,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct TermJson {
    #[serde(with = "rational::as_string")]
    pub c: Rational,
    #[serde(with = "rational::as_string")]
    pub a: Rational,
    pub b: u32,
}

impl Serialize for PuiseuxPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyJson {
            terms: self
                .terms
                .iter()
                .map(|(e, c)| TermJson {
                    c: c.clone(),
                    a: e.a.clone(),
                    b: e.b,
                })
                .collect(),
            truncation_order: self.truncation.clone(),
            ramification: self.ramification(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PuiseuxPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = PolyJson::deserialize(d)?;
        Ok(PuiseuxPoly::from_terms(j.terms.into_iter().map(|t| (t.c, t.a, t.b)))
            .with_truncation(j.truncation_order))
    }
}

/// Floating-point image of a [`PuiseuxPoly`] grouped by y-degree, for hot loops.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    /// `rows[b]` holds `(coefficient, x-exponent)` pairs of the `y^b` coefficient.
    rows: Vec<Vec<(f64, XPow)>>,
    integer_exponents: bool,
}

#[derive(Clone, Copy, Debug)]
enum XPow {
    Int(i32),
    Real(f64),
}

impl XPow {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            XPow::Int(0) => 1.0,
            XPow::Int(k) => x.powi(k),
            XPow::Real(a) => x.powf(a),
        }
    }
}

impl CompiledPoly {
    fn new(p: &PuiseuxPoly) -> Self {
        let mut rows = vec![Vec::new(); p.y_degree() as usize + 1];
        for (e, c) in p.terms() {
            let xp = if rational::is_integer(&e.a) {
                XPow::Int(num_traits::ToPrimitive::to_i32(e.a.numer()).unwrap_or(i32::MAX))
            } else {
                XPow::Real(to_f64(&e.a))
            };
            rows[e.b as usize].push((to_f64(c), xp));
        }
        CompiledPoly {
            rows,
            integer_exponents: p.has_integer_exponents(),
        }
    }

    pub fn integer_exponents(&self) -> bool {
        self.integer_exponents
    }

    pub fn y_degree(&self) -> usize {
        self.rows.len() - 1
    }

    /// Coefficients of the univariate polynomial `y -> p(x, y)`, ascending in `y`.
    #[inline]
    pub fn y_coeffs_into(&self, x: f64, out: &mut Vec<f64>) {
        out.clear();
        for row in &self.rows {
            let mut s = 0.0;
            for &(c, xp) in row {
                s += c * xp.apply(x);
            }
            out.push(s);
        }
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        for row in self.rows.iter().rev() {
            let mut s = 0.0;
            for &(c, xp) in row {
                s += c * xp.apply(x);
            }
            acc = acc * y + s;
        }
        acc
    }
}
