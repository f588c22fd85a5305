//! Exact real-root isolation with multiplicities for univariate polynomials
//! over the rationals: square-free decomposition, Sturm counting, bisection,
//! and a rational-root test so that rational roots are reported exactly.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, int, to_f64, Rational};

/// Dense univariate polynomial, coefficients ascending by degree, no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct UPoly {
    coeffs: Vec<Rational>,
}

impl UPoly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        UPoly { coeffs }
    }

    pub fn from_ints(c: &[i64]) -> Self {
        Self::new(c.iter().map(|&v| int(v)).collect())
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        Self::new(vec![c])
    }

    /// `(y - r)`.
    pub fn linear_root(r: &Rational) -> Self {
        Self::new(vec![-r.clone(), Rational::one()])
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn lc(&self) -> Rational {
        self.coeffs.last().cloned().unwrap_or_else(Rational::zero)
    }

    pub fn eval(&self, t: &Rational) -> Rational {
        let mut acc = Rational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * t + c;
        }
        acc
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * t + to_f64(c);
        }
        acc
    }

    pub fn sign_at(&self, t: &Rational) -> i32 {
        let v = self.eval(t);
        if v.is_zero() {
            0
        } else if v.is_positive() {
            1
        } else {
            -1
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        let z = Rational::zero();
        Self::new(
            (0..n)
                .map(|i| self.coeffs.get(i).unwrap_or(&z) + o.coeffs.get(i).unwrap_or(&z))
                .collect(),
        )
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&-Rational::one()))
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::new(self.coeffs.iter().map(|v| v * c).collect())
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        let mut out = vec![Rational::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::constant(Rational::one()), |acc, _| acc.mul(self))
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * int(i as i64))
                .collect(),
        )
    }

    pub fn nth_derivative(&self, k: u32) -> Self {
        (0..k).fold(self.clone(), |p, _| p.derivative())
    }

    /// Euclidean division; panics on a zero divisor.
    pub fn div_rem(&self, d: &Self) -> (Self, Self) {
        assert!(!d.is_zero(), "division by zero polynomial");
        let mut rem = self.coeffs.clone();
        let dd = d.degree();
        let lc = d.lc();
        if self.coeffs.len() < d.coeffs.len() {
            return (Self::zero(), self.clone());
        }
        let mut q = vec![Rational::zero(); self.coeffs.len() - dd];
        for i in (0..q.len()).rev() {
            let c = &rem[i + dd] / &lc;
            if !c.is_zero() {
                for (j, dc) in d.coeffs.iter().enumerate() {
                    rem[i + j] -= &c * dc;
                }
            }
            q[i] = c;
        }
        rem.truncate(dd);
        (Self::new(q), Self::new(rem))
    }

    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        self.scale(&(Rational::one() / self.lc()))
    }

    pub fn gcd(&self, o: &Self) -> Self {
        let (mut a, mut b) = (self.clone(), o.clone());
        while !b.is_zero() {
            let r = a.div_rem(&b).1;
            a = b;
            b = r;
        }
        a.monic()
    }

    /// Multiplicity of `r` as a root (0 when `r` is not a root).
    pub fn root_multiplicity(&self, r: &Rational) -> u32 {
        if self.is_zero() {
            return u32::MAX;
        }
        let lin = Self::linear_root(r);
        let mut p = self.clone();
        let mut k = 0;
        loop {
            let (q, rem) = p.div_rem(&lin);
            if !rem.is_zero() {
                return k;
            }
            p = q;
            k += 1;
        }
    }

    /// Primitive integer polynomial with the same roots.
    pub fn primitive_integer(&self) -> Vec<BigInt> {
        let l = self
            .coeffs
            .iter()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let ints: Vec<BigInt> = self
            .coeffs
            .iter()
            .map(|c| (c * Rational::from_integer(l.clone())).to_integer())
            .collect();
        let g = ints.iter().fold(BigInt::zero(), |acc, c| acc.gcd(c));
        if g.is_zero() {
            return ints;
        }
        ints.into_iter().map(|c| c / &g).collect()
    }

    /// Power of two at or above the Cauchy bound: every real root lies in `(-B, B)`.
    pub fn root_bound(&self) -> Rational {
        let lc = self.lc().abs();
        let m = self
            .coeffs
            .iter()
            .take(self.degree())
            .map(|c| c.abs() / &lc)
            .max()
            .unwrap_or_else(Rational::zero);
        let cauchy = m + Rational::one();
        let mut b = Rational::one();
        while b < cauchy {
            b *= int(2);
        }
        b
    }
}

/// Yun square-free decomposition: `q = lc · Π f_k^k`, returned as `(f_k, k)` with monic `f_k`.
pub fn squarefree_factor(q: &UPoly) -> Result<Vec<(UPoly, u32)>> {
    if q.is_zero() {
        return Err(Error::ZeroUnivariate);
    }
    let mut out = Vec::new();
    if q.degree() == 0 {
        return Ok(out);
    }
    let qp = q.derivative();
    let a0 = q.gcd(&qp);
    let mut b = q.div_rem(&a0).0;
    let mut c = qp.div_rem(&a0).0;
    let mut d = c.sub(&b.derivative());
    let mut k = 1;
    loop {
        let a = b.gcd(&d);
        if a.degree() > 0 {
            out.push((a.clone(), k));
        }
        b = b.div_rem(&a).0;
        if b.degree() == 0 {
            break;
        }
        c = d.div_rem(&a).0;
        d = c.sub(&b.derivative());
        k += 1;
    }
    Ok(out)
}

/// Sturm sequence of a polynomial.
pub fn sturm_sequence(p: &UPoly) -> Vec<UPoly> {
    let mut seq = vec![p.clone(), p.derivative()];
    loop {
        let n = seq.len();
        if seq[n - 1].is_zero() {
            seq.pop();
            break;
        }
        let r = seq[n - 2].div_rem(&seq[n - 1]).1;
        if r.is_zero() {
            break;
        }
        seq.push(r.scale(&-Rational::one()));
    }
    seq
}

fn sign_changes(seq: &[UPoly], t: &Rational) -> usize {
    let signs: Vec<i32> = seq
        .iter()
        .map(|p| p.sign_at(t))
        .filter(|&s| s != 0)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Number of distinct real roots of a square-free `p` in `(lo, hi]`.
pub fn count_roots(seq: &[UPoly], lo: &Rational, hi: &Rational) -> usize {
    sign_changes(seq, lo).saturating_sub(sign_changes(seq, hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootDomain {
    All,
    Positive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsolatedRoot {
    #[serde(with = "rational::as_string")]
    pub lo: Rational,
    #[serde(with = "rational::as_string")]
    pub hi: Rational,
    pub multiplicity: u32,
    #[serde(with = "rational::opt_as_string")]
    pub exact: Option<Rational>,
}

impl IsolatedRoot {
    pub fn approx(&self) -> f64 {
        match &self.exact {
            Some(r) => to_f64(r),
            None => to_f64(&((&self.lo + &self.hi) / int(2))),
        }
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }
}

fn divisors(n: &BigInt) -> Option<Vec<BigInt>> {
    let n = n.abs().to_u64()?;
    if n > 1_000_000_000_000 {
        return None;
    }
    let mut ds = Vec::new();
    let mut i = 1u64;
    while i * i <= n {
        if n % i == 0 {
            ds.push(BigInt::from(i));
            if i != n / i {
                ds.push(BigInt::from(n / i));
            }
        }
        i += 1;
    }
    ds.sort();
    Some(ds)
}

/// Isolates the roots of a square-free `f` in `(lo, hi]` into intervals each holding one root.
fn isolate_squarefree(f: &UPoly, lo: Rational, hi: Rational) -> Vec<(Rational, Rational)> {
    let seq = sturm_sequence(f);
    let mut out = Vec::new();
    let mut stack = vec![(lo, hi)];
    while let Some((a, b)) = stack.pop() {
        let n = count_roots(&seq, &a, &b);
        if n == 0 {
            continue;
        }
        if n == 1 {
            out.push((a, b));
            continue;
        }
        let mid = (&a + &b) / int(2);
        stack.push((mid.clone(), b));
        stack.push((a, mid));
    }
    out.sort();
    out
}

/// Bisects `(lo, hi]` holding a single simple root of `f` until `hi - lo <= width`.
fn bisect(f: &UPoly, mut lo: Rational, mut hi: Rational, width: &Rational) -> (Rational, Rational) {
    let seq = sturm_sequence(f);
    while &(&hi - &lo) > width {
        let mid = (&lo + &hi) / int(2);
        if count_roots(&seq, &lo, &mid) == 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

fn rational_root_in(f: &UPoly, lo: &Rational, hi: &Rational) -> Option<Rational> {
    let ints = f.primitive_integer();
    let lc = ints.last()?.clone();
    let qs = divisors(&lc)?;
    // distinct rationals with denominators dividing lc differ by at least 1/lc^2
    let lcr = Rational::from_integer(lc.abs());
    let width = Rational::one() / (&lcr * &lcr * int(4));
    let (a, b) = bisect(f, lo.clone(), hi.clone(), &width);
    let mid = (&a + &b) / int(2);
    for q in qs {
        let qr = Rational::from_integer(q);
        let p = (&mid * &qr).round();
        let cand = p / qr;
        if cand > *lo && cand <= *hi && f.eval(&cand).is_zero() {
            return Some(cand);
        }
    }
    None
}

fn rat_quarter() -> Rational {
    Rational::new(1.into(), 4.into())
}

/// Disjoint isolating intervals for every distinct real root in the domain, ascending,
/// with multiplicities from the square-free decomposition. Irrational roots come
/// back in dyadic intervals of width at most 1/4.
pub fn isolate_real_roots(q: &UPoly, domain: RootDomain) -> Result<Vec<IsolatedRoot>> {
    let factors = squarefree_factor(q)?;
    let mut roots = Vec::new();
    for (f, k) in &factors {
        let b = f.root_bound();
        let lo = match domain {
            RootDomain::All => -b.clone(),
            RootDomain::Positive => Rational::zero(),
        };
        for (a, c) in isolate_squarefree(f, lo, b) {
            let exact = rational_root_in(f, &a, &c);
            let (a, c) = if exact.is_none() {
                bisect(f, a, c, &rat_quarter())
            } else {
                (a, c)
            };
            let (lo, hi) = match &exact {
                // shrink around the exact value so intervals of distinct roots separate
                Some(r) => (r - Rational::new(1.into(), BigInt::from(1u64 << 40)), r.clone()),
                None => (a, c),
            };
            roots.push((f.clone(), IsolatedRoot {
                lo,
                hi,
                multiplicity: *k,
                exact,
            }));
        }
    }
    // separate overlapping intervals that came from different factors
    roots.sort_by(|l, r| l.1.lo.cmp(&r.1.lo));
    loop {
        let mut changed = false;
        for i in 1..roots.len() {
            if roots[i].1.lo < roots[i - 1].1.hi {
                for j in [i - 1, i] {
                    let (f, r) = &mut roots[j];
                    if r.exact.is_none() {
                        let w = r.width() / int(4);
                        let (a, b) = bisect(f, r.lo.clone(), r.hi.clone(), &w);
                        r.lo = a;
                        r.hi = b;
                    } else {
                        let e = r.exact.clone().unwrap();
                        r.lo = &e - (&r.hi - &r.lo) / int(4);
                    }
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
        roots.sort_by(|l, r| l.1.lo.cmp(&r.1.lo));
    }
    Ok(roots.into_iter().map(|(_, r)| r).collect())
}

/// Narrows an isolating interval to width at most `width`; exact roots are returned unchanged.
pub fn refine_root(r: &IsolatedRoot, q: &UPoly, width: &Rational) -> IsolatedRoot {
    if r.exact.is_some() || &r.width() <= width {
        return r.clone();
    }
    let sf = q.div_rem(&q.gcd(&q.derivative())).0;
    let (lo, hi) = bisect(&sf, r.lo.clone(), r.hi.clone(), width);
    IsolatedRoot {
        lo,
        hi,
        multiplicity: r.multiplicity,
        exact: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use proptest::prelude::*;

    #[test]
    fn squarefree_examples() {
        let q = UPoly::from_ints(&[1, -2, 1]);
        assert_eq!(
            squarefree_factor(&q).unwrap(),
            vec![(UPoly::from_ints(&[-1, 1]), 2)]
        );
        let q = UPoly::from_ints(&[0, -1, 0, 1]);
        assert_eq!(squarefree_factor(&q).unwrap(), vec![(q.clone(), 1)]);
        // (y-1)^2 (y+2)
        let q = UPoly::from_ints(&[-1, 1])
            .pow(2)
            .mul(&UPoly::from_ints(&[2, 1]));
        assert_eq!(
            squarefree_factor(&q).unwrap(),
            vec![
                (UPoly::from_ints(&[2, 1]), 1),
                (UPoly::from_ints(&[-1, 1]), 2)
            ]
        );
        assert!(squarefree_factor(&UPoly::zero()).is_err());
    }

    #[test]
    fn isolate_examples() {
        let r = isolate_real_roots(&UPoly::from_ints(&[1, 0, -1]), RootDomain::Positive).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].exact, Some(int(1)));
        assert_eq!(r[0].multiplicity, 1);

        let r = isolate_real_roots(&UPoly::from_ints(&[1, -2, 1]), RootDomain::All).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!((r[0].exact.clone(), r[0].multiplicity), (Some(int(1)), 2));

        let q = UPoly::from_ints(&[-2, 0, 1]);
        let r = isolate_real_roots(&q, RootDomain::Positive).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r[0].exact.is_none());
        // bisection oracle on f64
        let (mut a, mut b) = (0.0f64, 3.0f64);
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if m * m - 2.0 > 0.0 {
                b = m
            } else {
                a = m
            }
        }
        assert!(to_f64(&r[0].lo) < a && a <= to_f64(&r[0].hi));
        assert_eq!((r[0].lo.clone(), r[0].hi.clone()), (rat(5, 4), rat(3, 2)));
    }

    #[test]
    fn refine_examples() {
        let q = UPoly::from_ints(&[-2, 0, 1]);
        let r = isolate_real_roots(&q, RootDomain::Positive).unwrap().remove(0);
        let w = rat(1, 1_000_000);
        let n = refine_root(&r, &q, &w);
        assert!(n.width() <= w);
        let s2 = 2f64.sqrt();
        assert!(to_f64(&n.lo) < s2 && s2 <= to_f64(&n.hi));
        assert_eq!(n.multiplicity, 1);

        let q = UPoly::from_ints(&[1, 0, -1]);
        let e = isolate_real_roots(&q, RootDomain::Positive).unwrap().remove(0);
        assert_eq!(refine_root(&e, &q, &w), e);
        let wide = rat(10, 1);
        assert_eq!(refine_root(&r, &UPoly::from_ints(&[-2, 0, 1]), &wide), r);
    }

    #[test]
    fn sign_change_across_interval() {
        let q = UPoly::from_ints(&[-3, 0, 0, 1]).mul(&UPoly::from_ints(&[-5, 0, 1]));
        for r in isolate_real_roots(&q, RootDomain::All).unwrap() {
            let sf = q.div_rem(&q.gcd(&q.derivative())).0;
            assert!(sf.sign_at(&r.lo) * sf.sign_at(&r.hi) <= 0);
        }
    }

    fn arb_root() -> impl Strategy<Value = (i64, i64, u32)> {
        (-30i64..30, 1i64..7, 1u32..4)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn random_products_recovered(rs in proptest::collection::vec(arb_root(), 1..4), irr in 0i64..3) {
            let mut q = UPoly::constant(int(1));
            let mut expected: std::collections::BTreeMap<Rational, u32> = Default::default();
            for (n, d, m) in rs {
                let r = rat(n, d);
                *expected.entry(r.clone()).or_default() += m;
                q = q.mul(&UPoly::linear_root(&r).pow(m));
            }
            // an irreducible quadratic factor with no real roots contributes none
            if irr > 0 {
                q = q.mul(&UPoly::from_ints(&[irr, 0, 1]));
            }
            let roots = isolate_real_roots(&q, RootDomain::All).unwrap();
            let got: std::collections::BTreeMap<Rational, u32> = roots
                .iter()
                .map(|r| (r.exact.clone().unwrap(), r.multiplicity))
                .collect();
            prop_assert_eq!(got, expected);
            for w in roots.windows(2) {
                prop_assert!(w[0].hi <= w[1].lo);
            }
        }

        #[test]
        fn multiplicity_count_matches_sturm(cs in proptest::collection::vec(-6i64..6, 2..7)) {
            let q = UPoly::from_ints(&cs);
            prop_assume!(q.degree() >= 1);
            let roots = isolate_real_roots(&q, RootDomain::All).unwrap();
            let total: u32 = roots.iter().map(|r| r.multiplicity).sum();
            prop_assert!(total as usize <= q.degree());
            // distinct real root count from a Sturm chain on the square-free part
            let sf = q.div_rem(&q.gcd(&q.derivative())).0;
            let b = sf.root_bound();
            let seq = sturm_sequence(&sf);
            prop_assert_eq!(count_roots(&seq, &-b.clone(), &b), roots.len());
            // multiplicities reconstruct the degree together with the complex part
            let mut rebuilt = UPoly::constant(int(1));
            for (f, k) in squarefree_factor(&q).unwrap() {
                rebuilt = rebuilt.mul(&f.pow(k));
            }
            prop_assert_eq!(rebuilt.degree(), q.degree());
        }
    }
}
