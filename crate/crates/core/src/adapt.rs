//! Superadapted coordinates: detection, reduction by polynomial shears, and
//! the growth index `(j, p)` read off the superadapted Newton polygon.

use std::cmp::Ordering;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_poly::PuiseuxPoly;
use crate::newton::{
    bisectrix_classify, edge_polynomial, newton_distance, newton_polygon_of, BisectrixTag,
    CompactEdge,
};
use crate::rational::{self, int, Rational};
use crate::roots::{isolate_real_roots, IsolatedRoot, RootDomain};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthIndex {
    #[serde(with = "rational::as_string")]
    pub j: Rational,
    pub p: u8,
    pub morse_hyperbolic_flag: bool,
}

impl GrowthIndex {
    pub fn new(j: Rational, p: u8) -> Self {
        GrowthIndex {
            j,
            p,
            morse_hyperbolic_flag: false,
        }
    }

    /// Lexicographic key `(-j, p)`; smaller means faster decay.
    pub fn key(&self) -> (Rational, u8) {
        (-self.j.clone(), self.p)
    }
}

pub fn lex_compare(g1: &GrowthIndex, g2: &GrowthIndex) -> Ordering {
    g1.key().cmp(&g2.key())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub edge: CompactEdge,
    pub x_sign: i32,
    pub root: IsolatedRoot,
    pub order: u32,
    #[serde(with = "rational::as_string")]
    pub d: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shear {
    #[serde(with = "rational::as_string")]
    pub m: Rational,
    #[serde(with = "rational::as_string")]
    pub r: Rational,
    /// Side of the y-axis the violating root came from.
    pub sign: i32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptReport {
    pub result: PuiseuxPoly,
    pub shears_applied: Vec<Shear>,
    pub superadapted: bool,
    pub violating_witness: Option<Witness>,
}

/// Edge whose relative interior contains the bisectrix touch point, if any.
fn bisectrix_edge(p: &PuiseuxPoly) -> Result<(Option<CompactEdge>, Rational)> {
    let np = newton_polygon_of(p)?;
    let d = newton_distance(&np);
    Ok(match bisectrix_classify(&np).tag {
        BisectrixTag::EdgeInterior { edge } => (Some(edge), d),
        _ => (None, d),
    })
}

/// All real nonzero roots of `S_e(±1, y)` on the bisectrix edge with order `>= d`.
fn violations(p: &PuiseuxPoly) -> Result<Vec<Witness>> {
    let (edge, d) = bisectrix_edge(p)?;
    let Some(edge) = edge else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for x_sign in [1, -1] {
        let q = edge_polynomial(p, &edge, x_sign)?;
        for root in isolate_real_roots(&q, RootDomain::All)? {
            if root.exact.as_ref().is_some_and(|r| r.is_zero()) {
                continue;
            }
            if int(root.multiplicity as i64) >= d {
                out.push(Witness {
                    edge: edge.clone(),
                    x_sign,
                    order: root.multiplicity,
                    root,
                    d: d.clone(),
                });
            }
        }
    }
    Ok(out)
}

/// Whether `p` is superadapted, with the first violation otherwise.
pub fn is_superadapted(p: &PuiseuxPoly) -> Result<(bool, Option<Witness>)> {
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let w = violations(p)?.into_iter().next();
    Ok((w.is_none(), w))
}

/// Maximal root order among violations (0 when superadapted).
pub fn max_violating_order(p: &PuiseuxPoly) -> Result<u32> {
    Ok(violations(p)?.iter().map(|w| w.order).max().unwrap_or(0))
}

/// Iteration budget `initial max edge-root order + 2`.
pub fn default_max_iter(p: &PuiseuxPoly) -> Result<usize> {
    Ok(max_violating_order(p)? as usize + 2)
}

pub fn to_superadapted(p: &PuiseuxPoly, max_iter: usize) -> Result<AdaptReport> {
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let mut report = AdaptReport {
        result: p.clone(),
        shears_applied: Vec::new(),
        superadapted: false,
        violating_witness: None,
    };
    loop {
        let (ok, w) = is_superadapted(&report.result)?;
        if ok {
            report.superadapted = true;
            report.violating_witness = None;
            return Ok(report);
        }
        let w = w.unwrap();
        report.violating_witness = Some(w.clone());
        if report.shears_applied.len() >= max_iter {
            return Err(Error::MaxIterations {
                iterations: max_iter,
                partial: Box::new(report),
            });
        }
        let m = w.edge.m.clone();
        if !rational::is_integer(&m) {
            return Err(Error::NonIntegerShear(rational::fmt(&m)));
        }
        let Some(r) = w.root.exact.clone() else {
            return Err(Error::AlgebraicShear(format!(
                "in ({}, {}]",
                rational::fmt(&w.root.lo),
                rational::fmt(&w.root.hi)
            )));
        };
        // a root of S_e(-1, y) is the curve y = r (-x)^m
        let mi = m.to_integer().to_u32().unwrap_or(u32::MAX);
        let coeff = if w.x_sign < 0 && mi % 2 == 1 { -r.clone() } else { r.clone() };
        let g = PuiseuxPoly::monomial(coeff, m.clone(), 0);
        report.result = report.result.subst_shear(1, &g)?;
        report.shears_applied.push(Shear { m, r, sign: w.x_sign });
    }
}

pub fn growth_index(p: &PuiseuxPoly) -> Result<GrowthIndex> {
    let (ok, _) = is_superadapted(p)?;
    if !ok {
        return Err(Error::NotSuperadapted);
    }
    let np = newton_polygon_of(p)?;
    let d = newton_distance(&np);
    if d.is_zero() {
        return Err(Error::NotApplicable("nonzero constant term: the origin is not a zero of S".into()));
    }
    let vertex = matches!(bisectrix_classify(&np).tag, BisectrixTag::Vertex { .. });
    let mut g = GrowthIndex::new(Rational::one() / &d, vertex as u8);
    if vertex && d.is_one() {
        let s20 = p.coeff(&int(2), 0);
        let s11 = p.coeff(&int(1), 1);
        let s02 = p.coeff(&int(0), 2);
        let disc = &s11 * &s11 - int(4) * s20 * s02;
        g.morse_hyperbolic_flag = disc.is_positive();
    }
    Ok(g)
}

/// Reduces to superadapted form with the default budget and reads off `(j, p)`.
pub fn analyze_index(p: &PuiseuxPoly) -> Result<(GrowthIndex, AdaptReport)> {
    let rep = to_superadapted(p, default_max_iter(p)?)?;
    Ok((growth_index(&rep.result)?, rep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newton::polygon_subset;
    use crate::rational::rat;
    use proptest::prelude::*;

    fn poly(t: &[(i64, i64, i64, u32)]) -> PuiseuxPoly {
        PuiseuxPoly::from_ints(t)
    }

    #[test]
    fn superadapted_examples() {
        assert_eq!(is_superadapted(&poly(&[(1, 2, 1, 0), (1, 0, 1, 2)])).unwrap(), (true, None));

        let (ok, w) = is_superadapted(&poly(&[(1, 0, 1, 2), (-2, 2, 1, 1), (1, 4, 1, 0)])).unwrap();
        let w = w.unwrap();
        assert!(!ok);
        assert_eq!((w.edge.m, w.root.exact, w.order, w.d), (int(2), Some(int(1)), 2, rat(4, 3)));

        let (ok, w) = is_superadapted(&poly(&[(1, 2, 1, 0), (-1, 0, 1, 2)])).unwrap();
        let w = w.unwrap();
        assert!(!ok);
        assert_eq!(w.edge.m, int(1));
        assert_eq!(w.root.exact.unwrap().abs(), int(1));
        assert_eq!(w.order, 1);

        assert!(is_superadapted(&PuiseuxPoly::zero()).is_err());
    }

    #[test]
    fn reduction_examples() {
        let rep = to_superadapted(&poly(&[(1, 0, 1, 2), (-2, 2, 1, 1), (1, 4, 1, 0)]), 10).unwrap();
        assert_eq!(rep.result, poly(&[(1, 0, 1, 2)]));
        assert_eq!(rep.shears_applied.len(), 1);
        assert_eq!((rep.shears_applied[0].m.clone(), rep.shears_applied[0].r.clone()), (int(2), int(1)));
        assert!(rep.superadapted);

        let rep = to_superadapted(&poly(&[(1, 2, 1, 0), (-1, 0, 1, 2)]), 10).unwrap();
        assert_eq!(rep.shears_applied.len(), 1);
        assert_eq!(rep.result, poly(&[(2, 1, 1, 1), (-1, 0, 1, 2)]));
        let np = newton_polygon_of(&rep.result).unwrap();
        assert!(np.is_vertex(&crate::newton::Point::new(int(1), int(1))));
        let g = growth_index(&rep.result).unwrap();
        assert_eq!((g.j.clone(), g.p, g.morse_hyperbolic_flag), (int(1), 1, true));

        let p = poly(&[(1, 2, 1, 0), (1, 0, 1, 2)]);
        let rep = to_superadapted(&p, 10).unwrap();
        assert!(rep.shears_applied.is_empty());
        assert_eq!(rep.result, p);
    }

    #[test]
    fn reduction_errors() {
        // y^2 - 2 x^2: irrational edge root of order 1 = d
        let e = to_superadapted(&poly(&[(1, 0, 1, 2), (-2, 2, 1, 0)]), 5).unwrap_err();
        assert!(matches!(e, Error::AlgebraicShear(_)));
        // (y^2 - x)^2: fractional m = 1/2 with a double root
        let e = to_superadapted(&poly(&[(1, 0, 1, 4), (-2, 1, 1, 2), (1, 2, 1, 0)]), 5).unwrap_err();
        assert!(matches!(e, Error::NonIntegerShear(_)));
        // (y - x)^3 needs one shear; a zero budget returns the partial report
        let p = poly(&[(1, 0, 1, 3), (-3, 1, 1, 2), (3, 2, 1, 1), (-1, 3, 1, 0)]);
        match to_superadapted(&p, 0).unwrap_err() {
            Error::MaxIterations { partial, .. } => assert_eq!(partial.result, p),
            e => panic!("{e:?}"),
        }
        assert_eq!(to_superadapted(&p, 1).unwrap().result, poly(&[(1, 0, 1, 3)]));
    }

    #[test]
    fn growth_examples() {
        let g = growth_index(&poly(&[(1, 2, 1, 0), (1, 0, 1, 2)])).unwrap();
        assert_eq!((g.j, g.p, g.morse_hyperbolic_flag), (int(1), 0, false));
        let g = growth_index(&poly(&[(1, 2, 1, 2), (1, 5, 1, 0)])).unwrap();
        assert_eq!((g.j, g.p), (rat(1, 2), 1));
        let g = growth_index(&poly(&[(1, 1, 1, 1)])).unwrap();
        assert_eq!((g.j, g.p, g.morse_hyperbolic_flag), (int(1), 1, true));
        let g = growth_index(&poly(&[(1, 0, 1, 2), (-1, 3, 1, 0)])).unwrap();
        assert_eq!((g.j, g.p), (rat(5, 6), 0));
        assert_eq!(
            growth_index(&poly(&[(1, 2, 1, 0), (-1, 0, 1, 2)])),
            Err(Error::NotSuperadapted)
        );
    }

    #[test]
    fn lex_examples() {
        let a = GrowthIndex::new(int(1), 0);
        let b = GrowthIndex::new(int(1), 1);
        assert_eq!(lex_compare(&a, &b), Ordering::Less);
        assert_eq!(lex_compare(&GrowthIndex::new(rat(1, 2), 0), &a), Ordering::Greater);
        assert_eq!(lex_compare(&a, &a.clone()), Ordering::Equal);
    }

    // (y - c x^k)^n + s x^N with small integers
    fn arb_phase() -> impl Strategy<Value = PuiseuxPoly> {
        (-2i64..=2, 1u32..3, 1u32..4, 0i64..2, 3u32..9).prop_map(|(c, k, n, s, big)| {
            let lin = PuiseuxPoly::y().sub(&PuiseuxPoly::monomial(int(c), int(k as i64), 0));
            lin.pow(n).add(&PuiseuxPoly::monomial(int(s), int(big as i64), 0))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn reduction_is_superadapted_and_progresses(p in arb_phase()) {
            let budget = default_max_iter(&p).unwrap();
            let rep = to_superadapted(&p, budget).unwrap();
            prop_assert!(is_superadapted(&rep.result).unwrap().0);
            // replay the shears, checking progress at each step
            let mut cur = p.clone();
            for s in &rep.shears_applied {
                let before = (max_violating_order(&cur).unwrap(), newton_distance(&newton_polygon_of(&cur).unwrap()));
                let c = if s.sign < 0 && s.m.to_integer().to_u32().unwrap() % 2 == 1 { -s.r.clone() } else { s.r.clone() };
                cur = cur.subst_shear(1, &PuiseuxPoly::monomial(c, s.m.clone(), 0)).unwrap();
                let after = (max_violating_order(&cur).unwrap(), newton_distance(&newton_polygon_of(&cur).unwrap()));
                prop_assert!(after.0 < before.0 || after.1 > before.1);
            }
            prop_assert_eq!(cur, rep.result);
        }

        #[test]
        fn index_invariant_under_high_shear(p in arb_phase(), c in -3i64..=3, extra in 1i64..3) {
            let rep = to_superadapted(&p, default_max_iter(&p).unwrap()).unwrap();
            let s = rep.result;
            let np = newton_polygon_of(&s).unwrap();
            let mmax = np.edges.iter().map(|e| e.m.clone()).max().unwrap_or_else(Rational::zero);
            prop_assume!(np.vertices.last().unwrap().b.is_zero());
            let a_max = np.vertices.last().unwrap().a.to_integer().to_i64().unwrap();
            // a shear steeper than every edge and the whole compact part
            let k = mmax.ceil().to_integer().to_i64().unwrap().max(a_max) + extra;
            let g = PuiseuxPoly::monomial(int(c), int(k), 0);
            let t = s.subst_shear(1, &g).unwrap();
            let nt = newton_polygon_of(&t).unwrap();
            prop_assert!(polygon_subset(&np, &nt) && polygon_subset(&nt, &np));
            prop_assert_eq!(growth_index(&s).unwrap(), growth_index(&t).unwrap());
        }
    }

    #[test]
    fn constant_term_has_no_index() {
        assert!(matches!(growth_index(&poly(&[(1, 0, 1, 0), (1, 2, 1, 0)])), Err(Error::NotApplicable(_))));
    }
}
