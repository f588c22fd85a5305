//! Newton polygon of a Puiseux polynomial at the origin, Newton distance,
//! where the bisectrix `a = b` meets the polygon, and edge polynomials.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_poly::PuiseuxPoly;
use crate::rational::{self, int, Rational};
use crate::roots::UPoly;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point {
    #[serde(with = "rational::as_string")]
    pub a: Rational,
    #[serde(with = "rational::as_string")]
    pub b: Rational,
}

impl Point {
    pub fn new(a: Rational, b: Rational) -> Self {
        Point { a, b }
    }
}

/// Compact edge on the line `a + m b = alpha`; `lo` has the smaller `a`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompactEdge {
    pub lo: Point,
    pub hi: Point,
    #[serde(with = "rational::as_string")]
    pub m: Rational,
    #[serde(with = "rational::as_string")]
    pub alpha: Rational,
}

impl CompactEdge {
    fn between(lo: Point, hi: Point) -> Self {
        let m = (&hi.a - &lo.a) / (&lo.b - &hi.b);
        let alpha = &lo.a + &m * &lo.b;
        CompactEdge { lo, hi, m, alpha }
    }

    pub fn on_line(&self, a: &Rational, b: &Rational) -> bool {
        a + &self.m * b == self.alpha
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewtonPolygon {
    pub vertices: Vec<Point>,
    pub edges: Vec<CompactEdge>,
    pub has_vertical_ray: bool,
    pub has_horizontal_ray: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum BisectrixTag {
    Vertex { vertex: Point },
    EdgeInterior { edge: CompactEdge },
    VerticalRayInterior,
    HorizontalRayInterior,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BisectrixClass {
    pub tag: BisectrixTag,
    pub touch_point: Point,
}

fn cross(o: &Point, p: &Point, q: &Point) -> Rational {
    (&p.a - &o.a) * (&q.b - &o.b) - (&p.b - &o.b) * (&q.a - &o.a)
}

impl NewtonPolygon {
    /// Hull of the quadrant closure of a finite support.
    pub fn from_support(points: &[Point]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::ZeroPolynomial);
        }
        // Pareto-minimal points, ascending a (so strictly descending b)
        let mut pts = points.to_vec();
        pts.sort();
        let mut stair: Vec<Point> = Vec::new();
        for p in pts {
            if stair.last().is_none_or(|l| p.b < l.b) {
                stair.push(p);
            }
        }
        let mut hull: Vec<Point> = Vec::new();
        for p in stair {
            while hull.len() >= 2 && !cross(&hull[hull.len() - 2], &hull[hull.len() - 1], &p).is_positive() {
                hull.pop();
            }
            hull.push(p);
        }
        let edges = hull
            .windows(2)
            .map(|w| CompactEdge::between(w[0].clone(), w[1].clone()))
            .collect();
        Ok(NewtonPolygon {
            vertices: hull,
            edges,
            has_vertical_ray: true,
            has_horizontal_ray: true,
        })
    }

    /// Quadrant-closed membership.
    pub fn contains(&self, q: &Point) -> bool {
        let first = &self.vertices[0];
        let last = self.vertices.last().unwrap();
        q.a >= first.a
            && q.b >= last.b
            && self.edges.iter().all(|e| &q.a + &e.m * &q.b >= e.alpha)
    }

    pub fn is_vertex(&self, q: &Point) -> bool {
        self.vertices.iter().any(|v| v == q)
    }

    /// Largest b-coordinate minus smallest, i.e. the b-span of the compact part.
    pub fn b_span(&self) -> Rational {
        &self.vertices[0].b - &self.vertices.last().unwrap().b
    }
}

pub fn newton_polygon_of(p: &PuiseuxPoly) -> Result<NewtonPolygon> {
    let pts: Vec<Point> = p
        .terms()
        .map(|(e, _)| Point::new(e.a.clone(), int(e.b as i64)))
        .collect();
    NewtonPolygon::from_support(&pts)
}

pub fn newton_distance(np: &NewtonPolygon) -> Rational {
    let first = &np.vertices[0];
    let last = np.vertices.last().unwrap();
    let mut d = first.a.clone().max(last.b.clone());
    for e in &np.edges {
        let t = &e.alpha / (Rational::one() + &e.m);
        if t > d {
            d = t;
        }
    }
    d
}

pub fn bisectrix_classify(np: &NewtonPolygon) -> BisectrixClass {
    let d = newton_distance(np);
    let touch = Point::new(d.clone(), d.clone());
    let first = &np.vertices[0];
    let last = np.vertices.last().unwrap();
    let tag = if np.is_vertex(&touch) {
        BisectrixTag::Vertex { vertex: touch.clone() }
    } else if d == first.a && d > first.b {
        BisectrixTag::VerticalRayInterior
    } else if d == last.b && d > last.a {
        BisectrixTag::HorizontalRayInterior
    } else {
        let edge = np
            .edges
            .iter()
            .find(|e| e.lo.a < d && d < e.hi.a)
            .expect("bisectrix touch point lies on some edge")
            .clone();
        BisectrixTag::EdgeInterior { edge }
    };
    BisectrixClass {
        tag,
        touch_point: touch,
    }
}

/// `S_e(x_sign, y)`: the terms on the edge line, evaluated at `x = x_sign`.
pub fn edge_polynomial(p: &PuiseuxPoly, e: &CompactEdge, x_sign: i32) -> Result<UPoly> {
    let mut coeffs: Vec<Rational> = Vec::new();
    for (ex, c) in p.terms() {
        let b = int(ex.b as i64);
        if !e.on_line(&ex.a, &b) {
            continue;
        }
        let mut c = c.clone();
        if x_sign < 0 {
            if !rational::is_integer(&ex.a) {
                return Err(Error::FractionalReflection(rational::fmt(&ex.a)));
            }
            if num_integer::Integer::is_odd(ex.a.numer()) {
                c = -c;
            }
        }
        let i = ex.b as usize;
        if coeffs.len() <= i {
            coeffs.resize(i + 1, Rational::zero());
        }
        coeffs[i] += c;
    }
    Ok(UPoly::new(coeffs))
}

pub fn polygon_subset(np1: &NewtonPolygon, np2: &NewtonPolygon) -> bool {
    np1.vertices.iter().all(|v| np2.contains(v))
}
