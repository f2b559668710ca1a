//! Two-dimensional polytopes in exact rational arithmetic.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::power::Rational;

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Point {
    pub d1: Rational,
    pub d2: Rational,
}

impl Point {
    pub fn new(d1: Rational, d2: Rational) -> Self {
        Point { d1, d2 }
    }
}

/// `a₁·d₁ + a₂·d₂ ≤ b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawHalfPlane")]
pub struct HalfPlane {
    a1: Rational,
    a2: Rational,
    b: Rational,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHalfPlane {
    a1: Rational,
    a2: Rational,
    b: Rational,
}

impl TryFrom<RawHalfPlane> for HalfPlane {
    type Error = Error;
    fn try_from(r: RawHalfPlane) -> Result<Self> {
        HalfPlane::new(r.a1, r.a2, r.b)
    }
}

impl HalfPlane {
    pub fn new(a1: Rational, a2: Rational, b: Rational) -> Result<Self> {
        if a1.is_zero() && a2.is_zero() {
            return Err(Error::ZeroNormal);
        }
        Ok(HalfPlane { a1, a2, b })
    }

    pub fn a1(&self) -> Rational {
        self.a1
    }

    pub fn a2(&self) -> Rational {
        self.a2
    }

    pub fn b(&self) -> Rational {
        self.b
    }

    pub fn value(&self, p: Point) -> Rational {
        self.a1 * p.d1 + self.a2 * p.d2
    }

    pub fn contains(&self, p: Point) -> bool {
        self.value(p) <= self.b
    }

    pub fn is_tight(&self, p: Point) -> bool {
        self.value(p) == self.b
    }
}

/// `d₁ ≥ 0`, `d₂ ≥ 0`, `d₁ ≤ 2`, `d₂ ≤ 3`, `d₁/2 + d₂/3 ≤ 3/2`, `d₁ + d₂ ≤ 34/9`.
pub fn theorem5_region() -> Vec<HalfPlane> {
    let z = Rational::ZERO;
    let one = Rational::ONE;
    [
        (-one, z, z),
        (z, -one, z),
        (one, z, Rational::integer(2)),
        (z, one, Rational::integer(3)),
        (q(1, 2), q(1, 3), q(3, 2)),
        (one, one, q(34, 9)),
    ]
    .into_iter()
    .map(|(a1, a2, b)| HalfPlane::new(a1, a2, b).expect("non-zero normals"))
    .collect()
}

pub fn contains(region: &[HalfPlane], p: Point) -> bool {
    region.iter().all(|h| h.contains(p))
}

fn intersect(h: &HalfPlane, k: &HalfPlane) -> Option<Point> {
    let det = h.a1 * k.a2 - h.a2 * k.a1;
    if det.is_zero() {
        return None;
    }
    Some(Point::new((h.b * k.a2 - h.a2 * k.b) / det, (h.a1 * k.b - h.b * k.a1) / det))
}

/// Fourier–Motzkin elimination of `d₂`, then an interval check on `d₁`.
pub fn is_feasible(region: &[HalfPlane]) -> bool {
    let mut one_d: Vec<(Rational, Rational)> = Vec::new();
    let (mut up, mut down) = (Vec::new(), Vec::new());
    for h in region {
        match h.a2.cmp(&Rational::ZERO) {
            Ordering::Equal => one_d.push((h.a1, h.b)),
            Ordering::Greater => up.push(h),
            Ordering::Less => down.push(h),
        }
    }
    for u in &up {
        for d in &down {
            // u/u.a2 − d/d.a2 eliminates d₂ (d.a2 < 0).
            let su = Rational::ONE / u.a2;
            let sd = -Rational::ONE / d.a2;
            one_d.push((u.a1 * su + d.a1 * sd, u.b * su + d.b * sd));
        }
    }
    let mut lo: Option<Rational> = None;
    let mut hi: Option<Rational> = None;
    for (a, b) in one_d {
        match a.cmp(&Rational::ZERO) {
            Ordering::Equal if b < Rational::ZERO => return false,
            Ordering::Equal => {}
            Ordering::Greater => hi = Some(hi.map_or(b / a, |v| v.min(b / a))),
            Ordering::Less => lo = Some(lo.map_or(b / a, |v| v.max(b / a))),
        }
    }
    !matches!((lo, hi), (Some(l), Some(h)) if l > h)
}

/// A non-zero direction `r` with `a·r ≤ 0` for every half-plane.
fn recession_direction(region: &[HalfPlane]) -> Option<Point> {
    if region.is_empty() {
        return Some(Point::new(Rational::ONE, Rational::ZERO));
    }
    region
        .iter()
        .flat_map(|h| [Point::new(-h.a2, h.a1), Point::new(h.a2, -h.a1)])
        .find(|r| region.iter().all(|h| h.a1 * r.d1 + h.a2 * r.d2 <= Rational::ZERO))
}

fn cross(o: Point, a: Point, b: Point) -> Rational {
    (a.d1 - o.d1) * (b.d2 - o.d2) - (a.d2 - o.d2) * (b.d1 - o.d1)
}

/// Half-plane index: upper (0) or lower (1) relative to the centre, exact.
fn half(v: Point) -> u8 {
    if v.d2 > Rational::ZERO || (v.d2.is_zero() && v.d1 > Rational::ZERO) {
        0
    } else {
        1
    }
}

/// Extreme points in counter-clockwise order, starting from the lowest-leftmost.
pub fn vertices(region: &[HalfPlane]) -> Result<Vec<Point>> {
    if !is_feasible(region) {
        return Err(Error::EmptyRegion);
    }
    if recession_direction(region).is_some() {
        return Err(Error::Unbounded);
    }
    let mut pts = Vec::new();
    for (i, h) in region.iter().enumerate() {
        for k in &region[i + 1..] {
            if let Some(p) = intersect(h, k) {
                if contains(region, p) {
                    pts.push(p);
                }
            }
        }
    }
    pts.sort();
    pts.dedup();
    if pts.len() <= 2 {
        return Ok(pts);
    }
    let n = Rational::integer(pts.len() as i64);
    let centre = Point::new(
        pts.iter().map(|p| p.d1).sum::<Rational>() / n,
        pts.iter().map(|p| p.d2).sum::<Rational>() / n,
    );
    let rel = |p: &Point| Point::new(p.d1 - centre.d1, p.d2 - centre.d2);
    pts.sort_by(|a, b| {
        let (ra, rb) = (rel(a), rel(b));
        half(ra).cmp(&half(rb)).then_with(|| cross(centre, *b, *a).cmp(&Rational::ZERO))
    });
    let start = pts.iter().enumerate().min_by_key(|(_, p)| (p.d2, p.d1)).map(|(i, _)| i).unwrap_or(0);
    pts.rotate_left(start);
    Ok(pts)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub vertices: Vec<Point>,
    /// Indices of the vertices where each half-plane is tight.
    pub tight: Vec<Vec<usize>>,
    /// Half-planes that support no edge.
    pub redundant: Vec<bool>,
}

pub fn summarize(region: &[HalfPlane]) -> Result<RegionSummary> {
    let vertices = vertices(region)?;
    let tight: Vec<Vec<usize>> =
        region.iter().map(|h| (0..vertices.len()).filter(|&i| h.is_tight(vertices[i])).collect()).collect();
    let redundant = tight.iter().map(|t| t.len() < 2).collect();
    Ok(RegionSummary { vertices, tight, redundant })
}

/// Membership in the convex hull of counter-clockwise `vertices`.
pub fn hull_contains(vertices: &[Point], p: Point) -> bool {
    match vertices.len() {
        0 => false,
        1 => vertices[0] == p,
        n => (0..n).all(|i| cross(vertices[i], vertices[(i + 1) % n], p) >= Rational::ZERO),
    }
}
