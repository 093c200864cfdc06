//! Points in R^n (n <= 3) and the convex regions the quadrature layer clips rays against.

use std::ops::{Add, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// A point or vector in R^n with n in 1..=3, stored inline so it is `Copy`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    c: [f64; MAX_DIM],
    n: usize,
}

impl Point {
    pub fn new(coords: &[f64]) -> Result<Point> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::domain(format!(
                "point dimension {} outside 1..=3",
                coords.len()
            )));
        }
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Point { c, n: coords.len() })
    }

    /// Panics on a bad dimension; for literals in code and tests.
    pub fn of(coords: &[f64]) -> Point {
        Point::new(coords).expect("valid point")
    }

    pub fn x1(x: f64) -> Point {
        Point { c: [x, 0.0, 0.0], n: 1 }
    }

    pub fn zero(n: usize) -> Point {
        assert!((1..=MAX_DIM).contains(&n));
        Point { c: [0.0; MAX_DIM], n }
    }

    pub fn unit(n: usize, axis: usize) -> Point {
        let mut p = Point::zero(n);
        p.c[axis] = 1.0;
        p
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn coords(&self) -> &[f64] {
        &self.c[..self.n]
    }

    pub fn dot(&self, o: &Point) -> f64 {
        debug_assert_eq!(self.n, o.n);
        self.c[0] * o.c[0] + self.c[1] * o.c[1] + self.c[2] * o.c[2]
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(&self, o: &Point) -> f64 {
        (*self - *o).norm()
    }

    pub fn with(&self, axis: usize, v: f64) -> Point {
        let mut p = *self;
        p.c[axis] = v;
        p
    }

    /// Bit pattern usable as a hash key.
    pub fn key(&self) -> [u64; MAX_DIM] {
        [self.c[0].to_bits(), self.c[1].to_bits(), self.c[2].to_bits()]
    }
}

impl Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.c[..self.n][i]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point {
            c: [self.c[0] + o.c[0], self.c[1] + o.c[1], self.c[2] + o.c[2]],
            n: self.n,
        }
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point {
            c: [self.c[0] - o.c[0], self.c[1] - o.c[1], self.c[2] - o.c[2]],
            n: self.n,
        }
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point {
            c: [-self.c[0], -self.c[1], -self.c[2]],
            n: self.n,
        }
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point {
            c: [self.c[0] * k, self.c[1] * k, self.c[2] * k],
            n: self.n,
        }
    }
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Point, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Point::new(&v).map_err(serde::de::Error::custom)
    }
}

/// Axis-aligned box `lo < x < hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Point,
    pub hi: Point,
}

impl BoxDomain {
    pub fn new(lo: Point, hi: Point) -> Result<BoxDomain> {
        if lo.dim() != hi.dim() {
            return Err(Error::domain("box corners have different dimensions"));
        }
        for i in 0..lo.dim() {
            if !(lo[i] < hi[i]) || !lo[i].is_finite() || !hi[i].is_finite() {
                return Err(Error::domain(format!("empty or unbounded box along axis {i}")));
            }
        }
        Ok(BoxDomain { lo, hi })
    }

    pub fn interval(a: f64, b: f64) -> Result<BoxDomain> {
        BoxDomain::new(Point::x1(a), Point::x1(b))
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..self.dim()).all(|i| p[i] > self.lo[i] && p[i] < self.hi[i])
    }

    pub fn contains_closed(&self, p: &Point) -> bool {
        (0..self.dim()).all(|i| p[i] >= self.lo[i] && p[i] <= self.hi[i])
    }

    /// The box grown by `t` on every side.
    pub fn inflate(&self, t: f64) -> BoxDomain {
        let n = self.dim();
        let mut lo = self.lo;
        let mut hi = self.hi;
        for i in 0..n {
            lo = lo.with(i, lo[i] - t);
            hi = hi.with(i, hi[i] + t);
        }
        BoxDomain { lo, hi }
    }

    pub fn center(&self) -> Point {
        (self.lo + self.hi) * 0.5
    }

    pub fn diameter(&self) -> f64 {
        self.hi.dist(&self.lo)
    }
}

/// Integration regions, described only through their intersection with rays.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Whole,
    Ball { center: Point, radius: f64 },
    Box(BoxDomain),
    Complement(Box<Region>),
    Intersection(Vec<Region>),
}

/// Closed radial interval `[lo, hi]` along a ray; `hi` may be infinite.
pub type Span = (f64, f64);

impl Region {
    pub fn ball(center: Point, radius: f64) -> Region {
        Region::Ball { center, radius }
    }

    pub fn outside(self) -> Region {
        Region::Complement(Box::new(self))
    }

    pub fn and(self, other: Region) -> Region {
        match (self, other) {
            (Region::Whole, r) | (r, Region::Whole) => r,
            (Region::Intersection(mut v), r) => {
                v.push(r);
                Region::Intersection(v)
            }
            (a, b) => Region::Intersection(vec![a, b]),
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match self {
            Region::Whole => true,
            Region::Ball { center, radius } => p.dist(center) <= *radius,
            Region::Box(b) => b.contains_closed(p),
            Region::Complement(r) => !r.contains(p),
            Region::Intersection(v) => v.iter().all(|r| r.contains(p)),
        }
    }

    /// Sorted disjoint spans `{r >= 0 : c + r*dir in region}`; `dir` is a unit vector.
    pub fn ray_spans(&self, c: &Point, dir: &Point) -> Vec<Span> {
        match self {
            Region::Whole => vec![(0.0, f64::INFINITY)],
            Region::Ball { center, radius } => {
                let d = *c - *center;
                let p = dir.dot(&d);
                let q = d.dot(&d) - radius * radius;
                let disc = p * p - q;
                if disc <= 0.0 {
                    return vec![];
                }
                let sq = disc.sqrt();
                let (r1, r2) = (-p - sq, -p + sq);
                if r2 <= 0.0 {
                    vec![]
                } else {
                    vec![(r1.max(0.0), r2)]
                }
            }
            Region::Box(b) => {
                let mut t0 = 0.0_f64;
                let mut t1 = f64::INFINITY;
                for i in 0..b.dim() {
                    if dir[i] == 0.0 {
                        if c[i] < b.lo[i] || c[i] > b.hi[i] {
                            return vec![];
                        }
                        continue;
                    }
                    let a = (b.lo[i] - c[i]) / dir[i];
                    let e = (b.hi[i] - c[i]) / dir[i];
                    let (a, e) = if a < e { (a, e) } else { (e, a) };
                    t0 = t0.max(a);
                    t1 = t1.min(e);
                }
                if t1 > t0 {
                    vec![(t0, t1)]
                } else {
                    vec![]
                }
            }
            Region::Complement(r) => {
                let inner = r.ray_spans(c, dir);
                let mut out = Vec::new();
                let mut start = 0.0;
                for (a, b) in inner {
                    if a > start {
                        out.push((start, a));
                    }
                    start = b;
                }
                if start < f64::INFINITY {
                    out.push((start, f64::INFINITY));
                }
                out
            }
            Region::Intersection(v) => {
                let mut acc = vec![(0.0, f64::INFINITY)];
                for r in v {
                    acc = intersect_spans(&acc, &r.ray_spans(c, dir));
                    if acc.is_empty() {
                        break;
                    }
                }
                acc
            }
        }
    }
}

fn intersect_spans(a: &[Span], b: &[Span]) -> Vec<Span> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if hi > lo {
            out.push((lo, hi));
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_ray_from_inside_and_outside() {
        let r = Region::ball(Point::of(&[0.0, 0.0]), 1.0);
        let s = r.ray_spans(&Point::of(&[0.0, 0.0]), &Point::of(&[1.0, 0.0]));
        assert_eq!(s, vec![(0.0, 1.0)]);
        let s = r.ray_spans(&Point::of(&[-3.0, 0.0]), &Point::of(&[1.0, 0.0]));
        assert!((s[0].0 - 2.0).abs() < 1e-15 && (s[0].1 - 4.0).abs() < 1e-15);
        assert!(r
            .ray_spans(&Point::of(&[-3.0, 0.0]), &Point::of(&[-1.0, 0.0]))
            .is_empty());
    }

    #[test]
    fn complement_of_interval_splits_ray() {
        let b = BoxDomain::interval(-1.0, 1.0).unwrap();
        let r = Region::Box(b).outside();
        let s = r.ray_spans(&Point::x1(-2.0), &Point::x1(1.0));
        assert_eq!(s, vec![(0.0, 1.0), (3.0, f64::INFINITY)]);
    }

    #[test]
    fn lens_is_intersection_of_balls() {
        let lens = Region::ball(Point::x1(0.0), 1.0).and(Region::ball(Point::x1(1.5), 1.0));
        let s = lens.ray_spans(&Point::x1(0.0), &Point::x1(1.0));
        assert_eq!(s, vec![(0.5, 1.0)]);
    }
}
