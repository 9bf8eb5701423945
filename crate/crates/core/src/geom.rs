//! Planar primitives: points, hulls and polygon predicates.
//!
//! All coordinates are image coordinates (origin top-left, y down). Polygon
//! orientation is reported algebraically: "counter-clockwise" means positive
//! shoelace area in (x, y) as stored, which appears clockwise on screen.

use std::ops::{Add, Mul, Neg, Sub};

use num_rational::BigRational;
use num_traits::Num;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Default)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T> Point2<T> {
    pub const fn new(x: T, y: T) -> Self {
        Point2 { x, y }
    }
}

impl<T: Scalar> Point2<T> {
    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn dist(self, o: Self) -> T {
        (self - o).norm()
    }

    /// Rotated by +90 degrees: (x, y) -> (-y, x).
    #[inline]
    pub fn perp(self) -> Self {
        Point2::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn cast<U: Scalar>(self) -> Point2<U> {
        Point2::new(U::of(self.x.as_f64()), U::of(self.y.as_f64()))
    }
}

impl<T: Add<Output = T>> Add for Point2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Sub<Output = T>> Sub for Point2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Mul<Output = T> + Copy> Mul<T> for Point2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Point2::new(self.x * s, self.y * s)
    }
}

impl<T: Neg<Output = T>> Neg for Point2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Point2::new(-self.x, -self.y)
    }
}

fn orient<S>(o: &Point2<S>, a: &Point2<S>, b: &Point2<S>) -> S
where
    S: Num + Clone,
{
    let ax = a.x.clone() - o.x.clone();
    let ay = a.y.clone() - o.y.clone();
    let bx = b.x.clone() - o.x.clone();
    let by = b.y.clone() - o.y.clone();
    ax * by - ay * bx
}

/// Andrew's monotone chain over any ordered ring.
///
/// Returns indices into `points` of the hull vertices in counter-clockwise
/// order starting from the lexicographically smallest point. Collinear and
/// duplicate points are dropped. Fewer than three non-collinear inputs give a
/// degenerate (0, 1 or 2 vertex) answer.
pub fn convex_hull_indices<S>(points: &[Point2<S>]) -> Vec<usize>
where
    S: Num + Clone + PartialOrd,
{
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&points[i], &points[j]);
        a.x.partial_cmp(&b.x).unwrap().then_with(|| a.y.partial_cmp(&b.y).unwrap())
    });
    order.dedup_by(|i, j| points[*i] == points[*j]);
    if order.len() < 3 {
        return order;
    }

    let zero = S::zero();
    let mut hull: Vec<usize> = Vec::with_capacity(order.len() + 1);
    for &i in &order {
        while hull.len() >= 2
            && orient(&points[hull[hull.len() - 2]], &points[hull[hull.len() - 1]], &points[i]) <= zero
        {
            hull.pop();
        }
        hull.push(i);
    }
    let lower_len = hull.len() + 1;
    for &i in order.iter().rev().skip(1) {
        while hull.len() >= lower_len
            && orient(&points[hull[hull.len() - 2]], &points[hull[hull.len() - 1]], &points[i]) <= zero
        {
            hull.pop();
        }
        hull.push(i);
    }
    hull.pop();
    hull
}

/// Convex hull with exact orientation predicates.
///
/// Every input float is lifted to its exact rational value, so the result is
/// the true hull of the given floating-point points, independent of rounding.
pub fn convex_hull_exact<T: Scalar>(points: &[Point2<T>]) -> Vec<Point2<T>> {
    let exact: Vec<Point2<BigRational>> = points.iter().map(|p| Point2::new(p.x.to_exact(), p.y.to_exact())).collect();
    convex_hull_indices(&exact).into_iter().map(|i| points[i]).collect()
}

/// Signed shoelace area; positive for counter-clockwise vertex order.
pub fn signed_area<T: Scalar>(poly: &[Point2<T>]) -> T {
    if poly.len() < 3 {
        return T::zero();
    }
    let mut acc = T::zero();
    for (i, &a) in poly.iter().enumerate() {
        let b = poly[(i + 1) % poly.len()];
        acc = acc + a.cross(b);
    }
    acc / T::of(2.0)
}

/// Inside-or-on test for a counter-clockwise convex polygon.
///
/// Points within a few ulps of an edge (relative to the polygon's coordinate
/// magnitude) count as on the boundary.
pub fn point_in_convex<T: Scalar>(poly: &[Point2<T>], pt: Point2<T>) -> bool {
    if poly.len() < 3 {
        return false;
    }
    let scale = poly.iter().fold(pt.x.abs().max(pt.y.abs()), |m, p| m.max(p.x.abs()).max(p.y.abs())) + T::one();
    let tol = T::of(16.0) * T::epsilon() * scale;
    for (i, &a) in poly.iter().enumerate() {
        let b = poly[(i + 1) % poly.len()];
        let e = b - a;
        let c = e.cross(pt - a);
        if c < T::zero() && c < -tol * e.norm() {
            return false;
        }
    }
    true
}

/// Even-odd point-in-polygon test for simple (possibly non-convex) polygons.
///
/// Uses the half-open crossing rule, so a point exactly on an edge is
/// classified consistently for polygons that share that edge.
pub fn point_in_polygon<T: Scalar>(poly: &[Point2<T>], pt: Point2<T>) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > pt.y) != (b.y > pt.y) {
            let x_cross = a.x + (pt.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if pt.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Euclidean distance from `p` to the closed segment `a`–`b`.
pub fn point_segment_distance<T: Scalar>(p: Point2<T>, a: Point2<T>, b: Point2<T>) -> T {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2.is_zero() {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).max(T::zero()).min(T::one());
    p.dist(a + ab * t)
}

/// Distance from `p` to a polyline; a single vertex is treated as a point.
pub fn point_polyline_distance<T: Scalar>(p: Point2<T>, line: &[Point2<T>]) -> T {
    match line {
        [] => T::infinity(),
        [a] => p.dist(*a),
        _ => line.windows(2).map(|w| point_segment_distance(p, w[0], w[1])).fold(T::infinity(), T::min),
    }
}
