//! Planar geometry for bird's-eye-view shape evaluation.
//!
//! Everything here works on desk-scale coordinates (meters, |x| < 1e4) with
//! f64 arithmetic. Polygons are simple and counter-clockwise; boxes carry a
//! center, positive extents, and a heading wrapped to (-pi, pi].

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use core::ops::{Add, Mul, Neg, Sub};

use crate::math;

/// Tolerance for boundary-inclusive containment tests, in meters.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Intersection areas below this many square meters are treated as empty.
pub const SLIVER_AREA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeomError {
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("non-convex polygon where a convex one is required")]
    NonConvexInput,
    #[error("invalid polygon: {0}")]
    InvalidPolygon(&'static str),
    #[error("invalid box: {0}")]
    InvalidBox(&'static str),
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a - TAU * math::round(a / TAU);
    if r <= -PI {
        r += TAU;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    /// Panics on non-finite components; scene loaders validate before calling.
    pub fn new(x: f64, y: f64) -> Self {
        assert!(x.is_finite() && y.is_finite(), "non-finite coordinate");
        Vec2 { x, y }
    }

    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// 2D scalar cross product (z component of the 3D cross).
    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        math::sqrt(self.dot(self))
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        if n < 1e-12 {
            None
        } else {
            Some(Vec2 { x: self.x / n, y: self.y / n })
        }
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = (math::sin(angle), math::cos(angle));
        Vec2 { x: c * self.x - s * self.y, y: s * self.x + c * self.y }
    }

    pub fn from_angle(angle: f64) -> Vec2 {
        Vec2 { x: math::cos(angle), y: math::sin(angle) }
    }

    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2 { x: -self.y, y: self.x }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2 { x: self.x + o.x, y: self.y + o.y }
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2 { x: self.x - o.x, y: self.y - o.y }
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2 { x: -self.x, y: -self.y }
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, k: f64) -> Vec2 {
        Vec2 { x: self.x * k, y: self.y * k }
    }
}

/// An infinite line through `origin` with unit `direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line2 {
    origin: Vec2,
    direction: Vec2,
}

impl Line2 {
    pub fn new(origin: Vec2, direction: Vec2) -> Result<Self, GeomError> {
        let direction = direction
            .normalized()
            .ok_or(GeomError::DegenerateInput("line direction must be nonzero"))?;
        Ok(Line2 { origin, direction })
    }

    pub fn from_angle(origin: Vec2, angle: f64) -> Self {
        Line2 { origin, direction: Vec2::from_angle(angle) }
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn direction(&self) -> Vec2 {
        self.direction
    }

    /// Positive on the left of the direction, negative on the right.
    #[inline]
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        self.direction.cross(p - self.origin)
    }
}

pub fn point_line_distance(p: Vec2, l: &Line2) -> f64 {
    math::abs(l.signed_distance(p))
}

/// Minimum distance from segment [a, b] to an infinite line; 0 if they cross.
pub fn segment_line_distance(a: Vec2, b: Vec2, l: &Line2) -> f64 {
    let sa = l.signed_distance(a);
    let sb = l.signed_distance(b);
    if sa * sb <= 0.0 {
        0.0
    } else {
        math::abs(sa).min(math::abs(sb))
    }
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 < 1e-24 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// A simple polygon with counter-clockwise winding and positive area.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon2 {
    vertices: Vec<Vec2>,
}

impl Polygon2 {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self, GeomError> {
        if vertices.len() < 3 {
            return Err(GeomError::InvalidPolygon("fewer than three vertices"));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(GeomError::InvalidPolygon("non-finite vertex"));
        }
        if signed_area(&vertices) <= 0.0 {
            return Err(GeomError::InvalidPolygon("winding must be counter-clockwise"));
        }
        if !is_simple(&vertices) {
            return Err(GeomError::InvalidPolygon("self-intersecting outline"));
        }
        Ok(Polygon2 { vertices })
    }

    /// For outlines that are simple and counter-clockwise by construction.
    pub(crate) fn new_unchecked(vertices: Vec<Vec2>) -> Self {
        debug_assert!(signed_area(&vertices) > 0.0);
        Polygon2 { vertices }
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| (b - a).norm()).sum()
    }

    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            let e1 = b - a;
            let e2 = c - b;
            if e1.cross(e2) < -1e-9 * e1.norm() * e2.norm() {
                return false;
            }
        }
        true
    }

    /// Boundary-inclusive within [`BOUNDARY_TOL`]; even-odd rule inside.
    pub fn contains(&self, p: Vec2) -> bool {
        for (a, b) in self.edges() {
            if point_segment_distance(p, a, b) <= BOUNDARY_TOL {
                return true;
            }
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Approximately `n` points spaced by arc length along the outline.
    /// Every vertex is included exactly, so extremal points survive sampling.
    pub fn perimeter_samples(&self, n: usize) -> Vec<Vec2> {
        let perimeter = self.perimeter();
        let mut out = Vec::with_capacity(n + self.vertices.len());
        for (a, b) in self.edges() {
            let len = (b - a).norm();
            let k = ((n as f64 * len / perimeter) as usize).max(1);
            for j in 0..k {
                out.push(a + (b - a) * (j as f64 / k as f64));
            }
        }
        out
    }
}

fn signed_area(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += vertices[i].cross(vertices[(i + 1) % n]);
    }
    acc / 2.0
}

fn is_simple(vertices: &[Vec2]) -> bool {
    let n = vertices.len();
    // reject zero-length edges first so adjacency reasoning below holds
    for i in 0..n {
        if vertices[i] == vertices[(i + 1) % n] {
            return false;
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            // skip adjacent edges (they share exactly one endpoint)
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = (d - c).cross(a - c);
    let d2 = (d - c).cross(b - c);
    let d3 = (b - a).cross(c - a);
    let d4 = (b - a).cross(d - a);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Convex hull by Andrew's monotone chain; collinear boundary points are
/// dropped, so every hull vertex is a strict corner.
pub fn convex_hull(points: &[Vec2]) -> Result<Polygon2, GeomError> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_unstable_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return Err(GeomError::DegenerateInput("fewer than three distinct points"));
    }

    fn sweep<'a>(points: impl Iterator<Item = &'a Vec2>) -> Vec<Vec2> {
        let mut chain: Vec<Vec2> = Vec::new();
        for &p in points {
            while chain.len() >= 2 {
                let o = chain[chain.len() - 2];
                let q = chain[chain.len() - 1];
                if (q - o).cross(p - o) <= 0.0 {
                    chain.pop();
                } else {
                    break;
                }
            }
            chain.push(p);
        }
        chain.pop();
        chain
    }

    let mut hull = sweep(pts.iter());
    hull.extend(sweep(pts.iter().rev()));
    // Near-collinear clouds can survive the strict-turn sweeps as slivers at
    // the shoelace cancellation scale; their winding is not even reliably
    // counter-clockwise, and no later rigid motion could preserve it. Treat
    // anything that thin as collinear.
    let scale = hull
        .iter()
        .fold(0.0f64, |m, v| m.max(math::abs(v.x)).max(math::abs(v.y)));
    if hull.len() < 3 || signed_area(&hull) <= 1e-10 * scale * scale {
        return Err(GeomError::DegenerateInput("all points collinear"));
    }
    Ok(Polygon2::new_unchecked(hull))
}

/// Area of the intersection of two convex polygons (Sutherland-Hodgman
/// clipping). Slivers below [`SLIVER_AREA`] collapse to zero.
pub fn polygon_intersection_area(p: &Polygon2, q: &Polygon2) -> Result<f64, GeomError> {
    if !p.is_convex() || !q.is_convex() {
        return Err(GeomError::NonConvexInput);
    }
    let mut cur: Vec<Vec2> = p.vertices().to_vec();
    for (a, b) in q.edges() {
        if cur.is_empty() {
            break;
        }
        let edge = b - a;
        let mut next = Vec::with_capacity(cur.len() + 2);
        for i in 0..cur.len() {
            let s = cur[i];
            let e = cur[(i + 1) % cur.len()];
            let ds = edge.cross(s - a);
            let de = edge.cross(e - a);
            if ds >= 0.0 {
                next.push(s);
            }
            if (ds >= 0.0) != (de >= 0.0) {
                let t = ds / (ds - de);
                next.push(s + (e - s) * t);
            }
        }
        cur = next;
    }
    if cur.len() < 3 {
        return Ok(0.0);
    }
    let area = signed_area(&cur).max(0.0);
    Ok(if area < SLIVER_AREA { 0.0 } else { area })
}

/// An oriented rectangle in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox2 {
    center: Vec2,
    length: f64,
    width: f64,
    heading: f64,
}

impl OrientedBox2 {
    pub fn new(center: Vec2, length: f64, width: f64, heading: f64) -> Result<Self, GeomError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(GeomError::InvalidBox("length must be positive and finite"));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(GeomError::InvalidBox("width must be positive and finite"));
        }
        if !heading.is_finite() {
            return Err(GeomError::InvalidBox("heading must be finite"));
        }
        Ok(OrientedBox2 { center, length, width, heading: wrap_angle(heading) })
    }

    pub fn center(&self) -> Vec2 {
        self.center
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    /// Corners in counter-clockwise order starting at the rear-right one.
    pub fn corners(&self) -> [Vec2; 4] {
        let dir = Vec2::from_angle(self.heading);
        let u = dir * (self.length / 2.0);
        let v = dir.perp() * (self.width / 2.0);
        [
            self.center - u - v,
            self.center + u - v,
            self.center + u + v,
            self.center - u + v,
        ]
    }

    pub fn footprint(&self) -> Polygon2 {
        Polygon2::new_unchecked(self.corners().to_vec())
    }

    /// Both planar extents multiplied by `k` (> 0), pose unchanged.
    pub fn scaled(&self, k: f64) -> OrientedBox2 {
        assert!(k.is_finite() && k > 0.0, "scale factor must be positive");
        OrientedBox2 { length: self.length * k, width: self.width * k, ..*self }
    }

    /// Into box coordinates: +x along heading, origin at the center.
    pub fn to_box_frame(&self, p: Vec2) -> Vec2 {
        (p - self.center).rotated(-self.heading)
    }

    pub fn from_box_frame(&self, q: Vec2) -> Vec2 {
        q.rotated(self.heading) + self.center
    }

    /// Boundary-inclusive containment with an extra margin added to both
    /// half-extents (used for padded crops and scaled footprints).
    pub fn contains_padded(&self, p: Vec2, pad: f64) -> bool {
        let q = self.to_box_frame(p);
        math::abs(q.x) <= self.length / 2.0 + pad + BOUNDARY_TOL
            && math::abs(q.y) <= self.width / 2.0 + pad + BOUNDARY_TOL
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.contains_padded(p, 0.0)
    }
}

/// Bird's-eye-view IoU of two oriented boxes, in [0, 1].
pub fn box_iou_bev(a: &OrientedBox2, b: &OrientedBox2) -> f64 {
    let fa = a.footprint();
    let fb = b.footprint();
    let inter = polygon_intersection_area(&fa, &fb)
        .expect("box footprints are convex");
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Rotation about the origin followed by a translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidMotion2 {
    pub rotation: f64,
    pub translation: Vec2,
}

impl RigidMotion2 {
    pub fn identity() -> Self {
        RigidMotion2 { rotation: 0.0, translation: Vec2::ZERO }
    }

    #[inline]
    pub fn apply(&self, p: Vec2) -> Vec2 {
        p.rotated(self.rotation) + self.translation
    }

    pub fn apply_polygon(&self, poly: &Polygon2) -> Polygon2 {
        // rigid maps preserve simplicity and winding
        Polygon2::new_unchecked(poly.vertices().iter().map(|&v| self.apply(v)).collect())
    }

    pub fn inverse(&self) -> Self {
        RigidMotion2 {
            rotation: wrap_angle(-self.rotation),
            translation: (-self.translation).rotated(-self.rotation),
        }
    }

    /// The motion equivalent to applying `self` first and `after` second.
    pub fn then(&self, after: &RigidMotion2) -> Self {
        RigidMotion2 {
            rotation: wrap_angle(self.rotation + after.rotation),
            translation: after.apply(self.translation),
        }
    }
}

/// The rigid motion carrying the pose of `a` onto the pose of `b`, so that
/// each corner of `a` lands on the matching corner of `b`.
pub fn rigid_motion_between(a: &OrientedBox2, b: &OrientedBox2) -> RigidMotion2 {
    let rotation = wrap_angle(b.heading - a.heading);
    let translation = b.center - a.center.rotated(rotation);
    RigidMotion2 { rotation, translation }
}

/// Object outline used for support-distance queries: either raw boundary
/// samples or a closed polygon.
#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    Points(Vec<Vec2>),
    Poly(Polygon2),
}

impl Boundary {
    pub fn from_points(points: Vec<Vec2>) -> Result<Self, GeomError> {
        if points.is_empty() {
            return Err(GeomError::DegenerateInput("empty point set"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(GeomError::DegenerateInput("non-finite boundary point"));
        }
        Ok(Boundary::Points(points))
    }

    pub fn from_polygon(poly: Polygon2) -> Self {
        Boundary::Poly(poly)
    }

    pub fn len(&self) -> usize {
        match self {
            Boundary::Points(p) => p.len(),
            Boundary::Poly(p) => p.vertices().len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn apply_motion(m: &RigidMotion2, b: &Boundary) -> Boundary {
    match b {
        Boundary::Points(pts) => Boundary::Points(pts.iter().map(|&p| m.apply(p)).collect()),
        Boundary::Poly(poly) => Boundary::Poly(m.apply_polygon(poly)),
    }
}
