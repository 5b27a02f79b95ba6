//! Planar geometric primitives: vectors, canonical angles, convex sets,
//! distances, and containment predicates.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// Machine slack added to tolerance comparisons so that exact-boundary
/// predicates (e.g. a set contains itself at zero tolerance) are stable.
const PREDICATE_SLACK: f64 = 1e-12;

/// Area tolerance below which consecutive polygon vertices are treated as
/// collinear and merged.
const COLLINEAR_AREA_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("zero-length vector has no direction")]
    ZeroVector,
    #[error("coordinates must be finite")]
    NonFinite,
    #[error("radius must be nonnegative, got {0}")]
    NegativeRadius(f64),
    #[error("point set must be nonempty")]
    Empty,
    #[error("vertices do not describe a convex polygon in counterclockwise order")]
    NotConvex,
}

/// A point or displacement in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Perp product: positive when `other` lies counterclockwise of `self`.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// Wrap an angle into the canonical interval `[-pi, pi)`.
pub fn wrap_angle(radians: f64) -> f64 {
    let w = (radians + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// An orientation angle in radians, kept canonical in `[-pi, pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Angle(f64);

impl Angle {
    pub fn new(radians: f64) -> Self {
        Angle(wrap_angle(radians))
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// Unit vector pointing along the angle: `(cos t, sin t)`.
    pub fn heading_vector(self) -> Vec2 {
        Vec2::new(self.0.cos(), self.0.sin())
    }

    /// Unit vector normal to the heading, a quarter turn counterclockwise:
    /// `(-sin t, cos t)`.
    pub fn normal_vector(self) -> Vec2 {
        Vec2::new(-self.0.sin(), self.0.cos())
    }
}

/// Rotate `v` counterclockwise by `theta` radians.
pub fn rotate(theta: f64, v: Vec2) -> Vec2 {
    let (s, c) = theta.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Signed counterclockwise angle from `u` to `v`, in `[-pi, pi)`.
pub fn angle_between(u: Vec2, v: Vec2) -> Result<f64, GeomError> {
    if u == Vec2::ZERO || v == Vec2::ZERO {
        return Err(GeomError::ZeroVector);
    }
    Ok(wrap_angle(u.cross(v).atan2(u.dot(v))))
}

/// A closed disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center: Vec2,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Vec2, radius: f64) -> Result<Self, GeomError> {
        if !center.is_finite() || !radius.is_finite() {
            return Err(GeomError::NonFinite);
        }
        if radius < 0.0 {
            return Err(GeomError::NegativeRadius(radius));
        }
        Ok(Disk { center, radius })
    }
}

/// A bounded planar set used for motion prediction and collision queries.
///
/// `Disk`, `Polygon`, and `ConeHull` are convex. `PointChain` is a polyline
/// (generally non-convex) used to represent sampled reachable sets; distance
/// queries treat it as the union of its segments.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexSet {
    Disk(Disk),
    /// Counterclockwise, strictly convex after collinear-vertex merging.
    /// Degenerate hulls with one (point) or two (segment) vertices are
    /// permitted.
    Polygon(Vec<Vec2>),
    /// Convex hull of an apex point and a disk.
    ConeHull {
        apex: Vec2,
        disk: Disk,
    },
    PointChain(Vec<Vec2>),
}

impl ConvexSet {
    pub fn disk(center: Vec2, radius: f64) -> Result<Self, GeomError> {
        Ok(ConvexSet::Disk(Disk::new(center, radius)?))
    }

    /// Convex hull of the given points (counterclockwise), merging collinear
    /// and duplicate vertices. Accepts any nonempty finite point set.
    pub fn convex_hull(points: &[Vec2]) -> Result<Self, GeomError> {
        if points.is_empty() {
            return Err(GeomError::Empty);
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        Ok(ConvexSet::Polygon(convex_hull_ccw(points)))
    }

    /// Polygon from vertices that must already describe a convex shape.
    /// The winding may be either direction; the result is counterclockwise.
    /// Errors if the hull of the vertices drops a non-collinear vertex.
    pub fn convex_polygon(vertices: &[Vec2]) -> Result<Self, GeomError> {
        let hull = match Self::convex_hull(vertices)? {
            ConvexSet::Polygon(h) => h,
            _ => unreachable!(),
        };
        // Every input vertex must lie on the hull boundary, otherwise the
        // input was genuinely non-convex.
        if hull.len() >= 3 {
            for v in vertices {
                let depth = hull_edges(&hull)
                    .map(|(a, b)| {
                        let e = b - a;
                        e.cross(*v - a) / e.norm()
                    })
                    .fold(f64::INFINITY, f64::min);
                if depth > COLLINEAR_AREA_TOL {
                    return Err(GeomError::NotConvex);
                }
            }
        }
        Ok(ConvexSet::Polygon(hull))
    }

    pub fn cone_hull(apex: Vec2, disk: Disk) -> Result<Self, GeomError> {
        if !apex.is_finite() {
            return Err(GeomError::NonFinite);
        }
        Ok(ConvexSet::ConeHull { apex, disk })
    }

    pub fn point_chain(points: Vec<Vec2>) -> Result<Self, GeomError> {
        if points.is_empty() {
            return Err(GeomError::Empty);
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        Ok(ConvexSet::PointChain(points))
    }

    /// Minimum Euclidean distance from `p` to the set; zero iff `p` is in
    /// the set (on the chain, for `PointChain`).
    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        match self {
            ConvexSet::Disk(d) => (p.distance(d.center) - d.radius).max(0.0),
            ConvexSet::Polygon(verts) => point_hull_distance(p, verts),
            ConvexSet::ConeHull { apex, disk } => match cone_triangle(*apex, *disk) {
                Some(tri) => point_hull_distance(p, &tri)
                    .min((p.distance(disk.center) - disk.radius).max(0.0)),
                None => (p.distance(disk.center) - disk.radius).max(0.0),
            },
            ConvexSet::PointChain(pts) => chain_distance(p, pts),
        }
    }

    /// Minimum distance between two sets; zero iff they intersect.
    pub fn distance_to_set(&self, other: &ConvexSet) -> f64 {
        let mut best = f64::INFINITY;
        for a in self.prims() {
            for b in other.prims() {
                best = best.min(prim_distance(&a, &b));
                if best == 0.0 {
                    return 0.0;
                }
            }
        }
        best
    }

    /// True iff `inner` is contained in this set dilated by `tol`.
    ///
    /// Hull-like inner parts are checked vertex-wise (sufficient because the
    /// outer set is convex); inner disks are checked by the signed depth of
    /// their center.
    pub fn contains_set(&self, inner: &ConvexSet, tol: f64) -> bool {
        for prim in inner.prims() {
            match prim {
                Prim::Hull { pts, .. } => {
                    for p in pts.iter() {
                        if self.distance_to_point(*p) > tol + PREDICATE_SLACK {
                            return false;
                        }
                    }
                }
                Prim::Disk(d) => {
                    let depth = self.signed_depth(d.center);
                    if depth >= 0.0 {
                        if depth < d.radius - tol - PREDICATE_SLACK {
                            return false;
                        }
                    } else {
                        // Center outside: bound the farthest point of the
                        // disk conservatively.
                        if self.distance_to_point(d.center) + d.radius > tol + PREDICATE_SLACK {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// Least signed depth of `inner` inside this set: nonnegative iff
    /// `inner` is contained. Exact while `inner` stays inside; a lower bound
    /// once part of it leaves.
    pub fn containment_depth(&self, inner: &ConvexSet) -> f64 {
        let mut depth = f64::INFINITY;
        for prim in inner.prims() {
            let d = match prim {
                Prim::Hull { pts, .. } => pts
                    .iter()
                    .map(|p| self.signed_depth(*p))
                    .fold(f64::INFINITY, f64::min),
                Prim::Disk(d) => self.signed_depth(d.center) - d.radius,
            };
            depth = depth.min(d);
        }
        depth
    }

    /// Depth of `p` inside the set: the exact distance to the complement
    /// while `p` is inside, negative when outside (for polygons and cone
    /// hulls the most-violated supporting half-plane, a lower bound on the
    /// outside magnitude). Sets without interior yield minus the distance.
    pub fn signed_depth(&self, p: Vec2) -> f64 {
        match self {
            ConvexSet::Disk(d) => d.radius - p.distance(d.center),
            ConvexSet::Polygon(verts) => {
                if verts.len() < 3 {
                    return -point_hull_distance(p, verts);
                }
                // Depth in a convex polygon is the least signed distance to
                // the edges' supporting half-planes.
                let mut depth = f64::INFINITY;
                for (a, b) in hull_edges(verts) {
                    let e = b - a;
                    let len = e.norm();
                    if len == 0.0 {
                        continue;
                    }
                    depth = depth.min(e.cross(p - a) / len);
                }
                depth
            }
            ConvexSet::ConeHull { apex, disk } => cone_signed_depth(p, *apex, *disk),
            ConvexSet::PointChain(pts) => -chain_distance(p, pts),
        }
    }

    fn prims(&self) -> Vec<Prim<'_>> {
        match self {
            ConvexSet::Disk(d) => vec![Prim::Disk(*d)],
            ConvexSet::Polygon(verts) => vec![Prim::Hull {
                pts: PrimPts::Borrowed(verts),
                closed: true,
            }],
            ConvexSet::ConeHull { apex, disk } => {
                let mut prims = vec![Prim::Disk(*disk)];
                if let Some(tri) = cone_triangle(*apex, *disk) {
                    prims.push(Prim::Hull {
                        pts: PrimPts::Owned(tri),
                        closed: true,
                    });
                }
                prims
            }
            ConvexSet::PointChain(pts) => vec![Prim::Hull {
                pts: PrimPts::Borrowed(pts),
                closed: false,
            }],
        }
    }
}

enum PrimPts<'a> {
    Borrowed(&'a [Vec2]),
    Owned(Vec<Vec2>),
}

impl PrimPts<'_> {
    fn iter(&self) -> std::slice::Iter<'_, Vec2> {
        match self {
            PrimPts::Borrowed(s) => s.iter(),
            PrimPts::Owned(v) => v.iter(),
        }
    }

    fn slice(&self) -> &[Vec2] {
        match self {
            PrimPts::Borrowed(s) => s,
            PrimPts::Owned(v) => v,
        }
    }
}

enum Prim<'a> {
    Disk(Disk),
    Hull { pts: PrimPts<'a>, closed: bool },
}

fn prim_distance(a: &Prim<'_>, b: &Prim<'_>) -> f64 {
    match (a, b) {
        (Prim::Disk(p), Prim::Disk(q)) => {
            (p.center.distance(q.center) - p.radius - q.radius).max(0.0)
        }
        (Prim::Disk(d), Prim::Hull { pts, closed })
        | (Prim::Hull { pts, closed }, Prim::Disk(d)) => {
            let dist = if *closed {
                point_hull_distance(d.center, pts.slice())
            } else {
                chain_distance(d.center, pts.slice())
            };
            (dist - d.radius).max(0.0)
        }
        (
            Prim::Hull {
                pts: pa,
                closed: ca,
            },
            Prim::Hull {
                pts: pb,
                closed: cb,
            },
        ) => hulls_distance(pa.slice(), *ca, pb.slice(), *cb),
    }
}

fn hulls_distance(a: &[Vec2], a_closed: bool, b: &[Vec2], b_closed: bool) -> f64 {
    // One shape fully inside the other.
    if a_closed && a.len() >= 3 && b.iter().any(|p| point_hull_distance(*p, a) == 0.0) {
        return 0.0;
    }
    if b_closed && b.len() >= 3 && a.iter().any(|p| point_hull_distance(*p, b) == 0.0) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for (a1, a2) in shape_segments(a, a_closed) {
        for (b1, b2) in shape_segments(b, b_closed) {
            best = best.min(segment_segment_distance(a1, a2, b1, b2));
            if best == 0.0 {
                return 0.0;
            }
        }
    }
    best
}

fn shape_segments(pts: &[Vec2], closed: bool) -> Vec<(Vec2, Vec2)> {
    match pts.len() {
        0 => Vec::new(),
        1 => vec![(pts[0], pts[0])],
        2 => vec![(pts[0], pts[1])],
        n => {
            let mut segs: Vec<(Vec2, Vec2)> = pts.windows(2).map(|w| (w[0], w[1])).collect();
            if closed {
                segs.push((pts[n - 1], pts[0]));
            }
            segs
        }
    }
}

fn hull_edges(verts: &[Vec2]) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
    let n = verts.len();
    (0..n).map(move |i| (verts[i], verts[(i + 1) % n]))
}

/// Distance from a point to a closed segment.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

fn segments_intersect(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> bool {
    let d1 = (a2 - a1).cross(b1 - a1);
    let d2 = (a2 - a1).cross(b2 - a1);
    let d3 = (b2 - b1).cross(a1 - b1);
    let d4 = (b2 - b1).cross(a2 - b1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    false
}

fn segment_segment_distance(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> f64 {
    if segments_intersect(a1, a2, b1, b2) {
        return 0.0;
    }
    point_segment_distance(a1, b1, b2)
        .min(point_segment_distance(a2, b1, b2))
        .min(point_segment_distance(b1, a1, a2))
        .min(point_segment_distance(b2, a1, a2))
}

/// Distance from `p` to a convex hull given by its ccw vertices. Hulls with
/// fewer than three vertices degenerate to a point or a segment.
fn point_hull_distance(p: Vec2, verts: &[Vec2]) -> f64 {
    match verts.len() {
        0 => f64::INFINITY,
        1 => p.distance(verts[0]),
        2 => point_segment_distance(p, verts[0], verts[1]),
        _ => {
            let mut inside = true;
            let mut best = f64::INFINITY;
            for (a, b) in hull_edges(verts) {
                if (b - a).cross(p - a) < 0.0 {
                    inside = false;
                }
                best = best.min(point_segment_distance(p, a, b));
            }
            if inside {
                0.0
            } else {
                best
            }
        }
    }
}

fn chain_distance(p: Vec2, pts: &[Vec2]) -> f64 {
    if pts.len() == 1 {
        return p.distance(pts[0]);
    }
    let mut best = f64::INFINITY;
    for w in pts.windows(2) {
        best = best.min(point_segment_distance(p, w[0], w[1]));
    }
    best
}

/// Tangent triangle `[apex, t1, t2]` of the hull of an apex and a disk, or
/// `None` when the apex lies inside the disk (the hull is the disk itself).
fn cone_triangle(apex: Vec2, disk: Disk) -> Option<Vec<Vec2>> {
    let d = apex.distance(disk.center);
    if d <= disk.radius {
        return None;
    }
    if disk.radius == 0.0 {
        return Some(vec![apex, disk.center]);
    }
    let to_apex = (apex - disk.center) * (1.0 / d);
    let beta = (disk.radius / d).acos();
    let t1 = disk.center + rotate(beta, to_apex) * disk.radius;
    let t2 = disk.center + rotate(-beta, to_apex) * disk.radius;
    Some(vec![apex, t1, t2])
}

fn cone_signed_depth(p: Vec2, apex: Vec2, disk: Disk) -> f64 {
    let d = apex.distance(disk.center);
    if d <= disk.radius {
        return disk.radius - p.distance(disk.center);
    }
    let tri = cone_triangle(apex, disk).expect("apex outside disk");
    if tri.len() < 3 {
        // Zero-radius disk: the hull is a segment.
        return -point_segment_distance(p, apex, disk.center);
    }
    // The hull is the intersection of the two tangent half-planes and the
    // half-planes supporting the far arc of the disk.
    let mut depth = f64::INFINITY;
    for &(a, b) in &[(tri[0], tri[1]), (tri[2], tri[0])] {
        let e = b - a;
        let len = e.norm();
        if len > 0.0 {
            // Orient each tangent edge so positive is toward the disk center.
            let sd = e.cross(p - a) / len;
            let sd_center = e.cross(disk.center - a) / len;
            depth = depth.min(if sd_center >= 0.0 { sd } else { -sd });
        }
    }
    let w = p - disk.center;
    let wn = w.norm();
    let arc_term = if wn == 0.0 {
        disk.radius
    } else {
        let to_apex = (apex - disk.center) * (1.0 / d);
        let cos_beta = disk.radius / d;
        if w.dot(to_apex) / wn <= cos_beta {
            // Direction of p from the center falls within the far arc.
            disk.radius - wn
        } else {
            let u1 = (tri[1] - disk.center) * (1.0 / disk.radius);
            let u2 = (tri[2] - disk.center) * (1.0 / disk.radius);
            disk.radius - w.dot(u1).max(w.dot(u2))
        }
    };
    depth.min(arc_term)
}

/// Counterclockwise convex hull (Andrew's monotone chain) with collinear
/// vertices merged at the area tolerance.
fn convex_hull_ccw(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| {
        a.x.partial_cmp(&b.x)
            .unwrap()
            .then(a.y.partial_cmp(&b.y).unwrap())
    });
    pts.dedup_by(|a, b| a.distance(*b) <= 1e-15);
    if pts.len() == 1 {
        return pts;
    }

    let turn = |o: Vec2, a: Vec2, b: Vec2| (a - o).cross(b - o);
    let mut lower: Vec<Vec2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2
            && turn(lower[lower.len() - 2], lower[lower.len() - 1], p) <= COLLINEAR_AREA_TOL
        {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Vec2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2
            && turn(upper[upper.len() - 2], upper[upper.len() - 1], p) <= COLLINEAR_AREA_TOL
        {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.is_empty() {
        // All points collinear: keep the extreme pair.
        return vec![pts[0], pts[pts.len() - 1]];
    }
    if lower.len() == 1 {
        lower.push(pts[pts.len() - 1]);
        lower.dedup_by(|a, b| a.distance(*b) <= 1e-15);
    }
    lower
}
