//! Convex quadrilaterals, interior angles and the geometric conditions
//! (minimum/maximum/double angle, regular decomposition, regularity).
//!
//! Vertices are always stored counterclockwise. Angles are in radians.

mod affine;
mod canonical;
mod inscribed;

pub use affine::{angle_distortion_bounds, AffineMap2};
pub use canonical::{
    canonicalize, condition_flags, delta1_from_delta2, delta2_from_delta1_d2, equivalence_check,
    normalize_tall, CanonTarget, CanonicalQuad,
    Canonicalization, ConditionFlags, Flag, D1_TOL,
};
pub use inscribed::chebyshev_radius;

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use thiserror::Error;

/// Relative (to `h^2`) threshold below which a vertex cross product counts as degenerate.
pub const CONVEXITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("non-finite vertex coordinate")]
    NonFinite,
    #[error("degenerate or non-convex quadrilateral: cross product {cross:e} at vertex {vertex}")]
    DegenerateQuad { vertex: usize, cross: f64 },
    #[error("invalid canonical parameters: {0}")]
    InvalidCanonical(String),
    #[error("invalid angle thresholds: need 0 < psi_min <= psi_max < pi")]
    InvalidThresholds,
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("construction failed: {0}")]
    ConstructionFailed(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 2D cross product.
    #[inline]
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Unsigned angle between two nonzero vectors, in `[0, pi]`.
#[inline]
pub fn angle_between(u: Point2, v: Point2) -> f64 {
    u.cross(v).abs().atan2(u.dot(v))
}

/// Interior angles of a triangle at `a`, `b`, `c`.
pub fn triangle_angles(a: Point2, b: Point2, c: Point2) -> [f64; 3] {
    [
        angle_between(b - a, c - a),
        angle_between(c - b, a - b),
        angle_between(a - c, b - c),
    ]
}

/// Signed area of triangle `abc` (positive when counterclockwise).
#[inline]
pub fn triangle_signed_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * (b - a).cross(c - a)
}

/// A strictly convex quadrilateral with counterclockwise vertices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvexQuad {
    vertices: [Point2; 4],
    h: f64,
    shortest_side: f64,
    d1_len: f64,
    d2_len: f64,
}

impl ConvexQuad {
    /// Validates strict convexity and CCW orientation. Quads failing the scale-aware
    /// cross-product test are rejected, never repaired.
    pub fn new(vertices: [Point2; 4]) -> Result<Self, GeometryError> {
        Self::with_tolerance(vertices, CONVEXITY_TOL)
    }

    /// As [`ConvexQuad::new`] with a custom relative tolerance; `0` only demands
    /// positive cross products.
    pub fn with_tolerance(vertices: [Point2; 4], rel_tol: f64) -> Result<Self, GeometryError> {
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let mut h = 0.0_f64;
        for i in 0..4 {
            for j in (i + 1)..4 {
                h = h.max(vertices[i].dist(vertices[j]));
            }
        }
        let tol = rel_tol * h * h;
        for i in 0..4 {
            let prev = vertices[(i + 3) % 4];
            let cur = vertices[i];
            let next = vertices[(i + 1) % 4];
            let cross = (cur - prev).cross(next - cur);
            if !(cross > tol) {
                return Err(GeometryError::DegenerateQuad { vertex: i, cross });
            }
        }
        let shortest_side = (0..4)
            .map(|i| vertices[i].dist(vertices[(i + 1) % 4]))
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            vertices,
            h,
            shortest_side,
            d1_len: vertices[1].dist(vertices[3]),
            d2_len: vertices[0].dist(vertices[2]),
        })
    }

    pub fn from_coords(c: [f64; 8]) -> Result<Self, GeometryError> {
        Self::new([
            Point2::new(c[0], c[1]),
            Point2::new(c[2], c[3]),
            Point2::new(c[4], c[5]),
            Point2::new(c[6], c[7]),
        ])
    }

    #[inline]
    pub fn vertices(&self) -> &[Point2; 4] {
        &self.vertices
    }

    #[inline]
    pub fn vertex(&self, i: usize) -> Point2 {
        self.vertices[i % 4]
    }

    /// Diameter: the largest pairwise vertex distance.
    #[inline]
    pub fn diameter(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn shortest_side(&self) -> f64 {
        self.shortest_side
    }

    /// Length of the diagonal joining vertices 2 and 4 (indices 1, 3).
    #[inline]
    pub fn d1_len(&self) -> f64 {
        self.d1_len
    }

    /// Length of the diagonal joining vertices 1 and 3 (indices 0, 2).
    #[inline]
    pub fn d2_len(&self) -> f64 {
        self.d2_len
    }

    pub fn side_lengths(&self) -> [f64; 4] {
        let v = &self.vertices;
        [
            v[0].dist(v[1]),
            v[1].dist(v[2]),
            v[2].dist(v[3]),
            v[3].dist(v[0]),
        ]
    }

    /// Shoelace area.
    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        0.5 * (0..4).map(|i| v[i].cross(v[(i + 1) % 4])).sum::<f64>()
    }

    pub fn centroid_of_vertices(&self) -> Point2 {
        let s = self.vertices.iter().fold(Point2::default(), |acc, &v| acc + v);
        s * 0.25
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    /// Same shape relabelled so that vertex `start` becomes the first one.
    pub fn rotated_labels(&self, start: usize) -> ConvexQuad {
        let v = &self.vertices;
        let mut out = *self;
        out.vertices = [v[start % 4], v[(start + 1) % 4], v[(start + 2) % 4], v[(start + 3) % 4]];
        out.d1_len = out.vertices[1].dist(out.vertices[3]);
        out.d2_len = out.vertices[0].dist(out.vertices[2]);
        out
    }

    /// Applies `x -> scale * x + shift` to every vertex.
    pub fn scaled(&self, scale: f64, shift: Point2) -> Result<ConvexQuad, GeometryError> {
        let v = &self.vertices;
        ConvexQuad::new([
            v[0] * scale + shift,
            v[1] * scale + shift,
            v[2] * scale + shift,
            v[3] * scale + shift,
        ])
    }

    /// Interior angles at the four vertices in vertex order; each in `(0, pi)`.
    pub fn interior_angles(&self) -> [f64; 4] {
        let v = &self.vertices;
        let mut out = [0.0; 4];
        for (i, a) in out.iter_mut().enumerate() {
            let prev = v[(i + 3) % 4];
            let next = v[(i + 1) % 4];
            *a = angle_between(next - v[i], prev - v[i]);
        }
        out
    }

    pub fn min_angle(&self) -> f64 {
        self.interior_angles().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max_angle(&self) -> f64 {
        self.interior_angles().into_iter().fold(0.0, f64::max)
    }

    /// `h / rho` with `rho` the diameter of the largest inscribed circle.
    pub fn regularity_ratio(&self) -> f64 {
        let rho = 2.0 * chebyshev_radius(self);
        self.h / rho
    }

    /// Triangles produced by splitting along diagonal `diag` (1: V2V4, 2: V1V3).
    pub fn split(&self, diag: u8) -> [[Point2; 3]; 2] {
        let v = &self.vertices;
        match diag {
            1 => [[v[0], v[1], v[3]], [v[1], v[2], v[3]]],
            _ => [[v[0], v[1], v[2]], [v[0], v[2], v[3]]],
        }
    }

    /// RDP constants attained when splitting along `diag`.
    pub fn rdp_along(&self, diag: u8) -> RdpInfo {
        let tris = self.split(diag);
        let psi_max = tris
            .iter()
            .flat_map(|t| triangle_angles(t[0], t[1], t[2]))
            .fold(0.0, f64::max);
        let (this, other) = if diag == 1 {
            (self.d1_len, self.d2_len)
        } else {
            (self.d2_len, self.d1_len)
        };
        RdpInfo {
            diag,
            n: other / this,
            psi_max,
        }
    }

    /// Diagonal index of the longest diagonal (1 on ties).
    pub fn longest_diagonal(&self) -> u8 {
        if self.d1_len >= self.d2_len {
            1
        } else {
            2
        }
    }
}

impl fmt::Display for ConvexQuad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = &self.vertices;
        write!(
            f,
            "{} {} {} {} {} {} {} {}",
            v[0].x, v[0].y, v[1].x, v[1].y, v[2].x, v[2].y, v[3].x, v[3].y
        )
    }
}

/// Attained regular-decomposition constants for one splitting diagonal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RdpInfo {
    /// 1 = diagonal V2V4, 2 = diagonal V1V3.
    #[serde(rename = "diag")]
    pub diag: u8,
    /// `|d_2| / |d_1|` with `d_1` the splitting diagonal.
    #[serde(rename = "N")]
    pub n: f64,
    /// Largest angle over both sub-triangles.
    #[serde(rename = "psiM")]
    pub psi_max: f64,
}

const TIE_TOL: f64 = 1e-12;

/// Evaluates both diagonals and returns the one with the smaller attained maximum
/// angle; ties go to the smaller `N`, then to diagonal 1.
pub fn check_rdp(quad: &ConvexQuad) -> RdpInfo {
    let r1 = quad.rdp_along(1);
    let r2 = quad.rdp_along(2);
    if (r1.psi_max - r2.psi_max).abs() > TIE_TOL {
        return if r1.psi_max < r2.psi_max { r1 } else { r2 };
    }
    if (r1.n - r2.n).abs() > TIE_TOL {
        return if r1.n < r2.n { r1 } else { r2 };
    }
    r1
}

/// Bound on `h/ρ` for a `mac(ψ_m)` element whose largest angle exceeds `π - ψ_m/2`.
///
/// Splitting through the largest angle leaves triangles with smallest angle at
/// least `ψ_m/2`, and such a triangle has `h/ρ <= 1/(4 sin³(ψ_m/4))`.
pub fn dac_or_regular_bound(psi_m: f64) -> f64 {
    0.5 / (0.25 * psi_m).sin().powi(3)
}

/// For a `mac(ψ_m)` element: it satisfies `DAC(ψ_m, π - ψ_m/2)`, or its
/// regularity ratio is below [`dac_or_regular_bound`].
pub fn dac_or_regular(quad: &ConvexQuad, psi_m: f64) -> bool {
    quad.max_angle() <= PI - 0.5 * psi_m || quad.regularity_ratio() <= dac_or_regular_bound(psi_m)
}

/// Threshold angles for the angle conditions plus the constant used for the
/// canonical flags.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    pub psi_m: f64,
    #[serde(rename = "psi_M")]
    pub psi_big_m: f64,
    pub c: f64,
}

impl Thresholds {
    pub fn new(psi_m: f64, psi_big_m: f64, c: f64) -> Result<Self, GeometryError> {
        if !(psi_m > 0.0 && psi_m <= psi_big_m && psi_big_m < PI) || !(c >= 1.0) {
            return Err(GeometryError::InvalidThresholds);
        }
        Ok(Self { psi_m, psi_big_m, c })
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            psi_m: PI / 6.0,
            psi_big_m: 5.0 * PI / 6.0,
            c: 10.0,
        }
    }
}

/// Full classification of a quadrilateral against every geometric condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub psi_min: f64,
    pub psi_max: f64,
    pub angles: [f64; 4],
    pub mac: bool,
    #[serde(rename = "MAC")]
    pub mac_big: bool,
    #[serde(rename = "DAC")]
    pub dac: bool,
    pub rdp: RdpInfo,
    pub h_over_rho: f64,
    /// Flags of the canonical element produced by the RDP construction.
    pub flags: ConditionFlags,
    pub canonical: CanonicalQuad,
    pub thresholds: Thresholds,
}

pub fn classify(quad: &ConvexQuad, thresholds: Thresholds) -> Result<ConditionReport, GeometryError> {
    let angles = quad.interior_angles();
    let psi_min = angles.iter().copied().fold(f64::INFINITY, f64::min);
    let psi_max = angles.iter().copied().fold(0.0, f64::max);
    let mac = psi_min >= thresholds.psi_m;
    let mac_big = psi_max <= thresholds.psi_big_m;
    let canon = canonicalize(quad, CanonTarget::Rdp)?;
    Ok(ConditionReport {
        psi_min,
        psi_max,
        angles,
        mac,
        mac_big,
        dac: mac && mac_big,
        rdp: check_rdp(quad),
        h_over_rho: quad.regularity_ratio(),
        flags: condition_flags(&canon.canonical, thresholds.c),
        canonical: canon.canonical,
        thresholds,
    })
}
