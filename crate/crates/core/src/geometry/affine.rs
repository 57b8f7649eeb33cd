use super::{GeometryError, Point2};
use serde::Serialize;
use std::f64::consts::PI;

/// Affine map `x -> B x + P` relating equivalent elements.
///
/// `B` may be orientation reversing: mirror images of an element are equivalent
/// with condition number 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AffineMap2 {
    pub b: [[f64; 2]; 2],
    pub p: Point2,
}

impl AffineMap2 {
    pub fn new(b: [[f64; 2]; 2], p: Point2) -> Result<Self, GeometryError> {
        let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
        if !(det.abs() > 0.0) || !det.is_finite() {
            return Err(GeometryError::PreconditionFailed("singular affine map".into()));
        }
        Ok(Self { b, p })
    }

    pub fn identity() -> Self {
        Self {
            b: [[1.0, 0.0], [0.0, 1.0]],
            p: Point2::default(),
        }
    }

    #[inline]
    pub fn linear(&self, x: Point2) -> Point2 {
        Point2::new(
            self.b[0][0] * x.x + self.b[0][1] * x.y,
            self.b[1][0] * x.x + self.b[1][1] * x.y,
        )
    }

    #[inline]
    pub fn apply(&self, x: Point2) -> Point2 {
        self.linear(x) + self.p
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.b[0][0] * self.b[1][1] - self.b[0][1] * self.b[1][0]
    }

    /// Singular values `(max, min)` of `B`.
    pub fn singular_values(&self) -> (f64, f64) {
        let fro2: f64 = self.b.iter().flatten().map(|v| v * v).sum();
        let det = self.det().abs();
        let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
        let smax = ((fro2 + disc) / 2.0).sqrt();
        (smax, det / smax)
    }

    /// Spectral condition number of `B`.
    pub fn kappa(&self) -> f64 {
        let (smax, smin) = self.singular_values();
        (smax / smin).max(1.0)
    }

    pub fn inverse(&self) -> AffineMap2 {
        let d = self.det();
        let bi = [
            [self.b[1][1] / d, -self.b[0][1] / d],
            [-self.b[1][0] / d, self.b[0][0] / d],
        ];
        let inv = AffineMap2 { b: bi, p: Point2::default() };
        AffineMap2 { b: bi, p: -inv.linear(self.p) }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &AffineMap2) -> AffineMap2 {
        let a = &self.b;
        let c = &other.b;
        let b = [
            [
                a[0][0] * c[0][0] + a[0][1] * c[1][0],
                a[0][0] * c[0][1] + a[0][1] * c[1][1],
            ],
            [
                a[1][0] * c[0][0] + a[1][1] * c[1][0],
                a[1][0] * c[0][1] + a[1][1] * c[1][1],
            ],
        ];
        AffineMap2 { b, p: self.apply(other.p) }
    }
}

/// Interval guaranteed to contain the angle between the images of two vectors
/// that enclose `angle`, given only the condition number of the linear part.
pub fn angle_distortion_bounds(map: &AffineMap2, angle: f64) -> (f64, f64) {
    let t = 2.0 / (map.kappa() * PI);
    (t * angle, PI * (1.0 - t) + t * angle)
}
