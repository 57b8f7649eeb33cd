//! The bilinear map `F_K` from the unit square onto a quadrilateral, node grids
//! and the auxiliary triangles attached to interpolation nodes.

use crate::geometry::{angle_between, triangle_angles, CanonicalQuad, ConvexQuad, Point2};
use serde::{Serialize, Serializer};
use thiserror::Error;

pub const INVERSE_MAX_ITER: usize = 50;
/// Residual tolerance of the inverse, relative to `h`.
pub const INVERSE_TOL: f64 = 1e-14;
/// Slack of the reference box `[-eps, 1+eps]^2` accepted by the inverse.
pub const INVERSE_BOX_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("point ({x}, {y}) is outside the element (reference preimage ({xh}, {yh}))")]
    NotInElement { x: f64, y: f64, xh: f64, yh: f64 },
    #[error("Newton inversion did not converge, residual {residual:e}")]
    NoConvergence { residual: f64 },
    #[error("invalid node index ({i}, {j}) for k = {k}")]
    InvalidIndex { k: usize, i: usize, j: usize },
}

/// `F(x̂,ŷ) = V1 (1-x̂)(1-ŷ) + V2 x̂(1-ŷ) + V3 x̂ŷ + V4 (1-x̂)ŷ`.
///
/// For a canonical element this is `(a x̂(1-ŷ) + ã x̂ŷ, b ŷ(1-x̂) + b̃ x̂ŷ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BilinearMap {
    v: [Point2; 4],
    h: f64,
    canonical: Option<CanonicalQuad>,
}

impl BilinearMap {
    pub fn from_canonical(cq: &CanonicalQuad) -> Self {
        let q = cq.to_quad();
        Self {
            v: *q.vertices(),
            h: q.diameter(),
            canonical: Some(*cq),
        }
    }

    pub fn from_quad(q: &ConvexQuad) -> Self {
        Self {
            v: *q.vertices(),
            h: q.diameter(),
            canonical: None,
        }
    }

    pub fn vertices(&self) -> &[Point2; 4] {
        &self.v
    }

    pub fn diameter(&self) -> f64 {
        self.h
    }

    pub fn canonical(&self) -> Option<&CanonicalQuad> {
        self.canonical.as_ref()
    }

    pub fn quad(&self) -> ConvexQuad {
        ConvexQuad::with_tolerance(self.v, 0.0).expect("vertices validated on construction")
    }

    pub fn forward(&self, xh: f64, yh: f64) -> Point2 {
        if let Some(c) = &self.canonical {
            return Point2::new(
                c.a * xh * (1.0 - yh) + c.a_tilde * xh * yh,
                c.b * yh * (1.0 - xh) + c.b_tilde * xh * yh,
            );
        }
        let [v1, v2, v3, v4] = self.v;
        v1 * ((1.0 - xh) * (1.0 - yh)) + v2 * (xh * (1.0 - yh)) + v3 * (xh * yh) + v4 * ((1.0 - xh) * yh)
    }

    /// `DF` as rows `[[dx/dx̂, dx/dŷ], [dy/dx̂, dy/dŷ]]` and its determinant.
    pub fn jacobian(&self, xh: f64, yh: f64) -> ([[f64; 2]; 2], f64) {
        let [v1, v2, v3, v4] = self.v;
        let dx = (v2 - v1) * (1.0 - yh) + (v3 - v4) * yh;
        let dy = (v4 - v1) * (1.0 - xh) + (v3 - v2) * xh;
        let m = [[dx.x, dy.x], [dx.y, dy.y]];
        (m, m[0][0] * m[1][1] - m[0][1] * m[1][0])
    }

    /// `J_K`; for canonical elements the closed form `ab(1 + x̂(b̃/b-1) + ŷ(ã/a-1))`.
    pub fn det(&self, xh: f64, yh: f64) -> f64 {
        match &self.canonical {
            Some(c) => {
                c.a * c.b * (1.0 + xh * (c.b_tilde / c.b - 1.0) + yh * (c.a_tilde / c.a - 1.0))
            }
            None => self.jacobian(xh, yh).1,
        }
    }

    /// Newton inversion starting from the inverse of the affine part of `F`.
    ///
    /// The bilinear system can have a second solution outside the square; if
    /// Newton lands there it is restarted from the centre of the square.
    pub fn inverse(&self, p: Point2) -> Result<(f64, f64), MapError> {
        let [v1, v2, _, v4] = self.v;
        let e1 = v2 - v1;
        let e2 = v4 - v1;
        let d = p - v1;
        let det0 = e1.cross(e2);
        let affine = (d.cross(e2) / det0, e1.cross(d) / det0);
        let first = self.newton(p, affine);
        match first {
            Ok(x) if in_box(x) => Ok(x),
            _ => match self.newton(p, (0.5, 0.5)) {
                Ok(x) if in_box(x) => Ok(x),
                Ok((xh, yh)) => Err(MapError::NotInElement { x: p.x, y: p.y, xh, yh }),
                Err(e) => match first {
                    Ok((xh, yh)) => Err(MapError::NotInElement { x: p.x, y: p.y, xh, yh }),
                    Err(_) if !self.contains(p) => Err(MapError::NotInElement {
                        x: p.x,
                        y: p.y,
                        xh: f64::NAN,
                        yh: f64::NAN,
                    }),
                    Err(_) => Err(e),
                },
            },
        }
    }

    /// Closed-element membership test with slack `1e-12 h`.
    pub fn contains(&self, p: Point2) -> bool {
        (0..4).all(|i| {
            let e = self.v[(i + 1) % 4] - self.v[i];
            e.cross(p - self.v[i]) / e.norm() >= -1e-12 * self.h
        })
    }

    fn newton(&self, p: Point2, start: (f64, f64)) -> Result<(f64, f64), MapError> {
        let (mut xh, mut yh) = start;
        let tol = INVERSE_TOL * self.h;
        let mut residual = f64::INFINITY;
        for _ in 0..INVERSE_MAX_ITER {
            let r = self.forward(xh, yh) - p;
            residual = r.norm();
            if residual < tol {
                return Ok((xh, yh));
            }
            let (m, det) = self.jacobian(xh, yh);
            if !(det.abs() > 0.0) {
                break;
            }
            xh -= (m[1][1] * r.x - m[0][1] * r.y) / det;
            yh -= (-m[1][0] * r.x + m[0][0] * r.y) / det;
        }
        // Roundoff can keep the residual just above `tol`; accept an iterate
        // that is stagnant at machine precision.
        let r = (self.forward(xh, yh) - p).norm();
        if r < 4.0 * tol.max(f64::EPSILON * (self.h + p.norm())) {
            return Ok((xh, yh));
        }
        Err(MapError::NoConvergence { residual: residual.min(r) })
    }

    pub fn node_grid(&self, k: usize) -> NodeGrid {
        assert!(k >= 1, "node grid needs k >= 1");
        let mut nodes = Vec::with_capacity((k + 1) * (k + 1));
        for i in 0..=k {
            for j in 0..=k {
                nodes.push(self.forward(j as f64 / k as f64, i as f64 / k as f64));
            }
        }
        NodeGrid { k, nodes }
    }
}

fn in_box((xh, yh): (f64, f64)) -> bool {
    let inside = |t: f64| (-INVERSE_BOX_EPS..=1.0 + INVERSE_BOX_EPS).contains(&t);
    inside(xh) && inside(yh)
}

/// Nodes `M_ij = F(j/k, i/k)`, stored row-major with `i` outer.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeGrid {
    pub k: usize,
    nodes: Vec<Point2>,
}

impl NodeGrid {
    pub fn node(&self, i: usize, j: usize) -> Point2 {
        self.nodes[i * (self.k + 1) + j]
    }

    pub fn nodes(&self) -> &[Point2] {
        &self.nodes
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        (1..self.k).contains(&i) && (1..self.k).contains(&j)
    }

    pub fn interior_count(&self) -> usize {
        (0..=self.k)
            .flat_map(|i| (0..=self.k).map(move |j| (i, j)))
            .filter(|&(i, j)| self.is_interior(i, j))
            .count()
    }
}

impl Serialize for NodeGrid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<[f64; 2]> = self.nodes.iter().map(|p| [p.x, p.y]).collect();
        v.serialize(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AuxKind {
    TopEdge,
    RightEdge,
    Interior,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AuxTriangle {
    pub kind: AuxKind,
    /// First vertex is always the node `M_ij`.
    pub vertices: [Point2; 3],
    pub probe_edge: [Point2; 2],
    /// Homothety ratio to `Δ(V2,V3,V4)` for edge kinds.
    pub similarity_ratio: Option<f64>,
    /// `|M_i0 M_ij|` for the interior kind.
    pub len_i0: Option<f64>,
    /// `|M_0j M_ij|` for the interior kind.
    pub len_0j: Option<f64>,
    /// Angle at `M_i0` for the interior kind.
    pub alpha: Option<f64>,
}

impl AuxTriangle {
    pub fn area(&self) -> f64 {
        let [a, b, c] = self.vertices;
        0.5 * (b - a).cross(c - a).abs()
    }

    pub fn angles(&self) -> [f64; 3] {
        let [a, b, c] = self.vertices;
        triangle_angles(a, b, c)
    }
}

/// Auxiliary triangle attached to node `M_ij` (`i, j >= 1`) of a canonical element.
///
/// Nodes on the top edge (`i = k`, including the corner) use the triangle with
/// apex `V4`, nodes on the right edge use apex `V2`, and interior nodes use
/// `Δ(M_ij, M_0j, M_i0)`.
pub fn aux_triangle(cq: &CanonicalQuad, k: usize, i: usize, j: usize) -> Result<AuxTriangle, MapError> {
    if k == 0 || i == 0 || j == 0 || i > k || j > k {
        return Err(MapError::InvalidIndex { k, i, j });
    }
    let bm = BilinearMap::from_canonical(cq);
    let kf = k as f64;
    let v = cq.vertices();
    let m = bm.forward(j as f64 / kf, i as f64 / kf);
    let base = AuxTriangle {
        kind: AuxKind::Interior,
        vertices: [m; 3],
        probe_edge: [m; 2],
        similarity_ratio: None,
        len_i0: None,
        len_0j: None,
        alpha: None,
    };
    if i == k {
        let t = j as f64 / kf;
        let far = v[3] + (v[1] - v[3]) * t;
        Ok(AuxTriangle {
            kind: AuxKind::TopEdge,
            vertices: [m, v[3], far],
            probe_edge: [m, v[3]],
            similarity_ratio: Some(t),
            ..base
        })
    } else if j == k {
        let t = i as f64 / kf;
        let far = v[1] + (v[3] - v[1]) * t;
        Ok(AuxTriangle {
            kind: AuxKind::RightEdge,
            vertices: [m, v[1], far],
            probe_edge: [m, far],
            similarity_ratio: Some(t),
            ..base
        })
    } else {
        let m0j = Point2::new(cq.a * j as f64 / kf, 0.0);
        let mi0 = Point2::new(0.0, cq.b * i as f64 / kf);
        Ok(AuxTriangle {
            kind: AuxKind::Interior,
            vertices: [m, m0j, mi0],
            probe_edge: [mi0, m],
            len_i0: Some(mi0.dist(m)),
            len_0j: Some(m0j.dist(m)),
            alpha: Some(angle_between(m - mi0, m0j - mi0)),
            ..base
        })
    }
}
