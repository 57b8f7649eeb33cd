//! Tensor-product `Q_k` Lagrange basis on the unit square, physical basis
//! gradients, the `Q_k` interpolant on a quadrilateral and the `P_k`
//! interpolant on the right triangle `T(a,b)`.

mod fields;
mod lagrange;
mod triangle;

pub use fields::{
    cex1_field, cex2_field, field_by_name, FieldError, FnField, Polynomial, PullbackField, ReferenceFn,
    ScalarField, TrigField,
};
pub use lagrange::Lagrange1d;
pub use triangle::{triangle_pk_interpolate, TriangleError, TriangleInterpolant};

use crate::geometry::Point2;
use crate::reference_map::{BilinearMap, MapError};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterpError {
    #[error("basis index ({i}, {j}) out of range for k = {k}")]
    IndexOutOfRange { k: usize, i: usize, j: usize },
    #[error(transparent)]
    Map(#[from] MapError),
}

/// `φ̂_ij(x̂,ŷ) = L_j(x̂) L_i(ŷ)`, so that `φ̂_ij(j/k, i/k) = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct QkBasis {
    line: Lagrange1d,
}

impl QkBasis {
    pub fn new(k: usize) -> Self {
        Self { line: Lagrange1d::new(k) }
    }

    pub fn k(&self) -> usize {
        self.line.degree()
    }

    pub fn line(&self) -> &Lagrange1d {
        &self.line
    }

    /// `(φ̂_ij, ∂φ̂_ij/∂x̂, ∂φ̂_ij/∂ŷ)` at `(x̂, ŷ)`.
    pub fn value_grad(&self, i: usize, j: usize, xh: f64, yh: f64) -> Result<(f64, f64, f64), InterpError> {
        let k = self.k();
        if i > k || j > k {
            return Err(InterpError::IndexOutOfRange { k, i, j });
        }
        let (lx, dlx) = (self.line.values(xh), self.line.derivatives(xh));
        let (ly, dly) = (self.line.values(yh), self.line.derivatives(yh));
        Ok((lx[j] * ly[i], dlx[j] * ly[i], lx[j] * dly[i]))
    }

    /// Values and reference gradients of every basis function, row-major in `(i, j)`.
    pub fn all(&self, xh: f64, yh: f64) -> Vec<(f64, f64, f64)> {
        let (lx, dlx) = (self.line.values(xh), self.line.derivatives(xh));
        let (ly, dly) = (self.line.values(yh), self.line.derivatives(yh));
        let k = self.k();
        let mut out = Vec::with_capacity((k + 1) * (k + 1));
        for i in 0..=k {
            for j in 0..=k {
                out.push((lx[j] * ly[i], dlx[j] * ly[i], lx[j] * dly[i]));
            }
        }
        out
    }
}

/// `DF^{-T} ∇̂` at `(x̂, ŷ)`.
pub fn chain_rule(map: &BilinearMap, xh: f64, yh: f64, gx: f64, gy: f64) -> [f64; 2] {
    let (m, det) = map.jacobian(xh, yh);
    [
        (m[1][1] * gx - m[1][0] * gy) / det,
        (-m[0][1] * gx + m[0][0] * gy) / det,
    ]
}

/// Physical gradient of `φ_ij` at the image of `(x̂, ŷ)`.
pub fn physical_basis_grad_ref(
    map: &BilinearMap,
    basis: &QkBasis,
    i: usize,
    j: usize,
    xh: f64,
    yh: f64,
) -> Result<[f64; 2], InterpError> {
    let (_, gx, gy) = basis.value_grad(i, j, xh, yh)?;
    Ok(chain_rule(map, xh, yh, gx, gy))
}

/// Physical gradient of `φ_ij` at the physical point `p`.
pub fn physical_basis_grad(
    map: &BilinearMap,
    basis: &QkBasis,
    i: usize,
    j: usize,
    p: Point2,
) -> Result<[f64; 2], InterpError> {
    let (xh, yh) = map.inverse(p)?;
    physical_basis_grad_ref(map, basis, i, j, xh, yh)
}

/// `Q_k u = Σ u(M_ij) φ_ij`.
#[derive(Clone, Debug)]
pub struct Interpolant {
    pub map: BilinearMap,
    pub basis: QkBasis,
    /// Nodal values `u(M_ij)`, row-major with `i` outer.
    pub values: Vec<f64>,
}

impl Interpolant {
    pub fn k(&self) -> usize {
        self.basis.k()
    }

    pub fn nodal_value(&self, i: usize, j: usize) -> f64 {
        self.values[i * (self.k() + 1) + j]
    }

    /// Value and physical gradient at the image of `(x̂, ŷ)`.
    pub fn eval_ref(&self, xh: f64, yh: f64) -> (f64, [f64; 2]) {
        let mut v = 0.0;
        let (mut gx, mut gy) = (0.0, 0.0);
        for (c, (phi, dx, dy)) in self.values.iter().zip(self.basis.all(xh, yh)) {
            v += c * phi;
            gx += c * dx;
            gy += c * dy;
        }
        (v, chain_rule(&self.map, xh, yh, gx, gy))
    }

    pub fn value_at(&self, p: Point2) -> Result<f64, InterpError> {
        let (xh, yh) = self.map.inverse(p)?;
        Ok(self.eval_ref(xh, yh).0)
    }

    pub fn grad_at(&self, p: Point2) -> Result<[f64; 2], InterpError> {
        let (xh, yh) = self.map.inverse(p)?;
        Ok(self.eval_ref(xh, yh).1)
    }
}

impl ScalarField for Interpolant {
    fn derivative(&self, p: Point2, dx: usize, dy: usize) -> Option<f64> {
        let (xh, yh) = self.map.inverse(p).ok()?;
        let (v, g) = self.eval_ref(xh, yh);
        match (dx, dy) {
            (0, 0) => Some(v),
            (1, 0) => Some(g[0]),
            (0, 1) => Some(g[1]),
            _ => None,
        }
    }

    fn max_order(&self) -> usize {
        1
    }

    fn name(&self) -> String {
        format!("Q{}-interpolant", self.k())
    }
}

pub fn qk_interpolate(map: &BilinearMap, k: usize, field: &dyn ScalarField) -> Interpolant {
    let grid = map.node_grid(k);
    Interpolant {
        map: *map,
        basis: QkBasis::new(k),
        values: grid.nodes().iter().map(|&p| field.value(p)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CanonicalQuad;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_canonical(rng: &mut ChaCha8Rng) -> CanonicalQuad {
        loop {
            let c = CanonicalQuad::new(
                rng.gen_range(0.1..2.0),
                rng.gen_range(0.1..2.0),
                rng.gen_range(0.05..2.0),
                rng.gen_range(0.05..2.0),
            );
            if let Ok(c) = c {
                if c.certificate() > 0.05 {
                    return c;
                }
            }
        }
    }

    #[test]
    fn q1_basis_closed_form() {
        let b = QkBasis::new(1);
        let (x, y) = (0.3, 0.6);
        let (v, dx, dy) = b.value_grad(0, 0, x, y).unwrap();
        assert!((v - (1.0 - x) * (1.0 - y)).abs() < 1e-15);
        assert!((dx + (1.0 - y)).abs() < 1e-15 && (dy + (1.0 - x)).abs() < 1e-15);
        assert!(b.value_grad(2, 0, x, y).is_err());
    }

    #[test]
    fn q2_nodal_and_partition() {
        let b = QkBasis::new(2);
        for i in 0..=2 {
            for j in 0..=2 {
                let v = b.value_grad(1, 1, j as f64 / 2.0, i as f64 / 2.0).unwrap().0;
                assert_eq!(v, if (i, j) == (1, 1) { 1.0 } else { 0.0 });
            }
        }
        let all = b.all(0.3, 0.7);
        assert!((all.iter().map(|t| t.0).sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(all.iter().map(|t| t.1).sum::<f64>().abs() < 1e-14);
    }

    #[test]
    fn interior_basis_vanishes_on_boundary() {
        for k in 2..=4 {
            let b = QkBasis::new(k);
            for i in 1..k {
                for j in 1..k {
                    for t in [0.0, 0.17, 0.5, 0.83, 1.0] {
                        for (x, y) in [(t, 0.0), (t, 1.0), (0.0, t), (1.0, t)] {
                            assert!(b.value_grad(i, j, x, y).unwrap().0.abs() < 1e-14);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn physical_duality_partition_and_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..30 {
            let c = random_canonical(&mut rng);
            let map = BilinearMap::from_canonical(&c);
            let h = map.diameter();
            for k in 1..=4 {
                let basis = QkBasis::new(k);
                let grid = map.node_grid(k);
                for i in 0..=k {
                    for j in 0..=k {
                        let f = PullbackField { map, reference: ReferenceFn::Basis(basis.clone(), i, j) };
                        for l in 0..=k {
                            for r in 0..=k {
                                let want = if (i, j) == (l, r) { 1.0 } else { 0.0 };
                                assert!((f.value(grid.node(l, r)) - want).abs() < 1e-12);
                            }
                        }
                    }
                }
                let (xh, yh) = (rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95));
                let p = map.forward(xh, yh);
                let mut sum = 0.0;
                let mut gsum = [0.0; 2];
                for i in 0..=k {
                    for j in 0..=k {
                        let g = physical_basis_grad(&map, &basis, i, j, p).unwrap();
                        sum += basis.value_grad(i, j, xh, yh).unwrap().0;
                        gsum[0] += g[0];
                        gsum[1] += g[1];
                        let e = 1e-6 * h;
                        let phi = |q: Point2| {
                            let (a, b) = map.inverse(q).unwrap();
                            basis.value_grad(i, j, a, b).unwrap().0
                        };
                        let fx = (phi(Point2::new(p.x + e, p.y)) - phi(Point2::new(p.x - e, p.y))) / (2.0 * e);
                        let fy = (phi(Point2::new(p.x, p.y + e)) - phi(Point2::new(p.x, p.y - e))) / (2.0 * e);
                        let scale = g[0].hypot(g[1]).max(1.0 / h);
                        assert!((fx - g[0]).abs() <= 1e-6 * scale && (fy - g[1]).abs() <= 1e-6 * scale);
                    }
                }
                assert!((sum - 1.0).abs() < 1e-11);
                assert!(gsum[0].abs() < 1e-11 * k as f64 / h.min(1.0) && gsum[1].abs() < 1e-11 * k as f64 / h.min(1.0));
            }
        }
    }

    #[test]
    fn cex1_closed_form_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let basis = QkBasis::new(2);
        for s in [0.05, 0.2, 0.45] {
            let map = BilinearMap::from_canonical(&CanonicalQuad::new(1.0, s, s, 2.0 * s).unwrap());
            for _ in 0..50 {
                let (x, y): (f64, f64) = (rng.gen(), rng.gen());
                let g = physical_basis_grad_ref(&map, &basis, 1, 1, x, y).unwrap();
                let closed = 16.0 * x * ((s - 1.0) * y * (x - y) + (1.0 - x) * (1.0 - 2.0 * y))
                    / (s * (1.0 + x + (s - 1.0) * y));
                assert!((g[1] - closed).abs() <= 1e-12 * (1.0 + closed.abs()));
            }
        }
    }

    #[test]
    fn cex2_gradient_direct_form() {
        // chain rule for φ̂_22 = x̂(2x̂-1) ŷ(2ŷ-1) on K(1,1,s,s), simplified by hand
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let basis = QkBasis::new(2);
        for s in [0.52, 0.56, 0.625] {
            let map = BilinearMap::from_canonical(&CanonicalQuad::new(1.0, 1.0, s, s).unwrap());
            for _ in 0..50 {
                let (x, y): (f64, f64) = (rng.gen(), rng.gen());
                let g = physical_basis_grad_ref(&map, &basis, 2, 2, x, y).unwrap();
                let direct = x * ((2.0 * x - 1.0) * (4.0 * y - 1.0) + 2.0 * (s - 1.0) * y * (x - y))
                    / (1.0 + (s - 1.0) * (x + y));
                assert!((g[1] - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
            }
        }
    }

    #[test]
    fn reproduces_pullbacks_of_qk() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in 1..=4 {
            let c = random_canonical(&mut rng);
            let map = BilinearMap::from_canonical(&c);
            let terms = (0..=k as u32)
                .flat_map(|m| (0..=k as u32).map(move |n| (m, n)))
                .map(|(m, n)| (rng.gen_range(-1.0..1.0), m, n))
                .collect();
            let f = PullbackField { map, reference: ReferenceFn::Poly(Polynomial::new(terms)) };
            let qi = qk_interpolate(&map, k, &f);
            for _ in 0..20 {
                let (x, y): (f64, f64) = (rng.gen(), rng.gen());
                let p = map.forward(x, y);
                let want = f.value(p);
                assert!((qi.eval_ref(x, y).0 - want).abs() <= 1e-12 * (1.0 + want.abs()));
            }
        }
        let map = BilinearMap::from_canonical(&CanonicalQuad::new(1.0, 0.5, 0.7, 0.9).unwrap());
        let one = Polynomial::new(vec![(1.0, 0, 0)]);
        let qi = qk_interpolate(&map, 3, &one);
        assert!((qi.eval_ref(0.2, 0.9).0 - 1.0).abs() < 1e-14);
        assert!(qi.eval_ref(0.2, 0.9).1[0].abs() < 1e-12);
    }

    #[test]
    fn cex1_interpolant_has_only_four_terms() {
        let s = 0.2;
        let map = BilinearMap::from_canonical(&CanonicalQuad::new(1.0, s, s, 2.0 * s).unwrap());
        let qi = qk_interpolate(&map, 2, &cex1_field());
        for l in 0..=2 {
            assert!(qi.nodal_value(0, l).abs() < 1e-16 && qi.nodal_value(l, 0).abs() < 1e-16);
        }
        assert!(qi.nodal_value(1, 1).abs() > 1e-3);
    }
}
