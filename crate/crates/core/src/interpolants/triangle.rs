use super::{Polynomial, ScalarField};
use crate::geometry::Point2;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TriangleError {
    #[error("singular nodal system for T({a}, {b}), k = {k}")]
    SingularVandermonde { a: f64, b: f64, k: usize },
}

/// `Π_k u` on `T(a,b)` with vertices `(0,0), (a,0), (0,b)`; a global polynomial,
/// so evaluating it on `K` is its extension.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleInterpolant {
    pub a: f64,
    pub b: f64,
    pub k: usize,
    pub poly: Polynomial,
}

impl TriangleInterpolant {
    /// Nodes `M^T_ij = (aj/k, bi/k)`, `i + j <= k`.
    pub fn nodes(a: f64, b: f64, k: usize) -> Vec<(usize, usize, Point2)> {
        let kf = k as f64;
        (0..=k)
            .flat_map(|i| (0..=k - i).map(move |j| (i, j, Point2::new(a * j as f64 / kf, b * i as f64 / kf))))
            .collect()
    }

    pub fn value(&self, p: Point2) -> f64 {
        self.poly.eval(p.x, p.y)
    }
}

impl ScalarField for TriangleInterpolant {
    fn derivative(&self, p: Point2, dx: usize, dy: usize) -> Option<f64> {
        Some(self.poly.eval_derivative(p.x, p.y, dx, dy))
    }

    fn max_order(&self) -> usize {
        usize::MAX
    }

    fn name(&self) -> String {
        format!("P{}-triangle-interpolant", self.k)
    }
}

/// Solves the nodal system in the scaled monomials `(x/a)^m (y/b)^n`, `m + n <= k`,
/// with full pivoting.
pub fn triangle_pk_interpolate(
    a: f64,
    b: f64,
    k: usize,
    field: &dyn ScalarField,
) -> Result<TriangleInterpolant, TriangleError> {
    let singular = || TriangleError::SingularVandermonde { a, b, k };
    if !(a > 0.0 && b > 0.0) || k == 0 {
        return Err(singular());
    }
    let exps: Vec<(u32, u32)> = (0..=k as u32)
        .flat_map(|d| (0..=d).map(move |n| (d - n, n)))
        .collect();
    let nodes = TriangleInterpolant::nodes(a, b, k);
    let n = nodes.len();
    let mut v = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for (r, &(_, _, p)) in nodes.iter().enumerate() {
        for (c, &(m, e)) in exps.iter().enumerate() {
            v[(r, c)] = (p.x / a).powi(m as i32) * (p.y / b).powi(e as i32);
        }
        rhs[r] = field.value(p);
    }
    let lu = v.full_piv_lu();
    if !lu.is_invertible() {
        return Err(singular());
    }
    let coef = lu.solve(&rhs).ok_or_else(singular)?;
    let terms = exps
        .iter()
        .zip(coef.iter())
        .map(|(&(m, e), &c)| (c / (a.powi(m as i32) * b.powi(e as i32)), m, e))
        .collect();
    Ok(TriangleInterpolant { a, b, k, poly: Polynomial::new(terms) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interpolants::{qk_interpolate, TrigField};
    use crate::reference_map::BilinearMap;
    use crate::{geometry::CanonicalQuad, interpolants::cex1_field};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// P2 Lagrange basis on T(1,1) in barycentric form.
    fn p2_reference_interpolant(f: impl Fn(f64, f64) -> f64, x: f64, y: f64) -> f64 {
        let l = [1.0 - x - y, x, y];
        let vertex = |i: usize| l[i] * (2.0 * l[i] - 1.0);
        let edge = |i: usize, j: usize| 4.0 * l[i] * l[j];
        f(0.0, 0.0) * vertex(0)
            + f(1.0, 0.0) * vertex(1)
            + f(0.0, 1.0) * vertex(2)
            + f(0.5, 0.0) * edge(0, 1)
            + f(0.5, 0.5) * edge(1, 2)
            + f(0.0, 0.5) * edge(0, 2)
    }

    #[test]
    fn linear_and_cubic_examples() {
        let f = Polynomial::new(vec![(1.0, 1, 0), (1.0, 0, 1)]);
        let t = triangle_pk_interpolate(1.0, 1.0, 1, &f).unwrap();
        for p in [Point2::new(0.3, 0.2), Point2::new(2.0, -1.0)] {
            assert!((t.value(p) - (p.x + p.y)).abs() < 1e-14);
        }
        let cube = Polynomial::new(vec![(1.0, 3, 0)]);
        let t = triangle_pk_interpolate(1.0, 1.0, 2, &cube).unwrap();
        for (x, y) in [(0.5, 0.0), (0.2, 0.3), (0.7, 0.1)] {
            let want = p2_reference_interpolant(|x, _| x * x * x, x, y);
            assert!((t.value(Point2::new(x, y)) - want).abs() < 1e-14);
        }
        assert!((t.value(Point2::new(0.5, 0.0)) - 0.125).abs() < 1e-14);
    }

    #[test]
    fn reproduces_pk() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for k in 1..=4 {
            for _ in 0..10 {
                let (a, b) = (rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0));
                let terms = (0..=k as u32)
                    .flat_map(|d| (0..=d).map(move |n| (d - n, n)))
                    .map(|(m, n)| (rng.gen_range(-1.0..1.0), m, n))
                    .collect();
                let q = Polynomial::new(terms);
                let t = triangle_pk_interpolate(a, b, k, &q).unwrap();
                for _ in 0..10 {
                    let p = Point2::new(rng.gen_range(0.0..a), rng.gen_range(0.0..b));
                    let want = q.eval(p.x, p.y);
                    assert!((t.value(p) - want).abs() <= 1e-11 * (1.0 + want.abs()));
                }
            }
        }
        assert!(triangle_pk_interpolate(0.0, 1.0, 2, &cex1_field()).is_err());
    }

    #[test]
    fn error_splitting_identity() {
        // Π_k u - Q_k u = Σ_{i,j>=1} (Π_k u - u)(M_ij) φ_ij since P_k ∘ F ⊂ Q_k
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let u = TrigField { x0: 0.1, y0: -0.3, wx: 1.7, wy: 1.9 };
        for k in 1..=4 {
            let c = CanonicalQuad::new(1.0, 0.6, 0.8, 0.9).unwrap();
            let map = BilinearMap::from_canonical(&c);
            let pi = triangle_pk_interpolate(c.a, c.b, k, &u).unwrap();
            let qu = qk_interpolate(&map, k, &u);
            let grid = map.node_grid(k);
            let basis = crate::interpolants::QkBasis::new(k);
            for _ in 0..50 {
                let (x, y): (f64, f64) = (rng.gen(), rng.gen());
                let p = map.forward(x, y);
                let lhs = pi.value(p) - qu.eval_ref(x, y).0;
                let mut rhs = 0.0;
                for i in 1..=k {
                    for j in 1..=k {
                        let m = grid.node(i, j);
                        rhs += (pi.value(m) - u.value(m)) * basis.value_grad(i, j, x, y).unwrap().0;
                    }
                }
                assert!((lhs - rhs).abs() <= 1e-10, "k = {k}: {lhs} vs {rhs}");
            }
        }
    }
}
