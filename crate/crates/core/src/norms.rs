//! `L^p` norms and `W^{m,p}` seminorms on a quadrilateral, computed on the
//! reference square with weight `|J_K|`.

use crate::geometry::Point2;
use crate::interpolants::{chain_rule, FieldError, Interpolant, QkBasis, ScalarField};
use crate::quadrature::{gauss_tensor_rule, graded_square_rule, graded_tensor_rule, QuadratureRule, MAX_GAUSS_POINTS};
use crate::reference_map::BilinearMap;
use serde::Serialize;
use thiserror::Error;

/// Refinement step between the two orders compared for the convergence flag.
pub const REFINE_STEP: usize = 4;
/// Relative difference between consecutive orders accepted as converged.
pub const CONVERGENCE_TOL: f64 = 1e-8;
/// Corner Jacobian ratio below which the graded rule is used.
pub const GRADING_RATIO: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NormError {
    #[error("exponent p = {0} outside [1, 64]")]
    InvalidP(f64),
    #[error("Gauss order {0} outside 1..=60")]
    InvalidOrder(usize),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormResult {
    pub value: f64,
    pub p: f64,
    /// Gauss points per direction (per cell for graded rules).
    pub order: usize,
    /// `|value(order) - value(order + 4)|`.
    pub estimated_error: f64,
    pub converged: bool,
}

pub fn default_order(k: usize) -> usize {
    k + 6
}

pub fn check_p(p: f64) -> Result<(), NormError> {
    if (1.0..=64.0).contains(&p) {
        Ok(())
    } else {
        Err(NormError::InvalidP(p))
    }
}

fn check_order(n: usize) -> Result<(), NormError> {
    if (1..=MAX_GAUSS_POINTS - REFINE_STEP).contains(&n) {
        Ok(())
    } else {
        Err(NormError::InvalidOrder(n))
    }
}

/// Reference-square rule for `map`: tensor Gauss when the corner Jacobians are
/// within a factor `1/GRADING_RATIO`; otherwise graded toward the corner of
/// smallest Jacobian, or toward the whole edge when its other corner is small too.
pub fn element_rule(map: &BilinearMap, n: usize) -> QuadratureRule {
    let corners = [(0u8, 0u8), (1, 0), (1, 1), (0, 1)];
    let dets: Vec<f64> = corners.iter().map(|&(x, y)| map.det(x as f64, y as f64)).collect();
    let (imin, jmin) = dets
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .expect("four corners");
    let jmax = dets.iter().copied().fold(0.0, f64::max);
    let r = jmin / jmax;
    if r >= GRADING_RATIO {
        return gauss_tensor_rule(n);
    }
    let levels_for = |ratio: f64| ((1.0 / ratio.max(1e-300)).log2().ceil() as usize + 2).clamp(4, 60);
    let levels = levels_for(r);
    let (next, prev) = ((imin + 1) % 4, (imin + 3) % 4);
    let nb = if dets[next] <= dets[prev] { next } else { prev };
    if dets[nb] / jmax >= GRADING_RATIO {
        return graded_square_rule(n, levels, corners[imin]);
    }
    // degenerate edge from corner imin to nb: grade across it, and along it
    // toward imin when the two ends differ enough
    let along = if jmin / dets[nb] < GRADING_RATIO { levels_for(jmin / dets[nb]) } else { 0 };
    let c = corners[imin];
    if corners[nb].0 == c.0 {
        graded_tensor_rule(n, (levels, along), c)
    } else {
        graded_tensor_rule(n, (along, levels), c)
    }
}

/// `∫_K g` where `g` receives the reference point, its image and `|J|` is applied here.
pub fn integrate(map: &BilinearMap, rule: &QuadratureRule, g: impl Fn(f64, f64, Point2) -> f64) -> f64 {
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(&(x, y), w)| w * map.det(x, y).abs() * g(x, y, map.forward(x, y)))
        .sum()
}

/// Runs `density` (returning several `Σ|·|^p` integrands at once) at orders `n`
/// and `n + 4` and returns the two integral vectors.
fn two_orders<const N: usize>(
    map: &BilinearMap,
    n: usize,
    density: impl Fn(f64, f64, Point2) -> [f64; N],
) -> ([f64; N], [f64; N]) {
    let run = |order: usize| {
        let rule = element_rule(map, order);
        let mut acc = [0.0; N];
        for (&(x, y), w) in rule.points.iter().zip(&rule.weights) {
            let jw = w * map.det(x, y).abs();
            let vals = density(x, y, map.forward(x, y));
            for (a, v) in acc.iter_mut().zip(vals) {
                *a += jw * v;
            }
        }
        acc
    };
    (run(n), run(n + REFINE_STEP))
}

fn finish(p: f64, n: usize, coarse: f64, fine: f64, abs_floor: f64) -> NormResult {
    let v0 = coarse.max(0.0).powf(1.0 / p);
    let v1 = fine.max(0.0).powf(1.0 / p);
    let est = (v1 - v0).abs();
    NormResult {
        value: v1,
        p,
        order: n,
        estimated_error: est,
        converged: est <= CONVERGENCE_TOL * v1 + abs_floor,
    }
}

/// `‖u‖_{0,p,K}`.
pub fn lp_norm(map: &BilinearMap, field: &dyn ScalarField, p: f64, n: usize) -> Result<NormResult, NormError> {
    check_p(p)?;
    check_order(n)?;
    let (c, f) = two_orders(map, n, |_, _, x| [field.value(x).abs().powf(p)]);
    Ok(finish(p, n, c[0], f[0], 0.0))
}

/// `|u|_{m,p,K} = (∫ Σ_{|α|=m} |D^α u|^p)^{1/p}`.
pub fn wmp_seminorm(
    map: &BilinearMap,
    field: &dyn ScalarField,
    m: usize,
    p: f64,
    n: usize,
) -> Result<NormResult, NormError> {
    check_p(p)?;
    check_order(n)?;
    if m > field.max_order() {
        return Err(FieldError::DerivativeUnavailable { field: field.name(), order: m }.into());
    }
    let (c, f) = two_orders(map, n, |_, _, x| {
        let d = field.partials(x, m).expect("order checked above");
        [d.iter().map(|v| v.abs().powf(p)).sum()]
    });
    Ok(finish(p, n, c[0], f[0], 0.0))
}

pub fn w1p_seminorm(map: &BilinearMap, field: &dyn ScalarField, p: f64, n: usize) -> Result<NormResult, NormError> {
    wmp_seminorm(map, field, 1, p, n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorNorms {
    /// `‖u - Q_k u‖_{0,p,K}`.
    pub lp: NormResult,
    /// `|u - Q_k u|_{1,p,K}`.
    pub w1p: NormResult,
    /// `‖u‖_{0,p,K}`, used as the scale of the convergence floor.
    pub u_lp: f64,
    /// `|u|_{1,p,K}`.
    pub u_w1p: f64,
}

/// Both error norms of `Q_k u`, evaluated without inverting the map: `Q_k u`
/// lives on the reference square and `u` is sampled at the images.
pub fn interpolation_error(
    interp: &Interpolant,
    field: &dyn ScalarField,
    p: f64,
    n: usize,
) -> Result<ErrorNorms, NormError> {
    check_p(p)?;
    check_order(n)?;
    if field.max_order() < 1 {
        return Err(FieldError::DerivativeUnavailable { field: field.name(), order: 1 }.into());
    }
    let map = &interp.map;
    let (c, f) = two_orders(map, n, |x, y, pt| {
        let (qv, qg) = interp.eval_ref(x, y);
        let u = field.value(pt);
        let g = field.grad(pt).expect("order checked above");
        [
            (u - qv).abs().powf(p),
            (g[0] - qg[0]).abs().powf(p) + (g[1] - qg[1]).abs().powf(p),
            u.abs().powf(p),
            g[0].abs().powf(p) + g[1].abs().powf(p),
        ]
    });
    let u_lp = f[2].powf(1.0 / p);
    let u_w1p = f[3].powf(1.0 / p);
    Ok(ErrorNorms {
        lp: finish(p, n, c[0], f[0], 1e-12 * u_lp),
        w1p: finish(p, n, c[1], f[1], 1e-12 * u_w1p),
        u_lp,
        u_w1p,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Axis {
    X,
    Y,
}

/// `‖∂φ_ij/∂x‖_{0,p,K}` or `‖∂φ_ij/∂y‖_{0,p,K}`.
pub fn basis_derivative_norm(
    map: &BilinearMap,
    basis: &QkBasis,
    i: usize,
    j: usize,
    axis: Axis,
    p: f64,
    n: usize,
) -> Result<NormResult, NormError> {
    check_p(p)?;
    check_order(n)?;
    let k = basis.k();
    assert!(i <= k && j <= k, "basis index out of range");
    let (c, f) = two_orders(map, n, |x, y, _| {
        let (_, gx, gy) = basis.value_grad(i, j, x, y).expect("index checked");
        let g = chain_rule(map, x, y, gx, gy);
        [match axis {
            Axis::X => g[0],
            Axis::Y => g[1],
        }
        .abs()
        .powf(p)]
    });
    Ok(finish(p, n, c[0], f[0], 0.0))
}

/// `|φ_ij|_{1,p,K}`.
pub fn basis_w1p(map: &BilinearMap, basis: &QkBasis, i: usize, j: usize, p: f64, n: usize) -> Result<NormResult, NormError> {
    check_p(p)?;
    check_order(n)?;
    let (c, f) = two_orders(map, n, |x, y, _| {
        let (_, gx, gy) = basis.value_grad(i, j, x, y).expect("index checked");
        let g = chain_rule(map, x, y, gx, gy);
        [g[0].abs().powf(p) + g[1].abs().powf(p)]
    });
    Ok(finish(p, n, c[0], f[0], 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CanonicalQuad;
    use crate::interpolants::{cex1_field, qk_interpolate, Polynomial, TrigField};

    fn map(a: f64, b: f64, at: f64, bt: f64) -> BilinearMap {
        BilinearMap::from_canonical(&CanonicalQuad::new(a, b, at, bt).unwrap())
    }

    #[test]
    fn constant_on_square() {
        let one = Polynomial::new(vec![(1.0, 0, 0)]);
        let r = lp_norm(&map(1.0, 1.0, 1.0, 1.0), &one, 2.0, 8).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15 && r.converged);
        assert!(lp_norm(&map(1.0, 1.0, 1.0, 1.0), &one, 0.5, 8).is_err());
        assert!(lp_norm(&map(1.0, 1.0, 1.0, 1.0), &one, 2.0, 61).is_err());
    }

    #[test]
    fn lp_of_constant_is_area_power() {
        let one = Polynomial::new(vec![(1.0, 0, 0)]);
        for s in [0.3, 0.1, 0.01] {
            let m = map(1.0, s, s, 2.0 * s);
            let area = m.quad().area();
            assert!((area - s * (2.0 + s) / 2.0).abs() < 1e-15);
            for p in [1.0, 2.0, 3.5] {
                let r = lp_norm(&m, &one, p, 8).unwrap();
                assert!((r.value - area.powf(1.0 / p)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn cex1_third_seminorm() {
        let u = cex1_field();
        for s in [0.4, 0.1, 0.02] {
            let m = map(1.0, s, s, 2.0 * s);
            let area = s * (2.0 + s) / 2.0;
            for p in [1.0, 2.0, 2.5] {
                let r = wmp_seminorm(&m, &u, 3, p, 8).unwrap();
                assert!((r.value / (6.0 * area.powf(1.0 / p)) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn seminorm_of_linear_field() {
        // |2x + 3y|_{1,p,K}^p = (2^p + 3^p)|K|
        let f = Polynomial::new(vec![(2.0, 1, 0), (3.0, 0, 1)]);
        let m = map(1.3, 0.7, 0.9, 1.2);
        let area = m.quad().area();
        let r = w1p_seminorm(&m, &f, 3.0, 8).unwrap();
        assert!((r.value - ((8.0 + 27.0) * area).powf(1.0 / 3.0)).abs() < 1e-13);
    }

    #[test]
    fn cex1_basis_norm_matches_direct_integrand() {
        // ∫∫ 2^{4p} x̂^p |(s-1)ŷ(x̂-ŷ)+(1-x̂)(1-2ŷ)|^p / (s^{p-1}[1+x̂+(s-1)ŷ]^{p-1})
        let basis = QkBasis::new(2);
        for s in [0.2, 0.05] {
            let m = map(1.0, s, s, 2.0 * s);
            // odd or fractional p puts a kink in |·|^p where the derivative changes sign
            for (p, tol) in [(1.5, 1e-4), (2.0, 1e-8), (4.0, 1e-8)] {
                let r = basis_derivative_norm(&m, &basis, 1, 1, Axis::Y, p, 10).unwrap();
                assert_eq!(r.converged, tol < 1e-6);
                let rule = gauss_tensor_rule(40);
                let direct = rule.integrate(|x, y| {
                    2f64.powf(4.0 * p) * x.powf(p) * ((s - 1.0) * y * (x - y) + (1.0 - x) * (1.0 - 2.0 * y)).abs().powf(p)
                        / (s.powf(p - 1.0) * (1.0 + x + (s - 1.0) * y).powf(p - 1.0))
                });
                assert!((r.value / direct.powf(1.0 / p) - 1.0).abs() < tol, "s={s} p={p}");
            }
        }
    }

    #[test]
    fn error_norms_vanish_on_reproduction_and_scale() {
        let m = map(1.0, 0.8, 0.7, 0.9);
        let u = TrigField::unit();
        let qi = qk_interpolate(&m, 2, &u);
        let e = interpolation_error(&qi, &u, 2.0, 8).unwrap();
        assert!(e.lp.value > 0.0 && e.w1p.value > e.lp.value * 0.1);
        assert!(e.lp.converged && e.w1p.converged);
        let lin = Polynomial::new(vec![(1.0, 0, 0), (0.5, 1, 0), (-2.0, 0, 1)]);
        let qi = qk_interpolate(&m, 1, &lin);
        let e = interpolation_error(&qi, &lin, 2.0, 7).unwrap();
        assert!(e.w1p.value <= 1e-12 * e.u_w1p);
    }

    #[test]
    fn grading_triggers_near_degeneracy() {
        assert_eq!(element_rule(&map(1.0, 1.0, 1.0, 1.0), 5).kind, crate::quadrature::RuleKind::SquareTensor);
        let r = element_rule(&map(1.0, 1.0, 0.5001, 0.5001), 5);
        assert_eq!(r.kind, crate::quadrature::RuleKind::SquareGraded);
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}
