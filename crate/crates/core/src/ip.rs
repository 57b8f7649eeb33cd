//! `I_p = ∫₀¹∫₀¹ (1 + αx̂ + βŷ)^{1-p}` with `α = b̃/b - 1`, `β = ã/a - 1`.

use crate::geometry::CanonicalQuad;
use crate::norms::{check_p, NormError, CONVERGENCE_TOL, REFINE_STEP};
use crate::quadrature::{gauss_legendre, gauss_tensor_rule, graded_line_rule, graded_square_rule};
use serde::Serialize;

/// Certificate value below which the denominator is treated as vanishing at `(1,1)`.
pub const NEAR_SINGULAR: f64 = 1e-12;
/// Below this, a coefficient is too small for the four-term closed form.
const SMALL_COEF: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IpMethod {
    ClosedForm,
    SemiAnalytic,
    Quadrature,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IpResult {
    pub value: f64,
    pub p: f64,
    pub converged: bool,
    pub estimated_error: f64,
    /// `ã/a + b̃/b - 1`.
    pub certificate: f64,
    pub near_singular: bool,
    pub method: IpMethod,
}

fn coefficients(cq: &CanonicalQuad) -> (f64, f64) {
    (cq.b_tilde / cq.b - 1.0, cq.a_tilde / cq.a - 1.0)
}

/// Second antiderivative of `t^{1-p}`, up to affine terms that cancel in the
/// four-corner difference.
fn g2(t: f64, p: f64) -> f64 {
    if p == 2.0 {
        t * t.ln() - t
    } else if p == 3.0 {
        -t.ln()
    } else {
        t.powf(3.0 - p) / ((2.0 - p) * (3.0 - p))
    }
}

/// `∫₀¹ (c + αx)^{1-p} dx` for `c, c + α > 0`.
fn line_integral(c: f64, alpha: f64, p: f64) -> f64 {
    if p == 2.0 {
        // ln(e/c)/α, with ln_1p to keep precision for small α/c
        (alpha / c).ln_1p() / alpha
    } else {
        let q = 2.0 - p;
        // (e^q - c^q)/(αq) = c^q ((1 + α/c)^q - 1)/(αq)
        c.powf(q) * (q * (alpha / c).ln_1p()).exp_m1() / (alpha * q)
    }
}

/// Exact four-corner formula, valid when both coefficients are not small.
fn closed_form(alpha: f64, beta: f64, p: f64) -> f64 {
    (g2(1.0 + alpha + beta, p) - g2(1.0 + alpha, p) - g2(1.0 + beta, p) + g2(1.0, p)) / (alpha * beta)
}

/// Exact inner integral along the larger coefficient, graded Gauss along the other.
fn semi_analytic(alpha: f64, beta: f64, p: f64, n: usize) -> f64 {
    let (big, small) = if alpha.abs() >= beta.abs() { (alpha, beta) } else { (beta, alpha) };
    // c(y) = 1 + small*y; the inner integrand is largest where min(c, c + big) is small
    let at = |y: f64| (1.0 + small * y).min(1.0 + small * y + big);
    let (lo, hi) = (at(0.0), at(1.0));
    let ratio = lo.min(hi) / lo.max(hi);
    let (nodes, weights) = if ratio < 0.25 {
        let levels = ((1.0 / ratio).log2().ceil() as usize + 2).clamp(4, 60);
        graded_line_rule(n, levels, if hi < lo { 1 } else { 0 })
    } else {
        gauss_legendre(n)
    };
    nodes
        .iter()
        .zip(&weights)
        .map(|(&y, w)| w * line_integral(1.0 + small * y, big, p))
        .sum()
}

/// Plain 2D quadrature of the integrand, graded toward `(1,1)` when needed and
/// refined until two consecutive orders agree.
pub fn ip_quadrature(cq: &CanonicalQuad, p: f64) -> Result<IpResult, NormError> {
    check_p(p)?;
    let (alpha, beta) = coefficients(cq);
    let cert = cq.certificate();
    let corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
    let vals: Vec<f64> = corners.iter().map(|&(x, y)| 1.0 + alpha * x + beta * y).collect();
    let (imin, vmin) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .expect("corners");
    let vmax = vals.iter().copied().fold(0.0, f64::max);
    let f = |x: f64, y: f64| (1.0 + alpha * x + beta * y).powf(1.0 - p);
    let run = |n: usize| {
        let r = vmin / vmax;
        let rule = if r < 0.25 {
            let levels = ((1.0 / r).log2().ceil() as usize + 2).clamp(4, 60);
            let c = corners[imin];
            graded_square_rule(n, levels, (c.0 as u8, c.1 as u8))
        } else {
            gauss_tensor_rule(n)
        };
        rule.integrate(f)
    };
    let mut n = 8;
    let mut prev = run(n);
    loop {
        let next = run(n + REFINE_STEP);
        let est = (next - prev).abs();
        let converged = est <= 0.1 * CONVERGENCE_TOL * next.abs();
        if converged || n + 2 * REFINE_STEP > 60 {
            return Ok(IpResult {
                value: next,
                p,
                converged,
                estimated_error: est,
                certificate: cert,
                near_singular: cert < NEAR_SINGULAR,
                method: IpMethod::Quadrature,
            });
        }
        n += REFINE_STEP;
        prev = next;
    }
}

/// `I_p`: closed form for integer `p` (semi-analytic when a coefficient is
/// small), adaptive quadrature otherwise.
pub fn ip_integral(cq: &CanonicalQuad, p: f64) -> Result<IpResult, NormError> {
    check_p(p)?;
    let (alpha, beta) = coefficients(cq);
    let cert = cq.certificate();
    let near_singular = cert < NEAR_SINGULAR;
    let exact = |value: f64, method| IpResult {
        value,
        p,
        converged: value.is_finite(),
        estimated_error: 0.0,
        certificate: cert,
        near_singular,
        method,
    };
    if p == 1.0 {
        return Ok(exact(1.0, IpMethod::ClosedForm));
    }
    if p.fract() != 0.0 {
        return ip_quadrature(cq, p);
    }
    if alpha.abs() >= SMALL_COEF && beta.abs() >= SMALL_COEF {
        return Ok(exact(closed_form(alpha, beta, p), IpMethod::ClosedForm));
    }
    if alpha.abs().max(beta.abs()) < SMALL_COEF {
        // integrand within a few percent of 1 and analytic: plain Gauss is exact to roundoff
        let v = gauss_tensor_rule(20).integrate(|x, y| (1.0 + alpha * x + beta * y).powf(1.0 - p));
        return Ok(exact(v, IpMethod::Quadrature));
    }
    let n = 16;
    let v0 = semi_analytic(alpha, beta, p, n);
    let v1 = semi_analytic(alpha, beta, p, n + REFINE_STEP);
    let est = (v1 - v0).abs();
    Ok(IpResult {
        value: v1,
        p,
        converged: est <= CONVERGENCE_TOL * v1.abs(),
        estimated_error: est,
        certificate: cert,
        near_singular,
        method: IpMethod::SemiAnalytic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cq(a: f64, b: f64, at: f64, bt: f64) -> CanonicalQuad {
        CanonicalQuad::new(a, b, at, bt).unwrap()
    }

    /// Recursive adaptive Simpson in each direction.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let whole = (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let left = (m - a) / 6.0 * (f(a) + 4.0 * f(lm) + f(m));
        let right = (b - m) / 6.0 * (f(m) + 4.0 * f(rm) + f(b));
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        adaptive_simpson(f, a, m, tol / 2.0, depth - 1) + adaptive_simpson(f, m, b, tol / 2.0, depth - 1)
    }

    #[test]
    fn trivial_values() {
        for p in [1.0, 2.0, 3.0, 4.5] {
            assert!((ip_integral(&cq(1.3, 0.7, 1.3, 0.7), p).unwrap().value - 1.0).abs() < 1e-14);
        }
        for c in [cq(1.0, 1.0, 0.6, 0.6), cq(2.0, 0.3, 0.5, 0.9)] {
            assert_eq!(ip_integral(&c, 1.0).unwrap().value, 1.0);
        }
    }

    #[test]
    fn closed_form_against_adaptive_simpson() {
        // K(1,1,1/2,3/4): integrand 1/(1 - x/4 - y/2)
        let inner = |y: f64| adaptive_simpson(&|x: f64| 1.0 / (1.0 - x / 4.0 - y / 2.0), 0.0, 1.0, 1e-13, 30);
        let reference = adaptive_simpson(&inner, 0.0, 1.0, 1e-12, 30);
        let r = ip_integral(&cq(1.0, 1.0, 0.5, 0.75), 2.0).unwrap();
        assert_eq!(r.method, IpMethod::ClosedForm);
        assert!((r.value - reference).abs() <= 1e-10 * reference);
    }

    #[test]
    fn methods_agree() {
        let cases = [
            cq(1.0, 1.0, 0.5, 0.75),
            cq(1.0, 1.0, 0.51, 0.51),
            cq(1.0, 0.2, 0.2, 0.4),
            cq(2.0, 1.0, 1.8, 0.3),
            cq(2.0, 1.0, 2.01, 0.3),
            cq(1.0, 1.0, 1.002, 0.999),
            cq(1.0, 1.0, 0.5000001, 0.5000001),
            cq(1.0, 1.0, 0.995, 0.1),
        ];
        for c in cases {
            for p in [1.0, 2.0, 3.0, 4.0] {
                let a = ip_integral(&c, p).unwrap();
                let b = ip_quadrature(&c, p).unwrap();
                assert!(b.converged, "{c:?} p={p}");
                assert!((a.value - b.value).abs() <= 1e-9 * b.value, "{c:?} p={p}: {a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn near_singular_flag() {
        let c = cq(1.0, 1.0, 0.5 + 1e-13, 0.5 + 1e-13);
        let r = ip_integral(&c, 2.0).unwrap();
        assert!(r.near_singular);
        assert!(r.value.is_finite());
    }

    #[test]
    fn cex2_family_growth_p4() {
        // for K(1,1,s,s) and p > 3, I_p grows like (2s-1)^{3-p}
        let mut prev = 0.0;
        for e in 3..10 {
            let s = 0.5 + 0.5f64.powi(e);
            let v = ip_integral(&cq(1.0, 1.0, s, s), 4.0).unwrap().value;
            assert!(v > prev);
            prev = v;
        }
        let v1 = ip_integral(&cq(1.0, 1.0, 0.5 + 2f64.powi(-12), 0.5 + 2f64.powi(-12)), 4.0).unwrap().value;
        let v2 = ip_integral(&cq(1.0, 1.0, 0.5 + 2f64.powi(-13), 0.5 + 2f64.powi(-13)), 4.0).unwrap().value;
        assert!((v2 / v1 - 2.0).abs() < 0.01);
    }
}
