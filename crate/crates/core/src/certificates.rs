//! Numerical certificates for the basis-function, trace and `I_p` inequalities.
//! Each reports the attained constant; none asserts a particular value.

use crate::geometry::{condition_flags, CanonicalQuad, Point2};
use crate::interpolants::{QkBasis, ScalarField};
use crate::ip::ip_integral;
use crate::norms::{basis_w1p, check_p, NormError};
use crate::quadrature::{gauss_legendre, triangle_rule};
use crate::reference_map::BilinearMap;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertificateError {
    #[error("hypotheses not satisfied: {0}")]
    FlagsNotSatisfied(String),
    #[error(transparent)]
    Norm(#[from] NormError),
}

/// `1/q` for the conjugate exponent of `p`.
#[inline]
pub fn inv_conjugate(p: f64) -> f64 {
    1.0 - 1.0 / p
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstPhiCase {
    /// Any basis function, `[Δ1,D2]`, `p < 3`; scale `h^{1/p}/|l|^{1/q}`.
    EdgeDelta1D2,
    /// Internal basis function, `[Δ1,D2,D3]`, `p < 3`; scale `h^{1/p}/a^{1/q}`.
    InternalDelta1D2D3,
    /// Internal basis function, `[D1,D2]`, any `p`; scale `h^{1/p}/a^{1/q}`.
    InternalD1D2,
    /// Edge basis function, `[D1,D2]`, any `p`; scale `h^{1/p}/|l|^{1/q}`.
    EdgeD1D2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstPhiCertificate {
    pub case: EstPhiCase,
    /// `|φ_ij|_{1,p,K}`.
    pub lhs: f64,
    pub rhs_scale: f64,
    pub ratio: f64,
    pub converged: bool,
}

fn estphi_scale(cq: &CanonicalQuad, p: f64, internal: bool) -> f64 {
    let h = cq.diameter();
    let len = if internal { cq.a } else { cq.l_len() };
    h.powf(1.0 / p) / len.powf(inv_conjugate(p))
}

/// Selects the applicable case for node `(i, j)`, checking the hypotheses with
/// constant `c`.
pub fn estphi_case(cq: &CanonicalQuad, k: usize, p: f64, i: usize, j: usize, c: f64) -> Result<EstPhiCase, CertificateError> {
    let f = condition_flags(cq, c);
    let internal = (1..k).contains(&i) && (1..k).contains(&j);
    let d1d2 = f.d1.holds && f.d2.holds;
    let delta1d2 = f.delta1.holds && f.d2.holds;
    let case = match (internal, d1d2) {
        (true, true) => Some(EstPhiCase::InternalD1D2),
        (false, true) => Some(EstPhiCase::EdgeD1D2),
        (true, false) if p < 3.0 && delta1d2 && f.d3.holds => Some(EstPhiCase::InternalDelta1D2D3),
        (false, false) if p < 3.0 && delta1d2 => Some(EstPhiCase::EdgeDelta1D2),
        _ => None,
    };
    case.ok_or_else(|| {
        CertificateError::FlagsNotSatisfied(format!(
            "node ({i},{j}) with p = {p}: D1={} D2={} Δ1={} D3={}",
            f.d1.holds, f.d2.holds, f.delta1.holds, f.d3.holds
        ))
    })
}

/// `|φ_ij|_{1,p,K}` against the scale of the applicable case.
pub fn certify_estphi(
    cq: &CanonicalQuad,
    k: usize,
    p: f64,
    i: usize,
    j: usize,
    c: f64,
) -> Result<EstPhiCertificate, CertificateError> {
    let case = estphi_case(cq, k, p, i, j, c)?;
    estphi_ratio(cq, k, p, i, j, case)
}

/// As [`certify_estphi`] but without checking the hypotheses, for sweeps that
/// are expected to leave them.
pub fn estphi_ratio(
    cq: &CanonicalQuad,
    k: usize,
    p: f64,
    i: usize,
    j: usize,
    case: EstPhiCase,
) -> Result<EstPhiCertificate, CertificateError> {
    check_p(p)?;
    let map = BilinearMap::from_canonical(cq);
    let lhs = basis_w1p(&map, &QkBasis::new(k), i, j, p, k + 6)?;
    let internal = matches!(case, EstPhiCase::InternalD1D2 | EstPhiCase::InternalDelta1D2D3);
    let rhs_scale = estphi_scale(cq, p, internal);
    Ok(EstPhiCertificate {
        case,
        lhs: lhs.value,
        rhs_scale,
        ratio: lhs.value / rhs_scale,
        converged: lhs.converged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

fn triangle_norms(tri: &[Point2; 3], field: &dyn ScalarField, p: f64) -> (f64, f64, f64) {
    let [a, b, c] = *tri;
    let (e1, e2) = (b - a, c - a);
    let jac = e1.cross(e2).abs();
    let rule = triangle_rule(16);
    let (mut lp, mut w1p) = (0.0, 0.0);
    for (&(u, v), w) in rule.points.iter().zip(&rule.weights) {
        let x = a + e1 * u + e2 * v;
        lp += w * jac * field.value(x).abs().powf(p);
        let g = field.grad(x).expect("trace check needs first derivatives");
        w1p += w * jac * g[0].hypot(g[1]).powf(p);
    }
    (lp.powf(1.0 / p), w1p.powf(1.0 / p), 0.5 * jac)
}

/// `‖u‖_{0,p,e} <= 2^{1/q}(|e|/|T|)^{1/p}(‖u‖_{0,p,T} + h_T |u|_{1,p,T})` for the side
/// `e` joining vertices `edge.0` and `edge.1` of `tri`. The seminorm uses the
/// Euclidean length of the gradient.
pub fn trace_inequality_check(tri: &[Point2; 3], edge: (usize, usize), field: &dyn ScalarField, p: f64) -> TraceCheck {
    let (s, t) = (tri[edge.0], tri[edge.1]);
    let len = s.dist(t);
    let (x, w) = gauss_legendre(24);
    let edge_int: f64 = x
        .iter()
        .zip(&w)
        .map(|(&u, &wu)| wu * len * field.value(s + (t - s) * u).abs().powf(p))
        .sum();
    let lhs = edge_int.powf(1.0 / p);
    let (lp, w1p, area) = triangle_norms(tri, field, p);
    let h_t = tri[0].dist(tri[1]).max(tri[1].dist(tri[2])).max(tri[0].dist(tri[2]));
    let rhs = 2f64.powf(inv_conjugate(p)) * (len / area).powf(1.0 / p) * (lp + h_t * w1p);
    TraceCheck { lhs, rhs, ok: lhs <= rhs * (1.0 + 1e-9) }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IpCertificate {
    pub ip: f64,
    /// `max{a/b^{p-1}, b/a^{p-1}} I_p`.
    pub lhs: f64,
    /// `h / |l|^{p-1}`.
    pub rhs_scale: f64,
    pub ratio: f64,
}

/// Attained constant of `max{a/b^{p-1}, b/a^{p-1}} I_p <= C h/|l|^{p-1}`.
pub fn ip_certificate(cq: &CanonicalQuad, p: f64) -> Result<IpCertificate, CertificateError> {
    let ip = ip_integral(cq, p)?.value;
    let (a, b) = (cq.a, cq.b);
    let lhs = (a / b.powf(p - 1.0)).max(b / a.powf(p - 1.0)) * ip;
    let rhs_scale = cq.diameter() / cq.l_len().powf(p - 1.0);
    Ok(IpCertificate { ip, lhs, rhs_scale, ratio: lhs / rhs_scale })
}

/// `min{a^{p-1}, b^{p-1}} / (|l| sin α)^{p-1}`: an upper bound for `I_p` under D1.
pub fn ip_sine_bound(cq: &CanonicalQuad, p: f64) -> f64 {
    let m = cq.a.min(cq.b).powf(p - 1.0);
    m / (cq.l_len() * cq.alpha().sin()).powf(p - 1.0)
}
