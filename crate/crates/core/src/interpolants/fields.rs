//! Scalar fields with analytic partial derivatives, and the built-in registry.

use super::QkBasis;
use crate::geometry::{ConvexQuad, Point2};
use crate::reference_map::BilinearMap;
use std::f64::consts::PI;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("unknown field '{0}'")]
    Unknown(String),
    #[error("cannot parse polynomial spec '{0}'")]
    BadPolynomial(String),
    #[error("derivative of order {order} unavailable for field '{field}'")]
    DerivativeUnavailable { field: String, order: usize },
}

/// A function on the plane with partial derivatives up to `max_order()`.
pub trait ScalarField: Send + Sync {
    /// `∂^{dx+dy} u / ∂x^{dx} ∂y^{dy}` at `p`, or `None` beyond `max_order()`.
    fn derivative(&self, p: Point2, dx: usize, dy: usize) -> Option<f64>;

    fn max_order(&self) -> usize;

    fn name(&self) -> String;

    /// True when derivatives come from finite differences.
    fn is_approximate(&self) -> bool {
        false
    }

    fn value(&self, p: Point2) -> f64 {
        self.derivative(p, 0, 0).expect("every field has values")
    }

    fn grad(&self, p: Point2) -> Option<[f64; 2]> {
        Some([self.derivative(p, 1, 0)?, self.derivative(p, 0, 1)?])
    }

    /// All order-`m` partials `[∂x^m, ∂x^{m-1}∂y, ..., ∂y^m]`.
    fn partials(&self, p: Point2, m: usize) -> Result<Vec<f64>, FieldError> {
        (0..=m)
            .map(|dy| self.derivative(p, m - dy, dy))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| FieldError::DerivativeUnavailable {
                field: self.name(),
                order: m,
            })
    }
}

/// `Σ c x^m y^n`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Polynomial {
    pub terms: Vec<(f64, u32, u32)>,
    label: Option<String>,
}

impl Polynomial {
    pub fn new(terms: Vec<(f64, u32, u32)>) -> Self {
        Self { terms, label: None }
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    /// Polynomial in `x` alone from its roots: `Π (x - r)`.
    pub fn from_x_roots(roots: &[f64]) -> Self {
        let mut c = vec![1.0];
        for &r in roots {
            let mut next = vec![0.0; c.len() + 1];
            for (d, &v) in c.iter().enumerate() {
                next[d + 1] += v;
                next[d] -= r * v;
            }
            c = next;
        }
        Self::new(
            c.into_iter()
                .enumerate()
                .filter(|(_, v)| *v != 0.0)
                .map(|(d, v)| (v, d as u32, 0))
                .collect(),
        )
    }

    /// Parses `c@m,n;c@m,n;...` (the part after `poly:`).
    pub fn parse(spec: &str) -> Result<Self, FieldError> {
        let bad = || FieldError::BadPolynomial(spec.to_string());
        let mut terms = Vec::new();
        for part in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (c, mn) = part.split_once('@').ok_or_else(bad)?;
            let (m, n) = mn.split_once(',').ok_or_else(bad)?;
            let c: f64 = c.trim().parse().map_err(|_| bad())?;
            let m: u32 = m.trim().parse().map_err(|_| bad())?;
            let n: u32 = n.trim().parse().map_err(|_| bad())?;
            if !c.is_finite() || m > 20 || n > 20 {
                return Err(bad());
            }
            terms.push((c, m, n));
        }
        if terms.is_empty() {
            return Err(bad());
        }
        Ok(Self::new(terms).with_label(&format!("poly:{spec}")))
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|&(_, m, n)| m + n).max().unwrap_or(0)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(c, m, n)| c * x.powi(m as i32) * y.powi(n as i32))
            .sum()
    }

    pub fn eval_derivative(&self, x: f64, y: f64, dx: usize, dy: usize) -> f64 {
        self.terms
            .iter()
            .map(|&(c, m, n)| {
                if dx as u32 > m || dy as u32 > n {
                    return 0.0;
                }
                let fm: f64 = (0..dx as u32).map(|t| (m - t) as f64).product();
                let fn_: f64 = (0..dy as u32).map(|t| (n - t) as f64).product();
                c * fm * fn_ * x.powi((m - dx as u32) as i32) * y.powi((n - dy as u32) as i32)
            })
            .sum()
    }
}

impl ScalarField for Polynomial {
    fn derivative(&self, p: Point2, dx: usize, dy: usize) -> Option<f64> {
        Some(self.eval_derivative(p.x, p.y, dx, dy))
    }

    fn max_order(&self) -> usize {
        usize::MAX
    }

    fn name(&self) -> String {
        self.label.clone().unwrap_or_else(|| "poly".into())
    }
}

/// `x (x - 1/2)(x - 1)`.
pub fn cex1_field() -> Polynomial {
    Polynomial::from_x_roots(&[0.0, 0.5, 1.0]).with_label("cex1")
}

/// `x (x - 1/4)(x - 3/4)(x - 3/8)(x - 1)`.
pub fn cex2_field() -> Polynomial {
    Polynomial::from_x_roots(&[0.0, 0.25, 0.75, 0.375, 1.0]).with_label("cex2")
}

/// `sin(π(x - x0)/wx) sin(π(y - y0)/wy)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrigField {
    pub x0: f64,
    pub y0: f64,
    pub wx: f64,
    pub wy: f64,
}

impl TrigField {
    /// `sin(πx) sin(πy)`.
    pub fn unit() -> Self {
        Self { x0: 0.0, y0: 0.0, wx: 1.0, wy: 1.0 }
    }

    /// The unit field composed with the bounding-box normalization of `quad`.
    pub fn boxed(quad: &ConvexQuad) -> Self {
        let (lo, hi) = quad.bounding_box();
        Self { x0: lo.x, y0: lo.y, wx: hi.x - lo.x, wy: hi.y - lo.y }
    }
}

/// `d^m/dt^m sin(c t + d) = c^m sin(c t + d + mπ/2)`.
fn sin_derivative(c: f64, arg: f64, m: usize) -> f64 {
    let shifted = match m % 4 {
        0 => arg.sin(),
        1 => arg.cos(),
        2 => -arg.sin(),
        _ => -arg.cos(),
    };
    c.powi(m as i32) * shifted
}

impl ScalarField for TrigField {
    fn derivative(&self, p: Point2, dx: usize, dy: usize) -> Option<f64> {
        let cx = PI / self.wx;
        let cy = PI / self.wy;
        Some(sin_derivative(cx, cx * (p.x - self.x0), dx) * sin_derivative(cy, cy * (p.y - self.y0), dy))
    }

    fn max_order(&self) -> usize {
        usize::MAX
    }

    fn name(&self) -> String {
        if *self == Self::unit() {
            "trig".into()
        } else {
            "trig-box".into()
        }
    }
}

/// Reference-square function pulled back to `K`: `u = û ∘ F⁻¹`.
#[derive(Clone, Debug)]
pub enum ReferenceFn {
    Poly(Polynomial),
    /// Basis function `φ̂_ij` of `Q_k`.
    Basis(QkBasis, usize, usize),
}

impl ReferenceFn {
    fn value_grad(&self, xh: f64, yh: f64) -> (f64, f64, f64) {
        match self {
            ReferenceFn::Poly(q) => (
                q.eval(xh, yh),
                q.eval_derivative(xh, yh, 1, 0),
                q.eval_derivative(xh, yh, 0, 1),
            ),
            ReferenceFn::Basis(b, i, j) => b.value_grad(*i, *j, xh, yh).expect("indices validated"),
        }
    }
}

/// `û ∘ F_K⁻¹`; derivatives up to order one through the chain rule.
#[derive(Clone, Debug)]
pub struct PullbackField {
    pub map: BilinearMap,
    pub reference: ReferenceFn,
}

impl ScalarField for PullbackField {
    fn derivative(&self, p: Point2, dx: usize, dy: usize) -> Option<f64> {
        if dx + dy > 1 {
            return None;
        }
        let (xh, yh) = self.map.inverse(p).ok()?;
        let (v, gx, gy) = self.reference.value_grad(xh, yh);
        if dx + dy == 0 {
            return Some(v);
        }
        let g = super::chain_rule(&self.map, xh, yh, gx, gy);
        Some(if dx == 1 { g[0] } else { g[1] })
    }

    fn max_order(&self) -> usize {
        1
    }

    fn name(&self) -> String {
        "pullback".into()
    }
}

type Closure = Box<dyn Fn(Point2) -> f64 + Send + Sync>;

/// Field known only through values; derivatives by central differences with
/// step `1e-6 h`.
pub struct FnField {
    f: Closure,
    step: f64,
    label: String,
}

impl FnField {
    pub fn new(label: &str, scale: f64, f: impl Fn(Point2) -> f64 + Send + Sync + 'static) -> Self {
        Self { f: Box::new(f), step: 1e-6 * scale, label: label.to_string() }
    }
}

impl fmt::Debug for FnField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnField").field("label", &self.label).field("step", &self.step).finish()
    }
}

impl ScalarField for FnField {
    fn derivative(&self, p: Point2, dx: usize, dy: usize) -> Option<f64> {
        let e = self.step;
        let f = |x: f64, y: f64| (self.f)(Point2::new(x, y));
        match (dx, dy) {
            (0, 0) => Some(f(p.x, p.y)),
            (1, 0) => Some((f(p.x + e, p.y) - f(p.x - e, p.y)) / (2.0 * e)),
            (0, 1) => Some((f(p.x, p.y + e) - f(p.x, p.y - e)) / (2.0 * e)),
            _ => None,
        }
    }

    fn max_order(&self) -> usize {
        1
    }

    fn name(&self) -> String {
        self.label.clone()
    }

    fn is_approximate(&self) -> bool {
        true
    }
}

/// Built-in field registry: `cex1`, `cex2`, `trig`, `trig-box` and `poly:<spec>`.
///
/// `trig-box` needs the element for its bounding-box normalization.
pub fn field_by_name(name: &str, quad: Option<&ConvexQuad>) -> Result<Box<dyn ScalarField>, FieldError> {
    match name {
        "cex1" => Ok(Box::new(cex1_field())),
        "cex2" => Ok(Box::new(cex2_field())),
        "trig" => Ok(Box::new(TrigField::unit())),
        "trig-box" => match quad {
            Some(q) => Ok(Box::new(TrigField::boxed(q))),
            None => Err(FieldError::Unknown("trig-box needs an element".into())),
        },
        other => match other.strip_prefix("poly:") {
            Some(spec) => Ok(Box::new(Polynomial::parse(spec)?)),
            None => Err(FieldError::Unknown(other.to_string())),
        },
    }
}
