//! Gauss–Legendre rules on the unit interval, the unit square and the unit
//! triangle, plus composite rules graded toward a corner.

use serde::Serialize;

pub const MAX_GAUSS_POINTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RuleKind {
    SquareTensor,
    SquareGraded,
    Triangle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub kind: RuleKind,
    /// Polynomial exactness degree of the underlying 1D rule.
    pub order: usize,
    pub points: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&(x, y), w)| w * f(x, y)).sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `n`-point Gauss–Legendre nodes and weights on `[0, 1]`.
///
/// Newton iteration on `P_n` from the Chebyshev-like initial guesses.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!((1..=MAX_GAUSS_POINTS).contains(&n), "Gauss order must be in 1..=64");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            x = 0.0;
            dp = 1.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1, 1] -> [0, 1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// `n × n` tensor rule on the unit square, exact on `Q_{2n-1}`.
pub fn gauss_tensor_rule(n: usize) -> QuadratureRule {
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            points.push((x[i], x[j]));
            weights.push(w[i] * w[j]);
        }
    }
    QuadratureRule { kind: RuleKind::SquareTensor, order: 2 * n - 1, points, weights }
}

/// Collapsed (Duffy) tensor rule on the unit triangle `x, y >= 0, x + y <= 1`.
pub fn triangle_rule(n: usize) -> QuadratureRule {
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let u = x[i];
            let v = x[j];
            points.push((u, v * (1.0 - u)));
            weights.push(w[i] * w[j] * (1.0 - u));
        }
    }
    QuadratureRule { kind: RuleKind::Triangle, order: 2 * n - 2, points, weights }
}

/// Composite 1D rule on `[0, 1]` over the dyadic intervals `[2^{-l-1}, 2^{-l}]`
/// and `[0, 2^{-levels}]`, graded toward `toward` (0 or 1).
pub fn graded_line_rule(n: usize, levels: usize, toward: u8) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut push = |lo: f64, hi: f64| {
        for (xi, wi) in x.iter().zip(&w) {
            let t = lo + (hi - lo) * xi;
            nodes.push(if toward == 0 { t } else { 1.0 - t });
            weights.push((hi - lo) * wi);
        }
    };
    for l in 0..levels {
        let hi = 0.5f64.powi(l as i32);
        push(hi / 2.0, hi);
    }
    push(0.0, 0.5f64.powi(levels as i32));
    (nodes, weights)
}

/// Composite tensor rule on the unit square graded toward `corner`: L-shaped
/// dyadic layers (three squares each) around the corner plus the innermost square.
pub fn graded_square_rule(n: usize, levels: usize, corner: (u8, u8)) -> QuadratureRule {
    let base = gauss_tensor_rule(n);
    let mut points = Vec::with_capacity(base.len() * (3 * levels + 1));
    let mut weights = Vec::with_capacity(points.capacity());
    let flip = |t: f64, c: u8| if c == 0 { t } else { 1.0 - t };
    let mut push = |x0: f64, y0: f64, size: f64| {
        for (&(u, v), w) in base.points.iter().zip(&base.weights) {
            points.push((flip(x0 + size * u, corner.0), flip(y0 + size * v, corner.1)));
            weights.push(size * size * w);
        }
    };
    for l in 0..levels {
        let half = 0.5f64.powi(l as i32 + 1);
        push(half, 0.0, half);
        push(0.0, half, half);
        push(half, half, half);
    }
    push(0.0, 0.0, 0.5f64.powi(levels as i32));
    QuadratureRule { kind: RuleKind::SquareGraded, order: base.order, points, weights }
}

/// Tensor product of two graded line rules; `levels = 0` in a direction gives
/// plain Gauss there. Resolves a whole degenerate edge as well as its corners.
pub fn graded_tensor_rule(n: usize, levels: (usize, usize), toward: (u8, u8)) -> QuadratureRule {
    let line = |l: usize, t: u8| if l == 0 { gauss_legendre(n) } else { graded_line_rule(n, l, t) };
    let (x, wx) = line(levels.0, toward.0);
    let (y, wy) = line(levels.1, toward.1);
    let mut points = Vec::with_capacity(x.len() * y.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for (xi, wi) in x.iter().zip(&wx) {
        for (yj, wj) in y.iter().zip(&wy) {
            points.push((*xi, *yj));
            weights.push(wi * wj);
        }
    }
    QuadratureRule { kind: RuleKind::SquareGraded, order: 2 * n - 1, points, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_measure() {
        for n in [1, 2, 5, 17, 40, 64] {
            let (_, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14, "n = {n}");
            assert!(w.iter().all(|&v| v > 0.0));
            assert!((gauss_tensor_rule(n).weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!((triangle_rule(n).weights.iter().sum::<f64>() - 0.5).abs() < 1e-14);
        }
        let g = graded_square_rule(6, 12, (1, 1));
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let (_, w) = graded_line_rule(5, 20, 1);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let t = graded_tensor_rule(4, (10, 0), (1, 0));
        assert_eq!(t.len(), 44 * 4);
        assert!((t.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn one_point_rule() {
        let r = gauss_tensor_rule(1);
        assert_eq!(r.points, vec![(0.5, 0.5)]);
        assert_eq!(r.weights, vec![1.0]);
    }

    #[test]
    fn polynomial_exactness() {
        let r = gauss_tensor_rule(3);
        let v = r.integrate(|x, y| x.powi(5) * y.powi(4));
        assert!((v - 1.0 / 30.0).abs() <= 1e-15);
        for n in 1..=20 {
            let (x, w) = gauss_legendre(n);
            for d in 0..2 * n {
                let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d as i32)).sum();
                assert!((v - 1.0 / (d as f64 + 1.0)).abs() < 1e-14, "n = {n}, d = {d}");
            }
        }
        // ∫_T x^2 y = 2! 1! / 5! = 1/60
        let t = triangle_rule(3);
        assert!((t.integrate(|x, y| x * x * y) - 1.0 / 60.0).abs() < 1e-15);
    }

    #[test]
    fn exponential_on_square() {
        let r = gauss_tensor_rule(10);
        let e1 = std::f64::consts::E - 1.0;
        assert!((r.integrate(|x, y| (x + y).exp()) / (e1 * e1) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn graded_rule_resolves_corner_singularity() {
        // ∫∫ (x + y)^{-1/2} = 4(2^{3/2} - 2)/3
        let exact = 4.0 * (2.0f64.powf(1.5) - 2.0) / 3.0;
        let g = graded_square_rule(10, 40, (0, 0));
        assert!((g.integrate(|x, y| (x + y).powf(-0.5)) - exact).abs() < 1e-10);
        let g = graded_square_rule(10, 40, (1, 1));
        assert!((g.integrate(|x, y| (2.0 - x - y).powf(-0.5)) - exact).abs() < 1e-10);
        // edge singularity: ∫∫ y^{-1/2} = 2
        let t = graded_tensor_rule(10, (0, 60), (1, 0));
        assert!((t.integrate(|_, y| y.powf(-0.5)) - 2.0).abs() < 1e-9);
    }
}
