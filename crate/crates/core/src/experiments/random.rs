//! Seeded generator of strictly convex quadrilaterals, from round to sliver.

use crate::geometry::{ConvexQuad, Point2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

/// Smallest interior angle the generator produces.
pub const MIN_RANDOM_ANGLE: f64 = 0.01;
const MAX_STRETCH: f64 = 50.0;
/// Every `DEGENERATE_EVERY`-th quad comes from a degenerating family.
const DEGENERATE_EVERY: usize = 10;

/// Four sorted points on the unit circle, stretched anisotropically (ratio up to
/// 50) and rotated. One draw in ten is instead a member of the min-angle,
/// max-angle or collapsing-side family with a random degeneracy parameter.
#[derive(Clone, Debug)]
pub struct RandomQuadGenerator {
    rng: ChaCha8Rng,
    count: usize,
}

impl RandomQuadGenerator {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), count: 0 }
    }

    fn log_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        (self.rng.gen_range(lo.ln()..hi.ln())).exp()
    }

    fn rotate(&mut self, v: [Point2; 4]) -> [Point2; 4] {
        let t: f64 = self.rng.gen_range(0.0..TAU);
        let (s, c) = t.sin_cos();
        v.map(|p| Point2::new(c * p.x - s * p.y, s * p.x + c * p.y))
    }

    fn circle_quad(&mut self) -> [Point2; 4] {
        let mut t: [f64; 4] = std::array::from_fn(|_| self.rng.gen_range(0.0..TAU));
        t.sort_by(f64::total_cmp);
        let stretch = self.log_uniform(1.0, MAX_STRETCH);
        let v = t.map(|a| Point2::new(stretch * a.cos(), a.sin()));
        self.rotate(v)
    }

    fn degenerate_quad(&mut self) -> [Point2; 4] {
        let v = match (self.count / DEGENERATE_EVERY) % 3 {
            0 => {
                // K(1,s,s,2s) with smallest angle ψ
                let t = self.log_uniform(MIN_RANDOM_ANGLE, 0.3).tan();
                let s = t / (2.0 + t);
                [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(s, 2.0 * s), Point2::new(0.0, s)]
            }
            1 => {
                // K(1,1,s,s) with largest angle π - ε
                let s = 0.5 + 0.5 * (0.5 * self.log_uniform(MIN_RANDOM_ANGLE, 0.4)).tan();
                [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(s, s), Point2::new(0.0, 1.0)]
            }
            _ => {
                let s = self.log_uniform(1e-3, 0.2);
                [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(s, 1.0 - s), Point2::new(0.0, 1.0 - s)]
            }
        };
        self.rotate(v)
    }

    pub fn next_quad(&mut self) -> ConvexQuad {
        loop {
            let degenerate = self.count % DEGENERATE_EVERY == DEGENERATE_EVERY - 1;
            let v = if degenerate { self.degenerate_quad() } else { self.circle_quad() };
            if let Ok(q) = ConvexQuad::new(v) {
                if q.min_angle() >= MIN_RANDOM_ANGLE * (1.0 - 1e-9) {
                    self.count += 1;
                    return q;
                }
            }
        }
    }
}

impl Iterator for RandomQuadGenerator {
    type Item = ConvexQuad;

    fn next(&mut self) -> Option<ConvexQuad> {
        Some(self.next_quad())
    }
}

pub fn random_convex_quads(n: usize, seed: u64) -> Vec<ConvexQuad> {
    RandomQuadGenerator::new(seed).take(n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn deterministic_and_convex() {
        let a = random_convex_quads(300, 7);
        let b = random_convex_quads(300, 7);
        assert_eq!(a, b);
        assert_ne!(a, random_convex_quads(300, 8));
        for q in &a {
            assert!(q.min_angle() >= MIN_RANDOM_ANGLE * (1.0 - 1e-9));
            assert!(ConvexQuad::new(*q.vertices()).is_ok());
        }
    }

    #[test]
    fn covers_degenerate_shapes() {
        let qs = random_convex_quads(500, 42);
        let min = qs.iter().map(|q| q.min_angle()).fold(f64::MAX, f64::min);
        let max = qs.iter().map(|q| q.max_angle()).fold(0.0, f64::max);
        assert!(min < 0.02, "min angle {min}");
        assert!(max > PI - 0.05, "max angle {max}");
        let aspect = qs
            .iter()
            .map(|q| q.diameter() / q.shortest_side())
            .fold(0.0, f64::max);
        assert!(aspect > 100.0);
    }
}
