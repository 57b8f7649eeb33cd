//! The canonical family `K(a, b, ã, b̃)` with vertices `(0,0), (a,0), (ã,b̃), (0,b)`,
//! its condition flags, and the affine constructions that bring an arbitrary
//! convex quadrilateral into that family.

use super::{angle_between, check_rdp, AffineMap2, ConvexQuad, GeometryError, Point2};
use serde::Serialize;
use std::f64::consts::PI;

/// Relative slack allowed when testing `ã/a <= 1` and `b̃/b <= 1`.
pub const D1_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CanonicalQuad {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "at")]
    pub a_tilde: f64,
    #[serde(rename = "bt")]
    pub b_tilde: f64,
}

impl CanonicalQuad {
    pub fn new(a: f64, b: f64, a_tilde: f64, b_tilde: f64) -> Result<Self, GeometryError> {
        let all = [a, b, a_tilde, b_tilde];
        if all.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(GeometryError::InvalidCanonical(format!(
                "parameters must be positive and finite, got {all:?}"
            )));
        }
        let cq = Self { a, b, a_tilde, b_tilde };
        if !(cq.certificate() > 0.0) {
            return Err(GeometryError::InvalidCanonical(format!(
                "convexity certificate a~/a + b~/b - 1 = {} is not positive",
                cq.certificate()
            )));
        }
        // with positive parameters the certificate is the only convexity condition
        ConvexQuad::with_tolerance(cq.vertices(), 0.0)?;
        Ok(cq)
    }

    pub fn vertices(&self) -> [Point2; 4] {
        [
            Point2::new(0.0, 0.0),
            Point2::new(self.a, 0.0),
            Point2::new(self.a_tilde, self.b_tilde),
            Point2::new(0.0, self.b),
        ]
    }

    pub fn to_quad(&self) -> ConvexQuad {
        ConvexQuad::with_tolerance(self.vertices(), 0.0).expect("validated on construction")
    }

    /// `ã/a + b̃/b - 1`; positive exactly when the element is convex. Equals
    /// `J_K(1,1) / (ab)`.
    #[inline]
    pub fn certificate(&self) -> f64 {
        self.a_tilde / self.a + self.b_tilde / self.b - 1.0
    }

    /// Length of the side `l = V3V4`.
    #[inline]
    pub fn l_len(&self) -> f64 {
        self.a_tilde.hypot(self.b - self.b_tilde)
    }

    /// Angle at `V4` of the triangle `V2 V3 V4`.
    pub fn alpha(&self) -> f64 {
        let v4 = Point2::new(0.0, self.b);
        angle_between(
            Point2::new(self.a_tilde, self.b_tilde) - v4,
            Point2::new(self.a, 0.0) - v4,
        )
    }

    pub fn shortest_side(&self) -> f64 {
        self.to_quad().shortest_side()
    }

    pub fn diameter(&self) -> f64 {
        self.to_quad().diameter()
    }

    /// The mirror image `K(b, a, b̃, ã)`.
    pub fn swapped(&self) -> CanonicalQuad {
        CanonicalQuad {
            a: self.b,
            b: self.a,
            a_tilde: self.b_tilde,
            b_tilde: self.a_tilde,
        }
    }

    /// `max(ã/a, b̃/b)`: the attained constant of the conditions Δ1 and D1.
    pub fn delta1_attained(&self) -> f64 {
        (self.a_tilde / self.a).max(self.b_tilde / self.b)
    }

    /// `1 / sin(alpha)`: the attained constant of D2.
    pub fn d2_attained(&self) -> f64 {
        1.0 / self.alpha().sin()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Flag {
    pub holds: bool,
    pub attained: f64,
}

/// Flags Δ1, D1, D2, Δ2, D3 for a canonical element, with attained constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionFlags {
    pub delta1: Flag,
    pub d1: Flag,
    pub d2: Flag,
    pub delta2: Flag,
    pub d3: Flag,
}

pub fn condition_flags(cq: &CanonicalQuad, c: f64) -> ConditionFlags {
    let r = cq.delta1_attained();
    let inv_sin = cq.d2_attained();
    let l_over_s = cq.l_len() / cq.shortest_side();
    let aspect = (cq.a / cq.b).max(cq.b / cq.a);
    ConditionFlags {
        delta1: Flag { holds: r <= c, attained: r },
        d1: Flag { holds: r <= 1.0 + D1_TOL, attained: r },
        d2: Flag { holds: inv_sin <= c, attained: inv_sin },
        delta2: Flag { holds: l_over_s <= c, attained: l_over_s },
        d3: Flag { holds: aspect <= c, attained: aspect },
    }
}

/// Bound on the Δ2 constant implied by attained Δ1 and D2 constants.
///
/// From `|l| sin(alpha) = dist(V3, V2V4) = ab (ã/a + b̃/b - 1) / |d1|` and the law of
/// sines in `V2 V3 V4`.
pub fn delta2_from_delta1_d2(delta1: f64, d2: f64) -> f64 {
    d2 * (2.0 * delta1 - 1.0).max(1.0)
}

/// Bound on the Δ1 constant implied by an attained Δ2 constant.
pub fn delta1_from_delta2(delta2: f64) -> f64 {
    1.0 + delta2
}

/// Checks that the attained constants of `[Δ1, D2]` and `[Δ2, D2]` bound each
/// other through the explicit functions above.
pub fn equivalence_check(cq: &CanonicalQuad) -> bool {
    let slack = 1.0 + 1e-12;
    let d1 = cq.delta1_attained();
    let d2 = cq.d2_attained();
    let dl2 = cq.l_len() / cq.shortest_side();
    dl2 <= delta2_from_delta1_d2(d1, d2) * slack && d1 <= delta1_from_delta2(dl2) * slack
}

/// Returns an equivalent element with `b̃/b >= 1/2`: either `cq` itself or its
/// mirror `K(b, a, b̃, ã)`. The flag reports whether the swap happened.
pub fn normalize_tall(cq: &CanonicalQuad) -> Result<(CanonicalQuad, bool), GeometryError> {
    let d2 = cq.d2_attained();
    if !d2.is_finite() || !cq.delta1_attained().is_finite() {
        return Err(GeometryError::PreconditionFailed(
            "[Δ1,D2] constants are not finite".into(),
        ));
    }
    if cq.b_tilde / cq.b >= 0.5 {
        Ok((*cq, false))
    } else {
        Ok((cq.swapped(), true))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CanonTarget {
    Rdp,
    Regular,
    Dac,
    MacOnly,
}

impl std::str::FromStr for CanonTarget {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "rdp" => Ok(Self::Rdp),
            "regular" => Ok(Self::Regular),
            "dac" => Ok(Self::Dac),
            "mac" | "mac_only" | "mac-only" => Ok(Self::MacOnly),
            other => Err(format!("unknown canonicalization target '{other}'")),
        }
    }
}

/// Result of mapping a quadrilateral onto the canonical family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Canonicalization {
    /// Construction actually used (`MacOnly` resolves to `Dac` or `Regular`).
    pub target: CanonTarget,
    pub canonical: CanonicalQuad,
    /// Maps canonical coordinates onto the input element.
    pub map: AffineMap2,
    /// `map(canonical V_{j+1}) = input vertex vertex_map[j]`.
    pub vertex_map: [usize; 4],
    /// Angle at the input vertex placed at the origin.
    pub beta: f64,
    pub mirrored: bool,
    pub swapped: bool,
    /// Condition number of the linear part of `map`.
    pub kappa: f64,
}

impl Canonicalization {
    /// Largest distance between mapped canonical vertices and the input vertices.
    pub fn roundtrip_error(&self, quad: &ConvexQuad) -> f64 {
        self.canonical
            .vertices()
            .iter()
            .zip(self.vertex_map)
            .map(|(&v, idx)| self.map.apply(v).dist(quad.vertex(idx)))
            .fold(0.0, f64::max)
    }
}

/// Rigid motion (optionally mirrored) plus shear placing vertex `base` at the
/// origin with its outgoing side on the positive x axis.
fn build(quad: &ConvexQuad, base: usize, mirrored: bool) -> Result<Canonicalization, GeometryError> {
    let idx: [usize; 4] = if mirrored {
        [base % 4, (base + 3) % 4, (base + 2) % 4, (base + 1) % 4]
    } else {
        [base % 4, (base + 1) % 4, (base + 2) % 4, (base + 3) % 4]
    };
    let refl = if mirrored { -1.0 } else { 1.0 };
    let origin = quad.vertex(idx[0]);
    let local: Vec<Point2> = idx
        .iter()
        .map(|&i| {
            let d = quad.vertex(i) - origin;
            Point2::new(d.x, refl * d.y)
        })
        .collect();
    let theta = local[1].y.atan2(local[1].x);
    let (s, c) = theta.sin_cos();
    let rot_back = |p: Point2| Point2::new(c * p.x + s * p.y, -s * p.x + c * p.y);
    let w: Vec<Point2> = local.iter().map(|&p| rot_back(p)).collect();
    let a = w[1].x;
    let b = w[3].y;
    let cot_beta = w[3].x / w[3].y;
    let v3 = Point2::new(w[2].x - cot_beta * w[2].y, w[2].y);
    let canonical = CanonicalQuad::new(a, b, v3.x, v3.y)
        .map_err(|e| GeometryError::ConstructionFailed(format!("vertex {base}: {e}")))?;
    // canonical -> input: X = Refl * Rot(theta) * Shear * x + origin
    let shear = AffineMap2 { b: [[1.0, cot_beta], [0.0, 1.0]], p: Point2::default() };
    let rot = AffineMap2 { b: [[c, -s], [s, c]], p: Point2::default() };
    let refl_map = AffineMap2 { b: [[1.0, 0.0], [0.0, refl]], p: Point2::default() };
    let mut map = refl_map.compose(&rot).compose(&shear);
    map.p = origin;
    let beta = angle_between(w[1], w[3]);
    Ok(Canonicalization {
        target: CanonTarget::Rdp,
        canonical,
        map,
        vertex_map: idx,
        beta,
        mirrored,
        swapped: false,
        kappa: map.kappa(),
    })
}

fn apply_swap(mut c: Canonicalization) -> Canonicalization {
    let sigma = AffineMap2 { b: [[0.0, 1.0], [1.0, 0.0]], p: Point2::default() };
    c.canonical = c.canonical.swapped();
    c.map = c.map.compose(&sigma);
    let vm = c.vertex_map;
    c.vertex_map = [vm[0], vm[3], vm[2], vm[1]];
    c.swapped = !c.swapped;
    c
}

fn dac_construction(quad: &ConvexQuad) -> Result<Canonicalization, GeometryError> {
    let mut best: Option<Canonicalization> = None;
    for base in 0..4 {
        let cand = build(quad, base, false)?;
        let cq = &cand.canonical;
        let contained = cq.a_tilde / cq.a <= 1.0 + D1_TOL && cq.b_tilde / cq.b <= 1.0 + D1_TOL;
        if contained && best.is_none_or(|b| cand.beta.sin() > b.beta.sin()) {
            best = Some(cand);
        }
    }
    let cand = best.ok_or_else(|| {
        GeometryError::ConstructionFailed("no vertex parallelogram contains the element".into())
    })?;
    let (_, swap) = normalize_tall(&cand.canonical)?;
    let mut out = if swap { apply_swap(cand) } else { cand };
    out.target = CanonTarget::Dac;
    Ok(out)
}

/// Splits along `diag`, puts the apex of the triangle without the shortest side
/// at the origin and the shortest side on top (`l = V3V4`).
fn rdp_construction(quad: &ConvexQuad, diag: u8, target: CanonTarget) -> Result<Canonicalization, GeometryError> {
    let (p, q, x0, y0) = if diag == 1 { (1, 3, 0, 2) } else { (0, 2, 1, 3) };
    let sides = quad.side_lengths();
    let shortest = (0..4)
        .min_by(|&i, &j| sides[i].total_cmp(&sides[j]))
        .expect("four sides");
    let (s0, s1) = (shortest, (shortest + 1) % 4);
    // X is the apex whose triangle holds the shortest side
    let (apex_x, apex_y) = if s0 == x0 || s1 == x0 { (x0, y0) } else { (y0, x0) };
    let z = if s0 == apex_x { s1 } else { s0 };
    debug_assert!(z == p || z == q);
    let mirrored = z != (apex_y + 3) % 4;
    let mut out = build(quad, apex_y, mirrored)?;
    out.target = target;
    Ok(out)
}

/// Maps `quad` onto the canonical family following the construction associated
/// with `target`. `Dac` output satisfies D1 and `b̃/b >= 1/2`.
pub fn canonicalize(quad: &ConvexQuad, target: CanonTarget) -> Result<Canonicalization, GeometryError> {
    match target {
        CanonTarget::Dac => dac_construction(quad),
        CanonTarget::Rdp => rdp_construction(quad, check_rdp(quad).diag, CanonTarget::Rdp),
        CanonTarget::Regular => {
            let angles = quad.interior_angles();
            let imax = (0..4)
                .max_by(|&i, &j| angles[i].total_cmp(&angles[j]))
                .expect("four angles");
            let diag = if imax % 2 == 0 { 2 } else { 1 };
            rdp_construction(quad, diag, CanonTarget::Regular)
        }
        CanonTarget::MacOnly => {
            let psi_m = quad.min_angle();
            if quad.max_angle() <= PI - psi_m / 2.0 {
                dac_construction(quad)
            } else {
                canonicalize(quad, CanonTarget::Regular)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(c: [f64; 8]) -> ConvexQuad {
        ConvexQuad::from_coords(c).unwrap()
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(CanonicalQuad::new(1.0, 1.0, 0.2, 0.2).is_err());
        assert!(CanonicalQuad::new(-1.0, 1.0, 1.0, 1.0).is_err());
        assert!(CanonicalQuad::new(1.0, 1.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn square_flags() {
        let cq = CanonicalQuad::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let f = condition_flags(&cq, 1.0 + 1e-12);
        assert!(f.delta1.holds && f.d1.holds && f.delta2.holds && f.d3.holds);
        assert!((f.d2.attained - 2.0_f64.sqrt()).abs() < 1e-14);
        assert!(condition_flags(&cq, 2.0).d2.holds);
    }

    #[test]
    fn cex_flags() {
        let f = condition_flags(&CanonicalQuad::new(1.0, 1.0, 0.6, 0.6).unwrap(), 10.0);
        assert!(f.d1.holds);
        assert!((f.d1.attained - 0.6).abs() < 1e-15);
        let f = condition_flags(&CanonicalQuad::new(1.0, 0.1, 0.1, 0.2).unwrap(), 10.0);
        assert!(!f.d1.holds);
        assert!(f.delta1.holds);
        assert!((f.delta1.attained - 2.0).abs() < 1e-15);
    }

    #[test]
    fn equivalence_on_families() {
        assert!(equivalence_check(&CanonicalQuad::new(1.0, 1.0, 1.0, 1.0).unwrap()));
        for k in 1..=10 {
            let s = 0.5 + 0.05 * k as f64;
            let cq = CanonicalQuad::new(1.0, 1.0, s, s).unwrap();
            assert!(equivalence_check(&cq), "s = {s}");
        }
        for s in [0.4, 0.2, 0.1, 0.05] {
            let cq = CanonicalQuad::new(1.0, s, s, 2.0 * s).unwrap();
            assert!(equivalence_check(&cq));
            let f = condition_flags(&cq, 10.0);
            assert!(f.delta1.holds && f.delta2.holds && f.d2.holds, "s = {s}: {f:?}");
        }
    }

    #[test]
    fn normalize_tall_cases() {
        let cq = CanonicalQuad::new(1.0, 1.0, 0.9, 0.9).unwrap();
        assert_eq!(normalize_tall(&cq).unwrap(), (cq, false));
        let short = CanonicalQuad::new(1.0, 1.0, 0.9, 0.3).unwrap();
        let (out, swapped) = normalize_tall(&short).unwrap();
        assert!(swapped);
        assert!((out.b_tilde / out.b - 0.9).abs() < 1e-15);
        assert!(out.d2_attained() <= short.d2_attained() + 1e-12);
        assert_eq!(out.swapped(), short);
        let mut s1 = short.to_quad().side_lengths();
        let mut s2 = out.to_quad().side_lengths();
        s1.sort_by(f64::total_cmp);
        s2.sort_by(f64::total_cmp);
        for (x, y) in s1.iter().zip(&s2) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn square_dac_is_identity() {
        let sq = CanonicalQuad::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let c = canonicalize(&sq.to_quad(), CanonTarget::Dac).unwrap();
        assert!((c.canonical.a - 1.0).abs() < 1e-15 && (c.canonical.b - 1.0).abs() < 1e-15);
        assert!((c.canonical.a_tilde - 1.0).abs() < 1e-15);
        assert!((c.kappa - 1.0).abs() < 1e-12);
        assert!(c.roundtrip_error(&sq.to_quad()) < 1e-15);
    }

    #[test]
    fn dac_construction_example() {
        let quad = q([0.0, 0.0, 1.0, 0.0, 1.2, 1.0, 0.3, 1.0]);
        let c = canonicalize(&quad, CanonTarget::Dac).unwrap();
        let f = condition_flags(&c.canonical, 10.0);
        assert!(f.d1.holds && f.d2.holds, "{f:?}");
        assert!(c.canonical.b_tilde / c.canonical.b >= 0.5);
        assert!(c.roundtrip_error(&quad) < 1e-12);
        let beta_bound = 2.0 / c.beta.sin().powi(2);
        assert!(c.kappa <= beta_bound);
    }

    #[test]
    fn rdp_and_regular_roundtrip() {
        let quads = [
            q([0.0, 0.0, 1.0, 0.0, 1.2, 1.0, 0.3, 1.0]),
            q([0.0, 0.0, 1.0, 0.0, 0.1, 0.2, 0.0, 0.1]),
            q([0.0, 0.0, 3.0, -0.5, 3.1, 0.7, -0.2, 0.4]),
        ];
        for quad in &quads {
            for t in [CanonTarget::Rdp, CanonTarget::Regular, CanonTarget::MacOnly] {
                let c = canonicalize(quad, t).unwrap();
                assert!(c.roundtrip_error(quad) < 1e-12 * quad.diameter(), "{t:?}");
            }
        }
    }

    #[test]
    fn big_mac_quad_rdp_target_has_bounded_flags() {
        // all angles at most 2pi/3
        let quad = q([0.0, 0.0, 2.0, 0.1, 2.3, 1.0, 0.2, 0.9]);
        assert!(quad.max_angle() < 2.0 * PI / 3.0);
        let c = canonicalize(&quad, CanonTarget::Rdp).unwrap();
        let f = condition_flags(&c.canonical, 10.0);
        assert!(f.delta2.holds && f.d2.holds, "{f:?}");
    }

    #[test]
    fn ladoacorto_tan_alpha() {
        for (a, b, at, bt) in [(1.0, 1.0, 0.9, 0.8), (3.0, 1.0, 2.0, 0.7), (1.0, 4.0, 0.6, 3.9)] {
            let cq = CanonicalQuad::new(a, b, at, bt).unwrap();
            let alpha = cq.alpha();
            assert!(alpha.tan() <= b / a * (1.0 + 1e-12));
            assert!(a <= cq.d2_attained() * b * (1.0 + 1e-12));
        }
    }
}
