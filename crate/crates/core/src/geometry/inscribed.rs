use super::{ConvexQuad, Point2};

/// Radius of the largest circle inside `quad`.
///
/// Solves the Chebyshev-center LP over the four side half-planes by enumerating
/// the four triples of active sides and keeping the best feasible candidate.
pub fn chebyshev_radius(quad: &ConvexQuad) -> f64 {
    let v = quad.vertices();
    // inward unit normal n_i and offset d_i: n_i . x - d_i >= 0 inside
    let mut lines = [(Point2::default(), 0.0); 4];
    for (i, line) in lines.iter_mut().enumerate() {
        let e = v[(i + 1) % 4] - v[i];
        let len = e.norm();
        let n = Point2::new(-e.y / len, e.x / len);
        *line = (n, n.dot(v[i]));
    }
    let tol = 1e-12 * quad.diameter();
    let mut best = 0.0_f64;
    for skip in 0..4 {
        let idx: Vec<usize> = (0..4).filter(|&i| i != skip).collect();
        // n_i . c - r = d_i for the three active sides
        let m = [
            [lines[idx[0]].0.x, lines[idx[0]].0.y, -1.0],
            [lines[idx[1]].0.x, lines[idx[1]].0.y, -1.0],
            [lines[idx[2]].0.x, lines[idx[2]].0.y, -1.0],
        ];
        let rhs = [lines[idx[0]].1, lines[idx[1]].1, lines[idx[2]].1];
        let Some([cx, cy, r]) = solve3(m, rhs) else {
            continue;
        };
        let c = Point2::new(cx, cy);
        let (n, d) = lines[skip];
        if r > 0.0 && n.dot(c) - d >= r - tol && r > best {
            best = r;
        }
    }
    best
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn solve3(m: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let det = det3(&m);
    if det.abs() < 1e-14 {
        return None;
    }
    let mut out = [0.0; 3];
    for (col, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][col] = rhs[row];
        }
        *o = det3(&mc) / det;
    }
    Some(out)
}
