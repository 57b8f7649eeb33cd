//! Counterexample reproductions, uniformity probes, h-refinement studies and
//! constant-versus-angle sweeps.

mod random;
mod studies;

pub use random::{random_convex_quads, RandomQuadGenerator, MIN_RANDOM_ANGLE};
pub use studies::{
    cex2_node_checks, run_cex1, run_cex2, run_constant_vs_angle, run_convergence, run_lp_uniformity, run_sweep, AngleSweep,
    Cex2NodeChecks, ConstantSweep, ConvergenceSetup, LpUniformity, SweepKind,
};

use crate::geometry::{CanonicalQuad, ConvexQuad, GeometryError};
use crate::interpolants::{qk_interpolate, FieldError, Interpolant, ScalarField};
use crate::norms::{element_rule, interpolation_error, wmp_seminorm, Axis, NormError, NormResult, REFINE_STEP};
use crate::reference_map::BilinearMap;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::io::{self, Write};
use thiserror::Error;

/// Points used by the slope fit unless overridden.
pub const DEFAULT_RATE_WINDOW: usize = 4;
/// Minimum number of points behind any rate assertion.
pub const MIN_RATE_POINTS: usize = 4;
/// RMS log-residual above which a fitted rate is not trusted.
pub const MAX_RATE_RESIDUAL: f64 = 0.05;
/// A sequence whose max/min stays below this is bounded.
pub const BOUNDED_FACTOR: f64 = 2.0;
/// Relative quadrature error that cannot move any asserted slope or ratio;
/// rows below it are trusted even when the strict flag is off.
pub const ASSERTION_REL_TOL: f64 = 1e-4;
/// Highest Gauss order a study escalates to before flagging a row unconverged.
pub const MAX_STUDY_ORDER: usize = 40;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("grid value {value} outside the validity range {range} of family {family}")]
    GridOutOfRange { family: &'static str, value: f64, range: &'static str },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Parametrized element families.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// `K(1, s, s, 2s)`, `0 < s < 1/2`.
    Cex1,
    /// `K(1, 1, s, s)`, `1/2 < s <= 5/8`.
    Cex2,
    /// `(0,0), (1,0), (s, 1-s), (0, 1-s)`, `0 < s < 1`.
    TriDegen,
    /// The `i`-th quad of the random generator.
    RandomConvex { seed: u64 },
    /// The `i`-th quad of a user list.
    User(Vec<ConvexQuad>),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Cex1 => "CEX1",
            Family::Cex2 => "CEX2",
            Family::TriDegen => "TRIDEGEN",
            Family::RandomConvex { .. } => "RANDOM_CONVEX",
            Family::User(_) => "USER",
        }
    }

    fn range(&self) -> &'static str {
        match self {
            Family::Cex1 => "(0, 1/2)",
            Family::Cex2 => "(1/2, 5/8]",
            Family::TriDegen => "(0, 1)",
            Family::RandomConvex { .. } | Family::User(_) => "non-negative integer index",
        }
    }

    pub fn check(&self, s: f64) -> Result<(), ExperimentError> {
        let ok = match self {
            Family::Cex1 => s > 0.0 && s < 0.5,
            Family::Cex2 => s > 0.5 && s <= 0.625,
            Family::TriDegen => s > 0.0 && s < 1.0,
            Family::RandomConvex { .. } => s >= 0.0 && s.fract() == 0.0,
            Family::User(q) => s >= 0.0 && s.fract() == 0.0 && (s as usize) < q.len(),
        };
        if ok {
            Ok(())
        } else {
            Err(ExperimentError::GridOutOfRange { family: self.name(), value: s, range: self.range() })
        }
    }

    /// Canonical parameters when the member is canonical.
    pub fn canonical(&self, s: f64) -> Option<CanonicalQuad> {
        match self {
            Family::Cex1 => CanonicalQuad::new(1.0, s, s, 2.0 * s).ok(),
            Family::Cex2 => CanonicalQuad::new(1.0, 1.0, s, s).ok(),
            _ => None,
        }
    }

    /// Reference map of the member with parameter `s`.
    pub fn map(&self, s: f64) -> Result<BilinearMap, ExperimentError> {
        self.check(s)?;
        if let Some(cq) = self.canonical(s) {
            return Ok(BilinearMap::from_canonical(&cq));
        }
        let quad = match self {
            Family::TriDegen => ConvexQuad::from_coords([0.0, 0.0, 1.0, 0.0, s, 1.0 - s, 0.0, 1.0 - s])?,
            Family::RandomConvex { seed } => {
                let mut g = RandomQuadGenerator::new(*seed);
                (0..s as usize).for_each(|_| {
                    g.next_quad();
                });
                g.next_quad()
            }
            Family::User(q) => q[s as usize],
            Family::Cex1 | Family::Cex2 => unreachable!("canonical families handled above"),
        };
        Ok(BilinearMap::from_quad(&quad))
    }
}

/// One sweep: a family, its parameter grid and the interpolation setting.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub family: Family,
    pub grid: Vec<f64>,
    pub k: usize,
    pub p: f64,
    pub field: String,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if !(1..=4).contains(&self.k) {
            return Err(ExperimentError::InvalidParameter(format!("k = {} outside 1..=4", self.k)));
        }
        crate::norms::check_p(self.p)?;
        if self.grid.is_empty() {
            return Err(ExperimentError::InvalidParameter("empty grid".into()));
        }
        self.grid.iter().try_for_each(|&s| self.family.check(s))
    }
}

/// Numerical settings shared by all studies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StudyOptions {
    /// Gauss order; `k + 6` when absent.
    pub quad_order: Option<usize>,
    pub rate_window: usize,
    pub jobs: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self { quad_order: None, rate_window: DEFAULT_RATE_WINDOW, jobs: 1 }
    }
}

impl StudyOptions {
    pub fn order(&self, k: usize) -> usize {
        self.quad_order.unwrap_or_else(|| crate::norms::default_order(k))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: f64,
    pub h: f64,
    pub err_w1p: f64,
    pub err_lp: f64,
    /// `|u|_{k+1,p,K}`; absent when the field has no such derivatives or it vanishes.
    pub semnorm_u: Option<f64>,
    /// `err_w1p / (h^k |u|_{k+1,p})`.
    pub ratio_seminorm: Option<f64>,
    /// `err_lp / (h^{k+1} |u|_{k+1,p})`.
    pub ratio_lp: Option<f64>,
    pub aux1: Option<f64>,
    pub aux2: Option<f64>,
    pub converged: bool,
    /// Largest relative refinement difference among the row's norms.
    pub rel_error: f64,
    /// `|u|_{1,p,K}`, the scale of the seminorm error.
    #[serde(skip)]
    pub u_w1p: f64,
}

/// `estimated_error / value`, or the absolute estimate for a vanishing value.
pub fn relative_error(r: &NormResult) -> f64 {
    if r.value > 0.0 {
        r.estimated_error / r.value
    } else {
        r.estimated_error
    }
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "param,h,err_w1p,err_lp,semnorm_u,ratio_seminorm,ratio_lp,aux1,aux2,converged";

    pub fn csv_line(&self) -> String {
        let f = |v: f64| format!("{v:.16e}");
        let o = |v: Option<f64>| v.map(f).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            f(self.param),
            f(self.h),
            f(self.err_w1p),
            f(self.err_lp),
            o(self.semnorm_u),
            o(self.ratio_seminorm),
            o(self.ratio_lp),
            o(self.aux1),
            o(self.aux2),
            self.converged
        )
    }
}

pub fn write_csv(rows: &[SweepRow], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{}", SweepRow::CSV_HEADER)?;
    for r in rows {
        writeln!(out, "{}", r.csv_line())?;
    }
    Ok(())
}

/// Recomputes a row with the Gauss order raised by `REFINE_STEP` until it is
/// converged or [`MAX_STUDY_ORDER`] is reached.
/// Largest relative error over `rows`.
pub fn max_rel_error(rows: &[SweepRow]) -> f64 {
    rows.iter().map(|r| r.rel_error).fold(0.0, f64::max)
}

pub fn escalate(n: usize, f: impl Fn(usize) -> Result<SweepRow, ExperimentError>) -> Result<SweepRow, ExperimentError> {
    let mut order = n;
    loop {
        let row = f(order)?;
        if row.converged || order + REFINE_STEP > MAX_STUDY_ORDER {
            return Ok(row);
        }
        order += REFINE_STEP;
    }
}

/// Interpolates `field` on `map` and fills every column except the auxiliary ones.
pub fn evaluate_row(
    map: &BilinearMap,
    param: f64,
    k: usize,
    p: f64,
    field: &dyn ScalarField,
    n: usize,
) -> Result<(SweepRow, Interpolant), ExperimentError> {
    let interp = qk_interpolate(map, k, field);
    let e = interpolation_error(&interp, field, p, n)?;
    let h = map.diameter();
    let mut converged = e.lp.converged && e.w1p.converged;
    let mut rel_error = relative_error(&e.lp).min(e.lp.estimated_error / e.u_lp.max(f64::MIN_POSITIVE));
    rel_error = rel_error.max(relative_error(&e.w1p).min(e.w1p.estimated_error / e.u_w1p.max(f64::MIN_POSITIVE)));
    let semnorm_u = if field.max_order() > k {
        let s = wmp_seminorm(map, field, k + 1, p, n)?;
        converged &= s.converged;
        rel_error = rel_error.max(relative_error(&s));
        Some(s.value).filter(|&v| v > 0.0)
    } else {
        None
    };
    let row = SweepRow {
        param,
        h,
        err_w1p: e.w1p.value,
        err_lp: e.lp.value,
        semnorm_u,
        ratio_seminorm: semnorm_u.map(|s| e.w1p.value / (h.powi(k as i32) * s)),
        ratio_lp: semnorm_u.map(|s| e.lp.value / (h.powi(k as i32 + 1) * s)),
        aux1: None,
        aux2: None,
        converged,
        rel_error,
        u_w1p: e.u_w1p,
    };
    Ok((row, interp))
}

/// `‖∂(Q_k u)/∂x‖_{0,p,K}` or `‖∂(Q_k u)/∂y‖_{0,p,K}`.
pub fn interpolant_derivative_norm(interp: &Interpolant, axis: Axis, p: f64, n: usize) -> Result<NormResult, NormError> {
    crate::norms::check_p(p)?;
    let map = &interp.map;
    let run = |order: usize| {
        let rule = element_rule(map, order);
        crate::norms::integrate(map, &rule, |x, y, _| {
            let g = interp.eval_ref(x, y).1;
            match axis {
                Axis::X => g[0],
                Axis::Y => g[1],
            }
            .abs()
            .powf(p)
        })
        .powf(1.0 / p)
    };
    let (v0, v1) = (run(n), run(n + REFINE_STEP));
    let est = (v1 - v0).abs();
    Ok(NormResult {
        value: v1,
        p,
        order: n,
        estimated_error: est,
        converged: est <= crate::norms::CONVERGENCE_TOL * v1,
    })
}

/// Least-squares fit of `log y = slope · log x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateEstimate {
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the log residuals.
    pub residual: f64,
    /// Number of points actually fitted.
    pub window: usize,
}

impl RateEstimate {
    /// Enough points and a small residual.
    pub fn is_reliable(&self) -> bool {
        self.window >= MIN_RATE_POINTS && self.residual < MAX_RATE_RESIDUAL && self.slope.is_finite()
    }
}

/// Fits the `window` points with smallest `x` (the finest ones). `None` with
/// fewer than two usable points or non-positive data.
pub fn fit_rate(xs: &[f64], ys: &[f64], window: usize) -> Option<RateEstimate> {
    assert_eq!(xs.len(), ys.len());
    let mut pts: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    if pts.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return None;
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.truncate(window.max(2));
    let m = pts.len();
    if m < 2 {
        return None;
    }
    let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / m as f64;
    let my = ly.iter().sum::<f64>() / m as f64;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Some(RateEstimate { slope, intercept, residual: (ss / m as f64).sqrt(), window: m })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    Diverges,
    Bounded,
    Exact,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Diverges => "DIVERGES",
            Verdict::Bounded => "BOUNDED",
            Verdict::Exact => "EXACT",
            Verdict::Inconclusive => "INCONCLUSIVE",
        };
        f.write_str(s)
    }
}

/// Slope (log-log, against the degeneracy parameter) at or below which a
/// monotone sequence counts as divergent even before it doubles.
pub const DIVERGENT_SLOPE: f64 = -0.1;

/// Growth of `values` listed from the mildest to the most degenerate member.
/// Divergent when strictly increasing and either at least doubling or with a
/// reliable fitted slope at most [`DIVERGENT_SLOPE`]; bounded when max/min stays
/// below [`BOUNDED_FACTOR`] otherwise.
pub fn classify_growth(values: &[f64], rate: Option<RateEstimate>) -> Verdict {
    if values.len() < 2 || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Verdict::Inconclusive;
    }
    let max = values.iter().copied().fold(f64::MIN, f64::max);
    let min = values.iter().copied().fold(f64::MAX, f64::min);
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    let steep = rate.is_some_and(|r| r.is_reliable() && r.slope <= DIVERGENT_SLOPE);
    if increasing && (max / min >= BOUNDED_FACTOR || steep) {
        Verdict::Diverges
    } else if max / min < BOUNDED_FACTOR {
        Verdict::Bounded
    } else {
        Verdict::Inconclusive
    }
}

/// Outcome of one assertion made by a study.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub expected: String,
}

impl Check {
    fn new(name: &str, passed: bool, value: f64, expected: impl Into<String>) -> Self {
        Self { name: name.into(), passed, value, expected: expected.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NamedRate {
    pub name: String,
    pub estimate: Option<RateEstimate>,
}

/// JSON summary line of a study.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudySummary {
    pub study: String,
    pub k: usize,
    pub p: f64,
    pub slope: Option<f64>,
    pub residual: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyOutput {
    pub study: String,
    pub k: usize,
    pub p: f64,
    pub rows: Vec<SweepRow>,
    pub rates: Vec<NamedRate>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub verdict: Verdict,
    /// Every row met the quadrature tolerance.
    pub converged: bool,
    /// Largest `rel_error` over the rows.
    pub max_rel_error: f64,
}

impl StudyOutput {
    /// Every row converged, or its quadrature error is below [`ASSERTION_REL_TOL`].
    pub fn numerically_reliable(&self) -> bool {
        self.converged || self.max_rel_error <= ASSERTION_REL_TOL
    }

    pub fn rate(&self, name: &str) -> Option<RateEstimate> {
        self.rates.iter().find(|r| r.name == name).and_then(|r| r.estimate)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Summary built from the first rate.
    pub fn summary(&self) -> StudySummary {
        let first = self.rates.first().and_then(|r| r.estimate);
        StudySummary {
            study: self.study.clone(),
            k: self.k,
            p: self.p,
            slope: first.map(|r| r.slope),
            residual: first.map(|r| r.residual),
            verdict: self.verdict,
        }
    }
}

/// Maps `f` over `items` on `jobs` threads; the output order matches the input.
pub fn par_map<T, R, F>(jobs: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if jobs <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}
