//! `quadqk`: classify quadrilaterals, measure Q_k interpolation errors, evaluate
//! `I_p` and run the degeneracy studies. Output is JSON or CSV.

mod input;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use input::{parse_canonical, parse_numbers, parse_quad, read_quads_file, InputError};
use output::{csv_preamble, envelope, open, Failure, EXIT_ASSERTION, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};
use quadqk::experiments::{
    escalate, evaluate_row, run_cex1, run_cex2, run_constant_vs_angle, run_convergence, run_lp_uniformity, write_csv,
    ConvergenceSetup, ExperimentError, StudyOptions, StudyOutput, SweepRow, Verdict, ASSERTION_REL_TOL,
    DEFAULT_RATE_WINDOW,
};
use quadqk::geometry::{canonicalize, classify, CanonTarget, CanonicalQuad, ConditionReport, ConvexQuad, Thresholds};
use quadqk::interpolants::{field_by_name, FieldError};
use quadqk::ip::ip_integral;
use quadqk::norms::{check_p, NormError};
use quadqk::reference_map::BilinearMap;
use serde::Serialize;
use serde_json::{json, Value};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "quadqk",
    version,
    about = "Q_k Lagrange interpolation on convex quadrilaterals",
    after_help = "Exit codes: 0 success, 1 numerical failure, 2 usage error, 3 study verdict FAIL/INCONCLUSIVE.\n\
                  Errors are written to stderr as one JSON line {error, message, exit_code}."
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Serialize)]
struct Common {
    /// Output file [default: standard output]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Gauss points per direction [default: k+6, raised until converged]
    #[arg(long, global = true)]
    quad_order: Option<usize>,
    /// Number of finest grid points used by slope fits
    #[arg(long, global = true, default_value_t = DEFAULT_RATE_WINDOW)]
    rate_window: usize,
    /// Worker threads for studies
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Serialize)]
struct ElementArgs {
    /// Vertices "x1 y1 x2 y2 x3 y3 x4 y4", counterclockwise
    #[arg(long, allow_hyphen_values = true)]
    quad: Option<String>,
    /// Canonical element "a,b,ã,b̃" with vertices (0,0),(a,0),(ã,b̃),(0,b)
    #[arg(long, conflicts_with = "quad")]
    canonical: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct ThresholdArgs {
    /// Minimum-angle threshold ψ_m (radians)
    #[arg(long)]
    psi_m: Option<f64>,
    /// Maximum-angle threshold ψ_M (radians)
    #[arg(long)]
    psi_big_m: Option<f64>,
    /// Constant for the canonical flags
    #[arg(long)]
    c: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Angles, angle conditions, RDP, regularity and canonical flags
    #[command(after_help = "Output (json): ConditionReport {psi_min, psi_max, angles, mac, MAC, DAC, \
        rdp:{diag,N,psiM}, h_over_rho, flags:{delta1,d1,d2,delta2,d3}:{holds,attained}, canonical, thresholds}; \
        with --quads-file a list of {line, report}.\n\
        Output (csv): line,psi_min,psi_max,mac,MAC,DAC,rdp_diag,rdp_N,rdp_psiM,h_over_rho")]
    Classify {
        #[command(flatten)]
        element: ElementArgs,
        /// File with one quad per line ('#' comments and blank lines skipped)
        #[arg(long, conflicts_with_all = ["quad", "canonical"])]
        quads_file: Option<PathBuf>,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Error norms of Q_k u on one element
    #[command(after_help = "Output: one sweep row {param, h, err_w1p, err_lp, semnorm_u, ratio_seminorm, \
        ratio_lp, aux1, aux2, converged, rel_error}; aux1/aux2 are empty.\n\
        Fields: cex1, cex2, trig, trig-box, poly:<c@i,j;c@i,j;...> (term c·x^i·y^j)")]
    InterpError {
        #[command(flatten)]
        element: ElementArgs,
        /// Polynomial degree per direction (1..=10)
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Exponent p in [1, 64]
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Field name
        #[arg(long, default_value = "trig")]
        field: String,
    },
    /// I_p = ∫ J^{1-p} / (ab)^{1-p} over the reference square
    #[command(after_help = "--quad takes 4 numbers (canonical a,b,ã,b̃) or 8 (vertices, canonicalized \
        with the RDP construction).\n\
        Output: {value, p, converged, estimated_error, certificate, near_singular, method, canonical}")]
    IpIntegral {
        /// "a,b,ã,b̃" or 8 vertex coordinates
        #[arg(long, allow_hyphen_values = true)]
        quad: String,
        /// Exponent p in [1, 64]
        #[arg(long)]
        p: f64,
    },
    /// Minimum-angle counterexample K(1,s,s,2s), k = 2, 1 <= p < 3
    #[command(after_help = STUDY_HELP)]
    Cex1 {
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Values of s in (0, 1/2)
        #[arg(long, default_value = "0.2 0.1 0.05 0.025")]
        grid: String,
    },
    /// Maximum-angle counterexample K(1,1,s,s), k = 2, p >= 3
    #[command(after_help = STUDY_HELP)]
    Cex2 {
        #[arg(long, default_value_t = 4.0)]
        p: f64,
        /// Values of s in (1/2, 5/8]
        #[arg(long, default_value = "0.625 0.5625 0.53125 0.515625 0.5078125")]
        grid: String,
    },
    /// Max of ‖u-Q_k u‖_{0,p}/(h^{k+1}|u|_{k+1,p}) over random quads
    #[command(after_help = "Output: {summary, detail:{max_ratio_lp, argmax, max_ratio_seminorm, all_finite, rows, \
        verdict, converged, max_rel_error}}; csv gives the rows (param = quad index).")]
    LpUniform {
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Number of random quads
        #[arg(long, default_value_t = 500)]
        num: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Rates of |u-Q_k u|_{1,p} and ‖u-Q_k u‖_{0,p} for a shape rescaled to h = 2^-1..2^-levels
    #[command(after_help = STUDY_HELP)]
    Convergence {
        #[command(flatten)]
        element: ElementArgs,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Number of dyadic levels
        #[arg(long, default_value_t = 5)]
        levels: u32,
        #[arg(long, default_value = "trig")]
        field: String,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Error constant against the smallest and the largest angle
    #[command(after_help = "Output: {summary, detail:{min_angle, max_angle, verdict, ...}}; each sweep has \
        rows (param = ψ, aux1 = family parameter), growth, expected, rate, passed.\n\
        csv: the two row blocks, each preceded by a comment line.")]
    ConstantSweep {
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Angles ψ in radians
        #[arg(long, default_value = "0.4 0.2 0.1 0.05 0.025 0.0125 0.00625 0.003125")]
        grid: String,
    },
}

const STUDY_HELP: &str = "Output (json): {summary:{study,k,p,slope,residual,verdict}, detail:{rows, rates, checks, \
    warnings, verdict, converged, max_rel_error}}.\n\
    Output (csv): param,h,err_w1p,err_lp,semnorm_u,ratio_seminorm,ratio_lp,aux1,aux2,converged";

fn input_failure(e: InputError) -> Failure {
    Failure::usage(e.kind(), e)
}

fn experiment_failure(e: ExperimentError) -> Failure {
    match e {
        ExperimentError::GridOutOfRange { .. } => Failure::usage("GridOutOfRange", e),
        ExperimentError::InvalidParameter(_) => Failure::usage("InvalidParameter", e),
        ExperimentError::Norm(NormError::InvalidP(_) | NormError::InvalidOrder(_)) => Failure::usage("InvalidParameter", e),
        ExperimentError::Norm(NormError::Field(_)) | ExperimentError::Field(_) => Failure::usage("FieldError", e),
        ExperimentError::Geometry(_) => Failure::numerical("GeometryError", e),
    }
}

fn field_failure(e: FieldError) -> Failure {
    Failure::usage("FieldError", e)
}

fn check_p_arg(p: f64) -> Result<(), Failure> {
    check_p(p).map_err(|e| Failure::usage("InvalidParameter", e))
}

fn check_k(k: usize, max: usize) -> Result<(), Failure> {
    if (1..=max).contains(&k) {
        Ok(())
    } else {
        Err(Failure::usage("InvalidParameter", format!("k = {k} outside 1..={max}")))
    }
}

fn parse_grid(text: &str) -> Result<Vec<f64>, Failure> {
    let g = parse_numbers(text).map_err(|m| Failure::usage("ParseError", format!("grid: {m}")))?;
    if g.is_empty() || g.iter().any(|v| !v.is_finite()) {
        return Err(Failure::usage("InvalidParameter", "grid must be a non-empty list of finite numbers"));
    }
    Ok(g)
}

impl Common {
    fn options(&self) -> Result<StudyOptions, Failure> {
        if self.jobs == 0 {
            return Err(Failure::usage("InvalidParameter", "--jobs must be at least 1"));
        }
        if self.rate_window < 2 {
            return Err(Failure::usage("InvalidParameter", "--rate-window must be at least 2"));
        }
        if let Some(n) = self.quad_order {
            if !(1..=56).contains(&n) {
                return Err(Failure::usage("InvalidParameter", format!("--quad-order {n} outside 1..=56")));
            }
        }
        Ok(StudyOptions { quad_order: self.quad_order, rate_window: self.rate_window, jobs: self.jobs })
    }
}

impl ElementArgs {
    fn resolve(&self) -> Result<(ConvexQuad, BilinearMap), Failure> {
        match (&self.quad, &self.canonical) {
            (Some(q), None) => {
                let quad = parse_quad(q, 1).map_err(input_failure)?;
                Ok((quad, BilinearMap::from_quad(&quad)))
            }
            (None, Some(c)) => {
                let cq = parse_canonical(c).map_err(input_failure)?;
                Ok((cq.to_quad(), BilinearMap::from_canonical(&cq)))
            }
            _ => Err(Failure::usage("MissingElement", "give --quad or --canonical")),
        }
    }
}

impl ThresholdArgs {
    fn resolve(&self, base: Thresholds) -> Result<Thresholds, Failure> {
        Thresholds::new(
            self.psi_m.unwrap_or(base.psi_m),
            self.psi_big_m.unwrap_or(base.psi_big_m),
            self.c.unwrap_or(base.c),
        )
        .map_err(|e| Failure::usage("InvalidThresholds", e))
    }
}

/// What a command produced: JSON result, CSV body and exit code.
struct Report {
    params: Value,
    result: Value,
    csv: String,
    code: i32,
}

fn rows_csv(rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii csv")
}

fn verdict_code(reliable: bool, verdict: Verdict) -> i32 {
    if !reliable {
        EXIT_NUMERICAL
    } else if matches!(verdict, Verdict::Fail | Verdict::Inconclusive) {
        EXIT_ASSERTION
    } else {
        EXIT_OK
    }
}

fn study_report(params: Value, out: StudyOutput) -> Report {
    let code = verdict_code(out.numerically_reliable(), out.verdict);
    Report { params, csv: rows_csv(&out.rows), result: json!({ "summary": out.summary(), "detail": out }), code }
}

fn report_csv_line(line: usize, r: &ConditionReport) -> String {
    format!(
        "{line},{:.16e},{:.16e},{},{},{},{},{:.16e},{:.16e},{:.16e}\n",
        r.psi_min, r.psi_max, r.mac, r.mac_big, r.dac, r.rdp.diag, r.rdp.n, r.rdp.psi_max, r.h_over_rho
    )
}

fn run(cmd: &Cmd, opts: &StudyOptions) -> Result<Report, Failure> {
    match cmd {
        Cmd::Classify { element, quads_file, thresholds } => {
            let th = thresholds.resolve(Thresholds::default())?;
            let quads = match quads_file {
                Some(path) => read_quads_file(path).map_err(input_failure)?,
                None => vec![(1, element.resolve()?.0)],
            };
            let mut reports = Vec::with_capacity(quads.len());
            for (line, q) in &quads {
                let r = classify(q, th).map_err(|e| Failure::numerical("GeometryError", format!("line {line}: {e}")))?;
                reports.push((*line, r));
            }
            let mut csv = String::from("line,psi_min,psi_max,mac,MAC,DAC,rdp_diag,rdp_N,rdp_psiM,h_over_rho\n");
            reports.iter().for_each(|(l, r)| csv.push_str(&report_csv_line(*l, r)));
            let result = if quads_file.is_some() {
                json!(reports.iter().map(|(l, r)| json!({ "line": l, "report": r })).collect::<Vec<_>>())
            } else {
                json!(reports[0].1)
            };
            let params = json!({ "quad": element.quad, "canonical": element.canonical, "quads_file": quads_file,
                "count": quads.len(), "thresholds": th });
            Ok(Report { params, result, csv, code: EXIT_OK })
        }
        Cmd::InterpError { element, k, p, field } => {
            check_k(*k, 10)?;
            check_p_arg(*p)?;
            let (quad, map) = element.resolve()?;
            let f = field_by_name(field, Some(&quad)).map_err(field_failure)?;
            let n = opts.order(*k);
            let row = escalate(n, |n| Ok(evaluate_row(&map, 0.0, *k, *p, f.as_ref(), n)?.0)).map_err(experiment_failure)?;
            let params = json!({ "quad": quad.to_string(), "canonical": element.canonical, "k": k, "p": p,
                "field": field, "quad_order": n });
            Ok(Report { params, csv: rows_csv(std::slice::from_ref(&row)), result: json!(row), code: EXIT_OK })
        }
        Cmd::IpIntegral { quad, p } => {
            check_p_arg(*p)?;
            let nums = parse_numbers(quad).map_err(|m| Failure::usage("ParseError", m))?;
            let cq = match nums.len() {
                4 => parse_canonical(quad).map_err(input_failure)?,
                8 => {
                    let q = parse_quad(quad, 1).map_err(input_failure)?;
                    canonicalize(&q, CanonTarget::Rdp).map_err(|e| Failure::numerical("GeometryError", e))?.canonical
                }
                n => return Err(Failure::usage("ParseError", format!("--quad needs 4 or 8 numbers, got {n}"))),
            };
            let r = ip_integral(&cq, *p).map_err(|e| Failure::usage("InvalidParameter", e))?;
            let csv = format!(
                "value,converged,estimated_error,certificate\n{:.16e},{},{:.16e},{:.16e}\n",
                r.value, r.converged, r.estimated_error, r.certificate
            );
            let mut result = json!(r);
            result["canonical"] = json!(cq);
            Ok(Report { params: json!({ "quad": quad, "p": p, "canonical": canonical_json(&cq) }), result, csv, code: EXIT_OK })
        }
        Cmd::Cex1 { p, grid } => {
            check_p_arg(*p)?;
            let g = parse_grid(grid)?;
            let out = run_cex1(*p, &g, opts).map_err(experiment_failure)?;
            Ok(study_report(json!({ "p": p, "k": 2, "field": "cex1", "grid": g }), out))
        }
        Cmd::Cex2 { p, grid } => {
            check_p_arg(*p)?;
            let g = parse_grid(grid)?;
            let out = run_cex2(*p, &g, opts).map_err(experiment_failure)?;
            Ok(study_report(json!({ "p": p, "k": 2, "field": "cex2", "grid": g }), out))
        }
        Cmd::LpUniform { k, p, num, seed } => {
            check_k(*k, 4)?;
            check_p_arg(*p)?;
            if *num == 0 {
                return Err(Failure::usage("InvalidParameter", "--num must be at least 1"));
            }
            let u = run_lp_uniformity(*k, *p, *num, *seed, opts).map_err(experiment_failure)?;
            let reliable = u.converged || u.max_rel_error <= ASSERTION_REL_TOL;
            let code = verdict_code(reliable, u.verdict);
            let params = json!({ "k": k, "p": p, "num": num, "seed": seed, "field": "trig-box" });
            Ok(Report { params, csv: rows_csv(&u.rows), result: json!({ "summary": u.summary(), "detail": u }), code })
        }
        Cmd::Convergence { element, k, p, levels, field, thresholds } => {
            check_k(*k, 4)?;
            check_p_arg(*p)?;
            if *levels < 2 {
                return Err(Failure::usage("InvalidParameter", "--levels must be at least 2"));
            }
            let (shape, _) = element.resolve()?;
            field_by_name(field, Some(&shape)).map_err(field_failure)?;
            let mut setup = ConvergenceSetup::new(shape, *k, *p, *levels);
            setup.field = field.clone();
            setup.thresholds = thresholds.resolve(setup.thresholds)?;
            let out = run_convergence(&setup, opts).map_err(experiment_failure)?;
            Ok(study_report(json!(setup), out))
        }
        Cmd::ConstantSweep { k, p, grid } => {
            check_k(*k, 4)?;
            check_p_arg(*p)?;
            let g = parse_grid(grid)?;
            let s = run_constant_vs_angle(*k, *p, &g, opts).map_err(experiment_failure)?;
            let reliable = s.converged || s.max_rel_error <= ASSERTION_REL_TOL;
            let code = verdict_code(reliable, s.verdict);
            let csv = format!(
                "# min_angle\n{}# max_angle\n{}",
                rows_csv(&s.min_angle.rows),
                rows_csv(&s.max_angle.rows)
            );
            let params = json!({ "k": k, "p": p, "grid": g, "field": "trig" });
            Ok(Report { params, csv, result: json!({ "summary": s.summary(), "detail": s }), code })
        }
    }
}

fn canonical_json(cq: &CanonicalQuad) -> Value {
    json!([cq.a, cq.b, cq.a_tilde, cq.b_tilde])
}

fn command_name(cmd: &Cmd) -> &'static str {
    match cmd {
        Cmd::Classify { .. } => "classify",
        Cmd::InterpError { .. } => "interp-error",
        Cmd::IpIntegral { .. } => "ip-integral",
        Cmd::Cex1 { .. } => "cex1",
        Cmd::Cex2 { .. } => "cex2",
        Cmd::LpUniform { .. } => "lp-uniform",
        Cmd::Convergence { .. } => "convergence",
        Cmd::ConstantSweep { .. } => "constant-sweep",
    }
}

fn execute(cli: &Cli) -> Result<i32, Failure> {
    let opts = cli.common.options()?;
    let report = run(&cli.cmd, &opts)?;
    let name = command_name(&cli.cmd);
    let mut params = report.params;
    params["common"] = json!({
        "format": cli.common.format,
        "out": cli.common.out,
        "quad_order": cli.common.quad_order,
        "rate_window": cli.common.rate_window,
        "jobs": cli.common.jobs,
    });
    let mut w = open(cli.common.out.as_deref())?;
    match cli.common.format {
        Format::Json => {
            let doc = envelope(name, params, report.result);
            writeln!(w, "{}", serde_json::to_string_pretty(&doc).expect("serializable"))?;
        }
        Format::Csv => {
            w.write_all(csv_preamble(name, &params).as_bytes())?;
            w.write_all(report.csv.as_bytes())?;
        }
    }
    w.flush()?;
    Ok(report.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let f = Failure::usage("UsageError", e.to_string().trim());
            eprintln!("{}", f.to_json());
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.code as u8)
        }
    }
}
