use quadqk::experiments::random_convex_quads;
use serde_json::Value;
use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::process::{Command, Output};

fn quadqk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quadqk")).args(args).output().expect("binary runs")
}

fn json_stdout(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn json_stderr(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    assert_eq!(text.trim().lines().count(), 1, "{text}");
    serde_json::from_str(text.trim()).expect("json on stderr")
}

#[test]
fn classify_unit_square() {
    let o = quadqk(&["classify", "--quad", "0 0 1 0 1 1 0 1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_stdout(&o);
    assert_eq!(v["tool"], "quadqk");
    assert_eq!(v["command"], "classify");
    let r = &v["result"];
    assert!((r["psi_min"].as_f64().unwrap() - FRAC_PI_2).abs() < 1e-12);
    assert!((r["psi_max"].as_f64().unwrap() - FRAC_PI_2).abs() < 1e-12);
    assert_eq!(r["DAC"], true);
    assert_eq!(r["rdp"]["N"], 1.0);
    for f in ["d1", "d2", "d3", "delta1", "delta2"] {
        assert_eq!(r["flags"][f]["holds"], true);
    }
    assert_eq!(v["params"]["thresholds"]["c"], 10.0);
}

#[test]
fn quads_file_round_trip_and_errors() {
    let quads = random_convex_quads(1000, 3);
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "# generated").unwrap();
    for q in &quads {
        writeln!(file, "{q}").unwrap();
    }
    file.flush().unwrap();
    let o = quadqk(&["classify", "--quads-file", file.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_stdout(&o);
    let list = v["result"].as_array().unwrap();
    assert_eq!(list.len(), 1000);
    for (i, (entry, q)) in list.iter().zip(&quads).enumerate() {
        assert_eq!(entry["line"], i + 2);
        assert!((entry["report"]["psi_min"].as_f64().unwrap() - q.min_angle()).abs() <= 1e-15);
    }

    let mut bad = tempfile::NamedTempFile::new().unwrap();
    writeln!(bad, "0 0 1 0 1 1 0 1\n\n0 0 1 0 0.2 0.2 0 1").unwrap();
    let o = quadqk(&["classify", "--quads-file", bad.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = json_stderr(&o);
    assert_eq!(e["error"], "ConvexityError");
    assert!(e["message"].as_str().unwrap().starts_with("line 3"));
}

#[test]
fn interp_error_reproduces_bilinear_field() {
    let o = quadqk(&["interp-error", "--canonical", "1,2,0.8,1.5", "--k", "1", "--p", "3", "--field", "poly:1@0,0;2@1,0;-1@0,1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_stdout(&o);
    assert!(v["result"]["err_w1p"].as_f64().unwrap() < 1e-12);
    assert_eq!(v["params"]["k"], 1);
    assert_eq!(v["params"]["field"], "poly:1@0,0;2@1,0;-1@0,1");
}

#[test]
fn ip_integral_forms() {
    let o = quadqk(&["ip-integral", "--quad", "1,1,1,1", "--p", "3"]);
    let v = json_stdout(&o);
    assert!((v["result"]["value"].as_f64().unwrap() - 1.0).abs() < 1e-14);
    let o = quadqk(&["ip-integral", "--quad", "0 0 2 0 2 1 0 1", "--p", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let o = quadqk(&["ip-integral", "--quad", "1 1 1", "--p", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn studies_report_verdicts() {
    let o = quadqk(&["cex1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_stdout(&o);
    assert_eq!(v["result"]["summary"]["verdict"], "DIVERGES");
    assert_eq!(v["params"]["grid"].as_array().unwrap().len(), 4);

    let o = quadqk(&["cex2", "--p", "4", "--format", "csv"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "param,h,err_w1p,err_lp,semnorm_u,ratio_seminorm,ratio_lp,aux1,aux2,converged");
    assert_eq!(data.len(), 6);
    // the fitted exponent is off target on this grid, so the verdict is not a pass
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec![],
        vec!["interp-error", "--quad", "0 0 1 0 1 1 0 1", "--k", "0"],
        vec!["interp-error", "--quad", "0 0 1 0 1 1 0 1", "--field", "nope"],
        vec!["cex1", "--p", "0.5"],
        vec!["cex2", "--grid", "0.7"],
        vec!["convergence", "--k", "2"],
        vec!["lp-uniform", "--jobs", "0"],
    ] {
        let o = quadqk(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert_eq!(json_stderr(&o)["exit_code"], 2);
    }
}

#[test]
fn output_file_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let run = || {
        let o = quadqk(&["lp-uniform", "--num", "30", "--seed", "9", "--out", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        assert!(o.stdout.is_empty());
        std::fs::read(&path).unwrap()
    };
    let a = run();
    assert_eq!(a, run());
    let v: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["params"]["seed"], 9);
    assert_eq!(v["result"]["detail"]["rows"].as_array().unwrap().len(), 30);
}

#[test]
fn convergence_on_square_and_help() {
    let o = quadqk(&["convergence", "--quad", "0 0 1 0 1 1 0 1", "--k", "1", "--p", "2", "--levels", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_stdout(&o);
    assert_eq!(v["result"]["summary"]["verdict"], "PASS");
    let o = quadqk(&["cex2", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    let help = String::from_utf8(o.stdout).unwrap();
    for flag in ["--p", "--grid", "--out", "--format", "--quad-order", "--rate-window", "--jobs", "verdict"] {
        assert!(help.contains(flag), "{flag}");
    }
}
