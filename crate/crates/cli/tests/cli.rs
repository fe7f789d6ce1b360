//! End-to-end runs of the `doa` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn doa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_doa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}):\n{}\nstderr:\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("{v} is not a number"))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_ellipse() {
    let out = doa(&["analyze", "--system", "ellipse"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert!((num(&v["stability"]["operator_norm"]) - 0.5).abs() < 1e-12);
    assert_eq!(v["ball"]["window"], serde_json::json!([1]));
    let r = num(&v["ball"]["radius"]);
    assert!((r - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3, "{r}");
}

#[test]
fn analyze_vanderpol() {
    let v = json(&doa(&["analyze", "--system", "vanderpol"]));
    assert!((num(&v["stability"]["operator_norm"]) - 2.0).abs() < 1e-9);
    assert!(num(&v["stability"]["spectral_radius"]).abs() < 1e-9);
    assert_eq!(v["stability"]["p_tilde"], 2);
    assert_eq!(v["ball"]["window"], serde_json::json!([2, 3]));
    let r = num(&v["ball"]["radius"]);
    assert!((r - 0.365).abs() < 5e-3, "{r}");
}

#[test]
fn analyze_expanding_map_is_not_applicable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grow.toml");
    fs::write(
        &cfg,
        "name = \"grow\"\ndimension = 1\nexpressions = [\"1.1*x\"]\n",
    )
    .unwrap();
    let out = doa(&["analyze", "--system", path(&cfg)]);
    assert_eq!(code(&out), 2);
    assert_eq!(json(&out)["stability"]["classification"], "NotApplicable");
}

#[test]
fn usage_and_config_errors_exit_with_one() {
    assert_eq!(code(&doa(&["analyze"])), 1);
    assert_eq!(code(&doa(&["analyze", "--system", "no-such-system"])), 1);
    assert_eq!(code(&doa(&["frobnicate"])), 1);
    assert_eq!(code(&doa(&["--help"])), 0);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        "[system]\nbuiltin = \"ellipse\"\n[run]\ncolour = \"red\"\n",
    )
    .unwrap();
    let out = doa(&["analyze", "--config", path(&cfg)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn series_square_is_one_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = doa(&["series", "--system", "square", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let steps = v["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 1);
    let dom = &steps[0]["cumulative_domain"][0];
    assert!(
        (num(&dom[0]) + 1.0).abs() < 0.05 && (num(&dom[1]) - 1.0).abs() < 0.05,
        "{dom}"
    );
    assert_eq!(v["left"], "Diverges");
    assert_eq!(v["right"], "Diverges");
    assert!(dir.path().join("series.json").exists());
    let csv = fs::read_to_string(dir.path().join("series_coefficients.csv")).unwrap();
    assert!(csv.starts_with("step,center,m,abs_coefficient\n"));
}

#[test]
fn series_moebius_reaches_minus_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = doa(&[
        "series",
        "--system",
        "moebius-e",
        "--max-steps",
        "3",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let last = v["steps"].as_array().unwrap().last().unwrap();
    let dom = last["cumulative_domain"].as_array().unwrap();
    assert_eq!(dom.len(), 1, "{dom:?}");
    assert!(
        num(&dom[0][0]) <= -2.0 && num(&dom[0][1]) >= 1.0 - 1e-9,
        "{dom:?}"
    );
}

#[test]
fn series_rejects_two_dimensional_systems() {
    let out = doa(&["series", "--system", "ellipse"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension"));
}

const SMALL_GRID: &str = "-1.2,1.2,-1.2,1.2,60,60";

#[test]
fn estimate_oracle_report_on_ellipse() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    let base = ["--system", "ellipse", "--grid", SMALL_GRID, "--out", d];
    let est = doa(&[&["estimate", "--kinds", "np,mp", "--p", "0..4"], &base[..]].concat());
    assert_eq!(code(&est), 0, "{}", String::from_utf8_lossy(&est.stderr));
    assert_eq!(code(&doa(&[&["oracle"], &base[..]].concat())), 0);
    for p in 0..=4 {
        for kind in ["np", "mp"] {
            for ext in ["json", "csv"] {
                assert!(dir.path().join(format!("mask_{kind}_p{p}.{ext}")).exists());
            }
            assert!(dir.path().join(format!("contour_{kind}_p{p}.svg")).exists());
        }
    }
    let out = doa(&["report", "--dir", d]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["theorem_checks_pass"], true);
    for s in v["soundness"].as_array().unwrap() {
        assert_eq!(s["comparison"]["subset_violations"], 0, "{s}");
    }
    let inclusions = v["inclusions"].as_array().unwrap();
    assert!(inclusions.iter().all(|c| c["holds"] == true));
    assert!(inclusions.iter().any(|c| c["relation"] == "N_0 ⊆ M_0"));
}

#[test]
fn report_flags_non_monotone_windowed_preimages() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    let grid = "-1.5,1.5,-1.5,1.5,150,150";
    let out = doa(&[
        "run",
        "--system",
        "vanderpol",
        "--grid",
        grid,
        "--kinds",
        "mp~",
        "--p",
        "0..6",
        "--out",
        d,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["theorem_checks_pass"], true);
    assert!(!v["mp_tilde_non_monotone_at"].as_array().unwrap().is_empty());
    assert!(dir.path().join("figure.svg").exists());
}

#[test]
fn windowed_level_sets_start_at_p_tilde() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    let grid = "-1.5,1.5,-1.5,1.5,80,80";
    let out = doa(&[
        "estimate",
        "--system",
        "vanderpol",
        "--grid",
        grid,
        "--kinds",
        "np~",
        "--p",
        "0..3",
        "--component-only",
        "--out",
        d,
    ]);
    assert_eq!(code(&out), 0);
    assert!(!dir.path().join("mask_nptilde_p1.json").exists());
    assert!(dir.path().join("mask_nptilde_p2.json").exists());
    assert!(dir.path().join("mask_nptilde_p3.json").exists());
}

#[test]
fn contraction_kinds_are_not_applicable_to_vanderpol() {
    let dir = tempfile::tempdir().unwrap();
    let out = doa(&[
        "estimate",
        "--system",
        "vanderpol",
        "--grid",
        "-1,1,-1,1,20,20",
        "--kinds",
        "np",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn report_errors() {
    let empty = tempfile::tempdir().unwrap();
    assert_eq!(code(&doa(&["report", "--dir", path(empty.path())])), 1);

    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    let est = doa(&[
        "estimate", "--system", "ellipse", "--grid", SMALL_GRID, "--p", "1", "--out", d,
    ]);
    assert_eq!(code(&est), 0);
    let orc = doa(&[
        "oracle",
        "--system",
        "ellipse",
        "--grid",
        "-1.2,1.2,-1.2,1.2,40,40",
        "--out",
        d,
    ]);
    assert_eq!(code(&orc), 0);
    let out = doa(&["report", "--dir", d]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid mismatch"));
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = doa(&[
            "run",
            "--system",
            "predprey",
            "--grid",
            "-1.5,1.5,-1.5,1.5,90,90",
            "--p",
            "0..3",
            "--out",
            path(dir.path()),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert!(sa.len() > 10);
    assert_eq!(sa, sb);
}

#[test]
fn config_file_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "[system]\nname = \"halves\"\ndimension = 2\nexpressions = [\"0.5*x\", \"0.5*y + x^2\"]\n\n\
             [run]\ngrid = \"-2,2,-2,2,40,40\"\nkinds = \"np\"\np = \"0..2\"\nout = {:?}\n",
            out_dir.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = doa(&["run", "--config", path(&cfg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["system"], "halves");
    assert!(out_dir.join("mask_np_p2.csv").exists());
    assert!(out_dir.join("analysis.json").exists());
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    let out = doa(&["analyze", "--system", "predprey"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text
        .lines()
        .find(|l| l.contains("\"operator_norm\""))
        .unwrap();
    assert!(line.contains("5.0000000000000000e-1"), "{line}");
}
