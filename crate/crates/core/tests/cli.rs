use std::path::PathBuf;
use std::process::Command;

use clap::Parser;
use confluent_heun::cli::{run, Cli, RunConfig};

const PARAMS: &[&str] = &[
    "--gamma", "0.3", "--delta", "0.4", "--epsilon", "0.2", "--alpha", "1.0",
];

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

fn heun(args: &[&str]) -> (i32, String, String) {
    let mut full = vec!["heun"];
    full.extend_from_slice(args);
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(full, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

/// Compare with the stored golden output; `UPDATE_GOLDEN=1` rewrites it.
fn golden(name: &str, actual: &str) {
    let path = fixture(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing fixture {}", path.display()));
    assert_eq!(actual, expected, "output differs from {name}");
}

fn with(base: &[&'static str], extra: &[&'static str]) -> Vec<&'static str> {
    let mut v = base.to_vec();
    v.extend_from_slice(extra);
    v
}

#[test]
fn eval_single_point() {
    let args = with(
        &["eval", "--kind", "type1beta0"],
        &with(PARAMS, &["--q", "0.5", "--mu", "gamma", "--z", "0.3", "--terms", "60"]),
    );
    let (code, out, _) = heun(&args);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 2);
    assert!(out.lines().nth(1).unwrap().ends_with(",true"));
    golden("eval_single.csv", &out);
}

#[test]
fn eval_grid_reports_partial_convergence() {
    let args = with(
        &["eval", "--kind", "type1beta0"],
        &with(PARAMS, &["--q", "0.5", "--mu", "gamma", "--z-grid", "0.05:0.95:50"]),
    );
    let (code, out, _) = heun(&args);
    assert_eq!(out.lines().count(), 51);
    let rows: Vec<(usize, bool)> = out
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[4].parse().unwrap(), f[6] == "true")
        })
        .collect();
    // Terms needed grow toward the edge of the domain.
    let converged: Vec<usize> = rows.iter().filter(|r| r.1).map(|r| r.0).collect();
    assert!(converged.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(code, if rows.iter().all(|r| r.1) { 0 } else { 2 });
    golden("eval_grid.csv", &out);
}

#[test]
fn missing_flag_is_a_config_error() {
    let args = with(&["eval", "--kind", "type1beta0"], &with(PARAMS, &["--z", "0.3"]));
    let (code, out, err) = heun(&args);
    assert_eq!(code, 1);
    assert!(out.is_empty());
    let record: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(record["error"], "E_CONFIG");
}

#[test]
fn typed_errors_exit_one() {
    let args = with(
        &["eval", "--kind", "type1beta0"],
        &with(PARAMS, &["--q", "0.5", "--mu", "0.77", "--z", "0.3"]),
    );
    let (code, _, err) = heun(&args);
    assert_eq!(code, 1);
    let record: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(record["error"], "E_EXPANSION");
}

#[test]
fn compare_passes_for_tame_parameters() {
    let args = with(
        &["compare", "--kind", "type1beta0"],
        &with(PARAMS, &["--q", "0.5", "--mu", "gamma", "--z-grid", "0.1:0.55:10"]),
    );
    let (code, out, _) = heun(&args);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["max_deviation"].as_f64().unwrap() < 1e-6);
    golden("compare_beta0.json", &out);
}

#[test]
fn compare_fails_when_truncated() {
    let args = with(
        &["compare", "--kind", "type1beta0"],
        &with(PARAMS, &["--q", "0.5", "--mu", "gamma", "--z-grid", "0.1:0.55:10", "--terms", "3"]),
    );
    let (code, out, _) = heun(&args);
    assert_eq!(code, 3);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["max_deviation"].as_f64().unwrap() > 1e-4);
    golden("compare_truncated.json", &out);
}

#[test]
fn compare_in_three_term_regime() {
    let args = with(
        &["compare", "--kind", "type1beta0"],
        &with(PARAMS, &["--q", "0", "--mu", "zero", "--z-grid", "0.1:0.55:10"]),
    );
    let (code, out, _) = heun(&args);
    assert_eq!(code, 0, "{out}");
    golden("compare_q_zero.json", &out);
}

#[test]
fn recurrence_of_second_type_has_six_offsets() {
    let args = with(
        &["recurrence", "--eq", "eq25", "--center", "0"],
        &with(PARAMS, &["--q", "0.5", "--n-max", "10"]),
    );
    let (code, out, _) = heun(&args);
    assert_eq!(code, 0);
    assert_eq!(out.lines().next().unwrap(), "n,offset,re,im");
    assert_eq!(out.lines().count(), 1 + 11 * 6);
    golden("recurrence_eq25.csv", &out);
}

#[test]
fn terminate_with_zero_exponent() {
    let (code, out, _) = heun(&[
        "terminate", "--N", "1", "--mu", "0", "--gamma", "0.5", "--delta", "0.3", "--epsilon", "1",
    ]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["count_expected"], 2);
    // The finite ansatz with μ = 0 yields a single root here; the shortfall
    // is reported and signalled through the exit code.
    assert_eq!(v["count_found"], 1);
    assert_eq!(code, 3);
    golden("terminate_n1_mu0.json", &out);
}

#[test]
fn terminate_with_exponent_gamma() {
    let (code, out, _) = heun(&[
        "terminate", "--N", "1", "--mu", "gamma", "--gamma", "0.5", "--delta", "0.3", "--epsilon", "1",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["count_found"], 2);
    assert_eq!(v["roots"].as_array().unwrap().len(), 2);
    golden("terminate_n1_gamma.json", &out);
}

#[test]
fn terminate_five_term() {
    let (code, out, _) = heun(&[
        "terminate", "--N", "1", "--mu", "two", "--gamma", "0.5", "--delta", "0.3", "--five-term",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["count_found"], 6);
    golden("terminate_five_term_mu2.json", &out);
}

#[test]
fn scan_writes_radius_per_grid_point() {
    let args = with(
        &["scan", "--kind", "type1beta0"],
        &with(PARAMS, &["--q", "0.5", "--mu", "gamma", "--sweep", "q", "--grid", "0.05:0.5:4"]),
    );
    let (code, out, _) = heun(&args);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 5);
    golden("scan_q.csv", &out);
}

#[test]
fn special_function_to_stdout() {
    let (code, out, _) = heun(&["fn", "2f1", "1", "1", "2", "0.5"]);
    assert_eq!(code, 0);
    let re: f64 = out.split(',').next().unwrap().parse().unwrap();
    assert!((re - 2.0 * 2f64.ln()).abs() < 1e-14);
    golden("fn_2f1.csv", &out);
}

#[test]
fn output_file_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<PathBuf> = (0..2).map(|k| dir.path().join(format!("run{k}.csv"))).collect();
    for p in &paths {
        let ps = p.to_str().unwrap().to_string();
        let mut args: Vec<String> = ["eval", "--kind", "type1beta1"]
            .iter()
            .chain(PARAMS)
            .chain(&["--q", "-1.5", "--z-grid", "0.3:0.6:7", "--output"])
            .map(|s| s.to_string())
            .collect();
        args.push(ps);
        let mut full = vec!["heun".to_string()];
        full.extend(args);
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(full, &mut out, &mut err), 0);
        assert!(out.is_empty());
    }
    let a = std::fs::read(&paths[0]).unwrap();
    let b = std::fs::read(&paths[1]).unwrap();
    assert_eq!(a, b);
}

fn appell_eval_args() -> Vec<&'static str> {
    with(
        &["eval", "--kind", "type1appell"],
        &with(PARAMS, &["--q", "-1.5", "--q-im", "0.25", "--z", "-0.5", "--appell-route", "moments"]),
    )
}

#[test]
fn config_round_trips_and_rejects_unknown_keys() {
    let cfg = Cli::try_parse_from(with(&["heun"], &appell_eval_args()))
        .unwrap()
        .command
        .unwrap();
    let text = serde_json::to_string(&cfg).unwrap();
    let back: RunConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(serde_json::to_string(&back).unwrap(), text);

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["eval"]["expansion"]["bogus"] = serde_json::json!(1);
    assert!(serde_json::from_value::<RunConfig>(v).is_err());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, &text).unwrap();
    let from_file = heun(&["--config", path.to_str().unwrap()]);
    let direct = heun(&appell_eval_args());
    assert_eq!(from_file, direct);
    assert_eq!(direct.0, 0);
}

#[test]
fn binary_honours_term_cap() {
    let exe = env!("CARGO_BIN_EXE_heun");
    let args = with(
        &["eval", "--kind", "type1beta0"],
        &with(PARAMS, &["--q", "0.5", "--mu", "gamma", "--z", "0.55"]),
    );
    let full = Command::new(exe).args(&args).output().unwrap();
    assert_eq!(full.status.code(), Some(0));
    let capped = Command::new(exe)
        .args(&args)
        .env("HEUN_MAX_TERMS", "5")
        .output()
        .unwrap();
    // The cap is global: either the expansion stops short (partial) or one
    // of its special functions does (typed error).
    match capped.status.code() {
        Some(2) => {
            let out = String::from_utf8(capped.stdout).unwrap();
            assert!(out.lines().nth(1).unwrap().ends_with(",false"));
        }
        Some(1) => {
            let err = String::from_utf8(capped.stderr).unwrap();
            assert!(err.contains("E_EXPANSION"), "{err}");
        }
        other => panic!("unexpected exit {other:?}"),
    }
}
