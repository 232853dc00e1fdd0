use std::path::Path;
use std::process::{Command, Output};

use templatefit::io::{FitInput, FitOutput};
use templatefit_core::{draw, fit, rng_stream, CostFunction, Method, ToyConfig};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_templatefit"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SATURATED: &str = r#"{
  "bin_edges": [0, 1, 2, 3, 4],
  "data": {"sumw": [20, 60, 100, 40]},
  "templates": [{"name": "only", "sumw": [10, 30, 50, 20]}]
}"#;

const WEIGHTED: &str = r#"{
  "bin_edges": [0, 1, 2, 3],
  "data": {"sumw": [20.5, 31.0, 12.0], "sumw2": [25.0, 40.0, 15.5]},
  "templates": [
    {"name": "a", "sumw": [10, 20, 5], "sumw2": [12, 30, 6]},
    {"name": "b", "sumw": [8, 4, 9]}
  ]
}"#;

#[test]
fn saturated_fit_has_zero_qmin() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "in.json", SATURATED);
    let o = run(&["fit", "--input", &input]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out: FitOutput = serde_json::from_slice(&o.stdout).unwrap();
    assert!(out.converged);
    assert!(out.qmin.abs() < 1e-6, "{}", out.qmin);
    assert!(out.p_value.unwrap() > 0.999);
    assert_eq!(out.ndof, 3);
    assert!((out.yields[0] - 220.0).abs() < 1e-2);
}

#[test]
fn exact_rejects_weighted_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "in.json", WEIGHTED);
    for args in [
        vec!["fit", "--input", &input, "--method", "exact"],
        vec!["fit", "--input", &input, "--method", "exact", "--weighted"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(1));
        assert!(o.stdout.is_empty());
        let err = stderr(&o);
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.contains("sumw2"), "{err}");
    }
    let unweighted = write(dir.path(), "sat.json", SATURATED);
    let o = run(&[
        "fit",
        "--input",
        &unweighted,
        "--method",
        "exact",
        "--weighted",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn weighted_fit_succeeds_for_profiled_methods() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "in.json", WEIGHTED);
    for method in ["approx", "conway"] {
        let o = run(&["fit", "--input", &input, "--method", method, "--weighted"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stderr(&o).is_empty());
        let out: FitOutput = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(out.yields.len(), 2);
    }
    let o = run(&["fit", "--input", &input]);
    assert!(stderr(&o).contains("warning"));
}

#[test]
fn input_errors_exit_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("{not json", "malformed JSON"),
        (
            r#"{"bin_edges": [0, 1, 2], "data": {"sumw": [1, 2]}, "templates": [{"name": "a", "sumw": [1]}]}"#,
            "template 'a' has 1 bins",
        ),
        (
            r#"{"bin_edges": [0, 1, 2], "data": {"sumw": [1, -2]}, "templates": [{"name": "a", "sumw": [1, 1]}]}"#,
            "negative",
        ),
        (
            r#"{"bin_edges": [0, 1], "data": {"sumw": [1]}, "templates": []}"#,
            "at least one template",
        ),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let input = write(dir.path(), &format!("bad{i}.json"), text);
        let o = run(&["fit", "--input", &input]);
        assert_eq!(o.status.code(), Some(1), "case {i}");
        let err = stderr(&o);
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.contains(needle), "case {i}: {err}");
    }
    let o = run(&["fit", "--input", "/nonexistent/in.json"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["fit", "--input", "x.json", "--method", "minuit"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr(&o).lines().count(), 1);
}

#[test]
fn example_toy_fit_contains_truth() {
    let dir = tempfile::tempdir().unwrap();
    let toy = draw(&ToyConfig::default(), &mut rng_stream(1, 0)).unwrap();
    let text = serde_json::to_string(&FitInput::from_toy(&toy)).unwrap();
    let input = write(dir.path(), "toy.json", &text);
    let output = dir.path().join("out.json");
    let o = run(&[
        "fit",
        "--input",
        &input,
        "--output",
        output.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let out: FitOutput = serde_json::from_str(&std::fs::read_to_string(&output).unwrap()).unwrap();
    assert!(out.converged);
    let truth = [toy.truth.0, toy.truth.1];
    for k in 0..2 {
        assert!((out.yields[k] - truth[k]).abs() < 5.0 * out.errors[k].unwrap());
    }
    let cov = out.covariance.unwrap();
    assert_eq!(cov[0][1], cov[1][0]);
}

#[test]
fn result_round_trips_and_refits() {
    let dir = tempfile::tempdir().unwrap();
    let toy = draw(&ToyConfig::default(), &mut rng_stream(3, 4)).unwrap();
    let input = FitInput::from_toy(&toy);
    let path = write(
        dir.path(),
        "toy.json",
        &serde_json::to_string(&input).unwrap(),
    );
    for method in Method::ALL {
        let o = run(&["fit", "--input", &path, "--method", method.name()]);
        let text = String::from_utf8(o.stdout).unwrap();
        let out: FitOutput = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string_pretty(&out).unwrap(), text.trim_end());

        let reread = FitInput::read(Path::new(&path)).unwrap().model().unwrap();
        let refit = fit(&CostFunction::new(&reread, method, false).unwrap()).unwrap();
        assert!(
            (refit.qmin - out.qmin).abs() < 1e-9,
            "{method}: {} vs {}",
            refit.qmin,
            out.qmin
        );
    }
}

fn study(dir: &Path, extra: &[&str]) -> (String, String) {
    let out = dir.to_str().unwrap();
    let mut args = vec!["toy-study", "--output", out];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let read = |f: &str| std::fs::read_to_string(dir.join(f)).unwrap();
    (read("records.csv"), read("summary.csv"))
}

#[test]
fn toy_study_is_deterministic() {
    let base = [
        "--n-mc",
        "100",
        "--n-toys",
        "10",
        "--methods",
        "approx",
        "--seed",
        "7",
    ];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let first = study(a.path(), &base);
    let second = study(b.path(), &base);
    let threaded = study(c.path(), &[&base[..], &["--jobs", "3"]].concat());
    assert_eq!(first, second);
    assert_eq!(first, threaded);
    assert_eq!(first.0.lines().count(), 11);
}

#[test]
fn toy_study_layout() {
    let dir = tempfile::tempdir().unwrap();
    let (records, summary) = study(
        dir.path(),
        &[
            "--n-mc",
            "200,50",
            "--n-toys",
            "3",
            "--method",
            "exact,approx",
            "--seed",
            "1",
        ],
    );
    assert_eq!(records.lines().count(), 1 + 2 * 2 * 3);
    let keys: Vec<(String, String)> = summary
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].to_string())
        })
        .collect();
    let expected = [
        ("approx", "50"),
        ("approx", "200"),
        ("exact", "50"),
        ("exact", "200"),
    ];
    assert_eq!(keys, expected.map(|(m, n)| (m.to_string(), n.to_string())));
}

#[test]
fn toy_study_requires_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "toy-study",
        "--n-toys",
        "2",
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--seed"));
    let o = run(&["bench", "--methods", "approx"]);
    assert_eq!(o.status.code(), Some(1));
}

fn bench_rows(args: &[&str]) -> Vec<(String, f64)> {
    let o = run(args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    String::from_utf8(o.stdout)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (f[0].to_string(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn bench_reports_ratios() {
    let rows = bench_rows(&["bench", "--seed", "1", "--repetitions", "3"]);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|(_, r)| *r >= 1.0));
    assert!(rows.iter().any(|(_, r)| *r == 1.0));
    let single = bench_rows(&[
        "bench",
        "--seed",
        "1",
        "--method",
        "conway",
        "--repetitions",
        "3",
    ]);
    assert_eq!(single, vec![("conway".to_string(), 1.0)]);
    let wide = bench_rows(&[
        "bench",
        "--seed",
        "1",
        "--bins",
        "100",
        "--method",
        "approx",
        "--repetitions",
        "3",
    ]);
    assert_eq!(wide.len(), 1);
}
