use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn dnt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnt")).args(args).output().expect("run dnt")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn file(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const FOUR_ATOM: &str = "spot,2\n0,2\n1,1\n1.8,0.28\n2.2,0.08\n3,0\n";
const THREE_ATOM: &str = "spot,2\n0,2\n1,1\n2,0.25\n3,0\n";

#[test]
fn check_exit_codes_follow_the_verdict() {
    let d = TempDir::new().unwrap();
    let cases = [
        ("clean.csv", FOUR_ATOM, 0, "NONE"),
        ("flat.csv", "spot,2\n0,2\n1,1\n2,1\n3,1\n", 2, "WEAK"),
        ("fly.csv", "spot,2\n0,2\n1,1\n2,0.7\n3,0.2\n", 3, "MODEL_FREE"),
    ];
    for (name, body, code, verdict) in cases {
        let q = file(&d, name, body);
        let report = d.path().join(format!("{name}.txt"));
        let o = dnt(&["check", s(&q), "--out", s(&report)]);
        assert_eq!(o.status.code(), Some(code), "{name}");
        let written = fs::read_to_string(&report).unwrap();
        assert_eq!(written, stdout(&o));
        assert!(written.starts_with(&format!("verdict: {verdict}\n")), "{written}");
    }
}

#[test]
fn check_with_digitals_takes_barriers_from_the_levels() {
    let d = TempDir::new().unwrap();
    let q = file(&d, "q.csv", "spot,2\n0,2\n1,1.1\n1.5,0.75\n2,0.5\n2.5,0.25\n3,0.1\n4,0\n");
    let bad = file(&d, "bad.csv", "lower,1.5,0.8\nupper,2.5,0.2\n");
    assert_eq!(dnt(&["check", s(&q), "--digitals", s(&bad)]).status.code(), Some(3));
    let lone = file(&d, "lone.csv", "lower,1.5,0.5\n");
    let o = dnt(&["check", s(&q), "--digitals", s(&lone)]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(dnt(&["check", s(&q), "--digitals", s(&lone), "--barriers", "1.5,2.5"]).status.code(), Some(0));
}

#[test]
fn bounds_report_the_fixture_values() {
    let d = TempDir::new().unwrap();
    let q = file(&d, "q.csv", FOUR_ATOM);
    let o = dnt(&["bounds", s(&q), "--barriers", "1.2,2.8", "--continuum"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("lower 0.733333333333\n"), "{}", stdout(&o));

    let dirac = file(&d, "dirac.csv", "spot,2\n0,2\n2,0\n3,0\n");
    let out = stdout(&dnt(&["bounds", s(&dirac), "--barriers", "1.5,2.5", "--continuum"]));
    assert!(out.contains("lower 1\n") && out.contains("upper 1\n"), "{out}");

    let flat = file(&d, "flat.csv", "spot,2\n0,2\n1,1\n2,1\n3,1\n");
    let o = dnt(&["bounds", s(&flat), "--barriers", "1.5,2.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("witness: conditional"));
}

#[test]
fn bounds_reject_bad_arguments() {
    let d = TempDir::new().unwrap();
    let q = file(&d, "q.csv", FOUR_ATOM);
    assert_eq!(dnt(&["bounds", s(&q), "--barriers", "2.8,1.2"]).status.code(), Some(1));
    assert_eq!(dnt(&["bounds", s(&q)]).status.code(), Some(1));
    assert_eq!(dnt(&["--help"]).status.code(), Some(0));
    assert_eq!(dnt(&["bounds", s(&q), "--barriers", "2.1,2.8", "--continuum"]).status.code(), Some(1));
    let o = dnt(&["bounds", "/nonexistent/q.csv", "--barriers", "1.2,2.8"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot open"));
}

#[test]
fn verify_passes_on_the_three_atom_law() {
    let d = TempDir::new().unwrap();
    let q = file(&d, "q.csv", THREE_ATOM);
    let o = dnt(&["verify", s(&q), "--barriers", "1.5,2.5", "--paths", "20000", "--lambda", "0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.contains("upper_bound 0.5\n") && out.ends_with("verdict PASS\n"), "{out}");
    assert!(out.contains("mix_inside_bounds yes"));
    // few paths give a wide interval, not a failure
    let o = dnt(&["verify", s(&q), "--barriers", "1.5,2.5", "--paths", "50", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let again = dnt(&["verify", s(&q), "--barriers", "1.5,2.5", "--paths", "50", "--seed", "3"]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn verify_refuses_quotes_with_the_wrong_mean() {
    let d = TempDir::new().unwrap();
    let q = file(&d, "q.csv", "spot,2\n0,2.1\n1,1\n3,0\n");
    let o = dnt(&["verify", s(&q), "--barriers", "1.5,2.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("must equal the spot"));
}

#[test]
fn surface_dumps_every_node() {
    let d = TempDir::new().unwrap();
    let q = file(&d, "q.csv", THREE_ATOM);
    let out = d.path().join("surface.tsv");
    assert_eq!(dnt(&["surface", s(&q), "--n", "7", "--out", s(&out)]).status.code(), Some(0));
    let text = fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().count(), 1 + 49);
    assert!(text.contains("1\t3\t0.5\t0.5\n"));
}

fn small_config(seed: u64) -> String {
    let o = dnt(&["backtest", "--print-config"]);
    stdout(&o)
        .replace("paths = 10000", "paths = 1500")
        .replace("pricing_paths = 200000", "pricing_paths = 20000")
        .replace("pricing_dt = 0.001", "pricing_dt = 0.002")
        .replace("seed = 20240601", &format!("seed = {seed}"))
}

/// Value following `field` on the line starting with `key `.
fn metric(report: &str, key: &str, field: &str) -> f64 {
    let line =
        report.lines().find(|l| l.starts_with(&format!("{key} "))).unwrap_or_else(|| panic!("no {key} in {report}"));
    let words: Vec<&str> = line.split_whitespace().collect();
    let i = words.iter().position(|w| *w == field).unwrap();
    words[i + 1].parse().unwrap()
}

#[test]
fn backtest_is_reproducible_and_keeps_its_orderings() {
    let d = TempDir::new().unwrap();
    let cfg = file(&d, "bt.conf", &small_config(11));
    let out = d.path().join("run");
    let a = dnt(&["backtest", s(&cfg), "--out", s(&out)]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = dnt(&["backtest", s(&cfg)]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(fs::read_to_string(out.join("report.txt")).unwrap(), stdout(&a));
    assert!(fs::read_to_string(out.join("cdf.svg")).unwrap().starts_with("<svg"));
    assert_eq!(fs::read_to_string(out.join("cdf.tsv")).unwrap().lines().count(), 202);

    let c = dnt(&["backtest", s(&cfg), "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
    for r in [stdout(&a), stdout(&c)] {
        assert!(metric(&r, "robust", "avg_cost") < metric(&r, "delta_vega", "avg_cost"), "{r}");
        assert!(metric(&r, "robust", "utility") > metric(&r, "delta_vega", "utility"), "{r}");
        assert_eq!(metric(&r, "robust_floor_violations", "robust_floor_violations"), 0.0);
    }
}

#[test]
fn backtest_names_a_missing_key() {
    let d = TempDir::new().unwrap();
    let cfg = file(&d, "bt.conf", &small_config(1).replace("kappa = 0.559\n", ""));
    let o = dnt(&["backtest", s(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing config key `kappa`"));
}
