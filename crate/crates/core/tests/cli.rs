//! Invocation tests for the `dpnls` binary: outputs, schemas and exit codes.

use std::process::{Command, Output};

use dpnls::branch::BranchCurve;
use dpnls::cli::{parse_config, read_config_file, CommandKind, Suite};
use dpnls::variational::LANDSCAPE_CSV_HEADER;

fn dpnls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpnls")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn constants_text_and_json() {
    let o = dpnls(&["constants", "--p", "5", "--q", "3", "--d", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("mu_star=0.1875\n"), "{text}");
    assert!(text.contains("beta_star=0.866025403784438"), "{text}");
    assert!(text.contains("mass_regime=MassSuper"));

    let o = dpnls(&["constants", "--p", "5", "--q", "3", "--d", "3", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for key in ["mu_star", "beta_star", "x_star", "regimes"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["mu_star"].as_f64(), Some(0.1875));
}

#[test]
fn exit_codes() {
    // missing field, bad value, unknown flag: usage
    assert_eq!(dpnls(&["constants", "--p", "5", "--q", "3"]).status.code(), Some(2));
    assert_eq!(dpnls(&["constants", "--p", "3", "--q", "5", "--d", "3"]).status.code(), Some(2));
    assert_eq!(dpnls(&["constants", "--bogus", "1"]).status.code(), Some(2));
    assert_eq!(dpnls(&["solve", "--p", "5", "--q", "3", "--d", "3"]).status.code(), Some(2));
    assert_eq!(dpnls(&["solve", "--p", "5", "--q", "3", "--d", "3", "--mu", "0.3"]).status.code(), Some(2));
    // unwritable output: I/O
    let o = dpnls(&["constants", "--p", "5", "--q", "3", "--d", "3", "--out", "/nonexistent-dir/x.csv"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(dpnls(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# quintic-cubic\np = 5\nq = 3\nd = 2\nformat = csv\n").unwrap();
    let cfg_s = cfg.to_str().unwrap();
    let rc = parse_config(["dpnls", "constants", "--config", cfg_s, "--d", "3"]).unwrap();
    assert_eq!(rc.command, CommandKind::Constants);
    assert_eq!((rc.p, rc.q, rc.d), (Some(5.0), Some(3.0), Some(3)));
    let o = dpnls(&["constants", "--config", cfg_s, "--d", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("mu_star,beta_star,x_star,sobolev_regime,mass_regime\n"));

    std::fs::write(&cfg, "p = 5\nflavour = 3\n").unwrap();
    assert!(read_config_file("p = 5\nflavour = 3\n").is_err());
    assert_eq!(dpnls(&["constants", "--config", cfg_s]).status.code(), Some(2));
    assert!(read_config_file("p 5\n").is_err());
    assert!(read_config_file("p = 5\np = 6\n").is_err());
}

#[test]
fn verify_defaults() {
    let rc = parse_config(["dpnls", "verify"]).unwrap();
    assert_eq!(rc.suite, Suite::Endpoint);
    assert_eq!((rc.p, rc.q, rc.d), (Some(5.0), Some(3.0), Some(3)));
    let rc = parse_config(["dpnls", "verify", "--suite", "constants", "--p", "7/3", "--q", "5/3"]).unwrap();
    assert_eq!(rc.p, Some(7.0 / 3.0));
    assert!(parse_config(["dpnls", "verify", "--p", "7/x"]).is_err());
    let o = dpnls(&["verify", "--suite", "constants", "--p", "7/3", "--q", "5/3", "--d", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = dpnls(&["verify", "--suite", "solver", "--p", "5", "--q", "2", "--d", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).ends_with("all checks passed\n"));
}

#[test]
fn solve_profile_csv_round_trips() {
    let o = dpnls(&["solve", "--p", "5", "--q", "3", "--d", "3", "--mu", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let prof = dpnls::RadialProfile::read_csv(std::io::Cursor::new(o.stdout)).unwrap();
    // below β_μ, the largest zero of -u⁴ + u² - μ
    let beta_mu = ((1.0 + 0.6f64.sqrt()) / 2.0).sqrt();
    assert!(prof.y0 > 0.0 && prof.y0 < beta_mu, "{}", prof.y0);
    let o = dpnls(&["nls-q", "--q", "3", "--d", "2", "--p", "5", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let mass = v["integrals"]["mass"].as_f64().unwrap();
    assert!((mass - 11.7009).abs() < 1e-3, "{mass}");
    assert!(v["int_p1"].as_f64().unwrap() > 0.0);
}

#[test]
fn branch_csv_schema_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |out: &str| {
        vec!["branch", "--p", "5", "--q", "3", "--d", "2", "--points", "24", "--out", out].into_iter().map(String::from).collect::<Vec<_>>()
    };
    for path in [&a, &b] {
        let o = Command::new(env!("CARGO_BIN_EXE_dpnls")).args(args(path.to_str().unwrap())).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap(), "repeated runs differ");
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), BranchCurve::CSV_HEADER);
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 24);
    // M_over_sphere = M / 2π in d = 2, and mu_over_mustar climbs to 0.995
    for r in &rows {
        let (m, ms): (f64, f64) = (r[3].parse().unwrap(), r[4].parse().unwrap());
        assert!((ms - m / (2.0 * std::f64::consts::PI)).abs() <= 1e-14 * m);
        assert_eq!(r[13], "ok");
    }
    let last: f64 = rows[23][1].parse().unwrap();
    assert!((last - 0.995).abs() < 1e-14);
    // 17 significant digits
    assert_eq!(rows[0][0].split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
}

#[test]
fn landscape_csv_header() {
    let o = dpnls(&["landscape", "--p", "7", "--q", "2", "--d", "2", "--points", "24", "--lambda-points", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), LANDSCAPE_CSV_HEADER);
    // λ = 0 row plus five grid values
    assert_eq!(text.lines().count(), 7);
}
