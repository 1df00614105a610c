use std::path::Path;
use std::process::{Command, Output};

use skorolab::cadlag::CadlagPath;
use skorolab::system::ImpulseSchedule;
use tempfile::TempDir;

fn skorolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skorolab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = skorolab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn seeded_commands_are_byte_stable() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[experiment]\neps_grid = [0.05, 0.1, 0.2]\nreplicas = 8\n[numerics]\nseed = 11\n",
    )
    .unwrap();
    let runs: Vec<(Vec<String>, Vec<&str>)> = vec![
        (vec!["trajectory".into()], vec!["csv", "impulses.csv"]),
        (
            vec!["simulate".into(), "--epsilon".into(), "0.1".into(), "--seed".into(), "7".into()],
            vec!["csv", "impulses.csv"],
        ),
        (vec!["fluctuation".into(), "--seed".into(), "7".into()], vec!["csv"]),
        (
            vec![
                "fpt".into(),
                "--alpha".into(),
                "1.5707963267948966".into(),
                "--eps-p".into(),
                "0.04".into(),
                "--grid".into(),
                "0:3:61".into(),
            ],
            vec!["csv"],
        ),
        (vec!["experiment".into(), "--mode".into(), "clt".into()], vec!["csv", "summary.json"]),
    ];
    for (i, (args, exts)) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = dir.path().join(format!("r{i}_{rep}.csv"));
            let mut full: Vec<&str> = args.iter().map(String::as_str).collect();
            if args[0] != "fpt" {
                full.extend(["--config", s(&cfg)]);
            }
            full.extend(["--out", s(&out)]);
            ok(&full);
            let files: Vec<Vec<u8>> = exts
                .iter()
                .map(|e| read(&dir.path().join(format!("r{i}_{rep}.{e}"))))
                .collect();
            outputs.push(files);
        }
        assert_eq!(outputs[0], outputs[1], "{args:?} is not reproducible");
        assert!(outputs[0].iter().all(|f| f.ends_with(b"\n")));
    }
}

#[test]
fn path_csv_round_trips_exactly() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sim.csv");
    ok(&["simulate", "--epsilon", "0.2", "--seed", "3", "--out", s(&out)]);
    let text = String::from_utf8(read(&out)).unwrap();
    let path = CadlagPath::from_csv(&text).unwrap();
    assert_eq!(path.to_csv(), text);
    assert_eq!(path.jump_times().len(), 2);
    let sched = String::from_utf8(read(&dir.path().join("sim.impulses.csv"))).unwrap();
    assert!(sched.starts_with("k,tau_k,pre_value,post_value\n"));
    assert_eq!(sched.lines().count(), 3);
}

#[test]
fn empty_schedule_is_header_only() {
    assert_eq!(ImpulseSchedule::default().to_csv(), "k,tau_k,pre_value,post_value\n");
}

#[test]
fn fpt_table_matches_library() {
    let out = ok(&["fpt", "--alpha", "1", "--eps-p", "0.2", "--grid", "0:2:5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,pdf,cdf");
    assert_eq!(lines.len(), 6);
    let f = skorolab::fpt::FptParams::new(1.0, 0.2).unwrap();
    let row: Vec<f64> = lines[3].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[0], 1.0);
    assert_eq!(row[1], f.density(1.0).unwrap());
    assert_eq!(row[2], f.cdf(1.0));
    let row: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row, vec![0.0, 0.0, 0.0]);
}

#[test]
fn skorohod_on_the_step_instance() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    std::fs::write(&a, CadlagPath::step(1.0, &[0.4], &[vec![0.0], vec![1.0]]).unwrap().to_csv()).unwrap();
    std::fs::write(&b, CadlagPath::step(1.0, &[0.5], &[vec![0.0], vec![1.0]]).unwrap().to_csv()).unwrap();
    let out = ok(&[
        "skorohod", "--x1", s(&a), "--x2", s(&b), "--knots", "0:0,0.4:0.5,1:1", "--oracle", "64",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["upper"].as_f64().unwrap() - 1.25f64.ln()).abs() < 1e-12);
    assert_eq!(v["uniform"].as_f64().unwrap(), 1.0);
    assert!((v["oracle"].as_f64().unwrap() - 1.25f64.ln()).abs() < 1e-3);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x.csv");

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[noise]\np = 0.9\n").unwrap();
    let r = skorolab(&["simulate", "--config", s(&bad), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("noise.p") && err.contains("p > 1"), "{err}");

    std::fs::write(&bad, "[noise]\nmystery = 1\n").unwrap();
    let r = skorolab(&["simulate", "--config", s(&bad), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));

    let r = skorolab(&["simulate", "--p", "0.5", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));

    let r = skorolab(&["experiment", "--config", s(&dir.path().join("missing.toml")), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(4));

    // resolution guard: dt above alpha/200
    let r = skorolab(&["simulate", "--dt", "0.05", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));

    let r = skorolab(&["trajectory", "--out", s(&dir.path().join("no/such/dir/t.csv"))]);
    assert_eq!(r.status.code(), Some(4));

    let r = skorolab(&["fpt", "--alpha", "1", "--eps-p", "0.1", "--grid", "2:1:5"]);
    assert_eq!(r.status.code(), Some(2));

    std::fs::write(&bad, "[experiment]\neps_grid = [0.1]\n").unwrap();
    let r = skorolab(&["experiment", "--config", s(&bad), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn help_lists_flags() {
    let expected: &[(&str, &[&str])] = &[
        ("trajectory", &["--config", "--dt", "--horizon", "--out"]),
        (
            "simulate",
            &["--config", "--epsilon", "--p", "--sigma", "--zeta", "--dt", "--horizon", "--seed", "--out"],
        ),
        ("fluctuation", &["--config", "--seed", "--out"]),
        ("fpt", &["--alpha", "--eps-p", "--grid", "--out"]),
        ("skorohod", &["--x1", "--x2", "--knots", "--oracle", "--out"]),
        ("experiment", &["--mode", "--config", "--out"]),
    ];
    for (cmd, flags) in expected {
        let out = ok(&[cmd, "--help"]);
        let text = String::from_utf8(out.stdout).unwrap();
        for f in *flags {
            assert!(text.contains(f), "{cmd} --help lacks {f}");
        }
    }
}
