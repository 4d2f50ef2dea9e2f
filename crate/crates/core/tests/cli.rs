//! End-to-end runs of the `lcengine` binary on the shipped example.

mod common;

use common::example;
use std::path::Path;
use std::process::{Command, Output};

fn lcengine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcengine"))
        .args(args)
        .env_remove("LCENGINE_LOG")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn base_args<'a>(model: &'a str, db: &'a str) -> Vec<&'a str> {
    vec!["run", "--model", model, "--db", db]
}

#[test]
fn validate_exit_codes() {
    let (m, db) = (example("heatplant.model"), example("heatplant_db.csv"));
    let o = lcengine(&["validate", "--model", s(&m), "--db", s(&db)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "OK");

    let dir = tempfile::tempdir().unwrap();
    let short_db = dir.path().join("db.csv");
    let text = std::fs::read_to_string(&db).unwrap();
    std::fs::write(
        &short_db,
        text.lines()
            .filter(|l| !l.starts_with("steel"))
            .collect::<Vec<_>>()
            .join("\n"),
    )
    .unwrap();
    let o = lcengine(&["validate", "--model", s(&m), "--db", s(&short_db)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("steel"), "{}", stdout(&o));

    let o = lcengine(&["validate", "--model", "/nonexistent.model", "--db", s(&db)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!stderr(&o).is_empty());
}

#[test]
fn static_summary_matches_export() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("static.csv");
    let (m, db) = (example("heatplant.model"), example("heatplant_db.csv"));
    let mut args = base_args(s(&m), s(&db));
    args.extend(["--mode", "static", "--output", s(&out)]);
    let o = lcengine(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    // totals in the export, averaged over the grid
    let mut sums: std::collections::HashMap<String, (f64, usize)> = Default::default();
    for line in std::fs::read_to_string(&out).unwrap().lines().skip(3) {
        let f: Vec<&str> = line.split(',').collect();
        if f[0] == "total" {
            let e = sums.entry(f[3].to_owned()).or_default();
            e.0 += f[4].parse::<f64>().unwrap();
            e.1 += 1;
        }
    }
    let summary = stdout(&o);
    let mut seen = 0;
    for line in summary.lines() {
        let f: Vec<&str> = line.split('\t').collect();
        if f[0] == "total" {
            let (sum, n) = sums[f[1]];
            let printed: f64 = f[2].parse().unwrap();
            assert!(
                (printed - sum / n as f64).abs() <= 1e-12 * printed.abs(),
                "{line}"
            );
            seen += 1;
        }
    }
    assert_eq!(seen, 3);
    for key in ["npv", "msp", "lcoe"] {
        assert!(
            summary.lines().any(|l| l.starts_with(&format!("{key}\t"))),
            "{summary}"
        );
    }
}

#[test]
fn runs_are_deterministic_in_every_mode() {
    let dir = tempfile::tempdir().unwrap();
    let (m, db, dcf) = (
        example("heatplant.model"),
        example("heatplant_db.csv"),
        example("heatplant_dcf.csv"),
    );
    for (mode, extra) in [
        ("static", vec![]),
        ("montecarlo", vec!["--n-runs", "100", "--seed", "7"]),
        ("dynamic", vec!["--dcf", s(&dcf)]),
    ] {
        for format in ["csv", "json"] {
            let mut files = Vec::new();
            for (i, threads) in ["1", "3"].into_iter().enumerate() {
                let out = dir.path().join(format!("{mode}{i}.{format}"));
                let mut args = base_args(s(&m), s(&db));
                args.extend(["--mode", mode, "--output", s(&out), "--threads", threads]);
                args.extend(&extra);
                let o = lcengine(&args);
                assert_eq!(o.status.code(), Some(0), "{mode}: {}", stderr(&o));
                files.push(std::fs::read(&out).unwrap());
            }
            assert_eq!(files[0], files[1], "{mode} {format}");
        }
    }
}

#[test]
fn run_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (m, db) = (example("heatplant.model"), example("heatplant_db.csv"));

    let mut args = base_args(s(&m), s(&db));
    args.extend(["--mode", "dynamic"]);
    let o = lcengine(&args);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--dcf"));

    let mut args = base_args(s(&m), s(&db));
    args.extend(["--mode", "montecarlo", "--n-runs", "1"]);
    assert_eq!(lcengine(&args).status.code(), Some(1));

    assert_eq!(lcengine(&["run", "--model", s(&m)]).status.code(), Some(1));
    assert_eq!(lcengine(&["run", "--bogus"]).status.code(), Some(1));

    let mut args = base_args(s(&m), s(&db));
    args.extend(["--categories", "ODP"]);
    assert_eq!(lcengine(&args).status.code(), Some(1));

    let o = lcengine(&base_args("/nonexistent.model", s(&db)));
    assert_eq!(o.status.code(), Some(2));

    let mut args = base_args(s(&m), s(&db));
    args.extend(["--output", "/nonexistent/dir/out.csv"]);
    assert_eq!(lcengine(&args).status.code(), Some(2));

    // a background value that overflows to infinity
    let hot_db = dir.path().join("db.csv");
    let text = std::fs::read_to_string(&db)
        .unwrap()
        .replace("steel,1.2,1.9", "steel,1.2,1e308");
    std::fs::write(&hot_db, text).unwrap();
    let text = std::fs::read_to_string(&m)
        .unwrap()
        .replace("amount = 0.5", "amount = 1e10");
    let hot_model = dir.path().join("hot.model");
    std::fs::write(&hot_model, text).unwrap();
    std::fs::copy(
        example("heatplant_electricity.csv"),
        dir.path().join("heatplant_electricity.csv"),
    )
    .unwrap();
    let o = lcengine(&base_args(s(&hot_model), s(&hot_db)));
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("GWP100") && err.contains("scenario 0"), "{err}");
}

#[test]
fn categories_filter_limits_computation() {
    let (m, db) = (example("heatplant.model"), example("heatplant_db.csv"));
    let mut args = base_args(s(&m), s(&db));
    args.extend(["--categories", "AP"]);
    let o = lcengine(&args);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("total\tAP\t") && !out.contains("GWP100"), "{out}");
}

fn plot_rows(path: &Path) -> Vec<Vec<String>> {
    let o = lcengine(&["report", "--result", s(path), "--plot-data"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(lcengine::cli::PLOT_HEADER));
    lines.map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn report_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let (m, db, dcf) = (
        example("heatplant.model"),
        example("heatplant_db.csv"),
        example("heatplant_dcf.csv"),
    );
    let run = |mode: &str, extra: &[&str], out: &Path| {
        let mut args = base_args(s(&m), s(&db));
        args.extend(["--mode", mode, "--output", s(out)]);
        args.extend(extra);
        assert_eq!(lcengine(&args).status.code(), Some(0));
    };

    // contributions partition the total
    let st = dir.path().join("s.json");
    run("static", &[], &st);
    let rows = plot_rows(&st);
    let value = |r: &Vec<String>| r[6].parse::<f64>().unwrap();
    for r in rows.iter().filter(|r| r[0] == "impact") {
        let sum: f64 = rows
            .iter()
            .filter(|c| c[0] == "contribution" && c[1] == r[1] && c[3] == r[3] && c[4] == r[4])
            .map(value)
            .sum();
        assert!(close(sum, value(r)), "{r:?}: {sum}");
    }

    // cumulative is the running sum of the dynamic impact
    let dy = dir.path().join("d.csv");
    run("dynamic", &["--dcf", s(&dcf)], &dy);
    let rows = plot_rows(&dy);
    for key in ["GWP100", "AP"] {
        let series = |table: &str| -> Vec<f64> {
            rows.iter()
                .filter(|r| r[0] == table && r[1] == key && r[2] == "dynamic")
                .map(value)
                .collect()
        };
        let (imp, cum) = (series("impact"), series("cumulative"));
        assert_eq!(imp.len(), cum.len());
        assert!(imp.len() > 20);
        let mut acc = 0.0;
        for (i, c) in imp.iter().zip(&cum) {
            acc += i;
            assert!(close(acc, *c));
        }
    }
    assert!(rows
        .iter()
        .any(|r| r[0] == "substance_contribution" && r[2] == "CH4"));

    // histogram counts conserve samples
    let mc = dir.path().join("m.csv");
    run("montecarlo", &["--n-runs", "100", "--seed", "3"], &mc);
    let rows = plot_rows(&mc);
    for key in ["GWP100", "AP", "cost"] {
        let bins: Vec<&Vec<String>> = rows
            .iter()
            .filter(|r| r[0] == "histogram" && r[1] == key)
            .collect();
        assert_eq!(bins.len(), 50);
        assert_eq!(bins.iter().map(|r| value(r)).sum::<f64>(), 100.0);
    }

    let o = lcengine(&["report", "--result", "/nonexistent.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let junk = dir.path().join("junk.csv");
    std::fs::write(&junk, "not a result\n").unwrap();
    assert_eq!(lcengine(&["report", "--result", s(&junk)]).status.code(), Some(2));
}

#[test]
fn log_level_from_environment() {
    let (m, db) = (example("heatplant.model"), example("heatplant_db.csv"));
    let o = Command::new(env!("CARGO_BIN_EXE_lcengine"))
        .args(base_args(s(&m), s(&db)))
        .env("LCENGINE_LOG", "info")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("INFO"), "{}", stderr(&o));
}
