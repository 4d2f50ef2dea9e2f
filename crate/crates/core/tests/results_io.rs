mod common;

use common::heatplant;
use lcengine::cli::Mode;
use lcengine::io::{export_results, import_results, read_results, write_results, Format, Payload};

const MODES: [Mode; 3] = [Mode::Static, Mode::Montecarlo, Mode::Dynamic];

#[test]
fn roundtrip_is_exact_for_every_payload() {
    let dir = tempfile::tempdir().unwrap();
    for mode in MODES {
        let rs = heatplant(mode);
        for format in [Format::Csv, Format::Json] {
            let a = dir.path().join(format!("{mode:?}.a"));
            let b = dir.path().join(format!("{mode:?}.b"));
            export_results(&rs, format, &a).unwrap();
            let back = import_results(&a).unwrap();
            assert_eq!(back, rs, "{mode:?} {format:?}");
            export_results(&back, format, &b).unwrap();
            assert_eq!(
                std::fs::read(&a).unwrap(),
                std::fs::read(&b).unwrap(),
                "{mode:?} {format:?}"
            );
        }
    }
}

#[test]
fn static_csv_has_one_row_per_key_on_a_unit_grid() {
    let mut cfg = common::config(Mode::Static);
    let dir = tempfile::tempdir().unwrap();
    // a 1x1 copy of the example without the time-varying input
    let text = std::fs::read_to_string(&cfg.model)
        .unwrap()
        .replace("timesteps = 20", "timesteps = 1")
        .replace("matrix_file = \"heatplant_electricity.csv\"", "matrix = [[0.02]]");
    let text =
        text.split("[economics]").next().unwrap().to_owned() + &text[text.find("[[subprocess]]").unwrap()..];
    let model = dir.path().join("unit.model");
    std::fs::write(&model, text).unwrap();
    cfg.model = model;
    let rs = lcengine::cli::execute(&cfg).unwrap();
    let csv = write_results(&rs, Format::Csv).unwrap();
    let totals: Vec<&str> = csv.lines().filter(|l| l.starts_with("total,")).collect();
    assert_eq!(totals.len(), 3, "{totals:?}");
    for (line, key) in totals.iter().zip(["GWP100", "AP", "cost"]) {
        assert!(line.starts_with(&format!("total,0,0,{key},")), "{line}");
    }
}

/// Sample percentile with linear interpolation between closest ranks.
fn pct(sorted: &[f64], p: f64) -> f64 {
    let rank = p / 100.0 * (sorted.len() as f64 - 1.0);
    let i = rank as usize;
    if i + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[i] * (1.0 - rank.fract()) + sorted[i + 1] * rank.fract()
}

#[test]
fn monte_carlo_stat_rows_match_recomputed_statistics() {
    let rs = heatplant(Mode::Montecarlo);
    let csv = write_results(&rs, Format::Csv).unwrap();
    let mut samples: std::collections::BTreeMap<(String, usize), Vec<f64>> = Default::default();
    let mut stats: std::collections::BTreeMap<(String, String, usize), f64> = Default::default();
    for line in csv.lines().skip(3) {
        let f: Vec<&str> = line.split(',').collect();
        let v: f64 = f[4].parse().unwrap();
        if f[0] == "total" {
            samples
                .entry((f[3].to_owned(), f[2].parse().unwrap()))
                .or_default()
                .push(v);
        } else if let Some(label) = f[0].strip_prefix("stat:") {
            stats.insert((label.to_owned(), f[3].to_owned(), f[2].parse().unwrap()), v);
        }
    }
    assert_eq!(stats.len(), 5 * 3 * 20);
    for ((key, t), mut xs) in samples {
        assert_eq!(xs.len(), 100);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = [
            ("mean", mean),
            ("sd", var.sqrt()),
            ("p2.5", pct(&xs, 2.5)),
            ("p50", pct(&xs, 50.0)),
            ("p97.5", pct(&xs, 97.5)),
        ];
        for (label, want) in expected {
            let got = stats[&(label.to_owned(), key.clone(), t)];
            assert!(
                (got - want).abs() <= 1e-9 * want.abs().max(1e-12),
                "{label} {key} {t}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn corrupted_exports_are_rejected() {
    let rs = heatplant(Mode::Dynamic);
    let csv = write_results(&rs, Format::Csv).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    let mut variants = Vec::new();
    // drop a value
    variants.push([&lines[..10], &lines[11..]].concat().join("\n"));
    // repeat a value
    variants.push([&lines[..], &lines[10..11]].concat().join("\n"));
    // damage a number
    let mut bad = lines.clone();
    let damaged = bad[12].replace('e', "x");
    bad[12] = &damaged;
    variants.push(bad.join("\n"));
    // unknown section
    variants.push(format!("{csv}bogus,0,0,GWP100,1\n"));
    // cell out of range
    variants.push(format!("{csv}total,5,0,GWP100,1\n"));
    // truncated
    variants.push(csv[..csv.len() / 2].to_owned());
    let json = write_results(&rs, Format::Json).unwrap();
    variants.push(json[..json.len() / 2].to_owned());
    for (i, v) in variants.iter().enumerate() {
        let r = std::panic::catch_unwind(|| read_results(v));
        assert!(matches!(r, Ok(Err(_))), "variant {i} not rejected");
    }
}

#[test]
fn metadata_carries_provenance() {
    for mode in MODES {
        let rs = heatplant(mode);
        let cfg = rs.metadata.config.as_ref().unwrap();
        assert_eq!(cfg.mode, mode);
        assert_eq!(rs.metadata.input_hash.as_ref().unwrap().len(), 64);
        assert!(rs.economics.is_some());
        match (&rs.payload, mode) {
            (Payload::Unit { .. }, Mode::Static)
            | (Payload::MonteCarlo { .. }, Mode::Montecarlo)
            | (Payload::Dynamic { .. }, Mode::Dynamic) => {}
            (p, m) => panic!("{m:?} gave {p:?}"),
        }
    }
}
