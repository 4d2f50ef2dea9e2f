//! Shared helpers for integration tests: example paths, run configs, and a naive oracle.
#![allow(dead_code)]

use lcengine::cli::{Mode, RunConfig};
use lcengine::grid::Grid;
use lcengine::io::{Format, ResultSet, UnitValueTable};
use lcengine::model::{ExchangeAmount, ProcessModel, UnitSource};
use std::path::PathBuf;

pub fn example(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("examples")
        .join(name)
}

pub fn config(mode: Mode) -> RunConfig {
    RunConfig {
        model: example("heatplant.model"),
        db: example("heatplant_db.csv"),
        dcf: (mode == Mode::Dynamic).then(|| example("heatplant_dcf.csv")),
        mode,
        n_runs: (mode == Mode::Montecarlo).then_some(100),
        seed: (mode == Mode::Montecarlo).then_some(7),
        rate: None,
        output: None,
        format: Format::Csv,
        categories: None,
    }
}

pub fn heatplant(mode: Mode) -> ResultSet {
    lcengine::cli::execute(&config(mode)).expect("heatplant run")
}

/// Amount value at a cell; distributions are not supported by the oracle.
fn cell(amount: &ExchangeAmount, s: usize, t: usize) -> f64 {
    match amount {
        ExchangeAmount::Scalar(v) => *v,
        ExchangeAmount::Matrix(g) => g.get(s, t),
        ExchangeAmount::Distribution(_) => panic!("oracle handles deterministic amounts only"),
    }
}

/// Unit values of a main process by straight nested loops over scenario, time, sub-process
/// and flow, with unit values looked up cell by cell. Returns categories then cost.
pub fn oracle(model: &ProcessModel, db: &UnitValueTable) -> Vec<Grid> {
    let (rows, cols) = (model.grid.n_scenarios, model.grid.n_timesteps);
    let keys: Vec<Option<&str>> = model
        .categories
        .iter()
        .map(|c| Some(c.as_str()))
        .chain([None])
        .collect();
    let mut out = Vec::new();
    for key in keys {
        let mut g = Grid::zeros(lcengine::Shape::new(rows, cols));
        for s in 0..rows {
            for t in 0..cols {
                let mut main = 0.0;
                for sp in &model.subprocesses {
                    let mut unit = 0.0;
                    for f in &sp.flows {
                        let u = match (&f.source, key) {
                            (UnitSource::Foreground, Some(c)) => f.inline_unit_impact[c],
                            (UnitSource::Foreground, None) => f.inline_unit_cost.unwrap(),
                            (UnitSource::Background(k), Some(c)) => {
                                let row = db.get(k).unwrap();
                                match row.overrides.get(c) {
                                    Some(list) => list[t],
                                    None => row.impacts[c],
                                }
                            }
                            (UnitSource::Background(k), None) => db.get(k).unwrap().unit_cost.unwrap(),
                        };
                        unit += u * cell(&f.amount, s, t);
                    }
                    main += unit * cell(&sp.amount, s, t);
                }
                g.set(s, t, main);
            }
        }
        out.push(g);
    }
    out
}
