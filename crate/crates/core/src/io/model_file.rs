//! Model documents.
//!
//! A model is a TOML document:
//!
//! ```toml
//! schema_version = 1
//!
//! [process]
//! name = "heatplant"
//! functional_unit = "1 MWh of delivered heat"
//! categories = ["GWP100", "AP"]
//! discount_rate = 0.05
//!
//! [grid]
//! scenarios = 1
//! timesteps = 20
//! step = "year"
//! origin = 2025
//!
//! [economics]
//! production = [1000.0, ...]
//!
//! [[subprocess]]
//! name = "boiler"
//! amount = 1.0
//!
//! [[subprocess.flow]]
//! name = "natural_gas"
//! direction = "inflow"
//! amount = { distribution = "triangular", low = 0.105, mode = 0.11, high = 0.12 }
//! background = "natural gas"
//! ```
//!
//! An amount is a number, `{ matrix_file = "relative.csv" }`, `{ matrix = [[...], ...] }`, or
//! `{ distribution = "<kind>", ...parameters }`. Flows with `background = "foreground"` carry
//! `unit_cost` and `impacts = { <category> = <value> }` inline.

use super::number::parse_number;
use super::{LoadError, SourcePos};
use crate::grid::{Grid, ScenarioGrid};
use crate::model::{
    validate_structure, Direction, ExchangeAmount, FlowDefinition, FunctionalUnit, ProcessModel,
    SubProcessDefinition, UnitSource,
};
use crate::sampler::DistributionSpec;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

const SCHEMA_VERSION: i64 = 1;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoc {
    schema_version: Option<i64>,
    process: Option<RawProcess>,
    grid: Option<RawGrid>,
    economics: Option<RawEconomics>,
    #[serde(default)]
    subprocess: Vec<RawSubProcess>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProcess {
    name: String,
    #[serde(default)]
    functional_unit: String,
    reference_amount: Option<f64>,
    #[serde(default)]
    categories: Vec<String>,
    #[serde(default)]
    discount_rate: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    scenarios: i64,
    timesteps: i64,
    step: Option<String>,
    #[serde(default)]
    origin: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEconomics {
    production: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSubProcess {
    name: String,
    amount: toml::Value,
    #[serde(default)]
    flow: Vec<RawFlow>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFlow {
    name: String,
    direction: Direction,
    amount: toml::Value,
    background: String,
    unit_cost: Option<f64>,
    #[serde(default)]
    impacts: BTreeMap<String, f64>,
    substance: Option<String>,
}

/// Loads and structurally validates a model document.
pub fn load_model(path: impl AsRef<Path>) -> Result<ProcessModel, LoadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_model(&text, base).map_err(|e| e.at(path))
}

/// Parses a model document; `base_dir` resolves `matrix_file` paths.
pub fn parse_model(text: &str, base_dir: &Path) -> Result<ProcessModel, LoadError> {
    if text.trim().is_empty() {
        return Err(LoadError::parse(SourcePos::start(), "empty model document"));
    }
    let raw: RawDoc = toml::from_str(text).map_err(|e| {
        let pos = e.span().map_or(SourcePos::start(), |span| {
            SourcePos::from_offset(text, span.start)
        });
        LoadError::parse(pos, e.message().trim().to_owned())
    })?;
    let schema = |m: String| LoadError::schema(None, m);

    match raw.schema_version {
        Some(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(schema(format!(
                "unsupported schema_version {v}, expected {SCHEMA_VERSION}"
            )))
        }
        None => return Err(schema("missing `schema_version = 1` header".into())),
    }
    let process = raw
        .process
        .ok_or_else(|| schema("missing [process] block".into()))?;
    let grid = raw.grid.ok_or_else(|| schema("missing [grid] block".into()))?;
    if grid.scenarios < 1 || grid.timesteps < 1 {
        return Err(schema(format!(
            "grid: scenarios and timesteps must be >= 1, got {}x{}",
            grid.scenarios, grid.timesteps
        )));
    }
    let grid = ScenarioGrid::new(grid.scenarios as usize, grid.timesteps as usize)
        .with_step(grid.step.unwrap_or_else(|| "year".to_owned()), grid.origin);

    let mut subprocesses = Vec::with_capacity(raw.subprocess.len());
    for sp in raw.subprocess {
        let sp_loc = format!("subprocess[{}]", sp.name);
        let amount = convert_amount(&sp.amount, &format!("{sp_loc}.amount"), base_dir)?;
        let mut flows = Vec::with_capacity(sp.flow.len());
        for f in sp.flow {
            let loc = format!("{sp_loc}.flow[{}]", f.name);
            flows.push(FlowDefinition {
                amount: convert_amount(&f.amount, &format!("{loc}.amount"), base_dir)?,
                name: f.name,
                direction: f.direction,
                source: UnitSource::from(f.background),
                inline_unit_impact: f.impacts,
                inline_unit_cost: f.unit_cost,
                substance: f.substance,
            });
        }
        subprocesses.push(SubProcessDefinition {
            name: sp.name,
            amount,
            flows,
        });
    }

    let model = ProcessModel {
        name: process.name,
        functional_unit: FunctionalUnit {
            description: process.functional_unit,
            reference_amount: process.reference_amount.unwrap_or(1.0),
        },
        subprocesses,
        grid,
        categories: process.categories,
        discount_rate: process.discount_rate,
        production: raw.economics.map(|e| e.production),
    };
    let report = validate_structure(&model);
    if !report.is_valid() {
        return Err(LoadError::Invalid { path: None, report });
    }
    Ok(model)
}

fn as_f64(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Float(f) => Some(*f),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn convert_amount(value: &toml::Value, loc: &str, base_dir: &Path) -> Result<ExchangeAmount, LoadError> {
    let err = |m: String| LoadError::schema(None, format!("{loc}: {m}"));
    if let Some(v) = as_f64(value) {
        return Ok(ExchangeAmount::Scalar(v));
    }
    let table = value.as_table().ok_or_else(|| {
        err(format!(
            "expected a number or a table, found {}",
            value.type_str()
        ))
    })?;

    if let Some(file) = table.get("matrix_file") {
        if table.len() != 1 {
            return Err(err("`matrix_file` takes no other keys".into()));
        }
        let file = file
            .as_str()
            .ok_or_else(|| err("`matrix_file` must be a string".into()))?;
        let path = base_dir.join(file);
        let text = std::fs::read_to_string(&path).map_err(|e| LoadError::io(&path, e))?;
        return parse_matrix_csv(&text)
            .map(ExchangeAmount::Matrix)
            .map_err(|e| e.at(&path));
    }
    if let Some(rows) = table.get("matrix") {
        if table.len() != 1 {
            return Err(err("`matrix` takes no other keys".into()));
        }
        let rows = rows
            .as_array()
            .ok_or_else(|| err("`matrix` must be an array of rows".into()))?
            .iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| err("matrix rows must be arrays".into()))?
                    .iter()
                    .map(|v| as_f64(v).ok_or_else(|| err("matrix entries must be numbers".into())))
                    .collect::<Result<Vec<f64>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let grid = Grid::from_rows(&rows).map_err(|e| err(format!("ragged matrix ({e})")))?;
        return Ok(ExchangeAmount::Matrix(grid));
    }
    let kind = table
        .get("distribution")
        .ok_or_else(|| err("table amounts need `matrix_file`, `matrix`, or `distribution`".into()))?
        .as_str()
        .ok_or_else(|| err("`distribution` must be a string".into()))?;
    let expected: &[&str] = match kind {
        "point" => &["value"],
        "uniform" => &["low", "high"],
        "normal" => &["mean", "sd"],
        "triangular" => &["low", "mode", "high"],
        "lognormal" => &["mu", "sigma"],
        other => return Err(err(format!("unknown distribution `{other}`"))),
    };
    for key in table.keys() {
        if key != "distribution" && !expected.contains(&key.as_str()) {
            return Err(err(format!("unexpected parameter `{key}` for {kind}")));
        }
    }
    let p = |name: &str| {
        table
            .get(name)
            .and_then(as_f64)
            .ok_or_else(|| err(format!("{kind} needs numeric `{name}`")))
    };
    let spec = match kind {
        "point" => DistributionSpec::Point { value: p("value")? },
        "uniform" => DistributionSpec::Uniform {
            low: p("low")?,
            high: p("high")?,
        },
        "normal" => DistributionSpec::Normal {
            mean: p("mean")?,
            sd: p("sd")?,
        },
        "triangular" => DistributionSpec::Triangular {
            low: p("low")?,
            mode: p("mode")?,
            high: p("high")?,
        },
        _ => DistributionSpec::Lognormal {
            mu: p("mu")?,
            sigma: p("sigma")?,
        },
    };
    spec.validate().map_err(|e| err(e.to_string()))?;
    Ok(ExchangeAmount::Distribution(spec))
}

/// Headerless CSV, one row per scenario, one column per time step.
fn parse_matrix_csv(text: &str) -> Result<Grid, LoadError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| LoadError::from_csv(&e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = record
            .iter()
            .map(parse_number)
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|m| LoadError::parse(SourcePos::line(line), m))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(LoadError::parse(SourcePos::start(), "empty matrix file"));
    }
    Ok(Grid::from_rows(&rows).expect("csv reader rejects ragged rows"))
}
