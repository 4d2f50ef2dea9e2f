//! The two-level process hierarchy: a main process made of sub-processes, each made of
//! inflows and outflows.
//!
//! Exchange amounts of flows and sub-processes may be scalars, full scenario by time matrices,
//! or distributions sampled per scenario. A sub-process amount may itself be stochastic,
//! independently of its flows.

use crate::grid::{Grid, ScenarioGrid, Shape, ShapeError};
use crate::io::UnitValueTable;
use crate::sampler::{self, DistributionSpec, SamplerError, SamplerStream};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::fmt;

/// Category name reserved for the cost series in exported results.
pub const COST_KEY: &str = "cost";

/// Marker used in place of a background key when unit values are given inline.
pub const FOREGROUND: &str = "foreground";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Inflow,
    Outflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExchangeAmount {
    Scalar(f64),
    Matrix(Grid),
    Distribution(DistributionSpec),
}

impl From<f64> for ExchangeAmount {
    fn from(v: f64) -> Self {
        Self::Scalar(v)
    }
}

impl ExchangeAmount {
    pub fn is_scalar(&self) -> bool {
        matches!(self, Self::Scalar(_))
    }
}

/// Where a flow's unit values come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum UnitSource {
    Background(String),
    Foreground,
}

impl From<String> for UnitSource {
    fn from(s: String) -> Self {
        if s == FOREGROUND {
            Self::Foreground
        } else {
            Self::Background(s)
        }
    }
}

impl From<UnitSource> for String {
    fn from(s: UnitSource) -> Self {
        match s {
            UnitSource::Background(k) => k,
            UnitSource::Foreground => FOREGROUND.to_owned(),
        }
    }
}

/// An inflow or outflow of a sub-process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowDefinition {
    pub name: String,
    pub direction: Direction,
    pub amount: ExchangeAmount,
    pub source: UnitSource,
    #[serde(default)]
    pub inline_unit_impact: BTreeMap<String, f64>,
    /// Signed; revenues are negative.
    #[serde(default)]
    pub inline_unit_cost: Option<f64>,
    /// The flow is itself an emission of this substance (one unit per unit of flow).
    #[serde(default)]
    pub substance: Option<String>,
}

impl FlowDefinition {
    pub fn background(
        name: &str,
        direction: Direction,
        amount: impl Into<ExchangeAmount>,
        key: &str,
    ) -> Self {
        Self {
            name: name.to_owned(),
            direction,
            amount: amount.into(),
            source: UnitSource::Background(key.to_owned()),
            inline_unit_impact: BTreeMap::new(),
            inline_unit_cost: None,
            substance: None,
        }
    }

    pub fn foreground(name: &str, direction: Direction, amount: impl Into<ExchangeAmount>) -> Self {
        Self {
            source: UnitSource::Foreground,
            ..Self::background(name, direction, amount, "")
        }
    }

    pub fn with_impact(mut self, category: &str, value: f64) -> Self {
        self.inline_unit_impact.insert(category.to_owned(), value);
        self
    }

    pub fn with_cost(mut self, cost: f64) -> Self {
        self.inline_unit_cost = Some(cost);
        self
    }

    pub fn with_substance(mut self, substance: &str) -> Self {
        self.substance = Some(substance.to_owned());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubProcessDefinition {
    pub name: String,
    /// Amount of this sub-process per unit of main process.
    pub amount: ExchangeAmount,
    pub flows: Vec<FlowDefinition>,
}

impl SubProcessDefinition {
    pub fn new(name: &str, amount: impl Into<ExchangeAmount>, flows: Vec<FlowDefinition>) -> Self {
        Self {
            name: name.to_owned(),
            amount: amount.into(),
            flows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalUnit {
    pub description: String,
    /// Reference amount the exchange amounts are expressed against. Descriptive only.
    pub reference_amount: f64,
}

impl Default for FunctionalUnit {
    fn default() -> Self {
        Self {
            description: String::new(),
            reference_amount: 1.0,
        }
    }
}

/// The main process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessModel {
    pub name: String,
    pub functional_unit: FunctionalUnit,
    pub subprocesses: Vec<SubProcessDefinition>,
    pub grid: ScenarioGrid,
    pub categories: Vec<String>,
    /// Per grid period, not per year.
    pub discount_rate: f64,
    /// Units of functional unit delivered per period, for discounted indicators.
    #[serde(default)]
    pub production: Option<Vec<f64>>,
}

impl ProcessModel {
    pub fn new(
        name: &str,
        grid: ScenarioGrid,
        categories: &[&str],
        subprocesses: Vec<SubProcessDefinition>,
    ) -> Self {
        Self {
            name: name.to_owned(),
            functional_unit: FunctionalUnit::default(),
            subprocesses,
            grid,
            categories: categories.iter().map(|c| (*c).to_owned()).collect(),
            discount_rate: 0.0,
            production: None,
        }
    }

    pub fn flow_count(&self) -> usize {
        self.subprocesses.iter().map(|sp| sp.flows.len()).sum()
    }

    /// Copy restricted to `categories`, in the given order.
    pub fn with_categories(&self, categories: &[String]) -> Self {
        Self {
            categories: categories.to_vec(),
            ..self.clone()
        }
    }

    pub fn has_distributions(&self) -> bool {
        self.subprocesses.iter().any(|sp| {
            matches!(sp.amount, ExchangeAmount::Distribution(_))
                || sp
                    .flows
                    .iter()
                    .any(|f| matches!(f.amount, ExchangeAmount::Distribution(_)))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    /// Path of the offending element, e.g. `subprocess[boiler].flow[gas].amount`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}: {}", self.location, self.message)
    }
}

/// All findings of a validation pass. Warnings do not make a model invalid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Warning)
    }

    fn error(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.findings.push(Finding {
            severity: Severity::Error,
            location: location.into(),
            message: message.into(),
        });
    }

    fn warning(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.findings.push(Finding {
            severity: Severity::Warning,
            location: location.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for finding in &self.findings {
            writeln!(f, "{finding}")?;
        }
        Ok(())
    }
}

/// Checks everything that does not need the background database.
pub fn validate_structure(model: &ProcessModel) -> ValidationReport {
    let mut report = ValidationReport::default();
    let grid = &model.grid;
    if !grid.is_valid() {
        report.error(
            "grid",
            format!("scenarios and timesteps must be >= 1, got {}", grid.shape()),
        );
    }
    if model.name.trim().is_empty() {
        report.error("process.name", "empty name");
    }
    let fu = model.functional_unit.reference_amount;
    if !(fu.is_finite() && fu > 0.0) {
        report.error("process.reference_amount", format!("must be positive, got {fu}"));
    }
    if !(model.discount_rate.is_finite() && model.discount_rate >= 0.0) {
        report.error(
            "process.discount_rate",
            format!("must be >= 0, got {}", model.discount_rate),
        );
    }

    let mut seen = HashSet::new();
    for c in &model.categories {
        if c.trim().is_empty() {
            report.error("process.categories", "empty category name");
        } else if c == COST_KEY {
            report.error(
                "process.categories",
                format!("`{COST_KEY}` is reserved for the cost series"),
            );
        } else if !seen.insert(c.as_str()) {
            report.error("process.categories", format!("duplicate category `{c}`"));
        }
    }

    if let Some(production) = &model.production {
        if production.len() != grid.n_timesteps {
            report.error(
                "economics.production",
                format!(
                    "expected {} periods, found {}",
                    grid.n_timesteps,
                    production.len()
                ),
            );
        }
        if production.iter().any(|p| !p.is_finite() || *p < 0.0) {
            report.error("economics.production", "values must be finite and >= 0");
        }
    }

    if model.subprocesses.is_empty() {
        report.error("process", "at least one sub-process is required");
    }
    let mut sp_names = HashSet::new();
    for sp in &model.subprocesses {
        let loc = format!("subprocess[{}]", sp.name);
        if sp.name.trim().is_empty() {
            report.error(&loc, "empty sub-process name");
        } else if !sp_names.insert(sp.name.as_str()) {
            report.error(&loc, format!("duplicate sub-process name `{}`", sp.name));
        }
        check_amount(&mut report, &format!("{loc}.amount"), &sp.amount, grid);
        if sp.flows.is_empty() {
            report.error(&loc, "sub-process has no flows");
        }
        let mut flow_names = HashSet::new();
        for flow in &sp.flows {
            let floc = format!("{loc}.flow[{}]", flow.name);
            if flow.name.trim().is_empty() {
                report.error(&floc, "empty flow name");
            } else if !flow_names.insert(flow.name.as_str()) {
                report.error(
                    &floc,
                    format!("duplicate flow name `{}` in sub-process `{}`", flow.name, sp.name),
                );
            }
            check_amount(&mut report, &format!("{floc}.amount"), &flow.amount, grid);
            for (c, v) in &flow.inline_unit_impact {
                if !v.is_finite() {
                    report.error(&floc, format!("inline impact `{c}` is not finite"));
                }
            }
            if flow.inline_unit_cost.is_some_and(|v| !v.is_finite()) {
                report.error(&floc, "inline unit cost is not finite");
            }
            if let UnitSource::Background(key) = &flow.source {
                if key.trim().is_empty() {
                    report.error(&floc, "empty background reference");
                }
            }
        }
    }
    report
}

fn check_amount(report: &mut ValidationReport, loc: &str, amount: &ExchangeAmount, grid: &ScenarioGrid) {
    match amount {
        ExchangeAmount::Scalar(v) => {
            if !v.is_finite() {
                report.error(loc, format!("amount {v} is not finite"));
            } else if *v < 0.0 {
                report.warning(loc, format!("negative exchange amount {v} (avoided flow)"));
            }
        }
        ExchangeAmount::Matrix(m) => {
            if m.shape() != grid.shape() {
                report.error(
                    loc,
                    format!(
                        "matrix shape {} does not match grid, expected {}",
                        m.shape(),
                        grid.shape()
                    ),
                );
            }
            if let Some((s, t)) = m.first_non_finite() {
                report.error(loc, format!("non-finite value at scenario {s}, timestep {t}"));
            } else if m.as_slice().iter().any(|v| *v < 0.0) {
                report.warning(loc, "matrix contains negative exchange amounts (avoided flow)");
            }
        }
        ExchangeAmount::Distribution(d) => {
            if let Err(e) = d.validate() {
                report.error(loc, e.to_string());
            }
        }
    }
}

/// Full validation: structure plus resolvability of every unit value against `db`.
pub fn validate_model(model: &ProcessModel, db: &UnitValueTable) -> ValidationReport {
    let mut report = validate_structure(model);
    for sp in &model.subprocesses {
        for flow in &sp.flows {
            let floc = format!("subprocess[{}].flow[{}]", sp.name, flow.name);
            let row = match &flow.source {
                UnitSource::Foreground => None,
                UnitSource::Background(key) => match db.get(key) {
                    Some(row) => Some(row),
                    None => {
                        report.error(&floc, format!("background key `{key}` not found in database"));
                        continue;
                    }
                },
            };
            for c in &model.categories {
                let from_db = row.is_some_and(|r| r.has_category(c));
                let inline = flow.inline_unit_impact.contains_key(c);
                match (from_db, inline) {
                    (false, false) => report.error(&floc, format!("no unit impact for category `{c}`")),
                    (true, true) => report.error(
                        &floc,
                        format!("unit impact for `{c}` given both inline and in the database"),
                    ),
                    _ => {}
                }
                if let Some(list) = row.and_then(|r| r.overrides.get(c)) {
                    if list.len() != model.grid.n_timesteps {
                        report.error(
                            &floc,
                            format!(
                                "per-period override for `{c}` has {} values, expected {}",
                                list.len(),
                                model.grid.n_timesteps
                            ),
                        );
                    }
                }
            }
            let cost_db = row.is_some_and(|r| r.unit_cost.is_some());
            match (cost_db, flow.inline_unit_cost.is_some()) {
                (false, false) => report.error(&floc, "no unit cost"),
                (true, true) => report.error(&floc, "unit cost given both inline and in the database"),
                _ => {}
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BroadcastError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("invalid grid {0}")]
    InvalidGrid(Shape),
}

/// Expands an exchange amount onto the grid. Distributions draw one value per scenario and
/// hold it over all time steps.
pub fn broadcast_exchange(
    amount: &ExchangeAmount,
    grid: &ScenarioGrid,
    stream: SamplerStream,
) -> Result<Grid, BroadcastError> {
    if !grid.is_valid() {
        return Err(BroadcastError::InvalidGrid(grid.shape()));
    }
    let shape = grid.shape();
    match amount {
        ExchangeAmount::Scalar(v) => Ok(Grid::filled(shape, *v)),
        ExchangeAmount::Matrix(m) => {
            ShapeError::check(shape, m.shape())?;
            Ok(m.clone())
        }
        ExchangeAmount::Distribution(spec) => {
            let draws = sampler::sample(spec, shape.rows, stream)?;
            Ok(Grid::from_fn(shape, |s, _| draws[s]))
        }
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn well_formed_model_is_valid() {
        let report = validate_model(&two_sp_model(ScenarioGrid::new(2, 3)), &db());
        assert!(report.is_empty(), "{report}");
    }

    #[test]
    fn missing_db_key_reported_once() {
        let mut m = two_sp_model(ScenarioGrid::new(1, 1));
        m.subprocesses[1].flows[0].source = UnitSource::Background("stainless".into());
        let report = validate_model(&m, &db());
        let errors: Vec<_> = report.errors().collect();
        assert_eq!(errors.len(), 1, "{report}");
        assert!(errors[0].location.contains("flow[steel]"));
        assert!(errors[0].message.contains("`stainless`"));
    }

    #[test]
    fn matrix_shape_mismatch() {
        let mut m = two_sp_model(ScenarioGrid::new(2, 4));
        m.subprocesses[0].flows[0].amount = ExchangeAmount::Matrix(Grid::filled(Shape::new(2, 3), 1.0));
        let report = validate_model(&m, &db());
        let e = report.errors().next().unwrap();
        assert!(e.message.contains("expected 2x4"), "{e}");
    }

    #[test]
    fn negative_amount_is_warning_only() {
        let mut m = two_sp_model(ScenarioGrid::new(1, 1));
        m.subprocesses[1].amount = ExchangeAmount::Scalar(-1.0);
        let report = validate_model(&m, &db());
        assert!(report.is_valid());
        assert_eq!(report.warnings().count(), 1);
    }

    #[test]
    fn ambiguous_and_missing_units() {
        let mut m = two_sp_model(ScenarioGrid::new(1, 1));
        m.subprocesses[0].flows[0]
            .inline_unit_impact
            .insert("GWP100".into(), 1.0);
        m.subprocesses[0].flows[2].inline_unit_cost = None;
        let report = validate_model(&m, &db());
        let msgs: Vec<_> = report.errors().map(|f| f.message.clone()).collect();
        assert_eq!(msgs.len(), 2, "{msgs:?}");
        assert!(msgs.iter().any(|m| m.contains("both inline")));
        assert!(msgs.iter().any(|m| m == "no unit cost"));
    }

    #[test]
    fn structural_errors() {
        let mut m = two_sp_model(ScenarioGrid::new(1, 1));
        m.subprocesses[1].name = "boiler".into();
        m.subprocesses[0].flows[1].name = "gas".into();
        m.categories.push("cost".into());
        m.discount_rate = -0.1;
        let report = validate_structure(&m);
        assert_eq!(report.errors().count(), 4, "{report}");
        let empty = ProcessModel::new("x", ScenarioGrid::new(0, 1), &[], vec![]);
        assert_eq!(validate_structure(&empty).errors().count(), 2);
    }

    #[test]
    fn broadcast_examples() {
        let s = SamplerStream::new(0, 0);
        let g = broadcast_exchange(&ExchangeAmount::Scalar(2.5), &ScenarioGrid::new(2, 3), s).unwrap();
        assert_eq!(g.to_rows(), vec![vec![2.5; 3]; 2]);

        let m = Grid::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let out =
            broadcast_exchange(&ExchangeAmount::Matrix(m.clone()), &ScenarioGrid::new(2, 2), s).unwrap();
        assert_eq!(out, m);

        let d = ExchangeAmount::Distribution(DistributionSpec::Uniform { low: 1.0, high: 1.0 });
        let out = broadcast_exchange(&d, &ScenarioGrid::new(3, 2), s).unwrap();
        assert_eq!(out, Grid::filled(Shape::new(3, 2), 1.0));

        let bad = broadcast_exchange(&ExchangeAmount::Matrix(m), &ScenarioGrid::new(2, 3), s);
        assert!(matches!(bad, Err(BroadcastError::Shape(_))));
    }

    #[test]
    fn distribution_draw_is_constant_over_time() {
        let d = ExchangeAmount::Distribution(DistributionSpec::Normal { mean: 0.0, sd: 1.0 });
        let g = broadcast_exchange(&d, &ScenarioGrid::new(5, 4), SamplerStream::new(3, 4)).unwrap();
        for row in g.rows_iter() {
            assert!(row.iter().all(|v| *v == row[0]));
        }
        assert_ne!(g.get(0, 0), g.get(1, 0));
    }

    proptest! {
        #[test]
        fn scalar_fill_exact(v in -1e6..1e6f64, r in 1usize..6, c in 1usize..6) {
            let g = broadcast_exchange(&ExchangeAmount::Scalar(v), &ScenarioGrid::new(r, c), SamplerStream::new(0, 0)).unwrap();
            prop_assert!(g.as_slice().iter().all(|x| x.to_bits() == v.to_bits()));
        }

        #[test]
        fn matrix_idempotent(data in proptest::collection::vec(-1e3..1e3f64, 6)) {
            let grid = ScenarioGrid::new(2, 3);
            let m = ExchangeAmount::Matrix(Grid::from_vec(Shape::new(2, 3), data).unwrap());
            let s = SamplerStream::new(0, 0);
            let once = broadcast_exchange(&m, &grid, s).unwrap();
            let twice = broadcast_exchange(&ExchangeAmount::Matrix(once.clone()), &grid, s).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
