//! Unit impact and unit cost aggregation over the process hierarchy.
//!
//! For every category (and for cost) a sub-process unit value is the sum over its flows of
//! flow unit value times flow exchange amount; the main-process unit value is the sum over
//! sub-processes of sub-process unit value times sub-process amount. All products are
//! element-wise on the scenario by time grid.
//!
//! Two calculators implement this: a scalar one for static models ([`run_static`]) and a
//! row-parallel grid kernel ([`run_matrix`]). Both accumulate in document order (flows, then
//! sub-processes) starting from zero, so on all-scalar models they agree to the last bit.

use crate::grid::{Grid, Shape, ShapeError};
use crate::io::{UnitValueRow, UnitValueTable};
use crate::model::{validate_model, ExchangeAmount, ProcessModel, UnitSource, ValidationReport};
use crate::sampler::{self, SamplerError, SamplerStream};
use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("model failed validation:\n{0}")]
    Invalid(ValidationReport),
    #[error("static calculation needs grid-constant inputs, but {0} varies over the grid")]
    NotStatic(String),
    #[error("{location}: {source}")]
    Sampler {
        location: String,
        #[source]
        source: SamplerError,
    },
    #[error("number of Monte Carlo runs must be at least 1")]
    InvalidRuns,
    #[error("{location}: matrix has {rows} scenario rows, Monte Carlo with {runs} runs needs 1 or {runs}")]
    MatrixRows {
        location: String,
        rows: usize,
        runs: usize,
    },
    #[error("{location}: missing unit value for `{key}`")]
    Unresolved { location: String, key: String },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AggregateError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("{0} unit grids but {1} exchange grids")]
    LengthMismatch(usize, usize),
    #[error("nothing to aggregate")]
    Empty,
}

/// How distribution-valued amounts are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Use the distribution mean, a deterministic central estimate.
    Nominal,
    /// One draw per scenario from the flow's own stream under this seed.
    Seeded(u64),
}

/// Unit values of one sub-process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubProcessResult {
    pub name: String,
    /// Amount of the sub-process in the main process.
    pub amount: Grid,
    pub impacts: IndexMap<String, Grid>,
    pub cost: Grid,
}

impl SubProcessResult {
    /// Contribution of this sub-process to the main-process value of `key`
    /// (a category or [`crate::model::COST_KEY`]).
    pub fn contribution(&self, key: &str) -> Option<Grid> {
        let unit = if key == crate::model::COST_KEY {
            &self.cost
        } else {
            self.impacts.get(key)?
        };
        unit.hadamard(&self.amount).ok()
    }
}

/// Main-process unit impacts and cost with the per-sub-process breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitResult {
    pub shape: Shape,
    pub impacts: IndexMap<String, Grid>,
    pub cost: Grid,
    pub subprocesses: Vec<SubProcessResult>,
}

impl UnitResult {
    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.impacts.keys().map(String::as_str)
    }

    /// Category grids followed by the cost grid.
    pub fn series(&self) -> impl Iterator<Item = (&str, &Grid)> {
        self.impacts
            .iter()
            .map(|(k, g)| (k.as_str(), g))
            .chain(std::iter::once((crate::model::COST_KEY, &self.cost)))
    }

    pub fn first_non_finite(&self) -> Option<(String, usize, usize)> {
        self.series()
            .find_map(|(k, g)| g.first_non_finite().map(|(s, t)| (k.to_owned(), s, t)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub p2_5: f64,
    pub p50: f64,
    pub p97_5: f64,
}

impl Summary {
    pub const LABELS: [&'static str; 5] = ["mean", "sd", "p2.5", "p50", "p97.5"];

    /// Mean, sample standard deviation, and linearly interpolated percentiles.
    pub fn of(values: &[f64]) -> Summary {
        assert!(!values.is_empty(), "summary of an empty sample");
        let n = values.len() as f64;
        // shifted by the first value so that a constant sample has an exact mean
        let x0 = values[0];
        let mean = x0 + values.iter().map(|v| v - x0).sum::<f64>() / n;
        let sd = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Summary {
            mean,
            sd,
            p2_5: percentile(&sorted, 2.5),
            p50: percentile(&sorted, 50.0),
            p97_5: percentile(&sorted, 97.5),
        }
    }

    pub fn values(&self) -> [f64; 5] {
        [self.mean, self.sd, self.p2_5, self.p50, self.p97_5]
    }
}

/// Percentile `p` (0..=100) of sorted data, interpolating linearly between order statistics.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-time-step summaries across runs, for one category or the cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub per_step: Vec<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    pub n_runs: usize,
    pub seed: u64,
    /// True when the model had no distributions to sample.
    pub degenerate: bool,
    /// One scenario row per run.
    pub samples: UnitResult,
    /// Keyed by category, then [`crate::model::COST_KEY`].
    pub stats: IndexMap<String, SeriesStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryResult {
    pub shape: Shape,
    pub substances: IndexMap<String, Grid>,
}

/// Cell-wise sum over flows of unit value times exchange amount.
pub fn subprocess_aggregate(unit_values: &[Grid], exchanges: &[Grid]) -> Result<Grid, AggregateError> {
    weighted_sum(unit_values, exchanges)
}

/// Cell-wise sum over sub-processes of sub-process unit value times sub-process amount.
pub fn main_aggregate(unit_sp_grids: &[Grid], sp_exchange_grids: &[Grid]) -> Result<Grid, AggregateError> {
    weighted_sum(unit_sp_grids, sp_exchange_grids)
}

fn weighted_sum(values: &[Grid], weights: &[Grid]) -> Result<Grid, AggregateError> {
    if values.len() != weights.len() {
        return Err(AggregateError::LengthMismatch(values.len(), weights.len()));
    }
    let first = values.first().ok_or(AggregateError::Empty)?;
    let mut acc = Grid::zeros(first.shape());
    for (v, w) in values.iter().zip(weights) {
        ShapeError::check(first.shape(), v.shape())?;
        ShapeError::check(first.shape(), w.shape())?;
        for ((a, v), w) in acc.as_mut_slice().iter_mut().zip(v.as_slice()).zip(w.as_slice()) {
            *a += v * w;
        }
    }
    Ok(acc)
}

/// A model input resolved onto the run's grid without materializing broadcasts.
#[derive(Debug)]
enum Field<'a> {
    Const(f64),
    PerStep(&'a [f64]),
    PerScenario(Vec<f64>),
    Full(&'a Grid),
}

#[derive(Clone, Copy)]
enum Row<'a> {
    Const(f64),
    Slice(&'a [f64]),
}

impl Field<'_> {
    fn row(&self, s: usize) -> Row<'_> {
        match self {
            Field::Const(v) => Row::Const(*v),
            Field::PerStep(v) => Row::Slice(v),
            Field::PerScenario(v) => Row::Const(v[s]),
            Field::Full(g) => Row::Slice(g.row(s)),
        }
    }

    /// Single value when the field is constant on `shape`.
    fn scalar(&self, shape: Shape) -> Option<f64> {
        match self {
            Field::Const(v) => Some(*v),
            _ if shape == Shape::new(1, 1) => match self.row(0) {
                Row::Const(v) => Some(v),
                Row::Slice(v) => Some(v[0]),
            },
            _ => None,
        }
    }

    fn write_row(&self, s: usize, out: &mut [f64]) {
        match self.row(s) {
            Row::Const(v) => out.fill(v),
            Row::Slice(v) => out.copy_from_slice(v),
        }
    }
}

#[inline]
fn accumulate(acc: &mut [f64], u: Row<'_>, a: Row<'_>) {
    match (u, a) {
        (Row::Const(u), Row::Const(a)) => {
            let p = u * a;
            for x in acc {
                *x += p;
            }
        }
        (Row::Const(u), Row::Slice(a)) => {
            for (x, a) in acc.iter_mut().zip(a) {
                *x += u * a;
            }
        }
        (Row::Slice(u), Row::Const(a)) => {
            for (x, u) in acc.iter_mut().zip(u) {
                *x += u * a;
            }
        }
        (Row::Slice(u), Row::Slice(a)) => {
            for ((x, u), a) in acc.iter_mut().zip(u).zip(a) {
                *x += u * a;
            }
        }
    }
}

struct ResolvedFlow<'a> {
    amount: Field<'a>,
    /// One per category, cost last.
    units: Vec<Field<'a>>,
    location: String,
}

struct ResolvedSubProcess<'a> {
    name: &'a str,
    amount: Field<'a>,
    flows: Vec<ResolvedFlow<'a>>,
}

struct Resolved<'a> {
    shape: Shape,
    categories: &'a [String],
    subprocesses: Vec<ResolvedSubProcess<'a>>,
}

impl Resolved<'_> {
    fn n_series(&self) -> usize {
        self.categories.len() + 1
    }
}

fn resolve_amount<'a>(
    amount: &'a ExchangeAmount,
    shape: Shape,
    sampling: Sampling,
    stream: impl FnOnce(u64) -> SamplerStream,
    location: &str,
) -> Result<Field<'a>, EngineError> {
    match amount {
        ExchangeAmount::Scalar(v) => Ok(Field::Const(*v)),
        ExchangeAmount::Matrix(m) if m.rows() == shape.rows => Ok(Field::Full(m)),
        ExchangeAmount::Matrix(m) if m.rows() == 1 => Ok(Field::PerStep(m.row(0))),
        ExchangeAmount::Matrix(m) => Err(EngineError::MatrixRows {
            location: location.to_owned(),
            rows: m.rows(),
            runs: shape.rows,
        }),
        ExchangeAmount::Distribution(spec) => match sampling {
            Sampling::Nominal => Ok(Field::Const(spec.mean())),
            Sampling::Seeded(seed) => sampler::sample(spec, shape.rows, stream(seed))
                .map(Field::PerScenario)
                .map_err(|source| EngineError::Sampler {
                    location: location.to_owned(),
                    source,
                }),
        },
    }
}

fn background_row<'a>(
    source: &UnitSource,
    db: &'a UnitValueTable,
    location: &str,
) -> Result<Option<&'a UnitValueRow>, EngineError> {
    match source {
        UnitSource::Foreground => Ok(None),
        UnitSource::Background(key) => db.get(key).map(Some).ok_or_else(|| EngineError::Unresolved {
            location: location.to_owned(),
            key: key.clone(),
        }),
    }
}

fn resolve<'a>(
    model: &'a ProcessModel,
    db: &'a UnitValueTable,
    sampling: Sampling,
    n_scenarios: usize,
) -> Result<Resolved<'a>, EngineError> {
    let shape = Shape::new(n_scenarios, model.grid.n_timesteps);
    let mut subprocesses = Vec::with_capacity(model.subprocesses.len());
    for sp in &model.subprocesses {
        let sp_loc = format!("subprocess[{}]", sp.name);
        let amount = resolve_amount(
            &sp.amount,
            shape,
            sampling,
            |seed| SamplerStream::for_subprocess(seed, &sp.name),
            &sp_loc,
        )?;
        let mut flows = Vec::with_capacity(sp.flows.len());
        for flow in &sp.flows {
            let location = format!("{sp_loc}.flow[{}]", flow.name);
            let amount = resolve_amount(
                &flow.amount,
                shape,
                sampling,
                |seed| SamplerStream::for_flow(seed, &sp.name, &flow.name),
                &location,
            )?;
            let row = background_row(&flow.source, db, &location)?;
            let mut units = Vec::with_capacity(model.categories.len() + 1);
            for c in &model.categories {
                let field = if let Some(v) = flow.inline_unit_impact.get(c) {
                    Field::Const(*v)
                } else if let Some(list) = row.and_then(|r| r.overrides.get(c)) {
                    Field::PerStep(list)
                } else if let Some(v) = row.and_then(|r| r.impacts.get(c)) {
                    Field::Const(*v)
                } else {
                    return Err(EngineError::Unresolved {
                        location,
                        key: c.clone(),
                    });
                };
                units.push(field);
            }
            let cost = flow
                .inline_unit_cost
                .or_else(|| row.and_then(|r| r.unit_cost))
                .ok_or_else(|| EngineError::Unresolved {
                    location: location.clone(),
                    key: crate::model::COST_KEY.to_owned(),
                })?;
            units.push(Field::Const(cost));
            flows.push(ResolvedFlow {
                amount,
                units,
                location,
            });
        }
        subprocesses.push(ResolvedSubProcess {
            name: &sp.name,
            amount,
            flows,
        });
    }
    Ok(Resolved {
        shape,
        categories: &model.categories,
        subprocesses,
    })
}

fn ensure_valid(model: &ProcessModel, db: &UnitValueTable) -> Result<(), EngineError> {
    let report = validate_model(model, db);
    if report.is_valid() {
        Ok(())
    } else {
        Err(EngineError::Invalid(report))
    }
}

/// Static calculation on a 1x1 grid with the scalar calculator.
///
/// Accepts models whose inputs are constant over the grid (scalars, distributions at their
/// mean, time-invariant unit values), or any model on a 1x1 grid.
pub fn run_static(model: &ProcessModel, db: &UnitValueTable) -> Result<UnitResult, EngineError> {
    ensure_valid(model, db)?;
    let resolved = resolve(model, db, Sampling::Nominal, model.grid.n_scenarios)?;
    let shape = resolved.shape;
    let scalar = |f: &Field<'_>, loc: &str| {
        f.scalar(shape)
            .ok_or_else(|| EngineError::NotStatic(loc.to_owned()))
    };

    let k = resolved.n_series();
    let mut main = vec![0.0; k];
    let mut subprocesses = Vec::with_capacity(resolved.subprocesses.len());
    for sp in &resolved.subprocesses {
        let mut unit = vec![0.0; k];
        for flow in &sp.flows {
            let a = scalar(&flow.amount, &format!("{}.amount", flow.location))?;
            for (acc, u) in unit.iter_mut().zip(&flow.units) {
                *acc += scalar(u, &format!("{}.unit_value", flow.location))? * a;
            }
        }
        let spa = scalar(&sp.amount, &format!("subprocess[{}].amount", sp.name))?;
        for (m, u) in main.iter_mut().zip(&unit) {
            *m += u * spa;
        }
        subprocesses.push((sp.name, spa, unit));
    }

    let one = Shape::new(1, 1);
    let cell = |v: f64| Grid::filled(one, v);
    let split = |values: &[f64]| -> (IndexMap<String, Grid>, Grid) {
        let impacts = resolved
            .categories
            .iter()
            .zip(values)
            .map(|(c, v)| (c.clone(), cell(*v)))
            .collect();
        (impacts, cell(values[k - 1]))
    };
    let (impacts, cost) = split(&main);
    Ok(UnitResult {
        shape: one,
        impacts,
        cost,
        subprocesses: subprocesses
            .into_iter()
            .map(|(name, amount, unit)| {
                let (impacts, cost) = split(&unit);
                SubProcessResult {
                    name: name.to_owned(),
                    amount: cell(amount),
                    impacts,
                    cost,
                }
            })
            .collect(),
    })
}

/// Full scenario by time calculation. Distribution amounts enter at their mean; use
/// [`run_matrix_sampled`] or [`run_monte_carlo`] for stochastic evaluation.
pub fn run_matrix(model: &ProcessModel, db: &UnitValueTable) -> Result<UnitResult, EngineError> {
    ensure_valid(model, db)?;
    let resolved = resolve(model, db, Sampling::Nominal, model.grid.n_scenarios)?;
    Ok(evaluate(&resolved))
}

/// Like [`run_matrix`], but every distribution draws one value per scenario under `seed`.
pub fn run_matrix_sampled(
    model: &ProcessModel,
    db: &UnitValueTable,
    seed: u64,
) -> Result<UnitResult, EngineError> {
    ensure_valid(model, db)?;
    let resolved = resolve(model, db, Sampling::Seeded(seed), model.grid.n_scenarios)?;
    Ok(evaluate(&resolved))
}

/// Output rows of one scenario: main series, sub-process unit series, sub-process amounts.
struct RowSink<'g> {
    main: Vec<&'g mut [f64]>,
    sp_units: Vec<&'g mut [f64]>,
    sp_amounts: Vec<&'g mut [f64]>,
}

fn evaluate(resolved: &Resolved<'_>) -> UnitResult {
    let shape = resolved.shape;
    let k = resolved.n_series();
    let n_sp = resolved.subprocesses.len();

    let mut main: Vec<Grid> = (0..k).map(|_| Grid::zeros(shape)).collect();
    let mut sp_units: Vec<Grid> = (0..n_sp * k).map(|_| Grid::zeros(shape)).collect();
    let mut sp_amounts: Vec<Grid> = (0..n_sp).map(|_| Grid::zeros(shape)).collect();

    {
        let mut sinks: Vec<RowSink<'_>> = (0..shape.rows)
            .map(|_| RowSink {
                main: Vec::with_capacity(k),
                sp_units: Vec::with_capacity(n_sp * k),
                sp_amounts: Vec::with_capacity(n_sp),
            })
            .collect();
        for g in &mut main {
            for (sink, row) in sinks.iter_mut().zip(g.rows_mut()) {
                sink.main.push(row);
            }
        }
        for g in &mut sp_units {
            for (sink, row) in sinks.iter_mut().zip(g.rows_mut()) {
                sink.sp_units.push(row);
            }
        }
        for g in &mut sp_amounts {
            for (sink, row) in sinks.iter_mut().zip(g.rows_mut()) {
                sink.sp_amounts.push(row);
            }
        }
        sinks
            .into_par_iter()
            .enumerate()
            .for_each(|(s, sink)| evaluate_row(resolved, s, sink));
    }

    let categories = resolved.categories;
    let mut sp_units = sp_units.into_iter();
    let subprocesses = resolved
        .subprocesses
        .iter()
        .zip(sp_amounts)
        .map(|(sp, amount)| {
            let impacts = categories
                .iter()
                .map(|c| (c.clone(), sp_units.next().expect("sub-process grid")))
                .collect();
            SubProcessResult {
                name: sp.name.to_owned(),
                amount,
                impacts,
                cost: sp_units.next().expect("sub-process cost grid"),
            }
        })
        .collect();
    let cost = main.pop().expect("cost grid");
    UnitResult {
        shape,
        impacts: categories.iter().cloned().zip(main).collect(),
        cost,
        subprocesses,
    }
}

fn evaluate_row(resolved: &Resolved<'_>, s: usize, mut sink: RowSink<'_>) {
    let k = resolved.n_series();
    for (j, sp) in resolved.subprocesses.iter().enumerate() {
        let units = &mut sink.sp_units[j * k..(j + 1) * k];
        for flow in &sp.flows {
            let a = flow.amount.row(s);
            for (acc, u) in units.iter_mut().zip(&flow.units) {
                accumulate(acc, u.row(s), a);
            }
        }
        sp.amount.write_row(s, sink.sp_amounts[j]);
        let spa = sp.amount.row(s);
        for (m, u) in sink.main.iter_mut().zip(units.iter()) {
            accumulate(m, Row::Slice(u), spa);
        }
    }
}

/// Monte Carlo over `n_runs` runs, one scenario row per run.
///
/// Matrix amounts must have a single row (shared by all runs) or exactly `n_runs` rows.
pub fn run_monte_carlo(
    model: &ProcessModel,
    db: &UnitValueTable,
    n_runs: usize,
    seed: u64,
) -> Result<MonteCarloResult, EngineError> {
    if n_runs == 0 {
        return Err(EngineError::InvalidRuns);
    }
    ensure_valid(model, db)?;
    let degenerate = !model.has_distributions();
    if degenerate {
        log::warn!(
            "model `{}` has no distributions; Monte Carlo is degenerate",
            model.name
        );
    }
    let resolved = resolve(model, db, Sampling::Seeded(seed), n_runs)?;
    let samples = evaluate(&resolved);
    let stats = samples
        .series()
        .map(|(key, grid)| (key.to_owned(), column_stats(grid)))
        .collect();
    Ok(MonteCarloResult {
        n_runs,
        seed,
        degenerate,
        samples,
        stats,
    })
}

/// Summaries across rows, one per column.
pub fn column_stats(grid: &Grid) -> SeriesStats {
    let mut column = vec![0.0; grid.rows()];
    let per_step = (0..grid.cols())
        .map(|t| {
            for (s, v) in column.iter_mut().enumerate() {
                *v = grid.get(s, t);
            }
            Summary::of(&column)
        })
        .collect();
    SeriesStats { per_step }
}

/// Per-substance emissions of the main process: sub-process amount times flow amount times
/// per-unit emission, summed over all flows.
pub fn compute_inventory(model: &ProcessModel, db: &UnitValueTable) -> Result<InventoryResult, EngineError> {
    compute_inventory_with(model, db, Sampling::Nominal)
}

pub fn compute_inventory_with(
    model: &ProcessModel,
    db: &UnitValueTable,
    sampling: Sampling,
) -> Result<InventoryResult, EngineError> {
    ensure_valid(model, db)?;
    let shape = model.grid.shape();
    let mut substances: IndexMap<String, Grid> = IndexMap::new();
    for sp in &model.subprocesses {
        let sp_loc = format!("subprocess[{}]", sp.name);
        let spa = resolve_amount(
            &sp.amount,
            shape,
            sampling,
            |seed| SamplerStream::for_subprocess(seed, &sp.name),
            &sp_loc,
        )?;
        for flow in &sp.flows {
            let location = format!("{sp_loc}.flow[{}]", flow.name);
            let fa = resolve_amount(
                &flow.amount,
                shape,
                sampling,
                |seed| SamplerStream::for_flow(seed, &sp.name, &flow.name),
                &location,
            )?;
            let row = background_row(&flow.source, db, &location)?;
            let entries = row
                .into_iter()
                .flat_map(|r| r.inventory.iter().map(|(k, v)| (k.as_str(), *v)))
                .chain(flow.substance.as_deref().map(|s| (s, 1.0)));
            for (substance, per_unit) in entries {
                let grid = substances
                    .entry(substance.to_owned())
                    .or_insert_with(|| Grid::zeros(shape));
                for s in 0..shape.rows {
                    let out = grid.row_mut(s);
                    for (t, x) in out.iter_mut().enumerate() {
                        *x += cell(&spa, s, t) * cell(&fa, s, t) * per_unit;
                    }
                }
            }
        }
    }
    Ok(InventoryResult { shape, substances })
}

fn cell(f: &Field<'_>, s: usize, t: usize) -> f64 {
    match f.row(s) {
        Row::Const(v) => v,
        Row::Slice(v) => v[t],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ScenarioGrid;
    use crate::io::UnitValueRow;
    use crate::model::fixtures::{db, two_sp_model};
    use crate::model::{Direction, FlowDefinition, SubProcessDefinition};
    use crate::sampler::DistributionSpec;

    fn g11(v: f64) -> Grid {
        Grid::filled(Shape::new(1, 1), v)
    }

    #[test]
    fn subprocess_aggregate_examples() {
        let out = subprocess_aggregate(&[g11(2.0), g11(3.0)], &[g11(4.0), g11(5.0)]).unwrap();
        assert_eq!(out.get(0, 0), 23.0);
        let out = subprocess_aggregate(&[g11(7.5)], &[g11(1.0)]).unwrap();
        assert_eq!(out.get(0, 0), 7.5);
        let ones = Grid::filled(Shape::new(2, 2), 1.0);
        let out = subprocess_aggregate(
            &[ones.clone(), ones.clone(), ones.clone()],
            &[ones.clone(), ones.clone(), ones],
        )
        .unwrap();
        assert_eq!(out, Grid::filled(Shape::new(2, 2), 3.0));
    }

    #[test]
    fn main_aggregate_examples() {
        let g = Grid::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let ones = Grid::filled(g.shape(), 1.0);
        assert_eq!(main_aggregate(std::slice::from_ref(&g), &[ones]).unwrap(), g);
        let out = main_aggregate(&[g11(10.0), g11(20.0)], &[g11(1.0), g11(0.5)]).unwrap();
        assert_eq!(out.get(0, 0), 20.0);
        assert_eq!(main_aggregate(&[], &[]), Err(AggregateError::Empty));
        assert!(matches!(
            main_aggregate(&[g], &[g11(1.0)]),
            Err(AggregateError::Shape(_))
        ));
    }

    fn single_flow_model(amount: ExchangeAmount, unit: f64) -> (ProcessModel, UnitValueTable) {
        let model = ProcessModel::new(
            "one",
            ScenarioGrid::new(1, 1),
            &["GWP100"],
            vec![SubProcessDefinition::new(
                "sp",
                1.0,
                vec![FlowDefinition::background("f", Direction::Inflow, amount, "x")],
            )],
        );
        let db = UnitValueTable::new().with(
            "x",
            UnitValueRow::default().with_cost(0.0).with_impact("GWP100", unit),
        );
        (model, db)
    }

    #[test]
    fn static_pass_through() {
        let (m, db) = single_flow_model(ExchangeAmount::Scalar(1.0), 7.0);
        let r = run_static(&m, &db).unwrap();
        assert_eq!(r.impacts["GWP100"].get(0, 0), 7.0);
    }

    #[test]
    fn static_zero_amounts() {
        let mut m = two_sp_model(ScenarioGrid::new(1, 1));
        for sp in &mut m.subprocesses {
            for f in &mut sp.flows {
                f.amount = ExchangeAmount::Scalar(0.0);
            }
        }
        let r = run_static(&m, &db()).unwrap();
        assert!(r.series().all(|(_, g)| g.get(0, 0) == 0.0));
    }

    #[test]
    fn static_rejects_time_varying_inputs() {
        let mut m = two_sp_model(ScenarioGrid::new(1, 3));
        m.subprocesses[0].amount = ExchangeAmount::Matrix(Grid::from_rows(&[[1.0, 2.0, 3.0]]).unwrap());
        assert!(matches!(run_static(&m, &db()), Err(EngineError::NotStatic(_))));
    }

    #[test]
    fn invalid_model_rejected() {
        let mut m = two_sp_model(ScenarioGrid::new(1, 1));
        m.subprocesses.clear();
        assert!(matches!(run_matrix(&m, &db()), Err(EngineError::Invalid(_))));
    }

    #[test]
    fn matrix_breakdown_sums_to_main() {
        let m = two_sp_model(ScenarioGrid::new(3, 4));
        let r = run_matrix(&m, &db()).unwrap();
        for (key, total) in r.series() {
            let contributions: Vec<Grid> = r
                .subprocesses
                .iter()
                .map(|sp| sp.contribution(key).unwrap())
                .collect();
            let mut sum = Grid::zeros(total.shape());
            for c in &contributions {
                sum.add_assign(c).unwrap();
            }
            assert_eq!(&sum, total, "{key}");
        }
    }

    #[test]
    fn per_period_override_used() {
        let mut m = two_sp_model(ScenarioGrid::new(1, 3));
        m.subprocesses.truncate(1);
        m.subprocesses[0].flows.truncate(1);
        let mut db = db();
        let mut gas = db.get("natural gas").unwrap().clone();
        gas.overrides.insert("GWP100".into(), vec![1.0, 2.0, 3.0]);
        db = UnitValueTable::new().with("natural gas", gas);
        let r = run_matrix(&m, &db).unwrap();
        assert_eq!(r.impacts["GWP100"].row(0), &[0.11, 0.22, 0.33]);
    }

    #[test]
    fn scenario_two_doubles() {
        let mut m = two_sp_model(ScenarioGrid::new(2, 2));
        for sp in &mut m.subprocesses {
            for f in &mut sp.flows {
                let v = match f.amount {
                    ExchangeAmount::Scalar(v) => v,
                    _ => unreachable!(),
                };
                f.amount = ExchangeAmount::Matrix(Grid::from_rows(&[[v, v], [2.0 * v, 2.0 * v]]).unwrap());
            }
        }
        let r = run_matrix(&m, &db()).unwrap();
        for (_, g) in r.series() {
            for t in 0..2 {
                let (a, b) = (g.get(0, t), g.get(1, t));
                assert!((b - 2.0 * a).abs() <= 1e-12 * a.abs().max(1e-300), "{a} {b}");
            }
        }
    }

    #[test]
    fn summary_of_constant_sample() {
        let s = Summary::of(&[0.1; 1000]);
        assert_eq!(s.values(), [0.1, 0.0, 0.1, 0.1, 0.1]);
    }

    #[test]
    fn percentile_interpolates() {
        let sorted = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&sorted, 50.0), 2.5);
        assert_eq!(percentile(&sorted, 0.0), 1.0);
        assert_eq!(percentile(&sorted, 100.0), 4.0);
    }

    #[test]
    fn monte_carlo_degenerate_and_seeded() {
        let (m, db) = single_flow_model(
            ExchangeAmount::Distribution(DistributionSpec::Point { value: 3.0 }),
            2.0,
        );
        let mc = run_monte_carlo(&m, &db, 50, 1).unwrap();
        assert!(!mc.degenerate);
        let st = &mc.stats["GWP100"].per_step[0];
        assert_eq!((st.mean, st.sd), (6.0, 0.0));
        assert_eq!(run_monte_carlo(&m, &db, 0, 1), Err(EngineError::InvalidRuns));
    }

    #[test]
    fn monte_carlo_uniform_mean() {
        let (m, db) = single_flow_model(
            ExchangeAmount::Distribution(DistributionSpec::Uniform { low: 0.0, high: 2.0 }),
            1.0,
        );
        let a = run_monte_carlo(&m, &db, 10_000, 11).unwrap();
        assert!((a.stats["GWP100"].per_step[0].mean - 1.0).abs() < 0.05);
        let b = run_monte_carlo(&m, &db, 10_000, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn monte_carlo_matrix_rows() {
        let mut m = two_sp_model(ScenarioGrid::new(2, 2));
        m.subprocesses[0].amount = ExchangeAmount::Matrix(Grid::filled(Shape::new(2, 2), 1.0));
        assert!(matches!(
            run_monte_carlo(&m, &db(), 5, 0),
            Err(EngineError::MatrixRows { .. })
        ));
        assert!(run_monte_carlo(&m, &db(), 2, 0).is_ok());
    }

    #[test]
    fn inventory_examples() {
        let (mut m, mut db) = single_flow_model(ExchangeAmount::Scalar(3.0), 1.0);
        db = UnitValueTable::new().with("x", db.get("x").unwrap().clone().with_inventory("CO2", 2.0));
        let inv = compute_inventory(&m, &db).unwrap();
        assert_eq!(inv.substances["CO2"].get(0, 0), 6.0);

        // a second flow emitting the same substance adds
        m.subprocesses[0]
            .flows
            .push(FlowDefinition::background("g", Direction::Inflow, 1.0, "x"));
        let inv = compute_inventory(&m, &db).unwrap();
        assert_eq!(inv.substances["CO2"].get(0, 0), 8.0);
    }

    #[test]
    fn inventory_skips_empty_flows() {
        let (m, db) = single_flow_model(ExchangeAmount::Scalar(3.0), 1.0);
        assert!(compute_inventory(&m, &db).unwrap().substances.is_empty());
    }

    #[test]
    fn inventory_includes_substance_tags() {
        let m = two_sp_model(ScenarioGrid::new(1, 1));
        let inv = compute_inventory(&m, &db()).unwrap();
        assert_eq!(inv.substances.keys().collect::<Vec<_>>(), ["CH4", "CO2", "SO2"]);
        assert_eq!(inv.substances["SO2"].get(0, 0), 0.0002);
    }
}
