//! Time-resolved impact characterization.
//!
//! An emission pulse released in period `t` and characterized by an annual-step table
//! contributes `em[t] * factors[T - t]` to the impact in period `T`, so each scenario row
//! is a discrete convolution of the emission series with the factor sequence. Factors past
//! the end of a table are zero. Fixed-horizon factors and plain static factors attribute the
//! whole impact to the period of emission.

use crate::engine::{compute_inventory, EngineError};
use crate::grid::{Grid, Shape};
use crate::io::UnitValueTable;
use crate::model::ProcessModel;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicError {
    #[error("emission series is for `{emission}` but the table is for `{table}`")]
    SubstanceMismatch { emission: String, table: String },
    #[error("table for `{0}` has no factors")]
    EmptyFactors(String),
    #[error("table for `{substance}` is {found}, expected {expected}")]
    ModeMismatch {
        substance: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("no dynamic table and no static factor for substance `{substance}` in category `{category}`")]
    Uncharacterized { substance: String, category: String },
    #[error("more than one {mode} table for `{substance}` in category `{category}`")]
    DuplicateTable {
        substance: String,
        category: String,
        mode: &'static str,
    },
    #[error("annual-step factors need a yearly grid, but the model steps in `{0}`")]
    StepMismatch(String),
    #[error("table for `{0}`: {1}")]
    InvalidTable(String, String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DcfKind {
    /// `factors[tau]` characterizes an emission aged `tau` periods.
    AnnualStep { factors: Vec<f64> },
    /// One factor integrated over a horizon of `horizon` periods.
    FixedHorizon { factor: f64, horizon: u32 },
}

impl DcfKind {
    pub fn mode_name(&self) -> &'static str {
        match self {
            Self::AnnualStep { .. } => "annual_step",
            Self::FixedHorizon { .. } => "fixed_horizon",
        }
    }
}

/// Characterization factors of one substance for one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcfTable {
    pub substance: String,
    pub category: String,
    #[serde(flatten)]
    pub kind: DcfKind,
}

impl DcfTable {
    pub fn annual(substance: &str, category: &str, factors: Vec<f64>) -> Self {
        Self {
            substance: substance.to_owned(),
            category: category.to_owned(),
            kind: DcfKind::AnnualStep { factors },
        }
    }

    pub fn fixed(substance: &str, category: &str, factor: f64, horizon: u32) -> Self {
        Self {
            substance: substance.to_owned(),
            category: category.to_owned(),
            kind: DcfKind::FixedHorizon { factor, horizon },
        }
    }

    pub fn validate(&self) -> Result<(), DynamicError> {
        let bad = |m: &str| DynamicError::InvalidTable(self.substance.clone(), m.to_owned());
        match &self.kind {
            DcfKind::AnnualStep { factors } => {
                if factors.is_empty() {
                    return Err(DynamicError::EmptyFactors(self.substance.clone()));
                }
                if factors.iter().any(|f| !f.is_finite()) {
                    return Err(bad("non-finite factor"));
                }
            }
            DcfKind::FixedHorizon { factor, horizon } => {
                if *horizon < 1 {
                    return Err(bad("horizon must be >= 1"));
                }
                if !factor.is_finite() {
                    return Err(bad("non-finite factor"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionSeries {
    pub substance: String,
    pub values: Grid,
}

impl EmissionSeries {
    pub fn new(substance: &str, values: Grid) -> Self {
        Self {
            substance: substance.to_owned(),
            values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharacterizationMethod {
    AnnualStep,
    FixedHorizon,
    StaticAtEmission,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub method: CharacterizationMethod,
    /// Padded to the common output horizon.
    pub impact: Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicImpactResult {
    /// Number of output periods: model timesteps plus the longest used table, minus one.
    pub t_out: usize,
    pub impacts: IndexMap<String, Grid>,
    pub cumulative: IndexMap<String, Grid>,
    /// Category, then substance.
    pub contributions: IndexMap<String, IndexMap<String, Contribution>>,
}

fn check_substance(em: &EmissionSeries, dcf: &DcfTable) -> Result<(), DynamicError> {
    if em.substance != dcf.substance {
        return Err(DynamicError::SubstanceMismatch {
            emission: em.substance.clone(),
            table: dcf.substance.clone(),
        });
    }
    Ok(())
}

/// Convolution of each emission row with the table's annual factors.
pub fn characterize_dynamic(em: &EmissionSeries, dcf: &DcfTable) -> Result<Grid, DynamicError> {
    check_substance(em, dcf)?;
    let factors = match &dcf.kind {
        DcfKind::AnnualStep { factors } => factors,
        other => {
            return Err(DynamicError::ModeMismatch {
                substance: dcf.substance.clone(),
                expected: "annual_step",
                found: other.mode_name(),
            })
        }
    };
    if factors.is_empty() {
        return Err(DynamicError::EmptyFactors(dcf.substance.clone()));
    }
    Ok(convolve_rows(&em.values, factors))
}

fn convolve_rows(values: &Grid, kernel: &[f64]) -> Grid {
    let n = values.cols();
    let mut out = Grid::zeros(Shape::new(values.rows(), n + kernel.len() - 1));
    for s in 0..values.rows() {
        let src = values.row(s);
        let dst = out.row_mut(s);
        for (t, e) in src.iter().enumerate() {
            for (tau, f) in kernel.iter().enumerate() {
                dst[t + tau] += e * f;
            }
        }
    }
    out
}

/// Static factor applied in the period of emission.
pub fn characterize_static_at_emission(em: &EmissionSeries, factor: f64) -> Grid {
    em.values.scale(factor)
}

pub fn characterize_fixed_horizon(em: &EmissionSeries, dcf: &DcfTable) -> Result<Grid, DynamicError> {
    check_substance(em, dcf)?;
    match &dcf.kind {
        DcfKind::FixedHorizon { factor, .. } => Ok(characterize_static_at_emission(em, *factor)),
        other => Err(DynamicError::ModeMismatch {
            substance: dcf.substance.clone(),
            expected: "fixed_horizon",
            found: other.mode_name(),
        }),
    }
}

#[derive(Default)]
struct TablesFor<'a> {
    annual: Option<&'a DcfTable>,
    fixed: Option<&'a DcfTable>,
}

/// Dynamic impact assessment of the model's inventory.
///
/// For every category and inventoried substance the characterization is, in order of
/// preference: an annual-step table, a fixed-horizon table, or the static factor found in
/// the background database row named after the substance.
pub fn run_dynamic(
    model: &ProcessModel,
    db: &UnitValueTable,
    dcfs: &[DcfTable],
) -> Result<DynamicImpactResult, DynamicError> {
    let inventory = compute_inventory(model, db)?;
    run_dynamic_on(model, &inventory.substances, db, dcfs)
}

/// Dynamic impact assessment of a precomputed inventory.
pub fn run_dynamic_on(
    model: &ProcessModel,
    inventory: &IndexMap<String, Grid>,
    db: &UnitValueTable,
    dcfs: &[DcfTable],
) -> Result<DynamicImpactResult, DynamicError> {
    let mut index: IndexMap<(&str, &str), TablesFor<'_>> = IndexMap::new();
    for table in dcfs {
        table.validate()?;
        let slot = index
            .entry((table.category.as_str(), table.substance.as_str()))
            .or_default();
        let target = match table.kind {
            DcfKind::AnnualStep { .. } => &mut slot.annual,
            DcfKind::FixedHorizon { .. } => &mut slot.fixed,
        };
        if target.replace(table).is_some() {
            return Err(DynamicError::DuplicateTable {
                substance: table.substance.clone(),
                category: table.category.clone(),
                mode: table.kind.mode_name(),
            });
        }
    }

    let rows = model.grid.n_scenarios;
    let n = model.grid.n_timesteps;
    let mut raw: IndexMap<String, IndexMap<String, Contribution>> = IndexMap::new();
    let mut t_out = n;
    for category in &model.categories {
        let mut per_substance = IndexMap::new();
        for (substance, values) in inventory {
            let em = EmissionSeries::new(substance, values.clone());
            let tables = index.get(&(category.as_str(), substance.as_str()));
            let (method, impact) = if let Some(table) = tables.and_then(|t| t.annual) {
                if !model.grid.is_annual() {
                    return Err(DynamicError::StepMismatch(model.grid.step_label.clone()));
                }
                (
                    CharacterizationMethod::AnnualStep,
                    characterize_dynamic(&em, table)?,
                )
            } else if let Some(table) = tables.and_then(|t| t.fixed) {
                (
                    CharacterizationMethod::FixedHorizon,
                    characterize_fixed_horizon(&em, table)?,
                )
            } else if let Some(factor) = db.get(substance).and_then(|r| r.impacts.get(category)) {
                (
                    CharacterizationMethod::StaticAtEmission,
                    characterize_static_at_emission(&em, *factor),
                )
            } else {
                return Err(DynamicError::Uncharacterized {
                    substance: substance.clone(),
                    category: category.clone(),
                });
            };
            t_out = t_out.max(impact.cols());
            per_substance.insert(substance.clone(), Contribution { method, impact });
        }
        raw.insert(category.clone(), per_substance);
    }

    let mut impacts = IndexMap::new();
    let mut cumulative = IndexMap::new();
    let mut contributions = IndexMap::new();
    for (category, per_substance) in raw {
        let mut total = Grid::zeros(Shape::new(rows, t_out));
        let padded: IndexMap<String, Contribution> = per_substance
            .into_iter()
            .map(|(s, c)| {
                let impact = c.impact.pad_cols(t_out);
                total.add_assign(&impact).expect("padded to common shape");
                (
                    s,
                    Contribution {
                        method: c.method,
                        impact,
                    },
                )
            })
            .collect();
        cumulative.insert(category.clone(), total.cumulative());
        impacts.insert(category.clone(), total);
        contributions.insert(category, padded);
    }
    Ok(DynamicImpactResult {
        t_out,
        impacts,
        cumulative,
        contributions,
    })
}
