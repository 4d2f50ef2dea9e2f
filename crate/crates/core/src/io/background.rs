//! Background database of unit values, keyed by flow name.
//!
//! CSV layout: the header starts with `flow,unit_cost`; every further column is either a
//! category name (unit impact), `inv:<substance>` (per-unit emission), or a free label. A
//! cell may also carry its own key as `key=value`, e.g. `GWP100=0.45`, which takes
//! precedence over the column name. A value holding `;`-separated numbers is a per-period
//! override list for that category.

use super::number::{parse_number, parse_number_list};
use super::{LoadError, SourcePos};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Unit values of one background flow.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UnitValueRow {
    /// Signed cost per unit; revenues are negative.
    pub unit_cost: Option<f64>,
    /// Unit impact per category.
    pub impacts: BTreeMap<String, f64>,
    /// Emission of each substance per unit.
    pub inventory: BTreeMap<String, f64>,
    /// Per-period unit impacts replacing `impacts` for a category.
    pub overrides: BTreeMap<String, Vec<f64>>,
}

impl UnitValueRow {
    pub fn with_cost(mut self, cost: f64) -> Self {
        self.unit_cost = Some(cost);
        self
    }

    pub fn with_impact(mut self, category: &str, value: f64) -> Self {
        self.impacts.insert(category.to_owned(), value);
        self
    }

    pub fn with_inventory(mut self, substance: &str, value: f64) -> Self {
        self.inventory.insert(substance.to_owned(), value);
        self
    }

    pub fn with_override(mut self, category: &str, values: Vec<f64>) -> Self {
        self.overrides.insert(category.to_owned(), values);
        self
    }

    pub fn has_category(&self, category: &str) -> bool {
        self.impacts.contains_key(category) || self.overrides.contains_key(category)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("duplicate background flow `{0}`")]
pub struct DuplicateFlow(pub String);

/// Background database mapping flow names to unit values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UnitValueTable {
    rows: IndexMap<String, UnitValueRow>,
}

impl UnitValueTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, flow: impl Into<String>, row: UnitValueRow) -> Result<(), DuplicateFlow> {
        let flow = flow.into();
        if self.rows.contains_key(&flow) {
            return Err(DuplicateFlow(flow));
        }
        self.rows.insert(flow, row);
        Ok(())
    }

    /// Builder-style insert for fixtures. Panics on duplicates.
    pub fn with(mut self, flow: &str, row: UnitValueRow) -> Self {
        self.insert(flow, row).expect("unique flow key");
        self
    }

    pub fn get(&self, flow: &str) -> Option<&UnitValueRow> {
        self.rows.get(flow)
    }

    pub fn contains(&self, flow: &str) -> bool {
        self.rows.contains_key(flow)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &UnitValueRow)> {
        self.rows.iter().map(|(k, v)| (k.as_str(), v))
    }
}

pub fn load_background_db(path: impl AsRef<Path>) -> Result<UnitValueTable, LoadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::io(path, e))?;
    parse_background_db(&text).map_err(|e| e.at(path))
}

pub fn parse_background_db(text: &str) -> Result<UnitValueTable, LoadError> {
    if text.trim().is_empty() {
        return Err(LoadError::parse(SourcePos::start(), "empty background database"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| LoadError::from_csv(&e))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.len() < 2 || header[0] != "flow" || header[1] != "unit_cost" {
        return Err(LoadError::schema(
            Some(SourcePos::line(1)),
            "background database header must start with `flow,unit_cost`",
        ));
    }

    let mut table = UnitValueTable::new();
    for record in reader.records() {
        let record = record.map_err(|e| LoadError::from_csv(&e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let pos = SourcePos::line(line);
        let flow = record.get(0).unwrap_or_default();
        if flow.is_empty() {
            return Err(LoadError::schema(Some(pos), "empty flow name"));
        }
        let mut row = UnitValueRow::default();
        let cost = record.get(1).unwrap_or_default();
        if !cost.is_empty() {
            row.unit_cost = Some(
                parse_number(cost)
                    .map_err(|m| LoadError::schema(Some(pos), format!("flow `{flow}` unit_cost: {m}")))?,
            );
        }
        for (i, cell) in record.iter().enumerate().skip(2) {
            if cell.is_empty() {
                continue;
            }
            let (key, value) = match cell.split_once('=') {
                Some((k, v)) => (k.trim(), v.trim()),
                None => match header.get(i) {
                    Some(h) if !h.is_empty() => (h.as_str(), cell),
                    _ => {
                        return Err(LoadError::schema(
                            Some(pos),
                            format!(
                                "flow `{flow}`: column {} has no name and cell `{cell}` has no `key=`",
                                i + 1
                            ),
                        ))
                    }
                },
            };
            insert_cell(&mut row, key, value)
                .map_err(|m| LoadError::schema(Some(pos), format!("flow `{flow}` `{key}`: {m}")))?;
        }
        table
            .insert(flow, row)
            .map_err(|e| LoadError::schema(Some(pos), e.to_string()))?;
    }
    Ok(table)
}

fn insert_cell(row: &mut UnitValueRow, key: &str, value: &str) -> Result<(), String> {
    if key.is_empty() {
        return Err("empty key".into());
    }
    if let Some(substance) = key.strip_prefix("inv:") {
        let substance = substance.trim();
        if substance.is_empty() {
            return Err("empty substance name".into());
        }
        let v = parse_number(value)?;
        if row.inventory.insert(substance.to_owned(), v).is_some() {
            return Err("given twice".into());
        }
        return Ok(());
    }
    if key == "unit_cost" {
        return Err("unit_cost belongs in the second column".into());
    }
    let dup = if value.contains(';') {
        row.overrides
            .insert(key.to_owned(), parse_number_list(value)?)
            .is_some()
    } else {
        row.impacts.insert(key.to_owned(), parse_number(value)?).is_some()
    };
    if dup {
        return Err("given twice".into());
    }
    Ok(())
}
