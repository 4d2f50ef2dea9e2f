//! Characterization-factor tables.
//!
//! CSV with header `substance,category,mode,horizon,tau,factor`. Annual-step tables list one
//! row per age `tau = 0, 1, 2, ...` (any order, no gaps). A fixed-horizon table is a single row
//! with `horizon` set and `tau` empty.

use super::number::parse_number;
use super::{LoadError, SourcePos};
use crate::dynamic::{DcfKind, DcfTable};
use indexmap::IndexMap;
use std::path::Path;

pub const DCF_HEADER: [&str; 6] = ["substance", "category", "mode", "horizon", "tau", "factor"];

pub fn load_dcf_tables(path: impl AsRef<Path>) -> Result<Vec<DcfTable>, LoadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::io(path, e))?;
    parse_dcf_tables(&text).map_err(|e| e.at(path))
}

enum Group {
    Annual(Vec<(u64, f64, usize)>),
    Fixed { factor: f64, horizon: u32 },
}

pub fn parse_dcf_tables(text: &str) -> Result<Vec<DcfTable>, LoadError> {
    if text.trim().is_empty() {
        return Err(LoadError::parse(
            SourcePos::start(),
            "empty characterization table",
        ));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| LoadError::from_csv(&e))?;
    if header.iter().ne(DCF_HEADER) {
        return Err(LoadError::schema(
            Some(SourcePos::line(1)),
            format!("header must be `{}`", DCF_HEADER.join(",")),
        ));
    }

    let mut groups: IndexMap<(String, String), Group> = IndexMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| LoadError::from_csv(&e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let pos = Some(SourcePos::line(line));
        let field = |i: usize| record.get(i).unwrap_or_default();
        let (substance, category, mode) = (field(0), field(1), field(2));
        if substance.is_empty() || category.is_empty() {
            return Err(LoadError::schema(pos, "substance and category are required"));
        }
        let factor = parse_number(field(5))
            .map_err(|m| LoadError::schema(pos, format!("`{substance}` factor: {m}")))?;
        let key = (substance.to_owned(), category.to_owned());
        match mode {
            "annual_step" => {
                let tau: u64 = field(4).parse().map_err(|_| {
                    LoadError::schema(pos, format!("`{substance}`: tau must be a non-negative integer"))
                })?;
                match groups.entry(key).or_insert_with(|| Group::Annual(Vec::new())) {
                    Group::Annual(rows) => rows.push((tau, factor, line)),
                    Group::Fixed { .. } => {
                        return Err(LoadError::schema(
                            pos,
                            format!("`{substance}` in `{category}` mixes annual_step and fixed_horizon rows"),
                        ))
                    }
                }
            }
            "fixed_horizon" => {
                if !field(4).is_empty() {
                    return Err(LoadError::schema(
                        pos,
                        format!("`{substance}`: fixed_horizon rows leave tau empty"),
                    ));
                }
                let horizon: u32 = field(3).parse().ok().filter(|h| *h >= 1).ok_or_else(|| {
                    LoadError::schema(pos, format!("`{substance}`: horizon must be an integer >= 1"))
                })?;
                if groups.contains_key(&key) {
                    return Err(LoadError::schema(
                        pos,
                        format!("`{substance}` in `{category}` has more than one table"),
                    ));
                }
                groups.insert(key, Group::Fixed { factor, horizon });
            }
            other => {
                return Err(LoadError::schema(
                    pos,
                    format!("`{substance}`: unknown mode `{other}`, expected annual_step or fixed_horizon"),
                ))
            }
        }
    }

    let mut tables = Vec::with_capacity(groups.len());
    for ((substance, category), group) in groups {
        let kind = match group {
            Group::Fixed { factor, horizon } => DcfKind::FixedHorizon { factor, horizon },
            Group::Annual(mut rows) => {
                rows.sort_by_key(|r| r.0);
                for (expected, (tau, _, line)) in rows.iter().enumerate() {
                    let expected = expected as u64;
                    if *tau != expected {
                        let msg = if *tau < expected {
                            format!("`{substance}` in `{category}`: tau {tau} given twice")
                        } else {
                            format!("`{substance}` in `{category}`: missing tau {expected}")
                        };
                        return Err(LoadError::schema(Some(SourcePos::line(*line)), msg));
                    }
                }
                DcfKind::AnnualStep {
                    factors: rows.into_iter().map(|r| r.1).collect(),
                }
            }
        };
        tables.push(DcfTable {
            substance,
            category,
            kind,
        });
    }
    Ok(tables)
}
