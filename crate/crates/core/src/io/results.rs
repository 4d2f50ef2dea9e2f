//! Result sets and their CSV/JSON serialization.
//!
//! CSV results are long format. The first two lines are comments: a format tag, then
//! `# meta: <json>` with the run metadata and the layout needed to rebuild the payload.
//! The remaining lines have the header `section,scenario,timestep,category,value`:
//!
//! | section               | content                                             |
//! |-----------------------|-----------------------------------------------------|
//! | `total`               | main-process unit value per category and `cost`     |
//! | `subprocess:<name>`   | sub-process unit value                              |
//! | `amount:<name>`       | sub-process amount (category empty)                 |
//! | `stat:<label>`        | Monte Carlo summary over runs (scenario empty)      |
//! | `dynamic`             | dynamic impact per output period                    |
//! | `cumulative`          | running sum of `dynamic`                            |
//! | `substance:<name>`    | dynamic contribution of one substance               |
//! | `econ`                | `npv`, `msp`, `lcoe` per scenario (timestep empty)  |
//!
//! Values are written with 17 significant digits, so import reproduces them bit for bit.

use super::number::{format_number, parse_number};
use super::{LoadError, SourcePos};
use crate::cli::RunConfig;
use crate::dynamic::{CharacterizationMethod, Contribution, DynamicImpactResult};
use crate::econ::Indicators;
use crate::engine::{MonteCarloResult, SeriesStats, SubProcessResult, Summary, UnitResult};
use crate::grid::{Grid, ScenarioGrid, Shape};
use crate::model::COST_KEY;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

pub const CSV_HEADER: &str = "section,scenario,timestep,category,value";
const CSV_TAG: &str = "# lcengine results v1";
const META_PREFIX: &str = "# meta: ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// `json` for a `.json` extension, `csv` otherwise.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub mode: crate::cli::Mode,
    pub model_name: String,
    pub grid: ScenarioGrid,
    pub seed: Option<u64>,
    pub config: Option<RunConfig>,
    /// SHA-256 over the model, background database and characterization tables.
    pub input_hash: Option<String>,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Unit {
        result: UnitResult,
    },
    MonteCarlo {
        result: MonteCarloResult,
    },
    Dynamic {
        unit: UnitResult,
        dynamic: DynamicImpactResult,
    },
}

impl Payload {
    /// The unit-value part of the payload (Monte Carlo samples for Monte Carlo runs).
    pub fn unit(&self) -> &UnitResult {
        match self {
            Payload::Unit { result } => result,
            Payload::MonteCarlo { result } => &result.samples,
            Payload::Dynamic { unit, .. } => unit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub metadata: RunMetadata,
    pub payload: Payload,
    /// Discounted indicators per scenario, when production data was available.
    pub economics: Option<Vec<Indicators>>,
}

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("serialization failed: {0}")]
    Serialize(String),
}

/// Every grid of the result set with its CSV section and category key.
struct Section<'a> {
    section: String,
    category: &'a str,
    kind: SectionKind<'a>,
}

enum SectionKind<'a> {
    Grid(&'a Grid),
    /// Monte Carlo summary for one key: one value per time step.
    Stat(usize, &'a SeriesStats),
    Econ(Vec<f64>),
}

fn unit_sections<'a>(unit: &'a UnitResult, out: &mut Vec<Section<'a>>) {
    for (key, grid) in unit.series() {
        out.push(Section {
            section: "total".into(),
            category: key,
            kind: SectionKind::Grid(grid),
        });
    }
    for sp in &unit.subprocesses {
        let section = format!("subprocess:{}", sp.name);
        for (key, grid) in sp
            .impacts
            .iter()
            .map(|(k, g)| (k.as_str(), g))
            .chain([(COST_KEY, &sp.cost)])
        {
            out.push(Section {
                section: section.clone(),
                category: key,
                kind: SectionKind::Grid(grid),
            });
        }
        out.push(Section {
            section: format!("amount:{}", sp.name),
            category: "",
            kind: SectionKind::Grid(&sp.amount),
        });
    }
}

impl ResultSet {
    fn sections(&self) -> Vec<Section<'_>> {
        let mut out = Vec::new();
        match &self.payload {
            Payload::Unit { result } => unit_sections(result, &mut out),
            Payload::MonteCarlo { result } => {
                unit_sections(&result.samples, &mut out);
                for (key, stats) in &result.stats {
                    for (i, label) in Summary::LABELS.iter().enumerate() {
                        out.push(Section {
                            section: format!("stat:{label}"),
                            category: key,
                            kind: SectionKind::Stat(i, stats),
                        });
                    }
                }
            }
            Payload::Dynamic { unit, dynamic } => {
                unit_sections(unit, &mut out);
                for (key, grid) in &dynamic.impacts {
                    out.push(Section {
                        section: "dynamic".into(),
                        category: key,
                        kind: SectionKind::Grid(grid),
                    });
                }
                for (key, grid) in &dynamic.cumulative {
                    out.push(Section {
                        section: "cumulative".into(),
                        category: key,
                        kind: SectionKind::Grid(grid),
                    });
                }
                for (key, per_substance) in &dynamic.contributions {
                    for (substance, c) in per_substance {
                        out.push(Section {
                            section: format!("substance:{substance}"),
                            category: key,
                            kind: SectionKind::Grid(&c.impact),
                        });
                    }
                }
            }
        }
        if let Some(econ) = &self.economics {
            for (i, key) in ["npv", "msp", "lcoe"].into_iter().enumerate() {
                let values = econ.iter().map(|ind| [ind.npv, ind.msp, ind.lcoe][i]).collect();
                out.push(Section {
                    section: "econ".into(),
                    category: key,
                    kind: SectionKind::Econ(values),
                });
            }
        }
        out
    }

    /// First non-finite value, described by section, category and cell.
    pub fn first_non_finite(&self) -> Option<String> {
        self.sections().into_iter().find_map(|s| {
            let at = |detail: String| format!("{} `{}` {detail}", s.section, s.category);
            match s.kind {
                SectionKind::Grid(g) => g
                    .first_non_finite()
                    .map(|(r, t)| at(format!("at scenario {r}, timestep {t}"))),
                SectionKind::Stat(i, stats) => stats
                    .per_step
                    .iter()
                    .position(|st| !st.values()[i].is_finite())
                    .map(|t| at(format!("at timestep {t}"))),
                SectionKind::Econ(v) => v
                    .iter()
                    .position(|x| !x.is_finite())
                    .map(|r| at(format!("at scenario {r}"))),
            }
        })
    }
}

/// What the CSV importer needs beyond the values themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layout {
    kind: String,
    shape: Shape,
    categories: Vec<String>,
    subprocesses: Vec<String>,
    monte_carlo: Option<McLayout>,
    dynamic: Option<DynLayout>,
    economics_rows: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct McLayout {
    n_runs: usize,
    seed: u64,
    degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DynLayout {
    t_out: usize,
    /// Per category, substances with their characterization method.
    contributions: Vec<(String, Vec<(String, CharacterizationMethod)>)>,
}

#[derive(Serialize, Deserialize)]
struct CsvMeta {
    metadata: RunMetadata,
    layout: Layout,
}

fn layout_of(rs: &ResultSet) -> Layout {
    let unit = rs.payload.unit();
    let (kind, monte_carlo, dynamic) = match &rs.payload {
        Payload::Unit { .. } => ("unit", None, None),
        Payload::MonteCarlo { result } => (
            "monte_carlo",
            Some(McLayout {
                n_runs: result.n_runs,
                seed: result.seed,
                degenerate: result.degenerate,
            }),
            None,
        ),
        Payload::Dynamic { dynamic, .. } => (
            "dynamic",
            None,
            Some(DynLayout {
                t_out: dynamic.t_out,
                contributions: dynamic
                    .contributions
                    .iter()
                    .map(|(c, m)| (c.clone(), m.iter().map(|(s, x)| (s.clone(), x.method)).collect()))
                    .collect(),
            }),
        ),
    };
    Layout {
        kind: kind.to_owned(),
        shape: unit.shape,
        categories: unit.categories().map(str::to_owned).collect(),
        subprocesses: unit.subprocesses.iter().map(|sp| sp.name.clone()).collect(),
        monte_carlo,
        dynamic,
        economics_rows: rs.economics.as_ref().map(Vec::len),
    }
}

/// Serializes a result set to a string.
pub fn write_results(rs: &ResultSet, format: Format) -> Result<String, ExportError> {
    if let Some(loc) = rs.first_non_finite() {
        return Err(ExportError::NonFinite(loc));
    }
    match format {
        Format::Json => serde_json::to_string_pretty(rs)
            .map(|s| s + "\n")
            .map_err(|e| ExportError::Serialize(e.to_string())),
        Format::Csv => write_csv(rs),
    }
}

pub fn export_results(rs: &ResultSet, format: Format, path: impl AsRef<Path>) -> Result<(), ExportError> {
    let path = path.as_ref();
    let text = write_results(rs, format)?;
    std::fs::write(path, text).map_err(|source| ExportError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_csv(rs: &ResultSet) -> Result<String, ExportError> {
    let meta = CsvMeta {
        metadata: rs.metadata.clone(),
        layout: layout_of(rs),
    };
    let meta = serde_json::to_string(&meta).map_err(|e| ExportError::Serialize(e.to_string()))?;
    let mut out = format!("{CSV_TAG}\n{META_PREFIX}{meta}\n");
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| ExportError::Serialize(e.to_string());
    w.write_record(CSV_HEADER.split(',')).map_err(csv_err)?;
    for s in rs.sections() {
        match s.kind {
            SectionKind::Grid(g) => {
                for (r, row) in g.rows_iter().enumerate() {
                    for (t, v) in row.iter().enumerate() {
                        w.write_record([
                            s.section.as_str(),
                            &r.to_string(),
                            &t.to_string(),
                            s.category,
                            &format_number(*v),
                        ])
                        .map_err(csv_err)?;
                    }
                }
            }
            SectionKind::Stat(i, stats) => {
                for (t, st) in stats.per_step.iter().enumerate() {
                    w.write_record([
                        s.section.as_str(),
                        "",
                        &t.to_string(),
                        s.category,
                        &format_number(st.values()[i]),
                    ])
                    .map_err(csv_err)?;
                }
            }
            SectionKind::Econ(values) => {
                for (r, v) in values.iter().enumerate() {
                    w.write_record([
                        s.section.as_str(),
                        &r.to_string(),
                        "",
                        s.category,
                        &format_number(*v),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
    }
    let body = w
        .into_inner()
        .map_err(|e| ExportError::Serialize(e.to_string()))?;
    out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    Ok(out)
}

/// Reads a result set, detecting JSON by a leading `{`.
pub fn read_results(text: &str) -> Result<ResultSet, LoadError> {
    if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| {
            LoadError::parse(
                SourcePos {
                    line: e.line(),
                    column: Some(e.column()),
                },
                e.to_string(),
            )
        })
    } else {
        read_csv(text)
    }
}

pub fn import_results(path: impl AsRef<Path>) -> Result<ResultSet, LoadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::io(path, e))?;
    read_results(&text).map_err(|e| e.at(path))
}

/// Grids being filled during CSV import, keyed by section and category.
struct Slots {
    grids: HashMap<(String, String), Grid>,
}

impl Slots {
    fn take(&mut self, section: &str, category: &str) -> Result<Grid, LoadError> {
        let grid = self
            .grids
            .remove(&(section.to_owned(), category.to_owned()))
            .expect("slot registered from layout");
        if let Some((s, t)) = grid.first_non_finite() {
            return Err(LoadError::schema(
                None,
                format!("missing value for {section} `{category}` at scenario {s}, timestep {t}"),
            ));
        }
        Ok(grid)
    }
}

fn read_csv(text: &str) -> Result<ResultSet, LoadError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim_end) != Some(CSV_TAG) {
        return Err(LoadError::parse(
            SourcePos::start(),
            format!("expected `{CSV_TAG}`"),
        ));
    }
    let meta_line = lines.next().unwrap_or_default();
    let meta = meta_line
        .strip_prefix(META_PREFIX)
        .ok_or_else(|| LoadError::parse(SourcePos::line(2), "expected `# meta:` line"))?;
    let CsvMeta { metadata, layout } = serde_json::from_str(meta)
        .map_err(|e| LoadError::parse(SourcePos::line(2), format!("metadata: {e}")))?;

    let shape = layout.shape;
    let mut slots = Slots {
        grids: HashMap::new(),
    };
    let mut add = |section: String, category: &str, shape: Shape| {
        slots
            .grids
            .insert((section, category.to_owned()), Grid::filled(shape, f64::NAN));
    };
    let mut keys: Vec<&str> = layout.categories.iter().map(String::as_str).collect();
    keys.push(COST_KEY);
    for k in &keys {
        add("total".into(), k, shape);
        for sp in &layout.subprocesses {
            add(format!("subprocess:{sp}"), k, shape);
        }
        if layout.monte_carlo.is_some() {
            for label in Summary::LABELS {
                add(format!("stat:{label}"), k, Shape::new(1, shape.cols));
            }
        }
    }
    for sp in &layout.subprocesses {
        add(format!("amount:{sp}"), "", shape);
    }
    if let Some(d) = &layout.dynamic {
        let out = Shape::new(shape.rows, d.t_out);
        for c in &layout.categories {
            add("dynamic".into(), c, out);
            add("cumulative".into(), c, out);
        }
        for (c, subs) in &d.contributions {
            for (s, _) in subs {
                add(format!("substance:{s}"), c, out);
            }
        }
    }
    if let Some(rows) = layout.economics_rows {
        for k in ["npv", "msp", "lcoe"] {
            add("econ".into(), k, Shape::new(rows, 1));
        }
    }

    let body_start = text.match_indices('\n').nth(1).map_or(text.len(), |(i, _)| i + 1);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(&text.as_bytes()[body_start..]);
    let header = reader.headers().map_err(|e| LoadError::from_csv(&e))?;
    if header.iter().ne(CSV_HEADER.split(',')) {
        return Err(LoadError::schema(
            Some(SourcePos::line(3)),
            format!("header must be `{CSV_HEADER}`"),
        ));
    }
    for record in reader.records() {
        let record = record.map_err(|e| LoadError::from_csv(&e))?;
        // two comment lines precede the csv body
        let line = record.position().map_or(0, |p| p.line() as usize + 2);
        let pos = Some(SourcePos::line(line));
        let (section, category) = (&record[0], &record[3]);
        let grid = slots
            .grids
            .get_mut(&(section.to_owned(), category.to_owned()))
            .ok_or_else(|| {
                LoadError::schema(
                    pos,
                    format!("unexpected section `{section}` / category `{category}`"),
                )
            })?;
        let index = |field: &str, what: &str| -> Result<usize, LoadError> {
            field
                .parse()
                .map_err(|_| LoadError::schema(pos, format!("bad {what} `{field}`")))
        };
        let (r, t) = if section.starts_with("stat:") {
            (0, index(&record[2], "timestep")?)
        } else if section == "econ" {
            (index(&record[1], "scenario")?, 0)
        } else {
            (index(&record[1], "scenario")?, index(&record[2], "timestep")?)
        };
        if r >= grid.rows() || t >= grid.cols() {
            return Err(LoadError::schema(
                pos,
                format!("cell ({r}, {t}) outside {}", grid.shape()),
            ));
        }
        if !grid.get(r, t).is_nan() {
            return Err(LoadError::schema(
                pos,
                format!("duplicate value for {section} `{category}` ({r}, {t})"),
            ));
        }
        let v = parse_number(&record[4]).map_err(|m| LoadError::schema(pos, m))?;
        grid.set(r, t, v);
    }

    let take_unit = |slots: &mut Slots| -> Result<UnitResult, LoadError> {
        let mut impacts = IndexMap::new();
        for c in &layout.categories {
            impacts.insert(c.clone(), slots.take("total", c)?);
        }
        let cost = slots.take("total", COST_KEY)?;
        let mut subprocesses = Vec::new();
        for name in &layout.subprocesses {
            let section = format!("subprocess:{name}");
            let mut sp_impacts = IndexMap::new();
            for c in &layout.categories {
                sp_impacts.insert(c.clone(), slots.take(&section, c)?);
            }
            subprocesses.push(SubProcessResult {
                name: name.clone(),
                cost: slots.take(&section, COST_KEY)?,
                impacts: sp_impacts,
                amount: slots.take(&format!("amount:{name}"), "")?,
            });
        }
        Ok(UnitResult {
            shape,
            impacts,
            cost,
            subprocesses,
        })
    };
    let unit = take_unit(&mut slots)?;

    let payload = match layout.kind.as_str() {
        "unit" => Payload::Unit { result: unit },
        "monte_carlo" => {
            let mc = layout
                .monte_carlo
                .as_ref()
                .ok_or_else(|| LoadError::schema(None, "monte carlo layout missing"))?;
            let mut stats = IndexMap::new();
            for k in &keys {
                let columns = Summary::LABELS
                    .iter()
                    .map(|label| slots.take(&format!("stat:{label}"), k))
                    .collect::<Result<Vec<_>, _>>()?;
                let per_step = (0..shape.cols)
                    .map(|t| Summary {
                        mean: columns[0].get(0, t),
                        sd: columns[1].get(0, t),
                        p2_5: columns[2].get(0, t),
                        p50: columns[3].get(0, t),
                        p97_5: columns[4].get(0, t),
                    })
                    .collect();
                stats.insert((*k).to_owned(), SeriesStats { per_step });
            }
            Payload::MonteCarlo {
                result: MonteCarloResult {
                    n_runs: mc.n_runs,
                    seed: mc.seed,
                    degenerate: mc.degenerate,
                    samples: unit,
                    stats,
                },
            }
        }
        "dynamic" => {
            let d = layout
                .dynamic
                .as_ref()
                .ok_or_else(|| LoadError::schema(None, "dynamic layout missing"))?;
            let mut impacts = IndexMap::new();
            let mut cumulative = IndexMap::new();
            for c in &layout.categories {
                impacts.insert(c.clone(), slots.take("dynamic", c)?);
                cumulative.insert(c.clone(), slots.take("cumulative", c)?);
            }
            let mut contributions = IndexMap::new();
            for (c, subs) in &d.contributions {
                let mut per = IndexMap::new();
                for (s, method) in subs {
                    per.insert(
                        s.clone(),
                        Contribution {
                            method: *method,
                            impact: slots.take(&format!("substance:{s}"), c)?,
                        },
                    );
                }
                contributions.insert(c.clone(), per);
            }
            Payload::Dynamic {
                unit,
                dynamic: DynamicImpactResult {
                    t_out: d.t_out,
                    impacts,
                    cumulative,
                    contributions,
                },
            }
        }
        other => return Err(LoadError::schema(None, format!("unknown payload kind `{other}`"))),
    };

    let economics = match layout.economics_rows {
        None => None,
        Some(_) => {
            let npv = slots.take("econ", "npv")?;
            let msp = slots.take("econ", "msp")?;
            let lcoe = slots.take("econ", "lcoe")?;
            Some(
                (0..npv.rows())
                    .map(|r| Indicators {
                        npv: npv.get(r, 0),
                        msp: msp.get(r, 0),
                        lcoe: lcoe.get(r, 0),
                    })
                    .collect(),
            )
        }
    };
    Ok(ResultSet {
        metadata,
        payload,
        economics,
    })
}
