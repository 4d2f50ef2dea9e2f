//! Command-line interface: `validate`, `run` and `report`.
//!
//! Exit codes: 0 success, 1 invalid model or usage error, 2 unreadable or unwritable files,
//! 3 non-finite results. Diagnostics go to stderr, summaries and plot data to stdout.

use crate::dynamic::{run_dynamic_on, DynamicError};
use crate::econ::{discounted_cost_result, EconError, ProductionSeries};
use crate::engine::{compute_inventory, run_matrix, run_monte_carlo, run_static, EngineError, UnitResult};
use crate::grid::Grid;
use crate::io::number::format_number;
use crate::io::{
    export_results, import_results, load_background_db, load_dcf_tables, load_model, ExportError, Format,
    LoadError, Payload, ResultSet, RunMetadata,
};
use crate::model::{validate_model, ProcessModel, COST_KEY};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

const HISTOGRAM_BINS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Static,
    Montecarlo,
    Dynamic,
}

/// Settings of one `run`, embedded in the result metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: PathBuf,
    pub db: PathBuf,
    pub dcf: Option<PathBuf>,
    pub mode: Mode,
    pub n_runs: Option<usize>,
    pub seed: Option<u64>,
    /// Overrides the model's discount rate.
    pub rate: Option<f64>,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub categories: Option<Vec<String>>,
}

impl RunConfig {
    /// Mode-specific requirements.
    pub fn check(&self) -> Result<(), String> {
        match self.mode {
            Mode::Dynamic if self.dcf.is_none() => Err("--mode dynamic requires --dcf".into()),
            Mode::Montecarlo if self.n_runs.is_some_and(|n| n < 2) => {
                Err("--n-runs must be at least 2".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "lcengine",
    version,
    about = "Life cycle assessment and costing on scenario x time grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a model against a background database.
    Validate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        db: PathBuf,
    },
    /// Run a static, Monte Carlo or dynamic analysis.
    Run(RunArgs),
    /// Summarize a result file, optionally as plot-ready CSV.
    Report {
        #[arg(long)]
        result: PathBuf,
        /// Emit tidy CSV (table,key,series,scenario,x,x_end,value) on stdout.
        #[arg(long)]
        plot_data: bool,
    },
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    db: PathBuf,
    /// Characterization-factor table, required for dynamic mode.
    #[arg(long)]
    dcf: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "static")]
    mode: Mode,
    /// Monte Carlo runs (default 1000).
    #[arg(long)]
    n_runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Discount rate per period, overriding the model.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Output format; defaults to the output file extension.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Comma-separated categories to compute.
    #[arg(long, value_delimiter = ',')]
    categories: Option<Vec<String>>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

const DEFAULT_RUNS: usize = 1000;
const DEFAULT_SEED: u64 = 0;

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    match cli.command {
        Command::Validate { model, db } => cmd_validate(&model, &db, out, err),
        Command::Run(args) => {
            let config = RunConfig {
                model: args.model,
                db: args.db,
                dcf: args.dcf,
                mode: args.mode,
                n_runs: args.n_runs,
                seed: args.seed,
                rate: args.rate,
                format: args
                    .format
                    .unwrap_or_else(|| args.output.as_deref().map_or(Format::Csv, Format::from_path)),
                output: args.output,
                categories: args.categories,
            };
            cmd_run(&config, args.threads, out, err)
        }
        Command::Report { result, plot_data } => cmd_report(&result, plot_data, out, err),
    }
}

fn load_code(e: &LoadError) -> i32 {
    if e.is_input_failure() {
        EXIT_IO
    } else {
        EXIT_INVALID
    }
}

pub fn cmd_validate(model: &Path, db: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let model = match load_model(model) {
        Ok(m) => m,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return load_code(&e);
        }
    };
    let db = match load_background_db(db) {
        Ok(db) => db,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_IO;
        }
    };
    let report = validate_model(&model, &db);
    if report.is_empty() {
        let _ = writeln!(out, "OK");
        return EXIT_OK;
    }
    let _ = write!(out, "{report}");
    if report.is_valid() {
        EXIT_OK
    } else {
        EXIT_INVALID
    }
}

/// Failure of a run, with its exit code.
struct Failure(i32, String);

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        Failure(EXIT_INVALID, e.to_string())
    }
}

impl From<DynamicError> for Failure {
    fn from(e: DynamicError) -> Self {
        Failure(EXIT_INVALID, e.to_string())
    }
}

/// Runs `config`, capped at `threads` workers when given.
pub fn cmd_run(config: &RunConfig, threads: Option<usize>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match run_inner(config, threads, out) {
        Ok(()) => EXIT_OK,
        Err(Failure(code, message)) => {
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}

fn input_hash(model: &ProcessModel, files: &[&Path]) -> Result<String, Failure> {
    let mut h = Sha256::new();
    let json = serde_json::to_vec(model).map_err(|e| Failure(EXIT_INVALID, e.to_string()))?;
    h.update((json.len() as u64).to_le_bytes());
    h.update(&json);
    for path in files {
        let bytes = std::fs::read(path).map_err(|e| Failure(EXIT_IO, format!("{}: {e}", path.display())))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

/// Execute a run and return the result set without writing it.
pub fn execute(config: &RunConfig) -> Result<ResultSet, (i32, String)> {
    execute_inner(config).map_err(|Failure(c, m)| (c, m))
}

fn execute_inner(config: &RunConfig) -> Result<ResultSet, Failure> {
    config.check().map_err(|m| Failure(EXIT_INVALID, m))?;
    let mut model = load_model(&config.model).map_err(|e| Failure(load_code(&e), e.to_string()))?;
    let db = load_background_db(&config.db).map_err(|e| Failure(EXIT_IO, e.to_string()))?;
    let dcfs = match &config.dcf {
        Some(p) => load_dcf_tables(p).map_err(|e| Failure(EXIT_IO, e.to_string()))?,
        None => Vec::new(),
    };
    if let Some(cats) = &config.categories {
        if let Some(unknown) = cats.iter().find(|c| !model.categories.contains(c)) {
            return Err(Failure(
                EXIT_INVALID,
                format!("--categories: model has no category `{unknown}`"),
            ));
        }
        model = model.with_categories(cats);
    }
    if let Some(rate) = config.rate {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Failure(
                EXIT_INVALID,
                format!("--rate must be finite and >= 0, got {rate}"),
            ));
        }
        model.discount_rate = rate;
    }
    let report = validate_model(&model, &db);
    if !report.is_valid() {
        return Err(Failure(
            EXIT_INVALID,
            format!("model failed validation:\n{report}"),
        ));
    }
    for w in report.warnings() {
        log::warn!("{w}");
    }

    let mut files = vec![config.db.as_path()];
    files.extend(config.dcf.as_deref());
    let hash = input_hash(&model, &files)?;

    let seed = match config.mode {
        Mode::Montecarlo => Some(config.seed.unwrap_or(DEFAULT_SEED)),
        _ => None,
    };
    let payload = match config.mode {
        Mode::Static => {
            let result = match run_static(&model, &db) {
                Ok(r) => r,
                Err(EngineError::NotStatic(what)) => {
                    log::info!("{what} varies over the grid; using the grid calculator");
                    run_matrix(&model, &db)?
                }
                Err(e) => return Err(e.into()),
            };
            Payload::Unit { result }
        }
        Mode::Montecarlo => {
            let n = config.n_runs.unwrap_or(DEFAULT_RUNS);
            Payload::MonteCarlo {
                result: run_monte_carlo(&model, &db, n, seed.unwrap_or_default())?,
            }
        }
        Mode::Dynamic => {
            let unit = run_matrix(&model, &db)?;
            let inventory = compute_inventory(&model, &db)?;
            let dynamic = run_dynamic_on(&model, &inventory.substances, &db, &dcfs)?;
            Payload::Dynamic { unit, dynamic }
        }
    };

    let economics = match &model.production {
        Some(q) => Some(economics(payload.unit(), q, model.discount_rate)?),
        None => None,
    };
    let mut recorded = config.clone();
    recorded.n_runs = match config.mode {
        Mode::Montecarlo => Some(config.n_runs.unwrap_or(DEFAULT_RUNS)),
        _ => config.n_runs,
    };
    recorded.seed = seed.or(config.seed);
    // the output location does not affect the result, and keeps reruns byte-identical
    recorded.output = None;
    let rs = ResultSet {
        metadata: RunMetadata {
            mode: config.mode,
            model_name: model.name.clone(),
            grid: model.grid.clone(),
            seed,
            config: Some(recorded),
            input_hash: Some(hash),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        },
        payload,
        economics,
    };
    if let Some(loc) = rs.first_non_finite() {
        return Err(Failure(EXIT_NUMERIC, format!("non-finite result: {loc}")));
    }
    Ok(rs)
}

fn economics(
    unit: &UnitResult,
    production: &[f64],
    rate: f64,
) -> Result<Vec<crate::econ::Indicators>, Failure> {
    // a 1-column static cost applies to every production period
    let cost = if unit.cost.cols() == 1 && production.len() != 1 {
        Grid::from_fn(
            crate::grid::Shape::new(unit.cost.rows(), production.len()),
            |s, _| unit.cost.get(s, 0),
        )
    } else {
        unit.cost.clone()
    };
    discounted_cost_result(&cost, &ProductionSeries::new(production.to_vec()), rate).map_err(|e| match e {
        EconError::LengthMismatch { .. } => Failure(EXIT_INVALID, format!("economics: {e}")),
        e => Failure(EXIT_NUMERIC, format!("economics: {e}")),
    })
}

fn run_inner(config: &RunConfig, threads: Option<usize>, out: &mut dyn Write) -> Result<(), Failure> {
    let rs = match threads {
        None => execute_inner(config)?,
        Some(0) => return Err(Failure(EXIT_INVALID, "--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure(EXIT_INVALID, format!("thread pool: {e}")))?
            .install(|| execute_inner(config))?,
    };
    if let Some(path) = &config.output {
        export_results(&rs, config.format, path).map_err(|e| match e {
            ExportError::NonFinite(_) => Failure(EXIT_NUMERIC, e.to_string()),
            e => Failure(EXIT_IO, e.to_string()),
        })?;
    }
    write_summary(&rs, out).map_err(|e| Failure(EXIT_IO, e.to_string()))
}

/// Mean over all cells.
fn grid_mean(g: &Grid) -> f64 {
    g.sum() / g.shape().len() as f64
}

/// Mean over scenarios of each scenario's sum over periods.
fn scenario_total(g: &Grid) -> f64 {
    g.rows_iter().map(|r| r.iter().sum::<f64>()).sum::<f64>() / g.rows() as f64
}

/// One line per quantity: `<kind>\t<key>\t<value>`.
///
/// `total` lines are main-process unit values averaged over the grid. Dynamic runs add the
/// impact summed over all output periods, Monte Carlo runs the spread over runs.
pub fn write_summary(rs: &ResultSet, out: &mut dyn Write) -> std::io::Result<()> {
    let m = &rs.metadata;
    writeln!(out, "model\t{}", m.model_name)?;
    writeln!(
        out,
        "mode\t{}",
        serde_json::to_value(m.mode).unwrap().as_str().unwrap_or_default()
    )?;
    writeln!(out, "grid\t{}x{}", m.grid.n_scenarios, m.grid.n_timesteps)?;
    if let Some(seed) = m.seed {
        writeln!(out, "seed\t{seed}")?;
    }
    for (key, g) in rs.payload.unit().series() {
        writeln!(out, "total\t{key}\t{}", format_number(grid_mean(g)))?;
    }
    match &rs.payload {
        Payload::MonteCarlo { result } => {
            writeln!(out, "runs\t{}", result.n_runs)?;
            for (key, g) in result.samples.series() {
                let means: Vec<f64> = g
                    .rows_iter()
                    .map(|r| r.iter().sum::<f64>() / r.len() as f64)
                    .collect();
                let s = crate::engine::Summary::of(&means);
                writeln!(out, "sd\t{key}\t{}", format_number(s.sd))?;
                writeln!(out, "p2.5\t{key}\t{}", format_number(s.p2_5))?;
                writeln!(out, "p97.5\t{key}\t{}", format_number(s.p97_5))?;
            }
        }
        Payload::Dynamic { dynamic, .. } => {
            for (key, g) in &dynamic.impacts {
                writeln!(out, "dynamic\t{key}\t{}", format_number(scenario_total(g)))?;
            }
        }
        Payload::Unit { .. } => {}
    }
    if let Some(econ) = &rs.economics {
        let n = econ.len() as f64;
        let mean = |f: fn(&crate::econ::Indicators) -> f64| econ.iter().map(f).sum::<f64>() / n;
        writeln!(out, "npv\t{}", format_number(mean(|i| i.npv)))?;
        writeln!(out, "msp\t{}", format_number(mean(|i| i.msp)))?;
        writeln!(out, "lcoe\t{}", format_number(mean(|i| i.lcoe)))?;
    }
    Ok(())
}

pub fn cmd_report(result: &Path, plot_data: bool, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let rs = match import_results(result) {
        Ok(rs) => rs,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_IO;
        }
    };
    let written = if plot_data {
        write_plot_data(&rs, out)
    } else {
        write_summary(&rs, out)
    };
    match written {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            EXIT_IO
        }
    }
}

pub const PLOT_HEADER: &str = "table,key,series,scenario,x,x_end,value";

struct PlotWriter<'a> {
    w: csv::Writer<&'a mut dyn Write>,
}

impl PlotWriter<'_> {
    /// `head` is table, key and series.
    fn row(
        &mut self,
        head: [&str; 3],
        scenario: Option<usize>,
        x: &str,
        x_end: &str,
        value: f64,
    ) -> std::io::Result<()> {
        let [table, key, series] = head;
        let scenario = scenario.map(|s| s.to_string()).unwrap_or_default();
        self.w
            .write_record([table, key, series, &scenario, x, x_end, &format_number(value)])
            .map_err(std::io::Error::other)
    }

    fn grid(&mut self, table: &str, key: &str, series: &str, g: &Grid) -> std::io::Result<()> {
        for (s, row) in g.rows_iter().enumerate() {
            for (t, v) in row.iter().enumerate() {
                self.row([table, key, series], Some(s), &t.to_string(), "", *v)?;
            }
        }
        Ok(())
    }

    /// Column means over scenarios, scenario left empty.
    fn mean_grid(&mut self, table: &str, key: &str, series: &str, g: &Grid) -> std::io::Result<()> {
        for t in 0..g.cols() {
            let m = (0..g.rows()).map(|s| g.get(s, t)).sum::<f64>() / g.rows() as f64;
            self.row([table, key, series], None, &t.to_string(), "", m)?;
        }
        Ok(())
    }
}

/// Equal-width bins over `values`: `(low edge, high edge, count)`.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let edge = |k: usize| if k == bins { hi } else { lo + k as f64 * width };
            (edge(i), edge(i + 1), c)
        })
        .collect()
}

/// Tidy CSV for external plotting.
///
/// Tables: `impact` (per category and cost over time), `cumulative` (dynamic runs),
/// `histogram` (Monte Carlo, per-run totals in 50 bins), `contribution` (per sub-process),
/// `substance_contribution` (dynamic runs). Monte Carlo impact and contribution rows are
/// means over runs, with the scenario column empty.
pub fn write_plot_data(rs: &ResultSet, out: &mut dyn Write) -> std::io::Result<()> {
    let mut p = PlotWriter {
        w: csv::WriterBuilder::new().has_headers(false).from_writer(out),
    };
    p.w.write_record(PLOT_HEADER.split(','))
        .map_err(std::io::Error::other)?;
    let unit = rs.payload.unit();
    let per_run = matches!(rs.payload, Payload::MonteCarlo { .. });
    for (key, g) in unit.series() {
        if per_run {
            p.mean_grid("impact", key, "mean", g)?;
        } else {
            p.grid("impact", key, "unit", g)?;
        }
    }
    if let Payload::Dynamic { dynamic, .. } = &rs.payload {
        for (key, g) in &dynamic.impacts {
            p.grid("impact", key, "dynamic", g)?;
        }
        for (key, g) in &dynamic.cumulative {
            p.grid("cumulative", key, "dynamic", g)?;
        }
    }
    if let Payload::MonteCarlo { result } = &rs.payload {
        for (key, g) in result.samples.series() {
            let totals: Vec<f64> = g.rows_iter().map(|r| r.iter().sum()).collect();
            for (lo, hi, count) in histogram(&totals, HISTOGRAM_BINS) {
                p.row(
                    ["histogram", key, "count"],
                    None,
                    &format_number(lo),
                    &format_number(hi),
                    count as f64,
                )?;
            }
        }
    }
    let keys: Vec<&str> = unit.categories().chain([COST_KEY]).collect();
    for key in keys {
        for sp in &unit.subprocesses {
            let Some(c) = sp.contribution(key) else { continue };
            if per_run {
                p.mean_grid("contribution", key, &sp.name, &c)?;
            } else {
                p.grid("contribution", key, &sp.name, &c)?;
            }
        }
    }
    if let Payload::Dynamic { dynamic, .. } = &rs.payload {
        for (key, per) in &dynamic.contributions {
            for (substance, c) in per {
                p.grid("substance_contribution", key, substance, &c.impact)?;
            }
        }
    }
    p.w.flush()
}

/// Entry point of the binary.
pub fn main() -> i32 {
    let env = env_logger::Env::new().filter_or("LCENGINE_LOG", "warn");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
