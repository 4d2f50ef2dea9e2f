//! Process-based life cycle assessment and life cycle costing on scenario by time grids.
//!
//! A [`model::ProcessModel`] is a main process made of sub-processes, each with inflows and
//! outflows. Unit impacts and unit costs are aggregated bottom-up by [`engine`], sampled for
//! Monte Carlo by [`sampler`], characterized over time by [`dynamic`], and discounted by
//! [`econ`]. [`io`] reads models and databases and writes results; [`cli`] wraps it all.

pub mod cli;
pub mod dynamic;
pub mod econ;
pub mod engine;
pub mod grid;
pub mod io;
pub mod model;
pub mod sampler;

pub use engine::{run_matrix, run_monte_carlo, run_static, UnitResult};
pub use grid::{Grid, ScenarioGrid, Shape};
pub use model::ProcessModel;
