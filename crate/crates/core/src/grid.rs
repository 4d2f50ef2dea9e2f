//! Scenario by time-step grids.
//!
//! Every quantity in a model run lives on an `n_scenarios x n_timesteps` grid. Storage is
//! row-major with one row per scenario, so the time steps of a scenario are contiguous and
//! scenario rows can be handed to workers independently.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Shape and time metadata of a model run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioGrid {
    pub n_scenarios: usize,
    pub n_timesteps: usize,
    /// Free-text time unit, e.g. `year` or `minute`.
    pub step_label: String,
    /// Index of the first period.
    #[serde(default)]
    pub step_origin: i64,
}

impl ScenarioGrid {
    pub fn new(n_scenarios: usize, n_timesteps: usize) -> Self {
        Self {
            n_scenarios,
            n_timesteps,
            step_label: "year".to_owned(),
            step_origin: 0,
        }
    }

    pub fn with_step(mut self, label: impl Into<String>, origin: i64) -> Self {
        self.step_label = label.into();
        self.step_origin = origin;
        self
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.n_scenarios, self.n_timesteps)
    }

    pub fn is_valid(&self) -> bool {
        self.n_scenarios >= 1 && self.n_timesteps >= 1
    }

    /// True when the step label names a calendar year.
    pub fn is_annual(&self) -> bool {
        matches!(
            self.step_label.trim().to_ascii_lowercase().as_str(),
            "year" | "years" | "yr" | "yrs" | "y" | "a" | "annual"
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub const fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("shape mismatch: expected {expected}, found {found}")]
pub struct ShapeError {
    pub expected: Shape,
    pub found: Shape,
}

impl ShapeError {
    pub fn check(expected: Shape, found: Shape) -> Result<(), ShapeError> {
        if expected == found {
            Ok(())
        } else {
            Err(ShapeError { expected, found })
        }
    }
}

/// A dense real grid, one row per scenario.
///
/// Serializes as a list of rows.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct Grid {
    shape: Shape,
    data: Vec<f64>,
}

impl Grid {
    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Self, ShapeError> {
        if data.len() != shape.len() {
            return Err(ShapeError {
                expected: shape,
                found: Shape::new(1, data.len()),
            });
        }
        Ok(Self { shape, data })
    }

    /// Builds a grid from nested rows. Ragged input is rejected.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, ShapeError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(ShapeError {
                    expected: Shape::new(rows.len(), cols),
                    found: Shape::new(rows.len(), row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            shape: Shape::new(rows.len(), cols),
            data,
        })
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for s in 0..shape.rows {
            for t in 0..shape.cols {
                data.push(f(s, t));
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn rows(&self) -> usize {
        self.shape.rows
    }

    pub fn cols(&self) -> usize {
        self.shape.cols
    }

    pub fn get(&self, scenario: usize, step: usize) -> f64 {
        self.data[scenario * self.shape.cols + step]
    }

    pub fn set(&mut self, scenario: usize, step: usize, value: f64) {
        self.data[scenario * self.shape.cols + step] = value;
    }

    pub fn row(&self, scenario: usize) -> &[f64] {
        let c = self.shape.cols;
        &self.data[scenario * c..(scenario + 1) * c]
    }

    pub fn row_mut(&mut self, scenario: usize) -> &mut [f64] {
        let c = self.shape.cols;
        &mut self.data[scenario * c..(scenario + 1) * c]
    }

    pub fn rows_iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact panics on a zero chunk size
        let c = self.shape.cols.max(1);
        self.data.chunks_exact(c).take(self.shape.rows)
    }

    pub fn rows_mut(&mut self) -> std::slice::ChunksExactMut<'_, f64> {
        let c = self.shape.cols.max(1);
        self.data.chunks_exact_mut(c)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows_iter().map(<[f64]>::to_vec).collect()
    }

    /// Element-wise product.
    pub fn hadamard(&self, other: &Grid) -> Result<Grid, ShapeError> {
        ShapeError::check(self.shape, other.shape)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Ok(Grid {
            shape: self.shape,
            data,
        })
    }

    /// `self += other` cell-wise.
    pub fn add_assign(&mut self, other: &Grid) -> Result<(), ShapeError> {
        ShapeError::check(self.shape, other.shape)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&self, k: f64) -> Grid {
        Grid {
            shape: self.shape,
            data: self.data.iter().map(|v| v * k).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Position of the first non-finite cell, if any.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        let c = self.shape.cols.max(1);
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| (i / c, i % c))
    }

    /// Copy of this grid extended with zero columns up to `cols`.
    pub fn pad_cols(&self, cols: usize) -> Grid {
        if cols <= self.shape.cols {
            return self.clone();
        }
        let mut out = Grid::zeros(Shape::new(self.shape.rows, cols));
        for s in 0..self.shape.rows {
            out.row_mut(s)[..self.shape.cols].copy_from_slice(self.row(s));
        }
        out
    }

    /// Running sum along the time axis of every row.
    pub fn cumulative(&self) -> Grid {
        let mut out = self.clone();
        for row in out.rows_mut() {
            let mut acc = 0.0;
            for v in row.iter_mut() {
                acc += *v;
                *v = acc;
            }
        }
        out
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("shape", &self.shape)
            .field("rows", &self.to_rows())
            .finish()
    }
}

impl From<Grid> for Vec<Vec<f64>> {
    fn from(g: Grid) -> Self {
        g.to_rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Grid {
    type Error = ShapeError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        Grid::from_rows(&rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_rows_rejected() {
        let err = Grid::from_rows(&[vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert_eq!(err.expected, Shape::new(2, 2));
    }

    #[test]
    fn cumulative_is_prefix_sum() {
        let g = Grid::from_rows(&[[1.0, 2.0, 3.0], [0.5, -0.5, 1.0]]).unwrap();
        let c = g.cumulative();
        assert_eq!(c.row(0), &[1.0, 3.0, 6.0]);
        assert_eq!(c.row(1), &[0.5, 0.0, 1.0]);
    }

    #[test]
    fn pad_keeps_prefix() {
        let g = Grid::from_rows(&[[1.0, 2.0]]).unwrap();
        assert_eq!(g.pad_cols(4).row(0), &[1.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn serde_as_rows() {
        let g = Grid::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, "[[1.0,2.0],[3.0,4.0]]");
        let back: Grid = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn annual_labels() {
        assert!(ScenarioGrid::new(1, 1).is_annual());
        assert!(!ScenarioGrid::new(1, 1).with_step("minute", 0).is_annual());
    }
}
