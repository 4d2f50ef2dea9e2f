//! Discounted economic indicators.
//!
//! Discounting is end-of-period with period 0 undiscounted, at a rate per grid period.
//! The minimum selling price discounts production as well as costs:
//! `p = sum(c_t / (1+r)^t) / sum(q_t / (1+r)^t)`. The levelized cost of electricity is the
//! same quantity with delivered energy as the denominator.

use crate::grid::Grid;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EconError {
    #[error("discounted production is zero")]
    ZeroProduction,
    #[error("discount rate must be finite and > -1, got {0}")]
    InvalidRate(f64),
    #[error("series must be finite")]
    NonFinite,
    #[error("production must be non-negative")]
    NegativeProduction,
    #[error("{what}: expected {expected} periods, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("no sign change of NPV in [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
}

/// Net cash flows per period, revenues positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CashFlowSeries {
    pub values: Vec<f64>,
    pub rate: f64,
}

impl CashFlowSeries {
    pub fn new(values: Vec<f64>, rate: f64) -> Self {
        Self { values, rate }
    }

    fn check(&self) -> Result<(), EconError> {
        check_rate(self.rate)?;
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(EconError::NonFinite);
        }
        Ok(())
    }
}

/// Units sold (or energy delivered) per period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionSeries {
    pub values: Vec<f64>,
}

impl ProductionSeries {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }
}

fn check_rate(rate: f64) -> Result<(), EconError> {
    if rate.is_finite() && rate > -1.0 {
        Ok(())
    } else {
        Err(EconError::InvalidRate(rate))
    }
}

/// Present value of `values` at `rate`.
fn present_value(values: &[f64], rate: f64) -> f64 {
    let growth = 1.0 + rate;
    let mut factor = 1.0;
    let mut pv = 0.0;
    for v in values {
        pv += v / factor;
        factor *= growth;
    }
    pv
}

pub fn npv(cf: &CashFlowSeries) -> Result<f64, EconError> {
    cf.check()?;
    if cf.rate == 0.0 {
        return Ok(cf.values.iter().sum());
    }
    Ok(present_value(&cf.values, cf.rate))
}

/// Price at which the NPV of `price * production - costs` is zero.
///
/// `costs` holds outgoing costs as positive values.
pub fn minimum_selling_price(
    costs: &CashFlowSeries,
    production: &ProductionSeries,
) -> Result<f64, EconError> {
    costs.check()?;
    let q = &production.values;
    if q.iter().any(|v| !v.is_finite()) {
        return Err(EconError::NonFinite);
    }
    if q.iter().any(|v| *v < 0.0) {
        return Err(EconError::NegativeProduction);
    }
    let pv_q = present_value(q, costs.rate);
    if pv_q <= 0.0 {
        return Err(EconError::ZeroProduction);
    }
    Ok(present_value(&costs.values, costs.rate) / pv_q)
}

/// Levelized cost: discounted costs over discounted energy. Identical to
/// [`minimum_selling_price`] with energy as the production series.
pub fn lcoe(costs: &CashFlowSeries, energy: &ProductionSeries) -> Result<f64, EconError> {
    minimum_selling_price(costs, energy)
}

/// Bisection for the break-even price of a general revenue model.
///
/// `npv_at` maps a price to the project NPV; it must change sign over `[lo, hi]`.
pub fn break_even_price(
    npv_at: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64, EconError> {
    let mut f_lo = npv_at(lo);
    let f_hi = npv_at(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || !f_lo.is_finite() || !f_hi.is_finite() {
        return Err(EconError::NoBracket { lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = npv_at(mid);
        if f_mid == 0.0 || (hi - lo).abs() <= tol {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Indicators {
    pub npv: f64,
    pub msp: f64,
    pub lcoe: f64,
}

/// Row-wise indicators for a unit-cost grid (cost per unit of product per period).
///
/// Period costs are `unit_cost[s][t] * production[t]`; NPV is that of the negated costs, since
/// revenues from co-products already enter the unit cost with negative sign.
pub fn discounted_cost_result(
    unit_cost_grid: &Grid,
    production: &ProductionSeries,
    rate: f64,
) -> Result<Vec<Indicators>, EconError> {
    if unit_cost_grid.cols() != production.values.len() {
        return Err(EconError::LengthMismatch {
            what: "production",
            expected: unit_cost_grid.cols(),
            found: production.values.len(),
        });
    }
    unit_cost_grid
        .rows_iter()
        .map(|row| {
            let costs: Vec<f64> = row.iter().zip(&production.values).map(|(c, q)| c * q).collect();
            let cash = CashFlowSeries::new(costs.iter().map(|c| -c).collect(), rate);
            let costs = CashFlowSeries::new(costs, rate);
            Ok(Indicators {
                npv: npv(&cash)?,
                msp: minimum_selling_price(&costs, production)?,
                lcoe: lcoe(&costs, production)?,
            })
        })
        .collect()
}
