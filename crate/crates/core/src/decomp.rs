//! Decomposed form of the relaxed detection problem.
//!
//! The received vector is written as `y = Σ_i y_i`, one contribution per real
//! symbol, and the relaxed objective becomes
//!
//! ```text
//! minimize   Σ_i ‖y_i - h_i x_i‖²
//! subject to Σ_i y_i = y,   -l <= x_i <= l
//! ```
//!
//! With the box inactive its optimality conditions are
//!
//! ```text
//! y_i = h_i x_i + λ/2                    (stationarity in y_i)
//! λ   = (y - Hx) / Nt                    (dual consistency, 2Nt blocks)
//! 2 x_i ‖h_i‖² - 2 h_iᵀ y_i = 0           (stationarity in x_i)
//! ```
//!
//! which [`kkt_residual`] measures for any state.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::model::{Constellation, RealSystemModel};

/// One PJADMM iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorState {
    /// Soft symbol estimates, one per real block.
    pub x: DVector<f64>,
    /// Column `i` is the contribution `y_i` of symbol `i`.
    pub contributions: DMatrix<f64>,
    /// Duals of the coupling constraint `Σ_i y_i = y`.
    pub lambda: DVector<f64>,
    /// Completed iterations.
    pub t: usize,
    /// Objective value after every completed iteration.
    pub trace: Vec<f64>,
}

impl DetectorState {
    pub fn zeros(rows: usize, blocks: usize) -> Self {
        Self {
            x: DVector::zeros(blocks),
            contributions: DMatrix::zeros(rows, blocks),
            lambda: DVector::zeros(rows),
            t: 0,
            trace: Vec::new(),
        }
    }

    pub fn blocks(&self) -> usize {
        self.x.len()
    }

    pub fn rows(&self) -> usize {
        self.lambda.len()
    }

    /// `Σ_i y_i`, summed column by column in index order.
    pub fn contribution_sum(&self) -> DVector<f64> {
        column_sum(&self.contributions)
    }

    pub(crate) fn matches(&self, m: &RealSystemModel) -> bool {
        self.rows() == m.rows() && self.blocks() == m.blocks() && self.contributions.shape() == m.channel().shape()
    }
}

pub(crate) fn column_sum(y: &DMatrix<f64>) -> DVector<f64> {
    let mut total = DVector::zeros(y.nrows());
    for col in y.column_iter() {
        total += col;
    }
    total
}

/// All-zero starting point.
pub fn init_state(m: &RealSystemModel) -> DetectorState {
    DetectorState::zeros(m.rows(), m.blocks())
}

/// `Σ_i ‖y_i - h_i x_i‖²`.
pub fn objective_value(s: &DetectorState, m: &RealSystemModel) -> f64 {
    debug_assert!(s.matches(m));
    let h = m.channel();
    s.contributions
        .column_iter()
        .zip(h.column_iter())
        .zip(s.x.iter())
        .map(|((yi, hi), &xi)| yi.iter().zip(hi.iter()).map(|(a, b)| (a - b * xi).powi(2)).sum::<f64>())
        .sum()
}

/// `‖y - Σ_i y_i‖₂`.
pub fn primal_residual(s: &DetectorState, m: &RealSystemModel) -> f64 {
    (m.received() - s.contribution_sum()).norm()
}

/// Violation of the optimality conditions at a state, evaluated in the
/// interior regime (box multipliers fixed at zero).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktResidual {
    /// `max_{i,k} |y_i^(k) - h_i^(k) x_i - λ^(k)/2|`
    pub stationarity_y: f64,
    /// `max_k |λ^(k) - (y^(k) - (Hx)^(k)) / Nt|`
    pub dual_consistency: f64,
    /// `max_i |2 x_i ‖h_i‖² - 2 h_iᵀ y_i|`
    pub stationarity_x: f64,
    /// `max_i max(0, |x_i| - l)`
    pub box_violation: f64,
    pub mu_upper: Vec<f64>,
    pub mu_lower: Vec<f64>,
}

impl KktResidual {
    /// Largest of the four residuals.
    pub fn max(&self) -> f64 {
        self.stationarity_y
            .max(self.dual_consistency)
            .max(self.stationarity_x)
            .max(self.box_violation)
    }
}

pub fn kkt_residual(s: &DetectorState, m: &RealSystemModel, c: &Constellation) -> KktResidual {
    debug_assert!(s.matches(m));
    let h = m.channel();
    let half_nt = s.blocks() as f64 / 2.0;

    let mut stationarity_y: f64 = 0.0;
    let mut stationarity_x: f64 = 0.0;
    for (i, (yi, hi)) in s.contributions.column_iter().zip(h.column_iter()).enumerate() {
        let xi = s.x[i];
        let mut hy = 0.0;
        for k in 0..yi.len() {
            stationarity_y = stationarity_y.max((yi[k] - hi[k] * xi - s.lambda[k] / 2.0).abs());
            hy += yi[k] * hi[k];
        }
        stationarity_x = stationarity_x.max((2.0 * xi * m.column_energy()[i] - 2.0 * hy).abs());
    }

    let fit = h * &s.x;
    let dual_consistency = (0..s.rows())
        .map(|k| (s.lambda[k] - (m.received()[k] - fit[k]) / half_nt).abs())
        .fold(0.0, f64::max);

    let l = c.bound();
    let box_violation = s.x.iter().map(|v| (v.abs() - l).max(0.0)).fold(0.0, f64::max);

    KktResidual {
        stationarity_y,
        dual_consistency,
        stationarity_x,
        box_violation,
        mu_upper: vec![0.0; s.blocks()],
        mu_lower: vec![0.0; s.blocks()],
    }
}
