//! Proximal Jacobian ADMM detector.
//!
//! Every iteration updates all `2Nt` symbol blocks `(x_i, y_i)` at once from
//! the previous iterate, then takes one dual ascent step on the coupling
//! constraint `Σ_i y_i = y`. Block `i` minimizes
//!
//! ```text
//! ‖y_i - h_i x_i‖² - λᵀy_i + ρ/2 ‖r_i - y_i‖² + τ/2 (x_i - x̄_i)² + τ/2 ‖y_i - ȳ_i‖²
//! ```
//!
//! where `r_i = y - Σ_{j≠i} ȳ_j` and bars denote the previous iterate.
//! Setting both partial gradients to zero, with `a = 2 + ρ + τ`,
//! `S_i = ‖h_i‖²` and `C = λ + ρ r_i + τ ȳ_i`:
//!
//! ```text
//! y_i = (2 h_i x_i + C) / a
//! x_i = ((2/a) h_iᵀC + τ x̄_i) / (2 S_i (1 - 2/a) + τ)
//! ```
//!
//! The `x_i` expression follows from substituting the first line into
//! `-2 h_iᵀ(y_i - h_i x_i) + τ (x_i - x̄_i) = 0`. In box mode `x_i` is
//! projected onto `[-l, l]` before `y_i` is formed, which is the exact
//! constrained block minimizer because the objective, minimized over `y_i`,
//! is a convex quadratic in `x_i`.
//!
//! Because every block reads only the previous iterate, the block loop is
//! embarrassingly parallel and its result does not depend on execution order.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::decomp::{column_sum, init_state, kkt_residual, objective_value, DetectorState, KktResidual};
use crate::error::{Error, Result};
use crate::model::{quantize, Constellation, RealSystemModel};

pub mod oracle;

pub use oracle::{subproblem_objective, subproblem_oracle};

/// Product ρ·2Nt of the default penalty.
pub const DEFAULT_PENALTY_SCALE: f64 = 0.8;

/// Damping κ of the default proximal weight
/// `τ = ρ (κ (1 + √(Nt/Nr))² - 1)`.
pub const DEFAULT_PROXIMAL_DAMPING: f64 = 4.0;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ClampMode {
    /// Unconstrained block updates; only the final hard decision uses the
    /// constellation.
    None,
    /// Project every `x_i` onto `[-l, l]` with the given `l`.
    Box(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PjadmmConfig {
    /// Penalty ρ on the coupling constraint.
    pub rho: f64,
    /// Proximal weight τ.
    pub tau: f64,
    /// Stop once `|V(t) - V(t-1)| < tolerance`.
    pub tolerance: f64,
    /// Iteration budget T.
    pub max_iters: usize,
    pub clamp: ClampMode,
    /// Run the block loop on the rayon pool. Results are identical either way.
    pub block_parallel: bool,
}

impl PjadmmConfig {
    /// Defaults for an `nr`×`nt` complex system (2Nr×2Nt real).
    ///
    /// The block-Jacobi sweep over the `y_i` is stable only when
    /// `ρ (2Nt - 2) < 2 + 2τ`, so ρ shrinks with the number of blocks. For
    /// small ρ the `x` sweep behaves like a damped Richardson iteration on the
    /// normal equations with step about `1/((1 + τ/ρ) Nr)`; it diverges once
    /// that step exceeds roughly `4/3` over the largest eigenvalue of `HᵀH`,
    /// which sits near `Nr (1 + √(Nt/Nr))²`. τ/ρ is set a factor κ above that
    /// edge.
    pub fn for_shape(nr: usize, nt: usize) -> Self {
        let blocks = (2 * nt).max(1) as f64;
        let load = nt as f64 / nr.max(1) as f64;
        let rho = DEFAULT_PENALTY_SCALE / blocks;
        let ratio = (DEFAULT_PROXIMAL_DAMPING * (1.0 + load.sqrt()).powi(2) - 1.0).max(0.0);
        Self {
            rho,
            tau: rho * ratio,
            tolerance: DEFAULT_TOLERANCE,
            max_iters: 50,
            clamp: ClampMode::None,
            block_parallel: true,
        }
    }

    pub fn for_model(m: &RealSystemModel) -> Self {
        Self::for_shape(m.nr().max(1), m.nt().max(1))
    }

    pub fn with_max_iters(mut self, t: usize) -> Self {
        self.max_iters = t;
        self
    }

    pub fn with_tolerance(mut self, delta: f64) -> Self {
        self.tolerance = delta;
        self
    }

    pub fn with_box(mut self, c: &Constellation) -> Self {
        self.clamp = ClampMode::Box(c.bound());
        self
    }

    pub fn sequential(mut self) -> Self {
        self.block_parallel = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::param("rho", format!("{} must be finite and > 0", self.rho)));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::param("tau", format!("{} must be finite and >= 0", self.tau)));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::param("tolerance", format!("{} must be >= 0", self.tolerance)));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be >= 1"));
        }
        if let ClampMode::Box(l) = self.clamp {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::param("clamp", format!("box bound {l} must be finite and > 0")));
            }
        }
        Ok(())
    }
}

/// Output of a detector run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionResult {
    pub x_soft: Vec<f64>,
    pub x_hard: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
    pub final_kkt: Option<KktResidual>,
}

// Entry k of C = λ + ρ (y - Σ_{j≠i} ȳ_j) + τ ȳ_i, with Σ_{j≠i} ȳ_j formed as
// total - ȳ_i.
#[inline(always)]
fn coupling(lambda: f64, y: f64, total: f64, yi: f64, rho: f64, tau: f64) -> f64 {
    lambda + rho * (y - total + yi) + tau * yi
}

struct BlockInputs<'a> {
    h: &'a [f64],
    y: &'a [f64],
    total: &'a [f64],
    yi_old: &'a [f64],
    lambda: &'a [f64],
    x_old: f64,
    energy: f64,
}

fn x_core(b: &BlockInputs<'_>, column: usize, cfg: &PjadmmConfig) -> Result<f64> {
    let (rho, tau) = (cfg.rho, cfg.tau);
    let a = 2.0 + rho + tau;
    let denom = 2.0 * b.energy * ((rho + tau) / a) + tau;
    if !(denom > 0.0) {
        return Err(Error::DegenerateColumn { column });
    }
    let mut hc = 0.0;
    for k in 0..b.h.len() {
        hc += b.h[k] * coupling(b.lambda[k], b.y[k], b.total[k], b.yi_old[k], rho, tau);
    }
    let x = ((2.0 / a) * hc + tau * b.x_old) / denom;
    Ok(match cfg.clamp {
        ClampMode::None => x,
        ClampMode::Box(l) => x.clamp(-l, l),
    })
}

fn y_core(b: &BlockInputs<'_>, x_new: f64, cfg: &PjadmmConfig, out: &mut [f64]) {
    let (rho, tau) = (cfg.rho, cfg.tau);
    let a = 2.0 + rho + tau;
    for k in 0..out.len() {
        let c = coupling(b.lambda[k], b.y[k], b.total[k], b.yi_old[k], rho, tau);
        out[k] = (2.0 * b.h[k] * x_new + c) / a;
    }
}

fn inputs<'a>(
    i: usize,
    s: &'a DetectorState,
    m: &'a RealSystemModel,
    total: &'a DVector<f64>,
) -> BlockInputs<'a> {
    let rows = m.rows();
    BlockInputs {
        h: &m.channel().as_slice()[i * rows..(i + 1) * rows],
        y: m.received().as_slice(),
        total: total.as_slice(),
        yi_old: &s.contributions.as_slice()[i * rows..(i + 1) * rows],
        lambda: s.lambda.as_slice(),
        x_old: s.x[i],
        energy: m.column_energy()[i],
    }
}

fn check_dims(s: &DetectorState, m: &RealSystemModel, i: Option<usize>) -> Result<()> {
    if !s.matches(m) {
        return Err(Error::Dimension(format!(
            "state is {}x{} but model is {}x{}",
            s.rows(),
            s.blocks(),
            m.rows(),
            m.blocks()
        )));
    }
    if let Some(i) = i {
        if i >= m.blocks() {
            return Err(Error::Dimension(format!("block {i} out of range 0..{}", m.blocks())));
        }
    }
    Ok(())
}

/// New `x_i` from snapshot `s`.
pub fn update_x_block(i: usize, s: &DetectorState, m: &RealSystemModel, cfg: &PjadmmConfig) -> Result<f64> {
    check_dims(s, m, Some(i))?;
    let total = s.contribution_sum();
    x_core(&inputs(i, s, m, &total), i, cfg)
}

/// New `y_i` from snapshot `s` and this iteration's `x_i`.
pub fn update_y_block(
    i: usize,
    x_new: f64,
    s: &DetectorState,
    m: &RealSystemModel,
    cfg: &PjadmmConfig,
) -> Result<DVector<f64>> {
    check_dims(s, m, Some(i))?;
    let total = s.contribution_sum();
    let mut out = DVector::zeros(m.rows());
    y_core(&inputs(i, s, m, &total), x_new, cfg, out.as_mut_slice());
    Ok(out)
}

/// `λ + ρ (y - Σ_i y_i)` with `s.contributions` already holding the new
/// columns.
pub fn update_duals(s: &DetectorState, m: &RealSystemModel, cfg: &PjadmmConfig) -> DVector<f64> {
    let total = column_sum(&s.contributions);
    let mut lambda = s.lambda.clone();
    for k in 0..lambda.len() {
        lambda[k] += cfg.rho * (m.received()[k] - total[k]);
    }
    lambda
}

/// One full sweep: every `(x_i, y_i)` from the snapshot, then the duals,
/// then the objective.
pub fn iterate(s: &DetectorState, m: &RealSystemModel, cfg: &PjadmmConfig) -> Result<DetectorState> {
    check_dims(s, m, None)?;
    let rows = m.rows();
    let total = s.contribution_sum();
    let mut next = DetectorState {
        x: DVector::zeros(m.blocks()),
        contributions: s.contributions.clone(),
        lambda: s.lambda.clone(),
        t: s.t + 1,
        trace: s.trace.clone(),
    };

    let block = |(i, (col, x)): (usize, (&mut [f64], &mut f64))| -> Result<()> {
        let b = inputs(i, s, m, &total);
        *x = x_core(&b, i, cfg)?;
        y_core(&b, *x, cfg, col);
        Ok(())
    };
    let cols = next.contributions.as_mut_slice();
    let xs = next.x.as_mut_slice();
    if cfg.block_parallel {
        cols.par_chunks_mut(rows)
            .zip(xs.par_iter_mut())
            .enumerate()
            .with_min_len(8)
            .try_for_each(block)?;
    } else {
        cols.chunks_mut(rows).zip(xs.iter_mut()).enumerate().try_for_each(block)?;
    }

    // barrier: duals see the complete new Y
    next.lambda = update_duals(&next, m, cfg);
    let v = objective_value(&next, m);
    next.trace.push(v);
    Ok(next)
}

/// Runs sweeps from the zero state until `|V(t) - V(t-1)| < δ` or `t = T`,
/// then hard-quantizes.
pub fn detect(m: &RealSystemModel, c: &Constellation, cfg: &PjadmmConfig) -> Result<DetectionResult> {
    let mut out = detect_budgets(m, c, cfg, &[cfg.max_iters])?;
    Ok(out.pop().expect("one budget"))
}

/// Equivalent to calling [`detect`] once per budget in `budgets` (with
/// `max_iters` replaced by that budget) but shares the sweeps. Results come
/// back in the order of `budgets`.
pub fn detect_budgets(
    m: &RealSystemModel,
    c: &Constellation,
    cfg: &PjadmmConfig,
    budgets: &[usize],
) -> Result<Vec<DetectionResult>> {
    cfg.validate()?;
    if let Some(&b) = budgets.iter().find(|&&b| b == 0) {
        return Err(Error::param("max_iters", format!("budget {b} must be >= 1")));
    }
    let horizon = budgets.iter().copied().max().unwrap_or(0);
    let mut results: Vec<Option<DetectionResult>> = vec![None; budgets.len()];
    let mut state = init_state(m);
    let mut prev = objective_value(&state, m);
    while state.t < horizon {
        state = iterate(&state, m, cfg)?;
        let v = *state.trace.last().expect("trace grows every sweep");
        let settled = (v - prev).abs() < cfg.tolerance;
        prev = v;
        for (slot, &b) in results.iter_mut().zip(budgets) {
            if slot.is_none() && (b == state.t || (settled && b > state.t)) {
                *slot = Some(finish(&state, m, c, settled));
            }
        }
        if settled {
            break;
        }
    }
    Ok(results.into_iter().map(|r| r.expect("every budget reached")).collect())
}

fn finish(s: &DetectorState, m: &RealSystemModel, c: &Constellation, converged: bool) -> DetectionResult {
    DetectionResult {
        x_soft: s.x.as_slice().to_vec(),
        x_hard: quantize(&s.x, c).as_slice().to_vec(),
        iterations_used: s.t,
        converged,
        trace: s.trace.clone(),
        final_kkt: Some(kkt_residual(s, m, c)),
    }
}
