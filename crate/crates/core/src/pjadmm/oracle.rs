//! Numeric reference for one block subproblem.
//!
//! Builds the full quadratic in the `2Nr + 1` unknowns `(y_i, x_i)` and solves
//! its stationarity system with a pivoted LU factorization. Shares no code
//! with the closed-form updates; it exists to check them.

use nalgebra::{DMatrix, DVector};

use super::{ClampMode, PjadmmConfig};
use crate::decomp::DetectorState;
use crate::error::{Error, Result};
use crate::model::RealSystemModel;

struct Subproblem {
    h: DVector<f64>,
    lambda: DVector<f64>,
    // y - Σ_{j≠i} ȳ_j, summed directly over j ≠ i
    residual: DVector<f64>,
    yi_old: DVector<f64>,
    x_old: f64,
    rho: f64,
    tau: f64,
}

impl Subproblem {
    fn new(i: usize, s: &DetectorState, m: &RealSystemModel, cfg: &PjadmmConfig) -> Result<Self> {
        if i >= m.blocks() || s.contributions.shape() != m.channel().shape() {
            return Err(Error::Dimension(format!("block {i} does not fit the state/model")));
        }
        let mut residual = m.received().clone();
        for j in (0..m.blocks()).filter(|&j| j != i) {
            residual -= s.contributions.column(j);
        }
        Ok(Self {
            h: m.channel().column(i).into_owned(),
            lambda: s.lambda.clone(),
            residual,
            yi_old: s.contributions.column(i).into_owned(),
            x_old: s.x[i],
            rho: cfg.rho,
            tau: cfg.tau,
        })
    }

    fn objective(&self, x: f64, u: &DVector<f64>) -> f64 {
        (u - &self.h * x).norm_squared() - self.lambda.dot(u)
            + self.rho / 2.0 * (&self.residual - u).norm_squared()
            + self.tau / 2.0 * (x - self.x_old).powi(2)
            + self.tau / 2.0 * (u - &self.yi_old).norm_squared()
    }

    // Hessian Q and right-hand side b of the stationarity system Q z = b,
    // z = (u, x).
    fn system(&self) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.h.len();
        let mut q = DMatrix::zeros(n + 1, n + 1);
        let mut b = DVector::zeros(n + 1);
        for k in 0..n {
            q[(k, k)] = 2.0 + self.rho + self.tau;
            q[(k, n)] = -2.0 * self.h[k];
            q[(n, k)] = -2.0 * self.h[k];
            b[k] = self.lambda[k] + self.rho * self.residual[k] + self.tau * self.yi_old[k];
        }
        q[(n, n)] = 2.0 * self.h.norm_squared() + self.tau;
        b[n] = self.tau * self.x_old;
        (q, b)
    }
}

/// Minimizer `(x_i, y_i)` of block `i`'s subproblem at snapshot `s`,
/// honoring the box in [`ClampMode::Box`].
pub fn subproblem_oracle(
    i: usize,
    s: &DetectorState,
    m: &RealSystemModel,
    cfg: &PjadmmConfig,
) -> Result<(f64, DVector<f64>)> {
    let sub = Subproblem::new(i, s, m, cfg)?;
    let n = sub.h.len();
    let (q, b) = sub.system();
    let z = q.clone().full_piv_lu().solve(&b).ok_or(Error::Singular)?;
    let x = z[n];
    let bounded = match cfg.clamp {
        ClampMode::Box(l) if x.abs() > l => Some(x.clamp(-l, l)),
        _ => None,
    };
    match bounded {
        None => Ok((x, z.rows(0, n).into_owned())),
        Some(x) => {
            // x pinned at the bound: minimize over u alone
            let quu = q.view((0, 0), (n, n)).into_owned();
            let rhs = b.rows(0, n) - q.view((0, n), (n, 1)) * x;
            let u = quu.full_piv_lu().solve(&rhs).ok_or(Error::Singular)?;
            Ok((x, u))
        }
    }
}

/// Value of block `i`'s subproblem objective at `(x, u)`.
pub fn subproblem_objective(
    i: usize,
    s: &DetectorState,
    m: &RealSystemModel,
    cfg: &PjadmmConfig,
    x: f64,
    u: &DVector<f64>,
) -> Result<f64> {
    Ok(Subproblem::new(i, s, m, cfg)?.objective(x, u))
}
