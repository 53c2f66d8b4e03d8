//! Massive MIMO uplink detection by proximal Jacobian ADMM.
//!
//! The received vector is split into one contribution per real transmitted
//! symbol, which makes the relaxed maximum-likelihood objective separable.
//! Every symbol block is then updated in parallel in closed form, with no
//! matrix inversion. An exact linear MMSE detector is provided as the
//! reference, together with a seeded Monte Carlo BER harness and the
//! per-vector time-unit cost model.
//!
//! Module map:
//! - [`model`]: complex/real system model, QAM constellations, channel and noise.
//! - [`decomp`]: decomposed detector state, objective, residuals and KKT check.
//! - [`pjadmm`]: the parallel detector and its subproblem oracle.
//! - [`baseline`]: exact MMSE detection.
//! - [`bench`]: BER experiments and time-unit accounting.
//! - [`cli`]: command-line front end and report writers.

pub mod baseline;
pub mod bench;
pub mod cli;
pub mod decomp;
pub mod error;
pub mod model;
pub mod pjadmm;
pub mod report;
pub mod rng;

pub use nalgebra;
pub use num_complex;

pub use baseline::{mmse_detect, MmseWorkspace};
pub use bench::{
    run_ber, sweep_iterations, sweep_snr, table1_report, time_units, BerPoint, BerReport,
    DetectorKind, SimConfig, TimeUnitReport,
};
pub use decomp::{init_state, kkt_residual, objective_value, primal_residual, DetectorState, KktResidual};
pub use error::{Error, Result};
pub use model::{
    add_noise, complex_to_real, generate_channel, modulate, noise_variance_from_snr, quantize,
    ComplexSystemModel, Constellation, RealSystemModel,
};
pub use pjadmm::{detect, iterate, ClampMode, DetectionResult, PjadmmConfig};
