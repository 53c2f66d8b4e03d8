//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::baseline::mmse_detect;
use crate::bench::{
    run_ber, sweep_iterations, table1, table1_report, BerReport, DetectorKind, SimConfig, TimeUnitEntry,
    TimeUnitReport,
};
use crate::error::Error;
use crate::model::{complex_to_real, ComplexSystemModel, Constellation};
use crate::pjadmm::{detect, ClampMode, PjadmmConfig};
use crate::report::{self, Format};

pub const SEED_ENV: &str = "MIMO_PJADMM_SEED";

const SNR_HELP: &str = "SNR points in dB: a single value, a comma list, or an inclusive \
range start:step:stop. SNR is Nt/σ_v², the total received signal power of unit-energy \
symbols over a CN(0,1) channel divided by the per-antenna complex noise variance";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Clap(#[from] clap::Error),
    #[error("invalid value for --{flag}: {reason}")]
    Flag { flag: &'static str, reason: String },
    #[error("{path}: {source}")]
    Instance { path: PathBuf, source: Error },
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    fn flag(flag: &'static str, reason: impl Into<String>) -> Self {
        CliError::Flag {
            flag,
            reason: reason.into(),
        }
    }
}

/// Massive MIMO uplink detection experiments: proximal Jacobian ADMM against
/// exact MMSE.
#[derive(Debug, Parser)]
#[command(name = "mimo-pjadmm", version, about)]
pub struct Cli {
    /// Worker threads for Monte Carlo trials (0 = all cores). Results do not
    /// depend on this value.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// BER versus SNR for one or both detectors on paired seeds.
    BerSweep(BerSweepArgs),
    /// PJADMM BER versus iteration budget at fixed SNR, with the MMSE reference.
    IterSweep(IterSweepArgs),
    /// Time units per received vector, 4Nr + T(14Nr + 2Nt).
    TimeUnits(TimeUnitsArgs),
    /// Detect one instance read from a text file.
    ///
    /// File format: first line `Nr Nt`; then Nr lines of 2·Nt numbers, each
    /// row of H̃ with real and imaginary parts interleaved; then one line of
    /// 2·Nr numbers, ỹ interleaved the same way.
    Detect(DetectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DetectorChoice {
    Pjadmm,
    Mmse,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClampChoice {
    None,
    Box,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Report path; written atomically. Standard output when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SystemArgs {
    /// BS antennas.
    #[arg(long, default_value_t = 128)]
    pub nr: usize,
    /// Single-antenna users.
    #[arg(long, default_value_t = 16)]
    pub nt: usize,
    /// Square QAM order.
    #[arg(long, default_value_t = 4)]
    pub qam: usize,
}

#[derive(Debug, Args)]
pub struct TrialArgs {
    /// Transmitted symbol vectors per SNR point.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Master seed.
    #[arg(long, env = SEED_ENV, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Penalty ρ (default 0.8/(2Nt)).
    #[arg(long)]
    pub rho: Option<f64>,
    /// Proximal weight τ (default ρ(4(1+√(Nt/Nr))² − 1)).
    #[arg(long)]
    pub tau: Option<f64>,
    /// Convergence tolerance δ on |V(t) − V(t−1)|.
    #[arg(long, default_value_t = crate::pjadmm::DEFAULT_TOLERANCE)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = ClampChoice::None)]
    pub clamp: ClampChoice,
}

#[derive(Debug, Args)]
pub struct BerSweepArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub trials: TrialArgs,
    #[arg(long, default_value = "0:2:14", help = SNR_HELP)]
    pub snr: String,
    #[arg(long, value_enum, default_value_t = DetectorChoice::Both)]
    pub detector: DetectorChoice,
    /// PJADMM iteration budget T (default: published budget for the shape, else 50).
    #[arg(long)]
    pub iters: Option<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct IterSweepArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub trials: TrialArgs,
    #[arg(long, default_value = "12", help = SNR_HELP)]
    pub snr: String,
    /// Iteration budgets: value, comma list or start:step:stop.
    #[arg(long, default_value = "2:2:40")]
    pub iters: String,
    /// Skip the paired MMSE reference rows.
    #[arg(long)]
    pub no_mmse: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TimeUnitsArgs {
    #[arg(long, default_value_t = 128)]
    pub nr: u64,
    #[arg(long, default_value_t = 16)]
    pub nt: u64,
    #[arg(long, default_value_t = 12)]
    pub iters: u64,
    /// Emit the whole published comparison (Nr = 128, Nt = 16..128).
    #[arg(long)]
    pub table1: bool,
    /// Add the cited MMSE and AltMin reference rows where known.
    #[arg(long)]
    pub refs: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Instance file.
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value_t = DetectorChoice::Pjadmm)]
    pub detector: DetectorChoice,
    #[arg(long, default_value_t = 4)]
    pub qam: usize,
    #[arg(long, default_value_t = 50)]
    pub iters: usize,
    /// Complex noise variance σ_v² used by MMSE.
    #[arg(long, default_value_t = 0.0)]
    pub noise_var: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

/// Parses `v`, `a,b,c` or inclusive `start:step:stop`.
pub fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.len() {
        1 => {
            if s.trim().is_empty() {
                return Ok(Vec::new());
            }
            s.split(',').map(num).collect()
        }
        3 => {
            let (start, step, stop) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if !(start.is_finite() && step.is_finite() && stop.is_finite()) {
                return Err("range bounds must be finite".into());
            }
            if step == 0.0 || (stop - start) * step < 0.0 {
                return Err(format!("step {step} never reaches {stop} from {start}"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect())
        }
        _ => Err(format!("`{s}` is neither a list nor start:step:stop")),
    }
}

/// Integer counterpart of [`parse_f64_list`].
pub fn parse_usize_list(s: &str) -> Result<Vec<usize>, String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.len() {
        1 => s.split(',').map(num).collect(),
        3 => {
            let (start, step, stop) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if step == 0 || stop < start {
                return Err(format!("step {step} never reaches {stop} from {start}"));
            }
            Ok((start..=stop).step_by(step).collect())
        }
        _ => Err(format!("`{s}` is neither a list nor start:step:stop")),
    }
}

fn default_iters(nr: usize, nt: usize) -> usize {
    if nr as u64 == table1::NR {
        if let Some(i) = table1::NT.iter().position(|&n| n == nt as u64) {
            return table1::ITERS[i] as usize;
        }
    }
    50
}

fn constellation(qam: usize) -> Result<Constellation, CliError> {
    Constellation::new(qam).map_err(|e| CliError::flag("qam", e.to_string()))
}

fn solver_config(nr: usize, nt: usize, iters: usize, s: &SolverArgs, c: &Constellation) -> Result<PjadmmConfig, CliError> {
    let mut cfg = PjadmmConfig::for_shape(nr, nt).with_max_iters(iters).with_tolerance(s.delta);
    if let Some(rho) = s.rho {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(CliError::flag("rho", format!("{rho} must be > 0")));
        }
        cfg.rho = rho;
        if s.tau.is_none() {
            cfg.tau = PjadmmConfig::for_shape(nr, nt).tau / PjadmmConfig::for_shape(nr, nt).rho * rho;
        }
    }
    if let Some(tau) = s.tau {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(CliError::flag("tau", format!("{tau} must be >= 0")));
        }
        cfg.tau = tau;
    }
    if !(s.delta >= 0.0) {
        return Err(CliError::flag("delta", format!("{} must be >= 0", s.delta)));
    }
    if iters == 0 {
        return Err(CliError::flag("iters", "must be >= 1"));
    }
    if s.clamp == ClampChoice::Box {
        cfg.clamp = ClampMode::Box(c.bound());
    }
    Ok(cfg)
}

fn check_system(sys: &SystemArgs, trials: &TrialArgs) -> Result<Constellation, CliError> {
    if sys.nr == 0 {
        return Err(CliError::flag("nr", "must be >= 1"));
    }
    if sys.nt == 0 {
        return Err(CliError::flag("nt", "must be >= 1"));
    }
    if trials.trials == 0 {
        return Err(CliError::flag("trials", "must be >= 1"));
    }
    if sys.nt > sys.nr {
        eprintln!("warning: {} users exceed {} BS antennas", sys.nt, sys.nr);
    }
    constellation(sys.qam)
}

fn emit(out: &OutputArgs, contents: &str) -> Result<(), CliError> {
    match &out.output {
        Some(p) => report::write_atomic(p, contents)?,
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(contents.as_bytes()).map_err(Error::from)?;
            stdout.flush().map_err(Error::from)?;
        }
    }
    Ok(())
}

fn ber_sweep(a: &BerSweepArgs) -> Result<String, CliError> {
    let c = check_system(&a.system, &a.trials)?;
    let snr = parse_f64_list(&a.snr).map_err(|r| CliError::flag("snr", r))?;
    let iters = a.iters.unwrap_or_else(|| default_iters(a.system.nr, a.system.nt));
    let p = solver_config(a.system.nr, a.system.nt, iters, &a.solver, &c)?;
    let base = SimConfig {
        nr: a.system.nr,
        nt: a.system.nt,
        constellation: c,
        snr_db: snr,
        detector: DetectorKind::Mmse,
        trials: a.trials.trials,
        seed: a.trials.seed,
    };
    let mut report = BerReport::default();
    if matches!(a.detector, DetectorChoice::Mmse | DetectorChoice::Both) {
        report.extend(run_ber(&base)?);
    }
    if matches!(a.detector, DetectorChoice::Pjadmm | DetectorChoice::Both) {
        report.extend(run_ber(&SimConfig {
            detector: DetectorKind::Pjadmm(p),
            ..base
        })?);
    }
    Ok(report::ber_to_string(&report, a.out.format))
}

fn iter_sweep(a: &IterSweepArgs) -> Result<String, CliError> {
    let c = check_system(&a.system, &a.trials)?;
    let snr = parse_f64_list(&a.snr).map_err(|r| CliError::flag("snr", r))?;
    let budgets = parse_usize_list(&a.iters).map_err(|r| CliError::flag("iters", r))?;
    if budgets.contains(&0) {
        return Err(CliError::flag("iters", "budgets must be >= 1"));
    }
    let p = solver_config(a.system.nr, a.system.nt, 1, &a.solver, &c)?;
    let base = SimConfig {
        nr: a.system.nr,
        nt: a.system.nt,
        constellation: c,
        snr_db: snr,
        detector: DetectorKind::Mmse,
        trials: a.trials.trials,
        seed: a.trials.seed,
    };
    let mut report = BerReport::default();
    if !a.no_mmse {
        report.extend(run_ber(&base)?);
    }
    report.extend(sweep_iterations(
        &SimConfig {
            detector: DetectorKind::Pjadmm(p),
            ..base
        },
        &budgets,
    )?);
    Ok(report::ber_to_string(&report, a.out.format))
}

fn time_units_cmd(a: &TimeUnitsArgs) -> Result<String, CliError> {
    let report = if a.table1 {
        table1_report()
    } else {
        TimeUnitReport {
            entries: vec![TimeUnitEntry::new(a.nr, a.nt, a.iters)],
        }
    };
    Ok(report::time_units_to_string(&report, a.refs || a.table1, a.out.format))
}

/// Parses the plain-text instance format.
pub fn parse_instance(text: &str) -> Result<ComplexSystemModel, Error> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let numbers = |line: usize, l: &str| -> Result<Vec<f64>, Error> {
        l.split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    reason: format!("`{t}`: {e}"),
                })
            })
            .collect()
    };
    let (line, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        reason: "empty instance".into(),
    })?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| Error::Parse {
            line,
            reason: format!("header must be `Nr Nt`: {e}"),
        })?;
    let (nr, nt) = match dims[..] {
        [nr, nt] if nr > 0 && nt > 0 => (nr, nt),
        _ => {
            return Err(Error::Parse {
                line,
                reason: "header must be two positive integers `Nr Nt`".into(),
            })
        }
    };
    let mut h = DMatrix::from_element(nr, nt, Complex64::new(0.0, 0.0));
    for r in 0..nr {
        let (line, l) = lines.next().ok_or(Error::Parse {
            line: line + r + 1,
            reason: format!("missing channel row {} of {nr}", r + 1),
        })?;
        let v = numbers(line, l)?;
        if v.len() != 2 * nt {
            return Err(Error::Parse {
                line,
                reason: format!("channel row has {} numbers, expected {}", v.len(), 2 * nt),
            });
        }
        for c in 0..nt {
            h[(r, c)] = Complex64::new(v[2 * c], v[2 * c + 1]);
        }
    }
    let (line, l) = lines.next().ok_or(Error::Parse {
        line: line + nr + 1,
        reason: "missing received vector line".into(),
    })?;
    let v = numbers(line, l)?;
    if v.len() != 2 * nr {
        return Err(Error::Parse {
            line,
            reason: format!("received line has {} numbers, expected {}", v.len(), 2 * nr),
        });
    }
    if let Some((line, _)) = lines.next() {
        return Err(Error::Parse {
            line,
            reason: "unexpected trailing data".into(),
        });
    }
    let y = DVector::from_fn(nr, |k, _| Complex64::new(v[2 * k], v[2 * k + 1]));
    ComplexSystemModel::observed(h, y, 0.0)
}

fn read_instance(path: &Path) -> Result<ComplexSystemModel, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Instance {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    parse_instance(&text).map_err(|source| CliError::Instance {
        path: path.to_path_buf(),
        source,
    })
}

fn detect_cmd(a: &DetectArgs) -> Result<String, CliError> {
    let c = constellation(a.qam)?;
    if !(a.noise_var.is_finite() && a.noise_var >= 0.0) {
        return Err(CliError::flag("noise-var", format!("{} must be >= 0", a.noise_var)));
    }
    let mut model = read_instance(&a.instance)?;
    model.noise_var = a.noise_var;
    if model.is_overloaded() {
        eprintln!("warning: {} users exceed {} BS antennas", model.nt(), model.nr());
    }
    let real = complex_to_real(&model)?;
    let result = match a.detector {
        DetectorChoice::Pjadmm => detect(&real, &c, &solver_config(model.nr(), model.nt(), a.iters, &a.solver, &c)?)?,
        DetectorChoice::Mmse => mmse_detect(&real, &c, real.noise_var())?,
        DetectorChoice::Both => return Err(CliError::flag("detector", "detect takes a single detector")),
    };
    eprintln!(
        "detector={:?} iterations={} converged={}",
        a.detector, result.iterations_used, result.converged
    );
    Ok(report::detection_to_string(&result, a.out.format))
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let (contents, out) = match &cli.command {
        Command::BerSweep(a) => (ber_sweep(a)?, &a.out),
        Command::IterSweep(a) => (iter_sweep(a)?, &a.out),
        Command::TimeUnits(a) => (time_units_cmd(a)?, &a.out),
        Command::Detect(a) => (detect_cmd(a)?, &a.out),
    };
    emit(out, &contents)
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run_cli<I, T>(argv: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    if cli.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build()
            .map_err(|e| CliError::flag("threads", e.to_string()))?;
        pool.install(|| dispatch(&cli))
    } else {
        dispatch(&cli)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_f64_list("0:2:14").unwrap(), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0]);
        assert_eq!(parse_f64_list("12").unwrap(), vec![12.0]);
        assert_eq!(parse_f64_list("4,8,12").unwrap(), vec![4.0, 8.0, 12.0]);
        assert_eq!(parse_f64_list("0:0.1:0.3").unwrap(), vec![0.0, 0.1, 0.2, 0.3]);
        assert_eq!(parse_f64_list("10:-5:0").unwrap(), vec![10.0, 5.0, 0.0]);
        assert!(parse_f64_list("0:0:3").is_err());
        assert!(parse_f64_list("0:1:-3").is_err());
        assert!(parse_f64_list("a").is_err());
        assert!(parse_f64_list("1:2").is_err());
        assert_eq!(parse_usize_list("2:2:8").unwrap(), vec![2, 4, 6, 8]);
        assert_eq!(parse_usize_list("3,12").unwrap(), vec![3, 12]);
        assert!(parse_usize_list("5:1:2").is_err());
    }

    #[test]
    fn instance_parsing() {
        let m = parse_instance("2 1\n1 2\n# comment\n3 -4\n\n5 6 7 8\n").unwrap();
        assert_eq!(m.channel[(0, 0)], Complex64::new(1.0, 2.0));
        assert_eq!(m.channel[(1, 0)], Complex64::new(3.0, -4.0));
        assert_eq!(m.received[1], Complex64::new(7.0, 8.0));

        let e = parse_instance("2 1\n1 2\n3\n5 6 7 8\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e:?}");
        assert!(matches!(parse_instance("2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_instance("1 1\n1 x\n1 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(parse_instance("1 1\n1 0\n1 1\n9\n").is_err());
        assert!(parse_instance("1 1\n1 0\n").is_err());
    }

    #[test]
    fn default_budgets() {
        assert_eq!(default_iters(128, 16), 12);
        assert_eq!(default_iters(128, 64), 40);
        assert_eq!(default_iters(64, 16), 50);
    }
}
