//! CSV and JSON emission.
//!
//! Both formats carry the same flat rows. CSV uses LF line endings and
//! shortest round-trip float formatting; JSON is an array with one object per
//! CSV row.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::bench::{BerReport, TimeUnitReport};
use crate::error::{Error, Result};
use crate::pjadmm::DetectionResult;

pub const BER_HEADER: &str = "snr_db,nt,nr,detector,t_iters,trials,bit_errors,ber,ci_half_width";
pub const TIME_UNIT_HEADER: &str = "nt,nr,t_iters,detector,time_units";
pub const DETECT_HEADER: &str = "user,soft_re,soft_im,hard_re,hard_im";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Serialize)]
struct BerRow<'a> {
    snr_db: f64,
    nt: usize,
    nr: usize,
    detector: &'a str,
    t_iters: usize,
    trials: usize,
    bit_errors: u64,
    ber: f64,
    ci_half_width: f64,
}

#[derive(Serialize)]
struct TimeUnitRow {
    nt: u64,
    nr: u64,
    t_iters: Option<u64>,
    detector: &'static str,
    time_units: u64,
}

#[derive(Serialize)]
struct DetectRow {
    user: usize,
    soft_re: f64,
    soft_im: f64,
    hard_re: f64,
    hard_im: f64,
}

fn ber_rows(r: &BerReport) -> Vec<BerRow<'_>> {
    r.points
        .iter()
        .map(|p| BerRow {
            snr_db: p.snr_db,
            nt: p.nt,
            nr: p.nr,
            detector: &p.detector,
            t_iters: p.t_iters,
            trials: p.trials,
            bit_errors: p.bit_errors,
            ber: p.ber,
            ci_half_width: p.ci_half_width,
        })
        .collect()
}

fn time_unit_rows(r: &TimeUnitReport, with_refs: bool) -> Vec<TimeUnitRow> {
    let mut rows = Vec::new();
    for e in &r.entries {
        rows.push(TimeUnitRow {
            nt: e.nt,
            nr: e.nr,
            t_iters: Some(e.t_iters),
            detector: "pjadmm",
            time_units: e.pjadmm,
        });
        if with_refs {
            for (name, v) in [("mmse", e.mmse_ref), ("altmin", e.altmin_ref)] {
                if let Some(v) = v {
                    rows.push(TimeUnitRow {
                        nt: e.nt,
                        nr: e.nr,
                        t_iters: None,
                        detector: name,
                        time_units: v,
                    });
                }
            }
        }
    }
    rows
}

fn detect_rows(r: &DetectionResult) -> Vec<DetectRow> {
    let nt = r.x_soft.len() / 2;
    (0..nt)
        .map(|k| DetectRow {
            user: k,
            soft_re: r.x_soft[k],
            soft_im: r.x_soft[nt + k],
            hard_re: r.x_hard[k],
            hard_im: r.x_hard[nt + k],
        })
        .collect()
}

fn json<T: Serialize>(rows: &[T]) -> String {
    let mut s = serde_json::to_string_pretty(rows).expect("rows serialize");
    s.push('\n');
    s
}

pub fn ber_to_string(r: &BerReport, format: Format) -> String {
    let rows = ber_rows(r);
    match format {
        Format::Json => json(&rows),
        Format::Csv => {
            let mut s = String::from(BER_HEADER);
            s.push('\n');
            for p in rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{}",
                    p.snr_db, p.nt, p.nr, p.detector, p.t_iters, p.trials, p.bit_errors, p.ber, p.ci_half_width
                );
            }
            s
        }
    }
}

pub fn time_units_to_string(r: &TimeUnitReport, with_refs: bool, format: Format) -> String {
    let rows = time_unit_rows(r, with_refs);
    match format {
        Format::Json => json(&rows),
        Format::Csv => {
            let mut s = String::from(TIME_UNIT_HEADER);
            s.push('\n');
            for p in rows {
                let t = p.t_iters.map(|t| t.to_string()).unwrap_or_default();
                let _ = writeln!(s, "{},{},{},{},{}", p.nt, p.nr, t, p.detector, p.time_units);
            }
            s
        }
    }
}

pub fn detection_to_string(r: &DetectionResult, format: Format) -> String {
    let rows = detect_rows(r);
    match format {
        Format::Json => json(&rows),
        Format::Csv => {
            let mut s = String::from(DETECT_HEADER);
            s.push('\n');
            for p in rows {
                let _ = writeln!(s, "{},{},{},{},{}", p.user, p.soft_re, p.soft_im, p.hard_re, p.hard_im);
            }
            s
        }
    }
}

/// Writes `contents` to a sibling temporary file and renames it over `path`,
/// so `path` only ever holds a complete report.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::table1_report;

    #[test]
    fn time_unit_csv() {
        let s = time_units_to_string(&table1_report(), true, Format::Csv);
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some(TIME_UNIT_HEADER));
        assert_eq!(lines.next(), Some("16,128,12,pjadmm,22400"));
        assert_eq!(lines.next(), Some("16,128,,mmse,57000"));
        assert_eq!(lines.next(), Some("16,128,,altmin,200000"));
        assert!(!s.contains('\r'));
    }

    #[test]
    fn json_mirrors_csv() {
        let s = time_units_to_string(&table1_report(), false, Format::Json);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        let rows = v.as_array().unwrap();
        assert_eq!(rows.len(), 4);
        let keys: Vec<&str> = rows[0].as_object().unwrap().keys().map(|k| k.as_str()).collect();
        let mut expected: Vec<&str> = TIME_UNIT_HEADER.split(',').collect();
        let mut got = keys.clone();
        expected.sort_unstable();
        got.sort_unstable();
        assert_eq!(got, expected);
        assert_eq!(rows[2]["time_units"], 77312);
    }

    #[test]
    fn atomic_write() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_atomic(&p, "a\n").unwrap();
        write_atomic(&p, "b\n").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "b\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(write_atomic(&dir.path().join("missing/x.csv"), "c").is_err());
    }
}
