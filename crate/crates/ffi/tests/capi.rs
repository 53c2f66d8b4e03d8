use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use mimo_pjadmm_ffi::*;

const FRAC: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/mimo_pjadmm.h")
}

fn last_error() -> String {
    let p = mpj_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

// 2x1 complex channel [1+i, 2], user sends (+,-)/√2.
fn tiny_model(noise: f64) -> *mut MpjModel {
    let h = [1.0, 1.0, 2.0, 0.0];
    let x = (FRAC, -FRAC);
    let y = [x.0 - x.1, x.0 + x.1, 2.0 * x.0, 2.0 * x.1];
    let mut m = ptr::null_mut();
    let st = unsafe { mpj_model_new_complex(2, 1, h.as_ptr(), y.as_ptr(), noise, 4, &mut m) };
    assert_eq!(st, MpjStatus::Ok);
    assert!(!m.is_null());
    m
}

#[test]
fn detectors_recover_noiseless_symbol() {
    let m = tiny_model(0.0);
    assert_eq!(unsafe { mpj_model_unknowns(m) }, 2);
    let mut cfg = mpj_config_default(2, 1);
    cfg.max_iters = 5000;
    cfg.tolerance = 1e-15;
    let (mut soft, mut hard) = ([0.0; 2], [0.0; 2]);
    let mut info = MpjDetectionInfo::default();
    let st = unsafe { mpj_detect_pjadmm(m, &cfg, soft.as_mut_ptr(), hard.as_mut_ptr(), 2, &mut info) };
    assert_eq!(st, MpjStatus::Ok);
    assert_eq!(hard, [FRAC, -FRAC]);
    assert!(info.iterations_used >= 1);
    assert!(mpj_last_error_message().is_null());

    let st = unsafe { mpj_detect_mmse(m, soft.as_mut_ptr(), ptr::null_mut(), 2, ptr::null_mut()) };
    assert_eq!(st, MpjStatus::Ok);
    assert!((soft[0] - FRAC).abs() < 1e-12 && (soft[1] + FRAC).abs() < 1e-12);
    unsafe { mpj_model_free(m) };
}

#[test]
fn real_constructor_matches_complex() {
    // real form of the tiny model: [[Re, -Im], [Im, Re]]
    let h = [1.0, -1.0, 2.0, 0.0, 1.0, 1.0, 0.0, 2.0];
    let y = [FRAC + FRAC, 2.0 * FRAC, FRAC - FRAC, -2.0 * FRAC];
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { mpj_model_new_real(4, 2, h.as_ptr(), y.as_ptr(), 0.0, 4, &mut m) }, MpjStatus::Ok);
    let c = tiny_model(0.0);
    let (mut a, mut b) = ([0.0; 2], [0.0; 2]);
    unsafe {
        assert_eq!(mpj_detect_mmse(m, a.as_mut_ptr(), ptr::null_mut(), 2, ptr::null_mut()), MpjStatus::Ok);
        assert_eq!(mpj_detect_mmse(c, b.as_mut_ptr(), ptr::null_mut(), 2, ptr::null_mut()), MpjStatus::Ok);
        mpj_model_free(m);
        mpj_model_free(c);
    }
    for k in 0..2 {
        assert!((a[k] - b[k]).abs() < 1e-12);
    }
}

#[test]
fn error_codes() {
    let mut m = ptr::null_mut();
    let h = [1.0; 4];
    let y = [1.0; 4];
    unsafe {
        assert_eq!(mpj_model_new_complex(2, 1, ptr::null(), y.as_ptr(), 0.0, 4, &mut m), MpjStatus::NullPointer);
        assert!(last_error().contains('h'));
        assert_eq!(mpj_model_new_complex(2, 1, h.as_ptr(), y.as_ptr(), 0.0, 8, &mut m), MpjStatus::Parameter);
        assert_eq!(mpj_model_new_complex(2, 1, h.as_ptr(), y.as_ptr(), -1.0, 4, &mut m), MpjStatus::Parameter);
        assert_eq!(mpj_model_new_complex(0, 1, h.as_ptr(), y.as_ptr(), 0.0, 4, &mut m), MpjStatus::Dimension);
        assert_eq!(mpj_model_new_complex(2, 1, h.as_ptr(), y.as_ptr(), 0.0, 4, ptr::null_mut()), MpjStatus::NullPointer);
        assert!(m.is_null());

        let zero = [0.0; 4];
        assert_eq!(mpj_model_new_complex(2, 1, zero.as_ptr(), y.as_ptr(), 0.0, 4, &mut m), MpjStatus::Ok);
        let mut cfg = mpj_config_default(2, 1);
        cfg.tau = 0.0;
        assert_eq!(
            mpj_detect_pjadmm(m, &cfg, ptr::null_mut(), ptr::null_mut(), 2, ptr::null_mut()),
            MpjStatus::DegenerateColumn
        );
        assert_eq!(mpj_detect_mmse(m, ptr::null_mut(), ptr::null_mut(), 2, ptr::null_mut()), MpjStatus::Singular);
        assert_eq!(mpj_detect_pjadmm(m, ptr::null(), ptr::null_mut(), ptr::null_mut(), 2, ptr::null_mut()), MpjStatus::NullPointer);
        mpj_model_free(m);
        mpj_model_free(ptr::null_mut());
        assert_eq!(mpj_model_unknowns(ptr::null()), 0);
    }

    let m = tiny_model(0.1);
    let mut small = [0.0; 1];
    let st = unsafe { mpj_detect_mmse(m, small.as_mut_ptr(), ptr::null_mut(), 1, ptr::null_mut()) };
    assert_eq!(st, MpjStatus::BufferTooSmall);
    let mut cfg = mpj_config_default(2, 1);
    cfg.max_iters = 0;
    let st = unsafe { mpj_detect_pjadmm(m, &cfg, ptr::null_mut(), ptr::null_mut(), 2, ptr::null_mut()) };
    assert_eq!(st, MpjStatus::Parameter);
    unsafe { mpj_model_free(m) };
}

#[test]
fn scalar_helpers() {
    assert_eq!(mpj_time_units(128, 16, 12), 22400);
    assert_eq!(mpj_time_units(128, 64, 40), 77312);
    let mut v = 0.0;
    assert_eq!(unsafe { mpj_noise_variance_from_snr(12.0, 16, &mut v) }, MpjStatus::Ok);
    assert!((v - 16.0 / 10f64.powf(1.2)).abs() < 1e-12);
    assert_eq!(unsafe { mpj_noise_variance_from_snr(12.0, 0, &mut v) }, MpjStatus::Parameter);
    assert_eq!(unsafe { mpj_noise_variance_from_snr(12.0, 1, ptr::null_mut()) }, MpjStatus::NullPointer);
    for code in 0..=10 {
        let s = unsafe { CStr::from_ptr(mpj_status_str(code)) };
        assert!(!s.to_bytes().is_empty());
        assert_ne!(s.to_str().unwrap(), "unknown status");
    }
    assert_eq!(unsafe { CStr::from_ptr(mpj_status_str(99)) }.to_str().unwrap(), "unknown status");
    assert_eq!(unsafe { CStr::from_ptr(mpj_version()) }.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_symbol() {
    let h = std::fs::read_to_string(header()).unwrap();
    for sym in [
        "MPJ_STATUS_OK",
        "typedef struct MpjModel MpjModel",
        "MpjConfig",
        "mpj_model_new_complex",
        "mpj_model_new_real",
        "mpj_model_free",
        "mpj_model_unknowns",
        "mpj_config_default",
        "mpj_detect_pjadmm",
        "mpj_detect_mmse",
        "mpj_time_units",
        "mpj_noise_variance_from_snr",
        "mpj_last_error_message",
        "mpj_status_str",
        "mpj_version",
    ] {
        assert!(h.contains(sym), "header lacks {sym}");
    }
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok_and(|o| o.status.success())
}

#[test]
fn header_compiles_as_c_and_cpp() {
    if !have_cc() {
        eprintln!("no C compiler found; skipping");
        return;
    }
    let dir = header().parent().unwrap().to_path_buf();
    for (lang, std) in [("c", "-std=c99"), ("c++", "-std=c++11")] {
        let out = Command::new("cc")
            .args(["-x", lang, std, "-fsyntax-only", "-Wall", "-Wextra", "-Werror", "-I"])
            .arg(&dir)
            .arg("-")
            .stdin(std::process::Stdio::piped())
            .spawn()
            .and_then(|mut c| {
                use std::io::Write;
                c.stdin.take().unwrap().write_all(b"#include \"mimo_pjadmm.h\"\nint main(void) { return 0; }\n")?;
                c.wait_with_output()
            })
            .unwrap();
        assert!(out.status.success(), "{lang}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn c_program_links_static_library() {
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().and_then(Path::parent).map(|d| d.join("libmimo_pjadmm_ffi.a"));
    let Some(lib) = lib.filter(|l| l.exists()) else {
        eprintln!("static library not built next to the test binary; skipping");
        return;
    };
    if !have_cc() {
        eprintln!("no C compiler found; skipping");
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let bin = tmp.path().join("smoke");
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c");
    let out = Command::new("cc")
        .arg("-std=c99")
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "link: {}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "smoke exited with {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
