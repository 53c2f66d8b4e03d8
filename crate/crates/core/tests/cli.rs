use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_mimo-pjadmm");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("MIMO_PJADMM_SEED").output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn time_units_row() {
    let out = stdout(&run(&["time-units", "--nt", "16", "--nr", "128", "--iters", "12"]));
    assert_eq!(out, "nt,nr,t_iters,detector,time_units\n16,128,12,pjadmm,22400\n");
}

#[test]
fn table_with_references() {
    let out = stdout(&run(&["time-units", "--table1"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 1 + 4 + 4 + 4);
    assert!(lines.contains(&"64,128,40,pjadmm,77312"));
    assert!(lines.contains(&"64,128,,mmse,2195000"));
    assert!(lines.contains(&"64,128,,altmin,1409000"));
}

#[test]
fn zero_trials_is_rejected() {
    let o = run(&["ber-sweep", "--nt", "4", "--nr", "8", "--trials", "0"]);
    assert!(!o.status.success());
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("--trials"));
}

#[test]
fn bad_flags_are_rejected() {
    for args in [
        &["ber-sweep", "--snr", "0:0:4"][..],
        &["ber-sweep", "--qam", "8"],
        &["ber-sweep", "--rho", "-1"],
        &["iter-sweep", "--iters", "0,4"],
        &["ber-sweep", "--detector", "zf"],
    ] {
        let o = run(args);
        assert!(!o.status.success(), "{args:?}");
        assert!(o.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn seeded_runs_are_byte_identical() {
    let args = ["ber-sweep", "--nt", "4", "--nr", "16", "--snr", "0:5:10", "--trials", "200", "--seed", "7"];
    let a = stdout(&run(&args));
    let b = stdout(&run(&args));
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert_eq!(lines.next(), Some("snr_db,nt,nr,detector,t_iters,trials,bit_errors,ber,ci_half_width"));
    assert_eq!(lines.count(), 6);

    let env = Command::new(BIN)
        .args(&args[..args.len() - 2])
        .env("MIMO_PJADMM_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(stdout(&env), a);

    let threads = stdout(&run(&[&["--threads", "1"][..], &args[..]].concat()));
    assert_eq!(threads, a);
}

#[test]
fn json_rows_mirror_csv() {
    let args = ["iter-sweep", "--nt", "2", "--nr", "8", "--snr", "6", "--iters", "2,8", "--trials", "50"];
    let csv = stdout(&run(&args));
    let json = stdout(&run(&[&args[..], &["--format", "json"]].concat()));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), csv.lines().count() - 1);
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    for (row, line) in rows.iter().zip(csv.lines().skip(1)) {
        let obj = row.as_object().unwrap();
        assert_eq!(obj.len(), header.len());
        for (key, field) in header.iter().zip(line.split(',')) {
            let value = &obj[*key];
            let text = value.as_str().map(str::to_string).unwrap_or_else(|| value.to_string());
            let same = text == field
                || text.parse::<f64>().ok().zip(field.parse::<f64>().ok()).is_some_and(|(a, b)| a == b);
            assert!(same, "{key}: {text} vs {field}");
        }
    }
    assert_eq!(rows[0]["detector"], "mmse");
}

#[test]
fn output_file_is_written_whole() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tu.json");
    let o = run(&["time-units", "--format", "json", "--output", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v[0]["time_units"], 22400);

    let missing = dir.path().join("no/such/dir/out.csv");
    let o = run(&["time-units", "--output", missing.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!missing.exists());
}

fn write_instance(dir: &Path, text: &str) -> String {
    let p = dir.join("inst.txt");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn detect_instance_file() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // H = [[1, i], [1, -1], [i, 2]], x = (s+si, s-si)
    let h = [[(1.0, 0.0), (0.0, 1.0)], [(1.0, 0.0), (-1.0, 0.0)], [(0.0, 1.0), (2.0, 0.0)]];
    let x = [(s, s), (s, -s)];
    let mut text = String::from("3 2\n");
    let mut y = Vec::new();
    for row in h {
        let mut acc = (0.0, 0.0);
        for (hc, xc) in row.iter().zip(x) {
            acc.0 += hc.0 * xc.0 - hc.1 * xc.1;
            acc.1 += hc.0 * xc.1 + hc.1 * xc.0;
            text.push_str(&format!("{} {} ", hc.0, hc.1));
        }
        text.push('\n');
        y.push(acc);
    }
    for (re, im) in y {
        text.push_str(&format!("{re} {im} "));
    }
    text.push('\n');
    let dir = tempfile::tempdir().unwrap();
    let path = write_instance(dir.path(), &text);
    for det in ["pjadmm", "mmse"] {
        let out = stdout(&run(&["detect", "--instance", &path, "--detector", det, "--iters", "3000", "--delta", "1e-15"]));
        let mut lines = out.lines();
        assert_eq!(lines.next(), Some("user,soft_re,soft_im,hard_re,hard_im"));
        let hard: Vec<(f64, f64)> = lines
            .map(|l| {
                let f: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
                (f[3], f[4])
            })
            .collect();
        assert_eq!(hard, x.to_vec(), "{det}");
    }
}

#[test]
fn malformed_instance_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_instance(dir.path(), "2 1\n1 0\n1 zero\n1 0 1 0\n");
    let o = run(&["detect", "--instance", &path]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn overloaded_shape_warns() {
    let o = run(&["ber-sweep", "--nt", "4", "--nr", "2", "--snr", "20", "--trials", "5", "--detector", "pjadmm"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}
