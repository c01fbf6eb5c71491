use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ccm(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_ccm")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "ccm {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

#[test]
fn loops_lists_the_census() {
    let out = ccm(&["loops", "--q", "6", "--lmax", "12"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("bits,length,weight"));
    assert_eq!(lines.count(), 32);
}

#[test]
fn characterize_reads_led_files() {
    let out = ccm(&["characterize", "--led", &data("cubic.led"), "--ibo", "10", "--ebn0", "10,20"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let c: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("C "))
        .map(|v| v.trim().parse().unwrap())
        .unwrap();
    assert!((c - 0.2005).abs() < 1e-3, "{text}");
    assert!(text.contains("ebn0_db,equivalent_ebn0_db"));
}

#[test]
fn negative_back_off_is_accepted() {
    ccm(&["characterize", "--ibo", "-3"]);
}

#[test]
fn simulate_writes_csv_and_config_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "scheme = bpsk\nled = {}\nibo_db = 0\nebn0_db = 0, 2\nmax_bits = 25400\nm = 254\n",
            data("linear.led")
        ),
    )
    .unwrap();
    let csv = dir.path().join("ber.csv");
    ccm(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--ebn0",
        "1",
        "--out",
        csv.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "ebn0_db,bits,errors,ber,equivalent_ebn0_db,C,sigma_eta_sq,flag");
    assert_eq!(rows.len(), 2, "{text}");
    assert!(rows[1].starts_with("1,"));
}

#[test]
fn optimize_then_bound_and_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let lut = dir.path().join("g.lut");
    let lut_s = lut.to_str().unwrap();
    ccm(&[
        "optimize", "--q", "4", "--p", "16", "--ibo", "10", "--max-iter", "60", "--out", lut_s,
        "--report", dir.path().join("report.txt").to_str().unwrap(),
    ]);
    assert!(fs::read_to_string(dir.path().join("report.txt")).unwrap().contains("final objective"));

    let out = ccm(&["bound", "--q", "4", "--ibo", "10", "--lut", lut_s, "--ebn0", "8,12"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let bounds: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(bounds.len(), 2);
    assert!(bounds[1] < bounds[0]);

    let out = ccm(&["spectrum", "--q", "4", "--lut", lut_s]);
    assert!(String::from_utf8(out.stdout).unwrap().lines().count() > 1);
}

#[test]
fn bad_lut_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let lut = dir.path().join("bad.lut");
    fs::write(&lut, "index,z,s\n0,0,0\n1,0.3333333333333333,0.6\n2,0.6666666666666666,0.4\n3,1,1\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ccm"))
        .args(["spectrum", "--lut", lut.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
