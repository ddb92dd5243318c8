use std::fs;
use std::process::Command;

fn invflow(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_invflow"))
        .args(args)
        .env("INVFLOW_THREADS", "2")
        .output()
        .expect("spawn invflow");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn gallery_example_3_3_meets_checklist() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, stdout, _) = invflow(&["gallery", "example-3-3", "--out", out]);
    assert_eq!(code, 0, "{stdout}");
    assert!(!stdout.contains("[FAIL]"));
    for f in ["report.txt", "margins.csv", "phase.svg"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let csv = fs::read_to_string(dir.path().join("margins.csv")).unwrap();
    assert!(csv.starts_with("condition,patch_id,t,x_1,x_2,margin"));
}

#[test]
fn gallery_remark_2_2_has_no_existence_claim() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = invflow(&["gallery", "remark-2-2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("applicable: none"), "{report}");
}

#[test]
fn strict_violation_exits_2() {
    let (code, stdout, _) = invflow(&["check", "rotation-disk", "--kinds", "bound-strict"]);
    assert_eq!(code, 2);
    assert!(stdout.contains("Violated"));
}

#[test]
fn certified_check_exits_0() {
    let (code, stdout, _) = invflow(&["check", "rotation-disk", "--kinds", "bound-weak"]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("th-main"));
}

#[test]
fn parse_error_exits_1_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "name = \"bad\"\n\n[domain]\nkind = \"ball\"\nradius = \"wide\"\n").unwrap();
    let (code, _, stderr) = invflow(&["check", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stderr.contains("bad.toml"), "{stderr}");
    assert!(stderr.contains(":5") || stderr.contains("line 5"), "{stderr}");
}

#[test]
fn unknown_target_and_bad_flag_exit_1() {
    assert_eq!(invflow(&["check", "no-such-entry"]).0, 1);
    assert_eq!(invflow(&["check", "g1", "--format", "png"]).0, 1);
    assert_eq!(invflow(&["gallery", "no-such-entry"]).0, 1);
}

#[test]
fn periodic_refused_without_theorem_unless_forced() {
    let (code, stdout, _) = invflow(&["periodic", "example-3-1"]);
    assert_eq!(code, 2);
    assert!(stdout.contains("--force"));
}

#[test]
fn periodic_linear_converges_and_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = invflow(&["periodic", "linear-periodic", "--out", dir.path().to_str().unwrap(), "--format", "csv"]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("Converged"));
    assert!(dir.path().join("trajectory_0.csv").exists());
    assert!(!dir.path().join("phase.svg").exists());
}

#[test]
fn star_d_set_is_strict() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = invflow(&["star", "d-set", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("Strict"));
    let theta = fs::read_to_string(dir.path().join("theta.csv")).unwrap();
    assert!(theta.lines().count() > 1000);
}

#[test]
fn star_a_set_with_center_is_not_strict() {
    let (code, stdout, _) = invflow(&["star", "a-set", "--center", "0,0"]);
    assert_eq!(code, 2, "{stdout}");
    assert!(stdout.contains("StarNotStrict"));
}

#[test]
fn invariance_reports_escape_for_example_3_1() {
    let (code, stdout, _) = invflow(&["invariance", "example-3-1", "--samples", "50"]);
    assert_eq!(code, 2);
    assert!(stdout.contains("escape from"));
}

#[test]
fn same_seed_same_margins() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        invflow(&["check", "g2", "--seed", "7", "--format", "csv", "--out", d.path().to_str().unwrap()]);
    }
    let ma = fs::read(a.path().join("margins.csv")).unwrap();
    let mb = fs::read(b.path().join("margins.csv")).unwrap();
    assert!(!ma.is_empty());
    assert_eq!(ma, mb);
}
