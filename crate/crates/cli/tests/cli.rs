use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn nlscat(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlscat"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn classify_zero_potential() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlscat(&["classify"], dir.path());
    assert!(o.status.success());
    let js: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("classify.json")).unwrap()).unwrap();
    assert_eq!(js["classification"], "exceptional");
    assert_eq!(js["a"].as_f64(), Some(1.0));
}

#[test]
fn coeffs_on_poschl_teller_are_unitary() {
    let dir = tempfile::tempdir().unwrap();
    let pt = fixture("poschl_teller_1.json");
    let o = nlscat(&["coeffs", "--potential", pt.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("coeffs.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "unitarity_defect").unwrap();
    let mut rows = 0;
    for line in lines {
        let d: f64 = line.split(',').nth(col).unwrap().parse().unwrap();
        assert!(d < 1e-8);
        rows += 1;
    }
    assert_eq!(rows, 64);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let sw = fixture("square_well_generic.json");
    for d in [&a, &b] {
        assert!(nlscat(&["decay", "--times", "0.5,2", "--potential", sw.to_str().unwrap()], d.path())
            .status
            .success());
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("decay.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn verify_passes_on_bundled_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlscat(&["verify"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let js: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(js["pass"], true);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = nlscat(&["classify", "--potential", "/nonexistent/v.json"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    let pt = fixture("poschl_teller_1.json");
    let bound = nlscat(&["smatrix", "--k", "1.5", "--potential", pt.to_str().unwrap()], dir.path());
    assert_eq!(bound.status.code(), Some(4));
    let err: serde_json::Value = serde_json::from_slice(&bound.stderr).unwrap();
    assert_eq!(err["error"], "Hypothesis");
    let early = nlscat(&["kernel", "--t", "0.01"], dir.path());
    assert_eq!(early.status.code(), Some(3));
    let bad_p = nlscat(&["evolve-nls", "--t", "1", "--p", "3"], dir.path());
    assert_eq!(bad_p.status.code(), Some(2));
}

#[test]
fn recover_lambda_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlscat(
        &[
            "recover-lambda",
            "--true-lambda",
            "-0.05",
            "--grid-xmax",
            "80",
            "--grid-n",
            "1024",
            "--kmax",
            "5",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let js: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("recover_lambda.json")).unwrap()).unwrap();
    for key in ["epsilons", "raw", "extrapolated", "calibrated", "denominator", "horizon", "defects"] {
        assert!(js.get(key).is_some(), "{key}");
    }
    let hat = js["calibrated"].as_f64().unwrap();
    assert!((hat + 0.05).abs() < 0.005, "{hat}");
}
