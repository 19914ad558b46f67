use std::f64::consts::{E, PI};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_extlab"));
    cmd.env_remove("EXTLAB_TOL");
    cmd
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&o.stdout))
    })
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn deficiency_default_and_single_piece() {
    let o = run(&["deficiency"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["indices"], serde_json::json!([2, 2]));
    let w0 = (2.0 / (E - 1.0)).sqrt();
    assert!((v["omega0"].as_f64().unwrap() - w0).abs() < 1e-11);
    assert!(v["gram_residual"]["plus"].as_f64().unwrap() < 1e-10);

    let single = configs().join("single-piece.json");
    let o = run(&["deficiency", "--config", single.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["indices"], serde_json::json!([1, 1]));
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.json", r#"{"partition": [0, 0.6, 0.5, 1]}"#);
    assert_eq!(code(&run(&["deficiency", "--config", &bad])), 2);
    let unknown = write_config(dir.path(), "unknown.json", r#"{"partitoin": [0, 1]}"#);
    assert_eq!(code(&run(&["deficiency", "--config", &unknown])), 2);
    assert_eq!(code(&run(&["deficiency", "--config", "/nonexistent/config.json"])), 2);
    assert_eq!(code(&run(&["verify", "no-such-suite"])), 2);
    assert_eq!(code(&run(&["deficiency", "--jobs", "0"])), 2);
    let o = bin().args(["deficiency"]).env("EXTLAB_TOL", "abc").output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn tolerance_override_from_environment() {
    let o = bin().args(["deficiency"]).env("EXTLAB_TOL", "1e-30").output().unwrap();
    assert_eq!(code(&o), 1);
    let tol = json(&o)["tolerance"].as_f64().unwrap();
    assert!((tol / 1e-30 - 1.0).abs() < 1e-12);
}

#[test]
fn anchor_spectra_on_lattices() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("anchors.json");
    let o = run(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(json(&o)["note"].is_string());
    let rows = csv_rows(&dir.path().join("spectrum.csv"));
    let swap: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] == "swap").collect();
    let id: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] == "identity").collect();
    assert_eq!(swap.len(), 9);
    assert_eq!(id.len(), 5);
    for (r, m) in swap.iter().zip(-4..=4) {
        assert!((r[1].parse::<f64>().unwrap() - 2.0 * PI * m as f64).abs() < 1e-8);
        assert_eq!(r[2], "1");
    }
    for (r, m) in id.iter().zip(-2..=2) {
        assert!((r[1].parse::<f64>().unwrap() - 4.0 * PI * m as f64).abs() < 1e-8);
        assert_eq!(r[2], "2");
    }
    assert!(!dir.path().join("spectrum.svg").exists());
}

#[test]
fn empty_window_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"window": [5, 6]}"#);
    let out = dir.path().join("out");
    let o = run(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        std::fs::read_to_string(out.join("spectrum.csv")).unwrap(),
        "extension,lambda,multiplicity,residual\n"
    );
}

#[test]
fn random_spectra_are_real_with_small_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("random-spectra.json");
    let o = run(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--svg"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    let exts = v["extensions"].as_array().unwrap();
    assert_eq!(exts.len(), 5);
    assert!(exts.iter().all(|e| e["max_residual"].as_f64().unwrap() < 1e-9));
    let svg = std::fs::read_to_string(dir.path().join("spectrum.svg")).unwrap();
    assert!(svg.starts_with("<?xml") && svg.ends_with("</svg>\n"));
    // At most four spectra are overlaid.
    assert_eq!(svg.matches("stroke=\"#999\"").count(), 4);
}

#[test]
fn outputs_are_byte_identical_across_runs_and_job_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("random-spectra.json");
    let cfg = cfg.to_str().unwrap();
    let oa = run(&["spectrum", "--config", cfg, "--out", a.path().to_str().unwrap(), "--svg", "--jobs", "1"]);
    let ob = run(&["spectrum", "--config", cfg, "--out", b.path().to_str().unwrap(), "--svg", "--jobs", "3"]);
    assert_eq!(oa.stdout, ob.stdout);
    for f in ["report.json", "spectrum.csv", "spectrum.svg"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let oc = run(&["boundary-matrix", "--seed", "11"]);
    let od = run(&["boundary-matrix", "--seed", "11", "--jobs", "2"]);
    assert_eq!(code(&oc), 0);
    assert_eq!(oc.stdout, od.stdout);
}

#[test]
fn reports_embed_hash_seed_and_version() {
    let v = json(&run(&["ksum", "--seed", "99", "--config", configs().join("anchors.json").to_str().unwrap()]));
    assert_eq!(v["seed"], 99);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    let h1 = v["config_hash"].as_str().unwrap().to_string();
    assert_eq!(h1.len(), 64);
    let h2 = json(&run(&["ksum"]))["config_hash"].as_str().unwrap().to_string();
    assert_ne!(h1, h2);
}

#[test]
fn verify_ksum_passes() {
    let o = run(&["verify", "ksum"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["genus_pairs"], 49);
    assert_eq!(v["failures"], serde_json::json!([]));
}

#[test]
fn addition_dirac_trivial_loop() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"loops": [{"wedge": [0, 0]}]}"#);
    let out = dir.path().join("out");
    let o = run(&["verify", "addition-dirac", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&out.join("pairing.csv"));
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r[3] == "0" && r[6] == "true"));
}

#[test]
fn thm_main_on_anchors_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"extensions": [{"anchor": "swap"}], "loops": [{"monomial": -1}, {"monomial": 1}, {"monomial": 2}]}"#,
    );
    let o = run(&["verify", "thm-main", "--config", &cfg]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["passed"], 3);
}

#[test]
fn unstable_pairings_exit_3() {
    // The eleventh and thirteenth seed-4 extensions are nearly diagonal; their plateaus do not settle.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"extensions": [{"random": {"count": 13, "seed": 4}}], "loops": [{"monomial": 1}]}"#,
    );
    let o = run(&["verify", "thm-main", "--config", &cfg]);
    assert_eq!(code(&o), 3);
    let unstable: Vec<String> = json(&o)["unstable"]
        .as_array()
        .unwrap()
        .iter()
        .map(|u| u["extension"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(unstable, ["random4-10", "random4-12"]);
}

#[test]
fn wedge_fourier_loops_pair_to_minus_total_winding() {
    let cfg = configs().join("wedge-fourier.json");
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["pair", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&dir.path().join("pairing.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][3].as_str(), rows[0][4].as_str()), ("1", "-1"));
    assert_eq!((rows[1][3].as_str(), rows[1][4].as_str()), ("0", "0"));
}

#[test]
fn commutator_suite_passes() {
    let o = run(&["verify", "commutator"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["failures"], 0);
}
