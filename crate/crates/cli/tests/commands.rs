use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

fn run(sub: &str, config: &Path, extra: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_matdist"))
        .arg(sub)
        .arg("--config")
        .arg(config)
        .args(extra)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_config(dir: &TempDir, body: &str) -> PathBuf {
    let path = dir.path().join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn dims_table_for_homog_pair() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "[law]\nname = \"homog_pair\"\n[output]\ndir = \"nested/out\"\n",
    );
    let (code, err) = run("dims", &cfg, &[]);
    assert_eq!(code, 0, "{err}");
    let out = dir.path().join("nested/out");
    let v = json(out.join("dims.json"));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["complete"], true);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r["dims"]["dim_base"] == 4));
    let csv = fs::read_to_string(out.join("dims.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
    assert!(csv.starts_with("t,x1,x2,x3,dim_full,dim_base,"));
}

#[test]
fn malformed_config_exits_2_with_line() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[law]\nname = \"homog_pair\"\n[grid]\nt = [0.0, \n");
    let (code, err) = run("dims", &cfg, &[]);
    assert_eq!(code, 2);
    assert!(err.contains("line"), "{err}");
    let (code, _) = run("dims", &dir.path().join("missing.toml"), &[]);
    assert_eq!(code, 2);
}

#[test]
fn classify_verdicts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "[law]\nname = \"aging_pair\"\n[output]\ndir = \"aging\"\n",
    );
    assert_eq!(run("classify", &cfg, &[]).0, 0);
    let v = json(dir.path().join("aging/classify.json"));
    assert_eq!(v["report"]["smooth_aging"]["holds"], true);
    assert_eq!(v["report"]["smooth_remodeling"]["holds"], false);
    assert!(v["report"]["smooth_aging"]["criterion"]
        .as_str()
        .unwrap()
        .contains("aging"));

    let cfg = write_config(
        &dir,
        "[law]\nname = \"homog_pair\"\n[output]\ndir = \"homog\"\n",
    );
    assert_eq!(run("classify", &cfg, &[]).0, 0);
    let v = json(dir.path().join("homog/classify.json"));
    assert_eq!(v["report"]["smooth_uniform_remodeling"]["holds"], true);
}

#[test]
fn sweep_failure_writes_partial_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "[law]\nname = \"homog_pair\"\n[grid]\nx1 = [1.0, 3.0]\n",
    );
    let (code, err) = run("classify", &cfg, &[]);
    assert_eq!(code, 3, "{err}");
    let v = json(dir.path().join("out/classify.json"));
    assert_eq!(v["complete"], false);
    assert_eq!(v["report"]["complete"], false);
    assert_eq!(v["failed_points"].as_array().unwrap().len(), 3);
}

#[test]
fn seed_and_out_overrides() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "[law]\nname = \"homog_pair\"\n[grid]\nt_count = 1\nx1_count = 1\n",
    );
    let out = dir.path().join("elsewhere");
    let (code, _) = run(
        "classify",
        &cfg,
        &["--seed", "11", "--out", out.to_str().unwrap()],
    );
    assert_eq!(code, 0);
    let v = json(out.join("classify.json"));
    assert_eq!(v["report"]["config"]["seed"], 11);
}

#[test]
fn isomorphism_on_implant() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "[law]\nname = \"implant\"\n[isomorphism]\nfrom = [0.0, -1.0, 0.0, 0.0]\nto = [0.0, 1.0, 0.0, 0.0]\nprobe = true\n[grid]\nt_count = 1\n",
    );
    let (code, err) = run("isomorphism", &cfg, &[]);
    assert_eq!(code, 0, "{err}");
    let v = json(dir.path().join("out/isomorphism.json"));
    assert_eq!(v["status"], "found");
    assert!(v["residual"].as_f64().unwrap() <= 1e-6);
    assert_eq!(v["p"].as_array().unwrap().len(), 3);
    assert_eq!(v["symmetry_algebra"].as_array().unwrap().len(), 3);
    let t = json(dir.path().join("out/transitivity.json"));
    assert_eq!(t["uniform_remodeling_evidence"], true);
    let csv = fs::read_to_string(dir.path().join("out/transitivity.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn isomorphism_across_aging_is_not_found() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "[law]\nname = \"aging_pair\"\n[isomorphism]\nfrom = [0.0, 0.0, 0.0, 0.0]\nto = [1.0, 0.0, 0.0, 0.0]\n[sampling]\nn_starts = 2\n",
    );
    assert_eq!(run("isomorphism", &cfg, &[]).0, 0);
    let v = json(dir.path().join("out/isomorphism.json"));
    assert_eq!(v["status"], "not_found");
}

#[test]
fn trace_on_graded_keeps_x1() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "[law]\nname = \"graded\"\n[trace]\nseed = [0.0, 0.5, 0.0, 0.0]\nvariant = \"state_t\"\nsteps = 10\nstep = 0.02\nfreeze_time = true\n",
    );
    let (code, err) = run("trace", &cfg, &[]);
    assert_eq!(code, 0, "{err}");
    let mut r = csv::Reader::from_path(dir.path().join("out/trace.csv")).unwrap();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec.unwrap();
        let x1: f64 = rec[3].parse().unwrap();
        assert!((x1 - 0.5).abs() <= 1e-4 * 10.0 * 0.02);
        assert_eq!(&rec[6], "2");
        rows += 1;
    }
    assert_eq!(rows, 4 * 11);
    let v = json(dir.path().join("out/trace.json"));
    assert_eq!(v["freeze_time"]["passed"], true);
}

#[test]
fn trace_without_leaf_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "[law]\nname = \"aging_pair\"\n[trace]\nvariant = \"body_material\"\ndirections = [[1.0, 0.0, 0.0, 0.0]]\n",
    );
    let (code, _) = run("trace", &cfg, &[]);
    assert_eq!(code, 3);
    let v = json(dir.path().join("out/trace.json"));
    assert_eq!(v["complete"], false);
    assert!(v["error"].as_str().unwrap().contains("orthogonal"));
}

#[test]
fn remodel_scalar_exponential() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("t,p11,p12,p13,p21,p22,p23,p31,p32,p33,rho\n");
    for k in 0..11 {
        let t = k as f64 * 0.1;
        let s = (-0.1 * t).exp();
        let rho = 2.0 * (0.3 * t).exp();
        text.push_str(&format!("{t},{s},0,0,0,{s},0,0,0,{s},{rho}\n"));
    }
    fs::write(dir.path().join("process.csv"), text).unwrap();
    let cfg = write_config(
        &dir,
        "[law]\nname = \"homog_isotropic\"\n[remodel]\nprocess = \"process.csv\"\nrho0 = 2.0\n",
    );
    let (code, err) = run("remodel", &cfg, &[]);
    // Scalings are not symmetries of this law, so membership fails but the report is complete.
    assert_eq!(code, 0, "{err}");
    let v = json(dir.path().join("out/remodel.json"));
    assert_eq!(v["growth"]["overall"], "growth");
    assert_eq!(v["mass"]["passed"], true);
    assert_eq!(v["membership"]["passed"], false);
    assert!(fs::read_to_string(dir.path().join("out/remodel.csv"))
        .unwrap()
        .starts_with("t,det_p,trace_l"));
}

#[test]
fn remodel_requires_process() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[law]\nname = \"homog_pair\"\n");
    assert_eq!(run("remodel", &cfg, &[]).0, 2);
}

#[test]
fn classify_is_reproducible_across_worker_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "[law]\nname = \"graded\"\n[grid]\nt_count = 2\nx1_count = 5\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(
        run(
            "classify",
            &cfg,
            &["--jobs", "1", "--out", a.to_str().unwrap()]
        )
        .0,
        0
    );
    assert_eq!(
        run(
            "classify",
            &cfg,
            &["--jobs", "4", "--out", b.to_str().unwrap()]
        )
        .0,
        0
    );
    assert_eq!(
        fs::read(a.join("classify.json")).unwrap(),
        fs::read(b.join("classify.json")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("classify.csv")).unwrap(),
        fs::read(b.join("classify.csv")).unwrap()
    );
}
