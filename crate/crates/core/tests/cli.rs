mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use common::population;
use otr_decomp::simstudy::DgpMode;
use otr_decomp::Dataset;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_otr-decomp"))
}

fn write_data(dir: &Path) -> PathBuf {
    let pop = population(DgpMode::Constant, 1.0, 20_000, 8);
    let ds = pop.data.select(&common::sample_rows(&pop, 400, 9)).unwrap();
    let path = dir.join("data.csv");
    ds.save(&path).unwrap();
    path
}

const ROLES: &str = r#"
[data]
path = "data.csv"

[roles]
y = "Y"
m = "M"
r = "R"
x = ["X1", "X2", "X3"]
c = ["C"]
h1 = ["X1", "X2"]
"#;

fn config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn run(cmd: &str, cfg: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    bin()
        .arg(cmd)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn configs() -> Vec<(&'static str, String)> {
    vec![
        ("otr", format!("seed = 1\n{ROLES}")),
        (
            "decompose",
            format!("seed = 2\n{ROLES}\n[decompose]\nbootstrap = 20\n"),
        ),
        (
            "sensitivity",
            format!(
                "seed = 3\n{ROLES}\n[sensitivity]\ngrid = [[0.5, 0.5], [1.0, 0.5]]\ndraws = 2\nbootstrap = 10\n"
            ),
        ),
        (
            "benchmark",
            format!(
                "seed = 4\n{ROLES}\n[benchmark]\ncovariate = \"X3\"\ngrid = [[1.0, 1.0], [2.0, 1.0]]\nu_kind = \"binary\"\n\n[sensitivity]\ndraws = 2\nbootstrap = 0\n"
            ),
        ),
        (
            "simstudy",
            "seed = 5\n[simstudy]\nmodes = [\"constant\"]\nsp = [[1.0, 1.0]]\npopulation_size = 20000\nn_grid = [200, 300, 400]\niterations = 10\nadjust = [false]\nbootstrap = 0\n"
                .to_string(),
        ),
    ]
}

#[test]
fn every_command_is_deterministic_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path());
    for (cmd, body) in configs() {
        let cfg = config(dir.path(), &body);
        let a = dir.path().join(format!("{cmd}-a"));
        let b = dir.path().join(format!("{cmd}-b"));
        let ra = run(cmd, &cfg, &a, &["--workers", "1"]);
        assert!(ra.status.success(), "{cmd}: {}", String::from_utf8_lossy(&ra.stderr));
        let rb = run(cmd, &cfg, &b, &["--workers", "3"]);
        assert!(rb.status.success(), "{cmd}: {}", String::from_utf8_lossy(&rb.stderr));
        let (fa, fb) = (read_all(&a), read_all(&b));
        assert_eq!(fa, fb, "{cmd} outputs differ");
        let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
        assert!(names.contains(&"summary.json") && names.contains(&"manifest.json"), "{cmd}: {names:?}");
        assert!(names.iter().any(|n| n.starts_with("table_")), "{cmd}: {names:?}");
        assert!(names.iter().any(|n| n.starts_with("plot_")), "{cmd}: {names:?}");
        let manifest: serde_json::Value = serde_json::from_slice(&fa.iter().find(|(n, _)| n == "manifest.json").unwrap().1).unwrap();
        assert_eq!(manifest["command"], cmd);
        assert_eq!(manifest["files"].as_array().unwrap().len(), fa.len() - 1);
    }
}

#[test]
fn simstudy_toy_grid_writes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (_, body) = configs().pop().unwrap();
    let cfg = config(dir.path(), &body);
    let out = dir.path().join("out");
    let r = run("simstudy", &cfg, &out, &[]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let table = std::fs::read_to_string(out.join("table_metrics.csv")).unwrap();
    assert!(table.lines().count() > 3);
}

#[test]
fn missing_seed_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path());
    let cfg = config(dir.path(), ROLES);
    let r = run("otr", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("seed"));
    let r = run("otr", &cfg, &dir.path().join("out"), &["--seed", "4"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path());
    let out = dir.path().join("out");
    let unknown = config(dir.path(), &format!("seed = 1\nbogus = 3\n{ROLES}"));
    assert_eq!(run("otr", &unknown, &out, &[]).status.code(), Some(1));
    let no_data = config(dir.path(), "seed = 1\n[data]\npath = \"nope.csv\"\n[roles]\ny = \"Y\"\nm = \"M\"\nr = \"R\"\n");
    assert_eq!(run("decompose", &no_data, &out, &[]).status.code(), Some(1));
    let bad_km = config(
        dir.path(),
        &format!("seed = 1\n{ROLES}\n[benchmark]\ncovariate = \"X3\"\ngrid = [[0.0, 1.0]]\n"),
    );
    assert_eq!(run("benchmark", &bad_km, &out, &[]).status.code(), Some(1));
    let r = bin().args(["otr", "--config", "/definitely/missing.toml"]).output().unwrap();
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn single_group_data_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("data.csv"), "Y,M,R\n1.0,1,1\n0.5,0,1\n2.0,1,1\n").unwrap();
    let cfg = config(dir.path(), "seed = 1\n[data]\npath = \"data.csv\"\n[roles]\ny = \"Y\"\nm = \"M\"\nr = \"R\"\n");
    let r = run("decompose", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr).to_lowercase();
    assert!(err.contains("group"), "{err}");
}

#[test]
fn dataset_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_data(dir.path());
    let roles = otr_decomp::dataset::load_dataset(&path, &otr_decomp::RoleMap {
        x: vec!["X1".into(), "X2".into(), "X3".into()],
        c: vec!["C".into()],
        ..otr_decomp::RoleMap::new("Y", "M", "R")
    })
    .unwrap();
    let again_path = dir.path().join("again.csv");
    roles.save(&again_path).unwrap();
    let again: Dataset = otr_decomp::dataset::load_dataset(&again_path, &roles.role_map()).unwrap();
    let bits = |d: &Dataset| -> Vec<u64> {
        d.y().iter().chain(d.x().iter().chain(d.c()).flat_map(|c| c.values.iter())).map(|v| v.to_bits()).collect()
    };
    assert_eq!(bits(&roles), bits(&again));
    assert_eq!(roles.m(), again.m());
    assert_eq!(roles.r(), again.r());
}
