use std::fs;
use std::path::Path;
use std::process::Command;

use gmsfem::harness::{emit_table, parse_csv, run_experiment, ExperimentConfig, CACHE_ENV};

const BIN: &str = env!("CARGO_BIN_EXE_gmsfem");

fn small_config(dir: &Path, name: &str, coupling: &str) -> String {
    format!(
        r#"
seed = 7
threads = 2

[grid]
lx = 1.0
ly = 1.0
ncx = 3
ncy = 3
nf = 4

[coefficient]
source = "generated"
contrast = 1e3

[method]
coupling = "{coupling}"
basis_counts = [3, 5, 7]

[output]
dir = "{}"
name = "{name}"
rasters = true
"#,
        dir.display()
    )
}

fn gmsfem(args: &[&str], cache: Option<&Path>) -> std::process::Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    match cache {
        Some(dir) => cmd.env(CACHE_ENV, dir),
        None => cmd.env_remove(CACHE_ENV),
    };
    cmd.output().expect("binary runs")
}

#[test]
fn trivial_full_basis_reproduces_the_fine_solution() {
    for coupling in ["cg", "dg"] {
        let text = format!(
            "[grid]\nlx = 1.0\nly = 1.0\nncx = 2\nncy = 2\nnf = 2\n\
             [coefficient]\nsource = \"generated\"\ncontrast = 1.0\n\
             [method]\ncoupling = \"{coupling}\"\nsnapshots = \"all_fine\"\npou = \"bilinear\"\nselection = \"all\"\n"
        );
        let rows = run_experiment(&ExperimentConfig::from_toml_str(&text).unwrap()).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].e_l2 <= 1e-8 && rows[0].e_h1 <= 1e-8, "{coupling}: {:?}", rows[0]);
    }
}

#[test]
fn run_writes_artifacts_and_cache_hits_match_cold_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache");
    let cfg_path = tmp.path().join("exp.toml");
    fs::write(&cfg_path, small_config(&tmp.path().join("out"), "cold", "dg")).unwrap();

    let out = gmsfem(&["run", cfg_path.to_str().unwrap()], Some(&cache));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_dir(&cache).unwrap().count(), 1);
    let cold = fs::read(tmp.path().join("out/cold.csv")).unwrap();
    for ext in ["txt", "plot"] {
        assert!(tmp.path().join(format!("out/cold.{ext}")).exists());
    }
    for l in [3, 5, 7] {
        assert!(tmp.path().join(format!("out/cold_L{l}.raster")).exists());
    }

    fs::write(&cfg_path, small_config(&tmp.path().join("out"), "warm", "dg")).unwrap();
    let out = gmsfem(&["run", cfg_path.to_str().unwrap()], Some(&cache));
    assert!(out.status.success());
    assert_eq!(cold, fs::read(tmp.path().join("out/warm.csv")).unwrap());

    let text = String::from_utf8(cold).unwrap();
    let rows = parse_csv(&text).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(emit_table(&rows).unwrap().0, text);
}

#[test]
fn fine_and_table_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("exp.toml");
    fs::write(&cfg_path, small_config(&tmp.path().join("out"), "a", "cg")).unwrap();
    let out = gmsfem(&["fine", cfg_path.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("338 dofs"));
    assert!(tmp.path().join("out/a_reference.raster").exists());

    assert!(gmsfem(&["run", cfg_path.to_str().unwrap()], None).status.success());
    let csv = tmp.path().join("out/a.csv");
    let one = gmsfem(&["table", csv.to_str().unwrap()], None);
    assert!(one.status.success());
    assert_eq!(String::from_utf8_lossy(&one.stdout).lines().count(), 4);
    let two = gmsfem(&["table", csv.to_str().unwrap(), csv.to_str().unwrap()], None);
    assert!(two.status.success());
    assert!(String::from_utf8_lossy(&two.stdout).contains("without"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    let text = small_config(tmp.path(), "x", "cg") + "\n[oversampling]\nlayers = 1\nvariant = \"dg_volume\"\n";
    fs::write(&bad, text).unwrap();
    let out = gmsfem(&["run", bad.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("oversampling.variant"));

    assert_eq!(gmsfem(&["run", "/nonexistent/config.toml"], None).status.code(), Some(2));

    // a penalty far below the coercivity threshold fails numerically
    let weak = tmp.path().join("weak.toml");
    let text = small_config(tmp.path(), "y", "dg").replace("basis_counts", "gamma = 0.01\nbasis_counts");
    fs::write(&weak, text).unwrap();
    assert_eq!(gmsfem(&["run", weak.to_str().unwrap()], None).status.code(), Some(3));
}
