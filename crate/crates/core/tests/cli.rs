//! End-to-end runs of the `femfct` binary.

use std::path::Path;
use std::process::Command;

use femfct::study::{read_space_csv, read_time_csv};

fn femfct() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_femfct"));
    cmd.env("RUST_LOG", "error");
    cmd
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name).display().to_string()
}

#[test]
fn space_study_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("space.csv");
    let status = femfct()
        .args(["--grid", "fk", "--levels", "1..3", "--scheme", "linear_fct", "--t-end", "0.1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let rows = read_space_csv(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    for pair in rows.windows(2) {
        for (coarse, fine) in pair[0].errors().iter().zip(pair[1].errors()) {
            assert!(fine < *coarse, "{pair:?}");
        }
    }
    assert!(rows[0].eoc.iter().all(Option::is_none));
    assert!(rows[2].eoc.iter().all(Option::is_some));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("study.cfg");
    let out = dir.path().join("time.csv");
    std::fs::write(
        &config,
        format!(
            "# time study\nstudy = time\nscheme = galerkin\nlevels = 2\ntau = 0.05\nt-end = 0.5\nout = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let status = femfct().arg("--config").arg(&config).args(["--time-runs", "3"]).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let rows = read_time_csv(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2].tau, 0.0125);
    assert!(rows[1].eoc_l2l2.is_some());
}

#[test]
fn unstructured_grid_from_file() {
    let output = femfct()
        .args(["--mesh-file", &data("grid2_level0.mesh"), "--levels", "0..1", "--t-end", "0.05"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let rows = read_space_csv(output.stdout.as_slice()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!((rows[0].h / rows[1].h - 2.0).abs() < 1e-12);
}

#[test]
fn invalid_input_is_rejected() {
    for args in [
        vec!["--limiter", "constant:2"],
        vec!["--levels", "3..1"],
        vec!["--scheme", "upwind"],
        vec!["--tau", "0.3"],
    ] {
        let output = femfct().args(&args).output().unwrap();
        assert_eq!(output.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&output.stderr).contains("error"));
    }
}

#[test]
fn missing_mesh_file_is_an_error() {
    let output = femfct().args(["--mesh-file", "/nonexistent/mesh.txt"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
}
