use std::path::Path;
use std::process::{Command, Output};

fn cardioem(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cardioem"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn config_applies_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let o = cardioem(&["--set", "time.beats=3", "--set", "activation.ta_max=2.0e5", "config"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("beats = 3"), "{text}");
    assert!(text.contains("ta_max = 200000.0"), "{text}");
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cardioem(&["--set", "time.dt_s=-1", "config"], dir.path()).status.code(), Some(3));
    assert_eq!(cardioem(&["--set", "time", "config"], dir.path()).status.code(), Some(3));
    assert_eq!(cardioem(&["--set", "time.unknown_key=1", "config"], dir.path()).status.code(), Some(3));
    assert_eq!(cardioem(&["-c", "missing.toml", "config"], dir.path()).status.code(), Some(5));
    assert_eq!(cardioem(&["no-such-command"], dir.path()).status.code(), Some(2));
}

#[test]
fn config_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "[time]\nbeats = 4\n").unwrap();
    let o = cardioem(&["-c", "run.toml", "config"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("beats = 4"));
}

#[test]
fn mesh_and_fiber_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = cardioem(
        &["mesh-gen", "--out", "lv.mesh", "--fine-out", "fine.mesh", "--vtk", "lv.vtk"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mesh = cardioem::geometry::read_mesh(dir.path().join("lv.mesh")).unwrap();
    let fine = cardioem::geometry::read_mesh(dir.path().join("fine.mesh")).unwrap();
    assert_eq!(fine.n_cells(), 8 * mesh.n_cells());
    assert!(std::fs::read_to_string(dir.path().join("lv.vtk")).unwrap().starts_with("# vtk DataFile"));

    let o = cardioem(&["fibers", "--out", "fibers.vtk"], dir.path());
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("fibers.vtk")).unwrap();
    for name in ["fiber", "sheet", "normal"] {
        assert!(text.contains(&format!("VECTORS {name} double")), "{name}");
    }

    // A run on the written mesh file.
    let o = cardioem(&["--set", "geometry.mesh_file=\"lv.mesh\"", "check"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
}

#[test]
fn check_reports_every_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let o = cardioem(&["check", "--json", "checks.json"], dir.path());
    assert!(o.status.success());
    let lines: Vec<String> = stdout(&o).lines().map(str::to_owned).collect();
    assert!(lines.len() >= 9);
    assert!(lines.iter().all(|l| l.starts_with("[pass]")), "{lines:?}");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("checks.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), lines.len());
}

#[test]
fn unload_writes_mesh_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = cardioem(&["unload", "--pressure-mmhg", "5", "--out", "ref.mesh", "--report", "ref.json"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ref.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], true);
    assert!(report["verified_ratio"].as_f64().unwrap() <= 1e-4);
    let recovered = cardioem::geometry::read_mesh(dir.path().join("ref.mesh")).unwrap();
    recovered.validate().unwrap();
}

#[test]
fn short_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = cardioem(
        &["--set", "time.t_end_s=0.005", "run", "--dt-s", "1e-3", "--out", "out"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["config.toml", "series.csv", "report.json"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
    let series = cardioem::driver::read_series_csv(dir.path().join("out/series.csv")).unwrap();
    assert_eq!(series.len(), 6);
}
