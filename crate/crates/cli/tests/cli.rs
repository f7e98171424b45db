use std::path::PathBuf;
use std::process::{Command, Output};

fn lcflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcflow")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lcflow-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn mesh_check_reports_geometry() {
    let o = lcflow(&["mesh-check", "square:4"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("vertices 25, cells 32"), "{s}");
    assert!(s.contains("weakly acute true"));
    assert!(s.contains("\"quasi_uniformity_ratio\""));

    let o = lcflow(&["mesh-check", "annulus:2x12:circumcenter"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("vertices 36"));
}

#[test]
fn bad_mesh_spec_fails() {
    let o = lcflow(&["mesh-check", "hexagon:3"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot parse mesh spec"));
}

#[test]
fn run_writes_diagnostics_csv() {
    let dir = scratch("run");
    let csv = dir.join("diag.csv");
    let cfg = dir.join("run.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"scheme": "dg", "mesh": {{"kind": "square", "n": 4, "pattern": "crisscross"}},
                "k": 0.05, "T_end": 0.1, "problem": "defects",
                "output": {{"csv_path": {:?}}}}}"#,
            csv.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = lcflow(&["run", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("2 steps"));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("t,E_kin,E_ela,E_total") && lines[0].ends_with("E_J,alpha"));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn missing_config_fails() {
    let o = lcflow(&["run", "/nonexistent/config.json"]);
    assert!(!o.status.success());
}

#[test]
fn spiral_table_on_coarse_meshes() {
    let dir = scratch("table");
    let csv = dir.join("table.csv");
    let o = lcflow(&["spiral-table", "--scheme", "cg", "--h", "0.5,0.25", "--k", "0.5", "--csv", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.contains("observed order in h"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("scheme,h,k,alpha,projection,n_radial,n_angular,h_max,error"));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn consistency_study_prints_rows() {
    let o = lcflow(&["consistency", "--n", "4,8"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert_eq!(s.matches("n =   4").count(), 2);
    assert!(s.contains("observed product-rule order"));
}
