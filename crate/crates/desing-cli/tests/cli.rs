use std::path::PathBuf;
use std::process::{Command, Output};

const FAMILY: &str = "z^d*w^(d-1) - x^(d-1)*y^d";

fn desing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_desing")).args(args).output().expect("spawn desing")
}

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "fixtures", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn first_branch_matches_fixture() {
    let o =
        desing(&["--family", FAMILY, "--d", "5", "--branch", "w,y,x,w,x,w,x", "--fixture", &fixture("bm_d5_first.md")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("| Year"));
}

#[test]
fn villamayor_branch_matches_fixture() {
    let o = desing(&[
        "--family",
        FAMILY,
        "--d",
        "5",
        "--variant",
        "v",
        "--branch",
        "w,y,x,w^4,x,w^2,x,w^2,x",
        "--fixture",
        &fixture("v_d5.md"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn year_two_table_matches_and_reports_budget() {
    let o = desing(&["--family", FAMILY, "--d", "5", "--max-years", "2", "--fixture", &fixture("bm_d5_year2.md")]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("not reached"));
    assert!(!stderr(&o).contains("fixture:"));
}

#[test]
fn second_branch_mismatch_names_year_and_column() {
    let o = desing(&["--family", FAMILY, "--d", "5", "--branch", "w,y,w,y", "--fixture", &fixture("bm_d5_second.md")]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    let lines: Vec<&str> = err.lines().filter(|l| l.starts_with("fixture:")).collect();
    assert_eq!(lines.len(), 2, "{err}");
    assert!(lines[0].contains("year 4 chart U_wywy column inv"));
    assert!(lines[1].contains("year 4 chart U_wywy column Centre"));
}

#[test]
fn perturbed_fixture_is_reported() {
    let golden =
        std::fs::read_to_string(fixture("bm_d5_first.md")).unwrap().replace("z^5 - x^2*y^4*w ", "z^5 - x^2*y^4*w^3 ");
    let dir = std::env::temp_dir().join(format!("desing-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("perturbed.md");
    std::fs::write(&path, golden).unwrap();
    let o = desing(&["--family", FAMILY, "--d", "5", "--branch", "w,y,x,w,x,w,x", "--fixture", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("year 6 chart U_wyxwxw column Strict transform"), "{}", stderr(&o));
}

#[test]
fn branch_drop_report() {
    let o = desing(&[
        "--family",
        FAMILY,
        "--d",
        "6",
        "--variant",
        "v",
        "--sweep-report",
        "--branch",
        "w,y,x,w^4,x,w^2,x,w^2,x,(w,x)^(d-5),w^(7d-25)",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("order drops below 6 in year 33"), "{}", stdout(&o));
}

#[test]
fn tree_drop_report() {
    let o = desing(&["--ideal", "z^2 - x^2*y^3", "--sweep-report"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("year  charts  drops"));
    assert!(out.contains("deepest drop below 2 in year"));
}

#[test]
fn sweep_prints_one_line_per_d() {
    let o = desing(&["--family", FAMILY, "--sweep", "3..4", "--max-years", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 2);
    assert!(out.starts_with("d=3 years=1 reached=false"));
}

#[test]
fn input_file_and_formats() {
    let dir = std::env::temp_dir().join(format!("desing-cli-in-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("cusp.txt");
    std::fs::write(&path, "# plane cusp\nx^2 - y^3\n").unwrap();
    let o = desing(&["--input", path.to_str().unwrap(), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["charts"].as_array().is_some_and(|a| a.len() == 7));
    let o = desing(&["--input", path.to_str().unwrap(), "--format", "dot"]);
    assert!(stdout(&o).starts_with("digraph"));
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        vec!["--ideal", "x^2 - y^3", "--d", "3"],
        vec!["--family", FAMILY],
        vec!["--family", "z^d - d*x", "--d", "3"],
        vec!["--ideal", "x^2 +"],
        vec!["--ideal", "0"],
        vec!["--family", FAMILY, "--d", "5", "--branch", "w,q"],
        vec!["--family", FAMILY, "--d", "5", "--branch", "w,y,x,w,w"],
        vec!["--input", "/nonexistent/desing-input"],
    ] {
        let o = desing(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error:"), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn clap_rejects_missing_source() {
    let o = desing(&["--variant", "bm"]);
    assert_eq!(o.status.code(), Some(2));
}
