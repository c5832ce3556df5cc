//! End-to-end runs of the `biharmonic` binary.

use std::fs;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biharmonic")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn domains_table() {
    let o = run(&["domains"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let iv = text.lines().find(|l| l.trim_start().starts_with("IV")).unwrap();
    assert!(iv.contains("7pi/4"), "{iv}");
    let counts: Vec<&str> = iv.split_whitespace().skip(2).collect();
    assert_eq!(counts, ["1", "1", "2", "2", "1"]);
    assert!(text.contains("3pi/2"));
}

#[test]
fn help_on_every_subcommand() {
    for sub in ["study", "solve", "mesh-info", "domains"] {
        let o = run(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        assert!(stdout(&o).contains("Usage"), "{sub}");
    }
    let o = run(&["study", "--help"]);
    for flag in ["--domain", "--bc", "--levels", "--formulation", "--compare", "--tau", "--radius", "--tol", "--out"] {
        assert!(stdout(&o).contains(flag), "missing {flag}");
    }
}

#[test]
fn configuration_errors_exit_with_one() {
    let o = run(&["study", "--domain", "III", "--bc", "B1", "--levels", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("levels"));
    assert_eq!(run(&["study", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "--domain", "V"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "--tau", "1.5"]).status.code(), Some(1));
}

#[test]
fn incompatible_neumann_source_exits_with_two() {
    let o = run(&["solve", "--domain", "III", "--bc", "B5", "--f", "const1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("incompatible"), "{}", stderr(&o));
}

#[test]
fn solve_reports_coefficients() {
    let o = run(&["solve", "--domain", "IV", "--bc", "B3", "--f", "quadrant", "--level", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("d_perp = 2"));
    assert!(text.contains("c1 =") && text.contains("c2 ="), "{text}");
}

#[test]
fn mesh_info_reports_conformity() {
    let o = run(&["mesh-info", "--domain", "II", "--level", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.trim_end().ends_with("yes")).count(), 3, "{text}");
}

#[test]
fn study_outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for run_id in ["a", "b"] {
        let out = dir.path().join(run_id);
        let o = run(&[
            "study",
            "--domain",
            "III",
            "--bc",
            "B1",
            "--f",
            "const1",
            "--levels",
            "4",
            "--compare",
            "naive",
            "--vtk-levels",
            "2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let csv = fs::read(out.join("study_III_B1_modified.csv")).unwrap();
        let vtk = fs::read_to_string(out.join("field_III_B1_modified_level2.vtk")).unwrap();
        assert!(vtk.starts_with("# vtk DataFile Version"));
        assert!(vtk.contains("POINTS 225 double"), "{}", &vtk[..200]);
        csvs.push(csv);
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs.pop().unwrap()).unwrap();
    assert_eq!(text.lines().next().unwrap(), "level,nodes,diff_h1_u,rate_u,diff_h1_w,rate_w,c1,c2,linf_vs_other");
    assert_eq!(text.lines().count(), 6);
}
