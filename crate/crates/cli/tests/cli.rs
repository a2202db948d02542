use std::fs;
use std::process::{Command, Output};

fn cutforge(args: &[&str], dir: &std::path::Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cutforge"))
        .args(args)
        .current_dir(dir)
        .env_remove("CUTFORGE_SEED")
        .env_remove("CUTFORGE_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn classify_prints_family_and_inequality() {
    let dir = tempfile::tempdir().unwrap();
    let o = cutforge(&["classify", "--v0", "3/4", "--v", "2,-4"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "F1");
    assert_eq!(lines[1], "-16 X1,2 + 7 x1 + 10 x2 >= 0");
    assert_eq!(lines[2], "2; 0; alpha[7 10]; beta[(1,2)=-16]");
}

#[test]
fn gap_formatting() {
    let dir = tempfile::tempdir().unwrap();
    let o = cutforge(&["gap", "--ub", "-9748", "--lb", "-9769.21"], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "0.22%");
    let o = cutforge(&["gap", "--ub", "1", "--lb", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn atlas_build_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cutforge(&["atlas", "build", "-n", "3"], dir.path()).status.success());
    let o = cutforge(&["atlas", "verify", "-n", "3", "--facetness"], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "n=3 facets=16 checksum OK");
    let path = dir.path().join("bqp3.atlas");
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, text.replacen("alpha[0 0 0]", "alpha[0 0 1]", 1)).unwrap();
    let o = cutforge(&["atlas", "verify", "bqp3.atlas"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("checksum"));
}

#[test]
fn domain_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cutforge(&["classify", "--v0", "x", "--v", "1"], dir.path()).status.code(), Some(2));
    assert_eq!(cutforge(&["atlas", "build", "-n", "6"], dir.path()).status.code(), Some(2));
    fs::write(dir.path().join("bad.txt"), "2 1\n1 3 1\n").unwrap();
    assert_eq!(cutforge(&["solve", "bad.txt"], dir.path()).status.code(), Some(2));
    assert_eq!(cutforge(&["decompose", "--v0", "1/3", "--v", "sqrt(2),sqrt(3)"], dir.path()).status.code(), Some(2));
}

#[test]
fn decompose_f2_vector() {
    let dir = tempfile::tempdir().unwrap();
    let o = cutforge(&["decompose", "--v0", "3/2*sqrt(2)", "--v", "sqrt(2),-2*sqrt(2)"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("p=sqrt(2) r=(1,-2) a=1"));
}

#[test]
fn certify_single_inequality() {
    let dir = tempfile::tempdir().unwrap();
    let o = cutforge(&["certify", "--ineq", "3; 0; alpha[0 0 0]; beta[(1,2)=1]"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("bh "));
}

#[test]
fn solve_is_reproducible_and_reports_seed() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.txt"), "4 6\n1 2 3\n1 3 -5\n2 3 4\n2 4 -6\n3 4 2\n1 1 1\n").unwrap();
    let run = |out: &str| {
        let o = cutforge(
            &["--seed", "7", "solve", "tiny.txt", "--relaxation", "viii", "--ub", "-1", "--out", out],
            dir.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    assert!(a.starts_with("relaxation=viii bound="));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/tiny-viii.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 7);
    let strip = |p: &str| {
        let mut rows: Vec<String> = fs::read_to_string(dir.path().join(p)).unwrap().lines().map(str::to_string).collect();
        for r in &mut rows {
            // drop the time column
            let f: Vec<&str> = r.split(',').collect();
            *r = f.iter().enumerate().filter(|(k, _)| *k != 4).map(|(_, s)| *s).collect::<Vec<_>>().join(",");
        }
        rows
    };
    assert_eq!(strip("a/tiny-viii.csv"), strip("b/tiny-viii.csv"));
}
