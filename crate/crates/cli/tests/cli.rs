use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const K3: &str = "p kbest 3 3 0\ne 1 2 1\ne 2 3 1\ne 1 3 5\n";
const P3: &str = "p kbest 3 2 0\ne 1 2 1\ne 2 3 1\n";

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn kbest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kbest")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn ksp_values() {
    let d = TempDir::new().unwrap();
    let g = write(&d, "k3.gr", K3);
    let o = kbest(&["ksp", "--graph", s(&g), "--source", "1", "--target", "3", "-k", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "2\n5\n");
}

#[test]
fn ksp_exhaustion_and_oracle() {
    let d = TempDir::new().unwrap();
    let g = write(&d, "k3.gr", K3);
    let o = kbest(&[
        "ksp",
        "--graph",
        s(&g),
        "--source",
        "1",
        "--target",
        "3",
        "-k",
        "10",
        "--stats",
        "--oracle-check",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "2\n5\n");
    let err = stderr(&o);
    assert!(err.contains("exhausted after 2"), "{err}");
    assert!(err.contains("oracle check: ok"), "{err}");
}

#[test]
fn ksp_solutions_as_json() {
    let d = TempDir::new().unwrap();
    let g = write(&d, "k3.gr", K3);
    let o = kbest(&[
        "ksp",
        "--graph",
        s(&g),
        "--source",
        "1",
        "--target",
        "3",
        "-k",
        "2",
        "--solutions",
    ]);
    assert_eq!(
        stdout(&o),
        "{\"value\":2,\"sets\":[[\"e1\",\"e2\"]]}\n{\"value\":5,\"sets\":[[\"e3\"]]}\n"
    );
    for line in stdout(&o).lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["value"].is_i64());
    }
}

#[test]
fn solve_problems() {
    let d = TempDir::new().unwrap();
    let k3 = write(&d, "k3.gr", K3);
    let p3 = write(&d, "p3.gr", P3);
    let o = kbest(&["solve", "--problem", "spanning-tree", "--graph", s(&k3), "-k", "3"]);
    assert_eq!(stdout(&o), "2\n6\n6\n");
    let o = kbest(&[
        "solve",
        "--problem",
        "perfect-matching",
        "--graph",
        s(&p3),
        "-k",
        "3",
        "--stats",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "");
    assert!(stderr(&o).contains("infeasible"));
    let o = kbest(&[
        "solve",
        "--problem",
        "vertex-cover",
        "--graph",
        s(&k3),
        "-k",
        "4",
        "--oracle-check",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn direct_mode_matches_enumeration() {
    let d = TempDir::new().unwrap();
    let g = write(&d, "k3.gr", K3);
    let full = kbest(&[
        "solve",
        "--problem",
        "simple-path",
        "--source",
        "1",
        "--target",
        "3",
        "--graph",
        s(&g),
        "-k",
        "2",
    ]);
    let direct = kbest(&[
        "solve",
        "--problem",
        "simple-path",
        "--source",
        "1",
        "--target",
        "3",
        "--graph",
        s(&g),
        "-k",
        "2",
        "--direct-k",
        "2",
    ]);
    assert_eq!(direct.status.code(), Some(0));
    assert_eq!(stdout(&direct), stdout(&full));
}

#[test]
fn direction_override() {
    let d = TempDir::new().unwrap();
    // 1->2, 2->3, 3->1
    let g = write(&d, "c3.gr", "p kbest 3 3 1\ne 1 2 1\ne 2 3 1\ne 3 1 1\n");
    let args = ["ksp", "--graph", s(&g), "--source", "1", "--target", "3", "-k", "5"];
    assert_eq!(stdout(&kbest(&args)), "2\n");
    let mut undirected = args.to_vec();
    undirected.extend(["--directed-override", "0"]);
    assert_eq!(stdout(&kbest(&undirected)), "1\n2\n");
}

#[test]
fn parse_tree_dump() {
    let d = TempDir::new().unwrap();
    let g = write(&d, "k3.gr", K3);
    let o = kbest(&[
        "ksp",
        "--graph",
        s(&g),
        "--source",
        "1",
        "--target",
        "3",
        "-k",
        "1",
        "--dump-parse-tree",
    ]);
    let err = stderr(&o);
    assert!(err.contains("introduces=e3"), "{err}");
    assert_eq!(stdout(&o), "2\n");
}

#[test]
fn exit_codes() {
    let d = TempDir::new().unwrap();
    let g = write(&d, "k3.gr", K3);
    let bad = write(&d, "bad.gr", "p kbest 3 1 0\ne 1 9 1\n");
    let missing = d.path().join("missing.gr");
    let run = |graph: &Path, s_: &str, t: &str, k: &str| {
        kbest(&["ksp", "--graph", s(graph), "--source", s_, "--target", t, "-k", k])
            .status
            .code()
    };
    assert_eq!(run(&missing, "1", "3", "2"), Some(1));
    assert_eq!(run(&bad, "1", "3", "2"), Some(1));
    assert_eq!(run(&g, "1", "1", "2"), Some(2));
    assert_eq!(run(&g, "1", "7", "2"), Some(2));
    assert_eq!(run(&g, "1", "3", "0"), Some(2));
    let o = kbest(&["solve", "--problem", "hamiltonian", "--graph", s(&g), "-k", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let td = write(&d, "bad.td", "s td 2 2 3\nb 1 1 2\nb 2 2 3\n1 2\n");
    let o = kbest(&[
        "ksp",
        "--graph",
        s(&g),
        "--source",
        "1",
        "--target",
        "3",
        "-k",
        "1",
        "--td",
        s(&td),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn supplied_decomposition_is_used() {
    let d = TempDir::new().unwrap();
    let g = write(&d, "k3.gr", K3);
    let td = write(&d, "k3.td", "s td 1 3 3\nb 1 1 2 3\n");
    let o = kbest(&[
        "ksp",
        "--graph",
        s(&g),
        "--source",
        "1",
        "--target",
        "3",
        "-k",
        "2",
        "--td",
        s(&td),
    ]);
    assert_eq!(stdout(&o), "2\n5\n");
}

#[test]
fn validate_reports() {
    let d = TempDir::new().unwrap();
    let g = write(&d, "k3.gr", K3);
    let good = write(&d, "k3.td", "s td 1 3 3\nb 1 1 2 3\n");
    let bad = write(&d, "bad.td", "s td 2 2 3\nb 1 1 2\nb 2 2 3\n1 2\n");
    let o = kbest(&["validate", "--graph", s(&g), "--td", s(&good)]);
    assert_eq!((o.status.code(), stdout(&o)), (Some(0), "valid width=2\n".to_string()));
    let o = kbest(&["validate", "--graph", s(&g), "--td", s(&bad)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("e3"));
    let o = kbest(&["validate", "--graph", s(&g), "--td", s(&d.path().join("none.td"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn balance_a_long_chain() {
    let d = TempDir::new().unwrap();
    let n = 1024;
    let mut gr = format!("p kbest {n} {} 0\n", n - 1);
    let mut td = format!("s td {} 2 {n}\n", n - 1);
    for i in 1..n {
        gr += &format!("e {i} {} 1\n", i + 1);
        td += &format!("b {i} {i} {}\n", i + 1);
    }
    for i in 1..n - 1 {
        td += &format!("{i} {}\n", i + 1);
    }
    let g = write(&d, "p.gr", &gr);
    let t = write(&d, "p.td", &td);
    let out = d.path().join("b.td");
    let o = kbest(&["balance", "--graph", s(&g), "--td", s(&t), "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o);
    let depth: usize = line.trim().split("depth=").nth(1).unwrap().parse().unwrap();
    assert!(depth <= 4 * 10, "{line}");
    let o = kbest(&["validate", "--graph", s(&g), "--td", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
}
