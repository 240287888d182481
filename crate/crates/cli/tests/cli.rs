use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdw-bench"))
        .args(args)
        .env_remove("RDW_BENCH_WORKERS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn pair_doc(obstacles: &str) -> String {
    format!(
        r#"{{
  "name": "room",
  "physical": {{"boundary": [[-5,-5],[5,-5],[5,5],[-5,5]], "obstacles": {obstacles}}},
  "virtual": {{"boundary": [[-5,-5],[5,-5],[5,5],[-5,5]], "obstacles": []}},
  "virtual_start": {{"position": [0,0], "heading_deg": 90}},
  "physical_start": "random"
}}"#
    )
}

#[test]
fn fixed_start_run_has_no_resets() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = bench(&[
        "run",
        "--pair",
        "A",
        "--controller",
        "arc",
        "--paths",
        "3",
        "--waypoints",
        "10",
        "--fixed-start",
        "-o",
        out.to_str().unwrap(),
    ]);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("controller,path,resets,"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    for r in rows {
        let fields: Vec<&str> = r.split(',').collect();
        assert_eq!(fields[0], "arc");
        assert_eq!(fields[2], "0");
    }
    assert!(out.join("manifest.json").exists());
}

#[test]
fn complexity_prints_the_report() {
    let text = stdout(&bench(&["complexity", "--pair", "A"]));
    assert!(text.contains("\"ratio\": 1.000000"), "{text}");
    for key in ["c_physical", "c_virtual", "grid_spacing", "sample_counts"] {
        assert!(text.contains(key), "{key}");
    }
}

#[test]
fn custom_pair_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("pair.json");
    fs::write(&file, pair_doc("[[[-1,-1],[1,-1],[1,1],[-1,1]]]")).unwrap();
    let text = stdout(&bench(&["complexity", "--pair", file.to_str().unwrap()]));
    assert!(text.contains("\"ratio\":"));
}

#[test]
fn bad_pair_file_reports_its_code() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("pair.json");
    fs::write(&file, pair_doc("[[[4,4],[6,4],[6,6],[4,6]]]")).unwrap();
    let o = bench(&["complexity", "--pair", file.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("obstacle_outside_boundary"), "{err}");
    assert!(err.contains("physical.obstacles[0]"), "{err}");
}

fn read_all(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(root).unwrap().display().to_string(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn worker_override_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut trees = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(workers);
        let o = Command::new(env!("CARGO_BIN_EXE_rdw-bench"))
            .args([
                "run",
                "--pair",
                "B",
                "--paths",
                "3",
                "--waypoints",
                "8",
                "--seed",
                "5",
                "--workers",
                "2",
            ])
            .arg("-o")
            .arg(&out)
            .env("RDW_BENCH_WORKERS", workers)
            .output()
            .unwrap();
        stdout(&o);
        trees.push(read_all(&out));
    }
    assert!(!trees[0].is_empty());
    assert_eq!(trees[0], trees[1]);
}

#[test]
fn paths_and_replay_agree_with_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let run = stdout(&bench(&[
        "run",
        "--pair",
        "C",
        "--controllers",
        "s2c",
        "--paths",
        "2",
        "--waypoints",
        "5",
        "--seed",
        "9",
        "-o",
        out.to_str().unwrap(),
    ]));

    let paths = stdout(&bench(&[
        "paths",
        "--pair",
        "C",
        "--paths",
        "2",
        "--waypoints",
        "5",
        "--seed",
        "9",
    ]));
    let stored: Vec<String> = (0..2)
        .map(|i| fs::read_to_string(out.join(format!("paths/path_{i:03}.csv"))).unwrap())
        .collect();
    for (i, s) in stored.iter().enumerate() {
        let printed: Vec<String> = paths
            .lines()
            .skip(1)
            .filter(|l| l.starts_with(&format!("{i},")))
            .map(|l| l[l.find(',').unwrap() + 1..].to_string())
            .collect();
        let expected: Vec<&str> = s.lines().skip(1).collect();
        assert_eq!(printed, expected);
    }

    let replay = stdout(&bench(&[
        "replay",
        out.join("trials/s2c").to_str().unwrap(),
    ]));
    let replayed: Vec<&str> = replay.lines().skip(1).collect();
    let ran: Vec<&str> = run.lines().skip(1).collect();
    assert_eq!(replayed.len(), ran.len());
    for (a, b) in replayed.iter().zip(&ran) {
        // resets column agrees exactly
        let ra: Vec<&str> = a.split(',').collect();
        let rb: Vec<&str> = b.split(',').collect();
        assert_eq!(ra[1], rb[2]);
    }
}

#[test]
fn unknown_controller_is_rejected() {
    let o = bench(&["run", "--pair", "A", "--controllers", "xyz"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown controller"));
}
