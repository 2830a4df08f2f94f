use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use subharm_core::constructions::moment_recursions;
use subharm_core::interval::Interval;
use subharm_core::obstacle::{grid_csv, Grid};
use subharm_core::scalar::parse_rational;

fn dir(name: &str) -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR"))
        .join("cli")
        .join(name);
    let _ = fs::remove_dir_all(&d);
    d
}

fn run(args: &[&str], out: &PathBuf) -> i32 {
    let o = Command::new(env!("CARGO_BIN_EXE_subharm"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    o.status.code().unwrap()
}

fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn laminate_table_matches_the_recursion() {
    let out = dir("laminate");
    assert_eq!(
        run(&["laminate", "--p", "1.5", "--m", "8", "--q", "1.5"], &out),
        0
    );
    let csv = fs::read_to_string(out.join("moments.csv")).unwrap();
    let want = moment_recursions(Interval::two_pow(1.5), 1.5, 8).unwrap();
    assert_eq!(csv, want.to_csv());
    assert_eq!(csv.lines().count(), 10);
    let m = manifest(&out);
    assert_eq!(m["status"], "pass");
    assert_eq!(m["config"]["m"], 8);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn rational_mode_runs_exactly() {
    let out = dir("rational");
    assert_eq!(run(&["laminate", "--two-p", "3", "--m", "4"], &out), 0);
    let csv = fs::read_to_string(out.join("moments_exact.csv")).unwrap();
    let want = moment_recursions(parse_rational("3").unwrap(), 1.5, 4).unwrap();
    for (line, row) in csv.lines().skip(1).zip(&want.rows) {
        assert_eq!(line, format!("{},{}", row.m, row.a_direct));
    }
    // 2^p = 3: a₁ = 2 + (C − 2) with C = 7/3
    assert_eq!(csv.lines().nth(2).unwrap(), "1,7/3");
}

#[test]
fn validation_failures_exit_with_2() {
    let out = dir("invalid");
    assert_eq!(run(&["laminate", "--p", "0.5"], &out), 2);
    assert_eq!(manifest(&out)["status"], "validation-error");
    assert!(manifest(&out)["message"]
        .as_str()
        .unwrap()
        .contains("p = 0.5"));
    assert_eq!(run(&["realize", "--q", "2.5"], &out), 2);
    assert_eq!(run(&["obstacle", "solve", "--omega", "2"], &out), 2);
    assert_eq!(
        run(&["obstacle", "solve", "--obstacle", "builtin:nope"], &out),
        2
    );
    assert_eq!(run(&["staircase", "--J", "0"], &out), 2);
    assert_eq!(run(&["wavecone", "--resolution", "4"], &out), 2);
    assert_eq!(run(&["staircase", "--no-such-flag"], &out), 2);
}

#[test]
fn budget_exhaustion_exits_with_3_and_a_manifest() {
    let out = dir("budget");
    assert_eq!(run(&["realize", "--budget", "10"], &out), 3);
    let m = manifest(&out);
    assert_eq!(m["status"], "budget-exhausted");
    assert!(m["message"].as_str().unwrap().contains("budget"));
}

#[test]
fn cell_dump_over_the_limit_is_a_budget_failure() {
    let out = dir("dump-limit");
    assert_eq!(
        run(&["realize", "--emit-cells", "--cell-limit", "1000"], &out),
        3
    );
    // the report written before the dump survives
    assert!(out.join("report.csv").exists());
    assert_eq!(manifest(&out)["artifacts"].as_array().unwrap().len(), 1);
}

#[test]
fn verdict_failures_exit_with_4() {
    let out = dir("verdict");
    assert_eq!(
        run(&["obstacle", "solve", "--n", "33", "--max-iter", "1"], &out),
        4
    );
    assert_eq!(manifest(&out)["status"], "verdict-failure");
}

#[test]
fn runs_are_byte_identical() {
    let (a, b) = (dir("det-a"), dir("det-b"));
    let args = ["staircase", "--J", "2", "--q", "1.5", "--q", "1.2"];
    assert_eq!(run(&args, &a), 0);
    assert_eq!(run(&args, &b), 0);
    for f in ["levels.csv", "summary.csv", "divergence.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(manifest(&a)["config_sha256"], manifest(&b)["config_sha256"]);
}

#[test]
fn config_file_matches_flags() {
    let (a, b) = (dir("cfg-a"), dir("cfg-b"));
    let cfg = a.parent().unwrap().join("wavecone.json");
    fs::create_dir_all(cfg.parent().unwrap()).unwrap();
    fs::write(
        &cfg,
        r#"{"command": "wavecone", "n": 2, "trials": 200, "seed": 5}"#,
    )
    .unwrap();
    assert_eq!(run(&["run", "--config", cfg.to_str().unwrap()], &a), 0);
    assert_eq!(
        run(
            &["wavecone", "--n", "2", "--trials", "200", "--seed", "5"],
            &b
        ),
        0
    );
    assert_eq!(
        fs::read(a.join("wavecone.csv")).unwrap(),
        fs::read(b.join("wavecone.csv")).unwrap()
    );
    assert_eq!(manifest(&a)["config_sha256"], manifest(&b)["config_sha256"]);

    let nested = cfg.with_file_name("obstacle.json");
    fs::write(
        &nested,
        r#"{"command": "obstacle", "action": "solve", "n": 33, "order": "lexicographic"}"#,
    )
    .unwrap();
    let c = dir("cfg-c");
    assert_eq!(run(&["run", "--config", nested.to_str().unwrap()], &c), 0);
    assert_eq!(manifest(&c)["config"]["order"], "lexicographic");

    let bad = cfg.with_file_name("bad.json");
    fs::write(&bad, r#"{"n": 2}"#).unwrap();
    assert_eq!(
        run(&["run", "--config", bad.to_str().unwrap()], &dir("cfg-bad")),
        2
    );
}

#[test]
fn obstacle_from_file() {
    let out = dir("file-obstacle");
    fs::create_dir_all(&out).unwrap();
    let grid = Grid::square(17, 0.0, 1.0).unwrap();
    let phi = grid.sample(|x| -(x[0] - 0.5).powi(2) - (x[1] - 0.5).powi(2));
    let path = out.join("phi.csv");
    fs::write(&path, grid_csv(&grid, &phi)).unwrap();
    assert_eq!(
        run(
            &[
                "obstacle",
                "solve",
                "--n",
                "17",
                "--obstacle",
                path.to_str().unwrap()
            ],
            &out
        ),
        0
    );
    // a concave quadratic is discretely superharmonic: the solution is φ itself
    assert_eq!(
        fs::read_to_string(out.join("solution.csv")).unwrap(),
        grid_csv(&grid, &phi)
    );
    assert_eq!(
        run(
            &[
                "obstacle",
                "solve",
                "--n",
                "19",
                "--obstacle",
                path.to_str().unwrap()
            ],
            &out
        ),
        2
    );
}

#[test]
fn proplip_reports_a_fitted_constant() {
    let out = dir("proplip");
    assert_eq!(
        run(
            &[
                "obstacle",
                "proplip",
                "--staircase-depth",
                "2",
                "--n",
                "65",
                "--hessian-plus-n",
                "17",
                "33"
            ],
            &out
        ),
        0
    );
    let csv = fs::read_to_string(out.join("proplip.csv")).unwrap();
    assert!(csv.starts_with("n,h,deviation,constant,"));
    assert_eq!(
        fs::read_to_string(out.join("hessian_plus.csv"))
            .unwrap()
            .lines()
            .count(),
        7
    );
}
