use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rsskit"));
    c.env_remove("RSSKIT_OUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn sheep_csv() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sheep_weights.csv")
}

fn sheep_table(dir: &Path) -> PathBuf {
    let path = dir.join("sheep.json");
    let o = run(&["inclusion", "--n", "224", "--design", "l2", "--k", "3", "--m", "7", "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path
}

#[test]
fn gen_pop_uniform_grid() {
    let o = run(&["gen-pop", "--n", "4", "--dist", "uniform"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let xs: Vec<f64> = rdr.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(xs, vec![0.125, 0.375, 0.625, 0.875]);
}

#[test]
fn gen_pop_rho_one_ranks_equal_ids() {
    let o = run(&["gen-pop", "--n", "20", "--dist", "normal", "--rho", "1", "--seed", "7"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut rows = 0;
    for r in rdr.records() {
        let r = r.unwrap();
        assert_eq!(&r[0], &r[3]);
        rows += 1;
    }
    assert_eq!(rows, 20);
}

#[test]
fn gen_pop_missing_dist_is_usage_error() {
    let o = run(&["gen-pop", "--n", "4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn inclusion_sheep_first_order() {
    let o = run(&["inclusion", "--n", "224", "--design", "l2", "--k", "3", "--m", "7"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let first = v["first_order"].as_array().unwrap();
    assert_eq!(first.len(), 224);
    for p in first {
        assert!((p.as_f64().unwrap() - 0.09375).abs() < 1e-12);
    }
}

#[test]
fn inclusion_srs_pairs() {
    let o = run(&["inclusion", "--n", "4", "--design", "srs", "--sample-size", "2"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let second = v["second_order"].as_array().unwrap();
    assert!((second[1].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-15);
    assert!((second[0].as_f64().unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn inclusion_infeasible_exit_three() {
    let o = run(&["inclusion", "--n", "17", "--design", "l2", "--k", "3", "--m", "2"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn estimate_sheep_point_and_median() {
    let dir = tempfile::tempdir().unwrap();
    let table = sheep_table(dir.path());
    let o = run(&[
        "estimate",
        "--sample",
        sheep_csv().to_str().unwrap(),
        "--inclusion",
        table.to_str().unwrap(),
        "--at",
        "27.9",
        "--median-ci",
        "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let point = &v["points"][0];
    assert!((point["F_hat"].as_f64().unwrap() - 0.5714).abs() < 1e-4);
    assert!((point["ci_low"].as_f64().unwrap() - 0.3978).abs() < 0.02);
    assert!((point["ci_high"].as_f64().unwrap() - 0.745).abs() < 0.02);
    let med = &v["median_ci"];
    assert_eq!(med["median"].as_f64().unwrap(), 27.9);
    let vhat = med["V_hat"].as_f64().unwrap();
    let half = 1.959963984540054 * vhat.sqrt();
    assert!((med["c1"].as_f64().unwrap() - (0.5 - half)).abs() < 1e-12);
    assert!((med["c2"].as_f64().unwrap() - (0.5 + half)).abs() < 1e-12);
    let interp = med["interpolated"].as_array().unwrap();
    assert!((interp[0].as_f64().unwrap() - 25.7112).abs() < 0.15);
    assert!((interp[1].as_f64().unwrap() - 30.7360).abs() < 0.15);
    assert_eq!(v["edf"].as_array().unwrap().len(), 17);
}

#[test]
fn estimate_csv_matches_table_three() {
    let dir = tempfile::tempdir().unwrap();
    let table = sheep_table(dir.path());
    let o = run(&["estimate", "--sample", sheep_csv().to_str().unwrap(), "--inclusion", table.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,F_hat");
    assert_eq!(lines[1], "20.5,0.047619");
    assert_eq!(lines[10], "30.2,0.619048");
    assert_eq!(lines[11], "30.5,0.666667");
    assert_eq!(lines.last().unwrap(), &"40.5,1.000000");
}

#[test]
fn out_dir_environment_variable() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["gen-pop", "--n", "5", "--dist", "exp"])
        .env("RSSKIT_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let written = std::fs::read_to_string(dir.path().join("population.csv")).unwrap();
    assert_eq!(written.lines().count(), 6);
}

#[test]
fn verify_small_level2_passes() {
    let o = run(&["verify", "--n", "6", "--design", "l2", "--k", "2", "--m", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], Value::Bool(true));
    let names: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    for needed in ["table_structure", "enumeration_agreement", "variance_dominance", "decomposition_identity"] {
        assert!(names.contains(&needed), "missing {needed}");
    }
}

#[test]
fn verify_level1_small_population() {
    let o = run(&["verify", "--n", "5", "--design", "l1", "--k", "2", "--m", "1"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn sample_estimate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let pop = d.join("pop.csv");
    let sample = d.join("sample.csv");
    let table = d.join("table.json");
    assert!(run(&["gen-pop", "--n", "60", "--dist", "beta52", "--out", pop.to_str().unwrap()]).status.success());
    let o = run(&[
        "sample", "--pop-csv", pop.to_str().unwrap(), "--design", "l1", "--k", "3", "--m", "2", "--seed", "11", "--out",
        sample.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(run(&["inclusion", "--n", "60", "--design", "l1", "--k", "3", "--m", "2", "--out", table.to_str().unwrap()]).status.success());
    let o = run(&[
        "estimate", "--sample", sample.to_str().unwrap(), "--inclusion", table.to_str().unwrap(), "--pop-csv", pop.to_str().unwrap(),
        "--at", "0.7", "--format", "json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["rank_source"], "population_file");
    assert!(v["points"][0]["V_true"].as_f64().unwrap() > 0.0);
}

#[test]
fn outputs_are_reproducible_across_thread_counts() {
    let args = ["simulate", "--n", "30", "--dist", "normal", "--designs", "l0,l2", "--k", "3", "--m", "1", "--rho", "0.75", "--reps", "2000", "--seed", "5"];
    let a = bin().args(args).env("RAYON_NUM_THREADS", "1").output().unwrap();
    let b = bin().args(args).env("RAYON_NUM_THREADS", "4").output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let args = ["sample", "--n", "40", "--dist", "uniform", "--rho", "0.5", "--design", "l2", "--k", "3", "--m", "2", "--ranking", "auxiliary", "--seed", "9"];
    assert_eq!(run(&args).stdout, run(&args).stdout);

    let args = ["inclusion", "--n", "12", "--design", "l1", "--k", "3", "--m", "1", "--method", "mc", "--reps", "5000", "--seed", "2"];
    let a = bin().args(args).env("RAYON_NUM_THREADS", "1").output().unwrap();
    let b = bin().args(args).env("RAYON_NUM_THREADS", "3").output().unwrap();
    assert_eq!(a.stdout, b.stdout);
}

fn write_ids(path: &Path, n: usize) {
    let mut s = String::from("id\n");
    for i in 1..=n {
        s.push_str(&format!("{i}\n"));
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn field_session_replays_sheep_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_ids(&d.join("ids.csv"), 224);
    let values = [
        27.6, 27.9, 34.0, 25.5, 30.2, 25.5, 26.5, 23.5, 25.9, 23.0, 25.0, 40.5, 20.5, 30.5, 35.1, 23.0, 31.0, 33.5, 27.9, 33.5, 35.5,
    ];
    let mut responses = String::from("1 1 2\n");
    for v in values {
        responses.push_str(&format!("2 3 1\n{v}\n"));
    }
    std::fs::write(d.join("responses.txt"), responses).unwrap();
    let out = d.join("sample.csv");
    let o = run(&[
        "field-session", "--pop-csv", d.join("ids.csv").to_str().unwrap(), "--design", "l2", "--k", "3", "--m", "7", "--responses",
        d.join("responses.txt").to_str().unwrap(), "--at", "27.9", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let transcript = stdout(&o);
    assert!(transcript.contains("Invalid ranking"));
    assert!(transcript.contains("F_hat(27.9) = 0.5714"));

    let records = rsskit::io::read_sample_records(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(records.len(), 21);
    let got: Vec<f64> = records.iter().map(|r| r.value).collect();
    assert_eq!(got, values);

    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert!((report["points"][0]["F_hat"].as_f64().unwrap() - 0.5714).abs() < 1e-4);
}

#[test]
fn field_session_forced_final_set() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_ids(&d.join("ids.csv"), 4);
    std::fs::write(d.join("r.txt"), "1 2\n3.0\nx\n2 1\n4.5\n").unwrap();
    let out = d.join("s.csv");
    let o = run(&[
        "field-session", "--pop-csv", d.join("ids.csv").to_str().unwrap(), "--design", "l2", "--k", "2", "--m", "1", "--responses",
        d.join("r.txt").to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    // "x" is consumed by the ranking prompt of the forced set and rejected.
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let transcript = stdout(&o);
    assert!(transcript.contains("the set is forced"));
    let records = rsskit::io::read_sample_records(std::fs::File::open(&out).unwrap()).unwrap();
    let ids: Vec<usize> = records.iter().map(|r| r.population_id.unwrap()).collect();
    assert_eq!(ids.len(), 2);
    assert_ne!(ids[0], ids[1]);
}

#[test]
fn field_session_rejects_non_numeric_then_accepts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_ids(&d.join("ids.csv"), 10);
    std::fs::write(d.join("r.txt"), "2 1 3\nheavy\n31.5\n").unwrap();
    let o = run(&[
        "field-session", "--pop-csv", d.join("ids.csv").to_str().unwrap(), "--design", "l2", "--k", "3", "--pattern", "2", "--responses",
        d.join("r.txt").to_str().unwrap(), "--out", d.join("s.csv").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("Invalid measurement 'heavy'"));
}

#[test]
fn field_session_uses_auxiliary_column() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let pop = d.join("pop.csv");
    assert!(run(&["gen-pop", "--n", "12", "--dist", "normal", "--rho", "0.8", "--seed", "1", "--out", pop.to_str().unwrap()]).status.success());
    std::fs::write(d.join("r.txt"), "1.0\n2.0\n").unwrap();
    let o = run(&[
        "field-session", "--pop-csv", pop.to_str().unwrap(), "--design", "l1", "--k", "2", "--m", "1", "--use-aux", "--responses",
        d.join("r.txt").to_str().unwrap(), "--out", d.join("s.csv").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("Ranking by the auxiliary variable"));
}

#[test]
fn field_session_exhausted_responses_fails() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_ids(&d.join("ids.csv"), 10);
    std::fs::write(d.join("r.txt"), "1 2\n").unwrap();
    let o = run(&[
        "field-session", "--pop-csv", d.join("ids.csv").to_str().unwrap(), "--design", "l2", "--k", "2", "--m", "1", "--responses",
        d.join("r.txt").to_str().unwrap(), "--out", d.join("s.csv").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}
