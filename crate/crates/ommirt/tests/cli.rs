use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str = "participant_id,problem_set_id,topic,round,position,score_kind,score,counterpart_kind,accuracy_tier,feedback";

fn ommirt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ommirt")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn simulate(dir: &Path, participants: &str, seed: &str) -> String {
    let out = dir.join("sim");
    let o = ommirt(&["simulate", "--out", out.to_str().unwrap(), "--participants", participants, "--seed", seed]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out.join("data.csv").to_string_lossy().into_owned()
}

#[test]
fn simulate_writes_data_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "3", "1");
    let text = fs::read_to_string(&data).unwrap();
    assert_eq!(text.lines().next().unwrap(), HEADER);
    // 3 participants × 16 sets × 3 score kinds.
    assert_eq!(text.lines().count(), 1 + 3 * 16 * 3);
    let truth: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("sim/truth.json")).unwrap()).unwrap();
    assert_eq!(truth["design"]["participants"].as_array().unwrap().len(), 3);
    assert!(dir.path().join("sim/bundle.json").exists());
}

#[test]
fn baseline_only_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "4", "2");
    let out = dir.path().join("ev");
    let o = ommirt(&["evaluate", "--input", &data, "--out", out.to_str().unwrap(), "--methods", "baseline"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let bundle: serde_json::Value = serde_json::from_slice(&fs::read(out.join("bundle.json")).unwrap()).unwrap();
    let scores = bundle["scores"].as_array().unwrap();
    assert_eq!(scores.len(), 1);
    assert_eq!(scores[0]["n_obs"], 64);
    assert!((scores[0]["per_obs"].as_f64().unwrap() - (1.0f64 / 13.0).ln()).abs() < 1e-12);
    assert!(bundle["fits"].as_array().unwrap().is_empty());
    assert!(out.join("plots/fig4.csv").exists());
}

#[test]
fn parse_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, format!("{HEADER}\np,1,Math,1,1,true,many,human,high,yes\n")).unwrap();
    let o = ommirt(&["fit", "--input", bad.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 1") && err.contains("score"), "{err}");

    fs::write(&bad, "participant_id,topic\np,Math\n").unwrap();
    let o = ommirt(&["fit", "--input", bad.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn validation_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, format!("{HEADER}\np,1,Math,0,1,true,4,human,high,yes\n")).unwrap();
    let o = ommirt(&["fit", "--input", bad.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 4);

    let o = ommirt(&["fit", "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 4, "missing --input");
}

#[test]
fn bad_arguments_exit_2() {
    assert_eq!(code(&ommirt(&["fit", "--dims", "3"])), 2);
    assert_eq!(code(&ommirt(&["frobnicate"])), 2);
}

#[test]
fn failed_gate_exits_5_after_writing_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "2", "3");
    let out = dir.path().join("fit");
    let o = ommirt(&[
        "fit", "--input", &data, "--out", out.to_str().unwrap(), "--warmup", "20", "--samples", "10", "--chains", "2",
        "--variants", "undifferentiated",
    ]);
    assert_eq!(code(&o), 5, "{}", String::from_utf8_lossy(&o.stderr));
    let bundle: serde_json::Value = serde_json::from_slice(&fs::read(out.join("bundle.json")).unwrap()).unwrap();
    assert_eq!(bundle["converged"], false);
    assert!(out.join("draws/underlying.csv").exists());

    let o = ommirt(&[
        "fit", "--input", &data, "--out", out.to_str().unwrap(), "--warmup", "20", "--samples", "10", "--chains", "2",
        "--variants", "undifferentiated", "--gate", "off",
    ]);
    assert_eq!(code(&o), 0);
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn fits_are_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "3", "4");
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_ommirt"))
            .args([
                "fit", "--input", &data, "--out", out.to_str().unwrap(), "--warmup", "60", "--samples", "30", "--chains",
                "3", "--gate", "off", "--seed", "11",
            ])
            .env("OMMIRT_THREADS", threads)
            .env("RUST_LOG", "error")
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = run("a", "1");
    let b = run("b", "3");
    let (da, db) = (dir_bytes(&a.join("draws")), dir_bytes(&b.join("draws")));
    assert_eq!(da.len(), 2 * (1 + 3 + 3 * 3));
    assert!(da == db, "draw files differ");

    // The bundles differ only in the echoed output directory.
    let strip = |p: &Path| {
        let mut v: serde_json::Value = serde_json::from_slice(&fs::read(p.join("bundle.json")).unwrap()).unwrap();
        v["config"]["out"] = serde_json::Value::Null;
        v
    };
    assert_eq!(strip(&a), strip(&b));
}
