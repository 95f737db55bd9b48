use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pulseflow(dir: &Path, args: &[&str]) -> Output {
    pulseflow_env(dir, args, &[])
}

fn pulseflow_env(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pulseflow"));
    cmd.current_dir(dir).args(args);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("PULSEFLOW_")) {
        cmd.env_remove(k);
    }
    cmd.envs(env.iter().copied());
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn record_count(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn help_lists_flags_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    for (sub, flags) in [
        ("gen", &["--case-mix", "--count", "--seed", "--out"][..]),
        ("train", &["--model-preset", "--baseline", "--lambda4", "--max-steps", "--val"][..]),
        ("eval", &["--methods", "--decode", "--checkpoint", "--window"][..]),
        ("infer", &["--checkpoint", "--input", "--decode", "--csv"][..]),
        ("plot", &["--pattern", "--figure", "--count"][..]),
    ] {
        let help = ok(&pulseflow(dir.path(), &[sub, "--help"]));
        for f in flags {
            assert!(help.contains(f), "{sub} --help lacks {f}");
        }
        assert!(help.contains("--config") && help.contains("--threads"));
    }
    let help = ok(&pulseflow(dir.path(), &["gen", "--help"]));
    assert!(help.contains("[default: 1000]"));
    assert!(help.contains("PULSEFLOW_COUNT"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = pulseflow(dir.path(), &["gen", "--count", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--out"));
    assert!(stderr(&out).contains("Usage"));
    assert_eq!(pulseflow(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = pulseflow(dir.path(), &["gen", "--case-mix", "9:1", "--out", "x.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    let out = pulseflow(dir.path(), &["eval", "--data", "missing.jsonl", "--out", "r.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gen_is_deterministic_and_reports_cases() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&pulseflow(dir.path(), &["gen", "--case-mix", "1:1", "--count", "10", "--seed", "7", "--out", "a.jsonl"]));
    assert!(stdout.contains("case 1: 10"));
    ok(&pulseflow(dir.path(), &["--threads", "1", "gen", "--case-mix", "1:1", "--count", "10", "--seed", "7", "--out", "b.jsonl"]));
    let a = fs::read(dir.path().join("a.jsonl")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.jsonl")).unwrap());
    assert_eq!(record_count(&dir.path().join("a.jsonl")), 10);
}

#[test]
fn config_file_sits_below_env_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "[gen]\ncount = 4\ncase-mix = \"2:1\"\nout = \"file.jsonl\"\n",
    )
    .unwrap();
    let p = dir.path();

    let stdout = ok(&pulseflow(p, &["--config", "run.toml", "gen"]));
    assert!(stdout.contains("case 2: 4"));
    assert_eq!(record_count(&p.join("file.jsonl")), 4);

    ok(&pulseflow_env(p, &["--config", "run.toml", "gen"], &[("PULSEFLOW_COUNT", "6")]));
    assert_eq!(record_count(&p.join("file.jsonl")), 6);

    ok(&pulseflow_env(
        p,
        &["--config", "run.toml", "gen", "--count", "2", "--out", "flag.jsonl"],
        &[("PULSEFLOW_COUNT", "6")],
    ));
    assert_eq!(record_count(&p.join("flag.jsonl")), 2);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[gen]\ncuont = 4\n").unwrap();
    let out = pulseflow(dir.path(), &["--config", "bad.toml", "gen", "--out", "x.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("cuont"));
}

#[test]
fn train_eval_infer_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&pulseflow(p, &["gen", "--case-mix", "1:1", "--count", "12", "--seed", "1", "--out", "train.jsonl"]));
    ok(&pulseflow(p, &["gen", "--case-mix", "1:1", "--count", "4", "--seed", "2", "--out", "val.jsonl"]));
    let train = |out: &str| {
        let res = pulseflow(
            p,
            &[
                "--threads", "1", "train", "--data", "train.jsonl", "--val", "val.jsonl", "--out", out,
                "--max-steps", "3", "--batch-size", "4", "--val-every", "2", "--seed", "5",
            ],
        );
        let stdout = ok(&res);
        assert!(stderr(&res).contains("\"lambda4\":5.0"), "resolved config is logged");
        stdout
    };
    assert!(train("a.ckpt").contains("steps 3"));
    train("b.ckpt");
    for ext in ["ckpt", "metrics.csv", "val.csv"] {
        assert_eq!(
            fs::read(p.join(format!("a.{ext}"))).unwrap(),
            fs::read(p.join(format!("b.{ext}"))).unwrap(),
            "{ext} differs between identical runs"
        );
    }
    let metrics = fs::read_to_string(p.join("a.metrics.csv")).unwrap();
    assert!(metrics.starts_with("step,ce,l2,l3,l4,total\n"));
    assert_eq!(metrics.lines().count(), 4);

    let table = ok(&pulseflow(
        p,
        &["eval", "--data", "val.jsonl", "--methods", "oracle,sdif,smcf", "--checkpoint", "a.ckpt", "--out", "report.csv"],
    ));
    assert!(table.contains("oracle"));
    let report = fs::read_to_string(p.join("report.csv")).unwrap();
    assert!(report.starts_with("dataset,case,method,decode,acc_link,acc_nor,v_1m,n_records\n"));
    assert!(report.contains("val,all,oracle,none,1.000000,1.000000,0.000000,4"));
    assert!(report.contains("val,all,smcf,lp,"));
    assert!(report.contains("val,all,smcf,greedy,"));

    let out = pulseflow(p, &["eval", "--data", "val.jsonl", "--methods", "baseline", "--out", "r.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--baseline-checkpoint"));

    fs::write(p.join("toas.txt"), "0\n500\n1000\n1500\n").unwrap();
    for decode in ["lp", "greedy"] {
        let csv = format!("chains-{decode}.csv");
        ok(&pulseflow(p, &["infer", "--checkpoint", "a.ckpt", "--input", "toas.txt", "--decode", decode, "--csv", &csv]));
        let rows = fs::read_to_string(p.join(&csv)).unwrap();
        let mut indices: Vec<usize> = rows
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        indices.sort_unstable();
        assert_eq!(indices, [0, 1, 2, 3], "{decode} must partition every pulse");
    }
}

#[test]
fn infer_rejects_empty_and_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&pulseflow(p, &["gen", "--case-mix", "1:1", "--count", "2", "--out", "d.jsonl"]));
    ok(&pulseflow(
        p,
        &["train", "--data", "d.jsonl", "--out", "m.ckpt", "--max-steps", "1", "--batch-size", "2"],
    ));
    fs::write(p.join("empty.txt"), "\n# nothing\n").unwrap();
    let out = pulseflow(p, &["infer", "--checkpoint", "m.ckpt", "--input", "empty.txt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("empty input"));

    fs::write(p.join("bad.txt"), "0\n12x\n").unwrap();
    let out = pulseflow(p, &["infer", "--checkpoint", "m.ckpt", "--input", "bad.txt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("bad.txt:2"));
}

#[test]
fn plot_writes_the_five_panels() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&pulseflow(p, &["plot", "--figure", "--out", "fig"]));
    let mut names: Vec<String> = fs::read_dir(p.join("fig"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names.len(), 15);
    assert!(names.contains(&"b_jitter.svg".to_string()));
    let jitter = fs::read_to_string(p.join("fig/b_jitter.csv")).unwrap();
    for line in jitter.lines().skip(1) {
        let pri: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((450.0..=550.0).contains(&pri));
    }
    let hist = fs::read_to_string(p.join("fig/a_constant.hist.csv")).unwrap();
    assert!(hist.starts_with("bin_low_us,count\n"));

    let out = pulseflow(p, &["plot", "--pattern", "zigzag:5", "--out", "x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("invalid pattern"));
}

#[test]
fn plot_reads_dataset_records() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&pulseflow(p, &["gen", "--case-mix", "1:1", "--count", "3", "--out", "d.jsonl"]));
    ok(&pulseflow(p, &["plot", "--data", "d.jsonl", "--record", "2", "--out", "fig"]));
    assert!(p.join("fig/record2.svg").exists());
    let out = pulseflow(p, &["plot", "--data", "d.jsonl", "--record", "3", "--out", "fig"]);
    assert_eq!(out.status.code(), Some(1));
}
