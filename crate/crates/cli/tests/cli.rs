use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stvision(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stvision"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn synth(dir: &Path) {
    let out = stvision(&[
        "synth",
        "--out",
        dir.to_str().unwrap(),
        "--per-class",
        "4",
        "--seed",
        "3",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
}

#[test]
fn full_run_then_cached_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let cfg = tmp.path().join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "# small vocabulary for four clips per class\nmanifest = {}\noutput = {}\nvocab_size = 6\n",
            data.join("manifest.tsv").display(),
            tmp.path().join("out").display()
        ),
    )
    .unwrap();
    let args = [
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--kind",
        "both",
        "--seed",
        "5",
    ];
    let first = stvision(&args);
    assert!(first.status.success(), "{}", text(&first.stderr));
    let stdout = text(&first.stdout);
    assert!(stdout.contains("hoghof") && stdout.contains("huestip"));
    let report = fs::read(tmp.path().join("out/report_huestip.tsv")).unwrap();
    let comparison = fs::read(tmp.path().join("out/comparison.txt")).unwrap();

    let second = stvision(&args);
    assert!(second.status.success());
    let stderr = text(&second.stderr);
    for stage in ["extract", "vocab", "encode", "train", "evaluate"] {
        let line = stderr
            .lines()
            .find(|l| l.starts_with(&format!("cache {stage}:")))
            .unwrap();
        assert!(line.ends_with(" 0 misses"), "{line}");
    }
    assert_eq!(
        fs::read(tmp.path().join("out/report_huestip.tsv")).unwrap(),
        report
    );
    assert_eq!(
        fs::read(tmp.path().join("out/comparison.txt")).unwrap(),
        comparison
    );
}

#[test]
fn stage_commands_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let manifest = data.join("manifest.tsv");
    let out_dir = tmp.path().join("out");
    let base = [
        "--manifest",
        manifest.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
        "--kind",
        "stip",
        "--vocab-size",
        "6",
    ];
    for cmd in ["extract", "vocab", "encode", "train"] {
        let mut args = vec![cmd];
        args.extend(base);
        let out = stvision(&args);
        assert!(out.status.success(), "{cmd}: {}", text(&out.stderr));
    }
    let mut args = vec!["eval"];
    args.extend(base);
    args.extend(["--set", "norm=l2"]);
    let out = stvision(&args);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(out_dir.join("report_hoghof.txt").exists());
}

#[test]
fn failures_exit_nonzero_with_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let manifest = fs::read_to_string(data.join("manifest.tsv")).unwrap();
    let train_only: String = manifest
        .lines()
        .filter(|l| !l.ends_with("test"))
        .map(|l| format!("{l}\n"))
        .collect();
    fs::write(data.join("train_only.tsv"), train_only).unwrap();
    let out = stvision(&[
        "run",
        "--manifest",
        data.join("train_only.tsv").to_str().unwrap(),
        "--output",
        tmp.path().join("out").to_str().unwrap(),
        "--vocab-size",
        "4",
    ]);
    assert!(!out.status.success());
    assert!(
        text(&out.stderr).contains("evaluate"),
        "{}",
        text(&out.stderr)
    );

    let out = stvision(&[
        "run",
        "--config",
        tmp.path().join("missing.cfg").to_str().unwrap(),
    ]);
    assert!(!out.status.success());

    let out = stvision(&["run", "--kind", "sift"]);
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("sift"));

    fs::write(data.join("red_000/frame_00003.png"), b"not a png").unwrap();
    let out = stvision(&[
        "extract",
        "--manifest",
        data.join("manifest.tsv").to_str().unwrap(),
        "--output",
        tmp.path().join("out2").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
}
