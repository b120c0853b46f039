use std::path::Path;
use std::process::{Command, Output};

fn cavqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cavqa"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = cavqa(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_data_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    for (path, seed) in [(&a, "3"), (&b, "3"), (&c, "4")] {
        ok(&[
            "gen-data",
            "--seed",
            seed,
            "--n-samples",
            "120",
            "--out",
            s(path),
        ]);
    }
    let read = |p: &Path| std::fs::read(p).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[data]\npreset = \"hr_like\"\nn_samples = 90\n\n[train]\npreset = \"desk\"\nepochs = 1\nbatch_size = 30\n",
    )
    .unwrap();
    let data = dir.path().join("d.jsonl");
    let out = ok(&[
        "gen-data",
        "--config",
        s(&cfg),
        "--seed",
        "1",
        "--out",
        s(&data),
    ]);
    assert!(
        out.contains("90 samples") && out.contains("test2="),
        "{out}"
    );

    let ckpt = dir.path().join("m.ckpt");
    ok(&[
        "train",
        "--data",
        s(&data),
        "--config",
        s(&cfg),
        "--epochs",
        "2",
        "--no-infomax",
        "--out",
        s(&ckpt),
    ]);
    let text = std::fs::read_to_string(&ckpt).unwrap();
    let train_line = text.lines().find(|l| l.starts_with("train ")).unwrap();
    assert!(train_line.contains("\"epochs\":2"), "{train_line}");
    assert!(train_line.contains("\"batch_size\":30"), "{train_line}");
    assert!(train_line.contains("\"infomax\":false"), "{train_line}");
}

#[test]
fn train_then_eval_writes_matching_json() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.jsonl");
    let ckpt = dir.path().join("m.ckpt");
    let json = dir.path().join("e.json");
    ok(&[
        "gen-data",
        "--seed",
        "2",
        "--n-samples",
        "150",
        "--out",
        s(&data),
    ]);
    let trained = ok(&[
        "train",
        "--data",
        s(&data),
        "--preset",
        "desk",
        "--epochs",
        "2",
        "--out",
        s(&ckpt),
    ]);
    let evaluated = ok(&[
        "eval",
        "--ckpt",
        s(&ckpt),
        "--data",
        s(&data),
        "--split",
        "test",
        "--json-out",
        s(&json),
    ]);
    assert!(
        trained.starts_with(&evaluated),
        "{trained}\n---\n{evaluated}"
    );
    for label in ["count", "presence", "comparison", "rural_urban", "OA", "AA"] {
        assert!(
            evaluated.lines().any(|l| l.starts_with(label)),
            "missing {label}"
        );
    }
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(record["split"], "test");
    assert_eq!(record["metrics"]["n_samples"], 30);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cavqa(&["train", "--bogus"]).status.code(), Some(2));
    assert_eq!(cavqa(&[]).status.code(), Some(2));

    let missing = dir.path().join("missing.jsonl");
    let out = cavqa(&[
        "train",
        "--data",
        s(&missing),
        "--out",
        s(&dir.path().join("m")),
    ]);
    assert_eq!(out.status.code(), Some(3));

    let garbage = dir.path().join("garbage.jsonl");
    std::fs::write(&garbage, "{\"format\":\"other\"}\n").unwrap();
    let out = cavqa(&[
        "train",
        "--data",
        s(&garbage),
        "--out",
        s(&dir.path().join("m")),
    ]);
    assert_eq!(out.status.code(), Some(3));

    let bad_cfg = dir.path().join("bad.toml");
    std::fs::write(&bad_cfg, "[train]\nepochs = 0\n").unwrap();
    let out = cavqa(&[
        "gen-data",
        "--config",
        s(&bad_cfg),
        "--out",
        s(&dir.path().join("d")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epochs"));

    let data = dir.path().join("d.jsonl");
    ok(&[
        "gen-data",
        "--seed",
        "2",
        "--n-samples",
        "50",
        "--out",
        s(&data),
    ]);
    let out = cavqa(&[
        "train",
        "--data",
        s(&data),
        "--lr",
        "1e300",
        "--epochs",
        "3",
        "--out",
        s(&dir.path().join("m")),
    ]);
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
