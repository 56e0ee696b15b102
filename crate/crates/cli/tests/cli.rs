use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use shapecx::imaging::{save_pgm, save_png};
use shapecx::{Mask, RawImage};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shapecx")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Three 64×64 masks filling the first `n` pixels of row-major order.
fn fill_fixtures(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    for (id, n) in [("a", 1000), ("b", 100), ("c", 3000)] {
        let m = Mask::from_fn(id, |x, y| y * 64 + x < n);
        save_pgm(&m.to_raw(), dir.join(format!("{id}.pgm"))).unwrap();
    }
}

fn score_without_vae(data: &Path, out: &Path) -> Output {
    run(&["score", p(data), "--measures", "compression,fft", "--out", p(out)])
}

#[test]
fn preprocess_empty_dir_is_usage_error() {
    let t = tempfile::tempdir().unwrap();
    let o = run(&["preprocess", p(t.path()), p(&t.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no images found"), "{}", stderr(&o));
}

#[test]
fn preprocess_mixed_formats_and_rerun_is_identical() {
    let t = tempfile::tempdir().unwrap();
    let input = t.path().join("in");
    fs::create_dir_all(&input).unwrap();
    // Full-frame squares so the second pass sees the same box.
    let mut px = vec![255u8; 100 * 100];
    px[0] = 0;
    save_png(&RawImage::new(100, 100, px).unwrap(), input.join("square.png")).unwrap();
    save_pgm(&RawImage::new(30, 30, vec![200; 900]).unwrap(), input.join("plain.pgm")).unwrap();
    fs::write(input.join("notes.txt"), "not an image").unwrap();

    let once = t.path().join("once");
    let twice = t.path().join("twice");
    let o = run(&["preprocess", p(&input), p(&once)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("notes.txt"));
    let mut names: Vec<_> = fs::read_dir(&once).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["plain.pgm", "square.pgm"]);

    assert!(run(&["preprocess", p(&once), p(&twice)]).status.success());
    for n in ["plain.pgm", "square.pgm"] {
        assert_eq!(fs::read(once.join(n)).unwrap(), fs::read(twice.join(n)).unwrap(), "{n}");
    }
}

#[test]
fn score_without_checkpoints() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("d");
    assert!(run(&["generate", p(&data), "--count", "12", "--seed", "3"]).status.success());
    let out = t.path().join("s.csv");
    let o = score_without_vae(&data, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 13);
    assert!(csv.starts_with("id,fill,compression,fft,vae,combined,combined_eq\n"));
    let meta = fs::read_to_string(t.path().join("s.csv.meta")).unwrap();
    assert!(meta.contains("seed=0") && meta.contains("deflate_level=9"), "{meta}");

    let o = run(&["score", p(&data), "--measures", "compression,vae", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--vae16"));
}

#[test]
fn train_headers_warning_and_determinism() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("d");
    assert!(run(&["generate", p(&data), "--count", "6", "--seed", "1"]).status.success());
    let ck = |name: &str| t.path().join(name);

    let o = run(&["train", p(&data), "--latent", "16", "--epochs", "0", "--out", p(&ck("a16.scvx"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
    assert!(run(&["train", p(&data), "--latent", "64", "--epochs", "0", "--out", p(&ck("a64.scvx"))]).status.success());
    let latent = |path: &Path| u32::from_le_bytes(fs::read(path).unwrap()[8..12].try_into().unwrap());
    assert_eq!(latent(&ck("a16.scvx")), 16);
    assert_eq!(latent(&ck("a64.scvx")), 64);

    for name in ["r1.scvx", "r2.scvx"] {
        let o = run(&["train", p(&data), "--epochs", "1", "--batch-size", "4", "--seed", "5", "--out", p(&ck(name))]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(fs::read(ck("r1.scvx")).unwrap(), fs::read(ck("r2.scvx")).unwrap());
    let curve = fs::read_to_string(ck("r1.scvx.loss.csv")).unwrap();
    assert_eq!(curve.lines().count(), 2);
}

#[test]
fn score_with_wrong_slot_is_rejected() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("d");
    assert!(run(&["generate", p(&data), "--count", "3"]).status.success());
    let c16 = t.path().join("m16.scvx");
    assert!(run(&["train", p(&data), "--epochs", "0", "--out", p(&c16)]).status.success());
    let o = run(&[
        "score",
        p(&data),
        "--vae16",
        p(&c16),
        "--vae64",
        p(&c16),
        "--out",
        p(&t.path().join("s.csv")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("latent_dim 16"), "{}", stderr(&o));
}

#[test]
fn rank_by_fill_and_montage_flag() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("d");
    fill_fixtures(&data);
    let scores = t.path().join("s.csv");
    assert!(score_without_vae(&data, &scores).status.success());

    let o = run(&["rank", p(&scores), "--by", "fill"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ids: Vec<String> = String::from_utf8(o.stdout)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().to_owned())
        .collect();
    assert_eq!(ids, ["b", "a", "c"]);

    let png = t.path().join("m.png");
    assert!(run(&["rank", p(&scores), "--by", "compression"]).status.success());
    assert!(!png.exists());
    let o = run(&["rank", p(&scores), "--by", "combined", "--montage", p(&png), "--masks", p(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(&fs::read(&png).unwrap()[1..4], b"PNG");
}

#[test]
fn combined_eq_needs_two_shapes() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("d");
    fs::create_dir_all(&data).unwrap();
    save_pgm(&Mask::from_fn("only", |x, _| x < 10).to_raw(), data.join("only.pgm")).unwrap();
    let scores = t.path().join("s.csv");
    assert!(score_without_vae(&data, &scores).status.success());
    let o = run(&["rank", p(&scores), "--by", "combined_eq"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("at least 2"));
}

#[test]
fn eval_errors_and_defaults() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("d");
    fill_fixtures(&data);
    let scores = t.path().join("s.csv");
    assert!(score_without_vae(&data, &scores).status.success());
    let out = t.path().join("e.csv");

    let reference = t.path().join("ref.txt");
    fs::write(&reference, "b\nzz\na\nc\n").unwrap();
    let o = run(&["eval", p(&scores), "--reference", p(&reference), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`zz`"), "{}", stderr(&o));

    let o = run(&["eval", p(&scores), "--subset-k", "9", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("subset_trials=2000") && err.contains("subset_k=9"), "{err}");

    fs::write(&reference, "b\na\nc\n").unwrap();
    let svg = t.path().join("r.svg");
    let o = run(&["eval", p(&scores), "--reference", p(&reference), "--out", p(&out), "--scatter", p(&svg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_to_string(&out).unwrap().starts_with("measure,spearman,slope,intercept,n\n"));
    assert_eq!(fs::read_to_string(&svg).unwrap().matches("<circle").count(), 9);

    let o = run(&["eval", p(&scores), "--subset-k", "2", "--subset-trials", "50", "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_to_string(&out).unwrap().starts_with("measure,compression,fft,combined\n"));
}

#[test]
fn config_file_supplies_defaults_flags_win() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("d");
    let cfg = t.path().join("run.cfg");
    fs::write(&cfg, "# corpus\ncount = 4\nseed = 8\n").unwrap();
    let o = run(&["--config", p(&cfg), "generate", p(&data), "--seed", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("count=4 seed=2"), "{}", stderr(&o));
    assert_eq!(fs::read_dir(&data).unwrap().count(), 4);

    fs::write(&cfg, "no-such-flag = 1\n").unwrap();
    assert_eq!(run(&["--config", p(&cfg), "generate", p(&data)]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["rank"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let missing = PathBuf::from("/nonexistent/scores.csv");
    assert_eq!(run(&["rank", p(&missing)]).status.code(), Some(2));
}
