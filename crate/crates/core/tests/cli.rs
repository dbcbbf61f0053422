use std::path::Path;
use std::process::{Command, Output};

fn spf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spf"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("failed to launch spf")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = spf(dir, args);
    assert!(
        out.status.success(),
        "spf {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn small_dataset(dir: &Path) {
    ok(
        dir,
        &[
            "simulate", "--scatter", "20", "--T", "50", "--shape", "10,64,128", "--seed", "3",
            "--out", "v.spfv", "--truth", "truth.txt", "--centroids-out", "c.txt",
        ],
    );
}

#[test]
fn simulate_track_evaluate_pipeline() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    small_dataset(dir);
    ok(dir, &["track", "--volume", "v.spfv", "--centroids", "c.txt", "--particles", "200", "--out", "r.txt"]);
    ok(dir, &["detect", "--volume", "v.spfv", "--out", "det.txt", "--tree-out", "tree.txt"]);
    let out = ok(
        dir,
        &["evaluate", "--result", "r.txt", "--truth", "truth.txt", "--detected", "det.txt", "--report", "report.txt"],
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("frames: 50") && text.contains("cells: 20"), "{text}");
    assert!(dir.join("report.txt").exists());
    let tsv = std::fs::read_to_string(dir.join("report.tsv")).unwrap();
    assert!(tsv.starts_with("metric\tvalue\n"));
    assert!(tsv.lines().any(|l| l.starts_with("detection_tpr\t")));
    assert_eq!(tsv.lines().filter(|l| l.starts_with("rmse_")).count(), 50);

    ok(
        dir,
        &["export-view", "--volume", "v.spfv", "--result", "r.txt", "--out-dir", "bundle", "--floor", "50", "--stride", "2"],
    );
    assert!(dir.join("bundle/meta.json").exists());
    assert!(dir.join("bundle/frame_0049.txt").exists());
    assert!(dir.join("bundle/tracks.txt").exists());
}

#[test]
fn methods_differ_only_in_method_field() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    small_dataset(dir);
    for m in ["spf", "pf"] {
        ok(
            dir,
            &["track", "--volume", "v.spfv", "--centroids", "c.txt", "--method", m, "--seed", "9",
              "--particles", "100", "--out", &format!("{m}.txt")],
        );
    }
    let header = |f: &str| -> Vec<String> {
        std::fs::read_to_string(dir.join(f))
            .unwrap()
            .lines()
            .filter(|l| l.starts_with("# config"))
            .map(str::to_owned)
            .collect()
    };
    assert_eq!(header("spf.txt"), header("pf.txt"));
    let spf = std::fs::read_to_string(dir.join("spf.txt")).unwrap();
    let pf = std::fs::read_to_string(dir.join("pf.txt")).unwrap();
    assert!(spf.starts_with("# method = spf\n"));
    assert!(pf.starts_with("# method = pf\n"));
    assert_eq!(spf.lines().count(), pf.lines().count() + 1, "spf also records its root");
}

#[test]
fn output_is_reproducible_across_runs_and_threads() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    small_dataset(dir);
    let base = ["track", "--volume", "v.spfv", "--centroids", "c.txt", "--particles", "100", "--seed", "4"];
    let run = |threads: &str, out: &str| {
        let mut a: Vec<&str> = vec!["--threads", threads];
        a.extend(base);
        a.extend(["--out", out]);
        ok(dir, &a);
        std::fs::read(dir.join(out)).unwrap()
    };
    let one = run("1", "a.txt");
    assert_eq!(one, run("3", "b.txt"));
    assert_eq!(one, run("1", "c.txt"));
}

#[test]
fn usage_errors_exit_1() {
    let d = tempfile::tempdir().unwrap();
    let out = spf(d.path(), &["track", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(spf(d.path(), &["frobnicate"]).status.code(), Some(1));
    let missing = spf(d.path(), &["detect", "--volume", "nope.spfv", "--out", "c.txt"]);
    assert_eq!(missing.status.code(), Some(1));
    let bad_window = spf(d.path(), &["detect", "--volume", "v", "--peak-window", "3,3", "--out", "c"]);
    assert_eq!(bad_window.status.code(), Some(1));
}

#[test]
fn data_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("bad.spfv"), b"NOPE and some more bytes here").unwrap();
    let out = spf(d.path(), &["detect", "--volume", "bad.spfv", "--out", "c.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic"));

    std::fs::write(d.path().join("cfg.txt"), "particles = 10\nalhpa = 0.5\n").unwrap();
    small_dataset(d.path());
    let typo = spf(
        d.path(),
        &["track", "--volume", "v.spfv", "--centroids", "c.txt", "--config", "cfg.txt", "--out", "r.txt"],
    );
    assert_eq!(typo.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&typo.stderr).contains("alhpa"));
}

#[test]
fn help_and_version_exit_0() {
    let d = tempfile::tempdir().unwrap();
    let v = spf(d.path(), &["--version"]);
    assert_eq!(v.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&v.stdout).contains(env!("CARGO_PKG_VERSION")));
    let h = spf(d.path(), &["track", "--help"]);
    assert_eq!(h.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&h.stdout).contains("lambda_rej = 4.5"));
}

#[test]
fn convert_png_series() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    std::fs::create_dir(dir.join("png")).unwrap();
    for t in 0..2u8 {
        for z in 0..3u8 {
            let img = image::GrayImage::from_fn(6, 4, |x, y| image::Luma([10 * t + z + (x + y) as u8]));
            img.save(dir.join(format!("png/t{t}_z{z:02}.png"))).unwrap();
        }
    }
    ok(
        dir,
        &["convert", "--input-dir", "png", "--pattern", "t{t}_z{z:02}.png", "--dims", "2,3,4,6",
          "--median", "3,3,1", "--subtract-bg", "--out", "v.spfv"],
    );
    let v = spf_core::imagecore::read_volume(dir.join("v.spfv")).unwrap();
    assert_eq!(v.dims(), spf_core::imagecore::Dims::new(2, 3, 4, 6));
    let gap = spf(
        dir,
        &["convert", "--input-dir", "png", "--pattern", "t{t}_z{z:02}.png", "--dims", "3,3,4,6", "--out", "w.spfv"],
    );
    assert_eq!(gap.status.code(), Some(2));
}
