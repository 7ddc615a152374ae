use std::path::Path;
use std::process::{Command, Output};

use census_stereo::cli::{RunManifest, REPORT_HEADER};
use census_stereo::imageio::{read_pfm, read_pfm_values};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_census-stereo"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn census-stereo")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, model: &[&str], size: &str, seed: &str) {
    let mut args = vec!["synth", "--size", size, "--seed", seed, "--out-dir", p(dir)];
    args.extend_from_slice(model);
    ok(&args);
}

fn manifest(path: &Path) -> RunManifest {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_writes_four_files_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth(&a, &["--plane", "5"], "32x64", "7");
    synth(&b, &["--plane", "5"], "32x64", "7");
    for f in ["left.pgm", "right.pgm", "gt.pfm", "occl.pgm"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let gt = read_pfm(a.join("gt.pfm")).unwrap();
    assert_eq!(gt.dims(), (64, 32));
    let m = manifest(&a.join("manifest.json"));
    assert_eq!(m.command, "synth");
    assert_eq!(m.outputs.len(), 4);
}

#[test]
fn synth_step_has_occlusion_band() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &["--step", "2:10"], "16x64", "1");
    let occl = census_stereo::imageio::read_mask_pgm(tmp.path().join("occl.pgm")).unwrap();
    // background pixels just left of the boundary are hidden by the foreground
    assert!(occl.get(30, 5));
    assert!(!occl.get(40, 5));
}

#[test]
fn match_identical_pair_gives_zero_disparity() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &["--plane", "0"], "32x64", "3");
    let out = tmp.path().join("d.pfm");
    let l = tmp.path().join("left.pgm");
    ok(&[
        "match",
        "--left",
        p(&l),
        "--right",
        p(&l),
        "--max-disp",
        "16",
        "--out",
        p(&out),
    ]);
    let d = read_pfm(&out).unwrap();
    let valid: Vec<f64> = (0..d.data().len())
        .filter(|&i| d.valid()[i])
        .map(|i| d.data()[i])
        .collect();
    assert!(!valid.is_empty());
    assert!(valid.iter().all(|&v| v == 0.0));
    assert!(tmp.path().join("d.manifest.json").exists());
}

#[test]
fn match_soft_aggregator_and_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &["--plane", "4"], "32x64", "3");
    let out = tmp.path().join("soft.pfm");
    let (l, r, gt) = (
        tmp.path().join("left.pgm"),
        tmp.path().join("right.pgm"),
        tmp.path().join("gt.pfm"),
    );
    ok(&[
        "match",
        "--left",
        p(&l),
        "--right",
        p(&r),
        "--max-disp",
        "16",
        "--aggregator",
        "soft",
        "--tau",
        "0.1",
        "--out",
        p(&out),
        "--gt",
        p(&gt),
    ]);
    let m = manifest(&tmp.path().join("soft.manifest.json"));
    let clean = m.summary.unwrap().clean.unwrap();
    assert!(clean.bad3 < 5.0, "bad3 {}", clean.bad3);
    assert_eq!(m.inputs.len(), 3);
}

#[test]
fn eval_identity_and_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &["--plane", "3"], "16x32", "2");
    let gt = tmp.path().join("gt.pfm");
    let metrics = tmp.path().join("m.json");
    let out = ok(&[
        "eval",
        "--pred",
        p(&gt),
        "--gt",
        p(&gt),
        "--out",
        p(&metrics),
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["epe"], 0.0);
    assert_eq!(v["bad1"], 0.0);
    assert_eq!(v["bad3"], 0.0);
    assert!(tmp.path().join("m.manifest.json").exists());

    let missing = run(&["eval", "--pred", p(&gt)]);
    assert_eq!(missing.status.code(), Some(2));

    let empty = run(&["eval", "--pred", p(&gt), "--gt", p(&gt), "--max-disp", "2"]);
    assert_eq!(empty.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&empty.stderr).contains("empty"));
}

#[test]
fn attack_writes_trace_and_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &["--plane", "4"], "32x64", "5");
    let (l, r, gt) = (
        tmp.path().join("left.pgm"),
        tmp.path().join("right.pgm"),
        tmp.path().join("gt.pfm"),
    );
    let dir = tmp.path().join("run");
    ok(&[
        "attack",
        "--left",
        p(&l),
        "--right",
        p(&r),
        "--gt",
        p(&gt),
        "--mode",
        "constrained",
        "--eps",
        "0.03",
        "--scales",
        "3..7",
        "--max-disp",
        "12",
        "--out-dir",
        p(&dir),
    ]);
    let trace = std::fs::read_to_string(dir.join("loss.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines[0], "step,loss");
    assert_eq!(lines.len(), 22);
    for f in [
        "perturbation.pfm",
        "left_adv.pgm",
        "right_adv.pgm",
        "config.json",
        "manifest.json",
    ] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let (_, _, p_vals) = read_pfm_values(dir.join("perturbation.pfm")).unwrap();
    assert!(p_vals.iter().all(|v| v.abs() <= 0.03 + 1e-7));
    let m = manifest(&dir.join("manifest.json"));
    let s = m.summary.unwrap();
    assert_eq!(s.mode.as_deref(), Some("constrained"));
    assert!(s.attacked.is_some() && s.clean.is_some());
}

#[test]
fn attack_patch_and_unconstrained_modes() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &["--plane", "4"], "48x96", "6");
    let (l, r, gt) = (
        tmp.path().join("left.pgm"),
        tmp.path().join("right.pgm"),
        tmp.path().join("gt.pfm"),
    );
    let dir = tmp.path().join("patch");
    ok(&[
        "attack",
        "--left",
        p(&l),
        "--right",
        p(&r),
        "--gt",
        p(&gt),
        "--mode",
        "patch",
        "--rect",
        "30,4,40,40",
        "--steps",
        "4",
        "--descriptor",
        "sad",
        "--scales",
        "3..7",
        "--max-disp",
        "12",
        "--out-dir",
        p(&dir),
    ]);
    let (w, _, vals) = read_pfm_values(dir.join("perturbation.pfm")).unwrap();
    for (i, v) in vals.iter().enumerate() {
        let (x, y) = (i % w, i / w);
        if !(30..70).contains(&x) || !(4..44).contains(&y) {
            assert_eq!(*v, 0.0);
        }
    }
    let missing_rect = run(&[
        "attack",
        "--left",
        p(&l),
        "--right",
        p(&r),
        "--gt",
        p(&gt),
        "--mode",
        "patch",
        "--out-dir",
        p(&dir),
    ]);
    assert_eq!(missing_rect.status.code(), Some(2));

    let dir = tmp.path().join("ucs");
    ok(&[
        "attack",
        "--left",
        p(&l),
        "--right",
        p(&r),
        "--gt",
        p(&gt),
        "--mode",
        "unconstrained",
        "--steps",
        "2",
        "--descriptor",
        "sad",
        "--scales",
        "3..7",
        "--max-disp",
        "12",
        "--out-dir",
        p(&dir),
    ]);
    assert!(dir.join("perturbation_left.pfm").exists());
    assert!(dir.join("perturbation_right.pfm").exists());
}

#[test]
fn attack_on_hard_census_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &["--plane", "2"], "24x48", "1");
    let (l, r, gt) = (
        tmp.path().join("left.pgm"),
        tmp.path().join("right.pgm"),
        tmp.path().join("gt.pfm"),
    );
    let dir = tmp.path().join("hard");
    let out = run(&[
        "attack",
        "--left",
        p(&l),
        "--right",
        p(&r),
        "--gt",
        p(&gt),
        "--descriptor",
        "census-hard",
        "--max-disp",
        "8",
        "--out-dir",
        p(&dir),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("blocked"));
    ok(&[
        "attack",
        "--left",
        p(&l),
        "--right",
        p(&r),
        "--gt",
        p(&gt),
        "--descriptor",
        "census-hard",
        "--max-disp",
        "8",
        "--steps",
        "2",
        "--allow-zero-grad",
        "--out-dir",
        p(&dir),
    ]);
}

#[test]
fn report_collects_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    assert_eq!(run(&["report", "--dir", p(&empty)]).status.code(), Some(1));

    let scene = tmp.path().join("scene");
    synth(&scene, &["--plane", "3"], "24x48", "4");
    let (l, r, gt) = (
        scene.join("left.pgm"),
        scene.join("right.pgm"),
        scene.join("gt.pfm"),
    );
    let runs = tmp.path().join("runs");
    for d in ["census-soft", "sad"] {
        ok(&[
            "attack",
            "--left",
            p(&l),
            "--right",
            p(&r),
            "--gt",
            p(&gt),
            "--descriptor",
            d,
            "--steps",
            "2",
            "--scales",
            "3..5",
            "--max-disp",
            "8",
            "--out-dir",
            p(&runs.join(d)),
        ]);
    }
    ok(&["report", "--dir", p(&runs)]);
    let csv = std::fs::read_to_string(runs.join("report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], REPORT_HEADER);
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("scene,census-soft,soft,constrained,0.03,2,"));
    assert!(lines[2].starts_with("scene,sad,soft,constrained,0.03,2,"));
    // a second report ignores the first one's manifest
    ok(&["report", "--dir", p(&runs)]);
    assert_eq!(
        std::fs::read_to_string(runs.join("report.csv")).unwrap(),
        csv
    );
}
