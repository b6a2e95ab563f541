mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::*;
use gsf_core::imgio::save_pgm;

fn gsf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsf"))
        .args(args)
        .env("GSF_THREADS", "2")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = gsf(args);
    assert!(out.status.success(), "gsf {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Five subjects, two train, one gallery and one probe image each.
fn dataset(dir: &Path) {
    let faces = synthetic_faces(5, 4, 0.2, 0.05, 5);
    let mut manifest = String::from("# path,subject,role\n");
    for subject in &faces {
        for (i, face) in subject.iter().enumerate() {
            let role = ["train", "train", "gallery", "probe"][i];
            let name = format!("{}.pgm", face.id);
            save_pgm(&face.image, dir.join(&name)).unwrap();
            manifest.push_str(&format!("{name}, {}, {role}\n", face.subject));
        }
    }
    fs::write(dir.join("manifest.txt"), manifest).unwrap();
    fs::write(
        dir.join("gsf.conf"),
        "# small layout\npreset = orl\nfeature.variant = gsf2\nfda.r = 10\n",
    )
    .unwrap();
}

#[test]
fn train_evaluate_match_and_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    dataset(dir);
    let (cfg, manifest) = (dir.join("gsf.conf"), dir.join("manifest.txt"));
    let (model, report) = (dir.join("model.gsfm"), dir.join("report.txt"));

    let out = ok(&["train", "--config", p(&cfg), "--manifest", p(&manifest), "--model", p(&model)]);
    assert!(out.contains("20 regions"), "{out}");
    assert_eq!(&fs::read(&model).unwrap()[..4], b"GSFM");

    let out = ok(&["evaluate", "--model", p(&model), "--manifest", p(&manifest), "--report", p(&report)]);
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.starts_with("# variant=gsf2"));
    assert_eq!(text.lines().nth(1).unwrap(), "probe\tpredicted\ttruth\tscore\tresult\ttrue_rank");
    assert_eq!(text.lines().filter(|l| l.contains("\thit\t") || l.contains("\tmiss\t")).count(), 5);
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("rank1 = "));
    assert_eq!(out.trim(), last);

    let grid = ok(&["weights", "--model", p(&model)]);
    let rows: Vec<&str> = grid.lines().collect();
    assert_eq!(rows.len(), 5);
    for row in &rows {
        let cells: Vec<f64> = row.split_whitespace().map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().all(|w| (0.0..=1.0).contains(w)));
    }

    let a = dir.join("s00_2.pgm");
    let b = dir.join("s01_2.pgm");
    let same: f64 = ok(&["match", "--model", p(&model), "--a", p(&a), "--b", p(&a), "--unweighted"]).trim().parse().unwrap();
    assert!((same - 20.0).abs() < 1e-9, "{same}");
    let ab: f64 = ok(&["match", "--model", p(&model), "--a", p(&a), "--b", p(&b)]).trim().parse().unwrap();
    let ba: f64 = ok(&["match", "--model", p(&model), "--a", p(&b), "--b", p(&a)]).trim().parse().unwrap();
    assert_eq!(ab, ba);
}

#[test]
fn extract_writes_one_file_per_image() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    dataset(dir);
    let out_dir = dir.join("features");
    ok(&[
        "extract",
        "--config",
        p(&dir.join("gsf.conf")),
        "--manifest",
        p(&dir.join("manifest.txt")),
        "--out",
        p(&out_dir),
    ]);
    let mut names: Vec<String> = fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names.len(), 20);
    assert_eq!(names[0], "00000_s00_0.feat");

    let text = fs::read_to_string(out_dir.join(&names[2])).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "# subject=s00 role=gallery");
    let regions: Vec<Vec<f64>> = lines
        .map(|l| l.split(' ').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(regions.len(), 20);
    // ORL layout: 40 pictures x 1 sub-region x 16 levels per region.
    assert!(regions.iter().all(|r| r.len() == 640));
}

#[test]
fn bad_inputs_fail_with_messages() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    dataset(dir);
    let model = dir.join("model.gsfm");
    let manifest = dir.join("manifest.txt");

    let bad_cfg = dir.join("bad.conf");
    fs::write(&bad_cfg, "preset = orl\nfeature.colour = red\n").unwrap();
    let out = gsf(&["train", "--config", p(&bad_cfg), "--manifest", p(&manifest), "--model", p(&model)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("feature.colour"));

    let bad_manifest = dir.join("bad.txt");
    fs::write(&bad_manifest, "a.pgm,s1,train\nb.pgm,s1\n").unwrap();
    let out = gsf(&["train", "--config", p(&dir.join("gsf.conf")), "--manifest", p(&bad_manifest), "--model", p(&model)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    fs::write(&model, b"not a model").unwrap();
    let out = gsf(&["weights", "--model", p(&model)]);
    assert!(!out.status.success());
}
