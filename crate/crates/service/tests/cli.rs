use std::path::Path;
use std::process::Command;

use mvpart::mesh::{labeling_from_json, write_labeled_ply, write_obj, Vec3};
use mvpart::synth;
use serde_json::{json, Value};

fn mvpart(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_mvpart")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "mvpart {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// render -> lift -> postprocess into `dir`; returns the final label bytes.
fn pipeline(dir: &Path, mesh: &Path) -> (Vec<u8>, Vec<u8>) {
    let renders = dir.join("renders");
    let lifted = dir.join("lifted.json");
    let out = dir.join("labels.json");
    mvpart(&["render", "--mesh", p(mesh), "--out", p(&renders), "--image-size", "96"]);
    mvpart(&["lift", "--mesh", p(mesh), "--masks", p(&renders), "--out", p(&lifted), "--seed", "3"]);
    mvpart(&["postprocess", "--labels", p(&lifted), "--mesh", p(mesh), "--out", p(&out)]);
    (std::fs::read(lifted).unwrap(), std::fs::read(out).unwrap())
}

#[test]
fn cli_pipeline_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (mesh, labels) = synth::table(2);
    let mesh_path = tmp.path().join("table.ply");
    std::fs::write(&mesh_path, write_labeled_ply(&mesh, &labels).unwrap()).unwrap();
    let a = pipeline(&tmp.path().join("a"), &mesh_path);
    let b = pipeline(&tmp.path().join("b"), &mesh_path);
    assert_eq!(a, b);
    let (kind, out) = labeling_from_json(std::str::from_utf8(&a.1).unwrap()).unwrap();
    assert_eq!(kind, mvpart::mesh::ElementKind::Face);
    assert_eq!(out.len(), mesh.face_count());
    assert!(out.iter().all(|&l| l >= 0));
    let renders = tmp.path().join("a/renders");
    for name in ["normal_00.png", "valid_11.png", "depth_05.raw", "depth_05.json", "point_03.raw", "face_id_07.raw", "mask_04.png", "views.json"] {
        assert!(renders.join(name).is_file(), "{name}");
    }
}

#[test]
fn segment_command_with_each_provider() {
    let tmp = tempfile::tempdir().unwrap();
    let cube = synth::subdivided_box(Vec3::repeat(-0.5), Vec3::repeat(0.5), 3);
    let mesh = tmp.path().join("cube.obj");
    std::fs::write(&mesh, write_obj(&cube)).unwrap();
    let prompts = tmp.path().join("prompts.json");
    std::fs::write(
        &prompts,
        json!([
            { "view_index": 0, "points": [[32, 32, "pos"]], "segment_id": 0 },
            { "view_index": 3, "points": [[32, 32, "pos"]], "boxes": [[20, 20, 44, 44]], "segment_id": 1 }
        ])
        .to_string(),
    )
    .unwrap();
    let run = |provider: &str, out: &str, extra: &[&str]| {
        let out = tmp.path().join(out);
        let mut args = vec!["segment", "--mesh", p(&mesh), "--prompts", p(&prompts), "--provider", provider, "--out", p(&out), "--image-size", "64"];
        args.extend_from_slice(extra);
        mvpart(&args);
        std::fs::read(out).unwrap()
    };
    let first = run("region-grow", "rg1.json", &["--no-fill"]);
    assert_eq!(first, run("region-grow", "rg2.json", &["--no-fill"]));
    let (_, labels) = labeling_from_json(std::str::from_utf8(&first).unwrap()).unwrap();
    let mut parts: Vec<i32> = labels.iter().copied().filter(|&l| l >= 0).collect();
    parts.sort();
    parts.dedup();
    assert_eq!(parts, vec![0, 1]);

    let gt = tmp.path().join("gt.json");
    let sides = synth::box_side_labels(&mvpart::mesh::normalize_mesh(&cube).unwrap());
    std::fs::write(&gt, json!({ "element_kind": "face", "labels": sides }).to_string()).unwrap();
    let oracle = run("oracle", "oracle.json", &["--gt", p(&gt), "--no-fill"]);
    let (_, labels) = labeling_from_json(std::str::from_utf8(&oracle).unwrap()).unwrap();
    assert_eq!(labels.iter().filter(|&&l| l >= 0).count(), 2 * cube.face_count() / 6);

    // External masks: reuse the ground-truth renders.
    let masks = tmp.path().join("masks");
    mvpart(&["render", "--mesh", p(&mesh), "--out", p(&masks), "--image-size", "64", "--gt", p(&gt)]);
    let ext = run("external", "ext.json", &["--mask-dir", p(&masks)]);
    let (_, labels) = labeling_from_json(std::str::from_utf8(&ext).unwrap()).unwrap();
    assert_eq!(labels, sides);
}

#[test]
fn eval_command_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let (gt_dir, pred_dir) = (tmp.path().join("gt"), tmp.path().join("pred"));
    std::fs::create_dir_all(&gt_dir).unwrap();
    std::fs::create_dir_all(&pred_dir).unwrap();
    let write = |dir: &Path, name: &str, labels: Vec<i32>| {
        std::fs::write(dir.join(name), json!({ "element_kind": "face", "labels": labels }).to_string()).unwrap();
    };
    write(&gt_dir, "Chair_0.json", vec![0; 10]);
    write(&pred_dir, "Chair_0.json", (0..10).map(|i| (i >= 5) as i32).collect());
    write(&gt_dir, "Keyboard_0.json", vec![0, 0, 1, 1]);
    write(&pred_dir, "Keyboard_0.json", vec![7, 7, 3, 3]);
    let report = tmp.path().join("report.json");
    mvpart(&["eval", "--pred", p(&pred_dir), "--gt", p(&gt_dir), "--grouping", "partnete", "--report", p(&report)]);
    let v: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["per_object"].as_array().unwrap().len(), 2);
    assert_eq!(v["per_group"]["Furniture & Household Infrastructure"], 0.5);
    assert_eq!(v["per_group"]["Electronics & Computing Devices"], 1.0);
    assert_eq!(v["overall"], 0.75);
    assert_eq!(v["weighting"], "uniform");

    write(&gt_dir, "Spaceship_0.json", vec![0]);
    write(&pred_dir, "Spaceship_0.json", vec![0]);
    let out = Command::new(env!("CARGO_BIN_EXE_mvpart"))
        .args(["eval", "--pred", p(&pred_dir), "--gt", p(&gt_dir), "--grouping", "partnete", "--report", p(&report)])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Spaceship"));
}

#[test]
fn toy_report_passes() {
    let out = mvpart(&["toy-report", "--seed", "5"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["memory"]["full_retention_bootstrap_entries"], 13);
}

#[test]
fn errors_are_reported() {
    let out = Command::new(env!("CARGO_BIN_EXE_mvpart"))
        .args(["lift", "--mesh", "/nonexistent.obj", "--masks", "/tmp", "--out", "/tmp/x.json"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonexistent"));
}
