use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use perimeterfit::core::RasterImage;
use perimeterfit::netpbm;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perimeterfit"))
        .args(args)
        .output()
        .expect("spawn perimeterfit")
}

fn ok(args: &[&str]) {
    let out = bin(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, n: usize, size: usize) -> PathBuf {
    ok(&["synth", "--out", s(dir), "--n", &n.to_string(), "--size", &size.to_string()]);
    dir.join("manifest.json")
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn synth_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("data");
    synth(&dir, 4, 48);
    let ta = tree(&dir);
    fs::remove_dir_all(&dir).unwrap();
    synth(&dir, 4, 48);
    let tb = tree(&dir);
    assert!(ta.len() >= 4 * 3 + 4);
    assert_eq!(ta, tb);
}

#[test]
fn refine_output_does_not_depend_on_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(&tmp.path().join("data"), 3, 48);
    let (one, four) = (tmp.path().join("w1"), tmp.path().join("w4"));
    ok(&["refine", "--manifest", s(&manifest), "--outdir", s(&one), "--workers", "1"]);
    ok(&["refine", "--manifest", s(&manifest), "--outdir", s(&four), "--workers", "4"]);
    let strip = |t: Vec<(PathBuf, Vec<u8>)>| {
        t.into_iter()
            .filter(|(p, _)| p != Path::new("run.json"))
            .collect::<Vec<_>>()
    };
    let (a, b) = (strip(tree(&one)), strip(tree(&four)));
    assert_eq!(a.len(), 3);
    assert_eq!(a, b);
}

#[test]
fn missing_score_file_names_the_entry() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(&tmp.path().join("data"), 2, 32);
    fs::remove_file(tmp.path().join("data/scores/synth_0001.smf")).unwrap();
    let out = bin(&["refine", "--manifest", s(&manifest), "--outdir", s(&tmp.path().join("out"))]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("synth_0001"), "{stderr}");
}

#[test]
fn malformed_input_reports_byte_offset() {
    let tmp = tempfile::tempdir().unwrap();
    let img = tmp.path().join("bad.ppm");
    fs::write(&img, b"P5\n2 2\n255\n\0\0\0\0").unwrap();
    let out = bin(&["edges", "--image", s(&img), "--out", s(&tmp.path().join("e.pgm"))]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("byte 0"), "{stderr}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(bin(&["refine", "--bogus"]).status.code(), Some(2));
}

#[test]
fn perimeter_of_a_disk_is_a_closed_ring() {
    let tmp = tempfile::tempdir().unwrap();
    let img = RasterImage::from_fn(64, 64, |x, y| {
        let (dx, dy) = (x as f64 - 31.5, y as f64 - 31.5);
        if dx.hypot(dy) < 16.0 {
            [220, 60, 40]
        } else {
            [30, 40, 90]
        }
    })
    .unwrap();
    let path = tmp.path().join("disk.ppm");
    netpbm::save_ppm(&img, &path).unwrap();
    let out = tmp.path().join("disk.edges.pgm");
    ok(&["perimeter", "--image", s(&path), "--out", s(&out)]);
    assert!(tmp.path().join("disk.edges.pgm.run.json").exists());
    let pm = netpbm::load_perimeter_map(&out).unwrap();

    let mut seen = vec![false; 64 * 64];
    let mut stack = vec![32 * 64 + 32];
    seen[32 * 64 + 32] = true;
    let mut leaked = false;
    while let Some(p) = stack.pop() {
        let (x, y) = (p % 64, p / 64);
        if x == 0 || y == 0 || x == 63 || y == 63 {
            leaked = true;
            break;
        }
        for q in [p - 1, p + 1, p - 64, p + 64] {
            if !seen[q] && !pm.is_edge_index(q) {
                seen[q] = true;
                stack.push(q);
            }
        }
    }
    assert!(!pm.is_edge_index(32 * 64 + 32));
    assert!(!leaked, "disk interior reaches the border");
}

#[test]
fn refine_eval_gridsearch_overlay() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let manifest = synth(&data, 3, 48);
    let pred = tmp.path().join("pred");
    ok(&["refine", "--manifest", s(&manifest), "--outdir", s(&pred)]);

    let report = tmp.path().join("report.json");
    let table = tmp.path().join("table.txt");
    ok(&[
        "eval",
        "--pred-dir",
        s(&pred),
        "--manifest",
        s(&manifest),
        "--classes",
        s(&data.join("classes.json")),
        "--report",
        s(&report),
        "--table",
        s(&table),
    ]);
    let r: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    let m = r["miou"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&m));
    assert!(!fs::read_to_string(&table).unwrap().is_empty());

    let grid = tmp.path().join("grid.json");
    ok(&[
        "gridsearch",
        "--manifest",
        s(&manifest),
        "--t-slic",
        "0.2:0.4:0.1",
        "--t-quick",
        "0.3",
        "--fusion",
        "union",
        "--out",
        s(&grid),
    ]);
    let g: serde_json::Value = serde_json::from_slice(&fs::read(&grid).unwrap()).unwrap();
    assert_eq!(g["grid"].as_array().unwrap().len(), 3);
    assert!(tmp.path().join("grid.json.run.json").exists());

    let overlay = tmp.path().join("overlay.ppm");
    ok(&[
        "overlay",
        "--image",
        s(&data.join("images/synth_0000.ppm")),
        "--mask",
        s(&pred.join("synth_0000.pgm")),
        "--out",
        s(&overlay),
    ]);
    let o = netpbm::load_ppm(&overlay).unwrap();
    assert_eq!(o.dims(), (48, 48));
}

#[test]
fn command_line_overrides_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(&tmp.path().join("data"), 1, 32);
    let config = tmp.path().join("config.json");
    fs::write(
        &config,
        r#"{"refine": {"threshold_slic": 0.6, "threshold_quick": 0.7}, "canny": {"sigma": 1.5}}"#,
    )
    .unwrap();
    let out = tmp.path().join("out");
    ok(&[
        "refine",
        "--manifest",
        s(&manifest),
        "--outdir",
        s(&out),
        "--config",
        s(&config),
        "--t-slic",
        "0.4",
    ]);
    let run: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("run.json")).unwrap()).unwrap();
    let c = &run["config"];
    assert_eq!(c["refine"]["threshold_slic"].as_f64(), Some(0.4));
    assert_eq!(c["refine"]["threshold_quick"].as_f64(), Some(0.7));
    assert_eq!(c["canny"]["sigma"].as_f64(), Some(1.5));
    assert_eq!(c["workers"].as_u64(), Some(1));
}
