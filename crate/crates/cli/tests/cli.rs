use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use s2haar::metrics::SplitMix64;
use s2haar::partition::patch_count;
use s2haar::{io, PlanarImage, SphericalSignal};
use serde_json::Value;
use tempfile::TempDir;

fn s2haar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_s2haar"))
        .args(args)
        .env_remove("S2HAAR_SCRATCH")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Value {
    let out = s2haar(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn fails(args: &[&str]) -> (i32, Value) {
    let out = s2haar(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let err: Value = serde_json::from_slice(&out.stderr).expect("error is JSON");
    (out.status.code().unwrap(), err["error"].clone())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn random_signal_file(
    dir: &TempDir,
    name: &str,
    level: u32,
    channels: usize,
    seed: u64,
) -> PathBuf {
    let mut rng = SplitMix64::new(seed);
    let data = (0..channels)
        .map(|_| {
            (0..patch_count(level))
                .map(|_| 255.0 * rng.next_f64())
                .collect()
        })
        .collect();
    let path = dir.path().join(name);
    io::write_signal(&path, &SphericalSignal::from_channels(level, data).unwrap()).unwrap();
    path
}

/// Drops timing fields, which are the only nondeterministic report entries.
fn strip_times(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.retain(|k, _| !k.ends_with("time_s"));
            map.values_mut().for_each(strip_times);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_times),
        _ => {}
    }
}

#[test]
fn transform_round_trip() {
    let dir = TempDir::new().unwrap();
    let sig = random_signal_file(&dir, "s.sph1", 4, 3, 1);
    let pyr = dir.path().join("p.sph1");
    let back = dir.path().join("b.sph1");
    let fwd = ok(&[
        "transform",
        "--input",
        p(&sig),
        "--output",
        p(&pyr),
        "--depth",
        "4",
    ]);
    assert!(fwd["reconstruction_rel_error"].as_f64().unwrap() <= 1e-10);
    assert_eq!(fwd["schema_version"], 1);
    let inv = ok(&[
        "transform",
        "--inverse",
        "--input",
        p(&pyr),
        "--output",
        p(&back),
    ]);
    assert_eq!(inv["settings"]["depth"], 4);
    let (a, b) = (
        io::read_signal(&sig).unwrap(),
        io::read_signal(&back).unwrap(),
    );
    assert_eq!(a.channel_count(), 3);
    for (x, y) in a.iter().zip(b.iter()) {
        assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
    }
    let (code, err) = fails(&[
        "transform",
        "--inverse",
        "--input",
        p(&sig),
        "--output",
        p(&back),
    ]);
    assert_eq!((code, err["kind"].as_str()), (2, Some("usage")));
}

#[test]
fn inpaint_with_nothing_missing_is_exact() {
    let dir = TempDir::new().unwrap();
    let sig = random_signal_file(&dir, "s.sph1", 3, 1, 2);
    let out = dir.path().join("out.sph1");
    let report = ok(&[
        "inpaint",
        "--input",
        p(&sig),
        "--output",
        p(&out),
        "--ratio",
        "0",
    ]);
    assert_eq!(report["metrics"]["psnr_db"], "inf");
    assert_eq!(
        io::read_signal(&out).unwrap(),
        io::read_signal(&sig).unwrap()
    );
    // Restored signal, render and report are all written.
    assert!(dir.path().join("out.png").exists());
    let on_disk: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out.json")).unwrap()).unwrap();
    assert_eq!(on_disk["command"], "inpaint");
    assert_eq!(report["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn inpaint_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let sig = random_signal_file(&dir, "s.sph1", 4, 3, 3);
    let run = |name: &str| {
        let out = dir.path().join(name);
        let mut report = ok(&[
            "inpaint",
            "--input",
            p(&sig),
            "--output",
            p(&out),
            "--ratio",
            "0.7",
            "--seed",
            "11",
            "--max-iters",
            "8",
        ]);
        strip_times(&mut report);
        for key in ["outputs", "inputs"] {
            for item in report[key].as_array_mut().unwrap() {
                item.as_object_mut().unwrap().remove("path");
            }
        }
        (std::fs::read(&out).unwrap(), report)
    };
    let (a, ra) = run("a.sph1");
    let (b, rb) = run("b.sph1");
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    assert_eq!(ra["settings"]["mask"]["seed"], 11);
    assert_eq!(ra["run"]["channels"].as_array().unwrap().len(), 3);
    let iters = ra["run"]["channels"][0]["iterations"].as_array().unwrap();
    assert!(iters.iter().all(|r| r["feasible"] == true));
    let gain = ra["metrics"]["psnr_db"].as_f64().unwrap()
        - ra["mean_fill_metrics"]["psnr_db"].as_f64().unwrap();
    assert!(gain.is_finite());
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let dir = TempDir::new().unwrap();
    let sig = random_signal_file(&dir, "s.sph1", 2, 1, 4);
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[solver]\nmax_iters = 4\nbeta1 = 0.8\n[denoiser]\nkind = \"identity\"\n[mask]\nratio = 0.5\nseed = 9\n",
    )
    .unwrap();
    let out = dir.path().join("o.sph1");
    let base = [
        "--config",
        p(&cfg),
        "inpaint",
        "--input",
        p(&sig),
        "--output",
        p(&out),
    ];
    let r = ok(&base);
    assert_eq!(r["settings"]["solver"]["max_iters"], 4);
    assert_eq!(r["settings"]["solver"]["beta1"], 0.8);
    assert_eq!(r["settings"]["solver"]["beta2"], 2.0);
    assert_eq!(r["settings"]["denoiser"]["kind"], "identity");
    assert_eq!(r["settings"]["mask"]["seed"], 9);
    assert!(r["config_file"]["sha256"].as_str().unwrap().len() == 64);
    let mut args = base.to_vec();
    args.extend(["--max-iters", "2", "--seed", "5"]);
    let r = ok(&args);
    assert_eq!(r["settings"]["solver"]["max_iters"], 2);
    assert_eq!(r["settings"]["mask"]["seed"], 5);

    std::fs::write(&cfg, "[solver]\nbogus = 1\n").unwrap();
    let (code, err) = fails(&base);
    assert_eq!((code, err["kind"].as_str()), (2, Some("config")));
}

#[test]
fn grid_sweep_reports_every_point() {
    let dir = TempDir::new().unwrap();
    let sig = random_signal_file(&dir, "s.sph1", 2, 1, 5);
    let out = dir.path().join("o.sph1");
    let r = ok(&[
        "inpaint",
        "--input",
        p(&sig),
        "--output",
        p(&out),
        "--ratio",
        "0.5",
        "--grid",
        "--max-iters",
        "5",
    ]);
    assert_eq!(r["grid"]["points"].as_array().unwrap().len(), 50);
    assert_eq!(r["metrics"], r["grid"]["best"]["quality"]);
    let mask = dir.path().join("m.sph1");
    ok(&[
        "mask",
        "--level",
        "2",
        "--ratio",
        "0.5",
        "--output",
        p(&mask),
    ]);
    let (_, err) = fails(&[
        "inpaint",
        "--input",
        p(&sig),
        "--output",
        p(&out),
        "--mask",
        p(&mask),
        "--grid",
    ]);
    assert_eq!(err["kind"], "usage");
}

#[test]
fn mask_command_is_seeded() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.sph1"), dir.path().join("b.sph1"));
    let ra = ok(&[
        "mask",
        "--level",
        "4",
        "--ratio",
        "0.5",
        "--seed",
        "42",
        "--output",
        p(&a),
    ]);
    ok(&[
        "mask",
        "--level",
        "4",
        "--ratio",
        "0.5",
        "--seed",
        "42",
        "--output",
        p(&b),
    ]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ra["observed"], 763);
    assert_eq!(io::read_mask(&a).unwrap().observed_count(), 763);
    let (code, err) = fails(&["mask", "--level", "4", "--ratio", "1.5", "--output", p(&a)]);
    assert_eq!((code, err["kind"].as_str()), (1, Some("domain")));
}

#[test]
fn ingest_render_and_metrics() {
    let dir = TempDir::new().unwrap();
    let (w, h) = (64, 32);
    let data = (0..w * h)
        .map(|i| ((i % w) * 255 / (w - 1)) as f64)
        .collect();
    let png = dir.path().join("pano.png");
    io::write_png(&png, &PlanarImage::new(w, h, 1, data).unwrap(), false).unwrap();
    let sig = dir.path().join("s.sph1");
    let r = ok(&[
        "ingest",
        "--input",
        p(&png),
        "--output",
        p(&sig),
        "--level",
        "3",
    ]);
    assert_eq!(r["image"]["width"], 64);
    assert_eq!(io::read_signal(&sig).unwrap().len(), 384);

    let rendered = dir.path().join("r.png");
    ok(&[
        "render",
        "--input",
        p(&sig),
        "--output",
        p(&rendered),
        "--width",
        "40",
        "--color-map",
        "never",
    ]);
    let img = io::read_png(&rendered).unwrap();
    assert_eq!((img.width, img.height, img.channels), (40, 20, 1));
    ok(&[
        "render",
        "--input",
        p(&sig),
        "--output",
        p(&rendered),
        "--width",
        "40",
    ]);
    assert_eq!(io::read_png(&rendered).unwrap().channels, 3);

    let m = ok(&["metrics", "--truth", p(&sig), "--test", p(&sig)]);
    assert_eq!(m["psnr_db"], "inf");
    assert_eq!(m["ssim"], 1.0);
    let m = ok(&["metrics", "--truth", p(&png), "--test", p(&png)]);
    assert_eq!(m["ssim"], 1.0);
    let (_, err) = fails(&["metrics", "--truth", p(&png), "--test", p(&sig)]);
    assert_eq!(err["kind"], "usage");

    let square = dir.path().join("sq.png");
    io::write_png(&square, &PlanarImage::filled(8, 8, 1, 100.0), false).unwrap();
    ok(&[
        "ingest",
        "--input",
        p(&square),
        "--output",
        p(&sig),
        "--level",
        "2",
        "--mode",
        "single-face",
        "--face",
        "3",
    ]);
    assert!(io::read_signal(&sig).unwrap().iter().all(|v| v == 100.0));
}

#[test]
fn malformed_inputs_give_json_errors() {
    let dir = TempDir::new().unwrap();
    let junk = dir.path().join("junk.sph1");
    std::fs::write(&junk, b"SPH1\x01\x00garbage").unwrap();
    let out = dir.path().join("o.sph1");
    let (code, err) = fails(&["transform", "--input", p(&junk), "--output", p(&out)]);
    assert_eq!((code, err["kind"].as_str()), (1, Some("format")));
    assert!(!out.exists());
    let (_, err) = fails(&[
        "render",
        "--input",
        p(&dir.path().join("missing")),
        "--output",
        p(&out),
    ]);
    assert_eq!(err["kind"], "io");
    let (code, err) = fails(&["partition-info"]);
    assert_eq!((code, err["kind"].as_str()), (2, Some("usage")));
    let (code, _) = fails(&["no-such-command"]);
    assert_eq!(code, 2);
}

#[cfg(unix)]
#[test]
fn external_denoiser_bridge() {
    let dir = TempDir::new().unwrap();
    let sig = random_signal_file(&dir, "s.sph1", 2, 1, 6);
    let out = dir.path().join("o.sph1");
    let copy = dir.path().join("copy.sh");
    std::fs::write(&copy, "#!/bin/sh\ncp \"$1\" \"$3\"\n").unwrap();
    let scratch = dir.path().join("scratch");
    let cmd = format!("sh {} {{input}} {{sigma}} {{output}}", copy.display());
    let status = Command::new(env!("CARGO_BIN_EXE_s2haar"))
        .args([
            "denoise",
            "--input",
            p(&sig),
            "--output",
            p(&out),
            "--sigma",
            "2",
        ])
        .args(["--denoiser", "external", "--command", &cmd])
        .env("S2HAAR_SCRATCH", &scratch)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    assert_eq!(
        io::read_signal(&out).unwrap(),
        io::read_signal(&sig).unwrap()
    );
    assert_eq!(std::fs::read_dir(&scratch).unwrap().count(), 0);

    let fail = dir.path().join("fail.sh");
    std::fs::write(&fail, "#!/bin/sh\necho broken >&2\nexit 4\n").unwrap();
    let cmd = format!("sh {} {{input}} {{sigma}} {{output}}", fail.display());
    let (code, err) = fails(&[
        "denoise",
        "--input",
        p(&sig),
        "--output",
        p(&out),
        "--sigma",
        "2",
        "--denoiser",
        "external",
        "--command",
        &cmd,
        "--scratch-dir",
        p(&scratch),
    ]);
    assert_eq!(code, 1);
    assert_eq!(err["kind"], "plugin");
    assert_eq!(err["status"], 4);
    assert_eq!(err["stderr"].as_str().unwrap().trim(), "broken");
}

#[test]
fn partition_info_and_bench() {
    let r = ok(&["partition-info", "--level", "3", "--splits"]);
    assert_eq!(r["patches"], 384);
    assert!(r["leaf_areas"]["max_rel_deviation"].as_f64().unwrap() <= 1e-9);
    assert_eq!(r["splits"].as_array().unwrap().len(), 6 + 24 + 96);

    let dir = TempDir::new().unwrap();
    let report = dir.path().join("bench.json");
    let r = ok(&[
        "--report",
        p(&report),
        "bench",
        "--levels",
        "2..4",
        "--reps",
        "2",
        "--warm",
    ]);
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0]["decompose_ratio"].is_null());
    assert!(rows[2]["decompose_ratio"].as_f64().unwrap() > 0.0);
    assert!(report.exists());
    let (_, err) = fails(&["bench", "--levels", "5..2"]);
    assert_eq!(err["kind"], "usage");
}
