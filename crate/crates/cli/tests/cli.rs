use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::thread::sleep;
use std::time::{Duration, Instant};

use photostamp::imageio::{load_image, save_image, RgbImage};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_photostamp"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn photostamp")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json_out(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn sample_image(dir: &Path, name: &str, w: u32, h: u32, seed: u32) -> PathBuf {
    let img = RgbImage::from_fn(w, h, |x, y| {
        let v = (x * 7 + y * 13 + seed).wrapping_mul(2654435761);
        [(v >> 5) as u8, (v >> 13) as u8, (v >> 21) as u8]
    })
    .unwrap();
    let path = dir.join(name);
    save_image(&img, &path).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn stamp_verify_tamper_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample_image(dir.path(), "in.png", 96, 96, 1);
    let stamped = dir.path().join("out.png");

    let out = run(&["stamp", "--camera-id", "CAM-001", "--technique", "lsb", s(&input), s(&stamped)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json_out(&out)["photo_id"], "6b332c7a7c864a4b");

    let out = run(&["verify", "--camera-id", "CAM-001", "--technique", "lsb", s(&stamped)]);
    assert_eq!(code(&out), 0);
    assert_eq!(json_out(&out)["verdict"], "authentic");

    let out = run(&["verify", "--camera-id", "CAM-002", s(&stamped)]);
    assert_eq!(code(&out), 2);

    let tampered = dir.path().join("fill.png");
    let out = run(&["tamper", "--scenario", "region_fill_constant", "--seed", "4", s(&stamped), s(&tampered)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let truth: Value = serde_json::from_slice(&std::fs::read(dir.path().join("fill.json")).unwrap()).unwrap();
    assert_eq!(truth["truth_region"].as_array().unwrap().len(), 1);
    assert_eq!(truth["dims_changed"], false);

    let out = run(&["verify", "--camera-id", "CAM-001", s(&tampered)]);
    assert_eq!(code(&out), 2);
    let report = json_out(&out);
    assert_eq!(report["verdict"], "tampered");
    assert!(!report["regions"].as_array().unwrap().is_empty());

    let mask = dir.path().join("mask.png");
    let out = run(&["verify", "--camera-id", "CAM-001", "--mask", s(&mask), s(&tampered)]);
    assert_eq!(code(&out), 2);
    assert!(json_out(&out)["regions"].is_null());
    let m = load_image(&mask).unwrap();
    let lit = m.pixels().iter().filter(|p| p[0] == 255).count();
    assert!(lit > 300 && lit < 1024, "{lit} mask pixels");
}

#[test]
fn frequency_technique_with_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample_image(dir.path(), "in.bmp", 64, 48, 2);
    let stamped = dir.path().join("out.bmp");
    let out = run(&["stamp", "--camera-id", "CAM-F", "--technique", "mid-ac", s(&input), s(&stamped)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["verify", "--camera-id", "CAM-F", "--technique", "mid-ac", "--tol", "8", s(&stamped)]);
    assert_eq!(code(&out), 0);
    let out = run(&["verify", "--camera-id", "CAM-F", "--technique", "lsb", "--tol", "8", s(&stamped)]);
    assert_eq!(code(&out), 1);
}

#[test]
fn operational_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample_image(dir.path(), "in.png", 32, 32, 3);
    let out = run(&["stamp", "--camera-id", "CAM-001", s(&input), s(&dir.path().join("out.jpg"))]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("lossy"));
    assert_eq!(code(&run(&["verify", "--camera-id", "CAM-001", s(&dir.path().join("missing.png"))])), 1);
    assert_eq!(code(&run(&["stamp", "--camera-id", "", s(&input), s(&dir.path().join("o.png"))])), 1);
    assert_eq!(code(&run(&["stamp", "--camera-id", "C", "--technique", "wavelet", s(&input), "o.png"])), 1);
    assert_eq!(code(&run(&["verify", s(&input)])), 1);
    assert_eq!(code(&run(&["tamper", "--scenario", "smudge", s(&input), "o.png"])), 1);
}

#[test]
fn local_register_resolves_photo_ids() {
    let dir = tempfile::tempdir().unwrap();
    let reg = dir.path().join("cidr.json");
    let input = sample_image(dir.path(), "in.png", 40, 40, 4);
    let stamped = dir.path().join("out.png");
    run(&["stamp", "--camera-id", "CAM-REG", s(&input), s(&stamped)]);

    let out = run(&["register", "--camera-id", "CAM-OTHER", "--registry", s(&reg)]);
    assert_eq!(code(&out), 0);
    let out = run(&["verify", "--registry", s(&reg), s(&stamped)]);
    assert_eq!(code(&out), 3);
    assert_eq!(json_out(&out)["verdict"], "unknown_camera");

    let out = run(&["register", "--camera-id", "CAM-REG", "--registry", s(&reg)]);
    assert_eq!(json_out(&out)["created"], true);
    let out = run(&["register", "--camera-id", "CAM-REG", "--registry", s(&reg)]);
    assert_eq!(json_out(&out)["created"], false);
    assert_eq!(code(&run(&["verify", "--registry", s(&reg), s(&stamped)])), 0);
    // unstamped input carries no photo id
    assert_eq!(code(&run(&["verify", "--registry", s(&reg), s(&input)])), 3);
}

#[test]
fn bench_writes_seven_technique_sections_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir(&corpus).unwrap();
    sample_image(&corpus, "a.png", 48, 40, 5);
    sample_image(&corpus, "b.png", 40, 40, 6);
    sample_image(&corpus, "c.bmp", 56, 48, 7);
    std::fs::write(corpus.join("notes.txt"), "ignored").unwrap();

    let prefix = dir.path().join("report");
    let out = run(&["bench", "--corpus", s(&corpus), "--out", s(&prefix)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.contains(" mean ")).count(), 7);
    assert_eq!(text.lines().filter(|l| l.contains(" std ")).count(), 7);

    let json_path = dir.path().join("report.json");
    let report: Value = serde_json::from_slice(&std::fs::read(&json_path).unwrap()).unwrap();
    let summaries = report["summaries"].as_array().unwrap();
    assert_eq!(summaries.len(), 7);
    for sm in summaries {
        assert_eq!(sm["images"], 3);
        for idx in ["mae", "mse", "psnr", "ssim", "uiqi"] {
            assert!(sm[idx]["mean"].is_number() && sm[idx]["std"].is_number(), "{idx}");
        }
    }
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 7);

    let first = std::fs::read(&json_path).unwrap();
    run(&["bench", "--corpus", s(&corpus), "--out", s(&prefix)]);
    assert_eq!(std::fs::read(&json_path).unwrap(), first);
}

#[test]
fn bench_detection_table() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir(&corpus).unwrap();
    sample_image(&corpus, "a.png", 96, 96, 8);
    let prefix = dir.path().join("r");
    let out = run(&["bench", "--corpus", s(&corpus), "--out", s(&prefix), "--detection", "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("r-detection.csv")).unwrap();
    assert!(csv.starts_with("image,technique,scenario,verdict,flagged_ratio,iou,runtime_ms"));
    assert_eq!(csv.lines().count(), 1 + 7 * 17);
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn serve_register_and_verify_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let reg = dir.path().join("cidr.json");
    let _server = Server(
        bin()
            .args(["serve", "--port", &port.to_string(), "--registry", s(&reg)])
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .unwrap(),
    );
    let base = format!("http://127.0.0.1:{port}");
    let deadline = Instant::now() + Duration::from_secs(20);
    loop {
        let out = run(&["register", "--camera-id", "CAM-NET", "--server", &base]);
        if code(&out) == 0 {
            assert_eq!(json_out(&out)["photo_id"].as_str().unwrap().len(), 16);
            break;
        }
        assert!(Instant::now() < deadline, "server did not come up");
        sleep(Duration::from_millis(100));
    }

    let input = sample_image(dir.path(), "in.png", 64, 64, 9);
    let stamped = dir.path().join("out.png");
    run(&["stamp", "--camera-id", "CAM-NET", s(&input), s(&stamped)]);
    let out = run(&["verify", "--server", &base, s(&stamped)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json_out(&out)["camera_id_found"], true);

    let foreign = dir.path().join("foreign.png");
    run(&["stamp", "--camera-id", "CAM-ELSEWHERE", s(&input), s(&foreign)]);
    assert_eq!(code(&run(&["verify", "--server", &base, s(&foreign)])), 3);
}
