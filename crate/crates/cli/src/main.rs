use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use photostamp::bench::BenchReport;
use photostamp::cipherstream::{CameraIdentity, PhotoId};
use photostamp::imageio::{load_image, save_image, ImageFormat, RgbImage};
use photostamp::spatial::{ChannelRoles, Granularity, MismatchMap};
use photostamp::synth;
use photostamp::tamper::{apply_tamper, run_detection_bench, ScenarioName, TamperScenario, TamperTruth};
use photostamp::verifier::{stamp, verify_detailed, ForgeryReport, StampConfig, Verdict, TECHNIQUES};
use photostamp_pas::{Mode, Registration, Registry, VerifyRequest, VerifyResponse};
use serde_json::json;

const EXIT_ERROR: u8 = 1;
const EXIT_TAMPERED: u8 = 2;
const EXIT_UNKNOWN_CAMERA: u8 = 3;

#[derive(Parser)]
#[command(name = "photostamp", version, about = "Stamp photos with a keyed fragile watermark and verify them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed the camera's stamp and write a lossless image.
    Stamp {
        #[arg(long)]
        camera_id: String,
        #[command(flatten)]
        technique: TechniqueArgs,
        input: PathBuf,
        output: PathBuf,
    },
    /// Check an image. Exit 0 authentic, 2 tampered, 3 unknown camera, 1 error.
    Verify {
        /// Verify directly against this camera id.
        #[arg(long, conflicts_with_all = ["registry", "server"])]
        camera_id: Option<String>,
        /// Resolve the image's photo id in a local register file.
        #[arg(long, conflicts_with = "server")]
        registry: Option<PathBuf>,
        /// Send the image to a running authentication server.
        #[arg(long)]
        server: Option<String>,
        #[command(flatten)]
        technique: TechniqueArgs,
        /// Write the mismatch mask to this PNG and report it instead of boxes.
        #[arg(long)]
        mask: Option<PathBuf>,
        input: PathBuf,
    },
    /// Apply one manipulation scenario and write the result plus ground truth.
    Tamper {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Ground-truth JSON path (default: OUTPUT with a .json extension).
        #[arg(long)]
        truth: Option<PathBuf>,
        input: PathBuf,
        output: PathBuf,
    },
    /// Quality bench over a corpus for all techniques, optionally with the detection bench.
    Bench {
        /// Directory of PNG/BMP/JPEG images. Without it, the built-in synthetic corpus is used.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Output prefix; writes PREFIX.json and PREFIX.csv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = synth::CORPUS_SEED)]
        seed: u64,
        /// Also run stamp/tamper/verify over every scenario; writes PREFIX-detection.{json,csv}.
        #[arg(long)]
        detection: bool,
    },
    /// Run the authentication server.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        registry: PathBuf,
    },
    /// Register a camera in a local register file or on a server.
    Register {
        #[arg(long)]
        camera_id: String,
        #[arg(long, required_unless_present = "server", conflicts_with = "server")]
        registry: Option<PathBuf>,
        #[arg(long)]
        server: Option<String>,
    },
}

#[derive(Args)]
struct TechniqueArgs {
    /// One of lsb, bit4, msb, dc, first-ac, mid-ac, last-ac.
    #[arg(long, default_value = "lsb")]
    technique: String,
    /// Coefficient tolerance for frequency techniques.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value = "blue-modifier/red-modified")]
    roles: String,
}

impl TechniqueArgs {
    fn config(&self) -> Result<StampConfig> {
        let mut cfg = StampConfig::technique(&self.technique)?.with_roles(ChannelRoles::parse(&self.roles)?);
        if let Some(tol) = self.tol {
            if cfg.is_spatial() {
                bail!("--tol only applies to frequency techniques");
            }
            cfg = cfg.with_tolerance(tol)?;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Stamp { camera_id, technique, input, output } => {
            let cam = CameraIdentity::new(camera_id)?;
            let img = load(&input)?;
            let stamped = stamp(&img, &cam, &technique.config()?)?;
            save_image(&stamped, &output).with_context(|| format!("writing {}", output.display()))?;
            println!("{}", json!({ "output": output, "photo_id": stamped.photo_id() }));
            Ok(0)
        }
        Command::Verify { camera_id, registry, server, technique, mask, input } => {
            cmd_verify(camera_id, registry, server, technique.config()?, mask, &input)
        }
        Command::Tamper { scenario, seed, truth, input, output } => {
            let name: ScenarioName = scenario.parse()?;
            let img = load(&input)?;
            let sc = TamperScenario::preset(name, img.width(), img.height(), seed)?;
            let result = apply_tamper(&img, &sc)?;
            save_image(&result.image, &output).with_context(|| format!("writing {}", output.display()))?;
            let truth_path = truth.unwrap_or_else(|| output.with_extension("json"));
            let record = TamperTruth {
                scenario: sc,
                truth_region: result.truth_region,
                dims_changed: result.dims_changed,
                width: result.image.width(),
                height: result.image.height(),
            };
            fs::write(&truth_path, serde_json::to_vec_pretty(&record)?)
                .with_context(|| format!("writing {}", truth_path.display()))?;
            println!("{}", json!({ "output": output, "truth": truth_path }));
            Ok(0)
        }
        Command::Bench { corpus, out, seed, detection } => cmd_bench(corpus.as_deref(), &out, seed, detection),
        Command::Serve { port, host, registry } => {
            tracing_subscriber::fmt().with_target(false).init();
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad --host/--port")?;
            let registry = Arc::new(Registry::open(&registry)?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(photostamp_pas::serve(addr, registry))?;
            Ok(0)
        }
        Command::Register { camera_id, registry, server } => {
            if let Some(base) = server {
                let resp = reqwest::blocking::Client::new()
                    .post(format!("{}/v1/cameras", base.trim_end_matches('/')))
                    .json(&json!({ "camera_id": camera_id }))
                    .send()?;
                let status = resp.status();
                let body: serde_json::Value = resp.json()?;
                if !status.is_success() {
                    bail!("server answered {status}: {body}");
                }
                println!("{body}");
            } else {
                let path = registry.ok_or_else(|| anyhow!("--registry or --server is required"))?;
                let reg = Registry::open(&path)?;
                let outcome = reg.register(&camera_id)?;
                let r = outcome.record();
                println!(
                    "{}",
                    json!({
                        "photo_id": r.photo_id,
                        "registered_at": r.registered_at,
                        "created": matches!(outcome, Registration::Created(_)),
                    })
                );
            }
            Ok(0)
        }
    }
}

fn load(path: &Path) -> Result<RgbImage> {
    load_image(path).with_context(|| format!("reading {}", path.display()))
}

fn exit_code(v: Verdict) -> u8 {
    match v {
        Verdict::Authentic => 0,
        Verdict::Tampered => EXIT_TAMPERED,
        Verdict::UnknownCamera => EXIT_UNKNOWN_CAMERA,
        Verdict::Error => EXIT_ERROR,
    }
}

fn print_report(report: &ForgeryReport, extra: serde_json::Value, mask: Option<&Path>) -> Result<()> {
    let mut value = serde_json::to_value(report)?;
    if let Some(m) = mask {
        value["regions"] = serde_json::Value::Null;
        value["mask"] = json!(m);
    }
    if let (Some(obj), serde_json::Value::Object(more)) = (value.as_object_mut(), extra) {
        obj.extend(more);
    }
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn write_mask(map: &MismatchMap, path: &Path) -> Result<()> {
    let cell = match map.granularity() {
        Granularity::Pixel => 1,
        Granularity::Block8 => 8,
    };
    let (cols, rows) = map.grid_dims();
    let img = RgbImage::from_fn(map.width(), map.height(), |x, y| {
        let (c, r) = (x / cell, y / cell);
        if c < cols && r < rows && map.get(c, r) {
            [255; 3]
        } else {
            [0; 3]
        }
    })?;
    save_image(&img, path).with_context(|| format!("writing {}", path.display()))
}

fn cmd_verify(
    camera_id: Option<String>,
    registry: Option<PathBuf>,
    server: Option<String>,
    cfg: StampConfig,
    mask: Option<PathBuf>,
    input: &Path,
) -> Result<u8> {
    if let Some(base) = server {
        if mask.is_some() {
            bail!("--mask needs local verification (--camera-id or --registry)");
        }
        let bytes = fs::read(input).with_context(|| format!("reading {}", input.display()))?;
        let resp = reqwest::blocking::Client::new()
            .post(format!("{}/v1/verify", base.trim_end_matches('/')))
            .json(&VerifyRequest::new(Mode::PublicOnline, &bytes, cfg))
            .send()?;
        let status = resp.status();
        if !status.is_success() {
            bail!("server answered {status}: {}", resp.text().unwrap_or_default());
        }
        let body: VerifyResponse = resp.json()?;
        print_report(
            &body.report,
            json!({ "camera_id_found": body.camera_id_found, "photo_id_used": body.photo_id_used }),
            None,
        )?;
        return Ok(exit_code(body.report.verdict));
    }

    let img = load(input)?;
    let cam = match (camera_id, registry) {
        (Some(id), _) => CameraIdentity::new(id)?,
        (None, Some(path)) => {
            let reg = Registry::open(&path)?;
            let found = img
                .photo_id()
                .and_then(|raw| PhotoId::parse(raw).ok())
                .and_then(|id| reg.lookup(&id).ok());
            match found {
                Some(cam) => cam,
                None => {
                    let report = ForgeryReport::unknown_camera("photo id missing or not registered");
                    print_report(&report, json!({ "photo_id_used": img.photo_id() }), None)?;
                    return Ok(EXIT_UNKNOWN_CAMERA);
                }
            }
        }
        (None, None) => bail!("one of --camera-id, --registry or --server is required"),
    };
    let v = match verify_detailed(&img, &cam, &cfg) {
        Ok(v) => v,
        Err(e) => {
            print_report(&ForgeryReport::error(e.to_string()), json!({}), None)?;
            return Ok(EXIT_ERROR);
        }
    };
    if let Some(path) = &mask {
        write_mask(&v.map, path)?;
    }
    print_report(&v.report, json!({ "technique": cfg.to_string() }), mask.as_deref())?;
    Ok(exit_code(v.report.verdict))
}

fn load_corpus(dir: &Path) -> Result<Vec<(String, RgbImage)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading corpus {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| ImageFormat::from_path(p).is_ok())
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no PNG, BMP or JPEG images in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| {
            let name = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok((name, load(p)?))
        })
        .collect()
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_bench(corpus: Option<&Path>, out: &Path, seed: u64, detection: bool) -> Result<u8> {
    let images = match corpus {
        Some(dir) => load_corpus(dir)?,
        None => synth::corpus(seed),
    };
    let techniques: Vec<(String, StampConfig)> = TECHNIQUES
        .iter()
        .map(|n| Ok((n.to_string(), StampConfig::technique(n)?)))
        .collect::<Result<_>>()?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let report = BenchReport::run(&images, &techniques)?;
    fs::write(with_suffix(out, ".json"), serde_json::to_vec_pretty(&report)?)?;
    fs::write(with_suffix(out, ".csv"), report.to_csv()?)?;

    println!("{:<10} {:<6} {:>12} {:>12} {:>10} {:>10} {:>10}", "technique", "", "MAE", "MSE", "PSNR", "SSIM", "UIQI");
    for s in &report.summaries {
        for (label, pick) in [("mean", 0), ("std", 1)] {
            let f = |st: photostamp::bench::Stat| if pick == 0 { st.mean } else { st.std };
            println!(
                "{:<10} {:<6} {:>12.6} {:>12.4} {:>10.4} {:>10.6} {:>10.6}",
                s.technique,
                label,
                f(s.mae),
                f(s.mse),
                f(s.psnr),
                f(s.ssim),
                f(s.uiqi)
            );
        }
    }

    if detection {
        let mut scenarios = vec![ScenarioName::Identity];
        scenarios.extend(ScenarioName::MANIPULATIONS);
        let table = run_detection_bench(&images, &techniques, &scenarios, seed)?;
        fs::write(with_suffix(out, "-detection.json"), serde_json::to_vec_pretty(&table)?)?;
        fs::write(with_suffix(out, "-detection.csv"), table.to_csv()?)?;
        for (tech, _) in &techniques {
            let rate = table
                .detection_rate(|r| &r.technique == tech && r.scenario != ScenarioName::Identity)
                .unwrap_or(0.0);
            println!("detection {tech:<10} {:.1}% of manipulated images flagged", 100.0 * rate);
        }
    }
    Ok(0)
}
