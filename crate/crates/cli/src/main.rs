//! Operator-facing command line: analyze image pairs, generate synthetic
//! datasets, train and validate the classifier, run the measurement server
//! and the device emulators.
//!
//! Exit codes: 0 success (and Pass verdicts), 10 Fail 1, 11 Fail 2,
//! 2 usage or missing input, 1 runtime failure.

use std::net::{SocketAddr, TcpListener, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use soluscan_core::config::PipelineConfig;
use soluscan_core::dataset::{
    augment, image_count, label_histogram, read_manifest, write_feature_csv, Label, Scenario,
};
use soluscan_core::eval::{kfold_validate, ConfusionMatrix};
use soluscan_core::pipeline::{analyze_pair, case_features};
use soluscan_core::raster::{BinaryMask, Raster};
use soluscan_core::rpa;
use soluscan_core::svm::{train_svm, SvmHyper, SvmModel};
use soluscan_core::synth::{
    category_preset_sized, dissolution_series, generate_dataset, render_scene, DatasetSpec,
    DissolutionSeries, FrameGeometry, ParticleField, Placement, SceneParams, Schedule,
};
use soluscan_orchestrator::emulator::{serve_camera, serve_display, Fault, SceneSource};
use soluscan_orchestrator::{run_series, write_trend_csv, FramedStream};

mod svg;

#[derive(Parser)]
#[command(name = "soluscan", version, about = "Solubility analysis from flask image pairs")]
struct Cli {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dotted-key overrides like `hough.min_score=0.3`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a white/check capture pair with a trained model.
    Analyze(AnalyzeArgs),
    /// Render synthetic scenes, series or whole datasets.
    Simulate(SimulateArgs),
    /// Extract features from a dataset manifest and train the classifier.
    Train(TrainArgs),
    /// Stratified k-fold validation over a dataset manifest.
    Validate(ValidateArgs),
    /// Run measurement sessions against display and camera units.
    Serve(ServeArgs),
    /// Run a device emulator (display or camera).
    Emulate(EmulateArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    white: PathBuf,
    #[arg(long)]
    check: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Calibration capture of the empty flask; overrides the analytic grid.
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// Write the mean radial intensity profile as CSV.
    #[arg(long)]
    dump_profiles: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Render a single category preset (A clear, B particles, C residue,
    /// D turbid).
    #[arg(long, conflicts_with_all = ["series", "dataset"])]
    preset: Option<Scenario>,
    /// Render a dissolution series.
    #[arg(long, conflicts_with = "dataset")]
    series: bool,
    /// Render a labeled dataset with a manifest.
    #[arg(long)]
    dataset: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, default_value_t = 1920)]
    frame_width: u32,
    #[arg(long, default_value_t = 1440)]
    frame_height: u32,
    /// Series length.
    #[arg(long, default_value_t = 28)]
    steps: usize,
    /// Series starting turbidity.
    #[arg(long, default_value_t = 0.7)]
    turbidity: f64,
    /// Series starting particle count.
    #[arg(long, default_value_t = 150)]
    particles: usize,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Linear)]
    schedule: ScheduleArg,
    /// Minutes between series steps.
    #[arg(long, default_value_t = 5.0)]
    interval_min: f64,
    /// Dataset label mix.
    #[arg(long, default_value_t = 29)]
    pass_cases: usize,
    #[arg(long, default_value_t = 20)]
    fail1_cases: usize,
    #[arg(long, default_value_t = 104)]
    fail2_cases: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Linear,
    Exponential,
}

impl From<ScheduleArg> for Schedule {
    fn from(s: ScheduleArg) -> Self {
        match s {
            ScheduleArg::Linear => Schedule::Linear,
            ScheduleArg::Exponential => Schedule::Exponential,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
    /// Quadruple the dataset with flip augmentation before training.
    #[arg(long)]
    augment: bool,
    /// Also dump the extracted features as CSV.
    #[arg(long)]
    features_csv: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 4)]
    folds: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    augment: bool,
}

#[derive(Args)]
struct ServeArgs {
    /// Display unit endpoint, host:port.
    #[arg(long)]
    display: String,
    /// Camera unit endpoint, host:port.
    #[arg(long)]
    camera: String,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Seconds between measurements.
    #[arg(long, default_value_t = 0.0)]
    interval_s: f64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Also render the trend as an SVG line chart.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct EmulateArgs {
    #[command(subcommand)]
    device: EmulateDevice,
}

#[derive(Subcommand)]
enum EmulateDevice {
    /// Display unit: acks pattern changes.
    Display {
        #[arg(long)]
        listen: String,
        #[arg(long, default_value = "none")]
        fault: String,
    },
    /// Camera unit: renders the scene on capture requests.
    Camera {
        #[arg(long)]
        listen: String,
        #[arg(long, default_value = "none")]
        fault: String,
        /// Scene preset to photograph.
        #[arg(long, default_value = "A")]
        preset: Scenario,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Walk a dissolution series instead of a static scene.
        #[arg(long, default_value_t = 0)]
        series_steps: usize,
        #[arg(long, default_value_t = 0.7)]
        turbidity: f64,
        #[arg(long, default_value_t = 150)]
        particles: usize,
        #[arg(long, default_value_t = 1920)]
        frame_width: u32,
        #[arg(long, default_value_t = 1440)]
        frame_height: u32,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("soluscan: {e:#}");
            return ExitCode::from(2);
        }
    };
    eprintln!("config hash: {}", cfg.hash());
    match run(cli.command, &cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("soluscan: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            PipelineConfig::load(path).with_context(|| format!("loading {}", path.display()))?
        }
        None => PipelineConfig::default(),
    };
    for spec in &cli.overrides {
        cfg.apply_override(spec)
            .with_context(|| format!("applying --set {spec}"))?;
    }
    Ok(cfg)
}

fn run(command: Command, cfg: &PipelineConfig) -> Result<ExitCode> {
    match command {
        Command::Analyze(args) => cmd_analyze(args, cfg),
        Command::Simulate(args) => cmd_simulate(args, cfg).map(|()| ExitCode::SUCCESS),
        Command::Train(args) => cmd_train(args, cfg),
        Command::Validate(args) => cmd_validate(args, cfg),
        Command::Serve(args) => cmd_serve(args, cfg),
        Command::Emulate(args) => cmd_emulate(args, cfg).map(|()| ExitCode::SUCCESS),
    }
}

/// Missing input files are usage errors (exit 2), not runtime failures.
fn require_file(path: &Path) -> Result<(), ExitCode> {
    if path.is_file() {
        Ok(())
    } else {
        eprintln!("soluscan: no such file: {}", path.display());
        Err(ExitCode::from(2))
    }
}

fn cmd_analyze(args: AnalyzeArgs, cfg: &PipelineConfig) -> Result<ExitCode> {
    for path in [&args.white, &args.check, &args.model] {
        if let Err(code) = require_file(path) {
            return Ok(code);
        }
    }
    if let Some(gt) = &args.ground_truth {
        if let Err(code) = require_file(gt) {
            return Ok(code);
        }
    }
    let white = Raster::load_png(&args.white).context("white image")?;
    let check = Raster::load_png(&args.check).context("check image")?;
    let model = SvmModel::load(&args.model).context("model")?;
    let calibration = match &args.ground_truth {
        Some(path) => Some(BinaryMask::load_png(path).context("ground-truth mask")?),
        None => None,
    };
    let analysis = analyze_pair(&white, &check, &model, cfg, calibration.as_ref())?;
    if let Some(path) = &args.dump_profiles {
        let set = rpa::radial_profiles(&analysis.white_roi);
        let mean = rpa::mean_profile(&set);
        let mut out = String::from("position,mean_intensity\n");
        let half = (mean.len() as f64 - 1.0) / 2.0;
        for (i, v) in mean.iter().enumerate() {
            out.push_str(&format!("{},{v}\n", i as f64 - half));
        }
        std::fs::write(path, out).context("profile dump")?;
    }
    println!("{}", analysis.label);
    let f = analysis.features;
    println!("radial_curvature      {:>14.6}", f.radial_curvature);
    println!("radial_minimum        {:>14.6}", f.radial_minimum);
    println!("radial_mse            {:>14.6}", f.radial_mse);
    println!("particle_pixel_count  {:>14.0}", f.particle_pixel_count);
    println!("superposition_ratio   {:>14.6}", f.superposition_ratio);
    Ok(match analysis.label {
        Label::Pass => ExitCode::SUCCESS,
        Label::Fail1 => ExitCode::from(10),
        Label::Fail2 => ExitCode::from(11),
    })
}

fn geometry_for(cfg: &PipelineConfig, width: u32, height: u32) -> FrameGeometry {
    FrameGeometry {
        width,
        height,
        crop_side: cfg.crop.side,
    }
}

fn series_start(
    geom: FrameGeometry,
    seed: u64,
    turbidity: f64,
    particles: usize,
    cfg: &PipelineConfig,
) -> SceneParams {
    let mut p = SceneParams::clear(
        geom.width,
        geom.height,
        0.41 * geom.crop_side as f64,
        seed,
    );
    p.grid_pitch = cfg.sa.grid.pitch;
    p.grid_thickness = cfg.sa.grid.thickness;
    p.turbidity = turbidity;
    p.particles = ParticleField {
        count: particles,
        radius_min: 2.0,
        radius_max: 5.0,
        intensity: 30.0,
        placement: Placement::Uniform,
    };
    p
}

fn cmd_simulate(args: SimulateArgs, cfg: &PipelineConfig) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let geom = geometry_for(cfg, args.frame_width, args.frame_height);
    if let Some(cat) = args.preset {
        let params = category_preset_sized(cat, args.seed, geom);
        let scene = render_scene(&params)?;
        scene.white.save_png(&args.out.join("white.png"))?;
        scene.check.save_png(&args.out.join("check.png"))?;
        scene.grid.mask.save_png(&args.out.join("grid.png"))?;
        println!(
            "rendered category {} scene (seed {}): truth {}",
            cat, args.seed, scene.truth
        );
        return Ok(());
    }
    if args.series {
        if args.steps < 2 {
            bail!("--steps must be at least 2");
        }
        let start = series_start(geom, args.seed, args.turbidity, args.particles, cfg);
        let series = dissolution_series(&start, args.steps, args.schedule.into(), args.interval_min);
        let mut csv = String::from("step,minutes,turbidity,particles,truth\n");
        for (i, step) in series.steps.iter().enumerate() {
            let scene = render_scene(step)?;
            scene
                .white
                .save_png(&args.out.join(format!("step{i:03}_white.png")))?;
            scene
                .check
                .save_png(&args.out.join(format!("step{i:03}_check.png")))?;
            csv.push_str(&format!(
                "{i},{},{:.4},{},{}\n",
                series.timestamps_min[i], step.turbidity, step.particles.count, scene.truth
            ));
        }
        std::fs::write(args.out.join("series.csv"), csv)?;
        println!("rendered {}-step series into {}", args.steps, args.out.display());
        return Ok(());
    }
    if args.dataset {
        let spec = DatasetSpec {
            pass: args.pass_cases,
            fail1: args.fail1_cases,
            fail2: args.fail2_cases,
            seed: args.seed,
            geometry: geom,
        };
        let records = generate_dataset(&spec, &args.out)?;
        let hist = label_histogram(&records);
        println!(
            "rendered {} cases ({} images) into {}: Pass {}, Fail1 {}, Fail2 {}",
            records.len(),
            image_count(&records),
            args.out.display(),
            hist[Label::Pass.index()],
            hist[Label::Fail1.index()],
            hist[Label::Fail2.index()],
        );
        return Ok(());
    }
    bail!("choose one of --preset, --series or --dataset");
}

fn load_cases(
    manifest: &Path,
    augment_cases: bool,
) -> Result<(Vec<soluscan_core::dataset::CaseRecord>, PathBuf)> {
    let records = read_manifest(manifest)
        .with_context(|| format!("reading manifest {}", manifest.display()))?;
    if records.is_empty() {
        bail!("manifest {} has no cases", manifest.display());
    }
    let base = manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let records = if augment_cases {
        augment(&records)
    } else {
        records
    };
    Ok((records, base))
}

fn cmd_train(args: TrainArgs, cfg: &PipelineConfig) -> Result<ExitCode> {
    if let Err(code) = require_file(&args.manifest) {
        return Ok(code);
    }
    let (records, base) = load_cases(&args.manifest, args.augment)?;
    println!(
        "extracting features from {} cases ({} images)...",
        records.len(),
        image_count(&records)
    );
    let cases = case_features(&records, &base, cfg)?;
    let data: Vec<(soluscan_core::features::FeatureVector, Label)> =
        cases.iter().map(|c| (c.features, c.label)).collect();
    if let Some(path) = &args.features_csv {
        write_feature_csv(&data, path)?;
    }
    let hyper = SvmHyper::from(&cfg.svm);
    let model = train_svm(&data, &hyper)?;
    model.save(&args.out)?;
    let preds: Vec<Label> = data
        .iter()
        .map(|(f, _)| model.classify(f))
        .collect::<Result<_, _>>()?;
    let truth: Vec<Label> = data.iter().map(|(_, l)| *l).collect();
    let cm = ConfusionMatrix::from_pairs(&truth, &preds)?;
    println!("in_sample confusion matrix:");
    print!("{}", cm.render());
    println!("model written to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: ValidateArgs, cfg: &PipelineConfig) -> Result<ExitCode> {
    if args.folds < 2 {
        // Usage error by contract; clap cannot express the bound directly.
        eprintln!("soluscan: --folds must be at least 2");
        return Ok(ExitCode::from(2));
    }
    if let Err(code) = require_file(&args.manifest) {
        return Ok(code);
    }
    let (records, base) = load_cases(&args.manifest, args.augment)?;
    println!(
        "extracting features from {} cases ({} images)...",
        records.len(),
        image_count(&records)
    );
    let cases = case_features(&records, &base, cfg)?;
    let hyper = SvmHyper::from(&cfg.svm);
    let report = kfold_validate(&cases, args.folds, args.seed, &hyper)?;
    println!("{}-fold cross-validation (cv, leakage-free, stratified):", args.folds);
    for (i, (acc, size)) in report
        .per_fold
        .iter()
        .zip(&report.fold_sizes)
        .enumerate()
    {
        println!("  fold {}: {:6.2}%  ({} cases)", i + 1, acc * 100.0, size);
    }
    println!("  mean:   {:6.2}%", report.mean_accuracy() * 100.0);
    Ok(ExitCode::SUCCESS)
}

fn resolve(addr: &str) -> Result<SocketAddr> {
    addr.to_socket_addrs()
        .with_context(|| format!("resolving {addr}"))?
        .next()
        .ok_or_else(|| anyhow!("no address for {addr}"))
}

fn cmd_serve(args: ServeArgs, cfg: &PipelineConfig) -> Result<ExitCode> {
    if let Err(code) = require_file(&args.model) {
        return Ok(code);
    }
    if args.count == 0 {
        bail!("--count must be at least 1");
    }
    std::fs::create_dir_all(&args.out)?;
    let model = SvmModel::load(&args.model)?;
    let max_payload = cfg.protocol.max_frame_mib as usize * 1024 * 1024;
    let mut display = FramedStream::connect(resolve(&args.display)?, max_payload)
        .with_context(|| format!("connecting to display at {}", args.display))?;
    let mut camera = FramedStream::connect(resolve(&args.camera)?, max_payload)
        .with_context(|| format!("connecting to camera at {}", args.camera))?;
    let entries = run_series(
        &mut display,
        &mut camera,
        cfg,
        &model,
        Duration::from_secs_f64(args.interval_s),
        args.count,
        "session",
    );
    let mut ok = 0usize;
    for entry in &entries {
        match &entry.outcome {
            Ok(record) => {
                record.save(&args.out)?;
                ok += 1;
                println!(
                    "step {:3}: {}  ratio {:.3}  particles {:.0}",
                    entry.index,
                    record.label,
                    record.features.superposition_ratio,
                    record.features.particle_pixel_count
                );
            }
            Err(e) => println!("step {:3}: failed: {e}", entry.index),
        }
    }
    let csv_path = args.out.join("trend.csv");
    let mut csv = Vec::new();
    write_trend_csv(&entries, &mut csv)?;
    std::fs::write(&csv_path, csv)?;
    if args.svg {
        svg::write_trend_svg(&entries, &args.out.join("trend.svg"))?;
    }
    println!(
        "{ok}/{} measurements recorded under {}",
        entries.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_fault(s: &str) -> Result<Fault> {
    if let Some(ms) = s.strip_prefix("delay:") {
        let ms: u64 = ms.parse().context("delay milliseconds")?;
        return Ok(Fault::Delay(Duration::from_millis(ms)));
    }
    match s {
        "none" => Ok(Fault::None),
        "drop" => Ok(Fault::Drop),
        "corrupt-frame" => Ok(Fault::CorruptFrame),
        "wrong-order" => Ok(Fault::WrongOrder),
        other => bail!("unknown fault `{other}` (none|delay:<ms>|drop|corrupt-frame|wrong-order)"),
    }
}

fn cmd_emulate(args: EmulateArgs, cfg: &PipelineConfig) -> Result<()> {
    match args.device {
        EmulateDevice::Display { listen, fault } => {
            let fault = parse_fault(&fault)?;
            let listener = TcpListener::bind(&listen)
                .with_context(|| format!("binding display emulator to {listen}"))?;
            println!("display emulator listening on {}", listener.local_addr()?);
            serve_display(listener, fault)?;
        }
        EmulateDevice::Camera {
            listen,
            fault,
            preset,
            seed,
            series_steps,
            turbidity,
            particles,
            frame_width,
            frame_height,
        } => {
            let fault = parse_fault(&fault)?;
            let geom = geometry_for(cfg, frame_width, frame_height);
            let source = if series_steps > 0 {
                if series_steps < 2 {
                    bail!("--series-steps must be at least 2");
                }
                let start = series_start(geom, seed, turbidity, particles, cfg);
                let series: DissolutionSeries =
                    dissolution_series(&start, series_steps, Schedule::Linear, 5.0);
                SceneSource::Series(series)
            } else {
                SceneSource::Static(category_preset_sized(preset, seed, geom))
            };
            let listener = TcpListener::bind(&listen)
                .with_context(|| format!("binding camera emulator to {listen}"))?;
            println!("camera emulator listening on {}", listener.local_addr()?);
            serve_camera(listener, source, fault)?;
        }
    }
    Ok(())
}
