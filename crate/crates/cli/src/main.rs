//! `cryosim`: run the simulator stage by stage or end to end.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use cryosim::formats::{parse_pick_table, parse_scene_config, SceneConfig};
use cryosim::imaging::{
    apply_noise, assemble_potential, ctf_filter, project, render_mask, NoiseModel, NoiseSpec, Provenance,
};
use cryosim::metrics::{
    angular_error, auprc, fsc, match_picks, pose_loss, pr_curve, resolution_at, top_n, Pick, PoseBatch, PosePair,
};
use cryosim::pipeline::{self, build_library, generate_scene, generate_scene_ice, ErrorKind, PipelineError, RunOptions};
use cryosim::scene::SceneManifest;
use cryosim::{DensityVolume, Mat3, Micrograph, Scene};

#[derive(Parser)]
#[command(name = "cryosim", version, about = "Deterministic cryo-EM micrograph simulator")]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Shared {
    /// Scene configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads; defaults to all cores. Never changes outputs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Structure library.
    #[command(subcommand)]
    Library(LibraryCmd),
    /// Particle placement.
    #[command(subcommand)]
    Scene(SceneCmd),
    /// 3D potential.
    #[command(subcommand)]
    Volume(VolumeCmd),
    /// Line-integral projection.
    #[command(subcommand)]
    Micrograph(MicrographCmd),
    /// Contrast transfer function.
    #[command(subcommand)]
    Ctf(CtfCmd),
    /// Baseline noise.
    #[command(subcommand)]
    Noise(NoiseCmd),
    /// Occupancy masks.
    #[command(subcommand)]
    Mask(MaskCmd),
    /// Evaluation metrics.
    #[command(subcommand)]
    Metrics(MetricsCmd),
    /// End-to-end generation.
    #[command(subcommand)]
    Pipeline(PipelineCmd),
}

#[derive(Subcommand)]
enum LibraryCmd {
    /// Voxelize every configured structure into `<id>.mrc`.
    Build,
}

#[derive(Subcommand)]
enum SceneCmd {
    /// Place particles and write `scene.json`.
    Place {
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
}

#[derive(Subcommand)]
enum VolumeCmd {
    /// Assemble the scene potential into `potential.mrc`.
    Assemble {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Leave out the ice slab.
        #[arg(long)]
        no_ice: bool,
    },
}

#[derive(Subcommand)]
enum MicrographCmd {
    /// Project a volume along z into `projection.mrc`.
    Project {
        #[arg(long)]
        volume: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        z_lo: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        z_hi: Option<f64>,
    },
}

#[derive(Subcommand)]
enum CtfCmd {
    /// Filter an image with the CTF into `ctf.mrc`. Optics come from the
    /// config when given; flags override.
    Apply {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        defocus: Option<f64>,
        #[arg(long)]
        voltage: Option<f64>,
        #[arg(long)]
        cs: Option<f64>,
        #[arg(long)]
        amplitude_contrast: Option<f64>,
        #[arg(long)]
        b_factor: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Gaussian,
    Poisson,
    PoissonGaussian,
}

#[derive(Subcommand)]
enum NoiseCmd {
    /// Add noise at a target SNR into `noisy.mrc`.
    Apply {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "gaussian")]
        model: ModelArg,
        /// Variance ratio; 0 means pure noise.
        #[arg(long, default_value_t = 0.1)]
        snr: f64,
        #[arg(long)]
        dose: Option<f64>,
        /// Pure-noise standard deviation.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
    },
}

#[derive(Subcommand)]
enum MaskCmd {
    /// Rasterize placement disks into `mask.mrc`.
    Render {
        #[arg(long)]
        scene: PathBuf,
    },
}

#[derive(Subcommand)]
enum MetricsCmd {
    /// Fourier shell correlation of two volumes.
    Fsc {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_values_t = [0.143, 0.5])]
        thresholds: Vec<f64>,
    },
    /// Precision/recall of picks against ground truth.
    Pr {
        /// STAR pick table with figure-of-merit confidences.
        #[arg(long)]
        picks: PathBuf,
        /// Ground truth: a STAR table or a scene manifest (`.json`).
        #[arg(long)]
        truth: PathBuf,
        /// Pixel size for scene-manifest truth, Å.
        #[arg(long)]
        pixel_size: Option<f64>,
        /// Match radius in pixels; defaults to the mean particle radius.
        #[arg(long)]
        d_match: Option<f64>,
        #[arg(long, default_value_t = 100)]
        levels: usize,
        #[arg(long)]
        top_n: Option<usize>,
        /// Also write `pr.csv`.
        #[arg(long)]
        csv: bool,
    },
    /// Angular error and pose loss of a batch of predictions.
    Pose {
        /// JSON `{"pairs": [{"r_gt", "r_pred", "t_gt", "t_pred"}]}` with
        /// row-major 3x3 rotations.
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum PipelineCmd {
    /// Generate micrographs, masks and placements with a run manifest.
    Run {
        #[arg(long, default_value_t = 1)]
        scenes: usize,
        #[arg(long)]
        no_preview: bool,
    },
}

/// Error carrying the process exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: e.into() }
}

fn data_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 3, error: e.into() }
}

fn internal_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 4, error: e.into() }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match e.kind {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Internal => 4,
        };
        Failure { code, error: e.into() }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn load_config(shared: &Shared) -> Result<SceneConfig> {
    let path = shared.config.as_ref().ok_or_else(|| config_err(anyhow!("--config is required")))?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(config_err)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut cfg = parse_scene_config(&text, base).with_context(|| format!("in {}", path.display())).map_err(config_err)?;
    if let Some(seed) = shared.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display())).map_err(data_err)
}

fn write(shared: &Shared, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(&shared.out).with_context(|| format!("creating {}", shared.out.display())).map_err(data_err)?;
    let path = shared.out.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display())).map_err(data_err)?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

fn read_image(path: &Path, provenance: Provenance) -> Result<Micrograph> {
    Micrograph::from_mrc(&read(path)?, provenance).with_context(|| path.display().to_string()).map_err(data_err)
}

fn read_volume(path: &Path) -> Result<DensityVolume> {
    DensityVolume::from_mrc(&read(path)?).with_context(|| path.display().to_string()).map_err(data_err)
}

fn read_scene(path: &Path) -> Result<Scene> {
    let m: SceneManifest = serde_json::from_slice(&read(path)?)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(data_err)?;
    Ok(Scene::from_manifest(m))
}

fn write_image(shared: &Shared, name: &str, m: &Micrograph) -> Result<()> {
    write(shared, name, &m.to_mrc().map_err(internal_err)?)?;
    Ok(())
}

fn write_json(shared: &Shared, name: &str, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(internal_err)?;
    println!("{text}");
    write(shared, name, text.as_bytes())?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let shared = &cli.shared;
    match cli.command {
        Command::Library(LibraryCmd::Build) => {
            let cfg = load_config(shared)?;
            let lib = build_library(&cfg)?;
            let mut index = Vec::new();
            for e in &lib.entries {
                let file = format!("{}.mrc", e.id);
                write(shared, &file, &e.volume.to_mrc().map_err(internal_err)?)?;
                index.push(serde_json::json!({"id": e.id, "radius": e.radius, "atoms": e.model.len(), "volume": file}));
            }
            write_json(shared, "library.json", &serde_json::json!({ "structures": index }))
        }
        Command::Scene(SceneCmd::Place { index }) => {
            let cfg = load_config(shared)?;
            let lib = build_library(&cfg)?;
            let scene = generate_scene(&cfg, &lib, index)?;
            write(shared, "scene.json", scene.to_json().as_bytes())?;
            Ok(())
        }
        Command::Volume(VolumeCmd::Assemble { scene, index, no_ice }) => {
            let cfg = load_config(shared)?;
            let lib = build_library(&cfg)?;
            let scene = read_scene(&scene)?;
            let grid = pipeline::scene_grid(&cfg);
            let ice = (!no_ice).then(|| generate_scene_ice(&cfg, index));
            let vol = assemble_potential(&scene.placements, &lib.volumes(), ice.as_ref().map(|s| (s, cfg.ice_contrast)), &grid)
                .map_err(data_err)?;
            write(shared, "potential.mrc", &vol.to_mrc().map_err(internal_err)?)?;
            Ok(())
        }
        Command::Micrograph(MicrographCmd::Project { volume, z_lo, z_hi }) => {
            let vol = read_volume(&volume)?;
            let m = project(&vol, z_lo.unwrap_or(f64::NEG_INFINITY), z_hi.unwrap_or(f64::INFINITY)).map_err(data_err)?;
            write_image(shared, "projection.mrc", &m)
        }
        Command::Ctf(CtfCmd::Apply { input, defocus, voltage, cs, amplitude_contrast, b_factor }) => {
            let mut ctf = match shared.config {
                Some(_) => load_config(shared)?.ctf,
                None => Default::default(),
            };
            ctf.defocus = defocus.unwrap_or(ctf.defocus);
            ctf.voltage_kv = voltage.unwrap_or(ctf.voltage_kv);
            ctf.cs_mm = cs.unwrap_or(ctf.cs_mm);
            ctf.amplitude_contrast = amplitude_contrast.unwrap_or(ctf.amplitude_contrast);
            ctf.b_factor = b_factor.unwrap_or(ctf.b_factor);
            ctf.validate().map_err(|e| config_err(anyhow!(e)))?;
            let m = read_image(&input, Provenance::Clean)?;
            let out = ctf_filter(&m, &ctf).map_err(data_err)?;
            write_image(shared, "ctf.mrc", &out)
        }
        Command::Noise(NoiseCmd::Apply { input, model, snr, dose, sigma }) => {
            let model = match model {
                ModelArg::Gaussian => NoiseModel::Gaussian,
                ModelArg::Poisson => NoiseModel::Poisson,
                ModelArg::PoissonGaussian => NoiseModel::PoissonGaussian,
            };
            let spec = NoiseSpec { model, target_snr: snr, dose, sigma, seed: shared.seed.unwrap_or(0) };
            spec.validate().map_err(|e| config_err(anyhow!(e)))?;
            let m = read_image(&input, Provenance::Ctf)?;
            let out = apply_noise(&m, &spec).map_err(data_err)?;
            write_image(shared, "noisy.mrc", &out)
        }
        Command::Mask(MaskCmd::Render { scene }) => {
            let cfg = load_config(shared)?;
            let scene = read_scene(&scene)?;
            let g = pipeline::scene_grid(&cfg);
            let m = render_mask(&scene.placements, g.width, g.height, g.spacing, [g.origin.x, g.origin.y]);
            write_image(shared, "mask.mrc", &m)
        }
        Command::Metrics(cmd) => metrics(shared, cmd),
        Command::Pipeline(PipelineCmd::Run { scenes, no_preview }) => {
            let cfg = load_config(shared)?;
            let opts = RunOptions { out_dir: shared.out.clone(), scenes, previews: !no_preview };
            let manifest = pipeline::run_pipeline(&cfg, &opts)?;
            for o in &manifest.outputs {
                println!("{}  {}", o.digest, o.path);
            }
            Ok(())
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseInputPair {
    r_gt: [[f64; 3]; 3],
    r_pred: [[f64; 3]; 3],
    t_gt: [f64; 2],
    t_pred: [f64; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseInput {
    pairs: Vec<PoseInputPair>,
}

fn row_major(r: &[[f64; 3]; 3]) -> Mat3 {
    Mat3::from_fn(|i, j| r[i][j])
}

fn picks_from_star(path: &Path) -> Result<Vec<Pick>> {
    let records = parse_pick_table(&read(path)?).with_context(|| path.display().to_string()).map_err(data_err)?;
    Ok(records.into_iter().map(|r| Pick { x: r.x, y: r.y, confidence: r.confidence }).collect())
}

fn metrics(shared: &Shared, cmd: MetricsCmd) -> Result<()> {
    match cmd {
        MetricsCmd::Fsc { a, b, thresholds } => {
            let curve = fsc(&read_volume(&a)?, &read_volume(&b)?).map_err(data_err)?;
            let res: HashMap<String, _> =
                thresholds.iter().map(|&t| (t.to_string(), resolution_at(&curve, t))).collect();
            write_json(shared, "fsc.json", &serde_json::json!({ "curve": curve, "resolution": res }))
        }
        MetricsCmd::Pr { picks, truth, pixel_size, d_match, levels, top_n: n, csv } => {
            let mut predicted = picks_from_star(&picks)?;
            if let Some(n) = n {
                predicted = top_n(&predicted, n);
            }
            let (gt, default_d): (Vec<(f64, f64)>, Option<f64>) =
                if truth.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
                    let p = pixel_size.ok_or_else(|| config_err(anyhow!("--pixel-size is required for scene truth")))?;
                    let scene = read_scene(&truth)?;
                    let lo = scene.extents.lo;
                    let gt: Vec<(f64, f64)> = scene
                        .placements
                        .iter()
                        .map(|q| ((q.translation.x - lo.x) / p, (q.translation.y - lo.y) / p))
                        .collect();
                    let mean_r = scene.placements.iter().map(|q| q.radius).sum::<f64>()
                        / scene.placements.len().max(1) as f64;
                    (gt, (mean_r > 0.0).then_some(mean_r / p))
                } else {
                    (picks_from_star(&truth)?.into_iter().map(|q| (q.x, q.y)).collect(), None)
                };
            let d = d_match
                .or(default_d)
                .ok_or_else(|| config_err(anyhow!("--d-match is required when truth has no particle radius")))?;
            let matched = match_picks(&predicted, &gt, d).map_err(config_err)?;
            let curve = pr_curve(&matched, levels);
            let area = auprc(&curve);
            if csv {
                let mut text = String::from("threshold,precision,recall,tp,fp,fn\n");
                for p in &curve.points {
                    text += &format!("{},{},{},{},{},{}\n", p.threshold, p.precision, p.recall, p.tp, p.fp, p.fn_);
                }
                write(shared, "pr.csv", text.as_bytes())?;
            }
            write_json(
                shared,
                "pr.json",
                &serde_json::json!({ "auprc": area, "d_match": d, "false_negatives": matched.false_negatives, "curve": curve }),
            )
        }
        MetricsCmd::Pose { input } => {
            let parsed: PoseInput = serde_json::from_slice(&read(&input)?)
                .with_context(|| format!("parsing {}", input.display()))
                .map_err(data_err)?;
            let pairs = parsed
                .pairs
                .iter()
                .map(|p| PosePair {
                    r_gt: row_major(&p.r_gt),
                    r_pred: row_major(&p.r_pred),
                    t_gt: p.t_gt.into(),
                    t_pred: p.t_pred.into(),
                })
                .collect();
            let batch = PoseBatch::new(pairs).map_err(data_err)?;
            write_json(
                shared,
                "pose.json",
                &serde_json::json!({ "angular_error": angular_error(&batch), "pose_loss": pose_loss(&batch), "pairs": batch.len() }),
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.shared.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.shared.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(4);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
