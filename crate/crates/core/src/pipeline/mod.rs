//! End-to-end generation with a reproducibility manifest.

mod library;

pub use library::{build_library, demo_model, load_model, Library, LibraryEntry};

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::density::DensityVolume;
use crate::formats::{parse_pick_table, SceneConfig};
use crate::ice::{generate_ice, IceSlab};
use crate::imaging::{apply_noise, ctf_filter, project_scene, render_mask, ImageGrid, ImagingError, Micrograph, NoiseSpec};
use crate::rng::{derive_seed, stream};
use crate::scene::{
    blend_placements, derive_scale_params, embed_context, import_experimental_poses, ContextParams, Extents,
    PlacementError, PlacementRequest, Placer, Scene,
};
use crate::{ScaleParams, Vec3};

pub const DIGEST_ALGORITHM: &str = "sha256";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Internal,
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub stage: &'static str,
    pub kind: ErrorKind,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: &'static str, kind: ErrorKind, message: impl Into<String>) -> Self {
        Self { stage, kind, message: message.into() }
    }
}

fn imaging_error(stage: &'static str, e: ImagingError) -> PipelineError {
    let kind = match e {
        ImagingError::Invariant(_) => ErrorKind::Internal,
        ImagingError::Invalid(_) => ErrorKind::Config,
        _ => ErrorKind::Data,
    };
    PipelineError::new(stage, kind, e.to_string())
}

/// Scene box `[0, x] x [0, y] x [-z/2, z/2]` in Å.
pub fn scene_extents(cfg: &SceneConfig) -> Extents {
    let [x, y, z] = cfg.extents;
    Extents::new(Vec3::new(0.0, 0.0, -z / 2.0), Vec3::new(x, y, z / 2.0))
}

pub fn scene_grid(cfg: &SceneConfig) -> ImageGrid {
    ImageGrid::from_extents(&scene_extents(cfg), cfg.pixel_size())
}

/// Root seed of scene `index`.
pub fn scene_seed(cfg: &SceneConfig, index: usize) -> u64 {
    derive_seed(cfg.seed, "scene", index as u64)
}

/// Scale regime from the largest particle diameter and the grid voxel count.
pub fn scene_scale(cfg: &SceneConfig, library: &Library) -> ScaleParams {
    let grid = scene_grid(cfg);
    let voxels = (grid.width * grid.height * grid.depth) as f64;
    let size = 2.0 * library.max_radius();
    if size > 0.0 {
        derive_scale_params(size, voxels)
    } else {
        ScaleParams::default()
    }
}

fn context_meshes(cfg: &SceneConfig, seed: u64, scale: ScaleParams) -> Result<Vec<crate::TriangleMesh>, PipelineError> {
    let Some(ctx) = &cfg.context else { return Ok(Vec::new()) };
    let path = cfg.resolve(&ctx.labels);
    let bytes =
        fs::read(&path).map_err(|e| PipelineError::new("context", ErrorKind::Data, format!("{}: {e}", path.display())))?;
    let labels = DensityVolume::from_mrc(&bytes)
        .map_err(|e| PipelineError::new("context", ErrorKind::Data, format!("{}: {e}", path.display())))?;
    let params = ContextParams { perturb_amplitude: ctx.perturb_amplitude, scale, ..Default::default() };
    Ok(embed_context(&labels, ctx.only.as_deref(), &params, &mut stream(seed, "context", 0))
        .into_iter()
        .map(|c| c.mesh)
        .collect())
}

fn placement_error(e: PlacementError) -> PipelineError {
    PipelineError::new("placement", ErrorKind::Config, e.to_string())
}

/// Places every configured structure into scene `index`.
pub fn generate_scene(cfg: &SceneConfig, library: &Library, index: usize) -> Result<Scene, PipelineError> {
    let seed = scene_seed(cfg, index);
    let extents = scene_extents(cfg);
    let scale = scene_scale(cfg, library);
    let meshes = context_meshes(cfg, seed, scale)?;
    let mut placer = Placer::new(extents, scale, &meshes).map_err(placement_error)?;

    for (i, entry) in cfg.structures.iter().enumerate() {
        let lib = library
            .get(&entry.id)
            .ok_or_else(|| PipelineError::new("placement", ErrorKind::Internal, format!("`{}` missing from library", entry.id)))?;
        let request = PlacementRequest {
            structure_id: entry.id.clone(),
            count: entry.count,
            radius: lib.radius,
            strategy: entry.strategy.clone(),
            rule: entry.rule.clone(),
            orientation: entry.orientation.clone(),
            confidence: entry.confidence_weight,
        };
        let mut rng = stream(seed, "placement", i as u64);
        match &entry.picks {
            None => {
                placer.place(&request, &mut rng).map_err(placement_error)?;
            }
            Some(picks) => {
                let path = cfg.resolve(picks);
                let text = fs::read(&path)
                    .map_err(|e| PipelineError::new("placement", ErrorKind::Data, format!("{}: {e}", path.display())))?;
                let records = parse_pick_table(&text)
                    .map_err(|e| PipelineError::new("placement", ErrorKind::Data, format!("{}: {e}", path.display())))?;
                let experimental = import_experimental_poses(
                    &records,
                    &entry.id,
                    lib.radius,
                    cfg.pixel_size(),
                    Vec3::new(extents.lo.x, extents.lo.y, 0.0),
                    0.0,
                );
                let mut scratch = Placer::new(extents, scale, &meshes).map_err(placement_error)?;
                let synthetic = scratch.place(&request, &mut rng).map_err(placement_error)?;
                let blended = blend_placements(
                    &experimental,
                    &synthetic,
                    entry.experimental_weight,
                    entry.count,
                    scale.overlap_threshold,
                    &mut rng,
                )
                .map_err(|e| PipelineError::new("placement", ErrorKind::Data, e.to_string()))?;
                for p in blended {
                    if !placer.push(p, 0.0).map_err(placement_error)? {
                        log::debug!("{}: blended pose dropped by collision or extents", entry.id);
                    }
                }
            }
        }
    }
    Ok(Scene { extents, placements: placer.into_placements(), meshes, scale, seed })
}

/// Images produced for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub clean: Micrograph,
    pub ctf: Micrograph,
    pub noisy: Micrograph,
    pub mask: Micrograph,
}

pub fn generate_scene_ice(cfg: &SceneConfig, index: usize) -> IceSlab {
    let grid = scene_grid(cfg);
    generate_ice(grid.width, grid.height, grid.spacing, &cfg.ice, &mut stream(scene_seed(cfg, index), "ice", 0))
}

pub fn noise_spec(cfg: &SceneConfig, index: usize) -> NoiseSpec {
    NoiseSpec {
        model: cfg.noise.model,
        target_snr: cfg.noise.target_snr,
        dose: cfg.noise.dose,
        seed: derive_seed(scene_seed(cfg, index), "noise", 0),
        ..NoiseSpec::default()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Default)]
struct Timer(Vec<StageTiming>);

impl Timer {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.add(stage, t.elapsed().as_secs_f64());
        out
    }

    fn add(&mut self, stage: &str, seconds: f64) {
        match self.0.iter_mut().find(|s| s.stage == stage) {
            Some(s) => s.seconds += seconds,
            None => self.0.push(StageTiming { stage: stage.into(), seconds }),
        }
    }
}

fn render_with(cfg: &SceneConfig, library: &Library, scene: &Scene, index: usize, timer: &mut Timer) -> Result<Rendered, PipelineError> {
    let grid = scene_grid(cfg);
    let ice = timer.time("ice", || generate_scene_ice(cfg, index));
    let volumes = library.volumes();
    let clean = timer
        .time("project", || project_scene(&scene.placements, &volumes, Some((&ice, cfg.ice_contrast)), &grid))
        .map_err(|e| imaging_error("project", e))?;
    drop(ice);
    let ctf = timer.time("ctf", || ctf_filter(&clean, &cfg.ctf)).map_err(|e| imaging_error("ctf", e))?;
    let mask =
        timer.time("mask", || render_mask(&scene.placements, grid.width, grid.height, grid.spacing, [grid.origin.x, grid.origin.y]));
    let noisy = timer.time("noise", || apply_noise(&ctf, &noise_spec(cfg, index))).map_err(|e| imaging_error("noise", e))?;
    Ok(Rendered { clean, ctf, noisy, mask })
}

/// Ice, projection, CTF, mask and noise for a placed scene.
pub fn render_scene(cfg: &SceneConfig, library: &Library, scene: &Scene, index: usize) -> Result<Rendered, PipelineError> {
    render_with(cfg, library, scene, index, &mut Timer::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Relative to the output directory.
    pub path: String,
    pub digest: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub digest_algorithm: String,
    pub config_hash: String,
    pub seed: u64,
    pub scenes: usize,
    pub outputs: Vec<OutputRecord>,
    pub timings: Vec<StageTiming>,
}

impl RunManifest {
    /// Output digests only, which are what reproducibility is judged on.
    pub fn digests(&self) -> Vec<(&str, &str)> {
        self.outputs.iter().map(|o| (o.path.as_str(), o.digest.as_str())).collect()
    }
}

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub scenes: usize,
    /// Also write a 16-bit PNG preview of each noisy image.
    pub previews: bool,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self { out_dir: out_dir.into(), scenes: 1, previews: true }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn config_hash(cfg: &SceneConfig) -> String {
    sha256_hex(&serde_json::to_vec(cfg).expect("config serializes"))
}

type SceneFiles = (Vec<(String, Vec<u8>)>, Vec<StageTiming>);

fn scene_files(cfg: &SceneConfig, library: &Library, index: usize, previews: bool) -> Result<SceneFiles, PipelineError> {
    let mut timer = Timer::default();
    let scene = timer.time("placement", || generate_scene(cfg, library, index))?;
    let images = render_with(cfg, library, &scene, index, &mut timer)?;
    let dir = format!("scene_{index:03}");
    let mrc = |m: &Micrograph| m.to_mrc().map_err(|e| PipelineError::new("write", ErrorKind::Internal, e.to_string()));
    let mut files = vec![
        (format!("{dir}/clean.mrc"), mrc(&images.clean)?),
        (format!("{dir}/ctf.mrc"), mrc(&images.ctf)?),
        (format!("{dir}/noisy.mrc"), mrc(&images.noisy)?),
        (format!("{dir}/mask.mrc"), mrc(&images.mask)?),
        (format!("{dir}/placements.json"), scene.to_json().into_bytes()),
    ];
    if previews {
        files.push((format!("{dir}/noisy.png"), images.noisy.to_png16()));
    }
    Ok((files, timer.0))
}

/// Removes what a failed run wrote.
struct Cleanup {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    armed: bool,
}

impl Drop for Cleanup {
    fn drop(&mut self) {
        if self.armed {
            for f in self.files.iter().rev() {
                let _ = fs::remove_file(f);
            }
            for d in self.dirs.iter().rev() {
                let _ = fs::remove_dir(d);
            }
        }
    }
}

fn create_dirs(path: &Path, cleanup: &mut Cleanup) -> Result<(), PipelineError> {
    let mut missing = Vec::new();
    let mut p = Some(path);
    while let Some(d) = p {
        if d.as_os_str().is_empty() || d.exists() {
            break;
        }
        missing.push(d.to_path_buf());
        p = d.parent();
    }
    for d in missing.into_iter().rev() {
        fs::create_dir(&d).map_err(|e| PipelineError::new("write", ErrorKind::Data, format!("{}: {e}", d.display())))?;
        cleanup.dirs.push(d);
    }
    Ok(())
}

/// Runs every stage for `opts.scenes` scenes and writes the outputs.
///
/// Scenes run in parallel; each scene is sequential and seeded from
/// `(seed, scene index)`, so the thread count only changes wall-clock time.
/// On failure nothing written by this call is left behind.
pub fn run_pipeline(cfg: &SceneConfig, opts: &RunOptions) -> Result<RunManifest, PipelineError> {
    cfg.validate().map_err(|e| PipelineError::new("config", ErrorKind::Config, e.to_string()))?;
    let mut timer = Timer::default();
    let library = timer.time("library", || build_library(cfg))?;

    let results: Vec<Result<SceneFiles, PipelineError>> =
        (0..opts.scenes).into_par_iter().map(|i| scene_files(cfg, &library, i, opts.previews)).collect();

    let mut cleanup = Cleanup { files: Vec::new(), dirs: Vec::new(), armed: true };
    let mut outputs = Vec::new();
    let mut files = Vec::new();
    for r in results {
        let (f, timings) = r?;
        for t in timings {
            timer.add(&t.stage, t.seconds);
        }
        files.extend(f);
    }
    for (rel, bytes) in files {
        let path = opts.out_dir.join(&rel);
        create_dirs(path.parent().unwrap_or(&opts.out_dir), &mut cleanup)?;
        fs::write(&path, &bytes).map_err(|e| PipelineError::new("write", ErrorKind::Data, format!("{}: {e}", path.display())))?;
        cleanup.files.push(path);
        outputs.push(OutputRecord { path: rel, digest: sha256_hex(&bytes), bytes: bytes.len() });
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        digest_algorithm: DIGEST_ALGORITHM.into(),
        config_hash: config_hash(cfg),
        seed: cfg.seed,
        scenes: opts.scenes,
        outputs,
        timings: timer.0,
    };
    create_dirs(&opts.out_dir, &mut cleanup)?;
    let path = opts.out_dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| PipelineError::new("write", ErrorKind::Data, format!("{}: {e}", path.display())))?;
    cleanup.armed = false;
    Ok(manifest)
}

/// Demo scene: 100 procedurally generated particles in a 1024 x 1024
/// micrograph at 2 Å per pixel.
pub const DEMO_CONFIG: &str = r#"{
    "seed": 7,
    "structures": [
        {"id": "globule", "demo": {"atoms": 3000, "radius": 30}, "count": 100}
    ],
    "extents": [2048, 2048, 400],
    "resolution": 4.0
}"#;

pub fn demo_config() -> SceneConfig {
    crate::formats::parse_scene_config(DEMO_CONFIG, Path::new(".")).expect("demo config is valid")
}
