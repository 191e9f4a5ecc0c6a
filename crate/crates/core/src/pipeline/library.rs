//! Structure library: coordinates to centered, smoothed density volumes.

use std::collections::HashMap;

use rand::Rng;

use super::{ErrorKind, PipelineError};
use crate::density::{perturb_conformer, smooth_and_threshold, voxelize, DensityVolume};
use crate::formats::{parse_atomic_model, vdw_radius, Atom, AtomicModel, SceneConfig, StructureEntry};
use crate::rng::stream;
use crate::Vec3;

const STAGE: &str = "library";

#[derive(Debug, Clone, PartialEq)]
pub struct LibraryEntry {
    pub id: String,
    /// Atoms translated so the centroid sits at the origin.
    pub model: AtomicModel,
    /// Density in the same centered frame.
    pub volume: DensityVolume,
    /// Bounding-sphere radius in Å, including atomic radii.
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Library {
    pub entries: Vec<LibraryEntry>,
}

impl Library {
    pub fn get(&self, id: &str) -> Option<&LibraryEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn volumes(&self) -> HashMap<String, DensityVolume> {
        self.entries.iter().map(|e| (e.id.clone(), e.volume.clone())).collect()
    }

    pub fn max_radius(&self) -> f64 {
        self.entries.iter().map(|e| e.radius).fold(0.0, f64::max)
    }
}

/// Random globular protein stand-in: atoms uniform in a ball with a
/// C/N/O/S composition and confidences spread over every stratum.
pub fn demo_model<R: Rng + ?Sized>(id: &str, atoms: usize, radius: f64, rng: &mut R) -> AtomicModel {
    const ELEMENTS: [(&str, f64); 4] = [("C", 0.62), ("N", 0.17), ("O", 0.19), ("S", 0.02)];
    let list = (0..atoms)
        .map(|_| {
            let position = loop {
                let p = Vec3::from_fn(|_, _| rng.random_range(-1.0..=1.0));
                if p.norm_squared() <= 1.0 {
                    break p * radius;
                }
            };
            let mut u: f64 = rng.random();
            let element = ELEMENTS
                .iter()
                .find(|(_, w)| {
                    u -= w;
                    u < 0.0
                })
                .map_or("C", |(e, _)| e);
            Atom {
                element: element.to_string(),
                position,
                confidence: rng.random_range(30.0..100.0),
                vdw_radius: vdw_radius(element),
            }
        })
        .collect();
    AtomicModel::new(id, list).expect("atoms > 0")
}

fn centered(model: &AtomicModel) -> AtomicModel {
    let c = model.centroid();
    let atoms = model.atoms.iter().map(|a| Atom { position: a.position - c, ..a.clone() }).collect();
    AtomicModel::new(model.id.clone(), atoms).expect("non-empty model")
}

pub fn load_model(cfg: &SceneConfig, entry: &StructureEntry, index: usize) -> Result<AtomicModel, PipelineError> {
    if let Some(demo) = &entry.demo {
        return Ok(demo_model(&entry.id, demo.atoms, demo.radius, &mut stream(cfg.seed, "demo-structure", index as u64)));
    }
    let path = cfg.resolve(entry.path.as_ref().expect("validated: path or demo"));
    let bytes = std::fs::read(&path)
        .map_err(|e| PipelineError::new(STAGE, ErrorKind::Data, format!("{}: {e}", path.display())))?;
    parse_atomic_model(&entry.id, &bytes)
        .map_err(|e| PipelineError::new(STAGE, ErrorKind::Data, format!("{}: {e}", path.display())))
}

/// Loads, centers, optionally perturbs and voxelizes every structure.
pub fn build_library(cfg: &SceneConfig) -> Result<Library, PipelineError> {
    let mut entries = Vec::with_capacity(cfg.structures.len());
    for (index, entry) in cfg.structures.iter().enumerate() {
        let mut model = centered(&load_model(cfg, entry, index)?);
        if let Some(params) = &entry.conformer {
            model = centered(&perturb_conformer(&model, params, &mut stream(cfg.seed, "conformer", index as u64)));
        }
        let raw = voxelize(&model, cfg.resolution)
            .map_err(|e| PipelineError::new(STAGE, ErrorKind::Data, format!("{}: {e}", entry.id)))?;
        let volume = smooth_and_threshold(&raw, cfg.resolution);
        let radius = model.bounding_radius();
        entries.push(LibraryEntry { id: entry.id.clone(), model, volume, radius });
    }
    Ok(Library { entries })
}
