//! JSON scene configuration with strict key checking.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::ConformerParams;
use crate::ice::IceParams;
use crate::imaging::{CtfParams, NoiseModel, DEFAULT_ICE_CONTRAST};
use crate::scene::{ClassRule, OrientationMode, PlacementStrategy};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("config invalid: {0}")]
    Invalid(String),
    #[error("file not found: {}", .0.display())]
    MissingPath(PathBuf),
}

/// Procedurally generated stand-in structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoStructure {
    pub atoms: usize,
    /// Radius of the globule in Å.
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureEntry {
    pub id: String,
    /// Coordinate file, relative to the config file.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub demo: Option<DemoStructure>,
    pub count: usize,
    #[serde(default)]
    pub rule: ClassRule,
    #[serde(default)]
    pub strategy: PlacementStrategy,
    #[serde(default)]
    pub orientation: OrientationMode,
    /// Confidence assigned to synthetic placements.
    #[serde(default = "one")]
    pub confidence_weight: f64,
    /// Optional pick table whose poses are blended with synthetic ones.
    #[serde(default)]
    pub picks: Option<PathBuf>,
    /// Probability that a blended slot takes an experimental pose.
    #[serde(default = "half")]
    pub experimental_weight: f64,
    /// Conformer sampling; omitted means the structure is used as is.
    #[serde(default)]
    pub conformer: Option<ConformerParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextConfig {
    /// Integer label volume (MRC).
    pub labels: PathBuf,
    #[serde(default)]
    pub only: Option<Vec<u32>>,
    #[serde(default = "two")]
    pub perturb_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "gaussian")]
    pub model: NoiseModel,
    #[serde(default = "snr")]
    pub target_snr: f64,
    #[serde(default)]
    pub dose: Option<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { model: NoiseModel::Gaussian, target_snr: 0.1, dose: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default)]
    pub seed: u64,
    pub structures: Vec<StructureEntry>,
    /// Box edge lengths in Å; the box spans `[0, x] x [0, y] x [-z/2, z/2]`.
    pub extents: [f64; 3],
    /// Target resolution in Å; voxel and pixel size are half of it.
    pub resolution: f64,
    #[serde(default)]
    pub ice: IceParams,
    #[serde(default = "ice_contrast")]
    pub ice_contrast: f64,
    #[serde(default)]
    pub ctf: CtfParams,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub context: Option<ContextConfig>,
    /// Directory relative paths resolve against; not part of the document.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn two() -> f64 {
    2.0
}
fn snr() -> f64 {
    0.1
}
fn gaussian() -> NoiseModel {
    NoiseModel::Gaussian
}
fn ice_contrast() -> f64 {
    DEFAULT_ICE_CONTRAST
}

impl SceneConfig {
    pub fn pixel_size(&self) -> f64 {
        self.resolution / 2.0
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Every file the config reads.
    pub fn referenced_paths(&self) -> Vec<PathBuf> {
        let mut out = Vec::new();
        for s in &self.structures {
            out.extend(s.path.iter().chain(&s.picks).map(|p| self.resolve(p)));
        }
        if let Some(c) = &self.context {
            out.push(self.resolve(&c.labels));
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.resolution > 0.0) || !self.resolution.is_finite() {
            return bad(format!("resolution must be positive, got {}", self.resolution));
        }
        if !self.extents.iter().all(|&e| e > 0.0 && e.is_finite()) {
            return bad(format!("extents must be positive, got {:?}", self.extents));
        }
        if !(self.ice_contrast >= 0.0) {
            return bad("ice_contrast must be non-negative".into());
        }
        self.ice.validate().map_err(ConfigError::Invalid)?;
        self.ctf.validate().map_err(ConfigError::Invalid)?;
        if !(self.noise.target_snr >= 0.0) || self.noise.dose.is_some_and(|d| !(d > 0.0)) {
            return bad("noise target_snr must be non-negative and dose positive".into());
        }
        let mut ids = std::collections::BTreeSet::new();
        for s in &self.structures {
            if !ids.insert(&s.id) {
                return bad(format!("duplicate structure id `{}`", s.id));
            }
            match (&s.path, &s.demo) {
                (Some(_), None) | (None, Some(_)) => {}
                _ => return bad(format!("structure `{}` needs exactly one of `path` or `demo`", s.id)),
            }
            if let Some(d) = &s.demo {
                if d.atoms == 0 || !(d.radius > 0.0) {
                    return bad(format!("demo structure `{}` needs atoms > 0 and radius > 0", s.id));
                }
            }
            if !(0.0..=1.0).contains(&s.confidence_weight) || !(0.0..=1.0).contains(&s.experimental_weight) {
                return bad(format!("structure `{}` weights must lie in [0, 1]", s.id));
            }
            s.orientation.validate().map_err(ConfigError::Invalid)?;
            if let Some(c) = &s.conformer {
                c.validate().map_err(ConfigError::Invalid)?;
            }
        }
        for p in self.referenced_paths() {
            if !p.is_file() {
                return Err(ConfigError::MissingPath(p));
            }
        }
        Ok(())
    }
}

/// Parses and validates a config; relative paths resolve against `base_dir`.
pub fn parse_scene_config(text: &str, base_dir: &Path) -> Result<SceneConfig, ConfigError> {
    let mut cfg: SceneConfig = serde_json::from_str(text)?;
    cfg.base_dir = base_dir.to_path_buf();
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "structures": [{"id": "a", "demo": {"atoms": 10, "radius": 8}, "count": 3}],
        "extents": [100, 100, 50],
        "resolution": 4
    }"#;

    #[test]
    fn defaults_filled() {
        let c = parse_scene_config(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(c.noise.target_snr, 0.1);
        assert_eq!(c.ctf.amplitude_contrast, 0.07);
        assert_eq!(c.ctf.cs_mm, 2.7);
        assert_eq!(c.structures[0].orientation, OrientationMode::Uniform);
        assert_eq!(c.pixel_size(), 2.0);
        let p: OrientationMode = serde_json::from_str(r#"{"mode": "preferred"}"#).unwrap();
        assert_eq!(p, OrientationMode::preferred(10.0));
    }

    #[test]
    fn deterministic_parse() {
        let text = MINIMAL.replace("\"resolution\": 4", "\"resolution\": 4, \"seed\": 42");
        let a = parse_scene_config(&text, Path::new(".")).unwrap();
        assert_eq!(a.seed, 42);
        assert_eq!(a, parse_scene_config(&text, Path::new(".")).unwrap());
    }

    #[test]
    fn rejections() {
        let neg = MINIMAL.replace("\"resolution\": 4", "\"resolution\": -1");
        assert!(matches!(parse_scene_config(&neg, Path::new(".")), Err(ConfigError::Invalid(_))));
        let unknown = MINIMAL.replace("\"resolution\": 4", "\"resolution\": 4, \"colour\": 1");
        assert!(matches!(parse_scene_config(&unknown, Path::new(".")), Err(ConfigError::Syntax(_))));
        let missing = MINIMAL.replace(r#""demo": {"atoms": 10, "radius": 8}"#, r#""path": "nope.pdb""#);
        match parse_scene_config(&missing, Path::new("/tmp")) {
            Err(ConfigError::MissingPath(p)) => assert_eq!(p, Path::new("/tmp/nope.pdb")),
            other => panic!("{other:?}"),
        }
    }
}
