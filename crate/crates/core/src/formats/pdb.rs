//! Fixed-column PDB coordinate records (ATOM/HETATM subset).

use log::warn;
use thiserror::Error;

use crate::Vec3;

/// Radius assigned to elements missing from [`vdw_radius`]'s table, in Å.
pub const DEFAULT_VDW_RADIUS: f64 = 1.5;

#[derive(Debug, Error, PartialEq)]
pub enum PdbError {
    #[error("no ATOM/HETATM records found")]
    EmptyModel,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub element: String,
    pub position: Vec3,
    /// Temperature-factor column clamped to `[0, 100]`; pLDDT for predicted models.
    pub confidence: f64,
    pub vdw_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomicModel {
    pub id: String,
    pub atoms: Vec<Atom>,
    r_max: f64,
}

impl AtomicModel {
    /// Builds a model and caches the largest radius. Returns `None` when empty.
    pub fn new(id: impl Into<String>, atoms: Vec<Atom>) -> Option<Self> {
        if atoms.is_empty() {
            return None;
        }
        let r_max = atoms.iter().map(|a| a.vdw_radius).fold(0.0, f64::max);
        Some(Self { id: id.into(), atoms, r_max })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Axis-aligned bounds of the atom centers.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for a in &self.atoms {
            lo = lo.inf(&a.position);
            hi = hi.sup(&a.position);
        }
        (lo, hi)
    }

    pub fn centroid(&self) -> Vec3 {
        self.atoms.iter().map(|a| a.position).sum::<Vec3>() / self.atoms.len() as f64
    }

    /// Radius of the sphere around the centroid enclosing every atom's vdW sphere.
    pub fn bounding_radius(&self) -> f64 {
        let c = self.centroid();
        self.atoms
            .iter()
            .map(|a| (a.position - c).norm() + a.vdw_radius)
            .fold(0.0, f64::max)
    }
}

/// Van der Waals radius in Å for an element symbol (case-insensitive).
pub fn vdw_radius(element: &str) -> f64 {
    match element.trim().to_ascii_uppercase().as_str() {
        "H" => 1.20,
        "C" => 1.70,
        "N" => 1.55,
        "O" => 1.52,
        "P" => 1.80,
        "S" => 1.80,
        _ => DEFAULT_VDW_RADIUS,
    }
}

fn field(line: &[u8], start: usize, end: usize) -> Option<&[u8]> {
    // 1-based inclusive columns.
    if line.len() < start {
        return None;
    }
    Some(&line[start - 1..end.min(line.len())])
}

fn text<'a>(bytes: &'a [u8], line: usize, what: &str) -> Result<&'a str, PdbError> {
    std::str::from_utf8(bytes)
        .map(str::trim)
        .map_err(|_| PdbError::Parse { line, message: format!("{what} is not valid UTF-8") })
}

fn number(line_bytes: &[u8], start: usize, end: usize, line: usize, what: &str) -> Result<f64, PdbError> {
    let raw = field(line_bytes, start, end)
        .ok_or_else(|| PdbError::Parse { line, message: format!("record too short for {what}") })?;
    let s = text(raw, line, what)?;
    let v: f64 = s
        .parse()
        .map_err(|_| PdbError::Parse { line, message: format!("cannot parse {what} from {s:?}") })?;
    if !v.is_finite() {
        return Err(PdbError::Parse { line, message: format!("{what} is not finite") });
    }
    Ok(v)
}

/// Element from columns 77-78, falling back to the first letter of the atom
/// name (columns 13-16) when the element field is blank.
fn element(line_bytes: &[u8], line: usize) -> Result<String, PdbError> {
    if let Some(raw) = field(line_bytes, 77, 78) {
        let s = text(raw, line, "element")?;
        if !s.is_empty() {
            return Ok(s.to_ascii_uppercase());
        }
    }
    let name = field(line_bytes, 13, 16).map(|b| text(b, line, "atom name")).transpose()?;
    Ok(name
        .and_then(|n| n.chars().find(|c| c.is_ascii_alphabetic()))
        .map(|c| c.to_ascii_uppercase().to_string())
        .unwrap_or_default())
}

/// Parses ATOM/HETATM records into an [`AtomicModel`] with the given id.
///
/// Only the first MODEL of a multi-model file is read. A blank temperature
/// factor is read as confidence 100.
pub fn parse_atomic_model(id: &str, input: &[u8]) -> Result<AtomicModel, PdbError> {
    let mut atoms = Vec::new();
    let mut models_seen = 0usize;
    let mut skipping = false;
    for (n, raw_line) in input.split(|&b| b == b'\n').enumerate() {
        let line_no = n + 1;
        let line = raw_line.strip_suffix(b"\r").unwrap_or(raw_line);
        if line.starts_with(b"MODEL") {
            models_seen += 1;
            if models_seen > 1 && !skipping {
                warn!("{id}: ignoring MODEL records after the first");
                skipping = true;
            }
            continue;
        }
        if skipping || !(line.starts_with(b"ATOM  ") || line.starts_with(b"HETATM")) {
            continue;
        }
        let x = number(line, 31, 38, line_no, "x coordinate")?;
        let y = number(line, 39, 46, line_no, "y coordinate")?;
        let z = number(line, 47, 54, line_no, "z coordinate")?;
        let confidence = match field(line, 61, 66).map(|b| text(b, line_no, "temperature factor")).transpose()? {
            Some(s) if !s.is_empty() => number(line, 61, 66, line_no, "temperature factor")?,
            _ => 100.0,
        };
        let element = element(line, line_no)?;
        atoms.push(Atom {
            vdw_radius: vdw_radius(&element),
            element,
            position: Vec3::new(x, y, z),
            confidence: confidence.clamp(0.0, 100.0),
        });
    }
    AtomicModel::new(id, atoms).ok_or(PdbError::EmptyModel)
}

/// Formats one ATOM record in PDB fixed columns.
pub fn format_atom_record(serial: usize, atom: &Atom) -> String {
    let name = format!(" {:<3}", atom.element);
    format!(
        "ATOM  {:>5} {:<4} ALA A{:>4}    {:>8.3}{:>8.3}{:>8.3}{:>6.2}{:>6.2}          {:>2}",
        serial % 100_000,
        name,
        (serial / 10) % 10_000,
        atom.position.x,
        atom.position.y,
        atom.position.z,
        1.0,
        atom.confidence,
        atom.element
    )
}
