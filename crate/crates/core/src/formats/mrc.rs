//! MRC2014 container, mode 2 (float32), little-endian.
//!
//! Standard readers take the voxel size from the cell dimensions
//! (`cell / n`). Because `cell = voxel * n` in float32 is not exactly
//! invertible, the writer also stores the voxel sizes verbatim in the EXTRA
//! region behind a `CSVX` tag; the reader prefers those when the tag is present
//! and agrees with the cell.

use thiserror::Error;

pub const HEADER_LEN: usize = 1024;
pub const MODE_FLOAT32: i32 = 2;

const VOXEL_TAG: &[u8; 4] = b"CSVX";
// EXTRA occupies bytes 96..196 (0-based).
const VOXEL_TAG_OFFSET: usize = 96;

#[derive(Debug, Error, PartialEq)]
pub enum MrcError {
    #[error("not an MRC2014 container: {0}")]
    Container(String),
    #[error("unsupported MRC mode {0} (only mode 2 is supported)")]
    UnsupportedMode(i32),
    #[error("payload holds {available} bytes but the header requires {required}")]
    Length { required: usize, available: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeHeader {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub mode: i32,
    /// Å per voxel along x, y, z.
    pub voxel_size: [f32; 3],
    /// Å, from header words 50-52.
    pub origin: [f32; 3],
}

impl VolumeHeader {
    pub fn new(dims: [usize; 3], voxel_size: f32, origin: [f32; 3]) -> Self {
        Self { nx: dims[0], ny: dims[1], nz: dims[2], mode: MODE_FLOAT32, voxel_size: [voxel_size; 3], origin }
    }

    pub fn voxel_count(&self) -> usize {
        self.nx * self.ny * self.nz
    }
}

fn word_i32(b: &[u8], word: usize) -> i32 {
    let o = (word - 1) * 4;
    i32::from_le_bytes([b[o], b[o + 1], b[o + 2], b[o + 3]])
}

fn word_f32(b: &[u8], word: usize) -> f32 {
    let o = (word - 1) * 4;
    f32::from_le_bytes([b[o], b[o + 1], b[o + 2], b[o + 3]])
}

fn put_i32(b: &mut [u8], word: usize, v: i32) {
    let o = (word - 1) * 4;
    b[o..o + 4].copy_from_slice(&v.to_le_bytes());
}

fn put_f32(b: &mut [u8], word: usize, v: f32) {
    let o = (word - 1) * 4;
    b[o..o + 4].copy_from_slice(&v.to_le_bytes());
}

/// Reads a mode-2 MRC file.
pub fn read_volume(bytes: &[u8]) -> Result<(VolumeHeader, Vec<f32>), MrcError> {
    if bytes.len() < HEADER_LEN {
        return Err(MrcError::Container(format!("{} bytes is shorter than the 1024-byte header", bytes.len())));
    }
    let h = &bytes[..HEADER_LEN];
    if &h[208..212] != b"MAP " {
        return Err(MrcError::Container("format stamp is not \"MAP \"".into()));
    }
    if h[212] == 0x11 {
        return Err(MrcError::Container("big-endian files are not supported".into()));
    }
    let dims = [word_i32(h, 1), word_i32(h, 2), word_i32(h, 3)];
    if dims.iter().any(|&d| d < 1) {
        return Err(MrcError::Container(format!("invalid dimensions {dims:?}")));
    }
    let mode = word_i32(h, 4);
    if mode != MODE_FLOAT32 {
        return Err(MrcError::UnsupportedMode(mode));
    }
    let (nx, ny, nz) = (dims[0] as usize, dims[1] as usize, dims[2] as usize);
    let sampling = [word_i32(h, 8), word_i32(h, 9), word_i32(h, 10)];
    let cell = [word_f32(h, 11), word_f32(h, 12), word_f32(h, 13)];
    let mut voxel_size = [1.0f32; 3];
    for a in 0..3 {
        let m = if sampling[a] > 0 { sampling[a] } else { dims[a] };
        if cell[a] > 0.0 && cell[a].is_finite() {
            voxel_size[a] = (cell[a] as f64 / m as f64) as f32;
        }
    }
    if &h[VOXEL_TAG_OFFSET..VOXEL_TAG_OFFSET + 4] == VOXEL_TAG {
        let o = VOXEL_TAG_OFFSET / 4 + 2;
        let stored = [word_f32(h, o), word_f32(h, o + 1), word_f32(h, o + 2)];
        let agrees = (0..3).all(|a| {
            stored[a] > 0.0 && ((stored[a] as f64 - voxel_size[a] as f64).abs() <= 1e-5 * voxel_size[a] as f64)
        });
        if agrees {
            voxel_size = stored;
        }
    }
    if voxel_size.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(MrcError::Container(format!("invalid voxel size {voxel_size:?}")));
    }
    let origin = [word_f32(h, 50), word_f32(h, 51), word_f32(h, 52)];
    let nsymbt = word_i32(h, 24).max(0) as usize;

    let count = nx
        .checked_mul(ny)
        .and_then(|v| v.checked_mul(nz))
        .ok_or_else(|| MrcError::Container("dimensions overflow".into()))?;
    let required = count
        .checked_mul(4)
        .ok_or_else(|| MrcError::Container("dimensions overflow".into()))?;
    let payload = &bytes[HEADER_LEN..];
    let available = payload.len().saturating_sub(nsymbt);
    if payload.len() < nsymbt || available < required {
        return Err(MrcError::Length { required: required.saturating_add(nsymbt), available: payload.len() });
    }
    let data = payload[nsymbt..nsymbt + required]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((VolumeHeader { nx, ny, nz, mode, voxel_size, origin }, data))
}

/// Serializes a mode-2 MRC file. `grid.len()` must equal the voxel count.
pub fn write_volume(header: &VolumeHeader, grid: &[f32]) -> Result<Vec<u8>, MrcError> {
    if header.mode != MODE_FLOAT32 {
        return Err(MrcError::UnsupportedMode(header.mode));
    }
    if header.nx == 0 || header.ny == 0 || header.nz == 0 {
        return Err(MrcError::Container("dimensions must be at least 1".into()));
    }
    let required = header.voxel_count();
    if grid.len() != required {
        return Err(MrcError::Length { required: required * 4, available: grid.len() * 4 });
    }
    let mut out = vec![0u8; HEADER_LEN + 4 * required];
    let h = &mut out[..HEADER_LEN];
    let dims = [header.nx, header.ny, header.nz];
    for a in 0..3 {
        put_i32(h, 1 + a, dims[a] as i32);
        put_i32(h, 8 + a, dims[a] as i32);
        put_f32(h, 11 + a, header.voxel_size[a] * dims[a] as f32);
        put_f32(h, 14 + a, 90.0);
        put_i32(h, 17 + a, 1 + a as i32);
    }
    put_i32(h, 4, MODE_FLOAT32);
    let (mut lo, mut hi, mut sum) = (f32::INFINITY, f32::NEG_INFINITY, 0.0f64);
    for &v in grid {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v as f64;
    }
    let mean = sum / required as f64;
    let rms = (grid.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / required as f64).sqrt();
    put_f32(h, 20, lo);
    put_f32(h, 21, hi);
    put_f32(h, 22, mean as f32);
    put_i32(h, 23, if header.nz > 1 { 1 } else { 0 });
    h[VOXEL_TAG_OFFSET..VOXEL_TAG_OFFSET + 4].copy_from_slice(VOXEL_TAG);
    let o = VOXEL_TAG_OFFSET / 4 + 2;
    for a in 0..3 {
        put_f32(h, o + a, header.voxel_size[a]);
    }
    for a in 0..3 {
        put_f32(h, 50 + a, header.origin[a]);
    }
    h[208..212].copy_from_slice(b"MAP ");
    h[212] = 0x44;
    h[213] = 0x44;
    put_f32(h, 55, rms as f32);
    put_i32(h, 56, 1);
    let label = b"cryosim";
    h[224..224 + label.len()].copy_from_slice(label);
    for (chunk, v) in out[HEADER_LEN..].chunks_exact_mut(4).zip(grid) {
        chunk.copy_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_cubed_round_trip() {
        let header = VolumeHeader::new([2, 2, 2], 1.5, [0.0, 0.0, 0.0]);
        let grid: Vec<f32> = (0..8).map(|v| v as f32).collect();
        let bytes = write_volume(&header, &grid).unwrap();
        assert_eq!(bytes.len(), 1024 + 32);
        assert_eq!(&bytes[208..212], b"MAP ");
        assert_eq!(&bytes[212..214], &[0x44, 0x44]);
        let (h2, g2) = read_volume(&bytes).unwrap();
        assert_eq!(h2, header);
        assert_eq!(g2, grid);
    }

    #[test]
    fn truncated_payload() {
        let header = VolumeHeader::new([4, 4, 4], 1.0, [0.0; 3]);
        let bytes = write_volume(&header, &[0.0; 64]).unwrap();
        assert!(matches!(read_volume(&bytes[..1024 + 100]), Err(MrcError::Length { .. })));
    }

    #[test]
    fn bad_stamp() {
        let header = VolumeHeader::new([1, 1, 1], 1.0, [0.0; 3]);
        let mut bytes = write_volume(&header, &[1.0]).unwrap();
        bytes[208..212].copy_from_slice(b"MRC ");
        assert!(matches!(read_volume(&bytes), Err(MrcError::Container(_))));
    }

    #[test]
    fn other_modes_rejected() {
        let header = VolumeHeader::new([1, 1, 1], 1.0, [0.0; 3]);
        let mut bytes = write_volume(&header, &[1.0]).unwrap();
        put_i32(&mut bytes, 4, 1);
        assert_eq!(read_volume(&bytes), Err(MrcError::UnsupportedMode(1)));
        assert!(read_volume(&bytes[..10]).is_err());
    }

    #[test]
    fn cell_fallback_without_tag() {
        let header = VolumeHeader::new([4, 2, 1], 0.5, [1.0, 2.0, 3.0]);
        let mut bytes = write_volume(&header, &[0.0; 8]).unwrap();
        bytes[VOXEL_TAG_OFFSET..VOXEL_TAG_OFFSET + 4].fill(0);
        let (h, _) = read_volume(&bytes).unwrap();
        assert_eq!(h.voxel_size, [0.5; 3]);
        assert_eq!(h.origin, [1.0, 2.0, 3.0]);
    }
}
