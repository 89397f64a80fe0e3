//! MRC2014 subset: mode 2 (float32), little-endian, 1024-byte header.
//!
//! Volumes are written with space group 1; image stacks with space group 0 and
//! one image per section. Extended headers are skipped on read and never written.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Volume};
use crate::harness::write_atomic;

pub const HEADER_LEN: usize = 1024;
const MAP_TAG: &[u8; 4] = b"MAP ";
const MACHINE_STAMP_LE: [u8; 4] = [0x44, 0x44, 0x00, 0x00];
const NVERSION: i32 = 20140;

/// Decoded contents of a mode-2 MRC file.
#[derive(Clone, Debug, PartialEq)]
pub struct MrcData {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Pixel spacing along x, from `cella.x / mx`.
    pub voxel_size: f64,
    /// Space group 0 marks an image stack.
    pub is_stack: bool,
    pub data: Vec<f32>,
}

fn put_i32(buf: &mut [u8], offset: usize, v: i32) {
    buf[offset..offset + 4].copy_from_slice(&v.to_le_bytes());
}

fn put_f32(buf: &mut [u8], offset: usize, v: f32) {
    buf[offset..offset + 4].copy_from_slice(&v.to_le_bytes());
}

fn get_i32(buf: &[u8], offset: usize) -> i32 {
    i32::from_le_bytes(buf[offset..offset + 4].try_into().expect("4-byte slice"))
}

fn get_f32(buf: &[u8], offset: usize) -> f32 {
    f32::from_le_bytes(buf[offset..offset + 4].try_into().expect("4-byte slice"))
}

fn format_error(offset: usize, message: impl Into<String>) -> Error {
    Error::Format { offset: offset as u64, message: message.into() }
}

pub fn encode(map: &MrcData) -> Result<Vec<u8>> {
    let count = map.nx * map.ny * map.nz;
    if map.data.len() != count {
        return Err(Error::Dimension(format!(
            "MRC data has {} values, header dims need {count}",
            map.data.len()
        )));
    }
    let dims = [map.nx, map.ny, map.nz];
    if dims.iter().any(|&d| d == 0 || d > i32::MAX as usize) {
        return Err(Error::Domain(format!("MRC dimensions out of range: {dims:?}")));
    }
    let mut buf = vec![0u8; HEADER_LEN + 4 * count];
    put_i32(&mut buf, 0, map.nx as i32);
    put_i32(&mut buf, 4, map.ny as i32);
    put_i32(&mut buf, 8, map.nz as i32);
    put_i32(&mut buf, 12, 2);
    // nxstart, nystart, nzstart stay 0
    let mz = if map.is_stack { 1 } else { map.nz };
    put_i32(&mut buf, 28, map.nx as i32);
    put_i32(&mut buf, 32, map.ny as i32);
    put_i32(&mut buf, 36, mz as i32);
    let vs = map.voxel_size as f32;
    put_f32(&mut buf, 40, vs * map.nx as f32);
    put_f32(&mut buf, 44, vs * map.ny as f32);
    put_f32(&mut buf, 48, vs * mz as f32);
    for off in [52, 56, 60] {
        put_f32(&mut buf, off, 90.0);
    }
    put_i32(&mut buf, 64, 1);
    put_i32(&mut buf, 68, 2);
    put_i32(&mut buf, 72, 3);
    let (mut lo, mut hi, mut sum) = (f32::INFINITY, f32::NEG_INFINITY, 0.0f64);
    for &v in &map.data {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v as f64;
    }
    let mean = sum / count as f64;
    let rms = (map.data.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / count as f64).sqrt();
    put_f32(&mut buf, 76, lo);
    put_f32(&mut buf, 80, hi);
    put_f32(&mut buf, 84, mean as f32);
    put_i32(&mut buf, 88, if map.is_stack { 0 } else { 1 });
    put_i32(&mut buf, 92, 0);
    put_i32(&mut buf, 108, NVERSION);
    buf[208..212].copy_from_slice(MAP_TAG);
    buf[212..216].copy_from_slice(&MACHINE_STAMP_LE);
    put_f32(&mut buf, 216, rms as f32);
    put_i32(&mut buf, 220, 1);
    let label = b"cryo-mbir";
    buf[224..224 + label.len()].copy_from_slice(label);
    for (chunk, v) in buf[HEADER_LEN..].chunks_exact_mut(4).zip(&map.data) {
        chunk.copy_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

pub fn decode(bytes: &[u8]) -> Result<MrcData> {
    if bytes.len() < HEADER_LEN {
        return Err(format_error(bytes.len(), format!("truncated header: {} of {HEADER_LEN} bytes", bytes.len())));
    }
    if &bytes[208..212] != MAP_TAG {
        return Err(format_error(208, "missing 'MAP ' tag"));
    }
    let stamp = &bytes[212..214];
    if stamp != [0x44, 0x44] && stamp != [0x44, 0x41] {
        return Err(format_error(212, format!("unsupported machine stamp {:02x?} (little-endian required)", &bytes[212..216])));
    }
    let mode = get_i32(bytes, 12);
    if mode != 2 {
        return Err(Error::UnsupportedMode(mode));
    }
    let mut dims = [0usize; 3];
    for (a, d) in dims.iter_mut().enumerate() {
        let v = get_i32(bytes, 4 * a);
        if v <= 0 {
            return Err(format_error(4 * a, format!("non-positive dimension {v}")));
        }
        *d = v as usize;
    }
    let axes = [get_i32(bytes, 64), get_i32(bytes, 68), get_i32(bytes, 72)];
    if axes != [1, 2, 3] && axes != [0, 0, 0] {
        return Err(format_error(64, format!("axis order {axes:?} is not supported")));
    }
    let nsymbt = get_i32(bytes, 92);
    if nsymbt < 0 {
        return Err(format_error(92, format!("negative extended header length {nsymbt}")));
    }
    let start = HEADER_LEN + nsymbt as usize;
    let count = dims[0] * dims[1] * dims[2];
    let end = start + 4 * count;
    if bytes.len() < end {
        return Err(format_error(bytes.len(), format!("truncated data: expected {end} bytes, found {}", bytes.len())));
    }
    let data = bytes[start..end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    let mx = get_i32(bytes, 28);
    let cella = get_f32(bytes, 40);
    let voxel_size = if mx > 0 && cella > 0.0 { cella as f64 / mx as f64 } else { 1.0 };
    Ok(MrcData {
        nx: dims[0],
        ny: dims[1],
        nz: dims[2],
        voxel_size,
        is_stack: get_i32(bytes, 88) == 0,
        data,
    })
}

pub fn read_mrc_data(path: &Path) -> Result<MrcData> {
    decode(&std::fs::read(path)?)
}

pub fn write_mrc_data(path: &Path, map: &MrcData) -> Result<()> {
    write_atomic(path, &encode(map)?)
}

/// Reads a volume. Values are widened from float32.
pub fn read_mrc(path: &Path) -> Result<Volume> {
    let map = read_mrc_data(path)?;
    let grid = GridSpec::new(map.nx, map.ny, map.nz, map.voxel_size)?;
    Volume::new(grid, map.data.into_iter().map(f64::from).collect())
}

/// Writes a volume as float32.
pub fn write_mrc(path: &Path, volume: &Volume) -> Result<()> {
    let g = volume.grid();
    write_mrc_data(
        path,
        &MrcData {
            nx: g.nx,
            ny: g.ny,
            nz: g.nz,
            voxel_size: g.voxel_size,
            is_stack: false,
            data: volume.data().iter().map(|&v| v as f32).collect(),
        },
    )
}

/// Writes `n_views` images of `width x height` as an image stack.
pub fn write_image_stack(path: &Path, width: usize, height: usize, data: &[f64]) -> Result<()> {
    let nz = data.len() / (width * height).max(1);
    write_mrc_data(
        path,
        &MrcData {
            nx: width,
            ny: height,
            nz,
            voxel_size: 1.0,
            is_stack: true,
            data: data.iter().map(|&v| v as f32).collect(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_volume() -> Volume {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let grid = GridSpec::new(16, 16, 16, 1.5).unwrap();
        Volume::from_fn(grid, |_, _, _| f64::from(rng.random::<f32>() - 0.5))
    }

    #[test]
    fn volume_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.mrc");
        let v = random_volume();
        write_mrc(&path, &v).unwrap();
        let back = read_mrc(&path).unwrap();
        assert_eq!(back.grid(), v.grid());
        for (a, b) in back.data().iter().zip(v.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 4 * 16 * 16 * 16);
        assert_eq!(get_i32(&bytes, 0), 16);
        assert_eq!(get_i32(&bytes, 4), 16);
        assert_eq!(get_i32(&bytes, 8), 16);
        assert_eq!(get_i32(&bytes, 12), 2);
        assert_eq!(&bytes[208..212], b"MAP ");
    }

    #[test]
    fn other_modes_are_rejected() {
        let map = MrcData { nx: 2, ny: 2, nz: 1, voxel_size: 1.0, is_stack: false, data: vec![0.0; 4] };
        let mut bytes = encode(&map).unwrap();
        put_i32(&mut bytes, 12, 1);
        assert!(matches!(decode(&bytes), Err(Error::UnsupportedMode(1))));
    }

    #[test]
    fn truncation_and_bad_magic_report_offsets() {
        let map = MrcData { nx: 2, ny: 2, nz: 2, voxel_size: 1.0, is_stack: false, data: vec![1.0; 8] };
        let bytes = encode(&map).unwrap();
        assert!(matches!(decode(&bytes[..1030]), Err(Error::Format { offset: 1030, .. })));
        assert!(matches!(decode(&bytes[..100]), Err(Error::Format { offset: 100, .. })));
        let mut bad = bytes.clone();
        bad[208] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Format { offset: 208, .. })));
        let mut big_endian = bytes;
        big_endian[212] = 0x11;
        big_endian[213] = 0x11;
        assert!(matches!(decode(&big_endian), Err(Error::Format { offset: 212, .. })));
    }

    #[test]
    fn extended_header_is_skipped() {
        let map = MrcData { nx: 2, ny: 1, nz: 1, voxel_size: 1.0, is_stack: false, data: vec![3.0, 4.0] };
        let bytes = encode(&map).unwrap();
        let mut with_ext = bytes[..HEADER_LEN].to_vec();
        put_i32(&mut with_ext, 92, 8);
        with_ext.extend_from_slice(&[0xAB; 8]);
        with_ext.extend_from_slice(&bytes[HEADER_LEN..]);
        assert_eq!(decode(&with_ext).unwrap().data, vec![3.0, 4.0]);
    }

    #[test]
    fn stacks_use_space_group_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.mrc");
        write_image_stack(&path, 3, 2, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0]).unwrap();
        let m = read_mrc_data(&path).unwrap();
        assert!(m.is_stack);
        assert_eq!((m.nx, m.ny, m.nz), (3, 2, 2));
        assert_eq!(m.data[7], 7.0);
    }
}
