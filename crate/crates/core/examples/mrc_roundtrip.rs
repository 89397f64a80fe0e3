// MRC2014 volumes: write, read back bitwise, and reject malformed headers.

use cryo_mbir::grid::{GridSpec, Volume};
use cryo_mbir::harness::mrc::{decode, encode, MrcData, HEADER_LEN};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::new(8, 6, 4, 1.5)?;
    let volume = Volume::from_fn(grid, |x, y, z| (x as f64).sin() + 0.1 * y as f64 - 0.01 * z as f64);
    let map = MrcData {
        nx: grid.nx,
        ny: grid.ny,
        nz: grid.nz,
        voxel_size: grid.voxel_size,
        is_stack: false,
        data: volume.data().iter().map(|&v| v as f32).collect(),
    };
    let bytes = encode(&map)?;
    println!("{} bytes: {HEADER_LEN}-byte header + {} float32 voxels", bytes.len(), map.data.len());
    let back = decode(&bytes)?;
    let identical = back.data.iter().zip(&map.data).all(|(a, b)| a.to_bits() == b.to_bits());
    println!("dims {}x{}x{}, voxel {} A, bitwise identical: {identical}", back.nx, back.ny, back.nz, back.voxel_size);

    let mut bad = bytes.clone();
    bad[12..16].copy_from_slice(&1i32.to_le_bytes());
    println!("mode 1 file: {}", decode(&bad).unwrap_err());
    println!("truncated file: {}", decode(&bytes[..bytes.len() - 4]).unwrap_err());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
