// Simulate a noisy, CTF-modulated projection dataset and write it to disk.

use cryo_mbir::grid::GridSpec;
use cryo_mbir::harness::geometry::{read_geometry, write_geometry, GeometryFile};
use cryo_mbir::harness::mrc::{read_mrc_data, write_image_stack, write_mrc};
use cryo_mbir::harness::phantom::{make_phantom, PhantomKind};
use cryo_mbir::harness::simulate::{synthesize, SimulationSpec};
use cryo_mbir::metrics::psnr_db;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::cubic(16)?;
    let truth = make_phantom(&grid, PhantomKind::Shells, 4)?;
    let mut spec = SimulationSpec::new(grid);
    spec.psnr_db = 2.40;
    spec.seed = 11;
    let data = synthesize(&spec, &truth)?;
    println!(
        "{} views, peak |HAf| = {:.4}, sigma = {:.4}, realized PSNR = {:.2} dB",
        data.stack.n_views(),
        data.peak,
        data.sigma,
        psnr_db(data.peak, data.sigma)?
    );

    let dir = std::env::temp_dir().join(format!("cryo-mbir-simulate-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let (w, h) = (data.stack.width(), data.stack.height());
    write_image_stack(&dir.join("stack.mrc"), w, h, data.stack.data())?;
    write_mrc(&dir.join("truth.mrc"), &truth.volume)?;
    let geometry = GeometryFile::new(data.stack.views().to_vec(), data.ctf_table.clone())?;
    write_geometry(&dir.join("geometry.csv"), &geometry)?;

    let stack = read_mrc_data(&dir.join("stack.mrc"))?;
    let back = read_geometry(&dir.join("geometry.csv"))?;
    println!("read back {}x{}x{} stack, geometry identical: {}", stack.nx, stack.ny, stack.nz, back == geometry);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
