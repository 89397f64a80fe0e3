// Forward and back projection: the back-projector is the exact transpose.

use cryo_mbir::grid::{GridSpec, Volume};
use cryo_mbir::projector::{back_project, forward_project, ProjectorConfig};
use cryo_mbir::stack::ViewGeometry;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::cubic(16)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let views: Vec<ViewGeometry> = (0..8)
        .map(|_| {
            let euler = [rng.random::<f64>() * 6.28, rng.random::<f64>() * 3.14, rng.random::<f64>() * 6.28];
            ViewGeometry::new(euler, [rng.random::<f64>(), rng.random::<f64>()], 0)
        })
        .collect();
    let cfg = ProjectorConfig::default();

    let x = Volume::from_fn(grid, |_, _, _| rng.random::<f64>() - 0.5);
    let ax = forward_project(&x, &views, &cfg)?;
    let y = ax.with_data((0..ax.data().len()).map(|_| rng.random::<f64>() - 0.5).collect())?;
    let aty = back_project(&y, &grid, &cfg)?;

    let lhs: f64 = ax.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
    let rhs = x.dot(&aty);
    println!("<Ax, y>   = {lhs:.12}");
    println!("<x, A^T y> = {rhs:.12}");
    println!("relative difference {:.2e}", ((lhs - rhs) / lhs).abs());

    // A unit cube of density projects to its thickness.
    let cube = Volume::from_fn(grid, |x, y, z| if (4..12).contains(&x) && (4..12).contains(&y) && (4..12).contains(&z) { 1.0 } else { 0.0 });
    let p = forward_project(&cube, &[ViewGeometry::identity()], &cfg)?;
    println!("straight-through line integral at the center: {:.3}", p.image(0)[8 * 16 + 8]);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
