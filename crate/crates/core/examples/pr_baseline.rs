// Pre-process-and-reconstruct baseline: low-pass, phase flip, CGLS, tuned over a grid.

use cryo_mbir::baseline::BaselineConfig;
use cryo_mbir::grid::GridSpec;
use cryo_mbir::harness::experiment::tune_pr;
use cryo_mbir::harness::phantom::{make_phantom, PhantomKind};
use cryo_mbir::harness::simulate::{synthesize, SimulationSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::cubic(16)?;
    let truth = make_phantom(&grid, PhantomKind::Blobs, 5)?;
    let data = synthesize(&SimulationSpec::new(grid), &truth)?;

    let tuning = tune_pr(&data, &truth, &[0.05, 0.1, 0.2], &[5, 10, 20], &BaselineConfig::default())?;
    println!("{:>8} {:>6} {:>8}", "sigma", "iters", "NRMSE%");
    for t in &tuning.trials {
        println!("{:>8.2} {:>6} {:>8.3}", t.gaussian_sigma, t.cgls_iters, t.nrmse_percent);
    }
    println!("best: sigma {} with {} iterations", tuning.best.gaussian_sigma, tuning.best.cgls_iters);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
