// MBIR: CTF-aware weighted least squares plus a qGGMRF prior, minimized by OGM.

use cryo_mbir::grid::GridSpec;
use cryo_mbir::harness::phantom::{make_phantom, PhantomKind};
use cryo_mbir::harness::simulate::{synthesize, SimulationSpec};
use cryo_mbir::metrics::nrmse_percent;
use cryo_mbir::prior::QggmrfParams;
use cryo_mbir::projector::ProjectorConfig;
use cryo_mbir::solver::{reconstruct_mbir, MbirProblem, SolverConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::cubic(16)?;
    let truth = make_phantom(&grid, PhantomKind::Spheres, 2)?;
    let mut spec = SimulationSpec::new(grid);
    spec.psnr_db = 6.02;
    let data = synthesize(&spec, &truth)?;

    let prior = QggmrfParams::new(1.2, 0.1, 0.2 * truth.max_density)?;
    let problem = MbirProblem::new(&data.stack, &data.weights, &data.filters, prior, grid, ProjectorConfig::default())?;
    let cfg = SolverConfig { max_iters: 100, ..SolverConfig::default() };
    let (outcome, lipschitz) = reconstruct_mbir(&problem, None, &cfg)?;

    println!("Lipschitz: data {:.3e} + prior {:.3e}, step 1/{:.3e}", lipschitz.data_term, lipschitz.prior_term, lipschitz.total);
    for r in outcome.history.iter().filter(|r| r.iteration % 20 == 0) {
        println!("iter {:>3}: cost {:.6e} (data {:.6e}, prior {:.6e})", r.iteration, r.cost, r.data_term, r.prior_term);
    }
    println!(
        "stopped after {} iterations, best at {}; NRMSE {:.2}%",
        outcome.iterations,
        outcome.best_iteration,
        nrmse_percent(&outcome.volume, &truth.volume)?
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
