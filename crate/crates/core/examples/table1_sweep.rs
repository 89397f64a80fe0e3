// MBIR against tuned P+R across noise levels and view fractions.
//
// Runs a reduced 12^3 sweep by default; pass `full` for 32^3 with 64 views.

use cryo_mbir::harness::config::Config;
use cryo_mbir::harness::experiment::run_experiment;
use cryo_mbir::harness::phantom::make_phantom;
use cryo_mbir::harness::report::report_table;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = Config::default();
    if std::env::args().nth(1).as_deref() == Some("full") {
        cfg.sweep_psnr_db = vec![6.02, 0.0];
    } else {
        cfg.size = 12;
        cfg.max_iters = 60;
        cfg.sweep_psnr_db = vec![6.02];
        cfg.sweep_subsample = vec![1.0, 0.5];
        cfg.pr_iters_grid = vec![5, 10, 20];
        cfg.mbir_sigma_f_grid = vec![0.2, 0.4];
    }
    let truth = make_phantom(&cfg.grid()?, cfg.phantom, cfg.phantom_seed)?;
    let mut rows = Vec::new();
    run_experiment(&cfg, &truth, |cell| {
        eprintln!("{:.2} dB, {} views done", cell.psnr_db, cell.n_views);
        rows.extend(cell.rows(&cfg.phantom.to_string()));
    })?;
    print!("{}", report_table(&rows));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
