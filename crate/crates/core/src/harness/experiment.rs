//! Oracle-tuned comparison of MBIR against P+R over noise levels and view counts.
//!
//! Both methods get a small grid search scored against the ground truth, so
//! each is compared at its best setting.

use std::time::Instant;

use crate::baseline::{cgls_with_snapshots, preprocess, BaselineConfig};
use crate::error::{Error, Result};
use crate::grid::Volume;
use crate::harness::config::Config;
use crate::harness::phantom::GroundTruth;
use crate::harness::report::ReportRow;
use crate::harness::simulate::{synthesize, SimulatedData};
use crate::metrics::nrmse_percent;
use crate::prior::QggmrfParams;
use crate::projector::ProjectorConfig;
use crate::solver::{estimate_lipschitz, ogm_minimize, LipschitzEstimate, MbirProblem, SolverConfig, SolverOutcome};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrTrial {
    pub gaussian_sigma: f64,
    pub cgls_iters: usize,
    pub nrmse_percent: f64,
}

#[derive(Clone, Debug)]
pub struct PrTuning {
    pub best: PrTrial,
    pub volume: Volume,
    pub trials: Vec<PrTrial>,
}

/// Grid search over low-pass width and CGLS iteration count. One CGLS run per
/// width supplies every iteration count through snapshots.
pub fn tune_pr(data: &SimulatedData, truth: &GroundTruth, sigmas: &[f64], iters: &[usize], base: &BaselineConfig) -> Result<PrTuning> {
    if sigmas.is_empty() || iters.is_empty() {
        return Err(Error::Validation("P+R tuning grid is empty".into()));
    }
    let grid = *truth.volume.grid();
    let mut best: Option<(PrTrial, Volume)> = None;
    let mut trials = Vec::new();
    for &sigma in sigmas {
        let cfg = BaselineConfig { gaussian_sigma: sigma, cgls_iters: iters.iter().copied().max().unwrap_or(1), ..base.clone() };
        cfg.validate()?;
        let corrected = preprocess(&data.stack, &data.filters, sigma)?;
        let run = cgls_with_snapshots(&corrected, &grid, &cfg, iters)?;
        for (k, volume) in run.snapshots {
            let trial = PrTrial { gaussian_sigma: sigma, cgls_iters: k, nrmse_percent: nrmse_percent(&volume, &truth.volume)? };
            trials.push(trial);
            if best.as_ref().is_none_or(|b| trial.nrmse_percent < b.0.nrmse_percent) {
                best = Some((trial, volume));
            }
        }
    }
    let (best, volume) = best.expect("grid is non-empty");
    Ok(PrTuning { best, volume, trials })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MbirTrial {
    /// Prior scale in density units.
    pub sigma_f: f64,
    pub nrmse_percent: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct MbirTuning {
    pub best: MbirTrial,
    pub outcome: SolverOutcome,
    pub lipschitz: LipschitzEstimate,
    pub trials: Vec<MbirTrial>,
}

/// Grid search over the prior scale, given as fractions of the true maximum
/// density. The data-term Lipschitz estimate is shared by all trials.
pub fn tune_mbir(
    data: &SimulatedData,
    truth: &GroundTruth,
    sigma_f_fractions: &[f64],
    prior: &QggmrfParams,
    solver: &SolverConfig,
    projector: &ProjectorConfig,
) -> Result<MbirTuning> {
    if sigma_f_fractions.is_empty() {
        return Err(Error::Validation("MBIR tuning grid is empty".into()));
    }
    let grid = *truth.volume.grid();
    let mut data_term = None;
    let mut best: Option<(MbirTrial, SolverOutcome, LipschitzEstimate)> = None;
    let mut trials = Vec::new();
    for &fraction in sigma_f_fractions {
        let params = QggmrfParams { sigma_f: fraction * truth.max_density, ..*prior };
        params.validate()?;
        let problem = MbirProblem::new(&data.stack, &data.weights, &data.filters, params, grid, *projector)?;
        let lipschitz = match data_term {
            None => {
                let est = estimate_lipschitz(&problem, solver)?;
                data_term = Some(est.data_term);
                est
            }
            Some(d) => {
                let prior_term = params.lipschitz_bound_for(&grid);
                LipschitzEstimate { data_term: d, prior_term, total: solver.lipschitz_safety * (d + prior_term) }
            }
        };
        let outcome = ogm_minimize(&problem, Volume::zeros(grid), lipschitz.total, solver)?;
        let trial = MbirTrial {
            sigma_f: params.sigma_f,
            nrmse_percent: nrmse_percent(&outcome.volume, &truth.volume)?,
            iterations: outcome.iterations,
        };
        trials.push(trial);
        if best.as_ref().is_none_or(|b| trial.nrmse_percent < b.0.nrmse_percent) {
            best = Some((trial, outcome, lipschitz));
        }
    }
    let (best, outcome, lipschitz) = best.expect("grid is non-empty");
    Ok(MbirTuning { best, outcome, lipschitz, trials })
}

/// One (noise level, view fraction) cell of an experiment.
#[derive(Clone, Debug)]
pub struct CellResult {
    pub psnr_db: f64,
    pub subsample: f64,
    pub n_views: usize,
    pub pr: PrTuning,
    pub pr_seconds: f64,
    pub mbir: MbirTuning,
    pub mbir_seconds: f64,
}

impl CellResult {
    pub fn rows(&self, dataset: &str) -> [ReportRow; 2] {
        let row = |method: &str, nrmse: f64, secs: f64| ReportRow {
            dataset: dataset.to_string(),
            psnr_db: self.psnr_db,
            subsample: self.subsample,
            method: method.to_string(),
            nrmse_percent: nrmse,
            wall_seconds: secs,
        };
        [
            row("mbir", self.mbir.best.nrmse_percent, self.mbir_seconds),
            row("pr", self.pr.best.nrmse_percent, self.pr_seconds),
        ]
    }
}

/// Simulates and reconstructs one cell. Every cell shares the seed, so view
/// subsets are nested and the noise realization is common to all fractions.
pub fn run_cell(cfg: &Config, truth: &GroundTruth, psnr_db: f64, subsample: f64) -> Result<CellResult> {
    let mut local = cfg.clone();
    local.psnr_db = psnr_db;
    local.subsample = subsample;
    let spec = local.simulation()?;
    let data = synthesize(&spec, truth)?;

    let start = Instant::now();
    let pr = tune_pr(&data, truth, &cfg.pr_sigma_grid, &cfg.pr_iters_grid, &local.baseline()?)?;
    let pr_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let mbir = tune_mbir(&data, truth, &cfg.mbir_sigma_f_grid, &local.prior()?, &local.solver()?, &spec.projector)?;
    let mbir_seconds = start.elapsed().as_secs_f64();

    Ok(CellResult { psnr_db, subsample, n_views: data.stack.n_views(), pr, pr_seconds, mbir, mbir_seconds })
}

/// Runs every cell of `sweep_psnr_db` x `sweep_subsample`, calling `progress` after each.
pub fn run_experiment(cfg: &Config, truth: &GroundTruth, mut progress: impl FnMut(&CellResult)) -> Result<Vec<CellResult>> {
    let mut cells = Vec::new();
    for &psnr in &cfg.sweep_psnr_db {
        for &sub in &cfg.sweep_subsample {
            let cell = run_cell(cfg, truth, psnr, sub)?;
            progress(&cell);
            cells.push(cell);
        }
    }
    Ok(cells)
}
