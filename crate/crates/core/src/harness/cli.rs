//! Command-line front end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baseline::{cgls_with_snapshots, preprocess};
use crate::ctf::{ctf_transfer, ctf_zeros, CtfFilter, CtfModel};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::harness::config::Config;
use crate::harness::experiment::{run_experiment, tune_pr};
use crate::harness::geometry::{read_geometry, write_geometry, GeometryFile};
use crate::harness::mrc::{read_mrc, read_mrc_data, write_image_stack, write_mrc};
use crate::harness::phantom::make_phantom;
use crate::harness::phantom::GroundTruth;
use crate::harness::report::{report_csv, report_table, value_range, write_cost_history, write_cross_sections, ReportRow};
use crate::harness::simulate::SimulatedData;
use crate::harness::simulate::synthesize;
use crate::harness::write_atomic;
use crate::metrics::nrmse_percent;
use crate::solver::{reconstruct_mbir, MbirProblem};
use crate::stack::{DiagonalWeights, ProjectionStack};

#[derive(Parser, Debug)]
#[command(name = "cryo-mbir", version, about = "Simulate and reconstruct single-particle cryo-EM data")]
pub struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    pub dump_config: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a phantom and a noisy CTF-modulated projection dataset.
    Simulate(SimulateArgs),
    /// Reconstruct a volume from a projection stack.
    Reconstruct(ReconstructArgs),
    /// Compare a volume against a reference, or run a full method comparison.
    Evaluate(EvaluateArgs),
    /// Render central cross-sections of a volume as PGM images.
    Project(ProjectArgs),
    /// Tabulate the CTF on a frequency grid.
    CtfPlot(CtfPlotArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub psnr_db: Option<f64>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub n_views: Option<usize>,
    #[arg(long)]
    pub subsample: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Mbir,
    Pr,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub stack: PathBuf,
    #[arg(long)]
    pub geometry: PathBuf,
    /// Per-pixel weights; uniform 1 when omitted.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Mbir)]
    pub method: Method,
    /// CSV log: MBIR cost history, or P+R residuals (tuning table with --reference).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Ground truth; P+R is then tuned over its grid and the best volume kept.
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Reconstructed volume.
    #[arg(long, requires = "reference")]
    pub estimate: Option<PathBuf>,
    /// Ground-truth volume.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Method label for the report row.
    #[arg(long, default_value = "estimate")]
    pub label: String,
    /// Report CSV for a single comparison.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Run the full noise-level by view-fraction comparison, writing results here.
    #[arg(long, conflicts_with = "estimate")]
    pub sweep: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ProjectArgs {
    #[arg(long)]
    pub volume: PathBuf,
    /// Output directory for `<stem>_xy.pgm`, `<stem>_xz.pgm` and `<stem>_yz.pgm`.
    #[arg(long)]
    pub out: PathBuf,
    /// Take the grey-level range from this volume so images are comparable.
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CtfPlotArgs {
    /// CSV output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub k_max: f64,
    #[arg(long, default_value_t = 501)]
    pub samples: usize,
}

/// Loads the config file, then applies `--set` overrides in order.
pub fn effective_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    for item in &cli.overrides {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("--set expects KEY=VALUE, got '{item}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli, &mut std::io::stdout()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Executes a parsed command line, writing human-readable output to `out`.
pub fn run(cli: &Cli, out: &mut dyn std::io::Write) -> Result<()> {
    let mut cfg = effective_config(cli)?;
    if cli.dump_config {
        out.write_all(cfg.dump().as_bytes())?;
        return Ok(());
    }
    match &cli.command {
        None => Err(Error::Validation("no subcommand given; see --help".into())),
        Some(Command::Simulate(a)) => {
            let pairs = [
                ("seed", a.seed.map(|v| v.to_string())),
                ("psnr_db", a.psnr_db.map(|v| v.to_string())),
                ("size", a.size.map(|v| v.to_string())),
                ("n_views", a.n_views.map(|v| v.to_string())),
                ("subsample", a.subsample.map(|v| v.to_string())),
            ];
            for (k, v) in pairs {
                if let Some(v) = v {
                    cfg.set(k, &v)?;
                }
            }
            simulate(&cfg, &a.out, out)
        }
        Some(Command::Reconstruct(a)) => reconstruct(&cfg, a, out),
        Some(Command::Evaluate(a)) => evaluate(&cfg, a, out),
        Some(Command::Project(a)) => project(&cfg, a, out),
        Some(Command::CtfPlot(a)) => ctf_plot(&cfg, a, out),
    }
}

fn simulate(cfg: &Config, dir: &Path, out: &mut dyn std::io::Write) -> Result<()> {
    let spec = cfg.simulation()?;
    let truth = make_phantom(&spec.grid, cfg.phantom, cfg.phantom_seed)?;
    let data = synthesize(&spec, &truth)?;
    std::fs::create_dir_all(dir)?;
    let (w, h) = (data.stack.width(), data.stack.height());
    write_image_stack(&dir.join("stack.mrc"), w, h, data.stack.data())?;
    write_image_stack(&dir.join("weights.mrc"), w, h, data.weights.data())?;
    write_geometry(&dir.join("geometry.csv"), &GeometryFile::new(data.stack.views().to_vec(), data.ctf_table.clone())?)?;
    write_mrc(&dir.join("truth.mrc"), &truth.volume)?;
    write_atomic(&dir.join("config.txt"), cfg.dump().as_bytes())?;
    writeln!(
        out,
        "simulated {} views of {}x{} at {} dB (sigma {:.6e}, peak {:.6e}) into {}",
        data.stack.n_views(),
        w,
        h,
        spec.psnr_db,
        data.sigma,
        data.peak,
        dir.display()
    )?;
    Ok(())
}

fn load_stack(path: &Path, geometry: &GeometryFile) -> Result<ProjectionStack> {
    let map = read_mrc_data(path)?;
    if map.nz != geometry.views.len() {
        return Err(Error::Validation(format!(
            "{} holds {} images but the geometry lists {} views",
            path.display(),
            map.nz,
            geometry.views.len()
        )));
    }
    ProjectionStack::new(map.nx, map.ny, map.data.into_iter().map(f64::from).collect(), geometry.views.clone())
}

fn filters_for(geometry: &GeometryFile, w: usize, h: usize) -> Vec<CtfFilter> {
    geometry.ctf_table.iter().map(|m| CtfFilter::from_model(w, h, m)).collect()
}

fn reconstruct(cfg: &Config, a: &ReconstructArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let geometry = read_geometry(&a.geometry)?;
    let stack = load_stack(&a.stack, &geometry)?;
    if stack.width() != stack.height() {
        return Err(Error::Dimension(format!("images must be square, got {}x{}", stack.width(), stack.height())));
    }
    let grid = GridSpec::new(stack.width(), stack.height(), stack.width(), cfg.voxel_size)?;
    let filters = filters_for(&geometry, stack.width(), stack.height());
    let start = Instant::now();
    let volume = match a.method {
        Method::Pr => {
            let base = cfg.baseline()?;
            match &a.reference {
                Some(r) => {
                    let truth = GroundTruth::new(read_mrc(r)?)?;
                    if truth.volume.grid() != &grid {
                        return Err(Error::Validation("reference grid differs from the reconstruction grid".into()));
                    }
                    let weights = DiagonalWeights::uniform_for(&stack, 1.0)?;
                    let data = SimulatedData {
                        clean: stack.clone(),
                        stack,
                        weights,
                        ctf_table: geometry.ctf_table.clone(),
                        filters,
                        peak: 0.0,
                        sigma: 0.0,
                        kept_views: Vec::new(),
                    };
                    let tuning = tune_pr(&data, &truth, &cfg.pr_sigma_grid, &cfg.pr_iters_grid, &base)?;
                    writeln!(
                        out,
                        "pr: best gaussian_sigma {} with {} CGLS iterations, NRMSE {:.3}%",
                        tuning.best.gaussian_sigma, tuning.best.cgls_iters, tuning.best.nrmse_percent
                    )?;
                    if let Some(p) = &a.log {
                        let mut csv = String::from("gaussian_sigma,cgls_iters,nrmse_percent\n");
                        for t in &tuning.trials {
                            let _ = writeln!(csv, "{},{},{:.6}", t.gaussian_sigma, t.cgls_iters, t.nrmse_percent);
                        }
                        write_atomic(p, csv.as_bytes())?;
                    }
                    tuning.volume
                }
                None => {
                    let corrected = preprocess(&stack, &filters, base.gaussian_sigma)?;
                    let run = cgls_with_snapshots(&corrected, &grid, &base, &[])?;
                    writeln!(out, "pr: {} CGLS iterations", run.iterations)?;
                    if let Some(p) = &a.log {
                        let mut csv = String::from("iteration,residual_norm\n");
                        for (k, r) in run.residual_norms.iter().enumerate() {
                            let _ = writeln!(csv, "{k},{r:.16e}");
                        }
                        write_atomic(p, csv.as_bytes())?;
                    }
                    run.volume
                }
            }
        }
        Method::Mbir => {
            let weights = match &a.weights {
                Some(p) => {
                    let map = read_mrc_data(p)?;
                    DiagonalWeights::new(map.data.into_iter().map(f64::from).collect())?
                }
                None => DiagonalWeights::uniform_for(&stack, 1.0)?,
            };
            let problem = MbirProblem::new(&stack, &weights, &filters, cfg.prior()?, grid, cfg.projector()?)?;
            let (outcome, lipschitz) = reconstruct_mbir(&problem, None, &cfg.solver()?)?;
            writeln!(
                out,
                "mbir: {} iterations, best cost {:.6e} at iteration {}, L = {:.6e} (data {:.6e}, prior {:.6e}), {} step halvings",
                outcome.iterations,
                outcome.best_cost.total(),
                outcome.best_iteration,
                outcome.lipschitz,
                lipschitz.data_term,
                lipschitz.prior_term,
                outcome.step_halvings
            )?;
            if let Some(p) = &a.log {
                write_cost_history(p, &outcome.history)?;
            }
            outcome.volume
        }
    };
    write_mrc(&a.out, &volume)?;
    writeln!(out, "wrote {} in {:.2} s", a.out.display(), start.elapsed().as_secs_f64())?;
    Ok(())
}

fn evaluate(cfg: &Config, a: &EvaluateArgs, out: &mut dyn std::io::Write) -> Result<()> {
    if let (Some(est), Some(reference)) = (&a.estimate, &a.reference) {
        let start = Instant::now();
        let e = nrmse_percent(&read_mrc(est)?, &read_mrc(reference)?)?;
        let row = ReportRow {
            dataset: reference.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            psnr_db: cfg.psnr_db,
            subsample: cfg.subsample,
            method: a.label.clone(),
            nrmse_percent: e,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        if let Some(p) = &a.report {
            write_atomic(p, report_csv(std::slice::from_ref(&row)).as_bytes())?;
        }
        out.write_all(report_table(&[row]).as_bytes())?;
        return Ok(());
    }
    let Some(dir) = &a.sweep else {
        return Err(Error::Validation("evaluate needs --estimate and --reference, or --sweep DIR".into()));
    };
    std::fs::create_dir_all(dir)?;
    let truth = make_phantom(&cfg.grid()?, cfg.phantom, cfg.phantom_seed)?;
    let dataset = cfg.phantom.to_string();
    let mut rows = Vec::new();
    let mut tuning = String::from("psnr_db,subsample,method,parameter,cgls_iters,nrmse_percent\n");
    let cells = run_experiment(cfg, &truth, |cell| {
        let [m, p] = cell.rows(&dataset);
        let _ = writeln!(
            out,
            "psnr {:>5.2} dB, {:>3} views: mbir {:.3}% (sigma_f {:.4}), pr {:.3}% (sigma {}, {} iters)",
            cell.psnr_db,
            cell.n_views,
            m.nrmse_percent,
            cell.mbir.best.sigma_f,
            p.nrmse_percent,
            cell.pr.best.gaussian_sigma,
            cell.pr.best.cgls_iters
        );
        for t in &cell.mbir.trials {
            let _ = writeln!(tuning, "{},{},mbir,{},,{:.6}", cell.psnr_db, cell.subsample, t.sigma_f, t.nrmse_percent);
        }
        for t in &cell.pr.trials {
            let _ = writeln!(
                tuning,
                "{},{},pr,{},{},{:.6}",
                cell.psnr_db, cell.subsample, t.gaussian_sigma, t.cgls_iters, t.nrmse_percent
            );
        }
        rows.extend([m, p]);
    })?;
    write_atomic(&dir.join("report.csv"), report_csv(&rows).as_bytes())?;
    write_atomic(&dir.join("tuning.csv"), tuning.as_bytes())?;
    let table = report_table(&rows);
    write_atomic(&dir.join("table.txt"), table.as_bytes())?;
    write_mrc(&dir.join("truth.mrc"), &truth.volume)?;
    if let Some(first) = cells.first() {
        write_mrc(&dir.join("mbir_first_cell.mrc"), &first.mbir.outcome.volume)?;
        write_mrc(&dir.join("pr_first_cell.mrc"), &first.pr.volume)?;
    }
    out.write_all(table.as_bytes())?;
    Ok(())
}

fn project(_cfg: &Config, a: &ProjectArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let volume = read_mrc(&a.volume)?;
    let (lo, hi) = match &a.reference {
        Some(r) => value_range(&read_mrc(r)?),
        None => value_range(&volume),
    };
    std::fs::create_dir_all(&a.out)?;
    let stem = a.volume.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "volume".into());
    for p in write_cross_sections(&a.out, &stem, &volume, lo, hi)? {
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(())
}

fn ctf_plot(cfg: &Config, a: &CtfPlotArgs, out: &mut dyn std::io::Write) -> Result<()> {
    if a.samples < 2 || !(a.k_max > 0.0) {
        return Err(Error::Domain("ctf-plot needs samples >= 2 and k_max > 0".into()));
    }
    let CtfModel::Radial(params) = cfg.ctf_model()? else {
        return Err(Error::Validation("ctf-plot needs ctf = radial".into()));
    };
    let mut csv = String::from("k,h\n");
    for i in 0..a.samples {
        let k = a.k_max * i as f64 / (a.samples - 1) as f64;
        let _ = writeln!(csv, "{k:.8},{:.10e}", ctf_transfer(k, &params));
    }
    match &a.out {
        Some(p) => write_atomic(p, csv.as_bytes())?,
        None => out.write_all(csv.as_bytes())?,
    }
    let zeros: Vec<String> = ctf_zeros(&params, a.k_max).iter().map(|k| format!("{k:.7}")).collect();
    eprintln!("zeros in (0, {}]: {}", a.k_max, zeros.join(" "));
    Ok(())
}
