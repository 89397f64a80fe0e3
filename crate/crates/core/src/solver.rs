//! MBIR cost assembly and minimization by the optimized gradient method.
//!
//! The cost is `c(f) = 0.5 ||g - H A f||_W^2 + s(f)` with `A` the projector,
//! `H` the per-view CTF filter, `W` the diagonal weights and `s` the qGGMRF prior.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ctf::{apply_filters, CtfFilter};
use crate::error::{Error, Result};
use crate::grid::{axpy, GridSpec, Volume};
use crate::metrics::weighted_residual_norm_sq;
use crate::prior::{prior_cost, prior_cost_and_gradient, QggmrfParams};
use crate::projector::{back_project, forward_project, ProjectorConfig};
use crate::stack::{DiagonalWeights, ProjectionStack};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once five consecutive recorded relative cost changes fall below this.
    pub rel_cost_tol: f64,
    pub lipschitz_power_iters: usize,
    /// Multiplier applied to the estimated Lipschitz constant.
    pub lipschitz_safety: f64,
    /// Record the cost every this many iterations (1 = every iteration).
    pub record_cost_every: usize,
    pub lipschitz_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            rel_cost_tol: 1e-7,
            lipschitz_power_iters: 20,
            lipschitz_safety: 1.05,
            record_cost_every: 1,
            lipschitz_seed: 0x5eed,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Domain("max_iters must be at least 1".into()));
        }
        if !(self.rel_cost_tol >= 0.0) {
            return Err(Error::Domain(format!("rel_cost_tol must be >= 0, got {}", self.rel_cost_tol)));
        }
        if !(self.lipschitz_safety >= 1.0) {
            return Err(Error::Domain(format!(
                "lipschitz_safety must be >= 1, got {}",
                self.lipschitz_safety
            )));
        }
        if self.record_cost_every == 0 {
            return Err(Error::Domain("record_cost_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CostTerms {
    pub data: f64,
    pub prior: f64,
}

impl CostTerms {
    pub fn total(&self) -> f64 {
        self.data + self.prior
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostRecord {
    pub iteration: usize,
    pub cost: f64,
    pub data_term: f64,
    pub prior_term: f64,
}

/// A differentiable cost over volumes.
pub trait Objective {
    fn cost(&self, f: &Volume) -> Result<CostTerms>;
    fn cost_and_gradient(&self, f: &Volume) -> Result<(CostTerms, Volume)>;
}

/// The MBIR cost for one dataset.
#[derive(Clone, Debug)]
pub struct MbirProblem<'a> {
    measurements: &'a ProjectionStack,
    weights: &'a DiagonalWeights,
    filters: &'a [CtfFilter],
    prior: QggmrfParams,
    grid: GridSpec,
    projector: ProjectorConfig,
}

impl<'a> MbirProblem<'a> {
    /// `filters` is the CTF table indexed by each view's `ctf_index`.
    pub fn new(
        measurements: &'a ProjectionStack,
        weights: &'a DiagonalWeights,
        filters: &'a [CtfFilter],
        prior: QggmrfParams,
        grid: GridSpec,
        projector: ProjectorConfig,
    ) -> Result<Self> {
        weights.check_matches(measurements)?;
        prior.validate()?;
        projector.validate()?;
        if measurements.width() != grid.nx || measurements.height() != grid.ny {
            return Err(Error::Dimension(format!(
                "images are {}x{} but the grid face is {}x{}",
                measurements.width(),
                measurements.height(),
                grid.nx,
                grid.ny
            )));
        }
        for f in filters {
            if f.width() != grid.nx || f.height() != grid.ny {
                return Err(Error::Dimension(format!(
                    "CTF filter is {}x{} but images are {}x{}",
                    f.width(),
                    f.height(),
                    grid.nx,
                    grid.ny
                )));
            }
        }
        if let Some(v) = measurements.views().iter().find(|v| v.ctf_index >= filters.len()) {
            return Err(Error::Validation(format!(
                "CTF index {} out of range for a table of {}",
                v.ctf_index,
                filters.len()
            )));
        }
        Ok(Self { measurements, weights, filters, prior, grid, projector })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn prior(&self) -> &QggmrfParams {
        &self.prior
    }

    pub fn weights(&self) -> &DiagonalWeights {
        self.weights
    }

    /// `H A f`.
    pub fn forward(&self, f: &Volume) -> Result<ProjectionStack> {
        if f.grid() != &self.grid {
            return Err(Error::Dimension(format!(
                "volume grid {:?} does not match problem grid {:?}",
                f.grid(),
                self.grid
            )));
        }
        let projected = forward_project(f, self.measurements.views(), &self.projector)?;
        apply_filters(&projected, self.filters)
    }

    /// `A^T H^T y`. `H` is real and even in Fourier space, so `H^T = H`.
    pub fn adjoint(&self, y: &ProjectionStack) -> Result<Volume> {
        let filtered = apply_filters(y, self.filters)?;
        back_project(&filtered, &self.grid, &self.projector)
    }

    fn residual(&self, f: &Volume) -> Result<Vec<f64>> {
        let model = self.forward(f)?;
        Ok(self
            .measurements
            .data()
            .iter()
            .zip(model.data())
            .map(|(g, m)| g - m)
            .collect())
    }

    pub fn total_cost(&self, f: &Volume) -> Result<f64> {
        Ok(self.cost(f)?.total())
    }

    pub fn total_gradient(&self, f: &Volume) -> Result<Volume> {
        Ok(self.cost_and_gradient(f)?.1)
    }

    /// `A^T H^T W H A x`, the Hessian of the data term.
    pub fn normal_operator(&self, x: &Volume) -> Result<Volume> {
        let mut y = self.forward(x)?;
        for (v, w) in y.data_mut().iter_mut().zip(self.weights.data()) {
            *v *= w;
        }
        self.adjoint(&y)
    }
}

impl Objective for MbirProblem<'_> {
    fn cost(&self, f: &Volume) -> Result<CostTerms> {
        let r = self.residual(f)?;
        Ok(CostTerms {
            data: 0.5 * weighted_residual_norm_sq(&r, self.weights)?,
            prior: prior_cost(f, &self.prior),
        })
    }

    fn cost_and_gradient(&self, f: &Volume) -> Result<(CostTerms, Volume)> {
        let r = self.residual(f)?;
        let data = 0.5 * weighted_residual_norm_sq(&r, self.weights)?;
        let weighted: Vec<f64> = r.iter().zip(self.weights.data()).map(|(r, w)| r * w).collect();
        let weighted = self.measurements.with_data(weighted)?;
        let (prior, mut grad) = prior_cost_and_gradient(f, &self.prior);
        let data_grad = self.adjoint(&weighted)?;
        axpy(-1.0, data_grad.data(), grad.data_mut());
        let terms = CostTerms { data, prior };
        Ok((terms, grad))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzEstimate {
    /// Power-iteration estimate of the largest eigenvalue of `A^T H^T W H A`.
    pub data_term: f64,
    /// Analytic curvature bound of the prior.
    pub prior_term: f64,
    /// `safety * (data_term + prior_term)`.
    pub total: f64,
}

/// Largest eigenvalue of a symmetric positive semidefinite operator by power iteration.
pub fn power_iteration<F>(grid: GridSpec, iterations: usize, seed: u64, mut apply: F) -> Result<f64>
where
    F: FnMut(&Volume) -> Result<Volume>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Volume::from_fn(grid, |_, _, _| rng.random::<f64>() - 0.5);
    let n = x.norm();
    x.data_mut().iter_mut().for_each(|v| *v /= n);
    let mut lambda = 0.0;
    for _ in 0..iterations.max(1) {
        let mut y = apply(&x)?;
        let norm = y.norm();
        lambda = norm;
        if norm == 0.0 {
            break;
        }
        y.data_mut().iter_mut().for_each(|v| *v /= norm);
        x = y;
    }
    Ok(lambda)
}

pub fn estimate_lipschitz(problem: &MbirProblem<'_>, cfg: &SolverConfig) -> Result<LipschitzEstimate> {
    let data_term = power_iteration(*problem.grid(), cfg.lipschitz_power_iters, cfg.lipschitz_seed, |x| {
        problem.normal_operator(x)
    })?;
    let prior_term = problem.prior().lipschitz_bound_for(problem.grid());
    Ok(LipschitzEstimate {
        data_term,
        prior_term,
        total: cfg.lipschitz_safety * (data_term + prior_term),
    })
}

/// Next momentum value `(1 + sqrt(1 + 4 t^2)) / 2`.
pub fn ogm_momentum(t: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
}

/// Iterates of the optimized gradient method.
#[derive(Clone, Debug)]
pub struct SolverState {
    /// Main iterate `f^(k)`.
    pub f: Volume,
    /// Gradient-step iterate `h^(k)`.
    pub h: Volume,
    pub t: f64,
    pub iter: usize,
    pub cost_history: Vec<CostRecord>,
}

impl SolverState {
    pub fn new(f0: Volume) -> Self {
        Self { h: f0.clone(), f: f0, t: 1.0, iter: 0, cost_history: Vec::new() }
    }

    /// One update from `f^(k)` given `grad = grad c(f^(k))` and step `1 / lipschitz`.
    pub fn step(&mut self, grad: &Volume, lipschitz: f64) {
        let t_next = ogm_momentum(self.t);
        let beta = (self.t - 1.0) / t_next;
        let gamma = self.t / t_next;
        let step = 1.0 / lipschitz;
        let f = self.f.data_mut();
        let h_prev = self.h.data_mut();
        for ((fi, hi), gi) in f.iter_mut().zip(h_prev.iter_mut()).zip(grad.data()) {
            let h_new = *fi - step * gi;
            let f_new = h_new + beta * (h_new - *hi) + gamma * (h_new - *fi);
            *hi = h_new;
            *fi = f_new;
        }
        self.t = t_next;
        self.iter += 1;
    }

    /// Resets momentum and the gradient-step iterate to `f`.
    pub fn restart(&mut self, f: Volume) {
        self.h = f.clone();
        self.f = f;
        self.t = 1.0;
    }
}

#[derive(Clone, Debug)]
pub struct SolverOutcome {
    /// Lowest-cost iterate visited.
    pub volume: Volume,
    pub best_cost: CostTerms,
    pub best_iteration: usize,
    pub iterations: usize,
    pub history: Vec<CostRecord>,
    /// Lipschitz constant in use when the loop ended (after any step halving).
    pub lipschitz: f64,
    pub step_halvings: usize,
}

// Consecutive cost increases that trigger a step halving.
const INCREASE_LIMIT: usize = 10;
// Recorded relative changes that must all fall under tolerance to stop.
const PLATEAU_WINDOW: usize = 5;

fn plateaued(history: &[CostRecord], tol: f64) -> bool {
    if tol <= 0.0 || history.len() <= PLATEAU_WINDOW {
        return false;
    }
    history[history.len() - PLATEAU_WINDOW - 1..]
        .windows(2)
        .all(|w| (w[1].cost - w[0].cost).abs() <= tol * w[0].cost.abs())
}

/// Minimizes `objective` from `f0` with step size `1 / lipschitz`.
///
/// Stops after `max_iters` updates or on a cost plateau, and returns the best
/// iterate seen. If the cost rises for ten consecutive iterations the step is
/// halved and momentum restarts from the best iterate.
pub fn ogm_minimize<O: Objective>(objective: &O, f0: Volume, lipschitz: f64, cfg: &SolverConfig) -> Result<SolverOutcome> {
    cfg.validate()?;
    if !(lipschitz.is_finite() && lipschitz > 0.0) {
        return Err(Error::Domain(format!("Lipschitz constant must be positive, got {lipschitz}")));
    }
    if !f0.is_finite() {
        return Err(Error::Domain("initial volume is not finite".into()));
    }
    let mut lipschitz = lipschitz;
    let mut state = SolverState::new(f0);
    let (mut terms, mut grad) = objective.cost_and_gradient(&state.f)?;
    if !terms.total().is_finite() {
        return Err(Error::Divergence { iteration: 0 });
    }
    let record = |iteration: usize, t: &CostTerms| CostRecord {
        iteration,
        cost: t.total(),
        data_term: t.data,
        prior_term: t.prior,
    };
    state.cost_history.push(record(0, &terms));
    let mut best = (terms, state.f.clone(), 0usize);
    let mut previous = terms.total();
    let mut increases = 0;
    let mut halvings = 0;

    while state.iter < cfg.max_iters {
        state.step(&grad, lipschitz);
        let k = state.iter;
        (terms, grad) = objective.cost_and_gradient(&state.f)?;
        let cost = terms.total();
        if !cost.is_finite() {
            return Err(Error::Divergence { iteration: k });
        }
        if cost < best.0.total() {
            best = (terms, state.f.clone(), k);
        }
        if k % cfg.record_cost_every == 0 {
            state.cost_history.push(record(k, &terms));
            if plateaued(&state.cost_history, cfg.rel_cost_tol) {
                break;
            }
        }
        increases = if cost > previous { increases + 1 } else { 0 };
        previous = cost;
        if increases >= INCREASE_LIMIT && k < cfg.max_iters {
            lipschitz *= 2.0;
            halvings += 1;
            increases = 0;
            state.restart(best.1.clone());
            (terms, grad) = objective.cost_and_gradient(&state.f)?;
            previous = terms.total();
        }
    }

    Ok(SolverOutcome {
        volume: best.1,
        best_cost: best.0,
        best_iteration: best.2,
        iterations: state.iter,
        history: state.cost_history,
        lipschitz,
        step_halvings: halvings,
    })
}

/// Estimates the Lipschitz constant and runs [`ogm_minimize`].
pub fn reconstruct_mbir(problem: &MbirProblem<'_>, f0: Option<Volume>, cfg: &SolverConfig) -> Result<(SolverOutcome, LipschitzEstimate)> {
    let estimate = estimate_lipschitz(problem, cfg)?;
    let f0 = match f0 {
        Some(f) => {
            f.check_same_grid(&Volume::zeros(*problem.grid()))?;
            f
        }
        None => Volume::zeros(*problem.grid()),
    };
    let outcome = ogm_minimize(problem, f0, estimate.total, cfg)?;
    Ok((outcome, estimate))
}
