//! The ADMM outer loop for bound-constrained TV-regularized least squares,
//! plus the three baseline variants.
//!
//! The problem
//!
//! ```text
//! || |grad m| ||_1 + (alpha/2) ||F(m) - d||^2  ->  min,   m1 <= m <= m2
//! ```
//!
//! is split three ways: a smooth model subproblem solved by a few warm-started
//! conjugate-gradient steps on its regularized normal equations, a shrinkage
//! update for the auxiliary gradient variable `x`, and a box projection `y`.
//! Scaled multipliers `b` (gradient space) and `c` (model space) tie the
//! splits together; one outer iteration is
//!
//! ```text
//! repeat n_inner times:
//!     m <- argmin (lambda/2)||x - grad m - b||^2 + (alpha/2)||F m - d||^2
//!                 + (delta/2)||m - y - c||^2          (cg_steps CG iterations)
//!     x <- shrink(grad m + b, 1/lambda)
//! b <- b + grad m - x
//! c <- c + y - m           (old y)
//! y <- clamp(m)
//! ```
//!
//! stopping when the relative model change drops below the target accuracy or
//! the outer iteration cap is reached.

use crate::cg::cg_solve;
use crate::error::{Error, Result};
use crate::forward::{DataVector, LinearOperator};
use crate::grid::{Bounds, GradField, ModelVector};
use crate::operators::{grad_adjoint, grad_forward, project, shrink, tv_value, TvMode};
use serde::Deserialize;

/// Relative residual tolerance for inner CG solves; iteration budgets are the
/// practical stop, this only short-circuits converged warm starts.
const CG_REL_TOL: f64 = 1e-12;

/// Abort when the objective exceeds this multiple of its initial value.
const DIVERGENCE_FACTOR: f64 = 1e6;

/// Solver variants: the bound-constrained algorithm and its three baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Full three-way split with multiplier-coupled projection.
    BoundConstrained,
    /// delta = 0: plain split TV iteration, bounds ignored.
    UnconstrainedTv,
    /// delta = 0 iteration with the model clamped after every outer
    /// iteration; the negative baseline that violates first-order optimality
    /// where bounds are active.
    NaiveProjection,
    /// Quadratic gradient-smoothness baseline, solved directly by CG.
    Tikhonov,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::BoundConstrained,
        Variant::UnconstrainedTv,
        Variant::NaiveProjection,
        Variant::Tikhonov,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::BoundConstrained => "bound_constrained",
            Variant::UnconstrainedTv => "unconstrained_tv",
            Variant::NaiveProjection => "naive_projection",
            Variant::Tikhonov => "tikhonov",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "bound_constrained" => Ok(Variant::BoundConstrained),
            "unconstrained_tv" => Ok(Variant::UnconstrainedTv),
            "naive_projection" => Ok(Variant::NaiveProjection),
            "tikhonov" => Ok(Variant::Tikhonov),
            other => Err(format!(
                "unknown variant '{other}' (expected one of: bound_constrained, \
                 unconstrained_tv, naive_projection, tikhonov)"
            )),
        }
    }
}

/// All knobs of one solve.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Data-fit weight in front of the misfit term.
    pub alpha: f64,
    /// Penalty on the gradient split `x = grad m`; the shrinkage threshold
    /// is `1/lambda`.
    pub lambda: f64,
    /// Penalty on the projection split `m = y`; 0 means no bound coupling.
    pub delta: f64,
    /// Inner alternating cycles per outer iteration.
    pub n_inner: usize,
    /// Outer iteration cap.
    pub n_outer: usize,
    /// CG iteration budget per model subproblem.
    pub cg_steps: usize,
    /// Relative-model-change stopping threshold.
    pub target_accuracy: f64,
    pub tv_mode: TvMode,
    pub variant: Variant,
    /// Smoothness weight of the Tikhonov baseline (used by that variant only).
    pub tikhonov_beta: f64,
    /// Record the model every this many outer iterations (0 = never).
    pub snapshot_stride: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            lambda: 2.0,
            delta: 2.0,
            n_inner: 2,
            n_outer: 1000,
            cg_steps: 10,
            target_accuracy: 1e-12,
            tv_mode: TvMode::Anisotropic,
            variant: Variant::BoundConstrained,
            tikhonov_beta: 1.0,
            snapshot_stride: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, message: String) -> Error {
            Error::InvalidParameter { name, message }
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(bad("alpha", format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(bad("lambda", format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(bad("delta", format!("delta must be >= 0, got {}", self.delta)));
        }
        if self.n_inner < 1 {
            return Err(bad("n_inner", "n_inner must be >= 1".into()));
        }
        if self.n_outer < 1 {
            return Err(bad("n_outer", "n_outer must be >= 1".into()));
        }
        if self.cg_steps < 1 {
            return Err(bad("cg_steps", "cg_steps must be >= 1".into()));
        }
        if !(self.target_accuracy > 0.0) || !self.target_accuracy.is_finite() {
            return Err(bad(
                "target_accuracy",
                format!("target_accuracy must be > 0, got {}", self.target_accuracy),
            ));
        }
        if self.variant == Variant::BoundConstrained && self.delta == 0.0 {
            return Err(bad(
                "delta",
                "the bound_constrained variant requires delta > 0".into(),
            ));
        }
        if self.variant == Variant::Tikhonov
            && (!(self.tikhonov_beta > 0.0) || !self.tikhonov_beta.is_finite())
        {
            return Err(bad(
                "tikhonov_beta",
                format!("tikhonov_beta must be > 0, got {}", self.tikhonov_beta),
            ));
        }
        Ok(())
    }

    /// The projection-coupling weight the iteration actually uses: the
    /// unconstrained and naive-projection variants run with delta = 0.
    pub fn effective_delta(&self) -> f64 {
        match self.variant {
            Variant::BoundConstrained => self.delta,
            _ => 0.0,
        }
    }
}

/// Iterate bundle of one solve. Multipliers are stored in scaled form
/// (`b = mu/lambda`, `c = nu/delta`); the unscaled vectors never exist.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub m: ModelVector,
    pub x: GradField,
    pub y: ModelVector,
    pub b: GradField,
    pub c: ModelVector,
    /// Outer iterations completed.
    pub k: usize,
    pub history: Vec<IterationRecord>,
}

/// Per-outer-iteration diagnostics, one CSV row each.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub k: usize,
    pub rel_model_change: f64,
    /// `||grad m - x||_2`.
    pub split_residual: f64,
    /// `||m - y||_2`.
    pub proj_residual: f64,
    /// `(1/2) ||F m - d||_2^2`.
    pub data_misfit: f64,
    pub tv_value: f64,
    /// TV + (alpha/2) misfit, the original objective.
    pub objective: f64,
}

/// Why the outer loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    TargetReached,
    IterationCap,
}

/// Final iterates plus the full diagnostics trail.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub variant: Variant,
    /// Final model iterate.
    pub model: ModelVector,
    /// Final projected model; always feasible.
    pub projected: ModelVector,
    pub iterations: usize,
    pub stop: StopReason,
    pub history: Vec<IterationRecord>,
    /// `(k, model)` pairs captured every `snapshot_stride` outer iterations.
    pub snapshots: Vec<(usize, ModelVector)>,
    /// Number of CG runs that hit a curvature breakdown.
    pub cg_breakdowns: usize,
}

impl SolveResult {
    /// The solution this variant reports: the projected model for the
    /// bound-constrained algorithm, the raw model otherwise.
    pub fn solution(&self) -> &ModelVector {
        match self.variant {
            Variant::BoundConstrained => &self.projected,
            _ => &self.model,
        }
    }
}

/// Fresh state: `m = m0`, `x = b = 0`, `y = clamp(m0)`, `c = 0`.
pub fn init_state(m0: &ModelVector, bounds: &Bounds) -> Result<SolverState> {
    if m0.grid() != bounds.grid() {
        return Err(Error::DimensionMismatch {
            context: "init_state (bounds grid)",
            expected: m0.len(),
            actual: bounds.grid().cell_count(),
        });
    }
    Ok(SolverState {
        m: m0.clone(),
        x: GradField::zeros(m0.grid().clone()),
        y: project(m0, bounds),
        b: GradField::zeros(m0.grid().clone()),
        c: ModelVector::zeros(m0.grid().clone()),
        k: 0,
        history: Vec::new(),
    })
}

/// Approximately minimize the smooth model subproblem
/// `(lambda/2)||x - grad m - b||^2 + (alpha/2)||F m - d||^2
///  + (delta/2)||m - y - c||^2`
/// with at most `cfg.cg_steps` CG iterations on its normal equations,
/// warm-started from the current model.
///
/// Returns the new model and whether CG hit a curvature breakdown (in which
/// case the last valid iterate is returned rather than an error).
pub fn solve_m_subproblem<F: LinearOperator>(
    state: &SolverState,
    cfg: &SolverConfig,
    f: &F,
    d: &DataVector,
) -> Result<(ModelVector, bool)> {
    check_dimensions(f, d, &state.m)?;
    let grid = state.m.grid().clone();
    let delta = cfg.effective_delta();
    let (alpha, lambda) = (cfg.alpha, cfg.lambda);

    // rhs = lambda * grad^T (x - b) + alpha * F^T d + delta * (y + c)
    let mut rhs = grad_adjoint(&state.x.sub(&state.b));
    for v in rhs.values_mut() {
        *v *= lambda;
    }
    rhs.axpy(alpha, &f.adjoint(d)?);
    if delta > 0.0 {
        rhs.axpy(delta, &state.y.add(&state.c));
    }

    let apply = |v: &[f64], out: &mut [f64]| {
        let mv = ModelVector {
            grid: grid.clone(),
            values: v.to_vec(),
        };
        let mut acc = grad_adjoint(&grad_forward(&mv));
        for a in acc.values_mut() {
            *a *= lambda;
        }
        let fv = f.apply(&mv).expect("dimensions checked before CG");
        acc.axpy(alpha, &f.adjoint(&fv).expect("dimensions checked before CG"));
        if delta > 0.0 {
            acc.axpy(delta, &mv);
        }
        out.copy_from_slice(acc.values());
    };

    let mut m_new = state.m.clone();
    let report = cg_solve(apply, rhs.values(), m_new.values_mut(), cfg.cg_steps, CG_REL_TOL);
    Ok((m_new, report.breakdown))
}

/// One inner loop: `n_inner` cycles of model update followed by shrinkage of
/// `grad m + b` at threshold `1/lambda`; the fresh `x` feeds the next cycle.
///
/// Returns true if any CG run broke down.
pub fn inner_cycle<F: LinearOperator>(
    state: &mut SolverState,
    cfg: &SolverConfig,
    f: &F,
    d: &DataVector,
) -> Result<bool> {
    let mut any_breakdown = false;
    for _ in 0..cfg.n_inner {
        let (m_new, breakdown) = solve_m_subproblem(state, cfg, f, d)?;
        any_breakdown |= breakdown;
        state.m = m_new;
        let arg = grad_forward(&state.m).add(&state.b);
        state.x = shrink(&arg, 1.0 / cfg.lambda, cfg.tv_mode.shrink_mode());
    }
    Ok(any_breakdown)
}

/// One outer iteration: inner loop, multiplier updates (`c` uses the old
/// `y`), then the variant's projection handling, then a diagnostics record.
///
/// Returns true if any CG run broke down during the step.
pub fn admm_step<F: LinearOperator>(
    state: &mut SolverState,
    cfg: &SolverConfig,
    f: &F,
    d: &DataVector,
    bounds: &Bounds,
) -> Result<bool> {
    if cfg.variant == Variant::Tikhonov {
        return Err(Error::InvalidParameter {
            name: "variant",
            message: "admm_step does not apply to the tikhonov variant".into(),
        });
    }
    let m_entry = state.m.clone();
    let breakdown = inner_cycle(state, cfg, f, d)?;

    state.b = state.b.add(&grad_forward(&state.m).sub(&state.x));
    match cfg.variant {
        Variant::BoundConstrained => {
            // c update reads the old y; y is refreshed afterwards.
            state.c = state.c.add(&state.y.sub(&state.m));
            state.y = project(&state.m, bounds);
        }
        Variant::UnconstrainedTv => {
            // No coupling (delta = 0); y tracks the projection for reporting.
            state.y = project(&state.m, bounds);
        }
        Variant::NaiveProjection => {
            state.m = project(&state.m, bounds);
            state.y = state.m.clone();
        }
        Variant::Tikhonov => unreachable!(),
    }
    state.k += 1;

    let rel_model_change =
        state.m.sub(&m_entry).norm2() / m_entry.norm2().max(f64::EPSILON);
    let fm = f.apply(&state.m)?;
    let residual = fm.sub(d);
    let data_misfit = 0.5 * residual.norm2().powi(2);
    let tv = tv_value(&state.m, cfg.tv_mode);
    state.history.push(IterationRecord {
        k: state.k,
        rel_model_change,
        split_residual: grad_forward(&state.m).sub(&state.x).norm2(),
        proj_residual: state.m.sub(&state.y).norm2(),
        data_misfit,
        tv_value: tv,
        objective: tv + cfg.alpha * data_misfit,
    });
    Ok(breakdown)
}

/// Full solve: initialize, iterate `admm_step` until the relative model
/// change meets `target_accuracy` or `n_outer` is reached. The `tikhonov`
/// variant dispatches to [`tikhonov_solve`] instead of iterating.
pub fn run<F: LinearOperator>(
    cfg: &SolverConfig,
    f: &F,
    d: &DataVector,
    bounds: &Bounds,
    m0: &ModelVector,
) -> Result<SolveResult> {
    cfg.validate()?;
    check_dimensions(f, d, m0)?;
    if m0.grid() != bounds.grid() {
        return Err(Error::DimensionMismatch {
            context: "run (bounds grid)",
            expected: m0.len(),
            actual: bounds.grid().cell_count(),
        });
    }

    if cfg.variant == Variant::Tikhonov {
        return run_tikhonov(cfg, f, d, bounds);
    }

    let mut state = init_state(m0, bounds)?;
    let initial_objective = objective_value(&state.m, f, d, cfg.alpha, cfg.tv_mode)?;
    let blowup = DIVERGENCE_FACTOR * initial_objective.max(f64::EPSILON);

    let mut snapshots = Vec::new();
    let mut cg_breakdowns = 0usize;
    let mut stop = StopReason::IterationCap;

    for _ in 0..cfg.n_outer {
        if admm_step(&mut state, cfg, f, d, bounds)? {
            cg_breakdowns += 1;
        }
        let record = state.history.last().expect("admm_step records");
        let objective = record.objective;
        if !state.m.is_finite() || !objective.is_finite() {
            return Err(Error::Diverged {
                iteration: state.k,
                detail: "non-finite model or objective".into(),
                history: state.history.clone(),
            });
        }
        if objective > blowup {
            return Err(Error::Diverged {
                iteration: state.k,
                detail: format!(
                    "objective {objective:.3e} exceeded {DIVERGENCE_FACTOR:e} x initial \
                     {initial_objective:.3e}"
                ),
                history: state.history.clone(),
            });
        }
        if cfg.snapshot_stride > 0 && state.k % cfg.snapshot_stride == 0 {
            snapshots.push((state.k, state.m.clone()));
        }
        if record.rel_model_change <= cfg.target_accuracy {
            stop = StopReason::TargetReached;
            break;
        }
    }

    Ok(SolveResult {
        variant: cfg.variant,
        projected: state.y.clone(),
        iterations: state.k,
        stop,
        history: state.history,
        snapshots,
        cg_breakdowns,
        model: state.m,
    })
}

fn run_tikhonov<F: LinearOperator>(
    cfg: &SolverConfig,
    f: &F,
    d: &DataVector,
    bounds: &Bounds,
) -> Result<SolveResult> {
    // The baseline is a single quadratic solve; give CG enough budget to
    // actually converge rather than the per-subproblem budget.
    let budget = cfg.cg_steps.max(2 * f.domain_size());
    let m = tikhonov_solve(f, d, cfg.tikhonov_beta, budget)?;
    let fm = f.apply(&m)?;
    let data_misfit = 0.5 * fm.sub(d).norm2().powi(2);
    let tv = tv_value(&m, cfg.tv_mode);
    Ok(SolveResult {
        variant: Variant::Tikhonov,
        projected: project(&m, bounds),
        iterations: 0,
        stop: StopReason::TargetReached,
        history: vec![IterationRecord {
            k: 0,
            rel_model_change: 0.0,
            split_residual: 0.0,
            proj_residual: project(&m, bounds).sub(&m).norm2(),
            data_misfit,
            tv_value: tv,
            objective: tv + cfg.alpha * data_misfit,
        }],
        snapshots: Vec::new(),
        cg_breakdowns: 0,
        model: m,
    })
}

/// Gradient-penalty Tikhonov baseline: minimize
/// `(1/2)||F m - d||^2 + (beta/2)||grad m||^2` by CG on
/// `(F^T F + beta grad^T grad) m = F^T d`.
pub fn tikhonov_solve<F: LinearOperator>(
    f: &F,
    d: &DataVector,
    beta: f64,
    cg_steps: usize,
) -> Result<ModelVector> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter {
            name: "tikhonov_beta",
            message: format!("beta must be > 0, got {beta}"),
        });
    }
    if d.len() != f.range_size() {
        return Err(Error::DimensionMismatch {
            context: "tikhonov_solve (data length)",
            expected: f.range_size(),
            actual: d.len(),
        });
    }
    let grid = f.model_grid().clone();
    let rhs = f.adjoint(d)?;
    let apply = |v: &[f64], out: &mut [f64]| {
        let mv = ModelVector {
            grid: grid.clone(),
            values: v.to_vec(),
        };
        let fv = f.apply(&mv).expect("dimensions checked");
        let mut acc = f.adjoint(&fv).expect("dimensions checked");
        acc.axpy(beta, &grad_adjoint(&grad_forward(&mv)));
        out.copy_from_slice(acc.values());
    };
    let mut m = ModelVector::zeros(grid);
    cg_solve(apply, rhs.values(), m.values_mut(), cg_steps, CG_REL_TOL);
    if !m.is_finite() {
        return Err(Error::NonFinite("tikhonov_solve"));
    }
    Ok(m)
}

/// The unconstrained TV iteration with the model clamped onto the box after
/// every outer iteration. Exists solely as the negative baseline: the clamp
/// honors the bounds but breaks first-order optimality where they are
/// active.
pub fn naive_projected_solve<F: LinearOperator>(
    cfg: &SolverConfig,
    f: &F,
    d: &DataVector,
    bounds: &Bounds,
    m0: &ModelVector,
) -> Result<SolveResult> {
    let cfg = SolverConfig {
        variant: Variant::NaiveProjection,
        ..cfg.clone()
    };
    run(&cfg, f, d, bounds, m0)
}

/// Value of the original objective `TV(m) + (alpha/2)||F m - d||^2`.
pub fn objective_value<F: LinearOperator>(
    m: &ModelVector,
    f: &F,
    d: &DataVector,
    alpha: f64,
    tv_mode: TvMode,
) -> Result<f64> {
    let fm = f.apply(m)?;
    Ok(tv_value(m, tv_mode) + 0.5 * alpha * fm.sub(d).norm2().powi(2))
}

/// Value of the augmented (frozen-multiplier) objective
/// `||x||_1 + (alpha/2)||F m - d||^2 + (lambda/2)||x - grad m - b||^2
///  + (delta/2)||m - y - c||^2`.
#[allow(clippy::too_many_arguments)]
pub fn augmented_objective<F: LinearOperator>(
    m: &ModelVector,
    x: &GradField,
    y: &ModelVector,
    b: &GradField,
    c: &ModelVector,
    cfg: &SolverConfig,
    f: &F,
    d: &DataVector,
) -> Result<f64> {
    let fm = f.apply(m)?;
    let misfit = 0.5 * cfg.alpha * fm.sub(d).norm2().powi(2);
    let split = x.sub(&grad_forward(m)).sub(b).norm2().powi(2);
    let delta = cfg.effective_delta();
    let prox = if delta > 0.0 {
        0.5 * delta * m.sub(y).sub(c).norm2().powi(2)
    } else {
        0.0
    };
    Ok(x.l1() + misfit + 0.5 * cfg.lambda * split + prox)
}

fn check_dimensions<F: LinearOperator>(f: &F, d: &DataVector, m: &ModelVector) -> Result<()> {
    if m.len() != f.domain_size() {
        return Err(Error::DimensionMismatch {
            context: "solver (model length vs operator domain)",
            expected: f.domain_size(),
            actual: m.len(),
        });
    }
    if d.len() != f.range_size() {
        return Err(Error::DimensionMismatch {
            context: "solver (data length vs operator range)",
            expected: f.range_size(),
            actual: d.len(),
        });
    }
    Ok(())
}
