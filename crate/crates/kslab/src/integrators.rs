//! Semi-implicit time integration of the upwind finite-element
//! semi-discretization.
//!
//! Every scheme advances by solving linear problems of the form
//!
//! ```text
//! (c_m/tau) M_L n + c_K K n + c_B B(u) n = rhs(history),
//! ```
//!
//! where `M_L` is the lumped mass diagonal, `K` the stiffness matrix and
//! `B(u)` the upwind drift matrix with frozen argument `u`. The implicit
//! drift argument is resolved by Picard iteration `u^(0) = n_{k-1}`,
//! `u^(m) = N(u^(m-1))`, stopped when the Linf increment drops below `eps`
//! or after `m_max` sweeps (a non-converged sweep is reported, not fatal;
//! the last iterate is used). The Euler scheme freezes `u = n_{k-1}`
//! outright, which makes its system matrix an M-matrix and the step
//! positivity preserving.
//!
//! Mass is conserved exactly (up to the linear solver tolerance) by every
//! scheme because both `K` and `B(u)` have vanishing column sums.

use crate::assembly::{
    assemble_drift_matrix, lumped_mass, stiffness, upwind_coeffs, AssemblyError, FemField,
    GreenOperator, LumpedMass, MassKind, SparseOperator,
};
use crate::diagnostics::{centroid, free_energy, mass, second_moment, DiagRecord};
use crate::mesh::{dual_geometry, DualGeometry, StructuredTriMesh};
use crate::solver::{linear_solve, SolveError};
use crate::virial::SchemeKind;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StepError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("scheme {0} is not supported by the finite-element stepper")]
    UnsupportedScheme(String),
    #[error("scheme needs {need} history fields, state has {got}")]
    History { need: usize, got: usize },
    #[error("field has {got} values, mesh has {expected} vertices")]
    FieldSize { got: usize, expected: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Time-discretization parameters of a simulation run.
#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    /// Time step.
    pub tau: f64,
    /// Picard Linf stopping tolerance.
    pub eps: f64,
    /// Picard iteration cap.
    pub m_max: usize,
    /// Relative residual tolerance of the time-step linear solves.
    pub solver_tol: f64,
    /// Coefficient of the zeroth-order term in the chemical equation.
    pub alpha: f64,
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<(), StepError> {
        if !(self.tau > 0.0) {
            return Err(StepError::Config(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.eps > 0.0) || !(self.solver_tol > 0.0) || !(self.alpha > 0.0) {
            return Err(StepError::Config(
                "eps, solver_tol and alpha must be positive".into(),
            ));
        }
        if self.m_max == 0 {
            return Err(StepError::Config("m_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mesh, dual geometry and the assembled operators shared by all steps of
/// a run. Immutable once built.
#[derive(Debug, Clone)]
pub struct FemContext {
    pub mesh: StructuredTriMesh,
    pub dual: DualGeometry,
    pub lumped: LumpedMass,
    pub stiffness: SparseOperator,
    pub green: GreenOperator,
}

impl FemContext {
    /// Assemble the operators for a mesh. `green_tol` is the relative
    /// residual tolerance of the drift Green solves; drift accuracy affects
    /// neither conservation nor positivity, so it is configured separately
    /// from the time-step solver tolerance.
    pub fn new(mesh: StructuredTriMesh, alpha: f64, green_tol: f64) -> Result<Self, AssemblyError> {
        let dual = dual_geometry(&mesh);
        let lumped = lumped_mass(&dual);
        let stiff = stiffness(&mesh);
        let green = GreenOperator::new(&mesh, &dual, MassKind::Consistent, alpha, green_tol)?;
        Ok(Self {
            mesh,
            dual,
            lumped,
            stiffness: stiff,
            green,
        })
    }

    pub fn n(&self) -> usize {
        self.mesh.vertex_count()
    }
}

/// Time-stepping state: the most recent fields, newest first
/// (`history[0] = n_{k-1}`).
#[derive(Debug, Clone)]
pub struct TimeState {
    pub history: Vec<FemField>,
    pub k: usize,
    pub t: f64,
}

impl TimeState {
    pub fn new(initial: FemField) -> Self {
        Self {
            history: vec![initial],
            k: 0,
            t: 0.0,
        }
    }

    pub fn current(&self) -> &FemField {
        &self.history[0]
    }
}

/// Outcome of one time step.
#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    pub picard_iters: usize,
    pub converged: bool,
    /// Total Krylov iterations spent in the step (Green solves included).
    pub solver_iters: usize,
    pub mass_after: f64,
    pub min_value: f64,
    pub linf: f64,
}

fn require_history(state: &TimeState, need: usize) -> Result<(), StepError> {
    if state.history.len() < need {
        return Err(StepError::History {
            need,
            got: state.history.len(),
        });
    }
    Ok(())
}

/// The context's Green operator must have been assembled with the same
/// coefficient the scheme claims to integrate.
fn check_setup(ctx: &FemContext, config: &SchemeConfig) -> Result<(), StepError> {
    config.validate()?;
    if config.alpha != ctx.green.alpha {
        return Err(StepError::Config(format!(
            "config alpha {} does not match the context's Green operator (alpha {})",
            config.alpha, ctx.green.alpha
        )));
    }
    Ok(())
}

fn check_field(ctx: &FemContext, f: &FemField) -> Result<(), StepError> {
    if f.len() != ctx.n() {
        return Err(StepError::FieldSize {
            got: f.len(),
            expected: ctx.n(),
        });
    }
    Ok(())
}

fn drift_matrix(ctx: &FemContext, u: &FemField) -> Result<(SparseOperator, usize), StepError> {
    let (coeffs, stats) = upwind_coeffs(&ctx.mesh, &ctx.dual, &ctx.green, u)?;
    Ok((assemble_drift_matrix(&ctx.dual, &coeffs), stats.iterations))
}

fn report_for(
    ctx: &FemContext,
    field: &FemField,
    picard_iters: usize,
    converged: bool,
    solver_iters: usize,
) -> StepReport {
    StepReport {
        picard_iters,
        converged,
        solver_iters,
        mass_after: mass(field, &ctx.lumped),
        min_value: field.min(),
        linf: field.linf(),
    }
}

/// Semi-implicit Euler step: drift frozen at `n_{k-1}`, so
/// `(M_L/tau + K + B(n_{k-1})) n_k = (M_L/tau) n_{k-1}`. The system matrix
/// is an M-matrix, hence `n_{k-1} >= 0` implies `n_k >= 0`.
pub fn step_euler(
    ctx: &FemContext,
    state: &TimeState,
    config: &SchemeConfig,
) -> Result<(FemField, StepReport), StepError> {
    check_setup(ctx, config)?;
    require_history(state, 1)?;
    let n_prev = state.current();
    check_field(ctx, n_prev)?;
    let inv_tau = 1.0 / config.tau;

    let (b, green_iters) = drift_matrix(ctx, n_prev)?;
    let diag: Vec<f64> = ctx.lumped.diag.iter().map(|m| m * inv_tau).collect();
    let system = SparseOperator::combine(&[(1.0, &ctx.stiffness), (1.0, &b)], Some(&diag));
    let rhs: Vec<f64> = diag
        .iter()
        .zip(&n_prev.values)
        .map(|(d, v)| d * v)
        .collect();
    let (x, stats) = linear_solve(&system, &rhs, config.solver_tol)?;
    let field = FemField::from(x);
    let report = report_for(ctx, &field, 1, true, green_iters + stats.iterations);
    Ok((field, report))
}

/// Shared Picard driver: `build` assembles the frozen-drift linear problem
/// for the current iterate and returns (system, rhs, green_iters).
fn picard<F>(
    ctx: &FemContext,
    config: &SchemeConfig,
    n_prev: &FemField,
    mut build: F,
) -> Result<(FemField, StepReport), StepError>
where
    F: FnMut(&FemField) -> Result<(SparseOperator, Vec<f64>, usize), StepError>,
{
    let mut u = n_prev.clone();
    let mut solver_iters = 0;
    let mut converged = false;
    let mut iters = 0;
    for _ in 0..config.m_max {
        iters += 1;
        let (system, rhs, green_iters) = build(&u)?;
        let (x, stats) = linear_solve(&system, &rhs, config.solver_tol)?;
        solver_iters += green_iters + stats.iterations;
        let next = FemField::from(x);
        let diff = next.linf_diff(&u);
        u = next;
        if diff < config.eps {
            converged = true;
            break;
        }
    }
    let report = report_for(ctx, &u, iters, converged, solver_iters);
    Ok((u, report))
}

/// BDF-2 step: `(3/(2tau)) M_L n_k + K n_k + B(u) n_k
/// = (M_L/tau)(2 n_{k-1} - n_{k-2}/2)`, Picard on the drift argument `u`.
pub fn step_bdf2(
    ctx: &FemContext,
    state: &TimeState,
    config: &SchemeConfig,
) -> Result<(FemField, StepReport), StepError> {
    check_setup(ctx, config)?;
    require_history(state, 2)?;
    let n1 = &state.history[0];
    let n2 = &state.history[1];
    check_field(ctx, n1)?;
    check_field(ctx, n2)?;
    let inv_tau = 1.0 / config.tau;
    let diag: Vec<f64> = ctx.lumped.diag.iter().map(|m| m * 1.5 * inv_tau).collect();
    let rhs: Vec<f64> = ctx
        .lumped
        .diag
        .iter()
        .zip(n1.values.iter().zip(&n2.values))
        .map(|(m, (a, b))| m * inv_tau * (2.0 * a - 0.5 * b))
        .collect();
    picard(ctx, config, n1, |u| {
        let (b, gi) = drift_matrix(ctx, u)?;
        let system = SparseOperator::combine(&[(1.0, &ctx.stiffness), (1.0, &b)], Some(&diag));
        Ok((system, rhs.clone(), gi))
    })
}

/// BDF-3 step: `(11/(6tau)) M_L n_k + K n_k + B(u) n_k
/// = (M_L/tau)(3 n_{k-1} - 3 n_{k-2}/2 + n_{k-3}/3)`.
pub fn step_bdf3(
    ctx: &FemContext,
    state: &TimeState,
    config: &SchemeConfig,
) -> Result<(FemField, StepReport), StepError> {
    check_setup(ctx, config)?;
    require_history(state, 3)?;
    let n1 = &state.history[0];
    let n2 = &state.history[1];
    let n3 = &state.history[2];
    check_field(ctx, n1)?;
    let inv_tau = 1.0 / config.tau;
    let diag: Vec<f64> = ctx
        .lumped
        .diag
        .iter()
        .map(|m| m * inv_tau * 11.0 / 6.0)
        .collect();
    let rhs: Vec<f64> = (0..ctx.n())
        .map(|i| {
            ctx.lumped.diag[i]
                * inv_tau
                * (3.0 * n1.values[i] - 1.5 * n2.values[i] + n3.values[i] / 3.0)
        })
        .collect();
    picard(ctx, config, n1, |u| {
        let (b, gi) = drift_matrix(ctx, u)?;
        let system = SparseOperator::combine(&[(1.0, &ctx.stiffness), (1.0, &b)], Some(&diag));
        Ok((system, rhs.clone(), gi))
    })
}

/// Midpoint step:
/// `(M_L/tau) n_k + (K/2) n_k + (1/4) B(u + n_{k-1}) n_k
/// = (M_L/tau) n_{k-1} - (K/2) n_{k-1} - (1/4) B(u + n_{k-1}) n_{k-1}`.
/// The drift argument is summed before the Green solve.
pub fn step_midpoint(
    ctx: &FemContext,
    state: &TimeState,
    config: &SchemeConfig,
) -> Result<(FemField, StepReport), StepError> {
    check_setup(ctx, config)?;
    require_history(state, 1)?;
    let n_prev = state.current().clone();
    check_field(ctx, &n_prev)?;
    let inv_tau = 1.0 / config.tau;
    let diag: Vec<f64> = ctx.lumped.diag.iter().map(|m| m * inv_tau).collect();
    let k_prev = ctx.stiffness.matvec_alloc(&n_prev.values);
    picard(ctx, config, &n_prev, |u| {
        let arg = FemField::from(
            u.values
                .iter()
                .zip(&n_prev.values)
                .map(|(a, b)| a + b)
                .collect::<Vec<_>>(),
        );
        let (b, gi) = drift_matrix(ctx, &arg)?;
        let b_prev = b.matvec_alloc(&n_prev.values);
        let system = SparseOperator::combine(&[(0.5, &ctx.stiffness), (0.25, &b)], Some(&diag));
        let rhs: Vec<f64> = (0..ctx.n())
            .map(|i| diag[i] * n_prev.values[i] - 0.5 * k_prev[i] - 0.25 * b_prev[i])
            .collect();
        Ok((system, rhs, gi))
    })
}

/// Trapezoid step:
/// `(M_L/tau) n_k + (K/2) n_k + (1/2) B(u) n_k
/// = (M_L/tau) n_{k-1} - (K/2) n_{k-1} - (1/2) B(n_{k-1}) n_{k-1}`;
/// the explicit half of the drift is fixed across the Picard sweep.
pub fn step_trapezoid(
    ctx: &FemContext,
    state: &TimeState,
    config: &SchemeConfig,
) -> Result<(FemField, StepReport), StepError> {
    check_setup(ctx, config)?;
    require_history(state, 1)?;
    let n_prev = state.current().clone();
    check_field(ctx, &n_prev)?;
    let inv_tau = 1.0 / config.tau;
    let diag: Vec<f64> = ctx.lumped.diag.iter().map(|m| m * inv_tau).collect();
    let k_prev = ctx.stiffness.matvec_alloc(&n_prev.values);
    let (b_explicit, explicit_green_iters) = drift_matrix(ctx, &n_prev)?;
    let b_prev = b_explicit.matvec_alloc(&n_prev.values);
    let rhs: Vec<f64> = (0..ctx.n())
        .map(|i| diag[i] * n_prev.values[i] - 0.5 * k_prev[i] - 0.5 * b_prev[i])
        .collect();
    let mut first = Some(explicit_green_iters);
    picard(ctx, config, &n_prev, |u| {
        let (b, gi) = drift_matrix(ctx, u)?;
        let system = SparseOperator::combine(&[(0.5, &ctx.stiffness), (0.5, &b)], Some(&diag));
        Ok((system, rhs.clone(), gi + first.take().unwrap_or(0)))
    })
}

fn history_needed(kind: &SchemeKind) -> Result<usize, StepError> {
    match kind {
        SchemeKind::Euler | SchemeKind::Midpoint | SchemeKind::Trapezoid => Ok(1),
        SchemeKind::Bdf2 => Ok(2),
        SchemeKind::Bdf3 => Ok(3),
        other => Err(StepError::UnsupportedScheme(other.name().into())),
    }
}

/// Advance the state by one step of the configured scheme, using the
/// startup ladder Euler -> BDF-2 -> BDF-3 while the history is shorter than
/// the scheme's stencil.
pub fn advance(
    ctx: &FemContext,
    state: &mut TimeState,
    config: &SchemeConfig,
) -> Result<StepReport, StepError> {
    let need = history_needed(&config.kind)?;
    let (field, report) = match (&config.kind, state.history.len()) {
        (SchemeKind::Euler, _) => step_euler(ctx, state, config)?,
        (SchemeKind::Midpoint, _) => step_midpoint(ctx, state, config)?,
        (SchemeKind::Trapezoid, _) => step_trapezoid(ctx, state, config)?,
        (SchemeKind::Bdf2, 1) => step_euler(ctx, state, config)?,
        (SchemeKind::Bdf2, _) => step_bdf2(ctx, state, config)?,
        (SchemeKind::Bdf3, 1) => step_euler(ctx, state, config)?,
        (SchemeKind::Bdf3, 2) => step_bdf2(ctx, state, config)?,
        (SchemeKind::Bdf3, _) => step_bdf3(ctx, state, config)?,
        (other, _) => return Err(StepError::UnsupportedScheme(other.name().into())),
    };
    state.history.insert(0, field);
    state.history.truncate(need);
    state.k += 1;
    state.t = state.k as f64 * config.tau;
    Ok(report)
}

/// When to stop a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    MaxSteps(usize),
    EndTime(f64),
}

impl StopRule {
    pub fn steps(&self, tau: f64) -> usize {
        match *self {
            StopRule::MaxSteps(n) => n,
            StopRule::EndTime(t) => (t / tau).round().max(0.0) as usize,
        }
    }
}

/// Trajectory summary of [`run`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    /// One record per step, including step zero.
    pub records: Vec<DiagRecord>,
    pub final_field: FemField,
    pub steps: usize,
    /// Steps whose Picard sweep hit the iteration cap.
    pub picard_failures: usize,
    pub max_picard_iters: usize,
}

/// Run a trajectory, emitting one [`DiagRecord`] per step (step zero
/// included). The second moment is taken about the initial centroid. The
/// energy record needs a Green solve of its own; when a higher-order scheme
/// has produced negatives beyond the free-energy clamp, the energy is
/// recorded as NaN rather than aborting the run. `on_step` sees every
/// record with its field, in order; identical inputs produce identical
/// trajectories.
pub fn run<F>(
    ctx: &FemContext,
    config: &SchemeConfig,
    initial: FemField,
    stop: StopRule,
    mut on_step: F,
) -> Result<RunSummary, StepError>
where
    F: FnMut(&DiagRecord, &FemField),
{
    check_setup(ctx, config)?;
    check_field(ctx, &initial)?;
    let steps = stop.steps(config.tau);
    let center = centroid(&initial, &ctx.lumped, &ctx.mesh.vertices);

    let record_of = |k: usize, t: f64, f: &FemField| -> Result<DiagRecord, StepError> {
        let energy = match ctx.green.apply(f) {
            Ok((c, _)) => free_energy(f, &c, &ctx.lumped).unwrap_or(f64::NAN),
            Err(AssemblyError::Solve(e)) => return Err(StepError::Solve(e)),
            Err(e) => return Err(StepError::Assembly(e)),
        };
        Ok(DiagRecord {
            k,
            t,
            mass: mass(f, &ctx.lumped),
            second_moment: second_moment(f, &ctx.lumped, &ctx.mesh.vertices, center),
            linf: f.linf(),
            min: f.min(),
            energy,
        })
    };

    let mut records = Vec::with_capacity(steps + 1);
    let first = record_of(0, 0.0, &initial)?;
    on_step(&first, &initial);
    records.push(first);

    let mut state = TimeState::new(initial);
    let mut picard_failures = 0;
    let mut max_picard_iters = 0;
    for _ in 0..steps {
        let report = advance(ctx, &mut state, config)?;
        if !report.converged {
            picard_failures += 1;
        }
        max_picard_iters = max_picard_iters.max(report.picard_iters);
        let rec = record_of(state.k, state.t, state.current())?;
        on_step(&rec, state.current());
        records.push(rec);
    }

    Ok(RunSummary {
        final_field: state.history.swap_remove(0),
        records,
        steps,
        picard_failures,
        max_picard_iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{gaussian_init, GaussianBump};
    use crate::mesh::{build_uniform, Rect};
    use std::f64::consts::PI;

    fn small_ctx(a: usize) -> FemContext {
        let mesh = build_uniform(Rect::unit(), a).unwrap();
        FemContext::new(mesh, 1.0, 1e-12).unwrap()
    }

    fn config(kind: SchemeKind) -> SchemeConfig {
        SchemeConfig {
            kind,
            tau: 1e-4,
            eps: 1e-10,
            m_max: 20,
            solver_tol: 1e-12,
            alpha: 1.0,
        }
    }

    fn bumps_field(ctx: &FemContext) -> FemField {
        gaussian_init(
            &ctx.mesh,
            &[GaussianBump {
                x0: 0.5,
                y0: 0.5,
                mass: 4.0 * PI,
                theta: 0.02,
            }],
        )
    }

    #[test]
    fn constants_are_fixed_points() {
        let ctx = small_ctx(6);
        let c = 3.75;
        let initial = FemField::constant(ctx.n(), c);
        for kind in [
            SchemeKind::Euler,
            SchemeKind::Bdf2,
            SchemeKind::Bdf3,
            SchemeKind::Midpoint,
            SchemeKind::Trapezoid,
        ] {
            let cfg = config(kind.clone());
            let mut state = TimeState::new(initial.clone());
            for _ in 0..4 {
                let report = advance(&ctx, &mut state, &cfg).unwrap();
                assert!(report.converged);
                if !matches!(kind, SchemeKind::Euler) {
                    assert_eq!(report.picard_iters, 1, "{}", kind.name());
                }
            }
            let drift = state.current().linf_diff(&initial);
            assert!(drift < 1e-9, "{}: drift {drift}", kind.name());
        }
    }

    #[test]
    fn mass_conserved_per_step() {
        let ctx = small_ctx(12);
        let initial = bumps_field(&ctx);
        let m0 = mass(&initial, &ctx.lumped);
        for kind in [
            SchemeKind::Euler,
            SchemeKind::Bdf2,
            SchemeKind::Bdf3,
            SchemeKind::Midpoint,
            SchemeKind::Trapezoid,
        ] {
            let cfg = SchemeConfig {
                tau: 5e-5,
                ..config(kind.clone())
            };
            let mut state = TimeState::new(initial.clone());
            let mut prev_mass = m0;
            for _ in 0..10 {
                let report = advance(&ctx, &mut state, &cfg).unwrap();
                let drift = (report.mass_after - prev_mass).abs() / m0;
                assert!(drift < 1e-10, "{}: relative drift {drift}", kind.name());
                prev_mass = report.mass_after;
            }
        }
    }

    #[test]
    fn euler_preserves_positivity() {
        let ctx = small_ctx(16);
        let initial = bumps_field(&ctx);
        let cfg = SchemeConfig {
            tau: 5e-5,
            solver_tol: 1e-13,
            ..config(SchemeKind::Euler)
        };
        let mut state = TimeState::new(initial);
        for _ in 0..50 {
            let report = advance(&ctx, &mut state, &cfg).unwrap();
            assert!(
                report.min_value >= -1e-12 * report.linf,
                "min {} vs linf {}",
                report.min_value,
                report.linf
            );
        }
    }

    #[test]
    fn bdf2_requires_history() {
        let ctx = small_ctx(4);
        let state = TimeState::new(FemField::constant(ctx.n(), 1.0));
        assert!(matches!(
            step_bdf2(&ctx, &state, &config(SchemeKind::Bdf2)),
            Err(StepError::History { need: 2, got: 1 })
        ));
    }

    #[test]
    fn mismatched_alpha_is_rejected() {
        let ctx = small_ctx(4);
        let cfg = SchemeConfig {
            alpha: 2.0,
            ..config(SchemeKind::Euler)
        };
        let state = TimeState::new(FemField::constant(ctx.n(), 1.0));
        assert!(matches!(
            step_euler(&ctx, &state, &cfg),
            Err(StepError::Config(_))
        ));
    }

    #[test]
    fn runge_kutta_stepping_unsupported() {
        let ctx = small_ctx(4);
        let rk = SchemeKind::runge_kutta(vec![1.0], vec![vec![0.5]]).unwrap();
        let mut state = TimeState::new(FemField::constant(ctx.n(), 1.0));
        assert!(matches!(
            advance(&ctx, &mut state, &config(rk)),
            Err(StepError::UnsupportedScheme(_))
        ));
    }

    #[test]
    fn zero_steps_returns_initial_diagnostics() {
        let ctx = small_ctx(6);
        let initial = bumps_field(&ctx);
        let summary = run(
            &ctx,
            &config(SchemeKind::Euler),
            initial.clone(),
            StopRule::MaxSteps(0),
            |_, _| {},
        )
        .unwrap();
        assert_eq!(summary.records.len(), 1);
        assert_eq!(summary.records[0].k, 0);
        assert_eq!(summary.final_field, initial);
    }

    #[test]
    fn runs_are_deterministic() {
        let ctx = small_ctx(8);
        let initial = bumps_field(&ctx);
        let cfg = SchemeConfig {
            tau: 1e-4,
            ..config(SchemeKind::Bdf2)
        };
        let one = run(
            &ctx,
            &cfg,
            initial.clone(),
            StopRule::MaxSteps(8),
            |_, _| {},
        )
        .unwrap();
        let two = run(&ctx, &cfg, initial, StopRule::MaxSteps(8), |_, _| {}).unwrap();
        assert_eq!(one.final_field, two.final_field);
        for (a, b) in one.records.iter().zip(&two.records) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn end_time_stop_rounds_steps() {
        assert_eq!(StopRule::EndTime(0.01).steps(1e-4), 100);
        assert_eq!(StopRule::MaxSteps(7).steps(1e-4), 7);
    }

    /// Halving tau roughly quarters the endpoint error of the second-order
    /// schemes (Richardson-style ratio against a fine reference).
    #[test]
    fn second_order_tau_ratio() {
        let ctx = small_ctx(8);
        let initial = bumps_field(&ctx);
        let t_end = 4e-3;
        for kind in [
            SchemeKind::Midpoint,
            SchemeKind::Trapezoid,
            SchemeKind::Bdf2,
        ] {
            let solve = |tau: f64| {
                let cfg = SchemeConfig {
                    tau,
                    eps: 1e-12,
                    m_max: 40,
                    solver_tol: 1e-13,
                    alpha: 1.0,
                    kind: kind.clone(),
                };
                let steps = (t_end / tau).round() as usize;
                run(
                    &ctx,
                    &cfg,
                    initial.clone(),
                    StopRule::MaxSteps(steps),
                    |_, _| {},
                )
                .unwrap()
                .final_field
            };
            let reference = solve(t_end / 64.0);
            let coarse = solve(t_end / 4.0).linf_diff(&reference);
            let fine = solve(t_end / 8.0).linf_diff(&reference);
            let ratio = coarse / fine;
            assert!(
                (2.5..8.0).contains(&ratio),
                "{}: ratio {ratio} (coarse {coarse:.3e}, fine {fine:.3e})",
                kind.name()
            );
        }
    }

    /// BDF-3 on a nearly drift-free field (tiny amplitude, essentially the
    /// heat part alone) shows third-order endpoint errors once the startup
    /// is seeded exactly: halving tau divides the error by ~8. The exact
    /// startup fields come from a fine-step reference run, which also
    /// provides the endpoint to compare against.
    #[test]
    fn bdf3_third_order_on_smooth_data() {
        let ctx = small_ctx(8);
        let amp = 1e-3;
        let values: Vec<f64> = ctx
            .mesh
            .vertices
            .iter()
            .map(|p| amp * (1.0 + 0.5 * (PI * p[0]).cos() * (PI * p[1]).cos()))
            .collect();
        let initial = FemField::from(values);
        let t_end = 0.02;
        let fine_steps = 2048usize;
        let tau_f = t_end / fine_steps as f64;
        let cfg_of = |tau: f64| SchemeConfig {
            tau,
            eps: 1e-14,
            m_max: 60,
            solver_tol: 1e-13,
            alpha: 1.0,
            kind: SchemeKind::Bdf3,
        };
        let mut snaps: std::collections::BTreeMap<usize, FemField> = Default::default();
        let reference = run(
            &ctx,
            &cfg_of(tau_f),
            initial.clone(),
            StopRule::MaxSteps(fine_steps),
            |rec, f| {
                if [128usize, 256, 512].contains(&rec.k) {
                    snaps.insert(rec.k, f.clone());
                }
            },
        )
        .unwrap()
        .final_field;

        let solve_seeded = |tau: f64| {
            let cfg = cfg_of(tau);
            let per = (tau / tau_f).round() as usize;
            let mut state = TimeState {
                history: vec![
                    snaps[&(2 * per)].clone(),
                    snaps[&per].clone(),
                    initial.clone(),
                ],
                k: 2,
                t: 2.0 * tau,
            };
            let total = (t_end / tau).round() as usize;
            for _ in 2..total {
                advance(&ctx, &mut state, &cfg).unwrap();
            }
            state.current().clone()
        };
        let coarse = solve_seeded(t_end / 8.0).linf_diff(&reference);
        let fine = solve_seeded(t_end / 16.0).linf_diff(&reference);
        let ratio = coarse / fine;
        assert!(
            (4.5..14.0).contains(&ratio),
            "ratio {ratio} (coarse {coarse:.3e}, fine {fine:.3e})"
        );
    }
}
