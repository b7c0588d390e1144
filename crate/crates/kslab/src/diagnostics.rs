//! Monitored quantities: mass, second moment, extrema, discrete free
//! energy, numerical blow-up detection, and the temporal convergence study.
//!
//! All integral quantities use the scheme's own lumped quadrature
//! `sum_i meas(D_i) (.)_i`, so mass conservation and the moment identities
//! are exact statements about the discrete solution rather than quadrature
//! approximations of continuous ones.

use crate::assembly::{FemField, LumpedMass};
use crate::integrators::{run, FemContext, SchemeConfig, StepError, StopRule};
use crate::virial::BlowupBounds;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("field has a negative value {value:.3e} at node {node}, below the clamp threshold {threshold:.3e}")]
    NegativeDensity {
        node: usize,
        value: f64,
        threshold: f64,
    },
    #[error("field has {got} values, expected {expected}")]
    FieldSize { got: usize, expected: usize },
    #[error("convergence study input: {0}")]
    StudyInput(String),
    #[error(transparent)]
    Step(#[from] StepError),
}

/// Per-step monitor row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagRecord {
    pub k: usize,
    pub t: f64,
    pub mass: f64,
    /// Second moment about the trajectory's reference point.
    pub second_moment: f64,
    pub linf: f64,
    pub min: f64,
    /// Discrete free energy; NaN when the field has negatives beyond the
    /// clamp threshold (possible for the higher-order schemes).
    pub energy: f64,
}

/// Lumped-quadrature mass `sum_i meas(D_i) n_i`.
pub fn mass(n: &FemField, lumped: &LumpedMass) -> f64 {
    lumped.diag.iter().zip(&n.values).map(|(m, v)| m * v).sum()
}

/// Mass centroid of a nonnegative field; falls back to the vertex average
/// when the field has no mass.
pub fn centroid(n: &FemField, lumped: &LumpedMass, vertices: &[[f64; 2]]) -> [f64; 2] {
    let m = mass(n, lumped);
    if m <= 0.0 {
        let k = vertices.len() as f64;
        let sx: f64 = vertices.iter().map(|p| p[0]).sum();
        let sy: f64 = vertices.iter().map(|p| p[1]).sum();
        return [sx / k, sy / k];
    }
    let mut cx = 0.0;
    let mut cy = 0.0;
    for ((mi, vi), p) in lumped.diag.iter().zip(&n.values).zip(vertices) {
        cx += mi * vi * p[0];
        cy += mi * vi * p[1];
    }
    [cx / m, cy / m]
}

/// Second moment `sum_i meas(D_i) n_i |P_i - center|^2`.
pub fn second_moment(
    n: &FemField,
    lumped: &LumpedMass,
    vertices: &[[f64; 2]],
    center: [f64; 2],
) -> f64 {
    lumped
        .diag
        .iter()
        .zip(n.values.iter().zip(vertices))
        .map(|(m, (v, p))| {
            let dx = p[0] - center[0];
            let dy = p[1] - center[1];
            m * v * (dx * dx + dy * dy)
        })
        .sum()
}

/// Discrete free energy `E = sum_i meas(D_i) (n_i (log n_i - 1) - c_i n_i / 2)`
/// with the convention `0 log 0 = 0`.
///
/// Tiny negative nodal values (at most `1e-12 |n|_inf` in magnitude, the
/// positivity slack of the Euler scheme) are clamped to zero; anything more
/// negative is an input error.
pub fn free_energy(
    n: &FemField,
    c: &FemField,
    lumped: &LumpedMass,
) -> Result<f64, DiagnosticsError> {
    if n.len() != c.len() || n.len() != lumped.diag.len() {
        return Err(DiagnosticsError::FieldSize {
            got: c.len(),
            expected: n.len(),
        });
    }
    let threshold = -1e-12 * n.linf().max(1.0);
    let mut e = 0.0;
    for (i, ((&m, &v), &ci)) in lumped.diag.iter().zip(&n.values).zip(&c.values).enumerate() {
        if v < threshold {
            return Err(DiagnosticsError::NegativeDensity {
                node: i,
                value: v,
                threshold,
            });
        }
        let x = v.max(0.0);
        let entropy = if x > 0.0 { x * (x.ln() - 1.0) } else { 0.0 };
        e += m * (entropy - 0.5 * ci * x);
    }
    Ok(e)
}

/// Report of the numerical blow-up plateau against the analytic index bound.
#[derive(Debug, Clone, Copy)]
pub struct PlateauReport {
    /// First step at which the Linf trace is flat over the trailing window.
    pub k_plateau: usize,
    /// Real-valued `k_max` bound the plateau is compared against.
    pub k_max: f64,
    /// `k_plateau / k_max`.
    pub ratio: f64,
}

/// Window length of the plateau heuristic.
const PLATEAU_WINDOW: usize = 5;
/// Relative flatness threshold of the plateau heuristic.
const PLATEAU_REL_CHANGE: f64 = 1e-3;

/// Detect the numerical blow-up plateau: the first step whose trailing
/// 5-step window of `|n|_inf` values varies by less than 0.1 percent
/// relative. Mass conservation on a fixed grid caps the nodal maximum, so
/// near blow-up the Linf trace saturates instead of diverging.
pub fn blowup_indicator(records: &[DiagRecord], bounds: &BlowupBounds) -> Option<PlateauReport> {
    let k_max = bounds.k_max?;
    if records.len() <= PLATEAU_WINDOW {
        return None;
    }
    for idx in PLATEAU_WINDOW..records.len() {
        let window = &records[idx - PLATEAU_WINDOW..=idx];
        let hi = window.iter().fold(f64::NEG_INFINITY, |m, r| m.max(r.linf));
        let lo = window.iter().fold(f64::INFINITY, |m, r| m.min(r.linf));
        if hi > 0.0 && (hi - lo) / hi < PLATEAU_REL_CHANGE {
            let k_plateau = records[idx].k;
            return Some(PlateauReport {
                k_plateau,
                k_max,
                ratio: k_plateau as f64 / k_max,
            });
        }
    }
    None
}

/// Discrete `L^p` distance between two nodal fields: lumped quadrature for
/// finite `p`, nodal maximum for `p = inf`.
pub fn lp_error(a: &FemField, b: &FemField, lumped: &LumpedMass, p: f64) -> f64 {
    if p.is_infinite() {
        return a.linf_diff(b);
    }
    let s: f64 = lumped
        .diag
        .iter()
        .zip(a.values.iter().zip(&b.values))
        .map(|(m, (x, y))| m * (x - y).abs().powf(p))
        .sum();
    s.powf(1.0 / p)
}

/// Temporal convergence study result: errors `e_p(tau)` against a
/// reference run and fitted orders (least-squares slope of
/// `log e_p` vs `log tau`).
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub taus: Vec<f64>,
    pub p_values: Vec<f64>,
    /// `errors[pi][ti]` is `e_{p_values[pi]}(taus[ti])`.
    pub errors: Vec<Vec<f64>>,
    pub orders: Vec<f64>,
}

/// Run the integrator for each step size and a reference step size, all
/// from the same initial field on the same mesh, and fit the temporal
/// order per norm.
pub fn convergence_study(
    ctx: &FemContext,
    base: &SchemeConfig,
    initial: &FemField,
    taus: &[f64],
    tau_ref: f64,
    t_end: f64,
    p_values: &[f64],
) -> Result<ConvergenceReport, DiagnosticsError> {
    if taus.is_empty() {
        return Err(DiagnosticsError::StudyInput(
            "need at least one step size".into(),
        ));
    }
    if taus.windows(2).any(|w| w[1] >= w[0]) || !(taus[taus.len() - 1] > 0.0) {
        return Err(DiagnosticsError::StudyInput(
            "step sizes must be positive and strictly decreasing".into(),
        ));
    }
    let tau_min = taus[taus.len() - 1];
    if !(tau_ref > 0.0) || tau_ref >= tau_min {
        return Err(DiagnosticsError::StudyInput(format!(
            "reference step {tau_ref} must be smaller than every study step"
        )));
    }
    let steps_of = |tau: f64| -> Result<usize, DiagnosticsError> {
        let real = t_end / tau;
        let steps = real.round();
        if (real - steps).abs() > 1e-8 * real.max(1.0) {
            return Err(DiagnosticsError::StudyInput(format!(
                "end time {t_end} is not divisible by step size {tau}"
            )));
        }
        Ok(steps as usize)
    };

    let solve_at = |tau: f64| -> Result<FemField, DiagnosticsError> {
        let steps = steps_of(tau)?;
        let cfg = SchemeConfig {
            tau,
            ..base.clone()
        };
        let summary = run(
            ctx,
            &cfg,
            initial.clone(),
            StopRule::MaxSteps(steps),
            |_, _| {},
        )?;
        Ok(summary.final_field)
    };

    let reference = solve_at(tau_ref)?;
    let mut errors = vec![Vec::with_capacity(taus.len()); p_values.len()];
    for &tau in taus {
        let f = solve_at(tau)?;
        for (pi, &p) in p_values.iter().enumerate() {
            errors[pi].push(lp_error(&f, &reference, &ctx.lumped, p));
        }
    }

    let log_taus: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let orders = errors
        .iter()
        .map(|errs| {
            let log_e: Vec<f64> = errs.iter().map(|e| e.max(f64::MIN_POSITIVE).ln()).collect();
            least_squares_slope(&log_taus, &log_e)
        })
        .collect();

    Ok(ConvergenceReport {
        taus: taus.to_vec(),
        p_values: p_values.to_vec(),
        errors,
        orders,
    })
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
