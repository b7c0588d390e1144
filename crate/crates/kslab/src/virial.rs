//! Second-moment (virial) recursions and blow-up bounds.
//!
//! For supercritical mass `M > 8 pi` the second moment
//! `I_k = int n_k |x|^2 dx` of a time-discrete solution obeys, per scheme,
//! an exact identity (`alpha = 0`) or a one-sided recursion (`alpha > 0`)
//! built from
//!
//! ```text
//! f(I) = beta sqrt(I) - gamma,
//! gamma = M (M - 8 pi) / (2 pi),   beta = sqrt(alpha) M^{3/2} / pi.
//! ```
//!
//! Since `I_k >= 0` for nonnegative densities, a forced sign change bounds
//! the number of steps a solution can exist: `k_max <= T*/tau`. This module
//! evaluates those bounds and iterates the worst-case envelopes (recursion
//! inequalities treated as equalities), providing the analytic oracle the
//! finite-element trajectories are checked against.

use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VirialError {
    #[error("invalid problem data: {0}")]
    InvalidData(String),
    #[error("time step must be positive, got {0}")]
    NonpositiveTau(f64),
    #[error("operation not applicable: {0}")]
    NotApplicable(String),
    #[error("input error: {0}")]
    Input(String),
}

/// Physical inputs feeding every analytic bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemData {
    /// Initial mass `M = int n_0 dx`.
    pub mass: f64,
    /// Initial second moment `I_0 = int n_0 |x|^2 dx`.
    pub second_moment: f64,
    /// Chemical degradation rate `alpha >= 0`.
    pub alpha: f64,
    /// `max(|n_0|_L1, |n_0|_Linf)`; only the existence step-size bounds use it.
    pub norm_x: f64,
}

impl ProblemData {
    pub fn new(
        mass: f64,
        second_moment: f64,
        alpha: f64,
        norm_x: f64,
    ) -> Result<Self, VirialError> {
        if !(mass > 0.0) {
            return Err(VirialError::InvalidData(format!(
                "mass must be positive, got {mass}"
            )));
        }
        if !(second_moment >= 0.0) {
            return Err(VirialError::InvalidData(format!(
                "second moment must be nonnegative, got {second_moment}"
            )));
        }
        if !(alpha >= 0.0) {
            return Err(VirialError::InvalidData(format!(
                "alpha must be nonnegative, got {alpha}"
            )));
        }
        if !(norm_x >= 0.0) {
            return Err(VirialError::InvalidData(format!(
                "norm_x must be nonnegative, got {norm_x}"
            )));
        }
        Ok(Self {
            mass,
            second_moment,
            alpha,
            norm_x,
        })
    }

    /// gamma = M (M - 8 pi) / (2 pi); positive exactly when M > 8 pi.
    pub fn gamma(&self) -> f64 {
        self.mass * (self.mass - 8.0 * PI) / (2.0 * PI)
    }

    /// beta = sqrt(alpha) M^{3/2} / pi.
    pub fn beta(&self) -> f64 {
        self.alpha.sqrt() * self.mass.powf(1.5) / PI
    }
}

/// Time discretization, shared by the exact recursions and the
/// finite-element stepper.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeKind {
    Euler,
    Bdf2,
    Bdf3,
    Midpoint,
    Trapezoid,
    /// Generic s-stage Runge-Kutta tableau; weights must be nonnegative and
    /// sum to one.
    RungeKutta {
        weights: Vec<f64>,
        matrix: Vec<Vec<f64>>,
    },
}

impl SchemeKind {
    pub fn runge_kutta(weights: Vec<f64>, matrix: Vec<Vec<f64>>) -> Result<Self, VirialError> {
        let s = weights.len();
        if s == 0 {
            return Err(VirialError::Input(
                "Runge-Kutta tableau needs at least one stage".into(),
            ));
        }
        if weights.iter().any(|&b| b < 0.0) {
            return Err(VirialError::Input(
                "Runge-Kutta weights must be nonnegative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(VirialError::Input(format!(
                "Runge-Kutta weights must sum to 1, got {sum}"
            )));
        }
        if matrix.len() != s || matrix.iter().any(|row| row.len() != s) {
            return Err(VirialError::Input(
                "Runge-Kutta matrix must be s x s".into(),
            ));
        }
        Ok(SchemeKind::RungeKutta { weights, matrix })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::Euler => "euler",
            SchemeKind::Bdf2 => "bdf2",
            SchemeKind::Bdf3 => "bdf3",
            SchemeKind::Midpoint => "midpoint",
            SchemeKind::Trapezoid => "trapezoid",
            SchemeKind::RungeKutta { .. } => "rk",
        }
    }
}

/// Blow-up bounds for given problem data and time step.
///
/// `t_star` and the `k_max` fields are absent when `M <= 8 pi` (no blow-up
/// guarantee) or when the bound denominator vanishes. For `alpha = 0`,
/// `i_star`/`tau_star` are absent and `T* = 2 pi I_0 / (M (M - 8 pi))`.
/// When `I_0 > I*` the denominator is negative; the formula values are
/// still reported (then negative and meaningless as bounds) with
/// `hypotheses_ok` cleared.
#[derive(Debug, Clone, PartialEq)]
pub struct BlowupBounds {
    pub gamma: f64,
    pub beta: f64,
    /// `I* = (M - 8 pi)^2 / (4 alpha M)` (alpha > 0 only).
    pub i_star: Option<f64>,
    /// `tau* = pi (M - 8 pi) / (2 alpha M^2)` (alpha > 0 only).
    pub tau_star: Option<f64>,
    /// Latest existence time `T*`.
    pub t_star: Option<f64>,
    /// Real-valued index bound `T*/tau`.
    pub k_max: Option<f64>,
    /// `floor(k_max)`.
    pub k_max_floor: Option<i64>,
    /// Nearest integer to `k_max`; reported alongside the floor because the
    /// rounding convention for the integer bound is not fixed.
    pub k_max_nearest: Option<i64>,
    /// For `alpha > 0`: whether `I_0 <= I*` and `tau < tau*` hold, i.e. the
    /// hypotheses under which the bound is proved. Bounds are still
    /// computed when this is false.
    pub hypotheses_ok: bool,
}

/// Evaluate the blow-up bounds `T* = 2 pi I_0 / (M (M - 8 pi - 2 sqrt(alpha M I_0)))`
/// (with the `alpha = 0` reduction) and `k_max = T*/tau`.
pub fn blowup_bounds(data: &ProblemData, tau: f64) -> Result<BlowupBounds, VirialError> {
    if !(tau > 0.0) {
        return Err(VirialError::NonpositiveTau(tau));
    }
    let m = data.mass;
    let i0 = data.second_moment;
    let gamma = data.gamma();
    let beta = data.beta();

    let (i_star, tau_star) = if data.alpha > 0.0 {
        (
            Some((m - 8.0 * PI).powi(2) / (4.0 * data.alpha * m)),
            Some(PI * (m - 8.0 * PI) / (2.0 * data.alpha * m * m)),
        )
    } else {
        (None, None)
    };

    let hypotheses_ok = if m <= 8.0 * PI {
        false
    } else if data.alpha > 0.0 {
        i0 <= i_star.unwrap() && tau < tau_star.unwrap()
    } else {
        true
    };

    // Denominator of T*: M - 8 pi - 2 sqrt(alpha M I_0) (second term vanishes
    // for alpha = 0). No finite bound for M <= 8 pi or a vanishing
    // denominator; a negative denominator (I_0 > I*) still yields the
    // formula value, flagged by hypotheses_ok.
    let denom = m - 8.0 * PI - 2.0 * (data.alpha * m * i0).sqrt();
    let t_star = if m > 8.0 * PI && denom != 0.0 {
        Some(2.0 * PI * i0 / (m * denom))
    } else {
        None
    };
    let k_max = t_star.map(|t| t / tau);

    Ok(BlowupBounds {
        gamma,
        beta,
        i_star,
        tau_star,
        t_star,
        k_max,
        k_max_floor: k_max.map(|k| k.floor() as i64),
        k_max_nearest: k_max.map(|k| k.round() as i64),
        hypotheses_ok,
    })
}

/// Step-size bound under which the scheme's fixed-point argument produces a
/// solution: `1 / ((pi + 1/2)^2 (|n|_X + 1)^4)` for the implicit Euler
/// scheme, and 3/2 of that for BDF-2 (whose caller passes
/// `|2 n_{k-1} - n_{k-2}/2|_X`).
pub fn existence_tau_bound(scheme: &SchemeKind, norm_x: f64) -> Result<f64, VirialError> {
    if !(norm_x >= 0.0) {
        return Err(VirialError::Input(format!(
            "norm_x must be nonnegative, got {norm_x}"
        )));
    }
    let base = 1.0 / ((PI + 0.5).powi(2) * (norm_x + 1.0).powi(4));
    match scheme {
        SchemeKind::Euler => Ok(base),
        SchemeKind::Bdf2 => Ok(1.5 * base),
        other => Err(VirialError::NotApplicable(format!(
            "existence step bound is only stated for euler and bdf2, not {}",
            other.name()
        ))),
    }
}

/// Second-moment trace `I_0, I_1, ...` of a moment recursion or a simulated
/// trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTrace {
    /// `values[k] = I_k`, starting from `I_0`.
    pub values: Vec<f64>,
    /// Smallest `k` with `I_k < 0`, if the trace changes sign.
    pub first_negative: Option<usize>,
}

impl MomentTrace {
    pub fn from_values(values: Vec<f64>) -> Self {
        let first_negative = values.iter().position(|&v| v < 0.0);
        Self {
            values,
            first_negative,
        }
    }
}

/// Solve `x^2 - a x - c = 0` for `x = sqrt(I_k) >= 0` on the branch that is
/// continuous in the step size. A negative discriminant means the recursion
/// admits no nonnegative moment; the constant term `c` (which is then
/// negative) is recorded as the moment and iteration stops.
fn envelope_step(a: f64, c: f64) -> f64 {
    let disc = a * a + 4.0 * c;
    if disc < 0.0 {
        c
    } else {
        let x = 0.5 * (a + disc.sqrt());
        x * x
    }
}

/// Run the scheme-specific second-moment recursion.
///
/// For `alpha = 0` every scheme (including generic Runge-Kutta with weights
/// summing to one, and the BDF schemes with their prescribed startups)
/// produces the same exact affine decrements `I_k - I_{k-1} = -tau gamma`.
/// For `alpha > 0` the one-sided recursion is treated as an equality and
/// solved for `I_k` each step (quadratic in `sqrt(I_k)`); supported schemes
/// are Euler, BDF-2, midpoint, and trapezoid.
pub fn recurse_moment(
    scheme: &SchemeKind,
    data: &ProblemData,
    tau: f64,
    max_steps: usize,
) -> Result<MomentTrace, VirialError> {
    if !(tau > 0.0) {
        return Err(VirialError::NonpositiveTau(tau));
    }
    let gamma = data.gamma();
    let beta = data.beta();
    let mut values = Vec::with_capacity(max_steps + 1);
    values.push(data.second_moment);

    if data.alpha == 0.0 {
        let dec = tau * gamma;
        for k in 1..=max_steps {
            let next = values[k - 1] - dec;
            values.push(next);
            if next < 0.0 {
                break;
            }
        }
        return Ok(MomentTrace::from_values(values));
    }

    match scheme {
        SchemeKind::Euler | SchemeKind::Bdf2 | SchemeKind::Midpoint | SchemeKind::Trapezoid => {}
        other => {
            return Err(VirialError::NotApplicable(format!(
                "no alpha > 0 moment recursion is available for {}",
                other.name()
            )))
        }
    }

    for k in 1..=max_steps {
        let prev = values[k - 1];
        // Coefficient a of sqrt(I_k) and constant term c, per scheme:
        //   Euler:     I_k - tau beta sqrt(I_k) = I_{k-1} - tau gamma
        //   BDF-2:     I_k - (2tau/3) beta sqrt(I_k)
        //                = I_{k-1} + (I_{k-1}-I_{k-2})/3 - (2tau/3) gamma
        //              (first step via Euler)
        //   Midpoint:  I_k - (tau/2) beta sqrt(I_k)
        //                = I_{k-1} - tau gamma + (tau/2) beta sqrt(I_{k-1})
        //   Trapezoid: I_k - (tau/4) beta sqrt(I_k)
        //                = I_{k-1} - tau gamma + (tau/4) beta sqrt(I_{k-1})
        let (a, c) = match scheme {
            SchemeKind::Euler => (tau * beta, prev - tau * gamma),
            SchemeKind::Bdf2 => {
                if k == 1 {
                    (tau * beta, prev - tau * gamma)
                } else {
                    let tau23 = 2.0 * tau / 3.0;
                    (
                        tau23 * beta,
                        prev + (prev - values[k - 2]) / 3.0 - tau23 * gamma,
                    )
                }
            }
            SchemeKind::Midpoint => {
                let q = 0.5 * tau * beta;
                (q, prev - tau * gamma + q * prev.max(0.0).sqrt())
            }
            SchemeKind::Trapezoid => {
                let q = 0.25 * tau * beta;
                (q, prev - tau * gamma + q * prev.max(0.0).sqrt())
            }
            _ => unreachable!(),
        };
        let next = envelope_step(a, c);
        values.push(next);
        if next < 0.0 {
            break;
        }
    }
    Ok(MomentTrace::from_values(values))
}

/// Residual report of [`check_discrete_virial`].
#[derive(Debug, Clone)]
pub struct VirialCheck {
    /// `residuals[k-1]` is the defect of the step `k` relation.
    pub residuals: Vec<f64>,
    /// Steps whose relation is violated beyond the tolerance.
    pub violations: Vec<usize>,
    pub pass: bool,
}

/// Check a second-moment trace against the scheme's moment relation: the
/// exact identity for `alpha = 0` (two-sided, `|residual| <= tol`) or the
/// one-sided recursion for `alpha > 0` (`residual <= tol`).
pub fn check_discrete_virial(
    trace: &MomentTrace,
    scheme: &SchemeKind,
    data: &ProblemData,
    tau: f64,
    tol: f64,
) -> Result<VirialCheck, VirialError> {
    if trace.values.len() < 2 {
        return Err(VirialError::Input(
            "trace needs at least I_0 and I_1 to check a step relation".into(),
        ));
    }
    if !(tau > 0.0) {
        return Err(VirialError::NonpositiveTau(tau));
    }
    let gamma = data.gamma();
    let beta = data.beta();
    let f = |i: f64| beta * i.max(0.0).sqrt() - gamma;
    let v = &trace.values;
    let mut residuals = Vec::with_capacity(v.len() - 1);
    let mut violations = Vec::new();

    for k in 1..v.len() {
        let d = v[k] - v[k - 1];
        let residual = if data.alpha == 0.0 {
            match scheme {
                SchemeKind::Bdf2 if k >= 2 => {
                    d - (v[k - 1] - v[k - 2]) / 3.0 + 2.0 / 3.0 * tau * gamma
                }
                SchemeKind::Bdf3 if k >= 3 => {
                    // 11/6 d_k - 7/6 d_{k-1} + 1/3 d_{k-2} = -tau gamma
                    11.0 / 6.0 * d - 7.0 / 6.0 * (v[k - 1] - v[k - 2])
                        + (v[k - 2] - v[k - 3]) / 3.0
                        + tau * gamma
                }
                _ => d + tau * gamma,
            }
        } else {
            match scheme {
                SchemeKind::Euler => d - tau * f(v[k]),
                SchemeKind::Bdf2 => {
                    if k >= 2 {
                        d - (v[k - 1] - v[k - 2]) / 3.0 - 2.0 / 3.0 * tau * f(v[k])
                    } else {
                        d - tau * f(v[k])
                    }
                }
                SchemeKind::Midpoint => d - 0.5 * tau * (f(v[k]) + f(v[k - 1])),
                SchemeKind::Trapezoid => {
                    d + tau * gamma
                        - 0.25 * tau * beta * (v[k].max(0.0).sqrt() + v[k - 1].max(0.0).sqrt())
                }
                other => {
                    return Err(VirialError::NotApplicable(format!(
                        "no alpha > 0 moment relation is available for {}",
                        other.name()
                    )))
                }
            }
        };
        let violated = if data.alpha == 0.0 {
            residual.abs() > tol
        } else {
            residual > tol
        };
        if violated {
            violations.push(k);
        }
        residuals.push(residual);
    }
    let pass = violations.is_empty();
    Ok(VirialCheck {
        residuals,
        violations,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(mass: f64, i0: f64, alpha: f64) -> ProblemData {
        ProblemData::new(mass, i0, alpha, 0.0).unwrap()
    }

    #[test]
    fn bounds_alpha_zero_headline() {
        let d = data(16.0 * PI, 1.0, 0.0);
        let b = blowup_bounds(&d, 1e-4).unwrap();
        assert!((b.gamma - 64.0 * PI).abs() < 1e-12);
        let k = b.k_max.unwrap();
        assert!((k - 49.73591971621729).abs() < 1e-9, "k_max = {k}");
        assert_eq!(b.k_max_floor, Some(49));
        assert!(b.i_star.is_none() && b.tau_star.is_none());
        assert!(b.hypotheses_ok);
    }

    #[test]
    fn bounds_alpha_positive_headline() {
        let d = data(30.0 * PI, 0.12 * PI, 1.0);
        let b = blowup_bounds(&d, 1e-5).unwrap();
        assert!((b.i_star.unwrap() - 12.671090369478833).abs() < 1e-10);
        assert!((b.tau_star.unwrap() - 22.0 / 1800.0).abs() < 1e-15);
        let k = b.k_max.unwrap();
        assert!((k - 43.94332741431355).abs() < 1e-9, "k_max = {k}");
        assert_eq!(b.k_max_nearest, Some(44));
        assert!(b.hypotheses_ok);
    }

    #[test]
    fn bounds_critical_mass_has_no_finite_bound() {
        let d = data(8.0 * PI, 1.0, 0.0);
        let b = blowup_bounds(&d, 1e-4).unwrap();
        assert!(b.t_star.is_none() && b.k_max.is_none());
        assert!(!b.hypotheses_ok);
        assert!(b.gamma.abs() < 1e-12);
    }

    #[test]
    fn bounds_flag_violated_hypotheses() {
        // I_0 far above I*: bound formula still evaluated, flag cleared.
        let d = data(30.0 * PI, 100.0, 1.0);
        let b = blowup_bounds(&d, 1e-5).unwrap();
        assert!(!b.hypotheses_ok);
        // I_0 > I*: the formula is still evaluated; the negative value is
        // meaningless as a bound, which is what the flag records.
        assert!(b.t_star.unwrap() < 0.0);
        // tau >= tau* clears the flag too.
        let d2 = data(30.0 * PI, 0.12 * PI, 1.0);
        let b2 = blowup_bounds(&d2, 1.0).unwrap();
        assert!(!b2.hypotheses_ok && b2.k_max.is_some());
    }

    #[test]
    fn k_max_scale_consistency() {
        let d = data(30.0 * PI, 0.12 * PI, 1.0);
        let tau = 1.3e-5;
        let k1 = blowup_bounds(&d, tau).unwrap().k_max.unwrap();
        let k2 = blowup_bounds(&d, 2.0 * tau).unwrap().k_max.unwrap();
        assert_eq!(k1 / 2.0, k2);
    }

    #[test]
    fn existence_bounds() {
        let e0 = existence_tau_bound(&SchemeKind::Euler, 0.0).unwrap();
        assert!((e0 - 0.07540797379578601).abs() < 1e-15);
        let e1 = existence_tau_bound(&SchemeKind::Euler, 1.0).unwrap();
        assert!((e1 - 0.004712998362236625).abs() < 1e-15);
        let b0 = existence_tau_bound(&SchemeKind::Bdf2, 0.0).unwrap();
        assert!((b0 - 1.5 * e0).abs() < 1e-16);
        assert!(matches!(
            existence_tau_bound(&SchemeKind::Midpoint, 0.0),
            Err(VirialError::NotApplicable(_))
        ));
    }

    #[test]
    fn affine_trace_alpha_zero() {
        let d = data(16.0 * PI, 1.0, 0.0);
        let tau = 1e-4;
        let schemes = [
            SchemeKind::Euler,
            SchemeKind::Bdf2,
            SchemeKind::Bdf3,
            SchemeKind::runge_kutta(vec![0.5, 0.5], vec![vec![0.5, 0.0], vec![0.5, 0.5]]).unwrap(),
        ];
        for s in &schemes {
            let tr = recurse_moment(s, &d, tau, 200).unwrap();
            assert_eq!(tr.first_negative, Some(50), "{}", s.name());
            let dec = tau * d.gamma();
            for k in 1..tr.values.len() {
                // Iterated subtraction makes the decrement machine-exact.
                assert_eq!(tr.values[k], tr.values[k - 1] - dec, "{} k={k}", s.name());
            }
            assert!((tr.values[49] - 0.014797).abs() < 1e-5);
            assert!(tr.values[50] < 0.0);
        }
    }

    #[test]
    fn closed_form_matches_iteration() {
        let d = data(16.0 * PI, 1.0, 0.0);
        let tau = 1e-4;
        let tr = recurse_moment(&SchemeKind::Euler, &d, tau, 60).unwrap();
        for (k, &v) in tr.values.iter().enumerate() {
            let closed = d.second_moment - k as f64 * tau * d.gamma();
            assert!((v - closed).abs() <= 1e-12 * (1.0 + closed.abs()));
        }
    }

    #[test]
    fn fixed_point_at_i_star() {
        let d0 = data(30.0 * PI, 0.0, 1.0);
        let b = blowup_bounds(&d0, 1e-4).unwrap();
        let d = data(30.0 * PI, b.i_star.unwrap(), 1.0);
        let tr = recurse_moment(&SchemeKind::Euler, &d, 1e-4, 50).unwrap();
        for &v in &tr.values {
            assert!((v - d.second_moment).abs() < 1e-10 * d.second_moment);
        }
        assert_eq!(tr.first_negative, None);
    }

    #[test]
    fn euler_envelope_monotone_under_hypotheses() {
        let d = data(30.0 * PI, 0.12 * PI, 1.0);
        let tau = 1e-5;
        let b = blowup_bounds(&d, tau).unwrap();
        assert!(b.hypotheses_ok);
        let tr = recurse_moment(&SchemeKind::Euler, &d, tau, 200).unwrap();
        let f = |i: f64| d.beta() * i.max(0.0).sqrt() - d.gamma();
        for k in 1..tr.values.len() {
            assert!(tr.values[k] <= tr.values[k - 1] + 1e-14);
            if tr.values[k] >= 0.0 {
                assert!(f(tr.values[k]) <= 1e-12);
            }
        }
        let fneg = tr
            .first_negative
            .expect("envelope must reach a sign change");
        assert!((fneg as i64) <= b.k_max_floor.unwrap() + 1, "fneg = {fneg}");
    }

    #[test]
    fn envelopes_blow_up_for_all_supported_schemes() {
        let d = data(30.0 * PI, 0.12 * PI, 1.0);
        let tau = 1e-5;
        let kmax = blowup_bounds(&d, tau).unwrap().k_max_floor.unwrap();
        for s in [
            SchemeKind::Euler,
            SchemeKind::Bdf2,
            SchemeKind::Midpoint,
            SchemeKind::Trapezoid,
        ] {
            let tr = recurse_moment(&s, &d, tau, 400).unwrap();
            let fneg = tr
                .first_negative
                .unwrap_or_else(|| panic!("{} stalled", s.name()));
            assert!(
                (fneg as i64) <= kmax + 1,
                "{}: first_negative {} exceeds floor(k_max)+1 = {}",
                s.name(),
                fneg,
                kmax + 1
            );
        }
    }

    #[test]
    fn rk_envelope_not_applicable_for_positive_alpha() {
        let d = data(30.0 * PI, 0.12 * PI, 1.0);
        let rk = SchemeKind::runge_kutta(vec![1.0], vec![vec![0.5]]).unwrap();
        assert!(matches!(
            recurse_moment(&rk, &d, 1e-5, 10),
            Err(VirialError::NotApplicable(_))
        ));
        assert!(matches!(
            recurse_moment(&SchemeKind::Bdf3, &d, 1e-5, 10),
            Err(VirialError::NotApplicable(_))
        ));
    }

    #[test]
    fn virial_check_flags_perturbation() {
        let d = data(16.0 * PI, 1.0, 0.0);
        let tau = 1e-4;
        let tr = recurse_moment(&SchemeKind::Euler, &d, tau, 40).unwrap();
        let ok = check_discrete_virial(&tr, &SchemeKind::Euler, &d, tau, 1e-12).unwrap();
        assert!(ok.pass);
        assert!(ok.residuals.iter().all(|r| r.abs() <= 1e-12));

        let mut perturbed = tr.values.clone();
        perturbed[20] += 1.0;
        let bad = check_discrete_virial(
            &MomentTrace::from_values(perturbed),
            &SchemeKind::Euler,
            &d,
            tau,
            1e-12,
        )
        .unwrap();
        assert!(!bad.pass);
        assert!(bad.violations.contains(&20));
    }

    #[test]
    fn virial_check_needs_two_entries() {
        let d = data(16.0 * PI, 1.0, 0.0);
        let tr = MomentTrace::from_values(vec![1.0]);
        assert!(matches!(
            check_discrete_virial(&tr, &SchemeKind::Euler, &d, 1e-4, 1e-12),
            Err(VirialError::Input(_))
        ));
    }

    #[test]
    fn rk_tableau_validation() {
        assert!(SchemeKind::runge_kutta(vec![0.6, 0.6], vec![vec![0.0; 2]; 2]).is_err());
        assert!(SchemeKind::runge_kutta(vec![-0.5, 1.5], vec![vec![0.0; 2]; 2]).is_err());
        assert!(SchemeKind::runge_kutta(vec![1.0], vec![]).is_err());
    }
}
