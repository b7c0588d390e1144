//! Newton/Bessel potential kernels.
//!
//! For `alpha > 0` the Bessel potential in two dimensions is
//!
//! ```text
//! B_alpha(x) = (4 pi)^{-1} int_0^inf t^{-1} exp(-alpha t - |x|^2/(4t)) dt,
//! ```
//!
//! and for `alpha = 0` the Newton potential `B_0(x) = -log|x| / (2 pi)`.
//! Convolving the cell density with `grad B_alpha` gives the chemotactic
//! drift field, and the gradient factorizes radially as
//!
//! ```text
//! grad B_alpha(z) = -(1/2pi) (z/|z|^2) g_alpha(|z|),
//! g_alpha(r) = int_0^inf exp(-s - alpha r^2/(4s)) ds.
//! ```
//!
//! Everything here is evaluated by adaptive quadrature of the defining
//! integrals; closed forms (`|B_alpha|_L1 = 1/alpha`,
//! `|grad B_alpha|_L1 = pi/(2 sqrt(alpha))`) are reserved for tests so the
//! quadrature path stays independently checkable.

use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("radius must be positive, got {0}")]
    NonpositiveRadius(f64),
    #[error("alpha must be positive for this operation, got {0}")]
    NonpositiveAlpha(f64),
    #[error("alpha must be nonnegative, got {0}")]
    NegativeAlpha(f64),
    #[error("kernel is singular at z = 0")]
    SingularPoint,
}

/// Parameters of the potential kernel: `alpha = 0` selects the Newton
/// potential branch, `alpha > 0` the Bessel potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub alpha: f64,
}

impl KernelParams {
    pub fn new(alpha: f64) -> Result<Self, KernelError> {
        if !(alpha >= 0.0) {
            return Err(KernelError::NegativeAlpha(alpha));
        }
        Ok(Self { alpha })
    }
}

/// Analytic constants of the kernel for a fixed `alpha > 0`, computed by
/// radial quadrature and one-dimensional maximization.
#[derive(Debug, Clone, Copy)]
pub struct KernelConstants {
    /// `|B_alpha|_{L1(R^2)}`; closed form `1/alpha`.
    pub l1_b: f64,
    /// `|grad B_alpha|_{L1(R^2)}`; closed form `pi / (2 sqrt(alpha))`.
    pub l1_grad_b: f64,
    /// Lipschitz constant of `1 - g_alpha`, `K = 2 pi sup_{|x|<1} |x| B_1(|x|)`.
    pub k: f64,
    /// `sup_{|x|<1} |x| B_1(|x|)`.
    pub sup_r_b1: f64,
}

/// Absolute tolerance for the kernel quadratures.
const QUAD_TOL: f64 = 1e-10;

/// Exponent margin used to truncate the substituted integrands; exp(-180)
/// underflows anything representable at the scales handled here.
const EXP_CUTOFF: f64 = 180.0;

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if !(b > a) {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 52)
}

/// `int_0^inf t^p exp(-c1 t - c2 / t) dt` for `c1, c2 > 0` and `p` in
/// {-1, 0}, via the substitution `t = e^u` which removes both endpoint
/// singularities. Split at the balance point `t* = sqrt(c2/c1)` where the
/// exponent peaks.
fn exp_pair_integral(p: f64, c1: f64, c2: f64, tol: f64) -> f64 {
    debug_assert!(c1 > 0.0 && c2 > 0.0);
    // Peak exponent value; if even the peak underflows the integral is zero
    // to double precision.
    if 2.0 * (c1 * c2).sqrt() > 700.0 {
        return 0.0;
    }
    let u_star = 0.5 * (c2 / c1).ln();
    // Truncate where the exponential part alone has dropped EXP_CUTOFF below
    // its peak; the linear (p+1)u term moves slowly by comparison.
    let u_lo = -(((-u_star).exp() + EXP_CUTOFF / c2).ln());
    let u_hi = (u_star.exp() + EXP_CUTOFF / c1).ln();
    let g = |u: f64| ((p + 1.0) * u - c1 * u.exp() - c2 * (-u).exp()).exp();
    // For exponentially small kernels the integrand scale drops with the
    // peak value; shrinking the absolute tolerance with it keeps the
    // relative accuracy of the result well past the nominal absolute
    // target. The floor bounds the refinement work in the far tails,
    // where only absolute accuracy is meaningful.
    let scale = ((p + 1.0) * u_star - 2.0 * (c1 * c2).sqrt()).exp();
    let tol_eff = tol * scale.clamp(1e-4, 1.0);
    adaptive_simpson(&g, u_lo, u_star, 0.5 * tol_eff)
        + adaptive_simpson(&g, u_star, u_hi, 0.5 * tol_eff)
}

/// Potential `B_alpha(x)` for `|x| = r`, by adaptive quadrature of the
/// integral definition (Newton branch `-log r / 2 pi` for `alpha = 0`).
pub fn bessel_potential(params: KernelParams, r: f64) -> Result<f64, KernelError> {
    if !(r > 0.0) {
        return Err(KernelError::NonpositiveRadius(r));
    }
    if params.alpha == 0.0 {
        return Ok(-r.ln() / (2.0 * PI));
    }
    Ok(exp_pair_integral(-1.0, params.alpha, r * r / 4.0, QUAD_TOL) / (4.0 * PI))
}

/// Radial drift factor `g_alpha(r) = int_0^inf exp(-s - alpha r^2/(4s)) ds`,
/// a value in (0, 1] that is nonincreasing in both `r` and `alpha`;
/// `g_0 = 1` identically.
pub fn g_alpha(params: KernelParams, r: f64) -> Result<f64, KernelError> {
    if !(r > 0.0) {
        return Err(KernelError::NonpositiveRadius(r));
    }
    if params.alpha == 0.0 {
        return Ok(1.0);
    }
    Ok(exp_pair_integral(0.0, 1.0, params.alpha * r * r / 4.0, QUAD_TOL).min(1.0))
}

/// Drift kernel `grad B_alpha(z) = -(1/2pi) (z/|z|^2) g_alpha(|z|)`.
pub fn grad_kernel(params: KernelParams, z: [f64; 2]) -> Result<[f64; 2], KernelError> {
    let r2 = z[0] * z[0] + z[1] * z[1];
    if r2 == 0.0 {
        return Err(KernelError::SingularPoint);
    }
    let r = r2.sqrt();
    let scale = -g_alpha(params, r)? / (2.0 * PI * r2);
    Ok([scale * z[0], scale * z[1]])
}

/// Golden-section search for the maximum of a unimodal function on [a, b];
/// returns (argmax, max).
fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    let inv_phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Kernel constants for `alpha > 0`: `L1` norms by radial quadrature of the
/// quadrature-evaluated kernels, `sup |x| B_1` by golden-section search on
/// (1e-4, 1).
pub fn kernel_constants(params: KernelParams) -> Result<KernelConstants, KernelError> {
    let alpha = params.alpha;
    if !(alpha > 0.0) {
        return Err(KernelError::NonpositiveAlpha(alpha));
    }
    let sqrt_a = alpha.sqrt();

    // |B_alpha|_L1 = int_0^inf 2 pi r B_alpha(r) dr. The integrand behaves
    // like -r log r near zero, which adaptive refinement handles; split at
    // the decay scale 1/sqrt(alpha).
    let b_radial = |r: f64| {
        if r == 0.0 {
            0.0
        } else {
            2.0 * PI * r * bessel_potential(params, r).expect("r > 0")
        }
    };
    let r_split = 1.0 / sqrt_a;
    let r_max = 60.0 / sqrt_a;
    let l1_b = adaptive_simpson(&b_radial, 0.0, r_split, 1e-9)
        + adaptive_simpson(&b_radial, r_split, r_max, 1e-9);

    // |grad B_alpha|_L1 = int_0^inf 2 pi r |grad B_alpha| dr
    //                   = int_0^inf g_alpha(r) dr.
    let g_radial = |r: f64| {
        if r == 0.0 {
            1.0
        } else {
            g_alpha(params, r).expect("r > 0")
        }
    };
    let l1_grad_b = adaptive_simpson(&g_radial, 0.0, r_split, 1e-9)
        + adaptive_simpson(&g_radial, r_split, r_max, 1e-9);

    // sup_{|x|<1} |x| B_1(|x|): unimodal in r (verified by sampling), found
    // by golden-section search.
    let one = KernelParams { alpha: 1.0 };
    let r_b1 = |r: f64| r * bessel_potential(one, r).expect("r > 0");
    let (_, sup_r_b1) = golden_max(&r_b1, 1e-4, 1.0, 1e-6);
    let k = 2.0 * PI * sup_r_b1;

    Ok(KernelConstants {
        l1_b,
        l1_grad_b,
        k,
        sup_r_b1,
    })
}

/// A weighted sample of a density: quadrature point, quadrature weight, and
/// density value at the point.
#[derive(Debug, Clone, Copy)]
pub struct PointMass {
    pub point: [f64; 2],
    pub weight: f64,
    pub value: f64,
}

/// Quadrature approximation of the drift field `(grad B_alpha * n)(x)` at
/// each target: `sum_j w_j n_j grad B_alpha(x - p_j)`. Self-interactions
/// closer than 1e-12 are skipped rather than regularized; this operation is
/// a diagnostic cross-check for the finite-element drift, not a solver.
pub fn convolve_grad(
    density: &[PointMass],
    targets: &[[f64; 2]],
    params: KernelParams,
) -> Vec<[f64; 2]> {
    targets
        .iter()
        .map(|&x| {
            let mut acc = [0.0, 0.0];
            for pm in density {
                let z = [x[0] - pm.point[0], x[1] - pm.point[1]];
                if (z[0] * z[0] + z[1] * z[1]).sqrt() < 1e-12 {
                    continue;
                }
                let g = grad_kernel(params, z).expect("nonzero separation");
                let c = pm.weight * pm.value;
                acc[0] += c * g[0];
                acc[1] += c * g[1];
            }
            acc
        })
        .collect()
}
