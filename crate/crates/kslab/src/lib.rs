//! Numerical laboratory for the two-dimensional parabolic-elliptic
//! Keller-Segel system
//!
//! ```text
//! dn/dt = div(grad n - n grad c),   -Lap c + alpha c = n
//! ```
//!
//! The crate has three layers:
//!
//! * [`kernels`] evaluates the Newton/Bessel potential `B_alpha`, its radial
//!   factor `g_alpha`, the drift kernel `grad B_alpha`, and the analytic
//!   constants attached to them (all by adaptive quadrature, no special
//!   function tables).
//! * [`virial`] computes blow-up time/index bounds (`T*`, `k_max`, `I*`,
//!   `tau*`) for supercritical mass `M > 8 pi` and runs the scheme-specific
//!   second-moment recursions exactly. These are the analytic oracles the
//!   simulator is compared against.
//! * [`mesh`], [`assembly`], [`integrators`], [`diagnostics`] implement a
//!   mass-conservative upwind finite-element simulator on a uniform
//!   triangulation (lumped mass, barycentric dual cells, discrete Green
//!   operator, semi-implicit Euler/BDF-2/BDF-3/midpoint/trapezoid stepping
//!   with Picard iteration on the frozen drift).
//!
//! [`config`] and [`output`] provide the experiment presets, the plain-text
//! config format, and CSV/SVG/grid-snapshot writers used by the `kslab`
//! command-line tool.

pub mod assembly;
pub mod config;
pub mod diagnostics;
pub mod integrators;
pub mod kernels;
pub mod mesh;
pub mod output;
pub mod solver;
pub mod virial;

pub use assembly::{FemField, LumpedMass, SparseOperator};
pub use config::{ExperimentConfig, GaussianBump};
pub use diagnostics::DiagRecord;
pub use integrators::{FemContext, SchemeConfig, StopRule};
pub use mesh::{Rect, StructuredTriMesh};
pub use virial::{BlowupBounds, ProblemData, SchemeKind};
