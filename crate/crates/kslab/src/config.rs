//! Experiment configuration: plain-text `key = value` files, the named
//! presets, and Gaussian initial data.
//!
//! The config format is line oriented; `#` starts a comment. Recognized
//! keys:
//!
//! ```text
//! domain        = x0 y0 x1 y1
//! a             = 64            # subdivisions per side
//! scheme        = bdf2          # euler|bdf2|bdf3|midpoint|trapezoid
//! tau           = 5e-5
//! eps           = 1e-4          # Picard Linf tolerance
//! m_max         = 10            # Picard iteration cap
//! alpha         = 1
//! solver_tol    = 1e-10
//! end_time      = 0.02          # exactly one of end_time / max_steps
//! max_steps     = 400
//! bump          = x0 y0 mass theta   # repeatable
//! diag_every    = 1             # CSV row cadence
//! snapshot_every = 100          # grid snapshot cadence (plus final step)
//! out_dir       = out
//! ```
//!
//! Unknown keys are rejected, parse errors carry line numbers, and
//! `parse_config(save_config(c))` is the identity.

use crate::assembly::FemField;
use crate::integrators::{SchemeConfig, StopRule};
use crate::mesh::{Rect, StructuredTriMesh};
use crate::virial::SchemeKind;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("{0}")]
    Invalid(String),
}

/// One shifted Gaussian `W(x, y) = mass/(2 pi theta) exp(-((x-x0)^2+(y-y0)^2)/(2 theta))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBump {
    pub x0: f64,
    pub y0: f64,
    pub mass: f64,
    pub theta: f64,
}

impl GaussianBump {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.x0;
        let dy = y - self.y0;
        self.mass / (2.0 * PI * self.theta) * (-(dx * dx + dy * dy) / (2.0 * self.theta)).exp()
    }
}

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub domain: Rect,
    /// Mesh subdivisions per side.
    pub a: usize,
    pub scheme: SchemeKind,
    pub tau: f64,
    pub eps: f64,
    pub m_max: usize,
    pub alpha: f64,
    pub solver_tol: f64,
    pub stop: StopRule,
    pub bumps: Vec<GaussianBump>,
    pub diag_every: usize,
    pub snapshot_every: usize,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn scheme_config(&self) -> SchemeConfig {
        SchemeConfig {
            kind: self.scheme.clone(),
            tau: self.tau,
            eps: self.eps,
            m_max: self.m_max,
            solver_tol: self.solver_tol,
            alpha: self.alpha,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.a == 0 {
            return Err(ConfigError::Invalid("a must be at least 1".into()));
        }
        if !(self.domain.width() > 0.0 && self.domain.height() > 0.0) {
            return Err(ConfigError::Invalid(
                "domain must have positive side lengths".into(),
            ));
        }
        for q in [self.tau, self.eps, self.alpha, self.solver_tol] {
            if !(q > 0.0) {
                return Err(ConfigError::Invalid(
                    "tau, eps, alpha and solver_tol must be positive".into(),
                ));
            }
        }
        if self.m_max == 0 || self.diag_every == 0 || self.snapshot_every == 0 {
            return Err(ConfigError::Invalid(
                "m_max, diag_every and snapshot_every must be at least 1".into(),
            ));
        }
        for b in &self.bumps {
            if !(b.mass > 0.0) || !(b.theta > 0.0) {
                return Err(ConfigError::Invalid(
                    "bump mass and theta must be positive".into(),
                ));
            }
            if !self.domain.contains(b.x0, b.y0) {
                return Err(ConfigError::Invalid(format!(
                    "bump center ({}, {}) lies outside the domain",
                    b.x0, b.y0
                )));
            }
        }
        if matches!(self.scheme, SchemeKind::RungeKutta { .. }) {
            return Err(ConfigError::Invalid(
                "the simulator supports euler|bdf2|bdf3|midpoint|trapezoid".into(),
            ));
        }
        Ok(())
    }
}

fn parse_scheme(s: &str) -> Option<SchemeKind> {
    match s {
        "euler" => Some(SchemeKind::Euler),
        "bdf2" => Some(SchemeKind::Bdf2),
        "bdf3" => Some(SchemeKind::Bdf3),
        "midpoint" => Some(SchemeKind::Midpoint),
        "trapezoid" => Some(SchemeKind::Trapezoid),
        _ => None,
    }
}

/// Parse a config from text. See the module docs for the schema.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut domain = None;
    let mut a = None;
    let mut scheme = None;
    let mut tau = None;
    let mut eps = 1e-4;
    let mut m_max = 10usize;
    let mut alpha = 1.0;
    let mut solver_tol = 1e-10;
    let mut end_time: Option<f64> = None;
    let mut max_steps: Option<usize> = None;
    let mut bumps = Vec::new();
    let mut diag_every = 1usize;
    let mut snapshot_every = 100usize;
    let mut out_dir = PathBuf::from("out");

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: line_no,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        let err = |msg: String| ConfigError::Parse { line: line_no, msg };
        let floats = |v: &str, n: usize| -> Result<Vec<f64>, ConfigError> {
            let parts: Vec<f64> = v
                .split_whitespace()
                .map(|p| p.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| err(format!("bad number in `{v}`: {e}")))?;
            if parts.len() != n {
                return Err(err(format!("expected {n} numbers, got {}", parts.len())));
            }
            Ok(parts)
        };
        match key {
            "domain" => {
                let f = floats(value, 4)?;
                domain = Some(Rect::new(f[0], f[1], f[2], f[3]));
            }
            "a" => {
                a = Some(
                    value
                        .parse()
                        .map_err(|e| err(format!("bad integer: {e}")))?,
                )
            }
            "scheme" => {
                scheme = Some(
                    parse_scheme(value).ok_or_else(|| err(format!("unknown scheme `{value}`")))?,
                )
            }
            "tau" => tau = Some(floats(value, 1)?[0]),
            "eps" => eps = floats(value, 1)?[0],
            "m_max" => {
                m_max = value
                    .parse()
                    .map_err(|e| err(format!("bad integer: {e}")))?
            }
            "alpha" => alpha = floats(value, 1)?[0],
            "solver_tol" => solver_tol = floats(value, 1)?[0],
            "end_time" => end_time = Some(floats(value, 1)?[0]),
            "max_steps" => {
                max_steps = Some(
                    value
                        .parse()
                        .map_err(|e| err(format!("bad integer: {e}")))?,
                )
            }
            "bump" => {
                let f = floats(value, 4)?;
                bumps.push(GaussianBump {
                    x0: f[0],
                    y0: f[1],
                    mass: f[2],
                    theta: f[3],
                });
            }
            "diag_every" => {
                diag_every = value
                    .parse()
                    .map_err(|e| err(format!("bad integer: {e}")))?
            }
            "snapshot_every" => {
                snapshot_every = value
                    .parse()
                    .map_err(|e| err(format!("bad integer: {e}")))?
            }
            "out_dir" => out_dir = PathBuf::from(value),
            other => return Err(err(format!("unknown key `{other}`"))),
        }
    }

    let stop = match (end_time, max_steps) {
        (Some(t), None) => StopRule::EndTime(t),
        (None, Some(n)) => StopRule::MaxSteps(n),
        (None, None) => return Err(ConfigError::MissingKey("end_time or max_steps")),
        (Some(_), Some(_)) => {
            return Err(ConfigError::Invalid(
                "give either end_time or max_steps, not both".into(),
            ))
        }
    };
    let cfg = ExperimentConfig {
        domain: domain.ok_or(ConfigError::MissingKey("domain"))?,
        a: a.ok_or(ConfigError::MissingKey("a"))?,
        scheme: scheme.ok_or(ConfigError::MissingKey("scheme"))?,
        tau: tau.ok_or(ConfigError::MissingKey("tau"))?,
        eps,
        m_max,
        alpha,
        solver_tol,
        stop,
        bumps,
        diag_every,
        snapshot_every,
        out_dir,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Load a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

/// Serialize a config in the canonical form accepted by [`parse_config`].
pub fn save_config(cfg: &ExperimentConfig) -> String {
    let mut s = String::new();
    let d = cfg.domain;
    writeln!(s, "domain = {} {} {} {}", d.x0, d.y0, d.x1, d.y1).unwrap();
    writeln!(s, "a = {}", cfg.a).unwrap();
    writeln!(s, "scheme = {}", cfg.scheme.name()).unwrap();
    writeln!(s, "tau = {}", cfg.tau).unwrap();
    writeln!(s, "eps = {}", cfg.eps).unwrap();
    writeln!(s, "m_max = {}", cfg.m_max).unwrap();
    writeln!(s, "alpha = {}", cfg.alpha).unwrap();
    writeln!(s, "solver_tol = {}", cfg.solver_tol).unwrap();
    match cfg.stop {
        StopRule::EndTime(t) => writeln!(s, "end_time = {t}").unwrap(),
        StopRule::MaxSteps(n) => writeln!(s, "max_steps = {n}").unwrap(),
    }
    for b in &cfg.bumps {
        writeln!(s, "bump = {} {} {} {}", b.x0, b.y0, b.mass, b.theta).unwrap();
    }
    writeln!(s, "diag_every = {}", cfg.diag_every).unwrap();
    writeln!(s, "snapshot_every = {}", cfg.snapshot_every).unwrap();
    writeln!(s, "out_dir = {}", cfg.out_dir.display()).unwrap();
    s
}

/// The four named experiment presets.
///
/// * `example1`: four mass-6pi Gaussians on the unit square (total 24pi),
///   BDF-2, a = 64, tau = 5e-5; interior aggregation and blow-up.
/// * `example2`: three unequal Gaussians (total 11pi); aggregation toward
///   the boundary.
/// * `convergence`: the `example1` data run to T = 0.01 for the temporal
///   order study.
/// * `blowup`: a single mass-30pi Gaussian at the center of (0,2)^2,
///   tau = 1e-5, where the k_max = 44 index bound applies.
pub fn presets() -> BTreeMap<&'static str, ExperimentConfig> {
    let theta = 1.0 / 500.0;
    let m6 = 6.0 * PI;
    let base = ExperimentConfig {
        domain: Rect::unit(),
        a: 64,
        scheme: SchemeKind::Bdf2,
        tau: 5e-5,
        eps: 1e-4,
        m_max: 10,
        alpha: 1.0,
        solver_tol: 1e-10,
        stop: StopRule::EndTime(0.02),
        bumps: vec![
            GaussianBump {
                x0: 0.33,
                y0: 0.33,
                mass: m6,
                theta,
            },
            GaussianBump {
                x0: 0.33,
                y0: 0.66,
                mass: m6,
                theta,
            },
            GaussianBump {
                x0: 0.66,
                y0: 0.33,
                mass: m6,
                theta,
            },
            GaussianBump {
                x0: 0.66,
                y0: 0.66,
                mass: m6,
                theta,
            },
        ],
        diag_every: 1,
        snapshot_every: 100,
        out_dir: PathBuf::from("out"),
    };

    let mut map = BTreeMap::new();
    map.insert("example1", base.clone());
    map.insert(
        "example2",
        ExperimentConfig {
            stop: StopRule::EndTime(0.1001),
            bumps: vec![
                GaussianBump {
                    x0: 0.33,
                    y0: 0.66,
                    mass: m6 / 3.0,
                    theta,
                },
                GaussianBump {
                    x0: 0.33,
                    y0: 0.33,
                    mass: m6 / 2.0,
                    theta,
                },
                GaussianBump {
                    x0: 0.66,
                    y0: 0.66,
                    mass: m6,
                    theta,
                },
            ],
            ..base.clone()
        },
    );
    map.insert(
        "convergence",
        ExperimentConfig {
            stop: StopRule::EndTime(0.01),
            ..base.clone()
        },
    );
    map.insert(
        "blowup",
        ExperimentConfig {
            domain: Rect::new(0.0, 0.0, 2.0, 2.0),
            a: 100,
            tau: 1e-5,
            stop: StopRule::MaxSteps(400),
            bumps: vec![GaussianBump {
                x0: 1.0,
                y0: 1.0,
                mass: 30.0 * PI,
                theta,
            }],
            ..base
        },
    );
    map
}

/// Nodal interpolation of a sum of Gaussian bumps.
pub fn gaussian_init(mesh: &StructuredTriMesh, bumps: &[GaussianBump]) -> FemField {
    let values: Vec<f64> = mesh
        .vertices
        .iter()
        .map(|p| bumps.iter().map(|b| b.eval(p[0], p[1])).sum())
        .collect();
    FemField::from(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::lumped_mass;
    use crate::diagnostics::mass;
    use crate::mesh::{build_uniform, dual_geometry};

    #[test]
    fn parse_minimal_config() {
        let text = "\
# a comment
domain = 0 0 1 1
a = 8
scheme = euler
tau = 1e-4
end_time = 0.01
bump = 0.5 0.5 3.0 0.002
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.a, 8);
        assert_eq!(cfg.scheme, SchemeKind::Euler);
        assert_eq!(cfg.stop, StopRule::EndTime(0.01));
        assert_eq!(cfg.bumps.len(), 1);
        assert_eq!(cfg.eps, 1e-4);
        assert_eq!(cfg.m_max, 10);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad_key = "domain = 0 0 1 1\nwhat = 3\n";
        match parse_config(bad_key) {
            Err(ConfigError::Parse { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("unknown key"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let bad_value = "a = not_a_number\n";
        match parse_config(bad_value) {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        let no_eq = "domain 0 0 1 1\n";
        assert!(matches!(
            parse_config(no_eq),
            Err(ConfigError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn missing_and_conflicting_keys() {
        assert!(matches!(
            parse_config("a = 4\nscheme = euler\ntau = 1e-4\nend_time = 1\n"),
            Err(ConfigError::MissingKey("domain"))
        ));
        let both =
            "domain = 0 0 1 1\na = 4\nscheme = euler\ntau = 1e-4\nend_time = 1\nmax_steps = 3\n";
        assert!(matches!(parse_config(both), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn rejects_bump_outside_domain() {
        let text = "domain = 0 0 1 1\na = 4\nscheme = euler\ntau = 1e-4\nend_time = 1\nbump = 2 2 1 0.01\n";
        assert!(matches!(parse_config(text), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn round_trip_identity() {
        for (_, cfg) in presets() {
            let text = save_config(&cfg);
            let back = parse_config(&text).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn preset_table_matches_experiment_values() {
        let p = presets();
        let e1 = &p["example1"];
        assert_eq!(e1.a, 64);
        assert_eq!(e1.tau, 5e-5);
        assert_eq!(e1.eps, 1e-4);
        assert_eq!(e1.m_max, 10);
        assert_eq!(e1.alpha, 1.0);
        assert_eq!(e1.bumps.len(), 4);
        let total1: f64 = e1.bumps.iter().map(|b| b.mass).sum();
        assert!((total1 - 24.0 * PI).abs() < 1e-12);
        assert!(e1.bumps.iter().all(|b| b.theta == 1.0 / 500.0));

        let e2 = &p["example2"];
        let total2: f64 = e2.bumps.iter().map(|b| b.mass).sum();
        assert!((total2 - 11.0 * PI).abs() < 1e-12);

        let bl = &p["blowup"];
        assert_eq!(bl.tau, 1e-5);
        assert_eq!(bl.domain, Rect::new(0.0, 0.0, 2.0, 2.0));
        assert!((bl.bumps[0].mass - 30.0 * PI).abs() < 1e-12);
        assert_eq!((bl.bumps[0].x0, bl.bumps[0].y0), (1.0, 1.0));

        let cv = &p["convergence"];
        assert_eq!(cv.stop, StopRule::EndTime(0.01));
        assert_eq!(cv.bumps, e1.bumps);
    }

    #[test]
    fn preset_initial_masses() {
        let p = presets();
        for (name, expect) in [("example1", 24.0 * PI), ("example2", 11.0 * PI)] {
            let cfg = &p[name];
            let mesh = build_uniform(cfg.domain, cfg.a).unwrap();
            let lm = lumped_mass(&dual_geometry(&mesh));
            let n = gaussian_init(&mesh, &cfg.bumps);
            let m = mass(&n, &lm);
            assert!(
                (m / expect - 1.0).abs() < 1e-6,
                "{name}: mass {m} vs {expect}"
            );
            assert!(n.values.iter().all(|&v| v >= 0.0));
        }
    }
}
