use clap::{Parser, Subcommand};
use kslab::assembly::FemField;
use kslab::config::{gaussian_init, load_config, presets, ConfigError, ExperimentConfig};
use kslab::diagnostics::{blowup_indicator, centroid, convergence_study, mass, second_moment};
use kslab::integrators::{run, FemContext, StepError, StopRule};
use kslab::kernels::{kernel_constants, KernelParams};
use kslab::mesh::build_uniform;
use kslab::output::{
    write_convergence_csv, write_mesh_dump, write_series, write_snapshot, write_svg_convergence,
    write_svg_series, OutputError,
};
use kslab::solver::SolveError;
use kslab::virial::{blowup_bounds, recurse_moment, ProblemData, SchemeKind, VirialError};
use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "kslab",
    about = "Keller-Segel chemotaxis laboratory: blow-up bounds, moment recursions, and an upwind finite-element simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a preset or a config file; writes CSV series,
    /// grid snapshots and an SVG plot into the output directory.
    Run {
        /// Preset name: example1, example2, convergence, blowup.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Path to a key = value config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the configured output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Also write a plain-text mesh dump.
        #[arg(long)]
        dump_mesh: bool,
    },
    /// Evaluate the blow-up bounds (gamma, beta, I*, tau*, T*, k_max) for
    /// given problem data; prints one CSV row.
    Bounds {
        #[arg(long)]
        mass: f64,
        /// Initial second moment I_0.
        #[arg(long)]
        second_moment: f64,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long)]
        tau: f64,
        /// euler|bdf2|bdf3|midpoint|trapezoid|rk (annotates the row).
        #[arg(long, default_value = "euler")]
        scheme: String,
        #[arg(long, default_value_t = 0.0)]
        norm_x: f64,
    },
    /// Iterate the scheme's second-moment recursion; prints the trace as CSV.
    Virial {
        #[arg(long, default_value = "euler")]
        scheme: String,
        #[arg(long)]
        mass: f64,
        #[arg(long)]
        second_moment: f64,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 1000)]
        max_steps: usize,
    },
    /// Compare quadrature-computed kernel constants against their closed
    /// forms for a list of alpha values; prints CSV.
    KernelCheck {
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0, 4.0])]
        alphas: Vec<f64>,
    },
    /// Temporal convergence study against a fine-step reference; writes a
    /// CSV table and an SVG log-log plot.
    Convergence {
        #[arg(long, conflicts_with = "config", default_value = "convergence")]
        preset: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = [4e-4, 2e-4, 1e-4])]
        taus: Vec<f64>,
        #[arg(long, default_value_t = 1e-6)]
        tau_ref: f64,
        /// End time of the comparison (defaults to the config's end time).
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Exit code 1: bad input. Exit code 2: solver failure.
enum CliError {
    Input(String),
    Solver(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<VirialError> for CliError {
    fn from(e: VirialError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<OutputError> for CliError {
    fn from(e: OutputError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl From<StepError> for CliError {
    fn from(e: StepError) -> Self {
        match e {
            StepError::Solve(s) => CliError::Solver(s.to_string()),
            StepError::Assembly(kslab::assembly::AssemblyError::Solve(s)) => {
                CliError::Solver(s.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<kslab::diagnostics::DiagnosticsError> for CliError {
    fn from(e: kslab::diagnostics::DiagnosticsError) -> Self {
        match e {
            kslab::diagnostics::DiagnosticsError::Step(s) => s.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

fn parse_scheme_flag(s: &str) -> Result<SchemeKind, CliError> {
    match s {
        "euler" => Ok(SchemeKind::Euler),
        "bdf2" => Ok(SchemeKind::Bdf2),
        "bdf3" => Ok(SchemeKind::Bdf3),
        "midpoint" => Ok(SchemeKind::Midpoint),
        "trapezoid" => Ok(SchemeKind::Trapezoid),
        // The implicit midpoint tableau stands in for a generic RK scheme.
        "rk" => Ok(SchemeKind::runge_kutta(vec![1.0], vec![vec![0.5]])?),
        other => Err(CliError::Input(format!("unknown scheme `{other}`"))),
    }
}

fn resolve_config(
    preset: Option<&str>,
    config: Option<&PathBuf>,
) -> Result<ExperimentConfig, CliError> {
    match (preset, config) {
        (Some(name), None) => presets().remove(name).ok_or_else(|| {
            CliError::Input(format!(
                "unknown preset `{name}`; available: example1, example2, convergence, blowup"
            ))
        }),
        (None, Some(path)) => Ok(load_config(path)?),
        _ => Err(CliError::Input(
            "give exactly one of --preset or --config".into(),
        )),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn cmd_run(
    preset: Option<String>,
    config: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    dump_mesh: bool,
) -> Result<(), CliError> {
    let mut cfg = resolve_config(preset.as_deref(), config.as_ref())?;
    if let Some(dir) = out_dir {
        cfg.out_dir = dir;
    }
    cfg.validate()?;

    let mesh = build_uniform(cfg.domain, cfg.a).map_err(|e| CliError::Input(e.to_string()))?;
    let ctx = FemContext::new(mesh, cfg.alpha, cfg.solver_tol.max(1e-12))
        .map_err(|e| CliError::Input(e.to_string()))?;
    let initial = gaussian_init(&ctx.mesh, &cfg.bumps);

    let m0 = mass(&initial, &ctx.lumped);
    let center = centroid(&initial, &ctx.lumped, &ctx.mesh.vertices);
    let i0 = second_moment(&initial, &ctx.lumped, &ctx.mesh.vertices, center);
    let bounds = if m0 > 0.0 {
        let data = ProblemData::new(m0, i0, cfg.alpha, m0.max(initial.linf()))?;
        Some(blowup_bounds(&data, cfg.tau)?)
    } else {
        None
    };

    let dir = cfg.out_dir.clone();
    let scheme_cfg = cfg.scheme_config();
    let steps_total = cfg.stop.steps(cfg.tau);
    let mut io_error: Option<OutputError> = None;
    let snapshot_every = cfg.snapshot_every;
    let summary = run(
        &ctx,
        &scheme_cfg,
        initial,
        cfg.stop,
        |rec, field: &FemField| {
            if io_error.is_none() && (rec.k % snapshot_every == 0 || rec.k == steps_total) {
                let path = dir.join(format!("snapshot_{:06}.txt", rec.k));
                if let Err(e) = write_snapshot(field, &ctx.mesh, &path) {
                    io_error = Some(e);
                }
            }
        },
    )?;
    if let Some(e) = io_error {
        return Err(e.into());
    }

    let rows: Vec<_> = summary
        .records
        .iter()
        .filter(|r| r.k % cfg.diag_every == 0 || r.k == steps_total)
        .cloned()
        .collect();
    write_series(&rows, &dir.join("series.csv"))?;
    let k_max_time = bounds.as_ref().and_then(|b| b.k_max).map(|k| k * cfg.tau);
    write_svg_series(&rows, k_max_time, &dir.join("series.svg"))?;
    if dump_mesh {
        write_mesh_dump(&ctx.mesh, &dir.join("mesh.txt"))?;
    }

    let last = summary.records.last().expect("at least the initial record");
    println!(
        "scheme={} steps={} mass0={:.6} massT={:.6} linfT={:.6} minT={:.3e} picard_failures={}",
        scheme_cfg.kind.name(),
        summary.steps,
        m0,
        last.mass,
        last.linf,
        last.min,
        summary.picard_failures
    );
    if let Some(b) = &bounds {
        if let (Some(k_max), Some(report)) = (b.k_max, blowup_indicator(&summary.records, b)) {
            println!(
                "k_max={:.2} plateau_step={} ratio={:.3}",
                k_max, report.k_plateau, report.ratio
            );
        }
    }
    println!("wrote {}", dir.join("series.csv").display());
    Ok(())
}

fn cmd_bounds(
    mass: f64,
    second_moment: f64,
    alpha: f64,
    tau: f64,
    scheme: String,
    norm_x: f64,
) -> Result<(), CliError> {
    let kind = parse_scheme_flag(&scheme)?;
    let data = ProblemData::new(mass, second_moment, alpha, norm_x)?;
    let b = blowup_bounds(&data, tau)?;
    println!("mass,second_moment,alpha,tau,scheme,gamma,beta,i_star,tau_star,t_star,k_max,k_max_floor,k_max_nearest,hypotheses_ok");
    println!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        mass,
        second_moment,
        alpha,
        tau,
        kind.name(),
        b.gamma,
        b.beta,
        opt(b.i_star),
        opt(b.tau_star),
        opt(b.t_star),
        opt(b.k_max),
        b.k_max_floor.map(|v| v.to_string()).unwrap_or_default(),
        b.k_max_nearest.map(|v| v.to_string()).unwrap_or_default(),
        b.hypotheses_ok
    );
    Ok(())
}

fn cmd_virial(
    scheme: String,
    mass: f64,
    second_moment: f64,
    alpha: f64,
    tau: f64,
    max_steps: usize,
) -> Result<(), CliError> {
    let kind = parse_scheme_flag(&scheme)?;
    let data = ProblemData::new(mass, second_moment, alpha, 0.0)?;
    let trace = recurse_moment(&kind, &data, tau, max_steps)?;
    println!("k,I");
    for (k, v) in trace.values.iter().enumerate() {
        println!("{k},{v}");
    }
    if let Some(k) = trace.first_negative {
        eprintln!("first_negative = {k}");
    }
    Ok(())
}

fn cmd_kernel_check(alphas: Vec<f64>) -> Result<(), CliError> {
    println!("alpha,l1_B,l1_B_closed,l1_gradB,l1_gradB_closed,sup_rB1,K");
    for alpha in alphas {
        let params = KernelParams::new(alpha).map_err(|e| CliError::Input(e.to_string()))?;
        let c = kernel_constants(params).map_err(|e| CliError::Input(e.to_string()))?;
        println!(
            "{},{},{},{},{},{},{}",
            alpha,
            c.l1_b,
            1.0 / alpha,
            c.l1_grad_b,
            PI / (2.0 * alpha.sqrt()),
            c.sup_r_b1,
            c.k
        );
    }
    Ok(())
}

fn cmd_convergence(
    preset: String,
    config: Option<PathBuf>,
    taus: Vec<f64>,
    tau_ref: f64,
    t_end: Option<f64>,
    out_dir: Option<PathBuf>,
) -> Result<(), CliError> {
    let mut cfg = if config.is_some() {
        resolve_config(None, config.as_ref())?
    } else {
        resolve_config(Some(&preset), None)?
    };
    if let Some(dir) = out_dir {
        cfg.out_dir = dir;
    }
    cfg.validate()?;
    let t_end = match (t_end, cfg.stop) {
        (Some(t), _) => t,
        (None, StopRule::EndTime(t)) => t,
        (None, StopRule::MaxSteps(n)) => n as f64 * cfg.tau,
    };

    let mesh = build_uniform(cfg.domain, cfg.a).map_err(|e| CliError::Input(e.to_string()))?;
    let ctx = FemContext::new(mesh, cfg.alpha, cfg.solver_tol.max(1e-12))
        .map_err(|e| CliError::Input(e.to_string()))?;
    let initial = gaussian_init(&ctx.mesh, &cfg.bumps);
    let ps = [1.0, 2.0, 4.0, f64::INFINITY];
    let report = convergence_study(
        &ctx,
        &cfg.scheme_config(),
        &initial,
        &taus,
        tau_ref,
        t_end,
        &ps,
    )?;

    write_convergence_csv(&report, &cfg.out_dir.join("convergence.csv"))?;
    write_svg_convergence(&report, &cfg.out_dir.join("convergence.svg"))?;
    for (pi, &p) in report.p_values.iter().enumerate() {
        let label = if p.is_infinite() {
            "inf".into()
        } else {
            format!("{p}")
        };
        println!("p={label} order={:.3}", report.orders[pi]);
    }
    println!("wrote {}", cfg.out_dir.join("convergence.csv").display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            preset,
            config,
            out_dir,
            dump_mesh,
        } => cmd_run(preset, config, out_dir, dump_mesh),
        Command::Bounds {
            mass,
            second_moment,
            alpha,
            tau,
            scheme,
            norm_x,
        } => cmd_bounds(mass, second_moment, alpha, tau, scheme, norm_x),
        Command::Virial {
            scheme,
            mass,
            second_moment,
            alpha,
            tau,
            max_steps,
        } => cmd_virial(scheme, mass, second_moment, alpha, tau, max_steps),
        Command::KernelCheck { alphas } => cmd_kernel_check(alphas),
        Command::Convergence {
            preset,
            config,
            taus,
            tau_ref,
            t_end,
            out_dir,
        } => cmd_convergence(preset, config, taus, tau_ref, t_end, out_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Solver(msg)) => {
            eprintln!("solver failure: {msg}");
            ExitCode::from(2)
        }
    }
}
