//! Command-line front end: mesh generation, geometry validation,
//! simulation, spectral probes and decay fitting, driven by a flat
//! `key = value` config file with per-flag overrides.

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use std::process::ExitCode;
use waveplate::config::{load_config, RunConfig};
use waveplate::dynamics::{default_dt, run as integrate, EnergyTrace};
use waveplate::error::Error;
use waveplate::geometry::geometry_report;
use waveplate::mesh::{format_mesh, BoundaryTag};
use waveplate::spectral::{
    bt_exponent_fit, default_sweep_betas, eig_odelta_r, eigs_csv, linear_trend, resolved_pairs,
    resolvent_sweep, sweep_csv, witness, witness_csv,
};
use waveplate::system::{build_generator, GeneratorSystem};
use waveplate::{analysis, Result};

#[derive(Parser)]
#[command(
    name = "waveplate",
    version,
    about = "Wave/Kirchhoff-plate transmission system: simulation and spectral analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration file (flat `key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override a config key, e.g. --set mesh.n=16 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured mesh and write it in the text mesh format.
    MeshGen {
        #[command(flatten)]
        common: Common,
    },
    /// Validate the geometric hypotheses; exits 1 when any check fails.
    CheckGeometry {
        #[command(flatten)]
        common: Common,
        /// Skip the trace-constant surrogate (saves an eigensolve).
        #[arg(long)]
        no_surrogate: bool,
    },
    /// Integrate the damped system from seeded random initial data.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Run the geometry validator first and refuse to simulate on
        /// violated hypotheses.
        #[arg(long)]
        strict: bool,
    },
    /// Smallest eigenfrequencies of the auxiliary coupled operator.
    Eigs {
        #[command(flatten)]
        common: Common,
    },
    /// Resolvent norms along the imaginary axis over the resolved range.
    ResolventSweep {
        #[command(flatten)]
        common: Common,
    },
    /// Witness-sequence norms certifying resolvent growth.
    Witness {
        #[command(flatten)]
        common: Common,
    },
    /// Fit decay laws to an energy trace.
    DecayFit {
        #[command(flatten)]
        common: Common,
        /// Trace CSV (defaults to <output_dir>/energy.csv).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Graph norm of the initial state (defaults to the value recorded
        /// in <output_dir>/run.json).
        #[arg(long)]
        da_norm: Option<f64>,
        /// Window start (defaults to T/4).
        #[arg(long)]
        window_start: Option<f64>,
        /// Window end (defaults to the last sample).
        #[arg(long)]
        window_end: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Builds the config from file + overrides; failures here are usage errors
/// (exit 2).
fn resolve_config(common: &Common) -> std::result::Result<RunConfig, ExitCode> {
    let mut cfg = match &common.config {
        Some(path) => match load_config(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return Err(ExitCode::from(2));
            }
        },
        None => RunConfig::default(),
    };
    for assignment in &common.set {
        let Some((k, v)) = assignment.split_once('=') else {
            eprintln!("error: --set expects KEY=VALUE, found `{assignment}`");
            return Err(ExitCode::from(2));
        };
        if let Err(e) = cfg.set(k.trim(), v.trim()) {
            eprintln!("error: {e}");
            return Err(ExitCode::from(2));
        }
    }
    if let Some(dir) = &common.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return Err(ExitCode::from(2));
    }
    Ok(cfg)
}

macro_rules! config_or_exit {
    ($common:expr) => {
        match resolve_config(&$common) {
            Ok(c) => c,
            Err(code) => return Ok(code),
        }
    };
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::MeshGen { common } => cmd_mesh_gen(&config_or_exit!(common)),
        Command::CheckGeometry { common, no_surrogate } => {
            cmd_check_geometry(&config_or_exit!(common), !no_surrogate)
        }
        Command::Simulate { common, strict } => cmd_simulate(&config_or_exit!(common), strict),
        Command::Eigs { common } => cmd_eigs(&config_or_exit!(common)),
        Command::ResolventSweep { common } => cmd_sweep(&config_or_exit!(common)),
        Command::Witness { common } => cmd_witness(&config_or_exit!(common)),
        Command::DecayFit {
            common,
            trace,
            da_norm,
            window_start,
            window_end,
        } => cmd_decay_fit(
            &config_or_exit!(common),
            trace,
            da_norm,
            window_start,
            window_end,
        ),
    }
}

fn ensure_output_dir(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    Ok(())
}

fn cmd_mesh_gen(cfg: &RunConfig) -> Result<ExitCode> {
    let mesh = cfg.build_mesh()?;
    ensure_output_dir(cfg)?;
    let path = cfg.output_dir.join("mesh.txt");
    std::fs::write(&path, format_mesh(&mesh))?;
    println!(
        "mesh: {} vertices, {} triangles, {} interface edges, h = {:.6e} -> {}",
        mesh.vertices.len(),
        mesh.triangles.len(),
        mesh.edges_with_tag(BoundaryTag::Interface).len(),
        mesh.h,
        path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_check_geometry(cfg: &RunConfig, surrogate: bool) -> Result<ExitCode> {
    let mesh = cfg.build_mesh()?;
    let report = geometry_report(&mesh, cfg.x0, cfg.mu, cfg.omega0_deg, surrogate)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    ensure_output_dir(cfg)?;
    std::fs::write(cfg.output_dir.join("geometry.json"), &json)?;
    println!("{json}");
    Ok(if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

/// Seeded random state with uniform coefficients in [-1, 1], mean-projected
/// and smoothed `smooth` times through (I - A)⁻¹.
fn initial_data(sys: &GeneratorSystem, seed: u64, smooth: usize) -> Result<(Vec<f64>, f64)> {
    let n = sys.n_state();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    if smooth == 0 {
        let g = sys.mean_project(&f)?;
        let ag = sys.apply_generator(&g)?;
        let da = (sys.h_inner(&g, &g) + sys.h_inner(&ag, &ag)).max(0.0).sqrt();
        return Ok((g, da));
    }
    for _ in 0..smooth - 1 {
        let g = sys.mean_project(&f)?;
        f = sys.solve_shifted_real(1.0, &g)?;
    }
    sys.smooth_initial_data(&f)
}

fn cmd_simulate(cfg: &RunConfig, strict: bool) -> Result<ExitCode> {
    let mesh = cfg.build_mesh()?;
    if strict {
        let report = geometry_report(&mesh, cfg.x0, cfg.mu, cfg.omega0_deg, false)?;
        if !report.pass {
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            println!("{json}");
            eprintln!("error: geometric hypotheses violated; refusing to simulate (--strict)");
            return Ok(ExitCode::from(1));
        }
    }
    let sys = build_generator(&mesh, cfg.mu)?;
    let dt = cfg.dt.unwrap_or_else(|| default_dt(mesh.h));
    let (u0, da_norm) = initial_data(&sys, cfg.seed, cfg.smooth)?;
    let (trace, audit) = integrate(&sys, &u0, dt, cfg.t_final, cfg.stride)?;

    ensure_output_dir(cfg)?;
    let csv_path = cfg.output_dir.join("energy.csv");
    std::fs::write(&csv_path, trace.to_csv())?;
    let e0 = trace.rows.first().map_or(0.0, |r| r.e);
    let e_final = trace.rows.last().map_or(0.0, |r| r.e);
    let summary = serde_json::json!({
        "e0": e0,
        "e_final": e_final,
        "da_norm": da_norm,
        "dt": dt,
        "t_final": cfg.t_final,
        "stride": cfg.stride,
        "seed": cfg.seed,
        "smooth": cfg.smooth,
        "n_state": sys.n_state(),
        "h": mesh.h,
        "audit": {
            "max_step_identity_rel": audit.max_step_identity_rel,
            "cumulative_identity_rel": audit.cumulative_identity_rel,
            "max_monotonicity_violation_rel": audit.max_monotonicity_violation_rel,
        },
    });
    std::fs::write(
        cfg.output_dir.join("run.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    println!(
        "simulated {} dofs to T = {} (dt = {:.3e}): E(0) = {:.6e}, E(T) = {:.6e} -> {}",
        sys.n_state(),
        cfg.t_final,
        dt,
        e0,
        e_final,
        csv_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_eigs(cfg: &RunConfig) -> Result<ExitCode> {
    let mesh = cfg.build_mesh()?;
    let sys = build_generator(&mesh, cfg.mu)?;
    let pairs = eig_odelta_r(&sys, cfg.eigs_count)?;
    ensure_output_dir(cfg)?;
    let path = cfg.output_dir.join("eigs.csv");
    std::fs::write(&path, eigs_csv(&pairs))?;
    let resolved = resolved_pairs(&pairs, mesh.h);
    println!(
        "{} eigenfrequencies in [{:.4}, {:.4}], {} resolved (mu h <= 1) -> {}",
        pairs.len(),
        pairs.first().map_or(0.0, |p| p.mu),
        pairs.last().map_or(0.0, |p| p.mu),
        resolved.len(),
        path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_witness(cfg: &RunConfig) -> Result<ExitCode> {
    let mesh = cfg.build_mesh()?;
    let sys = build_generator(&mesh, cfg.mu)?;
    let pairs = eig_odelta_r(&sys, cfg.eigs_count)?;
    let resolved = resolved_pairs(&pairs, mesh.h);
    let points = witness(&resolved, &sys)?;
    ensure_output_dir(cfg)?;
    let path = cfg.output_dir.join("witness.csv");
    std::fs::write(&path, witness_csv(&points))?;
    let logf: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.mu.ln(), p.f_norm.max(1e-300).ln()))
        .collect();
    println!(
        "{} witness points ({} unresolved excluded), log F-norm slope {:.3} -> {}",
        points.len(),
        pairs.len() - resolved.len(),
        linear_trend(&logf),
        path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(cfg: &RunConfig) -> Result<ExitCode> {
    let mesh = cfg.build_mesh()?;
    let sys = build_generator(&mesh, cfg.mu)?;
    let pairs = eig_odelta_r(&sys, cfg.eigs_count)?;
    let resolved = resolved_pairs(&pairs, mesh.h);
    let betas = default_sweep_betas(&resolved, cfg.sweep_points);
    if betas.is_empty() {
        return Err(Error::validation(
            "no resolved eigenfrequencies to span a sweep",
        ));
    }
    let points = resolvent_sweep(&sys, &betas)?;
    ensure_output_dir(cfg)?;
    let path = cfg.output_dir.join("resolvent.csv");
    std::fs::write(&path, sweep_csv(&points))?;
    let fit = bt_exponent_fit(&points)?;
    println!(
        "{} sweep points in [{:.4}, {:.4}], growth exponent {:.3} -> {}",
        points.len(),
        betas[0],
        betas[betas.len() - 1],
        fit.exponent,
        path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_decay_fit(
    cfg: &RunConfig,
    trace_path: Option<PathBuf>,
    da_norm: Option<f64>,
    window_start: Option<f64>,
    window_end: Option<f64>,
) -> Result<ExitCode> {
    let trace_path = trace_path.unwrap_or_else(|| cfg.output_dir.join("energy.csv"));
    let text = std::fs::read_to_string(&trace_path).map_err(|e| {
        Error::invalid_argument(format!("cannot read trace `{}`: {e}", trace_path.display()))
    })?;
    let trace = EnergyTrace::from_csv(&text)?;
    let da = match da_norm {
        Some(v) => v,
        None => {
            let run_path = cfg.output_dir.join("run.json");
            let text = std::fs::read_to_string(&run_path).map_err(|e| {
                Error::invalid_argument(format!(
                    "no --da-norm given and cannot read `{}`: {e}",
                    run_path.display()
                ))
            })?;
            let v: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Error::validation(format!("bad run.json: {e}")))?;
            v["da_norm"]
                .as_f64()
                .ok_or_else(|| Error::validation("run.json carries no da_norm".to_string()))?
        }
    };
    let t_last = trace.rows.last().map_or(0.0, |r| r.t);
    let window = (
        window_start.unwrap_or(0.25 * t_last),
        window_end.unwrap_or(t_last),
    );
    let report = analysis::decay_fit(&trace, da, window)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    ensure_output_dir(cfg)?;
    std::fs::write(cfg.output_dir.join("decay.json"), &json)?;
    println!("{json}");
    Ok(ExitCode::SUCCESS)
}
