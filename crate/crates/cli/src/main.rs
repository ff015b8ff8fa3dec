//! Command-line driver for the adaptive contact solver.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use contact_afem::adapt::{adaptive_solve, AdaptOptions, ConvergenceHistory};
use contact_afem::assembly::Material;
use contact_afem::estimator::{ContactResidual, EstimatorOptions};
use contact_afem::io::{density_profile, history_csv, report_table, vtk_field};
use contact_afem::mesh::load_mesh;
use contact_afem::par::Execution;
use contact_afem::problems::Problem;

use config::{parse_pairs, ConfigError, MaterialOverride, ProblemId, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "contact-afem", version, about = "Adaptive P2 finite elements for frictionless contact")]
struct Args {
    /// Flat key=value configuration file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// example61, example62 or custom.
    #[arg(long)]
    problem: Option<String>,
    /// Dörfler marking fraction in (0, 1].
    #[arg(long)]
    theta: Option<String>,
    /// Stop once the number of free dofs exceeds this.
    #[arg(long)]
    max_dof: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sequential, bit-reproducible numerics.
    #[arg(long)]
    test_mode: bool,
    /// Extra key=value settings, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// Failure of one stage, printed as a single `error stage=... message=...` line.
struct Failure {
    stage: &'static str,
    message: String,
    code: u8,
}

impl Failure {
    fn new(stage: &'static str, e: impl std::fmt::Display) -> Self {
        Failure { stage, message: e.to_string().replace('\n', " "), code: 1 }
    }
}

fn collect_config(args: &Args) -> Result<RunConfig, ConfigError> {
    let mut pairs = Vec::new();
    if let Some(path) = &args.config {
        let shown = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| ConfigError::BadValue {
            key: "config".into(),
            value: shown.clone(),
            reason: e.to_string(),
        })?;
        pairs.extend(parse_pairs(&text, &shown)?);
    }
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            pairs.push((k.to_string(), v));
        }
    };
    push("problem", args.problem.clone());
    push("theta", args.theta.clone());
    push("max_dof", args.max_dof.clone());
    push("out", args.out.as_ref().map(|p| p.display().to_string()));
    if args.test_mode {
        push("test_mode", Some("true".into()));
    }
    for s in &args.set {
        pairs.extend(parse_pairs(s, "--set")?);
    }
    RunConfig::from_pairs(&pairs)
}

fn material(over: MaterialOverride) -> contact_afem::Result<Material> {
    match over {
        MaterialOverride::Lame { mu, chi } => Material::new(mu, chi),
        MaterialOverride::Engineering { young, poisson } => Material::from_young_poisson(young, poisson),
    }
}

fn build_problem(cfg: &RunConfig) -> Result<Problem, Failure> {
    let mut p = match cfg.problem {
        ProblemId::Example61 => Problem::contact_bottom(),
        ProblemId::Example62 => Problem::obstacle_right(),
        ProblemId::Custom => {
            let path = cfg.mesh.as_ref().expect("validated");
            let text = fs::read_to_string(path).map_err(|e| Failure::new("mesh", format!("{}: {e}", path.display())))?;
            let mesh = load_mesh(&text).map_err(|e| Failure::new("mesh", format!("{}: {e}", path.display())))?;
            let (f, d, g) = (cfg.force, cfg.dirichlet, cfg.gap);
            Material::new(1.0, 1.0).map(|m| Problem {
                name: "custom".into(),
                material: m,
                initial_mesh: mesh,
                volume_force: Arc::new(move |_| f),
                traction: Arc::new(|_, _| [0.0, 0.0]),
                dirichlet: Arc::new(move |_| d),
                obstacle: Arc::new(move |_| g),
                exact: None,
            })
        }
    }
    .map_err(|e| Failure::new("problem", e))?;
    if let Some(m) = cfg.material {
        if p.exact.is_some() {
            return Err(Failure::new("config", "material overrides would break the manufactured solution"));
        }
        p.material = material(m).map_err(|e| Failure::new("config", e))?;
    }
    Ok(p)
}

fn write(path: &Path, text: &str) -> contact_afem::Result<()> {
    fs::write(path, text).map_err(Into::into)
}

fn run(cfg: &RunConfig) -> Result<ConvergenceHistory, Failure> {
    let problem = build_problem(cfg)?;
    fs::create_dir_all(&cfg.out).map_err(|e| Failure::new("output", format!("{}: {e}", cfg.out.display())))?;
    if let Some(r) = problem.contact_consistency(64) {
        eprintln!("contact consistency of the exact solution: max violation {r:e}");
    }
    let exec = if cfg.test_mode { Execution::Sequential } else { Execution::Parallel };
    let contact_residual = if cfg.raw_contact_residual { ContactResidual::Raw } else { ContactResidual::Balanced };
    let opts = AdaptOptions {
        theta: cfg.theta,
        max_dof: cfg.max_dof,
        max_levels: cfg.max_levels,
        estimator: EstimatorOptions { contact_residual, exec },
        ..Default::default()
    };
    let out = cfg.out.clone();
    let mut history = ConvergenceHistory::default();
    let mut checked = false;
    let result = adaptive_solve(&problem, &opts, |s| {
        if !checked {
            checked = true;
            if cfg.max_dof < s.space.n_free() {
                return Err(contact_afem::Error::InvalidInput(format!(
                    "max_dof {} is below the initial dof count {}",
                    cfg.max_dof,
                    s.space.n_free()
                )));
            }
        }
        let l = s.level;
        write(&out.join(format!("mesh_{l}.txt")), &s.space.mesh().to_text())?;
        write(&out.join(format!("field_{l}.vtk")), &vtk_field(&s.space, &s.solution.coeffs, &problem.name))?;
        write(&out.join(format!("density_{l}.dat")), &density_profile(&s.space, &s.density))?;
        write(&out.join(format!("estimator_{l}.dat")), &report_table(&s.report))?;
        let row = s.row();
        println!(
            "level {l} ndof {} eta {:.4e} err {} iters {}",
            row.ndof,
            row.total,
            row.error.map_or("-".into(), |e| format!("{e:.4e}")),
            row.pdas_iterations
        );
        history.rows.push(row);
        write(&out.join("history.csv"), &history_csv(&history))
    });
    result.map_err(|e| Failure::new("solve", e))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let outcome = collect_config(&args)
        .map_err(|e| Failure { stage: "config", message: e.to_string(), code: 2 })
        .and_then(|cfg| run(&cfg));
    match outcome {
        Ok(_) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error stage={} message={:?}", f.stage, f.message);
            ExitCode::from(f.code)
        }
    }
}
