use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use patchls::harness::{
    cavity_reference, cavity_self_convergence, run_convergence, solve_cavity, solve_on_mesh, measure_run, MeshFamily,
    RunConfig,
};
use patchls::mesh::load_mesh;
use patchls::output::{write_text, write_vtk};
use patchls::problems::example;
use patchls::{Error, Result};

#[derive(Parser)]
#[command(name = "patchls", version, about = "Least-squares Stokes solver on patch-reconstructed spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Reconstruction order m.
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// Elements per patch; defaults to the tabulated size for (d, m).
    #[arg(long)]
    patch_size: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
}

impl Common {
    fn run_config(&self) -> RunConfig {
        RunConfig {
            order: self.order,
            patch_size: self.patch_size,
            eta: self.eta,
            mu: self.mu,
            quadrature_degree: None,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Convergence study for a manufactured example (1, 2, 4, 5).
    Converge {
        #[arg(long, default_value_t = 1)]
        example: u32,
        #[arg(long)]
        dim: Option<usize>,
        /// Structured subdivisions, e.g. 10,20,40.
        #[arg(long, value_delimiter = ',')]
        refinements: Vec<usize>,
        /// Mesh files, coarse to fine; replaces --refinements.
        #[arg(long)]
        mesh: Vec<PathBuf>,
        /// CSV output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Lid-driven cavity (example 3): VTK output and self-convergence.
    Cavity {
        #[arg(long, value_delimiter = ',', default_values_t = [10, 20, 40])]
        refinements: Vec<usize>,
        /// Resolution of the reference solution; 0 skips the study.
        #[arg(long, default_value_t = 160)]
        reference: usize,
        #[arg(long, default_value_t = 2)]
        reference_order: usize,
        /// Directory caching the reference velocity.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Output directory for VTK files and the error table.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// One solve on a mesh file; writes VTK and prints errors when known.
    Solve {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, default_value_t = 1)]
        example: u32,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("PATCHLS_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Config(format!("PATCHLS_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(Error::Config("PATCHLS_THREADS must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Setup(e.to_string()))?;
    }
    Ok(())
}

fn problem_dim(example_no: u32, dim: Option<usize>) -> Result<usize> {
    let native = match example_no {
        4 | 5 => 3,
        _ => 2,
    };
    match dim {
        Some(d) if d != native => Err(Error::Config(format!("example {example_no} is {native}d"))),
        _ => Ok(native),
    }
}

fn converge(
    example_no: u32,
    dim: Option<usize>,
    refinements: Vec<usize>,
    mesh: Vec<PathBuf>,
    out: Option<PathBuf>,
    common: &Common,
) -> Result<()> {
    if example_no == 3 {
        return Err(Error::Config("example 3 has no exact solution; use the cavity command".into()));
    }
    let problem = example(example_no, common.nu)?;
    let d = problem_dim(example_no, dim)?;
    let family = if !mesh.is_empty() {
        MeshFamily::Files { dim: d, paths: mesh }
    } else {
        if example_no == 2 {
            return Err(Error::Config("example 2 runs on polygonal mesh files (--mesh)".into()));
        }
        let divisions = if refinements.is_empty() {
            if d == 2 { vec![10, 20, 40] } else { vec![4, 8] }
        } else {
            refinements
        };
        MeshFamily::Structured { dim: d, divisions }
    };
    let record = run_convergence(&problem, &family, &common.run_config())?;
    let csv = record.to_csv()?;
    match out {
        Some(p) => write_text(&p, &csv)?,
        None => print!("{csv}"),
    }
    for r in &record.rows {
        info!(
            "h={:.4e} J_p {:.3e} <= {:.3e}, J_u {:.3e} <= {:.3e}, max|div u_h| {:.2e} (max|grad u_h| {:.2e})",
            r.report.h, r.functional_p[0], r.functional_p[1], r.functional_u[0], r.functional_u[1], r.max_divergence, r.max_gradient
        );
    }
    Ok(())
}

fn cavity(
    refinements: Vec<usize>,
    reference: usize,
    reference_order: usize,
    cache: Option<PathBuf>,
    out: PathBuf,
    common: &Common,
) -> Result<()> {
    let run = common.run_config();
    std::fs::create_dir_all(&out).map_err(|source| Error::Write { path: out.clone(), source })?;
    for &n in &refinements {
        let c = solve_cavity(n, &run, common.nu)?;
        let path = out.join(format!("cavity_n{n}_m{}.vtk", run.order));
        write_vtk(&path, &c.mesh, &c.spaces, &c.solution.pressure_dofs, &c.solution.velocity_dofs, "lid-driven cavity")?;
        let v = c.find_vortex(80);
        println!(
            "n={n}: boundary flux {:.3e}, vortex near ({:.3}, {:.3}), wrote {}",
            c.boundary_flux()?,
            v[0],
            v[1],
            path.display()
        );
    }
    if reference > 0 {
        let mut ref_run = run;
        ref_run.order = reference_order;
        ref_run.patch_size = None;
        let r = cavity_reference(reference, &ref_run, common.nu, cache.as_deref())?;
        let study = cavity_self_convergence(&refinements, &run, &r, common.nu)?;
        let mut table = String::from("n,h,l2_u_vs_reference\n");
        for (n, e) in study.divisions.iter().zip(&study.errors) {
            table.push_str(&format!("{n},{:.6e},{e:.6e}\n", 1.0 / *n as f64));
        }
        write_text(&out.join("cavity_convergence.csv"), &table)?;
        print!("{table}");
        println!("slope {:.3}", study.slope);
    }
    Ok(())
}

fn solve(mesh: PathBuf, example_no: u32, dim: Option<usize>, out: Option<PathBuf>, common: &Common) -> Result<()> {
    let problem = example(example_no, common.nu)?;
    let d = problem_dim(example_no, dim)?;
    problem.validate(100)?;
    let mesh = load_mesh(&mesh, d)?;
    let config = common.run_config().solver_config(d, problem.nu)?;
    let (spaces, solution) = solve_on_mesh(&mesh, &problem, &config)?;
    if problem.exact.is_some() {
        let r = measure_run(&mesh, &spaces, &solution, &problem, &config)?;
        let e = r.report;
        println!(
            "elements={} h={:.4e} energy_Up={:.6e} l2_U={:.6e} l2_p={:.6e} energy_u={:.6e} l2_u={:.6e}",
            e.elements, e.h, e.energy_up, e.l2_gradient, e.l2_pressure, e.energy_u, e.l2_velocity
        );
    }
    if let Some(p) = out {
        write_vtk(&p, &mesh, &spaces, &solution.pressure_dofs, &solution.velocity_dofs, &problem.name)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    match cli.command {
        Command::Converge {
            example,
            dim,
            refinements,
            mesh,
            out,
            common,
        } => converge(example, dim, refinements, mesh, out, &common),
        Command::Cavity {
            refinements,
            reference,
            reference_order,
            cache,
            out,
            common,
        } => cavity(refinements, reference, reference_order, cache, out, &common),
        Command::Solve {
            mesh,
            example,
            dim,
            out,
            common,
        } => solve(mesh, example, dim, out, &common),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("[{}] {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
