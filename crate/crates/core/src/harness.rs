//! Experiment drivers: manufactured-solution convergence studies and the
//! lid-driven cavity with a cached fine reference.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::analysis::{
    convergence_orders, divergence_extrema, error_report, functional_p, functional_u, ErrorReport,
};
use crate::assembly::{solve_stokes, SolverConfig, StokesSolution};
use crate::error::{Context, Error, Result};
use crate::locate::PointLocator;
use crate::mesh::{generate_structured, load_mesh, Mesh, Point};
use crate::problems::{lid_driven_cavity, ProblemDefinition};
use crate::quadrature::{element_rule, face_rule};
use crate::reconstruction::{build_spaces, Spaces};

/// User-facing solver settings; unset entries take the tabulated defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub order: usize,
    pub patch_size: Option<usize>,
    pub eta: f64,
    pub mu: f64,
    pub quadrature_degree: Option<usize>,
}

impl RunConfig {
    pub fn new(order: usize) -> Self {
        RunConfig {
            order,
            patch_size: None,
            eta: 1.0,
            mu: 1.0,
            quadrature_degree: None,
        }
    }

    pub fn solver_config(&self, dim: usize, nu: f64) -> Result<SolverConfig> {
        let mut c = SolverConfig::new(dim, self.order)?;
        c.nu = nu;
        c.eta = self.eta;
        c.mu = self.mu;
        if let Some(s) = self.patch_size {
            c.patch_size = s;
        }
        if let Some(q) = self.quadrature_degree {
            c.quadrature_degree = q;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshFamily {
    /// Structured simplices with `n` subdivisions per axis.
    Structured { dim: usize, divisions: Vec<usize> },
    /// Mesh files; their size is measured as `#elements^(-1/d)`.
    Files { dim: usize, paths: Vec<PathBuf> },
}

impl MeshFamily {
    pub fn dim(&self) -> usize {
        match self {
            MeshFamily::Structured { dim, .. } | MeshFamily::Files { dim, .. } => *dim,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            MeshFamily::Structured { divisions, .. } => divisions.len(),
            MeshFamily::Files { paths, .. } => paths.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn describe(&self) -> String {
        match self {
            MeshFamily::Structured { dim, divisions } => format!("structured {dim}d n={divisions:?}"),
            MeshFamily::Files { paths, .. } => format!("files {paths:?}"),
        }
    }

    pub fn mesh(&self, i: usize) -> Result<Mesh> {
        match self {
            MeshFamily::Structured { dim, divisions } => generate_structured(*dim, divisions[i]),
            MeshFamily::Files { dim, paths } => load_mesh(&paths[i], *dim),
        }
    }

    fn effective_h(&self, mesh: &Mesh) -> f64 {
        match self {
            MeshFamily::Structured { .. } => mesh.mesh_size,
            MeshFamily::Files { dim, .. } => (mesh.num_elements() as f64).powf(-1.0 / *dim as f64),
        }
    }
}

/// Everything measured on one mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecord {
    pub report: ErrorReport,
    /// `J_h^p` at the discrete solution and at the interpolant of the exact one.
    pub functional_p: [f64; 2],
    /// `J_h^u` (with the computed `U_h`) at `u_h` and at the interpolant.
    pub functional_u: [f64; 2],
    pub max_divergence: f64,
    pub max_gradient: f64,
    pub enlarged_patches: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceRecord {
    pub problem: String,
    pub dim: usize,
    pub config: SolverConfig,
    pub nu: f64,
    pub family: String,
    pub rows: Vec<RunRecord>,
}

impl ConvergenceRecord {
    pub fn reports(&self) -> Vec<ErrorReport> {
        self.rows.iter().map(|r| r.report).collect()
    }

    /// Per measure: consecutive orders and least-squares slope.
    pub fn orders(&self) -> Result<Vec<(Vec<f64>, f64)>> {
        convergence_orders(&self.reports())
    }

    pub fn to_csv(&self) -> Result<String> {
        crate::output::format_csv(&self.reports())
    }
}

pub fn solve_on_mesh(mesh: &Mesh, problem: &ProblemDefinition, config: &SolverConfig) -> Result<(Spaces, StokesSolution)> {
    if mesh.dim != problem.dim {
        return Err(Error::Config(format!("{}d problem on a {}d mesh", problem.dim, mesh.dim)));
    }
    let t = Instant::now();
    let spaces = build_spaces(mesh, config.order, config.patch_size)?;
    log::debug!("spaces built in {:.2}s", t.elapsed().as_secs_f64());
    if !spaces.enlarged.is_empty() {
        warn!("{} patches enlarged for unisolvence", spaces.enlarged.len());
    }
    let solution = solve_stokes(mesh, &spaces, config, problem)?;
    Ok((spaces, solution))
}

/// Errors, functionals and the divergence check for a solved mesh.
pub fn measure_run(
    mesh: &Mesh,
    spaces: &Spaces,
    solution: &StokesSolution,
    problem: &ProblemDefinition,
    config: &SolverConfig,
) -> Result<RunRecord> {
    let exact = problem
        .exact
        .as_ref()
        .ok_or_else(|| Error::Config(format!("problem {} has no exact solution", problem.name)))?;
    let deg = config.quadrature_degree;
    let report = error_report(mesh, spaces, solution, exact, deg)?;
    let gi = spaces.tensor.interpolate(mesh, &*exact.gradient);
    let p = exact.pressure.clone();
    let mut qi = spaces.scalar.interpolate(mesh, move |x| vec![p(x)]);
    // The interpolant competes in the zero-mean space.
    let mean = crate::analysis::pressure_mean(mesh, spaces, &qi, deg)? / mesh.total_measure();
    qi.iter_mut().for_each(|v| *v -= mean);
    let ui = spaces.vector.interpolate(mesh, &*exact.velocity);
    let jp = [
        functional_p(mesh, spaces, config, problem, &solution.gradient_dofs, &solution.pressure_dofs)?,
        functional_p(mesh, spaces, config, problem, &gi, &qi)?,
    ];
    let ju = [
        functional_u(mesh, spaces, config, problem, &solution.gradient_dofs, &solution.velocity_dofs)?,
        functional_u(mesh, spaces, config, problem, &solution.gradient_dofs, &ui)?,
    ];
    let (max_divergence, max_gradient) = divergence_extrema(mesh, spaces, &solution.velocity_dofs, deg)?;
    Ok(RunRecord {
        report,
        functional_p: jp,
        functional_u: ju,
        max_divergence,
        max_gradient,
        enlarged_patches: spaces.enlarged.len(),
        seconds: 0.0,
    })
}

pub fn run_convergence(problem: &ProblemDefinition, family: &MeshFamily, run: &RunConfig) -> Result<ConvergenceRecord> {
    if problem.exact.is_none() {
        return Err(Error::Config(format!("problem {} has no exact solution", problem.name)));
    }
    if family.dim() != problem.dim {
        return Err(Error::Config(format!("{}d problem, {}d meshes", problem.dim, family.dim())));
    }
    problem.validate(100)?;
    let config = run.solver_config(problem.dim, problem.nu)?;
    let mut rows = Vec::with_capacity(family.len());
    for i in 0..family.len() {
        let start = Instant::now();
        let ctx = || format!("refinement {} ({})", i, family.describe());
        let mesh = family.mesh(i).context(ctx)?;
        let (spaces, solution) = solve_on_mesh(&mesh, problem, &config).context(ctx)?;
        let t = Instant::now();
        let mut row = measure_run(&mesh, &spaces, &solution, problem, &config).context(ctx)?;
        log::debug!("errors measured in {:.2}s", t.elapsed().as_secs_f64());
        row.report.h = family.effective_h(&mesh);
        row.seconds = start.elapsed().as_secs_f64();
        info!(
            "{} m={} h={:.4e} elements={} energy_Up={:.3e} energy_u={:.3e} l2_u={:.3e} ({:.1}s)",
            problem.name,
            config.order,
            row.report.h,
            row.report.elements,
            row.report.energy_up,
            row.report.energy_u,
            row.report.l2_velocity,
            row.seconds
        );
        rows.push(row);
    }
    Ok(ConvergenceRecord {
        problem: problem.name.clone(),
        dim: problem.dim,
        config,
        nu: problem.nu,
        family: family.describe(),
        rows,
    })
}

/// A solved cavity on the structured `n x n` mesh.
pub struct CavityRun {
    pub n: usize,
    pub mesh: Mesh,
    pub spaces: Spaces,
    pub solution: StokesSolution,
    pub config: SolverConfig,
}

pub fn solve_cavity(n: usize, run: &RunConfig, nu: f64) -> Result<CavityRun> {
    let problem = lid_driven_cavity(nu);
    let config = run.solver_config(2, nu)?;
    let mesh = generate_structured(2, n)?;
    let (spaces, solution) = solve_on_mesh(&mesh, &problem, &config).context(|| format!("cavity n={n}"))?;
    Ok(CavityRun {
        n,
        mesh,
        spaces,
        solution,
        config,
    })
}

impl CavityRun {
    pub fn velocity(&self, k: usize, x: &Point) -> Vec<f64> {
        self.spaces.vector.field_value(k, x, &self.solution.velocity_dofs)
    }

    /// `integral of u_h . n` over the boundary.
    pub fn boundary_flux(&self) -> Result<f64> {
        let mut s = 0.0;
        for &f in &self.mesh.boundary_face_ids {
            let face = &self.mesh.faces[f];
            let rule = face_rule(2, face, self.config.quadrature_degree)?;
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let u = self.velocity(face.element_ids[0], x);
                s += w * (u[0] * face.normal[0] + u[1] * face.normal[1]);
            }
        }
        Ok(s)
    }

    /// Interior point of smallest speed on a `grid x grid` scan of
    /// `[0.2, 0.8]^2`, away from the slow flow along the walls.
    pub fn find_vortex(&self, grid: usize) -> Point {
        let loc = PointLocator::new(&self.mesh);
        let mut best = ([0.5, 0.5, 0.0], f64::INFINITY);
        for i in 0..=grid {
            for j in 0..=grid {
                let x = [0.2 + 0.6 * i as f64 / grid as f64, 0.2 + 0.6 * j as f64 / grid as f64, 0.0];
                if let Some(k) = loc.locate(&self.mesh, &x) {
                    let u = self.velocity(k, &x);
                    let s = u[0].hypot(u[1]);
                    if s < best.1 {
                        best = (x, s);
                    }
                }
            }
        }
        best.0
    }

    /// L2 distance of `u_h` to a finer solution, by quadrature on this mesh.
    pub fn l2_distance(&self, reference: &CavityRun, locator: &PointLocator) -> Result<f64> {
        let deg = self.config.quadrature_degree.max(reference.config.quadrature_degree);
        let parts = (0..self.mesh.num_elements())
            .into_par_iter()
            .map(|k| -> Result<f64> {
                let rule = element_rule(2, &self.mesh.elements[k], deg)?;
                let mut s = 0.0;
                for (x, w) in rule.points.iter().zip(&rule.weights) {
                    let kr = locator
                        .locate(&reference.mesh, x)
                        .ok_or_else(|| Error::Internal(format!("point {x:?} outside the reference mesh")))?;
                    let a = self.velocity(k, x);
                    let b = reference.velocity(kr, x);
                    s += w * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2));
                }
                Ok(s)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(parts.iter().sum::<f64>().sqrt())
    }
}

const CACHE_VERSION: &str = "cavity-reference-v2";

fn cache_key(n: usize, run: &RunConfig, nu: f64) -> String {
    let mut h = Sha256::new();
    h.update(format!("{CACHE_VERSION} n={n} {run:?} nu={nu:e} {}", env!("CARGO_PKG_VERSION")));
    let d = h.finalize();
    d.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn read_cache(path: &Path, expected: usize) -> Option<Vec<f64>> {
    let bytes = std::fs::read(path).ok()?;
    if bytes.len() != expected * 8 {
        return None;
    }
    Some(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Fine cavity solution; the velocity is cached under `cache_dir` keyed by
/// a hash of the parameters. Spaces are rebuilt on load.
pub fn cavity_reference(n: usize, run: &RunConfig, nu: f64, cache_dir: Option<&Path>) -> Result<CavityRun> {
    let config = run.solver_config(2, nu)?;
    let path = cache_dir.map(|d| d.join(format!("cavity_n{n}_m{}_{}.bin", run.order, cache_key(n, run, nu))));
    if let Some(p) = &path {
        let mesh = generate_structured(2, n)?;
        let spaces = build_spaces(&mesh, config.order, config.patch_size)?;
        if let Some(velocity_dofs) = read_cache(p, spaces.vector.num_dofs()) {
            info!("loaded cavity reference from {}", p.display());
            return Ok(CavityRun {
                n,
                mesh,
                spaces,
                solution: StokesSolution {
                    gradient_dofs: Vec::new(),
                    pressure_dofs: Vec::new(),
                    velocity_dofs,
                },
                config,
            });
        }
    }
    let start = Instant::now();
    let mut r = solve_cavity(n, run, nu)?;
    info!("cavity reference n={n} m={} solved in {:.1}s", run.order, start.elapsed().as_secs_f64());
    if let Some(p) = &path {
        let bytes: Vec<u8> = r.solution.velocity_dofs.iter().flat_map(|v| v.to_le_bytes()).collect();
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        crate::output::write_bytes(p, &bytes)?;
    }
    // Step-1 fields are not needed for comparisons.
    r.solution.gradient_dofs.clear();
    r.solution.pressure_dofs.clear();
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavityStudy {
    pub divisions: Vec<usize>,
    pub errors: Vec<f64>,
    pub slope: f64,
}

/// Self-convergence of coarse cavity solutions against the reference.
pub fn cavity_self_convergence(divisions: &[usize], run: &RunConfig, reference: &CavityRun, nu: f64) -> Result<CavityStudy> {
    let locator = PointLocator::new(&reference.mesh);
    let mut errors = Vec::new();
    for &n in divisions {
        let c = solve_cavity(n, run, nu)?;
        let e = c.l2_distance(reference, &locator)?;
        info!("cavity n={n}: ||u_h - u_ref|| = {e:.3e}");
        errors.push(e);
    }
    let h: Vec<f64> = divisions.iter().map(|&n| 1.0 / n as f64).collect();
    let slope = crate::analysis::fitted_order(&h, &errors)?;
    Ok(CavityStudy {
        divisions: divisions.to_vec(),
        errors,
        slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{example, quadratic_2d};

    #[test]
    fn polynomial_problem_saturates() {
        let fam = MeshFamily::Structured {
            dim: 2,
            divisions: vec![3, 6],
        };
        let rec = run_convergence(&quadratic_2d(1.0), &fam, &RunConfig::new(2)).unwrap();
        for row in &rec.rows {
            for e in row.report.measures() {
                assert!(e < 1e-8, "{e}");
            }
        }
    }

    #[test]
    fn cavity_boundary_flux_vanishes_under_refinement() {
        // u_h is only weakly continuous, so the net flux is the sum of the
        // interior normal jumps.
        let f: Vec<f64> = [4, 8, 16]
            .iter()
            .map(|&n| solve_cavity(n, &RunConfig::new(1), 1.0).unwrap().boundary_flux().unwrap().abs())
            .collect();
        assert!(f[1] < 0.5 * f[0] && f[2] < 0.5 * f[1], "{f:?}");
        assert!(f[2] < 1e-2);
    }

    #[test]
    fn refinement_context_is_attached() {
        let fam = MeshFamily::Structured {
            dim: 3,
            divisions: vec![1],
        };
        let e = run_convergence(&example(1, 1.0).unwrap(), &fam, &RunConfig::new(1)).unwrap_err();
        assert_eq!(e.category(), "config");
        let fam = MeshFamily::Structured {
            dim: 2,
            divisions: vec![1],
        };
        let e = run_convergence(&example(1, 1.0).unwrap(), &fam, &RunConfig::new(1)).unwrap_err();
        assert!(e.to_string().starts_with("refinement 0"), "{e}");
    }

    #[test]
    fn cache_key_depends_on_parameters() {
        let a = cache_key(10, &RunConfig::new(1), 1.0);
        assert_eq!(a, cache_key(10, &RunConfig::new(1), 1.0));
        assert_ne!(a, cache_key(10, &RunConfig::new(2), 1.0));
        assert_ne!(a, cache_key(12, &RunConfig::new(1), 1.0));
    }

    #[test]
    fn reference_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let run = RunConfig::new(1);
        let a = cavity_reference(4, &run, 1.0, Some(dir.path())).unwrap();
        let b = cavity_reference(4, &run, 1.0, Some(dir.path())).unwrap();
        assert_eq!(a.solution.velocity_dofs, b.solution.velocity_dofs);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
