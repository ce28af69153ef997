//! Global least-squares systems of the two sequential steps.
//!
//! Step 1 couples the gradient `U_h` (trace-free parameters) and the
//! pressure `p_h`; its dofs are grouped per element into blocks of `d*d`
//! entries: the `d*d - 1` tensor parameters followed by the pressure.
//! Step 2 solves for the velocity with `d` dofs per element.

use std::time::Instant;

use log::{debug, info};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::problems::ProblemDefinition;
use crate::quadrature::{element_rule, face_rule};
use crate::reconstruction::{ReconstructionOperator, Spaces};
use crate::sparse::{pcg, solve_spd, BlockSparse, CG_TOLERANCE, DIRECT_DOF_LIMIT};

const CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Must equal the viscosity the problem data was built with.
    pub nu: f64,
    pub eta: f64,
    pub mu: f64,
    pub order: usize,
    pub patch_size: usize,
    pub quadrature_degree: usize,
}

impl SolverConfig {
    /// Unit parameters, tabulated `#S` and quadrature exact to `2m + 2`.
    pub fn new(dim: usize, order: usize) -> Result<Self> {
        Ok(SolverConfig {
            nu: 1.0,
            eta: 1.0,
            mu: 1.0,
            order,
            patch_size: crate::patch::default_patch_size(dim, order)?,
            quadrature_degree: 2 * order + 2,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("nu", self.nu), ("eta", self.eta), ("mu", self.mu)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.order == 0 {
            return Err(Error::Config("order must be at least 1".into()));
        }
        if self.patch_size == 0 {
            return Err(Error::Config("patch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LeastSquaresSystem {
    pub matrix: BlockSparse,
    pub rhs: Vec<f64>,
    /// `w_J = integral of the pressure basis function J`, over all dofs;
    /// present for step 1 only.
    pub mean_constraint: Option<Vec<f64>>,
}

impl LeastSquaresSystem {
    pub fn block_size(&self) -> usize {
        self.matrix.block_size
    }

    pub fn dof(&self, element: usize, component: usize) -> usize {
        element * self.block_size() + component
    }

    pub fn num_dofs(&self) -> usize {
        self.rhs.len()
    }
}

/// Solution of both steps, as per-element nodal values.
#[derive(Debug, Clone)]
pub struct StokesSolution {
    /// `d*d - 1` per element.
    pub gradient_dofs: Vec<f64>,
    /// One per element.
    pub pressure_dofs: Vec<f64>,
    /// `d` per element.
    pub velocity_dofs: Vec<f64>,
}

/// Tangential trace `n x V` of a row-major `d x d` tensor, taken row by row:
/// one value per row in 2D, three in 3D.
pub fn tangential(dim: usize, n: &Point, v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(if dim == 2 { 2 } else { 9 });
    for r in 0..dim {
        let row = &v[r * dim..(r + 1) * dim];
        if dim == 2 {
            out.push(n[0] * row[1] - n[1] * row[0]);
        } else {
            out.push(n[1] * row[2] - n[2] * row[1]);
            out.push(n[2] * row[0] - n[0] * row[2]);
            out.push(n[0] * row[1] - n[1] * row[0]);
        }
    }
    out
}

fn tangential_rows(dim: usize, n: &Point, values: &DMatrix<f64>) -> DMatrix<f64> {
    let ncol = values.ncols();
    let rows = if dim == 2 { 2 } else { 9 };
    let mut out = DMatrix::zeros(rows, ncol);
    let mut col = vec![0.0; dim * dim];
    for j in 0..ncol {
        for (c, slot) in col.iter_mut().enumerate() {
            *slot = values[(c, j)];
        }
        for (r, t) in tangential(dim, n, &col).into_iter().enumerate() {
            out[(r, j)] = t;
        }
    }
    out
}

/// Sorted union of two member lists with the slot of each original entry.
fn union_blocks(a: &[usize], b: &[usize]) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut u: Vec<usize> = a.iter().chain(b).copied().collect();
    u.sort_unstable();
    u.dedup();
    let pos = |x: &usize| u.binary_search(x).unwrap();
    let pa = a.iter().map(pos).collect();
    let pb = b.iter().map(pos).collect();
    (u, pa, pb)
}

/// Step-1 quantities of the local basis at one point, columns in block
/// layout over the element's patch members.
struct Step1Eval {
    /// `d*d` full tensor entries, last row block pressure values folded in
    /// separately.
    tensor: DMatrix<f64>,
    divergence: DMatrix<f64>,
    pressure: DMatrix<f64>,
    pressure_gradient: DMatrix<f64>,
}

fn step1_eval(spaces: &Spaces, k: usize, x: &Point, gradient: bool) -> Step1Eval {
    let dim = spaces.tensor.dim;
    let bs = dim * dim;
    let nt = bs - 1;
    let n = spaces.tensor.locals[k].members.len();
    let et = spaces.tensor.evaluate(k, x, gradient);
    let es = spaces.scalar.evaluate(k, x, gradient);
    let mut tensor = DMatrix::zeros(bs, n * bs);
    let mut pressure = DMatrix::zeros(1, n * bs);
    let mut divergence = DMatrix::zeros(dim, n * bs);
    let mut pressure_gradient = DMatrix::zeros(dim, n * bs);
    for s in 0..n {
        for c in 0..nt {
            let col = s * nt + c;
            for r in 0..bs {
                tensor[(r, s * bs + c)] = et.values[(r, col)];
            }
            if gradient {
                for i in 0..dim {
                    divergence[(i, s * bs + c)] = (0..dim).map(|j| et.gradients[j][(i * dim + j, col)]).sum();
                }
            }
        }
        pressure[(0, s * bs + nt)] = es.values[(0, s)];
        if gradient {
            for i in 0..dim {
                pressure_gradient[(i, s * bs + nt)] = es.gradients[i][(0, s)];
            }
        }
    }
    Step1Eval {
        tensor,
        divergence,
        pressure,
        pressure_gradient,
    }
}

/// Scatters a column vector given in the layout of `from` slots into a
/// wider union layout.
fn widen(m: &DMatrix<f64>, slots: &[usize], bs: usize, width: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), width * bs);
    for (s, &u) in slots.iter().enumerate() {
        for c in 0..bs {
            out.column_mut(u * bs + c).copy_from(&m.column(s * bs + c));
        }
    }
    out
}

struct Local {
    blocks: Vec<usize>,
    matrix: DMatrix<f64>,
    rhs: Vec<f64>,
    mean: Vec<f64>,
}

fn scatter(
    a: &mut BlockSparse,
    rhs: &mut [f64],
    mean: Option<&mut [f64]>,
    locals: Vec<Local>,
) {
    let bs = a.block_size;
    let mut mean = mean;
    for l in locals {
        a.add_local(&l.blocks, &l.matrix);
        for (s, &b) in l.blocks.iter().enumerate() {
            for c in 0..bs {
                rhs[b * bs + c] += l.rhs[s * bs + c];
            }
        }
        if let Some(m) = mean.as_deref_mut() {
            for (s, &b) in l.blocks.iter().enumerate() {
                for c in 0..bs {
                    m[b * bs + c] += l.mean[s * bs + c];
                }
            }
        }
    }
}

fn pattern(mesh: &Mesh, op: &ReconstructionOperator, bs: usize) -> BlockSparse {
    let mut cliques: Vec<Vec<usize>> = op.locals.iter().map(|l| l.members.clone()).collect();
    for &f in &mesh.interior_face_ids {
        let e = &mesh.faces[f].element_ids;
        let (u, _, _) = union_blocks(&op.locals[e[0]].members, &op.locals[e[1]].members);
        cliques.push(u);
    }
    BlockSparse::from_cliques(mesh.num_elements(), bs, &cliques)
}

/// Rows `sqrt(w) R` collected over quadrature points; the Gram matrix is
/// formed by one product at the end.
struct Stack {
    ncols: usize,
    blocks: Vec<DMatrix<f64>>,
}

impl Stack {
    fn new(ncols: usize) -> Self {
        Stack {
            ncols,
            blocks: Vec::new(),
        }
    }

    fn push(&mut self, rows: &DMatrix<f64>, w: f64) {
        self.blocks.push(rows * w.sqrt());
    }

    fn gram(&self) -> DMatrix<f64> {
        let total = self.blocks.iter().map(|b| b.nrows()).sum();
        let mut s = DMatrix::zeros(total, self.ncols);
        let mut r = 0;
        for b in &self.blocks {
            s.rows_mut(r, b.nrows()).copy_from(b);
            r += b.nrows();
        }
        // gemm on an explicit transpose goes through the blocked kernel.
        let st = s.transpose();
        let mut out = DMatrix::zeros(self.ncols, self.ncols);
        out.gemm(1.0, &st, &s, 0.0);
        out
    }
}

fn add_rhs(target: &mut [f64], rows: &DMatrix<f64>, data: &[f64], w: f64) {
    for j in 0..rows.ncols() {
        let mut s = 0.0;
        for (r, d) in data.iter().enumerate() {
            s += rows[(r, j)] * d;
        }
        target[j] += w * s;
    }
}

fn check_viscosity(config: &SolverConfig, problem: &ProblemDefinition) -> Result<()> {
    if (config.nu - problem.nu).abs() > 1e-14 * problem.nu.abs() {
        return Err(Error::Config(format!(
            "solver viscosity {} differs from the problem's {}",
            config.nu, problem.nu
        )));
    }
    Ok(())
}

fn check_spaces(mesh: &Mesh, spaces: &Spaces) -> Result<()> {
    if spaces.tensor.num_elements() != mesh.num_elements() || spaces.scalar.num_elements() != mesh.num_elements() {
        return Err(Error::Contract("reconstruction operators do not match the mesh".into()));
    }
    Ok(())
}

pub fn assemble_step1(
    mesh: &Mesh,
    spaces: &Spaces,
    config: &SolverConfig,
    problem: &ProblemDefinition,
) -> Result<LeastSquaresSystem> {
    config.validate()?;
    check_spaces(mesh, spaces)?;
    let dim = mesh.dim;
    let bs = dim * dim;
    let nu = config.nu;
    check_viscosity(config, problem)?;
    let deg = config.quadrature_degree;
    let grad_g = problem
        .boundary_gradient
        .as_ref()
        .ok_or_else(|| Error::Config("step 1 needs the gradient of the boundary data".into()))?;

    let mut a = pattern(mesh, &spaces.tensor, bs);
    let mut rhs = vec![0.0; a.dim()];
    let mut mean = vec![0.0; a.dim()];

    let element_ids: Vec<usize> = (0..mesh.num_elements()).collect();
    for chunk in element_ids.chunks(CHUNK) {
        let locals = chunk
            .par_iter()
            .map(|&k| -> Result<Local> {
                let blocks = spaces.tensor.locals[k].members.clone();
                let nloc = blocks.len() * bs;
                let mut stack = Stack::new(nloc);
                let mut lrhs = vec![0.0; nloc];
                let mut lmean = vec![0.0; nloc];
                let rule = element_rule(dim, &mesh.elements[k], deg)?;
                for (x, &w) in rule.points.iter().zip(&rule.weights) {
                    let e = step1_eval(spaces, k, x, true);
                    let r = &e.pressure_gradient - &e.divergence * nu;
                    stack.push(&r, w);
                    add_rhs(&mut lrhs, &r, &(problem.source)(x), w);
                    for (j, v) in e.pressure.row(0).iter().enumerate() {
                        lmean[j] += w * v;
                    }
                }
                for &f in &mesh.elements[k].face_ids {
                    let face = &mesh.faces[f];
                    if !face.is_boundary() {
                        continue;
                    }
                    let pen = config.eta / face.size;
                    let rule = face_rule(dim, face, deg)?;
                    for (x, &w) in rule.points.iter().zip(&rule.weights) {
                        let e = step1_eval(spaces, k, x, false);
                        let t = tangential_rows(dim, &face.normal, &e.tensor);
                        stack.push(&t, pen * w);
                        let tg = tangential(dim, &face.normal, &grad_g(x));
                        add_rhs(&mut lrhs, &t, &tg, pen * w);
                    }
                }
                Ok(Local {
                    blocks,
                    matrix: stack.gram(),
                    rhs: lrhs,
                    mean: lmean,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        scatter(&mut a, &mut rhs, Some(&mut mean), locals);
    }

    for chunk in mesh.interior_face_ids.chunks(CHUNK) {
        let locals = chunk
            .par_iter()
            .map(|&f| -> Result<Local> {
                let face = &mesh.faces[f];
                let (kp, km) = (face.element_ids[0], face.element_ids[1]);
                let (blocks, sp, sm) =
                    union_blocks(&spaces.tensor.locals[kp].members, &spaces.tensor.locals[km].members);
                let nb = blocks.len();
                let mut stack = Stack::new(nb * bs);
                let pen = config.eta / face.size;
                let rule = face_rule(dim, face, deg)?;
                for (x, &w) in rule.points.iter().zip(&rule.weights) {
                    let ep = step1_eval(spaces, kp, x, false);
                    let em = step1_eval(spaces, km, x, false);
                    let jt = widen(&ep.tensor, &sp, bs, nb) - widen(&em.tensor, &sm, bs, nb);
                    let jp = widen(&ep.pressure, &sp, bs, nb) - widen(&em.pressure, &sm, bs, nb);
                    stack.push(&jt, pen * w);
                    stack.push(&jp, pen * w);
                }
                Ok(Local {
                    blocks,
                    matrix: stack.gram(),
                    rhs: vec![0.0; nb * bs],
                    mean: vec![],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        scatter(&mut a, &mut rhs, None, locals);
    }
    debug!("step 1 system: {} dofs, {} stored entries", a.dim(), a.nnz());
    Ok(LeastSquaresSystem {
        matrix: a,
        rhs,
        mean_constraint: Some(mean),
    })
}

/// Indicator of the pressure dofs: the constant-pressure kernel of step 1.
fn pressure_kernel(n: usize, bs: usize) -> Vec<f64> {
    let mut k = vec![0.0; n];
    for i in (bs - 1..n).step_by(bs) {
        k[i] = 1.0;
    }
    k
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the step-1 system with the zero-mean pressure constraint.
///
/// The bordered system `[A w; w^T 0]` is solved without forming it: the
/// multiplier follows from `k^T A = 0` for the constant-pressure vector `k`,
/// one pressure diagonal is shifted to make the matrix definite, and the
/// result is projected onto `w^T x = 0`.
pub fn solve_step1(system: &LeastSquaresSystem) -> Result<(Vec<f64>, Vec<f64>)> {
    let w = system
        .mean_constraint
        .as_ref()
        .ok_or_else(|| Error::Contract("step-1 system lacks the mean constraint".into()))?;
    let n = system.num_dofs();
    let bs = system.block_size();
    let k = pressure_kernel(n, bs);
    let wk = dot(w, &k);
    if !(wk.abs() > 0.0) {
        return Err(Error::Setup("pressure mean constraint is degenerate".into()));
    }
    let lambda = dot(&k, &system.rhs) / wk;
    let b: Vec<f64> = system.rhs.iter().zip(w).map(|(r, wi)| r - lambda * wi).collect();
    let mut x = if n <= DIRECT_DOF_LIMIT {
        let mut a = system.matrix.clone();
        let p = bs - 1;
        let s = a.get(p, p).abs().max(f64::MIN_POSITIVE);
        a.shift_diagonal(p, s);
        solve_spd(&a, &b)?
    } else {
        let (x, rep) = pcg(&system.matrix, &b, CG_TOLERANCE, 20 * n)?;
        info!(
            "step 1 CG: {} iterations, relative residual {:.2e}",
            rep.iterations, rep.relative_residual
        );
        x
    };
    let shift = dot(w, &x) / wk;
    for (xi, ki) in x.iter_mut().zip(&k) {
        *xi -= shift * ki;
    }
    Ok(split_step1(bs, &x))
}

/// Inverse of [`step1_vector`]; `bs` is the block size `d*d`.
pub fn split_step1(bs: usize, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let nt = bs - 1;
    let ne = x.len() / bs;
    let mut grad = Vec::with_capacity(ne * nt);
    let mut pres = Vec::with_capacity(ne);
    for blk in x.chunks(bs) {
        grad.extend_from_slice(&blk[..nt]);
        pres.push(blk[nt]);
    }
    (grad, pres)
}

/// Step-1 dof vector in block layout from separate field vectors.
pub fn step1_vector(dim: usize, gradient: &[f64], pressure: &[f64]) -> Vec<f64> {
    let nt = dim * dim - 1;
    let mut x = Vec::with_capacity(pressure.len() * (nt + 1));
    for (k, p) in pressure.iter().enumerate() {
        x.extend_from_slice(&gradient[k * nt..(k + 1) * nt]);
        x.push(*p);
    }
    x
}

pub fn assemble_step2(
    mesh: &Mesh,
    spaces: &Spaces,
    config: &SolverConfig,
    problem: &ProblemDefinition,
    gradient_dofs: &[f64],
) -> Result<LeastSquaresSystem> {
    config.validate()?;
    check_spaces(mesh, spaces)?;
    let dim = mesh.dim;
    let bs = dim;
    let deg = config.quadrature_degree;
    if gradient_dofs.len() != spaces.tensor.num_dofs() {
        return Err(Error::Contract(format!(
            "gradient has {} dofs, expected {}",
            gradient_dofs.len(),
            spaces.tensor.num_dofs()
        )));
    }
    let op = &spaces.vector;
    let mut a = pattern(mesh, op, bs);
    let mut rhs = vec![0.0; a.dim()];

    let element_ids: Vec<usize> = (0..mesh.num_elements()).collect();
    for chunk in element_ids.chunks(CHUNK) {
        let locals = chunk
            .par_iter()
            .map(|&k| -> Result<Local> {
                let blocks = op.locals[k].members.clone();
                let nloc = blocks.len() * bs;
                let mut stack = Stack::new(nloc);
                let mut lrhs = vec![0.0; nloc];
                let rule = element_rule(dim, &mesh.elements[k], deg)?;
                for (x, &w) in rule.points.iter().zip(&rule.weights) {
                    let e = op.evaluate(k, x, true);
                    let mut g = DMatrix::zeros(dim * dim, nloc);
                    for c in 0..dim {
                        for ax in 0..dim {
                            g.row_mut(c * dim + ax).copy_from(&e.gradients[ax].row(c));
                        }
                    }
                    stack.push(&g, w);
                    let uh = spaces.tensor.field_value(k, x, gradient_dofs);
                    add_rhs(&mut lrhs, &g, &uh, w);
                }
                for &f in &mesh.elements[k].face_ids {
                    let face = &mesh.faces[f];
                    if !face.is_boundary() {
                        continue;
                    }
                    let pen = config.mu / face.size;
                    let rule = face_rule(dim, face, deg)?;
                    for (x, &w) in rule.points.iter().zip(&rule.weights) {
                        let e = op.evaluate(k, x, false);
                        stack.push(&e.values, pen * w);
                        add_rhs(&mut lrhs, &e.values, &(problem.boundary)(x), pen * w);
                    }
                }
                Ok(Local {
                    blocks,
                    matrix: stack.gram(),
                    rhs: lrhs,
                    mean: vec![],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        scatter(&mut a, &mut rhs, None, locals);
    }

    for chunk in mesh.interior_face_ids.chunks(CHUNK) {
        let locals = chunk
            .par_iter()
            .map(|&f| -> Result<Local> {
                let face = &mesh.faces[f];
                let (kp, km) = (face.element_ids[0], face.element_ids[1]);
                let (blocks, sp, sm) = union_blocks(&op.locals[kp].members, &op.locals[km].members);
                let nb = blocks.len();
                let mut stack = Stack::new(nb * bs);
                let pen = config.mu / face.size;
                let rule = face_rule(dim, face, deg)?;
                for (x, &w) in rule.points.iter().zip(&rule.weights) {
                    let ep = op.evaluate(kp, x, false);
                    let em = op.evaluate(km, x, false);
                    let j = widen(&ep.values, &sp, bs, nb) - widen(&em.values, &sm, bs, nb);
                    stack.push(&j, pen * w);
                }
                Ok(Local {
                    blocks,
                    matrix: stack.gram(),
                    rhs: vec![0.0; nb * bs],
                    mean: vec![],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        scatter(&mut a, &mut rhs, None, locals);
    }
    debug!("step 2 system: {} dofs, {} stored entries", a.dim(), a.nnz());
    Ok(LeastSquaresSystem {
        matrix: a,
        rhs,
        mean_constraint: None,
    })
}

pub fn solve_step2(system: &LeastSquaresSystem) -> Result<Vec<f64>> {
    solve_spd(&system.matrix, &system.rhs)
}

/// Both steps on prepared spaces.
pub fn solve_stokes(
    mesh: &Mesh,
    spaces: &Spaces,
    config: &SolverConfig,
    problem: &ProblemDefinition,
) -> Result<StokesSolution> {
    let t = Instant::now();
    let s1 = assemble_step1(mesh, spaces, config, problem)?;
    debug!("step 1 assembled in {:.2}s", t.elapsed().as_secs_f64());
    let t = Instant::now();
    let (gradient_dofs, pressure_dofs) = solve_step1(&s1)?;
    debug!("step 1 solved in {:.2}s", t.elapsed().as_secs_f64());
    drop(s1);
    let t = Instant::now();
    let s2 = assemble_step2(mesh, spaces, config, problem, &gradient_dofs)?;
    debug!("step 2 assembled in {:.2}s", t.elapsed().as_secs_f64());
    let t = Instant::now();
    let velocity_dofs = solve_step2(&s2)?;
    debug!("step 2 solved in {:.2}s", t.elapsed().as_secs_f64());
    Ok(StokesSolution {
        gradient_dofs,
        pressure_dofs,
        velocity_dofs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_structured;
    use crate::problems::{quadratic_2d, quadratic_3d, trigonometric_2d};
    use crate::reconstruction::build_spaces;
    use crate::sparse::lanczos_min_ritz;
    use std::sync::Arc;

    fn setup(dim: usize, n: usize, m: usize) -> (Mesh, Spaces, SolverConfig) {
        let mesh = generate_structured(dim, n).unwrap();
        let config = SolverConfig::new(dim, m).unwrap();
        let spaces = build_spaces(&mesh, m, config.patch_size).unwrap();
        (mesh, spaces, config)
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn systems_are_symmetric() {
        let (mesh, spaces, config) = setup(2, 4, 2);
        let p = trigonometric_2d(1.0);
        let s1 = assemble_step1(&mesh, &spaces, &config, &p).unwrap();
        assert!(s1.matrix.asymmetry() <= 1e-12 * s1.matrix.max_abs());
        let g = vec![0.1; spaces.tensor.num_dofs()];
        let s2 = assemble_step2(&mesh, &spaces, &config, &p, &g).unwrap();
        assert!(s2.matrix.asymmetry() <= 1e-12 * s2.matrix.max_abs());
    }

    #[test]
    fn step1_is_definite_off_the_pressure_constant() {
        let (mesh, spaces, config) = setup(2, 4, 1);
        let s1 = assemble_step1(&mesh, &spaces, &config, &trigonometric_2d(1.0)).unwrap();
        let n = s1.num_dofs();
        let k = pressure_kernel(n, 4);
        let mut ak = vec![0.0; n];
        s1.matrix.matvec(&k, &mut ak);
        assert!(ak.iter().all(|v| v.abs() < 1e-10));
        assert!(lanczos_min_ritz(&s1.matrix, Some(&k), 200, 3) > 1e-8);
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let (mesh, spaces, config) = setup(2, 3, 1);
        let mut p = trigonometric_2d(1.0);
        p.source = Arc::new(|_| vec![0.0, 0.0]);
        p.boundary = Arc::new(|_| vec![0.0, 0.0]);
        p.boundary_gradient = Some(Arc::new(|_| vec![0.0; 4]));
        let s = solve_stokes(&mesh, &spaces, &config, &p).unwrap();
        for v in [&s.gradient_dofs, &s.pressure_dofs, &s.velocity_dofs] {
            assert!(v.iter().all(|x| x.abs() < 1e-13));
        }
    }

    #[test]
    fn pressure_has_zero_mean() {
        let (mesh, spaces, config) = setup(2, 4, 1);
        let s = solve_stokes(&mesh, &spaces, &config, &trigonometric_2d(1.0)).unwrap();
        let mean = crate::analysis::pressure_mean(&mesh, &spaces, &s.pressure_dofs, 4).unwrap();
        assert!(mean.abs() < 1e-12, "mean {mean}");
    }

    fn exact_solution_recovered(dim: usize, n: usize, p: ProblemDefinition) {
        let (mesh, spaces, mut config) = setup(dim, n, 2);
        config.nu = p.nu;
        let s = solve_stokes(&mesh, &spaces, &config, &p).unwrap();
        let ex = p.exact.as_ref().unwrap();
        let g = spaces.tensor.interpolate(&mesh, &*ex.gradient);
        let u = spaces.vector.interpolate(&mesh, &*ex.velocity);
        let q = {
            let f = ex.pressure.clone();
            spaces.scalar.interpolate(&mesh, move |x| vec![f(x)])
        };
        assert!(max_diff(&s.gradient_dofs, &g) < 1e-8, "gradient {}", max_diff(&s.gradient_dofs, &g));
        assert!(max_diff(&s.pressure_dofs, &q) < 1e-8, "pressure {}", max_diff(&s.pressure_dofs, &q));
        assert!(max_diff(&s.velocity_dofs, &u) < 1e-8, "velocity {}", max_diff(&s.velocity_dofs, &u));
    }

    #[test]
    fn quadratic_flow_is_exact_in_2d() {
        exact_solution_recovered(2, 4, quadratic_2d(1.0));
    }

    #[test]
    fn quadratic_flow_is_exact_in_3d() {
        exact_solution_recovered(3, 2, quadratic_3d(0.5));
    }

    #[test]
    fn single_element_has_no_face_coupling() {
        let mesh = Mesh::from_cells(2, vec![[0., 0., 0.], [1., 0., 0.], [0., 1., 0.]], vec![vec![0, 1, 2]]).unwrap();
        assert!(mesh.interior_face_ids.is_empty());
        let spaces = build_spaces(&mesh, 0, 1).unwrap();
        let mut config = SolverConfig::new(2, 1).unwrap();
        config.patch_size = 1;
        // Constants only: step 1 sees the boundary term alone, step 2 the
        // boundary mass.
        let p = quadratic_2d(1.0);
        let s1 = assemble_step1(&mesh, &spaces, &config, &p).unwrap();
        assert_eq!(s1.num_dofs(), 4);
        assert_eq!(s1.matrix.get(3, 3), 0.0);
        let s2 = assemble_step2(&mesh, &spaces, &config, &p, &[0.0; 3]).unwrap();
        let perimeter: f64 = mesh.faces.iter().map(|f| f.measure / f.size).sum();
        assert!((s2.matrix.get(0, 0) - perimeter).abs() < 1e-12);
        assert_eq!(s2.matrix.get(0, 1), 0.0);
    }

    #[test]
    fn split_inverts_block_layout() {
        let g: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let p = vec![10.0, 11.0];
        let x = step1_vector(2, &g, &p);
        assert_eq!(x, vec![0., 1., 2., 10., 3., 4., 5., 11.]);
        assert_eq!(split_step1(4, &x), (g, p));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let mut c = SolverConfig::new(2, 1).unwrap();
        c.eta = 0.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.eta = 1.0;
        c.mu = f64::NAN;
        assert!(c.validate().is_err());
        c.mu = 1.0;
        c.nu = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn viscosity_mismatch_is_rejected() {
        let (mesh, spaces, config) = setup(2, 3, 1);
        let e = assemble_step1(&mesh, &spaces, &config, &trigonometric_2d(0.5)).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }
}
