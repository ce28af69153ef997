//! Error measures, least-squares functionals and convergence orders.
//!
//! Everything here evaluates reconstructed fields pointwise through the
//! reconstruction operators, independently of the assembled matrices.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::assembly::{tangential, SolverConfig, StokesSolution};
use crate::error::{Error, Result};
use crate::mesh::{Face, Mesh, Point};
use crate::problems::{ExactSolution, ProblemDefinition};
use crate::quadrature::{element_rule, face_rule};
use crate::reconstruction::{ReconstructionOperator, Spaces};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub h: f64,
    pub elements: usize,
    pub energy_up: f64,
    pub l2_gradient: f64,
    pub l2_pressure: f64,
    pub energy_u: f64,
    pub l2_velocity: f64,
    /// Step-1 and step-2 unknowns.
    pub dofs: [usize; 2],
}

impl ErrorReport {
    pub const MEASURES: [&'static str; 5] = ["energy_Up", "l2_U", "l2_p", "energy_u", "l2_u"];

    pub fn measures(&self) -> [f64; 5] {
        [self.energy_up, self.l2_gradient, self.l2_pressure, self.energy_u, self.l2_velocity]
    }
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Row-wise divergence from `[axis][component]` gradients of a tensor.
fn tensor_divergence(dim: usize, grads: &[Vec<f64>]) -> Vec<f64> {
    (0..dim).map(|i| (0..dim).map(|j| grads[j][i * dim + j]).sum()).collect()
}

/// Sum over elements of a per-element quadrature value, in element order.
fn sum_elements(mesh: &Mesh, deg: usize, f: impl Fn(usize, &Point) -> f64 + Sync) -> Result<f64> {
    let parts = (0..mesh.num_elements())
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let rule = element_rule(mesh.dim, &mesh.elements[k], deg)?;
            Ok(rule.points.iter().zip(&rule.weights).map(|(x, w)| w * f(k, x)).sum())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum())
}

fn sum_faces(mesh: &Mesh, ids: &[usize], deg: usize, f: impl Fn(&Face, &Point) -> f64 + Sync) -> Result<f64> {
    let parts = ids
        .par_iter()
        .map(|&id| -> Result<f64> {
            let face = &mesh.faces[id];
            let rule = face_rule(mesh.dim, face, deg)?;
            Ok(rule.points.iter().zip(&rule.weights).map(|(x, w)| w * f(face, x)).sum::<f64>() / face.size)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum())
}

fn jump(op: &ReconstructionOperator, face: &Face, x: &Point, dofs: &[f64]) -> f64 {
    let a = op.field_value(face.element_ids[0], x, dofs);
    let b = op.field_value(face.element_ids[1], x, dofs);
    sq(&diff(&a, &b))
}

/// `|||U - U_h|||`.
pub fn energy_norm_gradient(mesh: &Mesh, spaces: &Spaces, gradient_dofs: &[f64], exact: &ExactSolution, deg: usize) -> Result<f64> {
    let d = mesh.dim;
    let op = &spaces.tensor;
    let vol = sum_elements(mesh, deg, |k, x| {
        let (_, g) = op.field_value_gradient(k, x, gradient_dofs);
        sq(&diff(&(exact.laplacian)(x), &tensor_divergence(d, &g)))
    })?;
    let int = sum_faces(mesh, &mesh.interior_face_ids, deg, |f, x| jump(op, f, x, gradient_dofs))?;
    let bdry = sum_faces(mesh, &mesh.boundary_face_ids, deg, |f, x| {
        let v = op.field_value(f.element_ids[0], x, gradient_dofs);
        sq(&tangential(d, &f.normal, &diff(&(exact.gradient)(x), &v)))
    })?;
    Ok((vol + int + bdry).sqrt())
}

/// `|||p - p_h|||`.
pub fn energy_norm_pressure(mesh: &Mesh, spaces: &Spaces, pressure_dofs: &[f64], exact: &ExactSolution, deg: usize) -> Result<f64> {
    let op = &spaces.scalar;
    let vol = sum_elements(mesh, deg, |k, x| {
        let (_, g) = op.field_value_gradient(k, x, pressure_dofs);
        let gh: Vec<f64> = g.iter().map(|a| a[0]).collect();
        sq(&diff(&(exact.pressure_gradient)(x), &gh))
    })?;
    let int = sum_faces(mesh, &mesh.interior_face_ids, deg, |f, x| jump(op, f, x, pressure_dofs))?;
    Ok((vol + int).sqrt())
}

/// `|||U - U_h||| + |||p - p_h|||`.
pub fn energy_norm_up(mesh: &Mesh, spaces: &Spaces, solution: &StokesSolution, exact: &ExactSolution, deg: usize) -> Result<f64> {
    Ok(energy_norm_gradient(mesh, spaces, &solution.gradient_dofs, exact, deg)?
        + energy_norm_pressure(mesh, spaces, &solution.pressure_dofs, exact, deg)?)
}

/// `|||u - u_h|||`.
pub fn energy_norm_u(mesh: &Mesh, spaces: &Spaces, velocity_dofs: &[f64], exact: &ExactSolution, deg: usize) -> Result<f64> {
    let d = mesh.dim;
    let op = &spaces.vector;
    let vol = sum_elements(mesh, deg, |k, x| {
        let (_, g) = op.field_value_gradient(k, x, velocity_dofs);
        let ge = (exact.gradient)(x);
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += (ge[i * d + j] - g[j][i]).powi(2);
            }
        }
        s
    })?;
    let int = sum_faces(mesh, &mesh.interior_face_ids, deg, |f, x| jump(op, f, x, velocity_dofs))?;
    let bdry = sum_faces(mesh, &mesh.boundary_face_ids, deg, |f, x| {
        let v = op.field_value(f.element_ids[0], x, velocity_dofs);
        sq(&diff(&(exact.velocity)(x), &v))
    })?;
    Ok((vol + int + bdry).sqrt())
}

/// `||e - e_h||_{L^2}` for one reconstructed field; `exact` returns the
/// full components (`d*d` for tensors).
pub fn l2_error(
    mesh: &Mesh,
    op: &ReconstructionOperator,
    dofs: &[f64],
    exact: impl Fn(&Point) -> Vec<f64> + Sync,
    deg: usize,
) -> Result<f64> {
    Ok(sum_elements(mesh, deg, |k, x| sq(&diff(&exact(x), &op.field_value(k, x, dofs))))?.sqrt())
}

pub fn error_report(
    mesh: &Mesh,
    spaces: &Spaces,
    solution: &StokesSolution,
    exact: &ExactSolution,
    deg: usize,
) -> Result<ErrorReport> {
    let p = exact.pressure.clone();
    Ok(ErrorReport {
        h: mesh.mesh_size,
        elements: mesh.num_elements(),
        energy_up: energy_norm_up(mesh, spaces, solution, exact, deg)?,
        l2_gradient: l2_error(mesh, &spaces.tensor, &solution.gradient_dofs, &*exact.gradient, deg)?,
        l2_pressure: l2_error(mesh, &spaces.scalar, &solution.pressure_dofs, move |x| vec![p(x)], deg)?,
        energy_u: energy_norm_u(mesh, spaces, &solution.velocity_dofs, exact, deg)?,
        l2_velocity: l2_error(mesh, &spaces.vector, &solution.velocity_dofs, &*exact.velocity, deg)?,
        dofs: [spaces.tensor.num_dofs() + spaces.scalar.num_dofs(), spaces.vector.num_dofs()],
    })
}

/// `J_h^p(V_h, q_h)` evaluated by quadrature.
pub fn functional_p(
    mesh: &Mesh,
    spaces: &Spaces,
    config: &SolverConfig,
    problem: &ProblemDefinition,
    gradient_dofs: &[f64],
    pressure_dofs: &[f64],
) -> Result<f64> {
    let d = mesh.dim;
    let deg = config.quadrature_degree;
    let grad_g = problem
        .boundary_gradient
        .as_ref()
        .ok_or_else(|| Error::Config("functional needs the gradient of the boundary data".into()))?;
    let vol = sum_elements(mesh, deg, |k, x| {
        let (_, gv) = spaces.tensor.field_value_gradient(k, x, gradient_dofs);
        let (_, gq) = spaces.scalar.field_value_gradient(k, x, pressure_dofs);
        let div = tensor_divergence(d, &gv);
        let f = (problem.source)(x);
        (0..d).map(|i| (-config.nu * div[i] + gq[i][0] - f[i]).powi(2)).sum()
    })?;
    let int = sum_faces(mesh, &mesh.interior_face_ids, deg, |f, x| {
        jump(&spaces.scalar, f, x, pressure_dofs) + jump(&spaces.tensor, f, x, gradient_dofs)
    })?;
    let bdry = sum_faces(mesh, &mesh.boundary_face_ids, deg, |f, x| {
        let v = spaces.tensor.field_value(f.element_ids[0], x, gradient_dofs);
        sq(&tangential(d, &f.normal, &diff(&v, &grad_g(x))))
    })?;
    Ok(vol + config.eta * (int + bdry))
}

/// `J_h^u(v_h)` for a given step-1 gradient.
pub fn functional_u(
    mesh: &Mesh,
    spaces: &Spaces,
    config: &SolverConfig,
    problem: &ProblemDefinition,
    gradient_dofs: &[f64],
    velocity_dofs: &[f64],
) -> Result<f64> {
    let d = mesh.dim;
    let deg = config.quadrature_degree;
    let vol = sum_elements(mesh, deg, |k, x| {
        let (_, g) = spaces.vector.field_value_gradient(k, x, velocity_dofs);
        let uh = spaces.tensor.field_value(k, x, gradient_dofs);
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += (g[j][i] - uh[i * d + j]).powi(2);
            }
        }
        s
    })?;
    let int = sum_faces(mesh, &mesh.interior_face_ids, deg, |f, x| jump(&spaces.vector, f, x, velocity_dofs))?;
    let bdry = sum_faces(mesh, &mesh.boundary_face_ids, deg, |f, x| {
        let v = spaces.vector.field_value(f.element_ids[0], x, velocity_dofs);
        sq(&diff(&v, &(problem.boundary)(x)))
    })?;
    Ok(vol + config.mu * (int + bdry))
}

/// Largest `|div u_h|` and largest gradient entry over all quadrature points.
pub fn divergence_extrema(mesh: &Mesh, spaces: &Spaces, velocity_dofs: &[f64], deg: usize) -> Result<(f64, f64)> {
    let d = mesh.dim;
    let parts = (0..mesh.num_elements())
        .into_par_iter()
        .map(|k| -> Result<(f64, f64)> {
            let rule = element_rule(d, &mesh.elements[k], deg)?;
            let mut out = (0.0f64, 0.0f64);
            for x in &rule.points {
                let (_, g) = spaces.vector.field_value_gradient(k, x, velocity_dofs);
                let div: f64 = (0..d).map(|i| g[i][i]).sum();
                out.0 = out.0.max(div.abs());
                for row in &g {
                    for v in row {
                        out.1 = out.1.max(v.abs());
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.iter().fold((0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1))))
}

/// `integral of p_h`.
pub fn pressure_mean(mesh: &Mesh, spaces: &Spaces, pressure_dofs: &[f64], deg: usize) -> Result<f64> {
    sum_elements(mesh, deg, |k, x| spaces.scalar.field_value(k, x, pressure_dofs)[0])
}

/// Orders between consecutive rows, `log(e0/e1) / log(h0/h1)`.
pub fn consecutive_orders(h: &[f64], e: &[f64]) -> Result<Vec<f64>> {
    check_sequence(h, e)?;
    Ok(h.windows(2)
        .zip(e.windows(2))
        .map(|(hw, ew)| (ew[0] / ew[1]).ln() / (hw[0] / hw[1]).ln())
        .collect())
}

/// Least-squares slope of `log e` against `log h`.
pub fn fitted_order(h: &[f64], e: &[f64]) -> Result<f64> {
    check_sequence(h, e)?;
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

fn check_sequence(h: &[f64], e: &[f64]) -> Result<()> {
    if h.len() != e.len() || h.len() < 2 {
        return Err(Error::Input("convergence orders need at least two rows".into()));
    }
    if h.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Input("mesh sizes must be strictly decreasing".into()));
    }
    Ok(())
}

/// Per measure: consecutive orders and the fitted slope.
pub fn convergence_orders(reports: &[ErrorReport]) -> Result<Vec<(Vec<f64>, f64)>> {
    let h: Vec<f64> = reports.iter().map(|r| r.h).collect();
    (0..5)
        .map(|m| {
            let e: Vec<f64> = reports.iter().map(|r| r.measures()[m]).collect();
            Ok((consecutive_orders(&h, &e)?, fitted_order(&h, &e)?))
        })
        .collect()
}

/// Recovers `A` and `b` of a quadratic `J(x) = x^T A x - 2 b^T x + c` from
/// point evaluations, by polarization.
pub fn polarize(n: usize, j: impl Fn(&[f64]) -> f64) -> (DMatrix<f64>, Vec<f64>) {
    let unit = |i: usize, s: f64| {
        let mut e = vec![0.0; n];
        e[i] = s;
        e
    };
    let c = j(&vec![0.0; n]);
    let plus: Vec<f64> = (0..n).map(|i| j(&unit(i, 1.0))).collect();
    let minus: Vec<f64> = (0..n).map(|i| j(&unit(i, -1.0))).collect();
    let b = (0..n).map(|i| (minus[i] - plus[i]) / 4.0).collect();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = (plus[i] + minus[i]) / 2.0 - c;
        for k in 0..i {
            let mut e = unit(i, 1.0);
            e[k] = 1.0;
            let v = (j(&e) - plus[i] - plus[k] + c) / 2.0;
            a[(i, k)] = v;
            a[(k, i)] = v;
        }
    }
    (a, b)
}
