//! Patch reconstruction operators: per element, a coefficient matrix taking
//! the nodal values of the patch members to the coefficients of the local
//! least-squares polynomial.
//!
//! The interpolation constraint at the owner is eliminated by substitution:
//! the constant basis functions take the owner's nodal value, the remaining
//! coefficients solve an unconstrained fit over the other members. The
//! stored matrix has the block form `[I 0; -M [I..I], M]`.

use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lstsq::PivotedQr;
use crate::mesh::{Mesh, Point};
use crate::patch::{build_patch, enlarged_patch, ElementPatch};
use crate::poly::{basis_for, tensor_param_entries, tensor_param_to_full, BasisKind, LocalFrame, PolyBasis};

const RANK_TOL: f64 = 1e-10;
pub const MAX_ENLARGEMENTS: usize = 3;

#[derive(Debug, Clone)]
pub struct LocalReconstruction {
    pub owner: usize,
    pub members: Vec<usize>,
    pub frame: LocalFrame,
    /// Basis functions x (members * nodal values per member), member-major.
    pub coefficients: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct ReconstructionOperator {
    pub kind: BasisKind,
    pub dim: usize,
    pub order: usize,
    pub basis: Arc<PolyBasis>,
    pub locals: Vec<LocalReconstruction>,
}

/// Values (and optionally first derivatives) of the global basis functions
/// supported on one element, at one point.
#[derive(Debug, Clone)]
pub struct LocalEval {
    /// Component x local dof.
    pub values: DMatrix<f64>,
    /// Per physical axis, component x local dof.
    pub gradients: Vec<DMatrix<f64>>,
}

/// Outcome of a rank check on one patch.
enum LocalFit {
    Ok(LocalReconstruction),
    Deficient { rank: usize, expected: usize },
}

fn fit_local(mesh: &Mesh, basis: &PolyBasis, patch: &ElementPatch) -> LocalFit {
    let dim = basis.dim;
    let owner = patch.owner;
    let frame = LocalFrame::new(mesh.elements[owner].barycenter, mesh.elements[owner].diameter);
    let nc = basis.num_constants();
    let nf = basis.count();
    let nv = basis.kind.nodal_values(dim);
    let ncomp = basis.kind.components(dim);
    let n = patch.members.len();
    let free = nf - nc;

    let mut coefficients = DMatrix::zeros(nf, n * nv);
    for c in 0..nc {
        coefficients[(c, c)] = 1.0;
    }
    if free == 0 {
        return LocalFit::Ok(LocalReconstruction {
            owner,
            members: patch.members.clone(),
            frame,
            coefficients,
        });
    }

    let rows = (n - 1) * ncomp;
    let mut a = DMatrix::zeros(rows, free);
    let tables = basis.tables();
    for (i, x) in patch.collocation_points.iter().enumerate().skip(1) {
        let mono = basis.monomials.evaluate(&frame.local(x));
        for c in 0..ncomp {
            let vals = &tables.values[c] * DVector::from_column_slice(&mono);
            for f in 0..free {
                a[((i - 1) * ncomp + c, f)] = vals[nc + f];
            }
        }
    }
    let qr = PivotedQr::new(&a, RANK_TOL);
    if !qr.is_full_rank() {
        return LocalFit::Deficient {
            rank: qr.rank(),
            expected: free,
        };
    }
    let p = match basis.kind {
        BasisKind::CurlFreeTraceFreeTensor => tensor_param_to_full(dim),
        _ => DMatrix::identity(ncomp, nv),
    };
    let mut b = DMatrix::zeros(rows, (n - 1) * nv);
    for i in 0..n - 1 {
        b.view_mut((i * ncomp, i * nv), (ncomp, nv)).copy_from(&p);
    }
    let m = qr.solve(&b);
    for i in 1..n {
        for c in 0..nv {
            for f in 0..free {
                let v = m[(f, (i - 1) * nv + c)];
                coefficients[(nc + f, i * nv + c)] = v;
                coefficients[(nc + f, c)] -= v;
            }
        }
    }
    LocalFit::Ok(LocalReconstruction {
        owner,
        members: patch.members.clone(),
        frame,
        coefficients,
    })
}

fn operator_from(basis: Arc<PolyBasis>, locals: Vec<LocalReconstruction>) -> ReconstructionOperator {
    ReconstructionOperator {
        kind: basis.kind,
        dim: basis.dim,
        order: basis.order,
        basis,
        locals,
    }
}

fn build_kind(mesh: &Mesh, patches: &[ElementPatch], kind: BasisKind, m: usize) -> Result<ReconstructionOperator> {
    let basis = basis_for(kind, mesh.dim, m)?;
    let locals = patches
        .par_iter()
        .map(|p| match fit_local(mesh, &basis, p) {
            LocalFit::Ok(l) => Ok(l),
            LocalFit::Deficient { rank, expected } => Err(Error::Unisolvence {
                element: p.owner,
                kind: kind.name(),
                rank,
                expected,
            }),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(operator_from(basis, locals))
}

pub fn build_scalar_reconstruction(mesh: &Mesh, patches: &[ElementPatch], m: usize) -> Result<ReconstructionOperator> {
    build_kind(mesh, patches, BasisKind::Scalar, m)
}

pub fn build_vector_reconstruction(mesh: &Mesh, patches: &[ElementPatch], m: usize) -> Result<ReconstructionOperator> {
    build_kind(mesh, patches, BasisKind::DivFreeVector, m)
}

pub fn build_tensor_reconstruction(mesh: &Mesh, patches: &[ElementPatch], m: usize) -> Result<ReconstructionOperator> {
    build_kind(mesh, patches, BasisKind::CurlFreeTraceFreeTensor, m)
}

/// Patches and the three reconstruction operators on one shared set of
/// patches.
#[derive(Debug, Clone)]
pub struct Spaces {
    pub order: usize,
    pub patch_size: usize,
    pub patches: Vec<ElementPatch>,
    pub scalar: ReconstructionOperator,
    pub vector: ReconstructionOperator,
    pub tensor: ReconstructionOperator,
    /// Elements whose patch had to be enlarged past `#S`.
    pub enlarged: Vec<usize>,
}

/// Builds patches and all three operators. A patch failing the rank check
/// for any of the three bases is replaced by the untruncated neighbourhood
/// after one more growth round, up to [`MAX_ENLARGEMENTS`] times.
pub fn build_spaces(mesh: &Mesh, m: usize, patch_size: usize) -> Result<Spaces> {
    let n = mesh.num_elements();
    if patch_size == 0 || patch_size > n {
        return Err(Error::Config(format!(
            "patch size {patch_size} must lie in 1..={n} for this mesh"
        )));
    }
    let bases = [
        basis_for(BasisKind::Scalar, mesh.dim, m)?,
        basis_for(BasisKind::DivFreeVector, mesh.dim, m)?,
        basis_for(BasisKind::CurlFreeTraceFreeTensor, mesh.dim, m)?,
    ];
    type Fitted = (ElementPatch, [LocalReconstruction; 3], bool);
    let fitted = (0..n)
        .into_par_iter()
        .map(|k| -> Result<Fitted> {
            let mut patch = build_patch(mesh, k, patch_size)?;
            let mut round = 0;
            loop {
                let fits = [
                    fit_local(mesh, &bases[0], &patch),
                    fit_local(mesh, &bases[1], &patch),
                    fit_local(mesh, &bases[2], &patch),
                ];
                let failure = fits.iter().zip(&bases).find_map(|(f, b)| match f {
                    LocalFit::Deficient { rank, expected } => Some((b.kind, *rank, *expected)),
                    LocalFit::Ok(_) => None,
                });
                match failure {
                    None => {
                        let [a, b, c] = fits.map(|f| match f {
                            LocalFit::Ok(l) => l,
                            LocalFit::Deficient { .. } => unreachable!(),
                        });
                        return Ok((patch, [a, b, c], round > 0));
                    }
                    Some((kind, rank, expected)) => {
                        if round == MAX_ENLARGEMENTS {
                            return Err(Error::Unisolvence {
                                element: k,
                                kind: kind.name(),
                                rank,
                                expected,
                            });
                        }
                        round += 1;
                        let grown = enlarged_patch(mesh, k, patch_size, round)?;
                        if grown.len() == patch.len() && round > 1 {
                            return Err(Error::Unisolvence {
                                element: k,
                                kind: kind.name(),
                                rank,
                                expected,
                            });
                        }
                        patch = grown;
                    }
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut patches = Vec::with_capacity(n);
    let mut locals: [Vec<LocalReconstruction>; 3] = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    let mut enlarged = Vec::new();
    for (k, (p, ls, grew)) in fitted.into_iter().enumerate() {
        if grew {
            enlarged.push(k);
        }
        patches.push(p);
        for (dst, l) in locals.iter_mut().zip(ls) {
            dst.push(l);
        }
    }
    if !enlarged.is_empty() {
        warn!(
            "{} patch(es) enlarged past #S = {patch_size} to restore unisolvence (first: element {})",
            enlarged.len(),
            enlarged[0]
        );
    }
    let [ls, lv, lt] = locals;
    let [bs, bv, bt] = bases;
    Ok(Spaces {
        order: m,
        patch_size,
        patches,
        scalar: operator_from(bs, ls),
        vector: operator_from(bv, lv),
        tensor: operator_from(bt, lt),
        enlarged,
    })
}

impl ReconstructionOperator {
    pub fn nodal_values(&self) -> usize {
        self.kind.nodal_values(self.dim)
    }

    pub fn components(&self) -> usize {
        self.kind.components(self.dim)
    }

    pub fn num_elements(&self) -> usize {
        self.locals.len()
    }

    pub fn num_dofs(&self) -> usize {
        self.locals.len() * self.nodal_values()
    }

    /// Global dof indices of the basis functions living on element `k`,
    /// in the column order of its coefficient matrix.
    pub fn local_dofs(&self, k: usize) -> Vec<usize> {
        let nv = self.nodal_values();
        self.locals[k]
            .members
            .iter()
            .flat_map(|&j| (0..nv).map(move |c| j * nv + c))
            .collect()
    }

    pub fn evaluate(&self, k: usize, x: &Point, with_gradient: bool) -> LocalEval {
        let local = &self.locals[k];
        let basis = &*self.basis;
        let tables = basis.tables();
        let mono = DVector::from_column_slice(&basis.monomials.evaluate(&local.frame.local(x)));
        let ct = local.coefficients.transpose();
        let ncomp = self.components();
        let ndof = local.coefficients.ncols();
        let mut values = DMatrix::zeros(ncomp, ndof);
        for c in 0..ncomp {
            let fv = &tables.values[c] * &mono;
            values.row_mut(c).copy_from(&(&ct * fv).transpose());
        }
        let mut gradients = Vec::new();
        if with_gradient {
            let inv = 1.0 / local.frame.scale;
            for a in 0..self.dim {
                let mut g = DMatrix::zeros(ncomp, ndof);
                for c in 0..ncomp {
                    let fv = &tables.derivatives[c][a] * &mono;
                    g.row_mut(c).copy_from(&(&ct * fv).transpose());
                }
                g *= inv;
                gradients.push(g);
            }
        }
        LocalEval { values, gradients }
    }

    /// Local nodal vector of element `k` gathered from a global one.
    pub fn gather(&self, k: usize, global: &[f64]) -> DVector<f64> {
        let dofs = self.local_dofs(k);
        DVector::from_iterator(dofs.len(), dofs.iter().map(|&i| global[i]))
    }

    /// Coefficients of the reconstructed polynomial on element `k`.
    pub fn coefficients(&self, k: usize, global: &[f64]) -> DVector<f64> {
        &self.locals[k].coefficients * self.gather(k, global)
    }

    /// Component values of the reconstructed field on element `k`.
    pub fn field_value(&self, k: usize, x: &Point, global: &[f64]) -> Vec<f64> {
        self.field_at(k, x, global, false).0
    }

    /// Component values and gradients (`[axis][component]`).
    pub fn field_value_gradient(&self, k: usize, x: &Point, global: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        self.field_at(k, x, global, true)
    }

    fn field_at(&self, k: usize, x: &Point, global: &[f64], with_gradient: bool) -> (Vec<f64>, Vec<Vec<f64>>) {
        let local = &self.locals[k];
        let tables = self.basis.tables();
        let a = self.coefficients(k, global);
        let mono = DVector::from_column_slice(&self.basis.monomials.evaluate(&local.frame.local(x)));
        let ncomp = self.components();
        let apply = |t: &DMatrix<f64>| a.dot(&(t * &mono));
        let values = (0..ncomp).map(|c| apply(&tables.values[c])).collect();
        let mut grads = Vec::new();
        if with_gradient {
            let inv = 1.0 / local.frame.scale;
            for ax in 0..self.dim {
                grads.push((0..ncomp).map(|c| inv * apply(&tables.derivatives[c][ax])).collect());
            }
        }
        (values, grads)
    }

    /// Nodal values from a pointwise field sampled at the barycenters.
    /// `field` returns the full components (`d*d` row-major for tensors).
    pub fn interpolate(&self, mesh: &Mesh, field: impl Fn(&Point) -> Vec<f64> + Sync) -> Vec<f64> {
        let nv = self.nodal_values();
        let mut out = vec![0.0; self.num_dofs()];
        let entries = tensor_param_entries(self.dim);
        for (k, chunk) in out.chunks_mut(nv).enumerate() {
            let v = field(&mesh.elements[k].barycenter);
            match self.kind {
                BasisKind::CurlFreeTraceFreeTensor => {
                    for (slot, &(i, j)) in chunk.iter_mut().zip(&entries) {
                        *slot = v[i * self.dim + j];
                    }
                }
                _ => chunk.copy_from_slice(&v[..nv]),
            }
        }
        out
    }
}
