//! Block-sparse symmetric matrices, a sparse Cholesky path through faer
//! and block-Jacobi preconditioned conjugate gradients.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Dof count up to which the direct factorization is used.
pub const DIRECT_DOF_LIMIT: usize = 200_000;
pub const CG_TOLERANCE: f64 = 1e-12;

/// Square block-sparse matrix with a symmetric block pattern, stored by
/// block rows. Blocks are `bs x bs`, row-major.
#[derive(Debug, Clone)]
pub struct BlockSparse {
    pub block_size: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl BlockSparse {
    /// Pattern from cliques: every pair of block indices within one clique
    /// is coupled.
    pub fn from_cliques(nblocks: usize, block_size: usize, cliques: &[Vec<usize>]) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); nblocks];
        for clique in cliques {
            for &i in clique {
                rows[i].extend_from_slice(clique);
            }
        }
        let rows: Vec<Vec<usize>> = rows
            .into_par_iter()
            .map(|mut r| {
                r.sort_unstable();
                r.dedup();
                r
            })
            .collect();
        let mut row_ptr = Vec::with_capacity(nblocks + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(rows.iter().map(Vec::len).sum());
        for r in &rows {
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len() * block_size * block_size];
        BlockSparse {
            block_size,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nblocks(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.nblocks() * self.block_size
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn block_slot(&self, i: usize, j: usize) -> usize {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        let pos = row
            .binary_search(&j)
            .unwrap_or_else(|_| panic!("block ({i}, {j}) outside the sparsity pattern"));
        self.row_ptr[i] + pos
    }

    /// Adds a dense local matrix whose rows/columns are the concatenated
    /// blocks of `blocks`.
    pub fn add_local(&mut self, blocks: &[usize], local: &DMatrix<f64>) {
        let bs = self.block_size;
        debug_assert_eq!(local.nrows(), blocks.len() * bs);
        for (a, &i) in blocks.iter().enumerate() {
            for (b, &j) in blocks.iter().enumerate() {
                let slot = self.block_slot(i, j) * bs * bs;
                for r in 0..bs {
                    for c in 0..bs {
                        self.values[slot + r * bs + c] += local[(a * bs + r, b * bs + c)];
                    }
                }
            }
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let bs = self.block_size;
        let (i, j) = (r / bs, c / bs);
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(p) => self.values[(self.row_ptr[i] + p) * bs * bs + (r % bs) * bs + c % bs],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let bs = self.block_size;
        y.par_chunks_mut(bs).enumerate().for_each(|(i, yi)| {
            yi.fill(0.0);
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                let blk = &self.values[p * bs * bs..(p + 1) * bs * bs];
                let xj = &x[j * bs..(j + 1) * bs];
                for r in 0..bs {
                    let mut s = 0.0;
                    for c in 0..bs {
                        s += blk[r * bs + c] * xj[c];
                    }
                    yi[r] += s;
                }
            }
        });
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let bs = self.block_size;
        let mut out = DMatrix::zeros(n, n);
        for i in 0..self.nblocks() {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                for r in 0..bs {
                    for c in 0..bs {
                        out[(i * bs + r, j * bs + c)] = self.values[p * bs * bs + r * bs + c];
                    }
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `max |A - A^T|`.
    pub fn asymmetry(&self) -> f64 {
        let bs = self.block_size;
        let mut worst = 0.0f64;
        for i in 0..self.nblocks() {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                let q = self.block_slot(j, i);
                for r in 0..bs {
                    for c in 0..bs {
                        let a = self.values[p * bs * bs + r * bs + c];
                        let b = self.values[q * bs * bs + c * bs + r];
                        worst = worst.max((a - b).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn diagonal_block(&self, i: usize) -> DMatrix<f64> {
        let bs = self.block_size;
        let p = self.block_slot(i, i);
        DMatrix::from_row_slice(bs, bs, &self.values[p * bs * bs..(p + 1) * bs * bs])
    }

    /// Adds `s` to one diagonal entry.
    pub fn shift_diagonal(&mut self, dof: usize, s: f64) {
        let bs = self.block_size;
        let p = self.block_slot(dof / bs, dof / bs);
        self.values[p * bs * bs + (dof % bs) * (bs + 1)] += s;
    }

    fn lower_triplets(&self) -> Vec<Triplet<usize, usize, f64>> {
        let bs = self.block_size;
        let mut out = Vec::with_capacity(self.nnz() / 2 + self.dim());
        for i in 0..self.nblocks() {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                if j > i {
                    continue;
                }
                for r in 0..bs {
                    for c in 0..bs {
                        let (gr, gc) = (i * bs + r, j * bs + c);
                        let v = self.values[p * bs * bs + r * bs + c];
                        if gr >= gc && v != 0.0 {
                            out.push(Triplet::new(gr, gc, v));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Sparse Cholesky factorization of an SPD block matrix.
pub fn cholesky_solve(a: &BlockSparse, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.dim();
    let trips = a.lower_triplets();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
        .map_err(|e| Error::Setup(format!("sparse matrix construction failed: {e:?}")))?;
    drop(trips);
    let llt = mat
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Setup(format!("Cholesky factorization failed: {e:?}")))?;
    let b = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
    let x = llt.solve(&b);
    Ok((0..n).map(|i| x[(i, 0)]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Inverse diagonal blocks; falls back to the scalar diagonal when a block
/// is not positive definite.
pub struct BlockJacobi {
    bs: usize,
    inverses: Vec<f64>,
}

impl BlockJacobi {
    pub fn new(a: &BlockSparse) -> Self {
        let bs = a.block_size;
        let inverses = (0..a.nblocks())
            .into_par_iter()
            .flat_map_iter(|i| {
                let d = a.diagonal_block(i);
                let inv = match d.clone().cholesky() {
                    Some(ch) => ch.inverse(),
                    None => DMatrix::from_diagonal(&DVector::from_fn(bs, |k, _| {
                        let v = d[(k, k)];
                        if v > 0.0 {
                            1.0 / v
                        } else {
                            1.0
                        }
                    })),
                };
                let mut row_major = Vec::with_capacity(bs * bs);
                for r in 0..bs {
                    for c in 0..bs {
                        row_major.push(inv[(r, c)]);
                    }
                }
                row_major
            })
            .collect();
        BlockJacobi { bs, inverses }
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let bs = self.bs;
        z.par_chunks_mut(bs).enumerate().for_each(|(i, zi)| {
            let blk = &self.inverses[i * bs * bs..(i + 1) * bs * bs];
            let ri = &r[i * bs..(i + 1) * bs];
            for a in 0..bs {
                zi[a] = (0..bs).map(|b| blk[a * bs + b] * ri[b]).sum();
            }
        });
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Fixed-size chunks keep the reduction order independent of threads.
    a.par_chunks(4096)
        .zip(b.par_chunks(4096))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// Preconditioned CG from a zero initial guess. Works on consistent
/// semidefinite systems as well.
pub fn pcg(a: &BlockSparse, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, CgReport)> {
    let n = a.dim();
    let pre = BlockJacobi::new(a);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok((
            x,
            CgReport {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = 1.0;
    for it in 1..=max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Setup(format!("CG breakdown at iteration {it}: p^T A p = {pap:e}")));
        }
        let alpha = rz / pap;
        x.par_iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
        rel = dot(&r, &r).sqrt() / bnorm;
        if it % 500 == 0 {
            debug!("CG iteration {it}: relative residual {rel:.3e}");
        }
        if rel <= tol {
            return Ok((
                x,
                CgReport {
                    iterations: it,
                    relative_residual: rel,
                },
            ));
        }
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: rel,
    })
}

/// Solves an SPD system, direct up to [`DIRECT_DOF_LIMIT`] unknowns and by
/// PCG above.
pub fn solve_spd(a: &BlockSparse, b: &[f64]) -> Result<Vec<f64>> {
    if a.dim() <= DIRECT_DOF_LIMIT {
        cholesky_solve(a, b)
    } else {
        let (x, rep) = pcg(a, b, CG_TOLERANCE, 20 * a.dim())?;
        info!(
            "CG converged in {} iterations, relative residual {:.2e}",
            rep.iterations, rep.relative_residual
        );
        Ok(x)
    }
}

/// Smallest Ritz value of `A` restricted to the orthogonal complement of
/// `deflate` (normalized internally), after `steps` Lanczos steps with full
/// reorthogonalization.
pub fn lanczos_min_ritz(a: &BlockSparse, deflate: Option<&[f64]>, steps: usize, seed: u64) -> f64 {
    let n = a.dim();
    let k = deflate.map(|d| {
        let s = dot(d, d).sqrt();
        d.iter().map(|v| v / s).collect::<Vec<f64>>()
    });
    let project = |v: &mut Vec<f64>| {
        if let Some(k) = &k {
            let c = dot(v, k);
            for (vi, ki) in v.iter_mut().zip(k) {
                *vi -= c * ki;
            }
        }
    };
    // Deterministic pseudo-random start.
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
        .collect();
    project(&mut v);
    let s = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= s);
    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    for j in 0..steps.min(n) {
        a.matvec(&basis[j], &mut w);
        let mut wv = w.clone();
        project(&mut wv);
        let aj = dot(&wv, &basis[j]);
        alpha.push(aj);
        for q in &basis {
            let c = dot(&wv, q);
            for (x, qi) in wv.iter_mut().zip(q) {
                *x -= c * qi;
            }
        }
        project(&mut wv);
        let bj = dot(&wv, &wv).sqrt();
        if bj < 1e-14 || j + 1 == steps.min(n) {
            break;
        }
        beta.push(bj);
        basis.push(wv.iter().map(|x| x / bj).collect());
    }
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    t.symmetric_eigenvalues().min()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1D Laplacian-like block matrix from chained cliques.
    fn chain(nb: usize, bs: usize, shift: f64) -> BlockSparse {
        let cliques: Vec<Vec<usize>> = (0..nb - 1).map(|i| vec![i, i + 1]).collect();
        let mut a = BlockSparse::from_cliques(nb, bs, &cliques);
        for c in &cliques {
            let mut local = DMatrix::zeros(2 * bs, 2 * bs);
            for r in 0..bs {
                local[(r, r)] = 1.0 + shift;
                local[(bs + r, bs + r)] = 1.0 + shift;
                local[(r, bs + r)] = -1.0;
                local[(bs + r, r)] = -1.0;
            }
            if bs > 1 {
                local[(0, 1)] += 0.1;
                local[(1, 0)] += 0.1;
            }
            a.add_local(c, &local);
        }
        a
    }

    #[test]
    fn direct_and_cg_agree_with_dense() {
        let a = chain(30, 3, 0.3);
        let n = a.dim();
        let b: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let dense = a.to_dense();
        let want = dense.clone().lu().solve(&DVector::from_column_slice(&b)).unwrap();
        assert!(dense.symmetric_eigenvalues().min() > 0.0);
        let x = cholesky_solve(&a, &b).unwrap();
        let (y, rep) = pcg(&a, &b, 1e-13, 1000).unwrap();
        assert!(rep.relative_residual <= 1e-13);
        for i in 0..n {
            assert!((x[i] - want[i]).abs() < 1e-9 * want.amax());
            assert!((y[i] - want[i]).abs() < 1e-9 * want.amax());
        }
        assert!(a.asymmetry() == 0.0);
    }

    #[test]
    fn matvec_matches_dense() {
        let a = chain(10, 2, 0.3);
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.5 - 3.0).collect();
        let mut y = vec![0.0; 20];
        a.matvec(&x, &mut y);
        let want = a.to_dense() * DVector::from_column_slice(&x);
        for i in 0..20 {
            assert!((y[i] - want[i]).abs() < 1e-13);
            assert_eq!(a.get(i, i), a.to_dense()[(i, i)]);
        }
    }

    #[test]
    fn cg_reports_nonconvergence() {
        let a = chain(50, 1, 0.0);
        let b = vec![1.0; 50];
        assert!(matches!(pcg(&a, &b, 1e-14, 3), Err(Error::NonConvergence { iterations: 3, .. })));
    }

    #[test]
    fn lanczos_finds_smallest_eigenvalue_of_small_matrix() {
        let a = chain(8, 1, 0.2);
        let want = a.to_dense().symmetric_eigenvalues().min();
        let got = lanczos_min_ritz(&a, None, 20, 1);
        assert!((got - want).abs() < 1e-8);
        // The pure chain has the constant vector as its kernel.
        let a0 = chain(8, 1, 0.0);
        let ones = vec![1.0; 8];
        let with = lanczos_min_ritz(&a0, Some(&ones), 20, 1);
        assert!(with > 1e-3);
    }

    #[test]
    fn not_positive_definite_is_setup_error() {
        let mut a = chain(4, 1, 0.0);
        a.shift_diagonal(0, -5.0);
        assert!(matches!(cholesky_solve(&a, &[1.0; 4]), Err(Error::Setup(_))));
    }
}
