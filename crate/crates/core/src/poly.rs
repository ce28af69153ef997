//! Polynomial bases in local (shifted, scaled) coordinates: full scalar
//! monomials, divergence-free vector fields and curl-free trace-free tensors.
//!
//! Every basis function is stored as dense per-component coefficient
//! vectors over a graded-lex monomial table. Coefficients are small integers,
//! so divergence / curl / trace identities can be checked exactly.
//!
//! Tensor convention: `U[i][j] = d u_i / d x_j`, i.e. row `i` is the gradient
//! of the `i`-th velocity component. Divergence and curl act row-wise.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::Point;

/// Graded-lex table of exponent tuples of total degree `<= degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialSet {
    pub dim: usize,
    pub degree: usize,
    pub exponents: Vec<[u32; 3]>,
}

impl MonomialSet {
    pub fn new(dim: usize, degree: usize) -> Self {
        let mut exponents = Vec::new();
        for s in 0..=degree as u32 {
            match dim {
                1 => exponents.push([s, 0, 0]),
                2 => {
                    for a in (0..=s).rev() {
                        exponents.push([a, s - a, 0]);
                    }
                }
                3 => {
                    for a in (0..=s).rev() {
                        for b in (0..=s - a).rev() {
                            exponents.push([a, b, s - a - b]);
                        }
                    }
                }
                _ => panic!("monomials in dimension {dim}"),
            }
        }
        MonomialSet {
            dim,
            degree,
            exponents,
        }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn index_of(&self, e: [u32; 3]) -> Option<usize> {
        self.exponents.iter().position(|x| *x == e)
    }

    /// Values of all monomials at local coordinates `xi`.
    pub fn evaluate_into(&self, xi: &[f64; 3], out: &mut [f64]) {
        let d = self.degree;
        let mut pw = [[1.0f64; 16]; 3];
        assert!(d < 16);
        for a in 0..self.dim {
            for k in 1..=d {
                pw[a][k] = pw[a][k - 1] * xi[a];
            }
        }
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            *o = pw[0][e[0] as usize] * pw[1][e[1] as usize] * pw[2][e[2] as usize];
        }
    }

    pub fn evaluate(&self, xi: &[f64; 3]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.evaluate_into(xi, &mut out);
        out
    }
}

/// Polynomial given by coefficients over a [`MonomialSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn zero(set: &MonomialSet) -> Self {
        Polynomial {
            coeffs: vec![0.0; set.len()],
        }
    }

    pub fn monomial(set: &MonomialSet, e: [u32; 3], c: f64) -> Self {
        let mut p = Self::zero(set);
        let i = set
            .index_of(e)
            .unwrap_or_else(|| panic!("monomial {e:?} outside degree {}", set.degree));
        p.coeffs[i] = c;
        p
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn derivative(&self, set: &MonomialSet, axis: usize) -> Polynomial {
        let mut out = Self::zero(set);
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mut e = set.exponents[i];
            if e[axis] == 0 {
                continue;
            }
            let f = e[axis] as f64;
            e[axis] -= 1;
            out.coeffs[set.index_of(e).unwrap()] += f * c;
        }
        out
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        Polynomial {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Polynomial {
            coeffs: self.coeffs.iter().map(|a| a * s).collect(),
        }
    }

    pub fn evaluate(&self, set: &MonomialSet, xi: &[f64; 3]) -> f64 {
        set.evaluate(xi).iter().zip(&self.coeffs).map(|(m, c)| m * c).sum()
    }

    /// Largest total degree with a nonzero coefficient (0 for the zero polynomial).
    pub fn degree(&self, set: &MonomialSet) -> u32 {
        self.coeffs
            .iter()
            .zip(&set.exponents)
            .filter(|(c, _)| **c != 0.0)
            .map(|(_, e)| e[0] + e[1] + e[2])
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    Scalar,
    DivFreeVector,
    CurlFreeTraceFreeTensor,
}

impl BasisKind {
    /// Number of stored components per function.
    pub fn components(self, dim: usize) -> usize {
        match self {
            BasisKind::Scalar => 1,
            BasisKind::DivFreeVector => dim,
            BasisKind::CurlFreeTraceFreeTensor => dim * dim,
        }
    }

    /// Independent nodal values per element (`d^2 - 1` for trace-free tensors).
    pub fn nodal_values(self, dim: usize) -> usize {
        match self {
            BasisKind::Scalar => 1,
            BasisKind::DivFreeVector => dim,
            BasisKind::CurlFreeTraceFreeTensor => dim * dim - 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BasisKind::Scalar => "scalar",
            BasisKind::DivFreeVector => "divergence-free vector",
            BasisKind::CurlFreeTraceFreeTensor => "curl-free trace-free tensor",
        }
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `(i, j)` entries carried as independent tensor nodal values: every entry
/// in row-major order except the last diagonal one, which is minus the sum
/// of the other diagonal entries.
pub fn tensor_param_entries(dim: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..dim {
        for j in 0..dim {
            if !(i == dim - 1 && j == dim - 1) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Linear map from trace-free tensor parameters to the full row-major
/// `d x d` entries (`d^2` rows, `d^2 - 1` columns).
pub fn tensor_param_to_full(dim: usize) -> DMatrix<f64> {
    let entries = tensor_param_entries(dim);
    let mut p = DMatrix::zeros(dim * dim, entries.len());
    for (k, &(i, j)) in entries.iter().enumerate() {
        p[(i * dim + j, k)] = 1.0;
        if i == j {
            p[((dim - 1) * dim + dim - 1, k)] = -1.0;
        }
    }
    p
}

/// Polynomial basis of one kind. The leading `num_constants()` functions are
/// the canonical constants: `1`; `e_i`; the trace-free units ordered as
/// [`tensor_param_entries`]. All remaining functions vanish at the origin.
#[derive(Debug, Clone)]
pub struct PolyBasis {
    pub dim: usize,
    pub order: usize,
    pub kind: BasisKind,
    pub monomials: MonomialSet,
    /// `functions[f][c]`: component `c` of function `f`.
    pub functions: Vec<Vec<Polynomial>>,
    tables: Tables,
}

/// Dense (function x monomial) coefficient tables for fast evaluation.
#[derive(Debug, Clone)]
pub struct Tables {
    /// Per component.
    pub values: Vec<DMatrix<f64>>,
    /// Per component, per axis: derivative in local coordinates.
    pub derivatives: Vec<Vec<DMatrix<f64>>>,
}

impl PolyBasis {
    fn new(dim: usize, order: usize, kind: BasisKind, monomials: MonomialSet, functions: Vec<Vec<Polynomial>>) -> Self {
        let ncomp = kind.components(dim);
        let nf = functions.len();
        let nm = monomials.len();
        let mut values = vec![DMatrix::zeros(nf, nm); ncomp];
        let mut derivatives = vec![vec![DMatrix::zeros(nf, nm); dim]; ncomp];
        for (f, comps) in functions.iter().enumerate() {
            for (c, p) in comps.iter().enumerate() {
                for (m, &v) in p.coeffs.iter().enumerate() {
                    values[c][(f, m)] = v;
                }
                for a in 0..dim {
                    let dp = p.derivative(&monomials, a);
                    for (m, &v) in dp.coeffs.iter().enumerate() {
                        derivatives[c][a][(f, m)] = v;
                    }
                }
            }
        }
        PolyBasis {
            dim,
            order,
            kind,
            monomials,
            functions,
            tables: Tables {
                values,
                derivatives,
            },
        }
    }

    pub fn count(&self) -> usize {
        self.functions.len()
    }

    pub fn num_constants(&self) -> usize {
        self.kind.nodal_values(self.dim)
    }

    pub fn tables(&self) -> &Tables {
        &self.tables
    }

    /// Component values of every function at the point `x`, expressed in
    /// the local frame `xi = (x - center) / scale`.
    pub fn evaluate(&self, frame: &LocalFrame, x: &Point) -> Vec<Vec<f64>> {
        let xi = frame.local(x);
        self.functions
            .iter()
            .map(|comps| comps.iter().map(|p| p.evaluate(&self.monomials, &xi)).collect())
            .collect()
    }

    /// Physical-coordinate gradients: `[f][c][axis]`.
    pub fn evaluate_gradient(&self, frame: &LocalFrame, x: &Point) -> Vec<Vec<Vec<f64>>> {
        let xi = frame.local(x);
        self.functions
            .iter()
            .map(|comps| {
                comps
                    .iter()
                    .map(|p| {
                        (0..self.dim)
                            .map(|a| p.derivative(&self.monomials, a).evaluate(&self.monomials, &xi) / frame.scale)
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Physical divergence of each vector function (row-wise for tensors,
    /// giving `dim` values per function).
    pub fn evaluate_divergence(&self, frame: &LocalFrame, x: &Point) -> Vec<Vec<f64>> {
        let g = self.evaluate_gradient(frame, x);
        let d = self.dim;
        g.iter()
            .map(|comps| match self.kind {
                BasisKind::Scalar => vec![],
                BasisKind::DivFreeVector => vec![(0..d).map(|i| comps[i][i]).sum()],
                BasisKind::CurlFreeTraceFreeTensor => {
                    (0..d).map(|i| (0..d).map(|j| comps[i * d + j][j]).sum()).collect()
                }
            })
            .collect()
    }

    /// Coefficient matrix (functions x (components * monomials)).
    pub fn coefficient_matrix(&self) -> DMatrix<f64> {
        let nm = self.monomials.len();
        let ncomp = self.kind.components(self.dim);
        DMatrix::from_fn(self.count(), nm * ncomp, |f, k| self.functions[f][k / nm].coeffs[k % nm])
    }
}

/// Shifted and scaled local coordinates `xi = (x - center) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub center: Point,
    pub scale: f64,
}

impl LocalFrame {
    pub fn new(center: Point, scale: f64) -> Self {
        LocalFrame { center, scale }
    }

    pub fn identity() -> Self {
        LocalFrame {
            center: [0.0; 3],
            scale: 1.0,
        }
    }

    #[inline]
    pub fn local(&self, x: &Point) -> [f64; 3] {
        let s = 1.0 / self.scale;
        [
            (x[0] - self.center[0]) * s,
            (x[1] - self.center[1]) * s,
            (x[2] - self.center[2]) * s,
        ]
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

pub fn scalar_count(dim: usize, m: usize) -> usize {
    binomial(m + dim, dim)
}

/// Dimension of degree-`m` divergence-free polynomial fields.
pub fn divfree_count(dim: usize, m: usize) -> usize {
    match dim {
        2 => 2 * binomial(m + 2, 2) - binomial(m + 1, 2),
        3 => 3 * binomial(m + 3, 3) - binomial(m + 2, 3),
        _ => panic!("dimension {dim}"),
    }
}

pub fn tensor_count(dim: usize, m: usize) -> usize {
    divfree_count(dim, m + 1) - dim
}

/// Monomials `(x - c)^alpha`, `|alpha| <= m`, graded-lex order.
pub fn scalar_basis(dim: usize, m: usize) -> PolyBasis {
    let set = MonomialSet::new(dim, m);
    let functions = set
        .exponents
        .iter()
        .map(|&e| vec![Polynomial::monomial(&set, e, 1.0)])
        .collect();
    PolyBasis::new(dim, m, BasisKind::Scalar, set, functions)
}

fn divfree_functions(dim: usize, m: usize, set: &MonomialSet) -> Vec<Vec<Polynomial>> {
    let mut out: Vec<Vec<Polynomial>> = Vec::new();
    match dim {
        2 => {
            // Constants, then curls (d_y q, -d_x q) of monomials of degree 2..=m+1.
            out.push(vec![Polynomial::monomial(set, [0, 0, 0], 1.0), Polynomial::zero(set)]);
            out.push(vec![Polynomial::zero(set), Polynomial::monomial(set, [0, 0, 0], 1.0)]);
            let big = MonomialSet::new(2, m + 1);
            for &e in big.exponents.iter().filter(|e| e[0] + e[1] >= 2) {
                let q = Polynomial::monomial(&big, e, 1.0);
                let c0 = q.derivative(&big, 1);
                let c1 = q.derivative(&big, 0).scale(-1.0);
                out.push(vec![restrict(&big, set, &c0), restrict(&big, set, &c1)]);
            }
        }
        3 => {
            let mut funcs: Vec<(u32, Vec<Polynomial>)> = Vec::new();
            let z = || Polynomial::zero(set);
            // Single-entry fields whose entry does not depend on its own coordinate.
            for comp in 0..3 {
                for &e in &set.exponents {
                    if e[comp] == 0 {
                        let mut v = vec![z(), z(), z()];
                        v[comp] = Polynomial::monomial(set, e, 1.0);
                        funcs.push((e[0] + e[1] + e[2], v));
                    }
                }
            }
            // Two-entry fields p_1 = (a+1) x^t y^a z^b balanced by the second
            // or third entry; scaled by (a+1) (resp. (b+1)) for integer coefficients.
            for other in [1usize, 2] {
                for t in 1..=m as u32 {
                    for &e in &set.exponents {
                        if e[0] != 0 || e[1] + e[2] + t > m as u32 {
                            continue;
                        }
                        let (a, b) = (e[1], e[2]);
                        let k = if other == 1 { a + 1 } else { b + 1 };
                        let mut v = vec![z(), z(), z()];
                        v[0] = Polynomial::monomial(set, [t, a, b], k as f64);
                        let anti = if other == 1 { [t - 1, a + 1, b] } else { [t - 1, a, b + 1] };
                        v[other] = Polynomial::monomial(set, anti, -(t as f64));
                        funcs.push((t + a + b, v));
                    }
                }
            }
            funcs.sort_by_key(|(deg, _)| *deg);
            out = funcs.into_iter().map(|(_, v)| v).collect();
        }
        _ => panic!("dimension {dim}"),
    }
    out
}

fn restrict(from: &MonomialSet, to: &MonomialSet, p: &Polynomial) -> Polynomial {
    let mut out = Polynomial::zero(to);
    for (i, &c) in p.coeffs.iter().enumerate() {
        if c != 0.0 {
            let j = to
                .index_of(from.exponents[i])
                .expect("polynomial degree exceeds target set");
            out.coeffs[j] = c;
        }
    }
    out
}

/// Divergence-free vector polynomials of degree `<= m`.
pub fn divfree_basis(dim: usize, m: usize) -> PolyBasis {
    let set = MonomialSet::new(dim, m);
    let functions = divfree_functions(dim, m, &set);
    PolyBasis::new(dim, m, BasisKind::DivFreeVector, set, functions)
}

/// Gradients of the non-constant degree-`(m+1)` divergence-free fields; the
/// constant part is re-expressed in the canonical trace-free units.
pub fn curlfree_tracefree_basis(dim: usize, m: usize) -> Result<PolyBasis> {
    let big = MonomialSet::new(dim, m + 1);
    let set = MonomialSet::new(dim, m);
    let div = divfree_functions(dim, m + 1, &big);
    let mut functions: Vec<Vec<Polynomial>> = Vec::new();
    for &(i, j) in &tensor_param_entries(dim) {
        let mut f = vec![Polynomial::zero(&set); dim * dim];
        f[i * dim + j] = Polynomial::monomial(&set, [0, 0, 0], 1.0);
        if i == j {
            f[dim * dim - 1] = Polynomial::monomial(&set, [0, 0, 0], -1.0);
        }
        functions.push(f);
    }
    let mut constant_grads = Vec::new();
    for v in &div {
        let deg = v.iter().map(|p| p.degree(&big)).max().unwrap_or(0);
        if deg == 0 {
            continue;
        }
        let mut g = Vec::with_capacity(dim * dim);
        for comp in v {
            for a in 0..dim {
                g.push(restrict(&big, &set, &comp.derivative(&big, a)));
            }
        }
        if deg == 1 {
            constant_grads.push(g);
        } else {
            functions.push(g);
        }
    }
    let basis = PolyBasis::new(dim, m, BasisKind::CurlFreeTraceFreeTensor, set, functions);

    let expected = tensor_count(dim, m);
    let rank = basis.coefficient_matrix().rank(1e-10);
    if basis.count() != expected || rank != expected || constant_grads.len() != dim * dim - 1 {
        return Err(Error::Internal(format!(
            "tensor basis d={dim} m={m}: {} functions, rank {rank}, expected {expected}",
            basis.count()
        )));
    }
    Ok(basis)
}

/// Convenience constructor for the three bases on a given order.
pub fn basis_for(kind: BasisKind, dim: usize, m: usize) -> Result<Arc<PolyBasis>> {
    Ok(Arc::new(match kind {
        BasisKind::Scalar => scalar_basis(dim, m),
        BasisKind::DivFreeVector => divfree_basis(dim, m),
        BasisKind::CurlFreeTraceFreeTensor => curlfree_tracefree_basis(dim, m)?,
    }))
}

/// Symbolic divergence of a vector polynomial field.
pub fn divergence(set: &MonomialSet, comps: &[Polynomial]) -> Polynomial {
    let mut out = Polynomial::zero(set);
    for (a, p) in comps.iter().enumerate() {
        out = out.add(&p.derivative(set, a));
    }
    out
}

/// Symbolic row-wise curl of a tensor polynomial: one polynomial per row
/// in 2D, three per row in 3D.
pub fn row_curl(set: &MonomialSet, dim: usize, comps: &[Polynomial]) -> Vec<Polynomial> {
    let mut out = Vec::new();
    for i in 0..dim {
        let row = &comps[i * dim..(i + 1) * dim];
        let d = |c: usize, a: usize| row[c].derivative(set, a);
        if dim == 2 {
            out.push(d(1, 0).add(&d(0, 1).scale(-1.0)));
        } else {
            out.push(d(2, 1).add(&d(1, 2).scale(-1.0)));
            out.push(d(0, 2).add(&d(2, 0).scale(-1.0)));
            out.push(d(1, 0).add(&d(0, 1).scale(-1.0)));
        }
    }
    out
}

pub fn trace(dim: usize, comps: &[Polynomial]) -> Polynomial {
    let mut out = comps[0].clone();
    for i in 1..dim {
        out = out.add(&comps[i * dim + i]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_counts() {
        let b = scalar_basis(2, 1);
        assert_eq!(b.count(), 3);
        let v = b.evaluate(&LocalFrame::identity(), &[0.5, 0.25, 0.0]);
        assert_eq!(v, vec![vec![1.0], vec![0.5], vec![0.25]]);
        assert_eq!(scalar_basis(3, 2).count(), 10);
        assert_eq!(scalar_basis(2, 3).count(), 10);
    }

    #[test]
    fn divfree_counts() {
        assert_eq!(divfree_basis(2, 1).count(), 5);
        assert_eq!(divfree_basis(2, 2).count(), 9);
        assert_eq!(divfree_basis(2, 3).count(), 14);
        assert_eq!(divfree_basis(3, 1).count(), 11);
        for m in 0..=4 {
            assert_eq!(divfree_basis(3, m).count(), divfree_count(3, m));
            assert_eq!(divfree_basis(2, m).count(), divfree_count(2, m));
        }
    }

    #[test]
    fn divfree_2d_linear_span_matches_listed_fields() {
        // span{(1,0),(0,1),(0,x),(y,0),(x,-y)}
        let b = divfree_basis(2, 1);
        let set = &b.monomials; // 1, x, y
        let listed: Vec<Vec<f64>> = vec![
            vec![1., 0., 0., 0., 0., 0.],
            vec![0., 0., 0., 1., 0., 0.],
            vec![0., 0., 0., 0., 1., 0.],
            vec![0., 0., 1., 0., 0., 0.],
            vec![0., 1., 0., 0., 0., -1.],
        ];
        assert_eq!(set.len(), 3);
        let c = b.coefficient_matrix();
        let l = DMatrix::from_fn(5, 6, |i, j| listed[i][j]);
        let mut stacked = DMatrix::zeros(10, 6);
        stacked.rows_mut(0, 5).copy_from(&c);
        stacked.rows_mut(5, 5).copy_from(&l);
        assert_eq!(c.rank(1e-12), 5);
        assert_eq!(stacked.rank(1e-12), 5);
    }

    #[test]
    fn divfree_evaluation() {
        let b = divfree_basis(2, 1);
        // curl of xy is (x, -y)
        let f = b
            .functions
            .iter()
            .position(|f| f[0].coeffs == vec![0., 1., 0.] && f[1].coeffs == vec![0., 0., -1.])
            .unwrap();
        let fr = LocalFrame::identity();
        let v = &b.evaluate(&fr, &[2.0, 3.0, 0.0])[f];
        assert_eq!(v, &vec![2.0, -3.0]);
        assert_eq!(b.evaluate_divergence(&fr, &[2.0, 3.0, 0.0])[f], vec![0.0]);
    }

    #[test]
    fn tensor_counts() {
        assert_eq!(curlfree_tracefree_basis(2, 1).unwrap().count(), 7);
        assert_eq!(curlfree_tracefree_basis(2, 0).unwrap().count(), 3);
        assert_eq!(curlfree_tracefree_basis(3, 0).unwrap().count(), 8);
        for m in 0..=3 {
            for d in [2, 3] {
                assert_eq!(curlfree_tracefree_basis(d, m).unwrap().count(), tensor_count(d, m));
            }
        }
    }

    #[test]
    fn symbolic_constraints_hold_exactly() {
        for d in [2, 3] {
            for m in 0..=4 {
                let b = divfree_basis(d, m);
                for f in &b.functions {
                    assert!(divergence(&b.monomials, f).is_zero());
                }
                let t = curlfree_tracefree_basis(d, m).unwrap();
                for f in &t.functions {
                    assert!(trace(d, f).is_zero());
                    for c in row_curl(&t.monomials, d, f) {
                        assert!(c.is_zero());
                    }
                }
            }
        }
    }

    #[test]
    fn leading_functions_are_canonical_constants() {
        for d in [2, 3] {
            for m in 1..=3 {
                for kind in [BasisKind::Scalar, BasisKind::DivFreeVector, BasisKind::CurlFreeTraceFreeTensor] {
                    let b = basis_for(kind, d, m).unwrap();
                    let n0 = b.num_constants();
                    let z = [0.0; 3];
                    let vals = b.evaluate(&LocalFrame::identity(), &z);
                    for (f, v) in vals.iter().enumerate() {
                        if f >= n0 {
                            assert!(v.iter().all(|&x| x == 0.0), "{kind} f{f} nonzero at origin");
                        }
                    }
                    if kind == BasisKind::CurlFreeTraceFreeTensor {
                        let p = tensor_param_to_full(d);
                        for k in 0..n0 {
                            let col: Vec<f64> = p.column(k).iter().copied().collect();
                            assert_eq!(vals[k], col);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn tensor_2d_linear_span_matches_listed_matrices() {
        // Listed matrices (column-major, gradients in columns) read in the
        // row-gradient convention: [[0,0],[1,0]], [[0,1],[0,0]], [[1,0],[0,-1]],
        // [[0,0],[x,0]], [[x,0],[-y,-x]], [[-y,-x],[0,y]], [[0,y],[0,0]].
        let t = curlfree_tracefree_basis(2, 1).unwrap();
        let set = &t.monomials; // 1, x, y
        let mat = |e: [[[f64; 3]; 2]; 2]| -> Vec<f64> {
            let mut v = Vec::new();
            for comp in 0..4 {
                let (i, j) = (comp / 2, comp % 2);
                v.extend_from_slice(&e[i][j]);
            }
            v
        };
        let o = [0.0; 3];
        let one = [1.0, 0.0, 0.0];
        let x = [0.0, 1.0, 0.0];
        let y = [0.0, 0.0, 1.0];
        let neg = |a: [f64; 3]| [-a[0], -a[1], -a[2]];
        let listed = vec![
            mat([[o, o], [one, o]]),
            mat([[o, one], [o, o]]),
            mat([[one, o], [o, neg(one)]]),
            mat([[o, o], [x, o]]),
            mat([[x, o], [neg(y), neg(x)]]),
            mat([[neg(y), neg(x)], [o, y]]),
            mat([[o, y], [o, o]]),
        ];
        assert_eq!(set.len(), 3);
        let c = t.coefficient_matrix();
        let mut stacked = DMatrix::zeros(14, 12);
        stacked.rows_mut(0, 7).copy_from(&c);
        for (i, r) in listed.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                stacked[(7 + i, j)] = *v;
            }
        }
        assert_eq!(c.rank(1e-12), 7);
        assert_eq!(stacked.rank(1e-12), 7);
    }

    #[test]
    fn tensor_is_gradient_of_divfree() {
        for d in [2, 3] {
            for m in 0..=3 {
                let t = curlfree_tracefree_basis(d, m).unwrap();
                let big = MonomialSet::new(d, m + 1);
                let div = divfree_functions(d, m + 1, &big);
                let grads: Vec<Vec<Polynomial>> = div
                    .iter()
                    .filter(|v| v.iter().map(|p| p.degree(&big)).max().unwrap() >= 2)
                    .map(|v| {
                        v.iter()
                            .flat_map(|c| (0..d).map(|a| restrict(&big, &t.monomials, &c.derivative(&big, a))).collect::<Vec<_>>())
                            .collect()
                    })
                    .collect();
                let n0 = d * d - 1;
                assert_eq!(&t.functions[n0..], &grads[..]);
            }
        }
    }
}
