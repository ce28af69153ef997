//! Dense least squares by Householder QR with column pivoting on the
//! largest remaining column norm.

use nalgebra::DMatrix;

/// Factorization `A P = Q R` of a tall matrix.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    /// Householder vectors below the diagonal, `R` on and above.
    qr: DMatrix<f64>,
    tau: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    /// `rel_tol` is the threshold on `|R_kk| / |R_00|` below which columns
    /// count as dependent.
    pub fn new(a: &DMatrix<f64>, rel_tol: f64) -> Self {
        let (m, n) = a.shape();
        let mut qr = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut tau = vec![0.0; n.min(m)];
        let steps = n.min(m);
        let mut r00 = 0.0;
        let mut rank = 0;
        for k in 0..steps {
            // Norms recomputed each step; these matrices are small.
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..n {
                let s: f64 = (k..m).map(|i| qr[(i, j)] * qr[(i, j)]).sum();
                if s > best_norm {
                    best_norm = s;
                    best = j;
                }
            }
            if best != k {
                qr.swap_columns(k, best);
                perm.swap(k, best);
            }
            let norm = best_norm.sqrt();
            if k == 0 {
                r00 = norm;
            }
            if norm == 0.0 || norm <= rel_tol * r00 {
                break;
            }
            rank += 1;
            let alpha = if qr[(k, k)] > 0.0 { -norm } else { norm };
            let v0 = qr[(k, k)] - alpha;
            qr[(k, k)] = v0;
            let vnorm2: f64 = (k..m).map(|i| qr[(i, k)] * qr[(i, k)]).sum();
            let t = 2.0 / vnorm2;
            for j in k + 1..n {
                let s: f64 = (k..m).map(|i| qr[(i, k)] * qr[(i, j)]).sum();
                let s = s * t;
                for i in k..m {
                    qr[(i, j)] -= s * qr[(i, k)];
                }
            }
            // Normalize so the vector has unit leading entry.
            for i in k + 1..m {
                qr[(i, k)] /= v0;
            }
            tau[k] = t * v0 * v0;
            qr[(k, k)] = alpha;
        }
        PivotedQr {
            qr,
            tau,
            perm,
            rank,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn ncols(&self) -> usize {
        self.qr.ncols()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.ncols()
    }

    /// Least-squares solution `X = argmin ||A X - B||` for full column rank.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        assert!(self.is_full_rank(), "solve on rank-deficient factorization");
        let (m, n) = self.qr.shape();
        let mut y = b.clone();
        for k in 0..n {
            let t = self.tau[k];
            for c in 0..y.ncols() {
                let mut s = y[(k, c)];
                for i in k + 1..m {
                    s += self.qr[(i, k)] * y[(i, c)];
                }
                s *= t;
                y[(k, c)] -= s;
                for i in k + 1..m {
                    y[(i, c)] -= s * self.qr[(i, k)];
                }
            }
        }
        let mut x = DMatrix::zeros(n, b.ncols());
        for c in 0..b.ncols() {
            for k in (0..n).rev() {
                let mut s = y[(k, c)];
                for j in k + 1..n {
                    s -= self.qr[(k, j)] * x[(self.perm[j], c)];
                }
                x[(self.perm[k], c)] = s / self.qr[(k, k)];
            }
        }
        x
    }
}
