//! Point location on a mesh through a uniform bucket grid over element
//! bounding boxes.

use crate::mesh::{Mesh, Point};

#[derive(Debug, Clone)]
pub struct PointLocator {
    dim: usize,
    lo: Point,
    cell: Point,
    counts: [usize; 3],
    buckets: Vec<Vec<usize>>,
}

const TOL: f64 = 1e-12;

fn bbox(mesh: &Mesh, k: usize) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &v in &mesh.elements[k].vertex_ids {
        for a in 0..mesh.dim {
            lo[a] = lo[a].min(mesh.vertices[v][a]);
            hi[a] = hi[a].max(mesh.vertices[v][a]);
        }
    }
    (lo, hi)
}

/// Barycentric coordinates of `x` in a simplex; the last one is implied.
fn inside_simplex(dim: usize, s: &[Point], x: &Point) -> bool {
    let mut a = nalgebra::DMatrix::zeros(dim, dim);
    let mut b = nalgebra::DVector::zeros(dim);
    for r in 0..dim {
        for c in 0..dim {
            a[(r, c)] = s[c + 1][r] - s[0][r];
        }
        b[r] = x[r] - s[0][r];
    }
    match a.lu().solve(&b) {
        Some(l) => {
            let sum: f64 = l.iter().sum();
            l.iter().all(|v| *v >= -TOL) && sum <= 1.0 + TOL
        }
        None => false,
    }
}

impl PointLocator {
    pub fn new(mesh: &Mesh) -> Self {
        let dim = mesh.dim;
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for a in 0..dim {
            lo[a] = mesh.vertices.iter().map(|v| v[a]).fold(f64::INFINITY, f64::min);
            hi[a] = mesh.vertices.iter().map(|v| v[a]).fold(f64::NEG_INFINITY, f64::max);
        }
        // About one element per bucket.
        let per_axis = ((mesh.num_elements() as f64).powf(1.0 / dim as f64).ceil() as usize).max(1);
        let mut counts = [1; 3];
        let mut cell = [1.0; 3];
        for a in 0..dim {
            counts[a] = per_axis;
            cell[a] = ((hi[a] - lo[a]) / per_axis as f64).max(f64::MIN_POSITIVE);
        }
        let mut buckets = vec![Vec::new(); counts.iter().product()];
        let mut loc = PointLocator {
            dim,
            lo,
            cell,
            counts,
            buckets: Vec::new(),
        };
        for k in 0..mesh.num_elements() {
            let (blo, bhi) = bbox(mesh, k);
            let i0 = loc.bucket_coords(&blo);
            let i1 = loc.bucket_coords(&bhi);
            for i in i0[0]..=i1[0] {
                for j in i0[1]..=i1[1] {
                    for l in i0[2]..=i1[2] {
                        buckets[(l * counts[1] + j) * counts[0] + i].push(k);
                    }
                }
            }
        }
        loc.buckets = buckets;
        loc
    }

    fn bucket_coords(&self, x: &Point) -> [usize; 3] {
        let mut out = [0; 3];
        for a in 0..self.dim {
            let t = ((x[a] - self.lo[a]) / self.cell[a]).floor();
            out[a] = (t.max(0.0) as usize).min(self.counts[a] - 1);
        }
        out
    }

    /// Lowest-index element containing `x` (boundary points included).
    pub fn locate(&self, mesh: &Mesh, x: &Point) -> Option<usize> {
        let b = self.bucket_coords(x);
        let idx = (b[2] * self.counts[1] + b[1]) * self.counts[0] + b[0];
        self.buckets[idx]
            .iter()
            .copied()
            .find(|&k| mesh.elements[k].simplices.iter().any(|s| inside_simplex(self.dim, s, x)))
    }
}
