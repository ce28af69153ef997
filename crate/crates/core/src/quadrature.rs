//! Composite quadrature on elements (through their simplicial sub-decomposition)
//! and faces.
//!
//! Reference rules are collapsed-coordinate Gauss–Jacobi products, which have
//! strictly positive weights and exist for every degree.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::mesh::{Element, Face, Point};

pub const MAX_DEGREE: usize = 30;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }
}

/// Gauss–Jacobi rule with `n` points for the weight `(1-t)^alpha` on [0, 1].
pub fn gauss_jacobi_unit(n: usize, alpha: u32) -> (Vec<f64>, Vec<f64>) {
    let a = alpha as f64;
    // Three-term recurrence of monic Jacobi polynomials (beta = 0) on [-1, 1].
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + a;
        let diag = if k == 0 {
            -a / (a + 2.0)
        } else {
            -(a * a) / (s * (s + 2.0))
        };
        jac[(k, k)] = diag;
        if k + 1 < n {
            let j = kf + 1.0;
            let s = 2.0 * j + a;
            let off = (4.0 * j * (j + a) * j * (j + a) / (s * s * (s + 1.0) * (s - 1.0))).sqrt();
            jac[(k, k + 1)] = off;
            jac[(k + 1, k)] = off;
        }
    }
    // mu0 = int_{-1}^{1} (1-x)^a dx = 2^(a+1)/(a+1)
    let mu0 = 2f64.powf(a + 1.0) / (a + 1.0);
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    // Map to [0, 1]: (1-t)^a dt = 2^(-a-1) (1-x)^a dx.
    let scale = 2f64.powf(-a - 1.0);
    let pts = pairs.iter().map(|p| 0.5 * (1.0 + p.0)).collect();
    let wts = pairs.iter().map(|p| p.1 * scale).collect();
    (pts, wts)
}

/// Rule on the reference simplex with vertices 0, e_1, .., e_dim.
#[derive(Debug, Clone)]
pub struct ReferenceRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

fn build_reference(dim: usize, degree: usize) -> ReferenceRule {
    let n = degree / 2 + 1;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match dim {
        1 => {
            let (t, w) = gauss_jacobi_unit(n, 0);
            for i in 0..n {
                points.push([t[i], 0.0, 0.0]);
                weights.push(w[i]);
            }
        }
        2 => {
            let (u, wu) = gauss_jacobi_unit(n, 1);
            let (v, wv) = gauss_jacobi_unit(n, 0);
            for i in 0..n {
                for j in 0..n {
                    points.push([u[i], v[j] * (1.0 - u[i]), 0.0]);
                    weights.push(wu[i] * wv[j]);
                }
            }
        }
        3 => {
            let (u, wu) = gauss_jacobi_unit(n, 2);
            let (v, wv) = gauss_jacobi_unit(n, 1);
            let (w, ww) = gauss_jacobi_unit(n, 0);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let x = u[i];
                        let y = v[j] * (1.0 - u[i]);
                        let z = w[k] * (1.0 - u[i]) * (1.0 - v[j]);
                        points.push([x, y, z]);
                        weights.push(wu[i] * wv[j] * ww[k]);
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    ReferenceRule {
        points,
        weights,
        degree,
    }
}

/// Cached reference rule of exactness `degree` on the `dim`-simplex.
pub fn reference_rule(dim: usize, degree: usize) -> Result<&'static ReferenceRule> {
    static CACHE: OnceLock<Vec<Vec<ReferenceRule>>> = OnceLock::new();
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedDegree {
            degree,
            max: MAX_DEGREE,
        });
    }
    if !(1..=3).contains(&dim) {
        return Err(Error::Input(format!("no simplex rule in dimension {dim}")));
    }
    let table = CACHE.get_or_init(|| {
        (1..=3)
            .map(|d| (0..=MAX_DEGREE).map(|p| build_reference(d, p)).collect())
            .collect()
    });
    Ok(&table[dim - 1][degree])
}

/// Maps a reference rule onto each simplex of a list and concatenates.
pub fn composite_rule(simplex_dim: usize, simplices: &[Vec<Point>], degree: usize) -> Result<QuadratureRule> {
    let rref = reference_rule(simplex_dim, degree)?;
    let mut points = Vec::with_capacity(simplices.len() * rref.points.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for s in simplices {
        let vol = crate::mesh::simplex_measure(simplex_dim, s);
        // The reference simplex has measure 1/dim!.
        let ref_vol = match simplex_dim {
            1 => 1.0,
            2 => 0.5,
            _ => 1.0 / 6.0,
        };
        let jac = vol / ref_vol;
        for (r, w) in rref.points.iter().zip(&rref.weights) {
            let mut p = s[0];
            for k in 0..simplex_dim {
                for a in 0..3 {
                    p[a] += r[k] * (s[k + 1][a] - s[0][a]);
                }
            }
            points.push(p);
            weights.push(w * jac);
        }
    }
    Ok(QuadratureRule {
        points,
        weights,
        exact_degree: degree,
    })
}

pub fn element_rule(dim: usize, element: &Element, degree: usize) -> Result<QuadratureRule> {
    composite_rule(dim, &element.simplices, degree)
}

pub fn face_rule(dim: usize, face: &Face, degree: usize) -> Result<QuadratureRule> {
    composite_rule(dim - 1, &face.simplices, degree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_structured, parse_mesh};

    fn factorial(n: u32) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    // int over reference simplex of x^a y^b z^c = a! b! c! / (a+b+c+dim)!
    fn monomial_integral(dim: usize, e: [u32; 3]) -> f64 {
        factorial(e[0]) * factorial(e[1]) * factorial(e[2]) / factorial(e[0] + e[1] + e[2] + dim as u32)
    }

    #[test]
    fn reference_rules_exact() {
        for dim in 1..=3usize {
            for deg in 0..=12usize {
                let r = reference_rule(dim, deg).unwrap();
                assert!(r.weights.iter().all(|&w| w > 0.0));
                for a in 0..=deg as u32 {
                    for b in 0..=(deg as u32 - a) {
                        for c in 0..=(deg as u32 - a - b) {
                            let e = [a, if dim > 1 { b } else { 0 }, if dim > 2 { c } else { 0 }];
                            if (dim < 2 && b > 0) || (dim < 3 && c > 0) {
                                continue;
                            }
                            let q: f64 = r
                                .points
                                .iter()
                                .zip(&r.weights)
                                .map(|(p, w)| {
                                    w * p[0].powi(e[0] as i32) * p[1].powi(e[1] as i32) * p[2].powi(e[2] as i32)
                                })
                                .sum();
                            let exact = monomial_integral(dim, e);
                            assert!(
                                (q - exact).abs() <= 1e-12 * exact,
                                "dim {dim} deg {deg} exps {e:?}: {q} vs {exact}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn unit_triangle_x_squared() {
        let m = parse_mesh("2 3 1\n0 0\n1 0\n0 1\n3 0 1 2\n", None).unwrap();
        let r = element_rule(2, &m.elements[0], 2).unwrap();
        assert!((r.integrate(|p| p[0] * p[0]) - 1.0 / 12.0).abs() < 1e-15);
        assert!((r.integrate(|p| p[0] * p[1]) - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn unit_square_x_cubed() {
        let m = generate_structured(2, 1).unwrap();
        let s: f64 = m
            .elements
            .iter()
            .map(|e| element_rule(2, e, 3).unwrap().integrate(|p| p[0].powi(3)))
            .sum();
        assert!((s - 0.25).abs() < 1e-14);
    }

    #[test]
    fn pentagon_matches_refined_fan() {
        // Convex pentagon, degree-4 polynomial; oracle: fan refined by splitting
        // each fan triangle into 4 and integrating with a high-order rule.
        let m = parse_mesh(
            "2 5 1\n0 0\n1.2 0.1\n1.5 0.9\n0.6 1.4\n-0.2 0.8\n5 0 1 2 3 4\n",
            None,
        )
        .unwrap();
        let e = &m.elements[0];
        let f = |p: &Point| 1.0 + p[0] - 2.0 * p[0] * p[1] + p[0].powi(4) - 0.5 * p[1].powi(3) * p[0];
        let q = element_rule(2, e, 4).unwrap().integrate(f);
        let mut fine = Vec::new();
        for s in &e.simplices {
            let mid = |a: &Point, b: &Point| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, 0.0];
            let (a, b, c) = (s[0], s[1], s[2]);
            let (ab, bc, ca) = (mid(&a, &b), mid(&b, &c), mid(&c, &a));
            fine.push(vec![a, ab, ca]);
            fine.push(vec![ab, b, bc]);
            fine.push(vec![ca, bc, c]);
            fine.push(vec![ab, bc, ca]);
        }
        let oracle = composite_rule(2, &fine, 16).unwrap().integrate(f);
        assert!((q - oracle).abs() < 1e-12 * oracle.abs());
    }

    #[test]
    fn segment_rules() {
        let m = generate_structured(2, 1).unwrap();
        // Bottom edge of the unit square: y = 0, x in [0, 1].
        let f = m
            .faces
            .iter()
            .find(|f| f.simplices[0].iter().all(|p| p[1] == 0.0))
            .unwrap();
        let r1 = face_rule(2, f, 1).unwrap();
        assert!((r1.integrate(|p| p[0]) - 0.5).abs() < 1e-15);
        let r5 = face_rule(2, f, 5).unwrap();
        assert!((r5.integrate(|p| p[0].powi(5)) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn triangle_face_area() {
        let m = parse_mesh("3 4 1\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n4 0 1 2 3\n", None).unwrap();
        let f = m
            .faces
            .iter()
            .find(|f| f.simplices[0].iter().all(|p| p[2] == 0.0))
            .unwrap();
        let r = face_rule(3, f, 4).unwrap();
        assert!((r.integrate(|_| 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_measure() {
        let m = generate_structured(3, 2).unwrap();
        for e in &m.elements {
            let r = element_rule(3, e, 6).unwrap();
            let s: f64 = r.weights.iter().sum();
            assert!((s - e.measure).abs() <= 1e-13 * e.measure);
        }
        assert!(matches!(
            element_rule(3, &m.elements[0], MAX_DEGREE + 1),
            Err(Error::UnsupportedDegree { .. })
        ));
    }
}
