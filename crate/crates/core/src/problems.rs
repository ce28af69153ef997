//! Built-in Stokes problems: manufactured solutions and the cavity flow.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Point;

pub type Field = Arc<dyn Fn(&Point) -> Vec<f64> + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ExactSolution {
    pub velocity: Field,
    /// `d*d` entries, row-major, `G[i][j] = d u_i / d x_j`.
    pub gradient: Field,
    pub pressure: ScalarField,
    /// Row-wise divergence of the gradient.
    pub laplacian: Field,
    pub pressure_gradient: Field,
}

#[derive(Clone)]
pub struct ProblemDefinition {
    pub name: String,
    pub dim: usize,
    pub nu: f64,
    pub source: Field,
    pub boundary: Field,
    /// Gradient of the boundary data, row-major like [`ExactSolution::gradient`].
    pub boundary_gradient: Option<Field>,
    pub exact: Option<ExactSolution>,
}

impl std::fmt::Debug for ProblemDefinition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemDefinition")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("nu", &self.nu)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

#[allow(clippy::too_many_arguments)]
fn manufactured(
    name: &str,
    dim: usize,
    nu: f64,
    velocity: Field,
    gradient: Field,
    pressure: ScalarField,
    laplacian: Field,
    grad_p: Field,
) -> ProblemDefinition {
    let exact = ExactSolution {
        velocity,
        gradient,
        pressure,
        laplacian: laplacian.clone(),
        pressure_gradient: grad_p.clone(),
    };
    let source: Field = Arc::new(move |x| {
        let l = laplacian(x);
        let g = grad_p(x);
        (0..dim).map(|i| -nu * l[i] + g[i]).collect()
    });
    ProblemDefinition {
        name: name.to_string(),
        dim,
        nu,
        source,
        boundary: exact.velocity.clone(),
        boundary_gradient: Some(exact.gradient.clone()),
        exact: Some(exact),
    }
}

/// Example 1/2 on the unit square.
pub fn trigonometric_2d(nu: f64) -> ProblemDefinition {
    let tau = 2.0 * PI;
    let velocity: Field = Arc::new(move |x| {
        let (sx, cx, sy, cy) = ((tau * x[0]).sin(), (tau * x[0]).cos(), (tau * x[1]).sin(), (tau * x[1]).cos());
        vec![sx * cy, -cx * sy]
    });
    let gradient: Field = Arc::new(move |x| {
        let (sx, cx, sy, cy) = ((tau * x[0]).sin(), (tau * x[0]).cos(), (tau * x[1]).sin(), (tau * x[1]).cos());
        vec![tau * cx * cy, -tau * sx * sy, tau * sx * sy, -tau * cx * cy]
    });
    let v2 = velocity.clone();
    let laplacian: Field = Arc::new(move |x| v2(x).iter().map(|u| -2.0 * tau * tau * u).collect());
    manufactured(
        "trigonometric-2d",
        2,
        nu,
        velocity,
        gradient,
        Arc::new(|x| x[0] * x[0] + x[1] * x[1] - 2.0 / 3.0),
        laplacian,
        Arc::new(|x| vec![2.0 * x[0], 2.0 * x[1]]),
    )
}

/// Example 4 on the unit cube.
pub fn exponential_3d(nu: f64) -> ProblemDefinition {
    let tau = 2.0 * PI;
    let velocity: Field = Arc::new(move |x| {
        let e = x[0].exp();
        vec![1.0 - e * (tau * x[1]).cos(), e * (tau * x[1]).sin() / tau, 0.0]
    });
    let gradient: Field = Arc::new(move |x| {
        let e = x[0].exp();
        let (s, c) = ((tau * x[1]).sin(), (tau * x[1]).cos());
        vec![-e * c, tau * e * s, 0.0, e * s / tau, e * c, 0.0, 0.0, 0.0, 0.0]
    });
    let laplacian: Field = Arc::new(move |x| {
        let e = x[0].exp();
        let (s, c) = ((tau * x[1]).sin(), (tau * x[1]).cos());
        vec![(tau * tau - 1.0) * e * c, (1.0 - tau * tau) * e * s / tau, 0.0]
    });
    manufactured(
        "exponential-3d",
        3,
        nu,
        velocity,
        gradient,
        Arc::new(|x| x[0] * x[0] + x[1] * x[1] - 2.0 / 3.0),
        laplacian,
        Arc::new(|x| vec![2.0 * x[0], 2.0 * x[1], 0.0]),
    )
}

/// Example 5 on the unit cube.
pub fn decaying_3d(nu: f64) -> ProblemDefinition {
    let velocity: Field = Arc::new(|x| {
        let e = (-2.0 * x[2]).exp();
        let (sx, cx, sy, cy) = ((PI * x[0]).sin(), (PI * x[0]).cos(), (PI * x[1]).sin(), (PI * x[1]).cos());
        vec![sx * cy * e, cx * sy * e, PI * cx * cy * e]
    });
    let gradient: Field = Arc::new(|x| {
        let e = (-2.0 * x[2]).exp();
        let (sx, cx, sy, cy) = ((PI * x[0]).sin(), (PI * x[0]).cos(), (PI * x[1]).sin(), (PI * x[1]).cos());
        vec![
            PI * cx * cy * e,
            -PI * sx * sy * e,
            -2.0 * sx * cy * e,
            -PI * sx * sy * e,
            PI * cx * cy * e,
            -2.0 * cx * sy * e,
            -PI * PI * sx * cy * e,
            -PI * PI * cx * sy * e,
            -2.0 * PI * cx * cy * e,
        ]
    });
    let v2 = velocity.clone();
    let laplacian: Field = Arc::new(move |x| v2(x).iter().map(|u| (4.0 - 2.0 * PI * PI) * u).collect());
    manufactured(
        "decaying-3d",
        3,
        nu,
        velocity,
        gradient,
        Arc::new(|x| x[0] * x[0] + x[1] * x[1] + x[2] * x[2] - 1.0),
        laplacian,
        Arc::new(|x| vec![2.0 * x[0], 2.0 * x[1], 2.0 * x[2]]),
    )
}

/// `u = (x^2, -2xy)`, `p = xy - 1/4`: inside the discrete spaces for `m >= 2`.
pub fn quadratic_2d(nu: f64) -> ProblemDefinition {
    manufactured(
        "quadratic-2d",
        2,
        nu,
        Arc::new(|x| vec![x[0] * x[0], -2.0 * x[0] * x[1]]),
        Arc::new(|x| vec![2.0 * x[0], 0.0, -2.0 * x[1], -2.0 * x[0]]),
        Arc::new(|x| x[0] * x[1] - 0.25),
        Arc::new(|_| vec![2.0, 0.0]),
        Arc::new(|x| vec![x[1], x[0]]),
    )
}

/// `u = (y^2, x^2, xy)` with `p = x + y + z - 3/2`, in the spaces for `m >= 2`.
pub fn quadratic_3d(nu: f64) -> ProblemDefinition {
    manufactured(
        "quadratic-3d",
        3,
        nu,
        Arc::new(|x| vec![x[1] * x[1], x[0] * x[0], x[0] * x[1]]),
        Arc::new(|x| vec![0.0, 2.0 * x[1], 0.0, 2.0 * x[0], 0.0, 0.0, x[1], x[0], 0.0]),
        Arc::new(|x| x[0] + x[1] + x[2] - 1.5),
        Arc::new(|_| vec![2.0, 2.0, 0.0]),
        Arc::new(|_| vec![1.0, 1.0, 1.0]),
    )
}

pub const LID_TOLERANCE: f64 = 1e-12;

/// Example 3: lid velocity `(4x(1-x), 0)` on `y = 1`, no slip elsewhere.
pub fn lid_driven_cavity(nu: f64) -> ProblemDefinition {
    let on_lid = |x: &Point| x[1] >= 1.0 - LID_TOLERANCE;
    ProblemDefinition {
        name: "lid-driven-cavity".into(),
        dim: 2,
        nu,
        source: Arc::new(|_| vec![0.0, 0.0]),
        boundary: Arc::new(move |x| {
            if on_lid(x) {
                vec![4.0 * x[0] * (1.0 - x[0]), 0.0]
            } else {
                vec![0.0, 0.0]
            }
        }),
        boundary_gradient: Some(Arc::new(move |x| {
            if on_lid(x) {
                vec![4.0 - 8.0 * x[0], 0.0, 0.0, 0.0]
            } else {
                vec![0.0; 4]
            }
        })),
        exact: None,
    }
}

/// Built-in example by number (2 shares the data of 1).
pub fn example(number: u32, nu: f64) -> Result<ProblemDefinition> {
    if !(nu > 0.0) {
        return Err(Error::Config(format!("viscosity must be positive, got {nu}")));
    }
    match number {
        1 | 2 => Ok(trigonometric_2d(nu)),
        3 => Ok(lid_driven_cavity(nu)),
        4 => Ok(exponential_3d(nu)),
        5 => Ok(decaying_3d(nu)),
        _ => Err(Error::Config(format!("unknown example {number}; expected 1-5"))),
    }
}

/// Fourth-order central difference of `f` along `axis`.
fn derivative(f: &dyn Fn(&Point) -> Vec<f64>, x: &Point, axis: usize, h: f64) -> Vec<f64> {
    let at = |s: f64| {
        let mut y = *x;
        y[axis] += s;
        f(&y)
    };
    let (a, b, c, d) = (at(2.0 * h), at(h), at(-h), at(-2.0 * h));
    (0..a.len()).map(|i| (-a[i] + 8.0 * b[i] - 8.0 * c[i] + d[i]) / (12.0 * h)).collect()
}

impl ProblemDefinition {
    /// Checks `grad u`, `div u = 0` and `f = -nu lap u + grad p` at
    /// `samples` pseudo-random points of the unit box by finite differences.
    pub fn validate(&self, samples: usize) -> Result<()> {
        let Some(ex) = &self.exact else { return Ok(()) };
        let d = self.dim;
        let h = 1e-3;
        let mut state = 0x9e37_79b9_7f4a_7c15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let fail = |what: &str, x: &Point, err: f64| {
            Err(Error::Config(format!(
                "problem '{}' is inconsistent: {what} off by {err:.3e} at {x:?}",
                self.name
            )))
        };
        for _ in 0..samples {
            let mut x = [0.0; 3];
            for xi in x.iter_mut().take(d) {
                *xi = 0.05 + 0.9 * next();
            }
            let g = (ex.gradient)(&x);
            let scale = g.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            for j in 0..d {
                let du = derivative(&*ex.velocity, &x, j, h);
                for i in 0..d {
                    let err = (du[i] - g[i * d + j]).abs();
                    if err > 1e-8 * scale {
                        return fail("velocity gradient", &x, err);
                    }
                }
            }
            let div: f64 = (0..d).map(|i| g[i * d + i]).sum();
            if div.abs() > 1e-8 * scale {
                return fail("divergence", &x, div.abs());
            }
            let f = (self.source)(&x);
            let pf = |y: &Point| vec![(ex.pressure)(y)];
            let mut resid = vec![0.0; d];
            for j in 0..d {
                let dg = derivative(&*ex.gradient, &x, j, h);
                let dp = derivative(&pf, &x, j, h)[0];
                resid[j] += dp;
                for i in 0..d {
                    resid[i] -= self.nu * dg[i * d + j];
                }
            }
            let lap = (ex.laplacian)(&x);
            let gp = (ex.pressure_gradient)(&x);
            for j in 0..d {
                let dlap: f64 = (0..d).map(|a| derivative(&*ex.gradient, &x, a, h)[j * d + a]).sum();
                let dp = derivative(&pf, &x, j, h)[0];
                let lscale = lap.iter().fold(1.0f64, |a, v| a.max(v.abs()));
                if (dlap - lap[j]).abs() > 1e-8 * lscale {
                    return fail("laplacian", &x, (dlap - lap[j]).abs());
                }
                if (dp - gp[j]).abs() > 1e-8 * gp.iter().fold(1.0f64, |a, v| a.max(v.abs())) {
                    return fail("pressure gradient", &x, (dp - gp[j]).abs());
                }
            }
            let fscale = f.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            for i in 0..d {
                let err = (resid[i] - f[i]).abs();
                if err > 1e-8 * fscale {
                    return fail("source term", &x, err);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn built_in_examples_are_consistent() {
        for n in 1..=5 {
            example(n, 1.0).unwrap().validate(100).unwrap();
        }
        example(1, 0.01).unwrap().validate(100).unwrap();
        quadratic_2d(1.0).validate(100).unwrap();
        quadratic_3d(2.0).validate(100).unwrap();
    }

    #[test]
    fn broken_source_is_rejected() {
        let mut p = trigonometric_2d(1.0);
        p.source = Arc::new(|x| vec![x[0], 0.0]);
        assert!(matches!(p.validate(10), Err(Error::Config(_))));
    }

    #[test]
    fn cavity_data_is_tangential() {
        let p = lid_driven_cavity(1.0);
        assert_eq!((p.boundary)(&[0.5, 1.0, 0.0]), vec![1.0, 0.0]);
        assert_eq!((p.boundary)(&[0.5, 0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!((p.boundary)(&[0.0, 1.0, 0.0]), vec![0.0, 0.0]);
        assert!(example(7, 1.0).is_err());
        assert!(example(1, 0.0).is_err());
    }
}
