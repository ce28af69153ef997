#![allow(dead_code)]

use std::path::Path;
use std::process::Command;

use nalgebra::{DMatrix, DVector};
use patchls::analysis::{functional_p, functional_u, polarize};
use patchls::assembly::{assemble_step1, assemble_step2, SolverConfig};
use patchls::mesh::{Mesh, Point};
use patchls::patch::ElementPatch;
use patchls::poly::{tensor_param_entries, BasisKind, LocalFrame, PolyBasis};
use patchls::problems::ProblemDefinition;
use patchls::reconstruction::Spaces;

pub fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Largest entrywise difference between the assembled matrix and the one
/// recovered from point evaluations of the functional, relative to the
/// largest entry; same for the right-hand side.
pub struct OracleGap {
    pub matrix: f64,
    pub rhs: f64,
}

fn gap(a: &DMatrix<f64>, want: &DMatrix<f64>, rhs: &[f64], want_rhs: &[f64]) -> OracleGap {
    let scale = want.amax().max(f64::MIN_POSITIVE);
    let rscale = want_rhs.iter().fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
    OracleGap {
        matrix: (a - want).amax() / scale,
        rhs: rhs.iter().zip(want_rhs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / rscale,
    }
}

pub fn step1_gap(mesh: &Mesh, spaces: &Spaces, config: &SolverConfig, problem: &ProblemDefinition) -> OracleGap {
    let sys = assemble_step1(mesh, spaces, config, problem).unwrap();
    let bs = mesh.dim * mesh.dim;
    let n = sys.num_dofs();
    let (want, want_rhs) = polarize(n, |x| {
        let (g, p) = patchls::assembly::split_step1(bs, x);
        functional_p(mesh, spaces, config, problem, &g, &p).unwrap()
    });
    gap(&sys.matrix.to_dense(), &want, &sys.rhs, &want_rhs)
}

pub fn step2_gap(
    mesh: &Mesh,
    spaces: &Spaces,
    config: &SolverConfig,
    problem: &ProblemDefinition,
    gradient: &[f64],
) -> OracleGap {
    let sys = assemble_step2(mesh, spaces, config, problem, gradient).unwrap();
    let (want, want_rhs) = polarize(sys.num_dofs(), |v| functional_u(mesh, spaces, config, problem, gradient, v).unwrap());
    gap(&sys.matrix.to_dense(), &want, &sys.rhs, &want_rhs)
}

/// Constrained least squares through the full KKT system: match the patch
/// nodal values in the Frobenius sense, interpolate the owner exactly.
pub fn kkt_fit(mesh: &Mesh, basis: &PolyBasis, patch: &ElementPatch, nodal: &[f64]) -> DVector<f64> {
    let dim = basis.dim;
    let nf = basis.count();
    let ncomp = basis.kind.components(dim);
    let nv = basis.kind.nodal_values(dim);
    let owner = &mesh.elements[patch.owner];
    let frame = LocalFrame::new(owner.barycenter, owner.diameter);
    let tensor = basis.kind == BasisKind::CurlFreeTraceFreeTensor;
    let full = |g: &[f64]| -> Vec<f64> {
        if !tensor {
            return g.to_vec();
        }
        let mut v = vec![0.0; dim * dim];
        for (k, &(i, j)) in tensor_param_entries(dim).iter().enumerate() {
            v[i * dim + j] = g[k];
        }
        v[dim * dim - 1] = -(0..dim - 1).map(|i| v[i * dim + i]).sum::<f64>();
        v
    };
    let n = patch.members.len();
    let mut phi = DMatrix::zeros(n * ncomp, nf);
    let mut rhs = DVector::zeros(n * ncomp);
    for i in 0..n {
        let vals = basis.evaluate(&frame, &patch.collocation_points[i]);
        let g = full(&nodal[i * nv..(i + 1) * nv]);
        for c in 0..ncomp {
            for f in 0..nf {
                phi[(i * ncomp + c, f)] = vals[f][c];
            }
            rhs[i * ncomp + c] = g[c];
        }
    }
    let cons: Vec<usize> = if tensor {
        tensor_param_entries(dim).iter().map(|&(i, j)| i * dim + j).collect()
    } else {
        (0..ncomp).collect()
    };
    let vals0 = basis.evaluate(&frame, &patch.collocation_points[0]);
    let g0 = full(&nodal[..nv]);
    let nk = cons.len();
    let mut kkt = DMatrix::zeros(nf + nk, nf + nk);
    kkt.view_mut((0, 0), (nf, nf)).copy_from(&(phi.transpose() * &phi));
    let mut r = DVector::zeros(nf + nk);
    r.rows_mut(0, nf).copy_from(&(phi.transpose() * &rhs));
    for (row, &c) in cons.iter().enumerate() {
        for f in 0..nf {
            kkt[(nf + row, f)] = vals0[f][c];
            kkt[(f, nf + row)] = vals0[f][c];
        }
        r[nf + row] = g0[c];
    }
    kkt.full_piv_lu().solve(&r).expect("singular KKT system").rows(0, nf).into_owned()
}

/// Legacy ASCII unstructured grid, parsed strictly: every section header and
/// count must be present and consistent.
#[derive(Debug)]
pub struct Vtk {
    pub points: Vec<Point>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u32>,
    pub vectors: Vec<(String, Vec<Point>)>,
    pub scalars: Vec<(String, Vec<f64>)>,
}

pub fn parse_vtk(text: &str) -> Result<Vtk, String> {
    let head: Vec<&str> = text.lines().take(4).collect();
    if head.len() < 4 || !head[0].starts_with("# vtk DataFile Version") {
        return Err("missing version line".into());
    }
    if head[2].trim() != "ASCII" {
        return Err("not ASCII".into());
    }
    if head[3].trim() != "DATASET UNSTRUCTURED_GRID" {
        return Err("not an unstructured grid".into());
    }
    let body: Vec<&str> = text.lines().skip(4).filter(|l| !l.trim().is_empty()).collect();
    let mut pos = 0;
    let take = |pos: &mut usize| -> Result<&str, String> {
        let l = body.get(*pos).ok_or_else(|| "unexpected end of file".to_string())?;
        *pos += 1;
        Ok(l)
    };
    let num = |s: &str| s.parse::<f64>().map_err(|e| format!("bad number {s:?}: {e}"));
    let int = |s: &str| s.parse::<usize>().map_err(|e| format!("bad integer {s:?}: {e}"));

    let h: Vec<&str> = take(&mut pos)?.split_whitespace().collect();
    if h.len() != 3 || h[0] != "POINTS" {
        return Err("bad POINTS header".into());
    }
    let np = int(h[1])?;
    let mut points = Vec::with_capacity(np);
    for _ in 0..np {
        let c: Vec<f64> = take(&mut pos)?.split_whitespace().map(num).collect::<Result<_, _>>()?;
        if c.len() != 3 {
            return Err("point needs three coordinates".into());
        }
        points.push([c[0], c[1], c[2]]);
    }

    let h: Vec<&str> = take(&mut pos)?.split_whitespace().collect();
    if h.len() != 3 || h[0] != "CELLS" {
        return Err("bad CELLS header".into());
    }
    let (nc, size) = (int(h[1])?, int(h[2])?);
    let mut cells = Vec::with_capacity(nc);
    let mut seen = 0;
    for _ in 0..nc {
        let v: Vec<usize> = take(&mut pos)?.split_whitespace().map(int).collect::<Result<_, _>>()?;
        if v.is_empty() || v[0] + 1 != v.len() {
            return Err("cell length mismatch".into());
        }
        if v[1..].iter().any(|&i| i >= np) {
            return Err("cell references a missing point".into());
        }
        seen += v.len();
        cells.push(v[1..].to_vec());
    }
    if seen != size {
        return Err(format!("CELLS size {size} but {seen} integers"));
    }

    let h: Vec<&str> = take(&mut pos)?.split_whitespace().collect();
    if h.len() != 2 || h[0] != "CELL_TYPES" || int(h[1])? != nc {
        return Err("bad CELL_TYPES header".into());
    }
    let mut cell_types = Vec::with_capacity(nc);
    for _ in 0..nc {
        cell_types.push(take(&mut pos)?.trim().parse::<u32>().map_err(|e| e.to_string())?);
    }

    let h: Vec<&str> = take(&mut pos)?.split_whitespace().collect();
    if h.len() != 2 || h[0] != "POINT_DATA" || int(h[1])? != np {
        return Err("bad POINT_DATA header".into());
    }
    let mut vectors = Vec::new();
    let mut scalars = Vec::new();
    while pos < body.len() {
        let h: Vec<&str> = take(&mut pos)?.split_whitespace().collect();
        match h.first().copied() {
            Some("VECTORS") if h.len() == 3 => {
                let mut v = Vec::with_capacity(np);
                for _ in 0..np {
                    let c: Vec<f64> = take(&mut pos)?.split_whitespace().map(num).collect::<Result<_, _>>()?;
                    if c.len() != 3 {
                        return Err("vector needs three components".into());
                    }
                    v.push([c[0], c[1], c[2]]);
                }
                vectors.push((h[1].to_string(), v));
            }
            Some("SCALARS") if h.len() >= 3 => {
                if take(&mut pos)?.trim() != "LOOKUP_TABLE default" {
                    return Err("missing LOOKUP_TABLE".into());
                }
                let mut v = Vec::with_capacity(np);
                for _ in 0..np {
                    v.push(num(take(&mut pos)?.trim())?);
                }
                scalars.push((h[1].to_string(), v));
            }
            _ => return Err(format!("unknown data section {h:?}")),
        }
    }
    Ok(Vtk {
        points,
        cells,
        cell_types,
        vectors,
        scalars,
    })
}

/// Reads the file with meshio and prints `points cells velocity_norm`;
/// `None` when python or meshio is unavailable.
pub fn meshio_summary(path: &Path) -> Option<(usize, usize, f64)> {
    let script = "import sys, meshio, numpy as np\n\
                  m = meshio.read(sys.argv[1])\n\
                  n = sum(len(c.data) for c in m.cells)\n\
                  v = m.point_data['velocity']\n\
                  print(len(m.points), n, float(np.linalg.norm(v)))\n";
    let out = Command::new("python3").arg("-c").arg(script).arg(path).output().ok()?;
    if !out.status.success() {
        let err = String::from_utf8_lossy(&out.stderr);
        if err.contains("No module named") {
            return None;
        }
        panic!("meshio failed to read {}: {err}", path.display());
    }
    let s = String::from_utf8(out.stdout).ok()?;
    let t: Vec<&str> = s.split_whitespace().collect();
    Some((t[0].parse().ok()?, t[1].parse().ok()?, t[2].parse().ok()?))
}
