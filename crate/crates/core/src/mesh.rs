//! Polygonal / tetrahedral partitions with face connectivity.
//!
//! Points are stored as `[f64; 3]` in both dimensions; the third coordinate
//! is zero for planar meshes.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub type Point = [f64; 3];

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn distance(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

fn max_pairwise_distance<'a>(points: impl Iterator<Item = &'a Point> + Clone) -> f64 {
    let mut out = 0.0f64;
    for (i, p) in points.clone().enumerate() {
        for q in points.clone().skip(i + 1) {
            out = out.max(distance(p, q));
        }
    }
    out
}

/// Measure (length / area / volume) of a simplex given by `dim + 1` points.
pub fn simplex_measure(dim: usize, pts: &[Point]) -> f64 {
    match dim {
        1 => distance(&pts[0], &pts[1]),
        2 => {
            let a = sub(&pts[1], &pts[0]);
            let b = sub(&pts[2], &pts[0]);
            0.5 * norm(&cross(&a, &b))
        }
        3 => {
            let a = sub(&pts[1], &pts[0]);
            let b = sub(&pts[2], &pts[0]);
            let c = sub(&pts[3], &pts[0]);
            dot(&a, &cross(&b, &c)).abs() / 6.0
        }
        _ => unreachable!("simplex dimension {dim}"),
    }
}

#[derive(Debug, Clone)]
pub struct Element {
    pub vertex_ids: Vec<usize>,
    pub face_ids: Vec<usize>,
    /// Collocation point of the element.
    pub barycenter: Point,
    pub diameter: f64,
    pub measure: f64,
    /// Simplicial sub-decomposition used for quadrature, `dim + 1` points each.
    pub simplices: Vec<Vec<Point>>,
}

#[derive(Debug, Clone)]
pub struct Face {
    pub vertex_ids: Vec<usize>,
    /// One entry for boundary faces, two (ascending) for interior faces.
    pub element_ids: Vec<usize>,
    /// Unit normal pointing out of `element_ids[0]`.
    pub normal: Point,
    pub measure: f64,
    /// Face diameter `h_e`.
    pub size: f64,
    /// Simplices (segments or triangles) covering the face.
    pub simplices: Vec<Vec<Point>>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.element_ids.len() == 1
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub dim: usize,
    pub vertices: Vec<Point>,
    pub elements: Vec<Element>,
    pub faces: Vec<Face>,
    pub interior_face_ids: Vec<usize>,
    pub boundary_face_ids: Vec<usize>,
    /// Largest element diameter.
    pub mesh_size: f64,
}

impl Mesh {
    /// Builds a mesh from vertex coordinates and element cells (vertex index lists).
    ///
    /// 2D cells are polygons listed counter-clockwise (clockwise input is
    /// reversed); 3D cells must be tetrahedra.
    pub fn from_cells(dim: usize, vertices: Vec<Point>, cells: Vec<Vec<usize>>) -> Result<Mesh> {
        if dim != 2 && dim != 3 {
            return Err(Error::Input(format!("unsupported dimension {dim}")));
        }
        let nv = vertices.len();
        let mut elements = Vec::with_capacity(cells.len());
        let mut face_map: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut faces: Vec<Face> = Vec::new();

        for (k, mut cell) in cells.into_iter().enumerate() {
            if let Some(&bad) = cell.iter().find(|&&v| v >= nv) {
                return Err(Error::Input(format!(
                    "element {k} references missing vertex {bad}"
                )));
            }
            let (barycenter, measure, simplices, local_faces) = if dim == 2 {
                if cell.len() < 3 {
                    return Err(Error::Input(format!("element {k} has fewer than 3 vertices")));
                }
                if signed_polygon_area(&vertices, &cell) < 0.0 {
                    log::warn!("element {k} is clockwise; reversing");
                    cell.reverse();
                }
                let (area, centroid) = polygon_area_centroid(&vertices, &cell);
                let simplices = if cell.len() == 3 {
                    vec![cell.iter().map(|&v| vertices[v]).collect()]
                } else {
                    (0..cell.len())
                        .map(|i| {
                            vec![
                                centroid,
                                vertices[cell[i]],
                                vertices[cell[(i + 1) % cell.len()]],
                            ]
                        })
                        .collect()
                };
                let local_faces: Vec<Vec<usize>> = (0..cell.len())
                    .map(|i| vec![cell[i], cell[(i + 1) % cell.len()]])
                    .collect();
                (centroid, area, simplices, local_faces)
            } else {
                if cell.len() != 4 {
                    return Err(Error::Input(format!(
                        "element {k}: only tetrahedra are supported in 3D"
                    )));
                }
                let pts: Vec<Point> = cell.iter().map(|&v| vertices[v]).collect();
                let vol = simplex_measure(3, &pts);
                let mut c = [0.0; 3];
                for p in &pts {
                    for a in 0..3 {
                        c[a] += 0.25 * p[a];
                    }
                }
                let local_faces = vec![
                    vec![cell[1], cell[2], cell[3]],
                    vec![cell[0], cell[2], cell[3]],
                    vec![cell[0], cell[1], cell[3]],
                    vec![cell[0], cell[1], cell[2]],
                ];
                (c, vol, vec![pts], local_faces)
            };
            let diameter = max_pairwise_distance(cell.iter().map(|&v| &vertices[v]));
            if !(measure > 1e-14 * diameter.powi(dim as i32)) {
                return Err(Error::DegenerateElement { element: k, measure });
            }

            let mut face_ids = Vec::with_capacity(local_faces.len());
            for fv in local_faces {
                let mut key = fv.clone();
                key.sort_unstable();
                match face_map.get(&key) {
                    Some(&fid) => {
                        let face = &mut faces[fid];
                        if face.element_ids.len() >= 2 {
                            return Err(Error::Topology(format!(
                                "face {:?} shared by more than two elements",
                                face.vertex_ids
                            )));
                        }
                        face.element_ids.push(k);
                        face_ids.push(fid);
                    }
                    None => {
                        let fid = faces.len();
                        face_map.insert(key, fid);
                        faces.push(make_face(dim, &vertices, fv, k, &barycenter));
                        face_ids.push(fid);
                    }
                }
            }
            elements.push(Element {
                vertex_ids: cell,
                face_ids,
                barycenter,
                diameter,
                measure,
                simplices,
            });
        }

        let mut interior_face_ids = Vec::new();
        let mut boundary_face_ids = Vec::new();
        for (i, f) in faces.iter().enumerate() {
            if f.is_boundary() {
                boundary_face_ids.push(i);
            } else {
                interior_face_ids.push(i);
            }
        }
        let mesh_size = elements.iter().map(|e| e.diameter).fold(0.0, f64::max);
        Ok(Mesh {
            dim,
            vertices,
            elements,
            faces,
            interior_face_ids,
            boundary_face_ids,
            mesh_size,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Elements sharing a face with element `k`, in face order.
    pub fn face_neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.elements[k].face_ids.iter().filter_map(move |&f| {
            let ids = &self.faces[f].element_ids;
            if ids.len() == 2 {
                Some(if ids[0] == k { ids[1] } else { ids[0] })
            } else {
                None
            }
        })
    }

    /// The two elements adjacent to an interior face and the unit normal
    /// pointing from the first (lower index) into the second.
    pub fn face_trace_pair(&self, face_id: usize) -> Result<(usize, usize, Point)> {
        let face = self
            .faces
            .get(face_id)
            .ok_or_else(|| Error::Contract(format!("face {face_id} does not exist")))?;
        if face.is_boundary() {
            return Err(Error::Contract(format!(
                "face {face_id} is a boundary face"
            )));
        }
        Ok((face.element_ids[0], face.element_ids[1], face.normal))
    }

    pub fn total_measure(&self) -> f64 {
        self.elements.iter().map(|e| e.measure).sum()
    }

    /// Pairs (element, face) violating `sigma_v * h_K <= h_e`.
    pub fn regularity_violations(&self, sigma_v: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (k, el) in self.elements.iter().enumerate() {
            for &f in &el.face_ids {
                if sigma_v * el.diameter > self.faces[f].size {
                    out.push((k, f));
                }
            }
        }
        out
    }

    /// Logs the first few faces violating the `sigma_v` regularity bound and
    /// returns how many there are.
    pub fn warn_regularity(&self, sigma_v: f64) -> usize {
        let v = self.regularity_violations(sigma_v);
        for &(k, f) in v.iter().take(10) {
            log::warn!(
                "element {k}: face {f} has size {:.3e} < sigma_v * h_K = {:.3e}",
                self.faces[f].size,
                sigma_v * self.elements[k].diameter
            );
        }
        v.len()
    }
}

fn make_face(dim: usize, vertices: &[Point], fv: Vec<usize>, owner: usize, owner_center: &Point) -> Face {
    let pts: Vec<Point> = fv.iter().map(|&v| vertices[v]).collect();
    let (mut normal, measure) = if dim == 2 {
        let t = sub(&pts[1], &pts[0]);
        let len = norm(&t);
        ([t[1] / len, -t[0] / len, 0.0], len)
    } else {
        let n = cross(&sub(&pts[1], &pts[0]), &sub(&pts[2], &pts[0]));
        let len = norm(&n);
        ([n[0] / len, n[1] / len, n[2] / len], 0.5 * len)
    };
    let mut centroid = [0.0; 3];
    for p in &pts {
        for a in 0..3 {
            centroid[a] += p[a] / pts.len() as f64;
        }
    }
    if dot(&normal, &sub(&centroid, owner_center)) < 0.0 {
        normal = [-normal[0], -normal[1], -normal[2]];
    }
    let size = max_pairwise_distance(pts.iter());
    Face {
        vertex_ids: fv,
        element_ids: vec![owner],
        normal,
        measure,
        size,
        simplices: vec![pts],
    }
}

fn signed_polygon_area(vertices: &[Point], cell: &[usize]) -> f64 {
    let n = cell.len();
    let mut a = 0.0;
    for i in 0..n {
        let p = &vertices[cell[i]];
        let q = &vertices[cell[(i + 1) % n]];
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

fn polygon_area_centroid(vertices: &[Point], cell: &[usize]) -> (f64, Point) {
    // Shift to the first vertex to limit cancellation.
    let o = vertices[cell[0]];
    let n = cell.len();
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let p = sub(&vertices[cell[i]], &o);
        let q = sub(&vertices[cell[(i + 1) % n]], &o);
        let w = p[0] * q[1] - q[0] * p[1];
        a += w;
        cx += (p[0] + q[0]) * w;
        cy += (p[1] + q[1]) * w;
    }
    let a = 0.5 * a;
    (a, [o[0] + cx / (6.0 * a), o[1] + cy / (6.0 * a), 0.0])
}

/// Uniform triangulation of the unit square (`2n^2` triangles) or Kuhn
/// subdivision of the unit cube (`6n^3` tetrahedra).
pub fn generate_structured(dim: usize, n: usize) -> Result<Mesh> {
    generate_structured_with(dim, n, Diagonal::Alternating)
}

/// Split of the squares of a structured 2D grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Diagonal {
    /// Every square cut from lower left to upper right.
    Uniform,
    /// Cut direction flips in a checkerboard pattern. With index tie
    /// breaking in the patches, the uniform cut biases every stencil the
    /// same way, which costs a full L2 order for odd m.
    Alternating,
}

/// As [`generate_structured`]; `diagonal` only affects 2D.
pub fn generate_structured_with(dim: usize, n: usize, diagonal: Diagonal) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::Input("structured mesh needs n >= 1".into()));
    }
    let h = 1.0 / n as f64;
    match dim {
        2 => {
            let idx = |i: usize, j: usize| j * (n + 1) + i;
            let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
            for j in 0..=n {
                for i in 0..=n {
                    vertices.push([i as f64 * h, j as f64 * h, 0.0]);
                }
            }
            let mut cells = Vec::with_capacity(2 * n * n);
            for j in 0..n {
                for i in 0..n {
                    let a = idx(i, j);
                    let b = idx(i + 1, j);
                    let c = idx(i + 1, j + 1);
                    let d = idx(i, j + 1);
                    if diagonal == Diagonal::Uniform || (i + j) % 2 == 0 {
                        cells.push(vec![a, b, c]);
                        cells.push(vec![a, c, d]);
                    } else {
                        cells.push(vec![a, b, d]);
                        cells.push(vec![b, c, d]);
                    }
                }
            }
            Mesh::from_cells(2, vertices, cells)
        }
        3 => {
            let idx = |i: usize, j: usize, k: usize| (k * (n + 1) + j) * (n + 1) + i;
            let mut vertices = Vec::with_capacity((n + 1).pow(3));
            for k in 0..=n {
                for j in 0..=n {
                    for i in 0..=n {
                        vertices.push([i as f64 * h, j as f64 * h, k as f64 * h]);
                    }
                }
            }
            const PERMS: [[usize; 3]; 6] = [
                [0, 1, 2],
                [0, 2, 1],
                [1, 0, 2],
                [1, 2, 0],
                [2, 0, 1],
                [2, 1, 0],
            ];
            let mut cells = Vec::with_capacity(6 * n * n * n);
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        for perm in PERMS {
                            let mut c = [i, j, k];
                            let mut tet = vec![idx(c[0], c[1], c[2])];
                            for &axis in &perm {
                                c[axis] += 1;
                                tet.push(idx(c[0], c[1], c[2]));
                            }
                            cells.push(tet);
                        }
                    }
                }
            }
            Mesh::from_cells(3, vertices, cells)
        }
        _ => Err(Error::Input(format!("unsupported dimension {dim}"))),
    }
}

/// Parses the ASCII mesh format: header `dim nv ne`, `nv` coordinate lines,
/// then `ne` lines `k v0 .. v(k-1)`. Lines starting with `#` are ignored.
pub fn parse_mesh(text: &str, expected_dim: Option<usize>) -> Result<Mesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let parse_err = |line: usize, message: String| Error::Parse { line, message };

    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(0, "empty mesh file".into()))?;
    let hv: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(hline, format!("bad header: {e}")))?;
    if hv.len() != 3 {
        return Err(parse_err(hline, "header must be `dim nv ne`".into()));
    }
    let (dim, nv, ne) = (hv[0], hv[1], hv[2]);
    if dim != 2 && dim != 3 {
        return Err(parse_err(hline, format!("unsupported dimension {dim}")));
    }
    if let Some(d) = expected_dim {
        if d != dim {
            return Err(parse_err(hline, format!("expected a {d}D mesh, file is {dim}D")));
        }
    }

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(0, "unexpected end of file in vertex block".into()))?;
        let c: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(ln, format!("bad coordinate: {e}")))?;
        if c.len() != dim {
            return Err(parse_err(ln, format!("expected {dim} coordinates, got {}", c.len())));
        }
        let mut p = [0.0; 3];
        p[..dim].copy_from_slice(&c);
        vertices.push(p);
    }

    let mut cells = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(0, "unexpected end of file in element block".into()))?;
        let v: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(ln, format!("bad element line: {e}")))?;
        if v.is_empty() || v[0] + 1 != v.len() {
            return Err(parse_err(ln, "element line must be `k v0 .. v(k-1)`".into()));
        }
        if let Some(&bad) = v[1..].iter().find(|&&i| i >= nv) {
            return Err(parse_err(ln, format!("vertex id {bad} out of range (nv = {nv})")));
        }
        cells.push(v[1..].to_vec());
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing data after element block".into()));
    }
    Mesh::from_cells(dim, vertices, cells)
}

/// Face-to-diameter ratio below which ingested meshes draw a warning. The
/// analysis only asks for some fixed positive bound.
pub const SIGMA_V: f64 = 1e-3;

pub fn load_mesh(path: impl AsRef<Path>, dim: usize) -> Result<Mesh> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let mesh = parse_mesh(&text, Some(dim))?;
    let bad = mesh.warn_regularity(SIGMA_V);
    if bad > 0 {
        log::warn!("{}: {bad} faces below sigma_v = {SIGMA_V:e}", path.as_ref().display());
    }
    Ok(mesh)
}

/// Serialises a mesh in the ASCII format read by [`parse_mesh`].
pub fn format_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {} {}", mesh.dim, mesh.vertices.len(), mesh.elements.len());
    for v in &mesh.vertices {
        let coords: Vec<String> = v[..mesh.dim].iter().map(|c| format!("{c:.17e}")).collect();
        let _ = writeln!(s, "{}", coords.join(" "));
    }
    for e in &mesh.elements {
        let ids: Vec<String> = e.vertex_ids.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(s, "{} {}", e.vertex_ids.len(), ids.join(" "));
    }
    s
}
