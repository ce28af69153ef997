//! CSV tables of error measures and legacy VTK files of solution fields.

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::{consecutive_orders, ErrorReport};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::reconstruction::Spaces;

pub const CSV_HEADER: &str =
    "h,elements,energy_Up,l2_U,l2_p,energy_u,l2_u,order_energy_Up,order_l2_U,order_l2_p,order_energy_u,order_l2_u";

/// One row per report, orders against the previous row; the first row leaves
/// the order columns empty.
pub fn format_csv(reports: &[ErrorReport]) -> Result<String> {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let orders: Vec<Vec<f64>> = if reports.len() >= 2 {
        let h: Vec<f64> = reports.iter().map(|r| r.h).collect();
        (0..5)
            .map(|m| {
                let e: Vec<f64> = reports.iter().map(|r| r.measures()[m]).collect();
                consecutive_orders(&h, &e)
            })
            .collect::<Result<_>>()?
    } else {
        vec![vec![]; 5]
    };
    for (i, r) in reports.iter().enumerate() {
        let _ = write!(out, "{:.6e},{}", r.h, r.elements);
        for v in r.measures() {
            let _ = write!(out, ",{v:.6e}");
        }
        for o in &orders {
            if i == 0 {
                out.push(',');
            } else {
                let _ = write!(out, ",{:.4}", o[i - 1]);
            }
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_csv(path: &Path, reports: &[ErrorReport]) -> Result<()> {
    write_text(path, &format_csv(reports)?)
}

/// Legacy ASCII unstructured grid. Every simplex of every element becomes a
/// cell with its own copy of the vertices, so the discontinuous fields are
/// sampled from the owning element.
pub fn format_vtk(mesh: &Mesh, spaces: &Spaces, pressure: &[f64], velocity: &[f64], title: &str) -> String {
    let d = mesh.dim;
    let nv = d + 1;
    let mut pts = Vec::new();
    let mut vel = Vec::new();
    let mut pre = Vec::new();
    for (k, e) in mesh.elements.iter().enumerate() {
        for s in &e.simplices {
            for x in s {
                pts.push(*x);
                vel.push(spaces.vector.field_value(k, x, velocity));
                pre.push(spaces.scalar.field_value(k, x, pressure)[0]);
            }
        }
    }
    let ncells = pts.len() / nv;
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "{}", title.lines().next().unwrap_or("patchls"));
    let _ = writeln!(out, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", pts.len());
    for p in &pts {
        let _ = writeln!(out, "{:.12e} {:.12e} {:.12e}", p[0], p[1], p[2]);
    }
    let _ = writeln!(out, "CELLS {} {}", ncells, ncells * (nv + 1));
    for c in 0..ncells {
        let _ = write!(out, "{nv}");
        for i in 0..nv {
            let _ = write!(out, " {}", c * nv + i);
        }
        out.push('\n');
    }
    let _ = writeln!(out, "CELL_TYPES {ncells}");
    let ty = if d == 2 { 5 } else { 10 };
    for _ in 0..ncells {
        let _ = writeln!(out, "{ty}");
    }
    let _ = writeln!(out, "POINT_DATA {}", pts.len());
    let _ = writeln!(out, "VECTORS velocity double");
    for v in &vel {
        let z = if d == 3 { v[2] } else { 0.0 };
        let _ = writeln!(out, "{:.12e} {:.12e} {:.12e}", v[0], v[1], z);
    }
    let _ = writeln!(out, "SCALARS pressure double 1\nLOOKUP_TABLE default");
    for p in &pre {
        let _ = writeln!(out, "{p:.12e}");
    }
    let _ = writeln!(out, "SCALARS speed double 1\nLOOKUP_TABLE default");
    for v in &vel {
        let s: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let _ = writeln!(out, "{s:.12e}");
    }
    out
}

pub fn write_vtk(path: &Path, mesh: &Mesh, spaces: &Spaces, pressure: &[f64], velocity: &[f64], title: &str) -> Result<()> {
    write_text(path, &format_vtk(mesh, spaces, pressure, velocity, title))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(h: f64, e: f64) -> ErrorReport {
        ErrorReport {
            h,
            elements: (2.0 / (h * h)).round() as usize,
            energy_up: e,
            l2_gradient: e * h,
            l2_pressure: e,
            energy_u: e,
            l2_velocity: e * h,
            dofs: [0, 0],
        }
    }

    #[test]
    fn empty_record_is_header_only() {
        assert_eq!(format_csv(&[]).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn second_row_carries_orders() {
        let csv = format_csv(&[report(0.1, 1.0), report(0.05, 0.25)]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        let r1: Vec<&str> = lines[1].split(',').collect();
        let r2: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(r1.len(), 12);
        assert!(r1[7..].iter().all(|s| s.is_empty()));
        assert_eq!(r2[7], "2.0000");
        assert_eq!(r2[8], "3.0000");
        assert_eq!(r2[1], "800");
    }

    #[test]
    fn non_monotone_rows_are_rejected() {
        assert!(format_csv(&[report(0.05, 1.0), report(0.1, 0.5)]).is_err());
    }
}
