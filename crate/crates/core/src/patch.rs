//! Element patches grown through face neighbours and truncated to the
//! `#S` nearest barycenters.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{distance, Mesh, Point};

#[derive(Debug, Clone, PartialEq)]
pub struct ElementPatch {
    pub owner: usize,
    /// Owner first, then by increasing barycenter distance.
    pub members: Vec<usize>,
    pub collocation_points: Vec<Point>,
}

impl ElementPatch {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchConfig {
    pub patch_size: usize,
}

/// `#S` for orders 1..=3.
pub fn default_patch_size(dim: usize, m: usize) -> Result<usize> {
    match (dim, m) {
        (2, 1) => Ok(5),
        (2, 2) => Ok(10),
        (2, 3) => Ok(15),
        (3, 1) => Ok(8),
        (3, 2) => Ok(18),
        (3, 3) => Ok(36),
        (2 | 3, _) => Err(Error::UnsupportedOrder(m)),
        _ => Err(Error::Config(format!("dimension {dim} not supported"))),
    }
}

/// Grown candidate set for `owner`: face-neighbour rounds until at least
/// `size` elements are collected, followed by `extra_rounds` further rounds.
/// Insertion order is round by round, each round sorted by index.
pub fn grow(mesh: &Mesh, owner: usize, size: usize, extra_rounds: usize) -> Result<Vec<usize>> {
    let mut members = vec![owner];
    let mut seen = vec![false; mesh.num_elements()];
    seen[owner] = true;
    let mut frontier = vec![owner];
    let mut extra = 0;
    loop {
        if members.len() >= size {
            if extra == extra_rounds {
                break;
            }
            extra += 1;
        }
        let mut next = Vec::new();
        for &k in &frontier {
            for nb in mesh.face_neighbors(k) {
                if !seen[nb] {
                    seen[nb] = true;
                    next.push(nb);
                }
            }
        }
        if next.is_empty() {
            if members.len() >= size {
                break;
            }
            return Err(Error::GrowthStall {
                element: owner,
                found: members.len(),
                requested: size,
            });
        }
        next.sort_unstable();
        members.extend_from_slice(&next);
        frontier = next;
    }
    Ok(members)
}

/// Sort by barycenter distance to the owner, ties by element index.
/// Relative distance below which two candidates are tied.
pub const TIE_TOL: f64 = 1e-10;

pub fn sort_by_distance(mesh: &Mesh, owner: usize, members: &mut [usize]) {
    let x0 = mesh.elements[owner].barycenter;
    let mut keyed: Vec<(f64, usize)> = members
        .iter()
        .map(|&j| (distance(&mesh.elements[j].barycenter, &x0), j))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    // Distances equal up to rounding count as ties: runs within TIE_TOL of
    // their first entry are reordered by index.
    let tol = TIE_TOL * mesh.elements[owner].diameter;
    let mut start = 0;
    while start < keyed.len() {
        let mut end = start + 1;
        while end < keyed.len() && keyed[end].0 - keyed[start].0 <= tol {
            end += 1;
        }
        keyed[start..end].sort_by_key(|e| e.1);
        start = end;
    }
    for (slot, (_, j)) in members.iter_mut().zip(keyed) {
        *slot = j;
    }
}

fn make_patch(mesh: &Mesh, owner: usize, members: Vec<usize>) -> ElementPatch {
    let collocation_points = members.iter().map(|&j| mesh.elements[j].barycenter).collect();
    ElementPatch {
        owner,
        members,
        collocation_points,
    }
}

pub fn build_patch(mesh: &Mesh, owner: usize, size: usize) -> Result<ElementPatch> {
    let mut members = grow(mesh, owner, size, 0)?;
    sort_by_distance(mesh, owner, &mut members);
    members.truncate(size);
    debug_assert_eq!(members[0], owner);
    Ok(make_patch(mesh, owner, members))
}

/// Untruncated patch after `rounds` growth rounds past the `#S` threshold.
pub fn enlarged_patch(mesh: &Mesh, owner: usize, size: usize, rounds: usize) -> Result<ElementPatch> {
    let mut members = grow(mesh, owner, size, rounds)?;
    sort_by_distance(mesh, owner, &mut members);
    Ok(make_patch(mesh, owner, members))
}

pub fn build_patches(mesh: &Mesh, config: &PatchConfig) -> Result<Vec<ElementPatch>> {
    let n = mesh.num_elements();
    if config.patch_size == 0 {
        return Err(Error::Config("patch size must be positive".into()));
    }
    if config.patch_size > n {
        return Err(Error::Config(format!(
            "patch size {} exceeds the {} mesh elements",
            config.patch_size, n
        )));
    }
    (0..n)
        .into_par_iter()
        .map(|k| build_patch(mesh, k, config.patch_size))
        .collect()
}
