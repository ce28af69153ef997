//! Small meshes shared by tests and examples.

use crate::mesh::Mesh;

/// Triangle `K0 = ABC` with its three face neighbours `ACD`, `ABF`, `BCE`,
/// with A(1,0), B(-0.5,-0.6), C(-0.5,0.8), D(1.2,1.5), E(-2,0), F(0.8,-1.5).
pub fn four_triangle_patch() -> Mesh {
    let v = vec![
        [1.0, 0.0, 0.0],
        [-0.5, -0.6, 0.0],
        [-0.5, 0.8, 0.0],
        [1.2, 1.5, 0.0],
        [-2.0, 0.0, 0.0],
        [0.8, -1.5, 0.0],
    ];
    let cells = vec![vec![0, 1, 2], vec![0, 2, 3], vec![1, 0, 5], vec![2, 1, 4]];
    Mesh::from_cells(2, v, cells).expect("fixture mesh is valid")
}

/// Two triangles splitting the unit square along its diagonal.
pub fn two_triangle_square() -> Mesh {
    let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
    Mesh::from_cells(2, v, vec![vec![0, 1, 2], vec![0, 2, 3]]).expect("fixture mesh is valid")
}

/// Unit cube cut into four corner tetrahedra around a central regular one.
/// Unlike the six-tetrahedron cut, the barycenters are not coplanar.
pub fn five_tet_cube() -> Mesh {
    let v: Vec<_> = (0..8)
        .map(|i| [(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64])
        .collect();
    let cells = vec![vec![1, 2, 4, 7], vec![0, 1, 2, 4], vec![3, 1, 2, 7], vec![5, 1, 4, 7], vec![6, 2, 4, 7]];
    Mesh::from_cells(3, v, cells).expect("fixture mesh is valid")
}
