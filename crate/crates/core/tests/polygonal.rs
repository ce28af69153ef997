mod common;

use patchls::analysis::fitted_order;
use patchls::harness::{run_convergence, MeshFamily, RunConfig};
use patchls::mesh::load_mesh;
use patchls::problems::example;

fn family() -> MeshFamily {
    MeshFamily::Files {
        dim: 2,
        paths: vec![common::fixture("voronoi_250.mesh"), common::fixture("voronoi_1000.mesh")],
    }
}

#[test]
fn fixtures_are_valid_polygonal_meshes() {
    for (name, n) in [("voronoi_250.mesh", 250), ("voronoi_1000.mesh", 1000), ("voronoi_4000.mesh", 4000)] {
        let mesh = load_mesh(common::fixture(name), 2).unwrap();
        assert_eq!(mesh.num_elements(), n);
        assert!((mesh.total_measure() - 1.0).abs() < 1e-12);
        assert!(mesh.elements.iter().any(|e| e.vertex_ids.len() >= 6));
        assert!(mesh.elements.iter().all(|e| e.vertex_ids.len() >= 3));
    }
}

#[test]
fn example_2_converges_on_voronoi_cells() {
    let p = example(2, 1.0).unwrap();
    for m in [1, 2] {
        let rec = run_convergence(&p, &family(), &RunConfig::new(m)).unwrap();
        let h: Vec<f64> = rec.rows.iter().map(|r| r.report.h).collect();
        let e: Vec<f64> = rec.rows.iter().map(|r| r.report.energy_up).collect();
        let u: Vec<f64> = rec.rows.iter().map(|r| r.report.energy_u).collect();
        let (oe, ou) = (fitted_order(&h, &e).unwrap(), fitted_order(&h, &u).unwrap());
        assert!((oe - m as f64).abs() <= 0.3, "m={m}: energy_Up order {oe}");
        assert!((ou - m as f64).abs() <= 0.3, "m={m}: energy_u order {ou}");
        for r in &rec.rows {
            assert!(r.max_divergence <= 1e-10 * r.max_gradient);
            assert!(r.functional_p[0] <= r.functional_p[1]);
            assert!(r.functional_u[0] <= r.functional_u[1]);
        }
    }
}
