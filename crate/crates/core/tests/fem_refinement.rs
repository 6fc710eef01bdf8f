mod common;

use common::{example1, l2_distance, order, Locator};
use helmono::fem::{l2_error, BackgroundField, BoundaryBasis, BoundaryProjector, DifferenceSolver, HelmholtzOperator, SOLVE_PIVOT_REL};
use helmono::mesh::build_disk_mesh;

const HS: [f64; 3] = [0.1, 0.05, 0.025];

#[test]
fn background_field_fem_converges_at_second_order() {
    let (k, q0) = (1.0, 1.0);
    let basis = BoundaryBasis::new(4).unwrap();
    let exact = BackgroundField::new(k, q0, basis).unwrap();
    for j in [0usize, 1, 4, 8] {
        let errs: Vec<f64> = HS
            .iter()
            .map(|&h| {
                let mesh = build_disk_mesh::<f64>(h).unwrap();
                let op = HelmholtzOperator::new(&mesh, &vec![q0; mesh.num_triangles()], k, SOLVE_PIVOT_REL).unwrap();
                let load = BoundaryProjector::new(&mesh, basis).load(j, mesh.num_nodes());
                let u = op.solve(&load);
                l2_error(&mesh, &u, |x, y| exact.eval_all_xy(x, y)[j])
            })
            .collect();
        for w in errs.windows(2) {
            let p = order(w[0], w[1]);
            println!("mode {j}: errors {:.3e} -> {:.3e}, order {p:.2}", w[0], w[1]);
            assert!(p >= 1.5, "mode {j}: observed order {p:.2}");
        }
    }
}

#[test]
fn difference_field_converges_under_refinement() {
    let sc = example1(0.0, 0.04, 0.08);
    let meshes: Vec<_> = HS.iter().map(|&h| build_disk_mesh::<f64>(h).unwrap()).collect();
    for j in [0usize, 1, 2] {
        let fields: Vec<Vec<f64>> = meshes
            .iter()
            .map(|m| {
                let q = sc.coefficient(m).unwrap();
                DifferenceSolver::new(m, &q, sc.q0, sc.k, sc.n1).unwrap().solve(j)
            })
            .collect();
        let d: Vec<f64> = (0..2)
            .map(|i| l2_distance(&meshes[i + 1], &fields[i + 1], &Locator::new(&meshes[i]), &fields[i]))
            .collect();
        let p = order(d[0], d[1]);
        println!("mode {j}: successive differences {:.3e}, {:.3e}, order {p:.2}", d[0], d[1]);
        assert!(p >= 1.5, "mode {j}: observed order {p:.2}");
    }
}
