//! Helpers shared by the integration tests.
#![allow(dead_code)]

use helmono::forward::Scenario;
use helmono::mesh::{ScattererGeometry, TriMesh};

/// Uniform bucket grid over `[-1, 1]²` for evaluating P1 fields of one mesh
/// at arbitrary points.
pub struct Locator<'a> {
    mesh: &'a TriMesh<f64>,
    cells: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> Locator<'a> {
    pub fn new(mesh: &'a TriMesh<f64>) -> Self {
        let cells = ((mesh.num_triangles() as f64).sqrt() as usize).max(1);
        let mut buckets = vec![Vec::new(); cells * cells];
        let idx = |c: f64| (((c + 1.0) * 0.5 * cells as f64) as isize).clamp(0, cells as isize - 1) as usize;
        for t in 0..mesh.num_triangles() {
            let p = mesh.vertices(t);
            let (x0, x1) = (p.iter().map(|v| v[0]).fold(f64::MAX, f64::min), p.iter().map(|v| v[0]).fold(f64::MIN, f64::max));
            let (y0, y1) = (p.iter().map(|v| v[1]).fold(f64::MAX, f64::min), p.iter().map(|v| v[1]).fold(f64::MIN, f64::max));
            for i in idx(x0)..=idx(x1) {
                for j in idx(y0)..=idx(y1) {
                    buckets[j * cells + i].push(t);
                }
            }
        }
        Locator { mesh, cells, buckets }
    }

    fn barycentric(&self, t: usize, x: f64, y: f64) -> [f64; 3] {
        let [a, b, c] = self.mesh.vertices(t);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((x - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (y - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (y - a[1]) - (x - a[0]) * (b[1] - a[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// P1 value at `(x, y)`; points just outside the polygon are
    /// extrapolated from the closest triangle of the nearby buckets.
    pub fn eval(&self, nodal: &[f64], x: f64, y: f64) -> f64 {
        let n = self.cells as isize;
        let ci = (((x + 1.0) * 0.5 * self.cells as f64) as isize).clamp(0, n - 1);
        let cj = (((y + 1.0) * 0.5 * self.cells as f64) as isize).clamp(0, n - 1);
        let mut best = (f64::MIN, 0, [0.0; 3]);
        for r in 0..n {
            for j in (cj - r).max(0)..=(cj + r).min(n - 1) {
                for i in (ci - r).max(0)..=(ci + r).min(n - 1) {
                    for &t in &self.buckets[(j * n + i) as usize] {
                        let l = self.barycentric(t, x, y);
                        let worst = l[0].min(l[1]).min(l[2]);
                        if worst > best.0 {
                            best = (worst, t, l);
                        }
                    }
                }
            }
            if best.0 >= -1e-12 || (r > 0 && best.0 > f64::MIN) {
                break;
            }
        }
        let tri = self.mesh.triangles[best.1];
        (0..3).map(|k| best.2[k] * nodal[tri[k]]).sum()
    }
}

/// `‖u_fine − u_coarse‖_{L²}` with edge-midpoint quadrature on the fine mesh.
pub fn l2_distance(fine: &TriMesh<f64>, u_fine: &[f64], coarse: &Locator<'_>, u_coarse: &[f64]) -> f64 {
    let mut s = 0.0;
    for (t, tri) in fine.triangles.iter().enumerate() {
        let w = fine.signed_area(t) / 3.0;
        for p in 0..3 {
            let (a, b) = (fine.nodes[tri[p]], fine.nodes[tri[(p + 1) % 3]]);
            let (x, y) = (0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]));
            let d = 0.5 * (u_fine[tri[p]] + u_fine[tri[(p + 1) % 3]]) - coarse.eval(u_coarse, x, y);
            s += w * d * d;
        }
    }
    s.sqrt()
}

/// Single disk of radius 0.1 at (-0.2, 0) with q = 9 and 33 boundary modes.
pub fn example1(delta: f64, forward_h: f64, inversion_h: f64) -> Scenario {
    Scenario {
        k: 1.0,
        q0: 1.0,
        geometry: ScattererGeometry::Disk {
            center: [-0.2, 0.0],
            radius: 0.1,
        },
        q_inclusion: 9.0,
        q_min_assumed: 9.0,
        n1: 16,
        delta,
        d_tilde: 1,
        r0: None,
        noise_seed: 1,
        forward_h,
        inversion_h,
    }
}

/// Two disks of radius 0.1 at (∓0.35, ∓0.35) with q = 3.
pub fn example3(delta: f64) -> Scenario {
    Scenario {
        geometry: ScattererGeometry::Union {
            parts: vec![
                ScattererGeometry::Disk {
                    center: [-0.35, -0.35],
                    radius: 0.1,
                },
                ScattererGeometry::Disk {
                    center: [0.35, 0.35],
                    radius: 0.1,
                },
            ],
        },
        q_inclusion: 3.0,
        q_min_assumed: 3.0,
        d_tilde: 2,
        noise_seed: 3,
        ..example1(delta, 0.04, 0.08)
    }
}

/// Observed convergence order from two successive errors at halved mesh size.
pub fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}
