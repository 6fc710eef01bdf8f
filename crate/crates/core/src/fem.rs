//! P1 finite elements for `Δu + k² q u = 0` on the unit disk with Neumann data.

use crate::error::{Error, Result};
use crate::linalg::{LdltFactor, SparseSym};
use crate::mesh::{ScattererGeometry, TriMesh};
use crate::scalar::Real;
use crate::special;

const MIN_TRIANGLE_AREA: f64 = 1e-14;
/// `|J_l'(k√q0)|` below this fraction of `max(|J_{l−1}|, |J_l|, |J_{l+1}|)`
/// at the same argument is treated as a background resonance.
pub const RESONANCE_REL: f64 = 1e-8;
/// Pivot threshold relative to `‖K‖_F` for forward solves.
pub const SOLVE_PIVOT_REL: f64 = 1e-10;
/// Pivot threshold relative to `‖K‖_F` for inertia counts.
pub const INERTIA_PIVOT_REL: f64 = 1e-12;

/// Piecewise-constant refractive index, one value per triangle, in `[1e-6, 1e3]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField<T> {
    values: Vec<T>,
}

impl<T: Real> CoefficientField<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        let (lo, hi) = (T::c(1e-6), T::c(1e3));
        if let Some(v) = values.iter().find(|&&v| !(v >= lo && v <= hi)) {
            return Err(Error::invalid(format!("refractive index {v} outside [1e-6, 1e3]")));
        }
        Ok(CoefficientField { values })
    }

    pub fn constant(n_triangles: usize, q: T) -> Result<Self> {
        Self::new(vec![q; n_triangles])
    }

    /// `q0 + (q_inclusion − q0)·|T ∩ D|/|T|` per triangle. Triangles cut by
    /// the boundary of `D` get their area fraction from a 64×64 barycentric
    /// subdivision.
    pub fn from_geometry(mesh: &TriMesh<T>, geom: &ScattererGeometry, q0: T, q_inclusion: T) -> Result<Self> {
        let contrast = q_inclusion - q0;
        let values = (0..mesh.num_triangles())
            .map(|t| q0 + contrast * T::c(area_fraction(mesh, t, geom)))
            .collect();
        Self::new(values)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn area_fraction<T: Real>(mesh: &TriMesh<T>, t: usize, geom: &ScattererGeometry) -> f64 {
    let v = mesh.vertices(t).map(|p| [p[0].to_f64_lossy(), p[1].to_f64_lossy()]);
    let c = [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0];
    let hits = v.iter().chain(std::iter::once(&c)).filter(|p| geom.contains(p[0], p[1])).count();
    match hits {
        0 => return 0.0,
        4 => return 1.0,
        _ => {}
    }
    // centroids of the n² congruent sub-triangles
    let n = 64usize;
    let mut inside = 0usize;
    let at = |a: f64, b: f64| {
        let cc = 1.0 - a - b;
        [
            a * v[0][0] + b * v[1][0] + cc * v[2][0],
            a * v[0][1] + b * v[1][1] + cc * v[2][1],
        ]
    };
    let nf = n as f64;
    for i in 0..n {
        for j in 0..(n - i) {
            // upward sub-triangle
            let p = at((i as f64 + 1.0 / 3.0) / nf, (j as f64 + 1.0 / 3.0) / nf);
            inside += geom.contains(p[0], p[1]) as usize;
            if i + j + 1 < n {
                let p = at((i as f64 + 2.0 / 3.0) / nf, (j as f64 + 2.0 / 3.0) / nf);
                inside += geom.contains(p[0], p[1]) as usize;
            }
        }
    }
    inside as f64 / (n * n) as f64
}

fn checked_area<T: Real>(mesh: &TriMesh<T>, t: usize) -> Result<T> {
    let a = mesh.signed_area(t);
    if !(a >= T::c(MIN_TRIANGLE_AREA)) {
        return Err(Error::DegenerateTriangle {
            triangle: t,
            area: a.to_f64_lossy(),
        });
    }
    Ok(a)
}

/// Element stiffness matrix `∫ ∇φ_i·∇φ_j` of one P1 triangle.
pub fn element_stiffness<T: Real>(p: [[T; 2]; 3]) -> [[T; 3]; 3] {
    let area = ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]))
        * T::c(0.5);
    let mut b = [T::zero(); 3];
    let mut c = [T::zero(); 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        b[i] = p[j][1] - p[k][1];
        c[i] = p[k][0] - p[j][0];
    }
    let s = T::one() / (T::c(4.0) * area);
    let mut e = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            e[i][j] = (b[i] * b[j] + c[i] * c[j]) * s;
        }
    }
    e
}

/// Global stiffness matrix `K_ij = ∫_Ω ∇φ_i·∇φ_j`.
pub fn assemble_stiffness<T: Real>(mesh: &TriMesh<T>) -> Result<SparseSym<T>> {
    let mut trip = Vec::with_capacity(9 * mesh.num_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        checked_area(mesh, t)?;
        let e = element_stiffness(mesh.vertices(t));
        for i in 0..3 {
            for j in 0..3 {
                trip.push((tri[i], tri[j], e[i][j]));
            }
        }
    }
    SparseSym::from_triplets(mesh.num_nodes(), &trip)
}

/// Weighted mass matrix `∫_Ω w φ_i φ_j` for a per-triangle weight `w`.
pub fn assemble_mass<T: Real>(mesh: &TriMesh<T>, weights: &[T]) -> Result<SparseSym<T>> {
    if weights.len() != mesh.num_triangles() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} triangles",
            weights.len(),
            mesh.num_triangles()
        )));
    }
    let mut trip = Vec::with_capacity(9 * mesh.num_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let a = checked_area(mesh, t)?;
        let s = a * weights[t] / T::c(12.0);
        for i in 0..3 {
            for j in 0..3 {
                let f = if i == j { T::c(2.0) } else { T::one() };
                trip.push((tri[i], tri[j], f * s));
            }
        }
    }
    SparseSym::from_triplets(mesh.num_nodes(), &trip)
}

/// Orthonormal trigonometric basis of `L²(∂Ω)` on the unit circle.
///
/// Index 0 is the constant `1/√(2π)`; index `2l − 1` is `sin(lφ)/√π` and
/// index `2l` is `cos(lφ)/√π` for `l = 1..=n1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryBasis {
    pub n1: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Constant,
    Sin(usize),
    Cos(usize),
}

impl BoundaryBasis {
    pub fn new(n1: usize) -> Result<Self> {
        if n1 == 0 || n1 > special::MAX_ORDER - 1 {
            return Err(Error::invalid(format!("n1 = {n1} outside [1, {}]", special::MAX_ORDER - 1)));
        }
        Ok(BoundaryBasis { n1 })
    }

    /// Number of basis functions `2 n1 + 1`.
    pub fn len(&self) -> usize {
        2 * self.n1 + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn mode(&self, j: usize) -> Mode {
        assert!(j < self.len(), "basis index {j} out of range");
        match j {
            0 => Mode::Constant,
            j if j % 2 == 1 => Mode::Sin(j.div_ceil(2)),
            j => Mode::Cos(j / 2),
        }
    }

    /// Bessel order of the background field for index `j`.
    pub fn order(&self, j: usize) -> usize {
        match self.mode(j) {
            Mode::Constant => 0,
            Mode::Sin(l) | Mode::Cos(l) => l,
        }
    }

    /// Angular factor `Θ_j(φ)` with `g_j = Θ_j` on the circle.
    pub fn eval<T: Real>(&self, j: usize, phi: T) -> T {
        match self.mode(j) {
            Mode::Constant => T::one() / (T::c(2.0) * T::PI()).sqrt(),
            Mode::Sin(l) => (T::from_usize_lossy(l) * phi).sin() / T::PI().sqrt(),
            Mode::Cos(l) => (T::from_usize_lossy(l) * phi).cos() / T::PI().sqrt(),
        }
    }

    pub fn eval_all<T: Real>(&self, phi: T) -> Vec<T> {
        (0..self.len()).map(|j| self.eval(j, phi)).collect()
    }
}

/// Closed-form background fields `u_{q0}^j` on the unit disk, the solutions
/// of `Δu + k² q0 u = 0` with `∂_r u = g_j` on `r = 1`.
#[derive(Clone, Debug)]
pub struct BackgroundField<T> {
    basis: BoundaryBasis,
    kappa: T,
    /// `1 / (κ J_l'(κ))` per order `l`, where `κ = k√q0`.
    radial_scale: Vec<T>,
}

impl<T: Real> BackgroundField<T> {
    pub fn new(k: T, q0: T, basis: BoundaryBasis) -> Result<Self> {
        if !(k > T::zero() && q0 > T::zero()) {
            return Err(Error::invalid("k and q0 must be positive"));
        }
        let kappa = k * q0.sqrt();
        if kappa > T::c(special::MAX_ARG) {
            return Err(Error::invalid(format!("k·sqrt(q0) = {kappa} too large")));
        }
        let table = special::table(basis.n1 + 1, kappa);
        let mut radial_scale = Vec::with_capacity(basis.n1 + 1);
        for l in 0..=basis.n1 {
            let d = special::derivative_from_table(&table, l);
            // Measured against the neighbouring values: for κ ≪ l every J is
            // tiny but J_l' is far from a zero.
            let scale = table[l.saturating_sub(1)].abs().max(table[l].abs()).max(table[l + 1].abs());
            if !(d.abs() > T::c(RESONANCE_REL) * scale) {
                return Err(Error::BackgroundResonance {
                    order: l,
                    value: d.to_f64_lossy(),
                });
            }
            radial_scale.push(T::one() / (kappa * d));
        }
        Ok(BackgroundField {
            basis,
            kappa,
            radial_scale,
        })
    }

    pub fn basis(&self) -> BoundaryBasis {
        self.basis
    }

    /// All `N` fields at a Cartesian point.
    pub fn eval_all_xy(&self, x: T, y: T) -> Vec<T> {
        let r = x.hypot(y).min(T::one());
        let phi = y.atan2(x);
        self.eval_all_polar(r, phi)
    }

    pub fn eval_all_polar(&self, r: T, phi: T) -> Vec<T> {
        let jn = special::table(self.basis.n1, self.kappa * r);
        (0..self.basis.len())
            .map(|j| {
                let l = self.basis.order(j);
                jn[l] * self.radial_scale[l] * self.basis.eval(j, phi)
            })
            .collect()
    }

    pub fn eval_polar(&self, j: usize, r: T, phi: T) -> T {
        let l = self.basis.order(j);
        let jn = special::table(l, self.kappa * r);
        jn[l] * self.radial_scale[l] * self.basis.eval(j, phi)
    }

    /// `∂_r u^j(r, φ)`.
    pub fn radial_derivative(&self, j: usize, r: T, phi: T) -> T {
        let l = self.basis.order(j);
        let jn = special::table(l + 1, self.kappa * r);
        self.kappa * special::derivative_from_table(&jn, l) * self.radial_scale[l] * self.basis.eval(j, phi)
    }
}

/// Background fields `u_{q0}^j` at polar points `(r, φ)`.
pub fn background_field<T: Real>(k: T, q0: T, n1: usize, j: usize, points: &[(T, T)]) -> Result<Vec<T>> {
    let bg = BackgroundField::new(k, q0, BoundaryBasis::new(n1)?)?;
    if j >= bg.basis.len() {
        return Err(Error::invalid(format!("basis index {j} out of range")));
    }
    points
        .iter()
        .map(|&(r, phi)| {
            if !(r >= T::zero() && r <= T::one()) {
                return Err(Error::invalid(format!("radius {r} outside [0, 1]")));
            }
            Ok(bg.eval_polar(j, r, phi))
        })
        .collect()
}

/// Edge-midpoint quadrature points of triangle `t`; each carries weight `area/3`.
pub fn midpoints<T: Real>(mesh: &TriMesh<T>, t: usize) -> [[T; 2]; 3] {
    let [p, q, r] = mesh.vertices(t);
    let h = T::c(0.5);
    [
        [(p[0] + q[0]) * h, (p[1] + q[1]) * h],
        [(q[0] + r[0]) * h, (q[1] + r[1]) * h],
        [(r[0] + p[0]) * h, (r[1] + p[1]) * h],
    ]
}

/// Boundary quadrature: `B[i][n] = ∫_{∂Ω_h} g_i φ_n ds` with two Gauss points
/// per boundary edge. `Bᵀ` applied to a nodal trace gives the pairings
/// `∫ g_i v ds`; row `i` is also the Neumann load vector of `g_i`.
#[derive(Clone, Debug)]
pub struct BoundaryProjector<T> {
    basis: BoundaryBasis,
    /// Per basis function, `(node, weight)` entries.
    rows: Vec<Vec<(usize, T)>>,
}

impl<T: Real> BoundaryProjector<T> {
    pub fn new(mesh: &TriMesh<T>, basis: BoundaryBasis) -> Self {
        let g = T::c(0.5 / 3f64.sqrt());
        let gauss = [T::c(0.5) - g, T::c(0.5) + g];
        let mut dense: Vec<std::collections::BTreeMap<usize, T>> = vec![Default::default(); basis.len()];
        for &[a, b] in &mesh.boundary_edges {
            let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
            let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
            let w = len * T::c(0.5);
            for &s in &gauss {
                let x = pa[0] + s * (pb[0] - pa[0]);
                let y = pa[1] + s * (pb[1] - pa[1]);
                let phi = y.atan2(x);
                for (i, row) in dense.iter_mut().enumerate() {
                    let gi = basis.eval(i, phi) * w;
                    *row.entry(a).or_insert(T::zero()) += gi * (T::one() - s);
                    *row.entry(b).or_insert(T::zero()) += gi * s;
                }
            }
        }
        BoundaryProjector {
            basis,
            rows: dense.into_iter().map(|m| m.into_iter().collect()).collect(),
        }
    }

    pub fn basis(&self) -> BoundaryBasis {
        self.basis
    }

    /// `∫_{∂Ω} g_i v ds` for nodal values `v`.
    pub fn pair(&self, i: usize, v: &[T]) -> T {
        self.rows[i].iter().map(|&(n, w)| w * v[n]).sum()
    }

    /// Neumann load vector of `g_i` over `n_nodes` nodes.
    pub fn load(&self, i: usize, n_nodes: usize) -> Vec<T> {
        let mut f = vec![T::zero(); n_nodes];
        for &(n, w) in &self.rows[i] {
            f[n] += w;
        }
        f
    }
}

/// `∫_{∂Ω} g_i v ds` for a nodal trace `v`.
pub fn boundary_pairing<T: Real>(mesh: &TriMesh<T>, trace: &[T], n1: usize, i: usize) -> Result<T> {
    let basis = BoundaryBasis::new(n1)?;
    if i >= basis.len() {
        return Err(Error::invalid(format!("basis index {i} out of range")));
    }
    if trace.len() != mesh.num_nodes() {
        return Err(Error::DimensionMismatch("trace length differs from node count".into()));
    }
    Ok(BoundaryProjector::new(mesh, basis).pair(i, trace))
}

/// Factored Helmholtz operator `K − k² M_q` on one mesh.
pub struct HelmholtzOperator<T> {
    factor: LdltFactor<T>,
    n_nodes: usize,
}

impl<T: Real> HelmholtzOperator<T> {
    /// Assembles and factors `K − k² M_q`. Fails with `NearResonance` when a
    /// pivot falls below `pivot_rel · ‖K‖_F`.
    pub fn new(mesh: &TriMesh<T>, q: &[T], k: T, pivot_rel: T) -> Result<Self> {
        let kmat = assemble_stiffness(mesh)?;
        let mmat = assemble_mass(mesh, q)?;
        let a = kmat.lin_comb(T::one(), &mmat, -k * k)?;
        let tol = pivot_rel * kmat.frobenius_norm();
        Ok(HelmholtzOperator {
            factor: LdltFactor::factor(&a, tol)?,
            n_nodes: mesh.num_nodes(),
        })
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        self.factor.solve(rhs)
    }

    pub fn negative_count(&self) -> usize {
        self.factor.negative_count()
    }

    pub fn num_nodes(&self) -> usize {
        self.n_nodes
    }
}

/// Solver for the scattered field `v^j = u_q^j − u_{q0}^j`:
/// `(K − k² M_q) v = ∫ k² (q − q0) u_{q0}^j φ` with natural Neumann conditions.
pub struct DifferenceSolver<'a, T> {
    mesh: &'a TriMesh<T>,
    contrast: Vec<T>,
    k: T,
    background: BackgroundField<T>,
    op: HelmholtzOperator<T>,
}

impl<'a, T: Real> DifferenceSolver<'a, T> {
    pub fn new(mesh: &'a TriMesh<T>, q: &CoefficientField<T>, q0: T, k: T, n1: usize) -> Result<Self> {
        Self::build(mesh, q, q0, k, n1, false)
    }

    /// Born variant: the system matrix uses `q0` everywhere, so `v` is linear
    /// in the contrast `q − q0`.
    pub fn born(mesh: &'a TriMesh<T>, q: &CoefficientField<T>, q0: T, k: T, n1: usize) -> Result<Self> {
        Self::build(mesh, q, q0, k, n1, true)
    }

    fn build(mesh: &'a TriMesh<T>, q: &CoefficientField<T>, q0: T, k: T, n1: usize, born: bool) -> Result<Self> {
        if q.len() != mesh.num_triangles() {
            return Err(Error::DimensionMismatch("coefficient field does not match mesh".into()));
        }
        let background = BackgroundField::new(k, q0, BoundaryBasis::new(n1)?)?;
        let sys_q: Vec<T> = if born {
            vec![q0; q.len()]
        } else {
            q.values().to_vec()
        };
        let op = HelmholtzOperator::new(mesh, &sys_q, k, T::c(SOLVE_PIVOT_REL))?;
        Ok(DifferenceSolver {
            mesh,
            contrast: q.values().iter().map(|&v| v - q0).collect(),
            k,
            background,
            op,
        })
    }

    pub fn basis(&self) -> BoundaryBasis {
        self.background.basis()
    }

    /// Source vectors for every basis index at once.
    pub fn loads(&self) -> Vec<Vec<T>> {
        let nb = self.basis().len();
        let mut f = vec![vec![T::zero(); self.mesh.num_nodes()]; nb];
        let k2 = self.k * self.k;
        let third = T::one() / T::c(3.0);
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let c = self.contrast[t];
            if c == T::zero() {
                continue;
            }
            let w = k2 * c * self.mesh.signed_area(t) * third;
            let mids = midpoints(self.mesh, t);
            // midpoint p sits on edge (tri[p], tri[p+1])
            for (p, m) in mids.iter().enumerate() {
                let u = self.background.eval_all_xy(m[0], m[1]);
                let (a, b) = (tri[p], tri[(p + 1) % 3]);
                for (j, &uj) in u.iter().enumerate() {
                    let s = w * uj * T::c(0.5);
                    f[j][a] += s;
                    f[j][b] += s;
                }
            }
        }
        f
    }

    /// Solves the factored system for an arbitrary right-hand side.
    pub fn solve_rhs(&self, rhs: &[T]) -> Vec<T> {
        self.op.solve(rhs)
    }

    /// Nodal values of `v^j`.
    pub fn solve(&self, j: usize) -> Vec<T> {
        let loads = self.loads();
        self.op.solve(&loads[j])
    }

    /// Nodal values of `v^j` for every `j`.
    pub fn solve_all(&self) -> Vec<Vec<T>> {
        self.loads().iter().map(|f| self.op.solve(f)).collect()
    }
}

/// Nodal values of `v^j` for one basis index.
pub fn solve_difference_field<T: Real>(
    mesh: &TriMesh<T>,
    q: &CoefficientField<T>,
    q0: T,
    k: T,
    n1: usize,
    j: usize,
) -> Result<Vec<T>> {
    let s = DifferenceSolver::new(mesh, q, q0, k, n1)?;
    if j >= s.basis().len() {
        return Err(Error::invalid(format!("basis index {j} out of range")));
    }
    Ok(s.solve(j))
}

/// Number of negative eigenvalues of `K − k² M_q̃` where `q̃ = q_max` on
/// triangles whose centroid lies within `r0` of the origin and `q0` elsewhere.
pub fn dtilde_count<T: Real>(k: T, q0: T, qmax: T, r0: T, mesh: &TriMesh<T>) -> Result<usize> {
    if !(r0 > T::zero() && r0 <= T::one()) {
        return Err(Error::invalid(format!("r0 = {r0} outside (0, 1]")));
    }
    if !(k > T::zero() && q0 > T::zero() && qmax >= q0) {
        return Err(Error::invalid("need k > 0 and 0 < q0 <= qmax"));
    }
    let q: Vec<T> = (0..mesh.num_triangles())
        .map(|t| {
            let c = mesh.centroid(t);
            if c[0].hypot(c[1]) < r0 {
                qmax
            } else {
                q0
            }
        })
        .collect();
    let op = HelmholtzOperator::new(mesh, &q, k, T::c(INERTIA_PIVOT_REL))?;
    Ok(op.negative_count())
}

/// `(∫ (u_h − f)² dx)^{1/2}` by edge-midpoint quadrature, `u_h` piecewise linear.
pub fn l2_error<T: Real>(mesh: &TriMesh<T>, nodal: &[T], f: impl Fn(T, T) -> T) -> T {
    let mut s = T::zero();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let w = mesh.signed_area(t) / T::c(3.0);
        for (p, m) in midpoints(mesh, t).iter().enumerate() {
            let uh = (nodal[tri[p]] + nodal[tri[(p + 1) % 3]]) * T::c(0.5);
            let d = uh - f(m[0], m[1]);
            s += w * d * d;
        }
    }
    s.sqrt()
}

/// `L²(Ω)` norm of a P1 function.
pub fn l2_norm<T: Real>(mesh: &TriMesh<T>, nodal: &[T]) -> T {
    l2_error(mesh, nodal, |_, _| T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{count_negative, SymMatrix};
    use crate::mesh::build_disk_mesh;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn reference_element_stiffness() {
        let e = element_stiffness([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(e[i][j], expect[i][j], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn stiffness_kernel_and_psd() {
        let m = build_disk_mesh::<f64>(0.3).unwrap();
        let k = assemble_stiffness(&m).unwrap();
        let ones = vec![1.0; m.num_nodes()];
        assert!(k.matvec(&ones).iter().all(|v| v.abs() <= 1e-12));
        let dense = SymMatrix::new(m.num_nodes(), k.to_dense()).unwrap();
        let tol = 1e-10 * k.frobenius_norm();
        assert_eq!(count_negative(&dense, -tol).unwrap(), 0);
    }

    #[test]
    fn mass_matrix_cases() {
        let m = build_disk_mesh::<f64>(0.05).unwrap();
        let nt = m.num_triangles();
        let ones = vec![1.0; m.num_nodes()];
        let m1 = assemble_mass(&m, &vec![1.0; nt]).unwrap();
        let total: f64 = m1.matvec(&ones).iter().sum();
        assert!((total - PI).abs() <= 0.005 * PI);
        let m0 = assemble_mass(&m, &vec![0.0; nt]).unwrap();
        assert_eq!(m0.frobenius_norm(), 0.0);
        let m2 = assemble_mass(&m, &vec![2.0; nt]).unwrap();
        for i in 0..m.num_nodes() {
            for (j, v) in m1.row(i) {
                assert_eq!(m2.get(i, j), 2.0 * v);
            }
        }
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let mesh = TriMesh {
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            triangles: vec![[0, 1, 2]],
            boundary_edges: vec![],
        };
        assert!(matches!(assemble_stiffness(&mesh), Err(Error::DegenerateTriangle { .. })));
        assert!(matches!(assemble_mass(&mesh, &[1.0]), Err(Error::DegenerateTriangle { .. })));
    }

    #[test]
    fn coefficient_field_range() {
        assert!(CoefficientField::new(vec![1.0, 0.0]).is_err());
        assert!(CoefficientField::new(vec![1.0, 2e3]).is_err());
        assert!(CoefficientField::new(vec![1.0, 9.0]).is_ok());
    }

    #[test]
    fn background_satisfies_neumann_data() {
        let basis = BoundaryBasis::new(16).unwrap();
        let bg = BackgroundField::new(1.0, 1.0, basis).unwrap();
        for j in 0..basis.len() {
            for s in 0..64 {
                let phi = 2.0 * PI * s as f64 / 64.0;
                let dr = bg.radial_derivative(j, 1.0, phi);
                assert_abs_diff_eq!(dr, basis.eval(j, phi), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn background_vanishes_on_nodal_lines() {
        // sin(3φ) vanishes at φ = kπ/3
        let basis = BoundaryBasis::new(4).unwrap();
        let j = 5;
        assert_eq!(basis.mode(j), Mode::Sin(3));
        let pts: Vec<(f64, f64)> = (0..6).map(|k| (0.7, k as f64 * PI / 3.0)).collect();
        for v in background_field(1.0, 1.0, 4, j, &pts).unwrap() {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn background_resonance_detected() {
        // J_1'(1.8411837813406593) = 0
        let basis = BoundaryBasis::new(2).unwrap();
        let r = BackgroundField::new(1.8411837813406593, 1.0, basis);
        assert!(matches!(r, Err(Error::BackgroundResonance { order: 1, .. })));
    }

    #[test]
    fn boundary_basis_is_orthonormal() {
        let m = build_disk_mesh::<f64>(0.05).unwrap();
        let basis = BoundaryBasis::new(16).unwrap();
        let proj = BoundaryProjector::new(&m, basis);
        for i in [0usize, 1, 2, 3, 4, 9, 20, 32] {
            let trace: Vec<f64> = m
                .nodes
                .iter()
                .map(|p| basis.eval(i, p[1].atan2(p[0])))
                .collect();
            for j in [0usize, 1, 2, 3, 4, 9, 20, 32] {
                let v = proj.pair(j, &trace);
                if i == j {
                    // linear interpolation of sin(lφ) loses O((l·Δφ)²)
                    if i <= 4 {
                        assert!((v - 1.0).abs() <= 1e-3, "({i},{i}) = {v}");
                    }
                } else {
                    assert!(v.abs() <= 1e-3, "({i},{j}) = {v}");
                }
            }
        }
        assert_eq!(boundary_pairing(&m, &vec![0.0; m.num_nodes()], 16, 3).unwrap(), 0.0);
    }

    #[test]
    fn homogeneous_contrast_gives_zero_field() {
        let m = build_disk_mesh::<f64>(0.1).unwrap();
        let q = CoefficientField::constant(m.num_triangles(), 1.0).unwrap();
        let v = solve_difference_field(&m, &q, 1.0, 1.0, 4, 3).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn born_variant_is_linear_in_contrast() {
        let m = build_disk_mesh::<f64>(0.1).unwrap();
        let g = ScattererGeometry::Disk { center: [-0.2, 0.0], radius: 0.2 };
        let q1 = CoefficientField::from_geometry(&m, &g, 1.0, 3.0).unwrap();
        let q2 = CoefficientField::from_geometry(&m, &g, 1.0, 5.0).unwrap();
        let v1 = DifferenceSolver::born(&m, &q1, 1.0, 1.0, 3).unwrap().solve(2);
        let v2 = DifferenceSolver::born(&m, &q2, 1.0, 1.0, 3).unwrap().solve(2);
        for (a, b) in v1.iter().zip(&v2) {
            assert!((2.0 * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn difference_solve_is_deterministic() {
        let m = build_disk_mesh::<f64>(0.1).unwrap();
        let g = ScattererGeometry::Disk { center: [-0.2, 0.0], radius: 0.1 };
        let q = CoefficientField::from_geometry(&m, &g, 1.0, 9.0).unwrap();
        let a = solve_difference_field(&m, &q, 1.0, 1.0, 4, 1).unwrap();
        let b = solve_difference_field(&m, &q, 1.0, 1.0, 4, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dtilde_full_disk_k1_q9() {
        let m = build_disk_mesh::<f64>(0.05).unwrap();
        assert_eq!(dtilde_count(1.0, 1.0, 9.0, 1.0, &m).unwrap(), 3);
        let small = dtilde_count(1.0, 1.0, 9.0, 1e-3, &m).unwrap();
        assert!(small <= 1);
    }

    #[test]
    fn dtilde_rejects_bad_radius() {
        let m = build_disk_mesh::<f64>(0.3).unwrap();
        assert!(dtilde_count(1.0, 1.0, 9.0, 0.0, &m).is_err());
        assert!(dtilde_count(1.0, 1.0, 9.0, 1.5, &m).is_err());
    }
}
