//! Simulated measurements: `V = F(q) − F(q0)`, sensitivities `S_m`, noise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    assemble_mass, midpoints, BackgroundField, BoundaryBasis, BoundaryProjector, CoefficientField,
    DifferenceSolver, HelmholtzOperator, SOLVE_PIVOT_REL,
};
use crate::linalg::SymMatrix;
use crate::mesh::{build_disk_mesh, ScattererGeometry, TriMesh};
use crate::rng::XorShift64Star;
use crate::scalar::Real;

/// Asymmetry above which the forward data are considered under-resolved.
pub const MAX_ASYMMETRY: f64 = 0.05;

/// Complete description of one synthetic experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub k: f64,
    pub q0: f64,
    pub geometry: ScattererGeometry,
    pub q_inclusion: f64,
    /// A-priori lower bound of `q` inside the scatterer.
    pub q_min_assumed: f64,
    /// Trigonometric order; the basis has `2·n1 + 1` functions.
    pub n1: usize,
    /// Noise level as a fraction of `‖V‖_F`.
    pub delta: f64,
    /// Bound on the number of negative eigenvalues in the monotonicity test.
    pub d_tilde: usize,
    /// Radius of the comparison disk used to justify `d_tilde` (informational).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    pub noise_seed: u64,
    pub forward_h: f64,
    pub inversion_h: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::invalid("k must be positive"));
        }
        if !(self.q0 > 0.0 && self.q0 < self.q_min_assumed && self.q_min_assumed <= self.q_inclusion) {
            return Err(Error::invalid("need 0 < q0 < q_min_assumed <= q_inclusion"));
        }
        if self.n1 == 0 {
            return Err(Error::invalid("n1 must be at least 1"));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid("delta must be nonnegative"));
        }
        if self.d_tilde >= self.basis_size() {
            return Err(Error::invalid("d_tilde must be smaller than the basis size"));
        }
        if let Some(r0) = self.r0 {
            if !(r0 > 0.0 && r0 <= 1.0) {
                return Err(Error::invalid("r0 must lie in (0, 1]"));
            }
        }
        for (name, h) in [("forward_h", self.forward_h), ("inversion_h", self.inversion_h)] {
            if !(0.01..=0.5).contains(&h) {
                return Err(Error::invalid(format!("{name} = {h} outside [0.01, 0.5]")));
            }
        }
        self.geometry.validate()
    }

    pub fn basis_size(&self) -> usize {
        2 * self.n1 + 1
    }

    pub fn basis(&self) -> Result<BoundaryBasis> {
        BoundaryBasis::new(self.n1)
    }

    pub fn forward_mesh<T: Real>(&self) -> Result<TriMesh<T>> {
        build_disk_mesh(T::c(self.forward_h))
    }

    pub fn inversion_mesh<T: Real>(&self) -> Result<TriMesh<T>> {
        build_disk_mesh(T::c(self.inversion_h))
    }

    /// Refractive index on the forward mesh.
    pub fn coefficient<T: Real>(&self, mesh: &TriMesh<T>) -> Result<CoefficientField<T>> {
        CoefficientField::from_geometry(mesh, &self.geometry, T::c(self.q0), T::c(self.q_inclusion))
    }
}

/// Measurement matrix with its pre-symmetrization diagnostic.
#[derive(Clone, Debug)]
pub struct Measurement<T> {
    pub v: SymMatrix<T>,
    /// `‖V − Vᵀ‖_F / ‖V‖_F` before symmetrization.
    pub asymmetry: T,
}

/// `V_ij = ∫_{∂Ω} g_i v^j ds` on the forward mesh, symmetrized.
pub fn compute_v<T: Real>(sc: &Scenario) -> Result<Measurement<T>> {
    sc.validate()?;
    let mesh = sc.forward_mesh::<T>()?;
    compute_v_on(sc, &mesh)
}

/// As [`compute_v`] with a caller-supplied forward mesh.
pub fn compute_v_on<T: Real>(sc: &Scenario, mesh: &TriMesh<T>) -> Result<Measurement<T>> {
    let q = sc.coefficient(mesh)?;
    let solver = DifferenceSolver::new(mesh, &q, T::c(sc.q0), T::c(sc.k), sc.n1)?;
    let proj = BoundaryProjector::new(mesh, solver.basis());
    let n = solver.basis().len();
    let loads = solver.loads();
    let fields: Vec<Vec<T>> = loads.par_iter().map(|f| solver.solve_rhs(f)).collect();
    let mut raw = vec![T::zero(); n * n];
    for (j, v) in fields.iter().enumerate() {
        for i in 0..n {
            raw[i * n + j] = proj.pair(i, v);
        }
    }
    let asymmetry = SymMatrix::relative_asymmetry(n, &raw);
    if asymmetry > T::c(MAX_ASYMMETRY) {
        return Err(Error::AsymmetryTooLarge(asymmetry.to_f64_lossy()));
    }
    Ok(Measurement {
        v: SymMatrix::new(n, raw)?,
        asymmetry,
    })
}

/// Per-pixel sensitivity matrices `S_m`, one per inversion triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityStack<T> {
    n: usize,
    blocks: Vec<SymMatrix<T>>,
}

impl<T: Real> SensitivityStack<T> {
    pub fn new(n: usize, blocks: Vec<SymMatrix<T>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::invalid("sensitivity stack needs at least one pixel"));
        }
        if let Some(b) = blocks.iter().find(|b| b.dim() != n) {
            return Err(Error::DimensionMismatch(format!("block of size {} in stack of size {n}", b.dim())));
        }
        Ok(SensitivityStack { n, blocks })
    }

    /// Basis size `N`.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Pixel count `M`.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block(&self, m: usize) -> &SymMatrix<T> {
        &self.blocks[m]
    }

    pub fn blocks(&self) -> &[SymMatrix<T>] {
        &self.blocks
    }

    /// `Σ_m a_m S_m`, skipping zero coefficients.
    pub fn combine(&self, a: &[T]) -> SymMatrix<T> {
        assert_eq!(a.len(), self.blocks.len());
        let mut out = SymMatrix::zeros(self.n);
        for (b, &am) in self.blocks.iter().zip(a) {
            if am != T::zero() {
                out.add_scaled(am, b);
            }
        }
        out
    }

    /// Scales every block by `c`.
    pub fn scaled(&self, c: T) -> Self {
        SensitivityStack {
            n: self.n,
            blocks: self.blocks.iter().map(|b| b.scaled(c)).collect(),
        }
    }
}

/// `S_m^{ij} = k² ∫_{P_m} u^i u^j dx` with analytic background fields and the
/// edge-midpoint rule on each inversion triangle.
pub fn compute_s<T: Real>(sc: &Scenario) -> Result<SensitivityStack<T>> {
    sc.validate()?;
    let mesh = sc.inversion_mesh::<T>()?;
    compute_s_on(sc, &mesh)
}

/// As [`compute_s`] with a caller-supplied inversion mesh.
pub fn compute_s_on<T: Real>(sc: &Scenario, mesh: &TriMesh<T>) -> Result<SensitivityStack<T>> {
    let bg = BackgroundField::new(T::c(sc.k), T::c(sc.q0), sc.basis()?)?;
    let n = sc.basis_size();
    let k2 = T::c(sc.k * sc.k);
    let blocks: Vec<SymMatrix<T>> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let w = k2 * mesh.signed_area(t) / T::c(3.0);
            let mut s = vec![T::zero(); n * n];
            for m in midpoints(mesh, t) {
                let u = bg.eval_all_xy(m[0], m[1]);
                for i in 0..n {
                    let wi = w * u[i];
                    for j in 0..n {
                        s[i * n + j] += wi * u[j];
                    }
                }
            }
            SymMatrix::new(n, s)
        })
        .collect::<Result<_>>()?;
    SensitivityStack::new(n, blocks)
}

/// `V^δ = sym(V + δ E/‖E‖_F)` with `E_ij` uniform on `[−1, 1)` drawn row-major
/// from [`XorShift64Star`]. `delta` is absolute; `delta = 0` returns `V` unchanged.
pub fn add_noise<T: Real>(v: &SymMatrix<T>, delta: T, seed: u64) -> Result<SymMatrix<T>> {
    if !(delta >= T::zero() && delta.is_finite()) {
        return Err(Error::invalid("noise level must be nonnegative"));
    }
    if delta == T::zero() {
        return Ok(v.clone());
    }
    let n = v.dim();
    let mut rng = XorShift64Star::new(seed);
    let e: Vec<f64> = (0..n * n).map(|_| rng.next_symmetric()).collect();
    let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
    let data: Vec<T> = v
        .as_slice()
        .iter()
        .zip(&e)
        .map(|(&x, &ei)| x + delta * T::c(ei / norm))
        .collect();
    SymMatrix::new(n, data)
}

/// Index of the triangle containing `(x, y)`, if any.
pub fn locate_triangle<T: Real>(mesh: &TriMesh<T>, x: T, y: T) -> Option<usize> {
    (0..mesh.num_triangles()).find(|&t| point_in_triangle(mesh.vertices(t), x, y))
}

fn point_in_triangle<T: Real>(v: [[T; 2]; 3], x: T, y: T) -> bool {
    let cross = |a: [T; 2], b: [T; 2]| (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]);
    let eps = -T::c(1e-14);
    cross(v[0], v[1]) >= eps && cross(v[1], v[2]) >= eps && cross(v[2], v[0]) >= eps
}

/// One row of a derivative check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrechetRow {
    pub epsilon: f64,
    pub residual: f64,
}

/// Remainder `‖F(q0 + εχ) − F(q0) − ε F'(q0)χ‖_F` for each `ε`.
///
/// `χ` is the indicator of the forward triangles whose centroid lies in the
/// listed inversion pixels. `F` is evaluated by full forward solves on the
/// forward mesh and `F'(q0)χ = k² ∫ χ u^i u^j` uses the discrete background
/// fields of the same mesh, so discretization error cancels and the
/// remainder is purely second order.
pub fn frechet_check(sc: &Scenario, pixels: &[usize], epsilons: &[f64]) -> Result<Vec<FrechetRow>> {
    sc.validate()?;
    let fine = sc.forward_mesh::<f64>()?;
    let coarse = sc.inversion_mesh::<f64>()?;
    if let Some(&p) = pixels.iter().find(|&&p| p >= coarse.num_triangles()) {
        return Err(Error::invalid(format!("pixel {p} out of range")));
    }
    let chi: Vec<f64> = (0..fine.num_triangles())
        .map(|t| {
            let c = fine.centroid(t);
            let hit = pixels.iter().any(|&p| point_in_triangle(coarse.vertices(p), c[0], c[1]));
            if hit {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    if chi.iter().all(|&c| c == 0.0) {
        return Err(Error::invalid("perturbation support contains no forward triangles"));
    }
    let basis = sc.basis()?;
    let n = basis.len();
    let proj = BoundaryProjector::new(&fine, basis);
    let loads: Vec<Vec<f64>> = (0..n).map(|i| proj.load(i, fine.num_nodes())).collect();

    let forward_map = |q: &[f64]| -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let op = HelmholtzOperator::new(&fine, q, sc.k, SOLVE_PIVOT_REL)?;
        let fields: Vec<Vec<f64>> = loads.par_iter().map(|f| op.solve(f)).collect();
        let mut f = vec![0.0; n * n];
        for (j, u) in fields.iter().enumerate() {
            for i in 0..n {
                f[i * n + j] = proj.pair(i, u);
            }
        }
        Ok((f, fields))
    };

    let q_base = vec![sc.q0; fine.num_triangles()];
    let (f0, u0) = forward_map(&q_base)?;
    let m_chi = assemble_mass(&fine, &chi)?;
    let k2 = sc.k * sc.k;
    let mu: Vec<Vec<f64>> = u0.iter().map(|u| m_chi.matvec(u)).collect();
    let mut deriv = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            deriv[i * n + j] = k2 * u0[i].iter().zip(&mu[j]).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    epsilons
        .iter()
        .map(|&eps| {
            if eps == 0.0 {
                return Ok(FrechetRow {
                    epsilon: 0.0,
                    residual: 0.0,
                });
            }
            let q: Vec<f64> = chi.iter().map(|&c| sc.q0 + eps * c).collect();
            let (f, _) = forward_map(&q)?;
            let r = f
                .iter()
                .zip(&f0)
                .zip(&deriv)
                .map(|((a, b), d)| {
                    let x = a - b - eps * d;
                    x * x
                })
                .sum::<f64>()
                .sqrt();
            Ok(FrechetRow {
                epsilon: eps,
                residual: r,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigh;

    pub(crate) fn desk_scenario() -> Scenario {
        Scenario {
            k: 1.0,
            q0: 1.0,
            geometry: ScattererGeometry::Disk {
                center: [-0.2, 0.0],
                radius: 0.1,
            },
            q_inclusion: 9.0,
            q_min_assumed: 9.0,
            n1: 4,
            delta: 0.0,
            d_tilde: 1,
            r0: None,
            noise_seed: 1,
            forward_h: 0.1,
            inversion_h: 0.2,
        }
    }

    #[test]
    fn scenario_validation() {
        let mut sc = desk_scenario();
        assert!(sc.validate().is_ok());
        sc.q_min_assumed = 0.5;
        assert!(sc.validate().is_err());
        let mut sc = desk_scenario();
        sc.d_tilde = 9;
        assert!(sc.validate().is_err());
        let mut sc = desk_scenario();
        sc.forward_h = 0.001;
        assert!(sc.validate().is_err());
    }

    #[test]
    fn tiny_scatterer_gives_tiny_v() {
        let mut sc = desk_scenario();
        sc.geometry = ScattererGeometry::Disk {
            center: [-0.2, 0.0],
            radius: 1e-6,
        };
        let m = compute_v::<f64>(&sc).unwrap();
        assert!(m.v.frobenius_norm() <= 1e-6);
    }

    #[test]
    fn v_dimension_asymmetry_and_sign() {
        let sc = desk_scenario();
        let m = compute_v::<f64>(&sc).unwrap();
        assert_eq!(m.v.dim(), 9);
        assert!(m.asymmetry < 1e-2, "asymmetry {}", m.asymmetry);
        let e = eigh(&m.v).unwrap();
        let top = e.values[0];
        let bottom = *e.values.last().unwrap();
        assert!(top > 0.0 && top.abs() >= bottom.abs());
    }

    #[test]
    fn sensitivity_blocks_are_psd() {
        let sc = desk_scenario();
        let s = compute_s::<f64>(&sc).unwrap();
        assert_eq!(s.dim(), 9);
        for b in s.blocks() {
            let lmin = *eigh(b).unwrap().values.last().unwrap();
            assert!(lmin >= -1e-12 * b.frobenius_norm());
        }
    }

    #[test]
    fn noise_contract() {
        let v = SymMatrix::from_upper_fn(5, |i, j| (i * 5 + j) as f64 * 0.1);
        assert_eq!(add_noise(&v, 0.0, 3).unwrap(), v);
        let a = add_noise(&v, 0.25, 3).unwrap();
        let b = add_noise(&v, 0.25, 3).unwrap();
        let c = add_noise(&v, 0.25, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.sub(&v).frobenius_norm() <= 0.25 + 1e-15);
        assert!(add_noise(&v, -1.0, 3).is_err());
    }

    #[test]
    fn stack_combine() {
        let s = SensitivityStack::new(2, vec![SymMatrix::identity(2), SymMatrix::from_diag(&[1.0, 3.0])]).unwrap();
        let c = s.combine(&[2.0, 0.5]);
        assert_eq!(c.diag(), vec![2.5, 3.5]);
        assert!(SensitivityStack::new(3, vec![SymMatrix::<f64>::identity(2)]).is_err());
    }

    #[test]
    fn locate_finds_containing_triangle() {
        let m = build_disk_mesh::<f64>(0.2).unwrap();
        let t = locate_triangle(&m, -0.2, 0.01).unwrap();
        assert!(point_in_triangle(m.vertices(t), -0.2, 0.01));
        assert!(locate_triangle(&m, 1.5, 0.0).is_none());
    }
}
