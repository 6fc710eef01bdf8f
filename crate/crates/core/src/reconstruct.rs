//! Box-constrained convex reconstruction.
//!
//! Minimizes, over `0 ≤ a_m ≤ u_m`, a convex function of the residual
//! `R(a) = V^δ − Σ_m a_m S_m`:
//!
//! * `EigsumPenalized`: `Σ_{λ_j(R) > 0} λ_j(R) + δ‖R‖_F`
//! * `EigsumPlain`: `Σ_{λ_j(R) > 0} λ_j(R)`
//! * `Frobenius`: `‖R‖_F`
//!
//! by projected subgradient descent with best-iterate tracking.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::SensitivityStack;
use crate::linalg::{eigh, SymMatrix, POSITIVE_EIG_REL};
use crate::mesh::TriMesh;
use crate::scalar::Real;

/// `‖R‖_F` at or below this disables the Frobenius subgradient term.
const TINY_NORM: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    EigsumPenalized,
    EigsumPlain,
    Frobenius,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eigsum_penalized" => Ok(Variant::EigsumPenalized),
            "eigsum_plain" => Ok(Variant::EigsumPlain),
            "frobenius" => Ok(Variant::Frobenius),
            _ => Err(Error::invalid(format!("unknown variant {s:?}"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::EigsumPenalized => "eigsum_penalized",
            Variant::EigsumPlain => "eigsum_plain",
            Variant::Frobenius => "frobenius",
        })
    }
}

/// Initial iterate of the descent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPoint {
    Zero,
    /// The box corner `a = u`. The plain eigenvalue sum is nonincreasing in
    /// every `a_m`, so this corner already minimizes it.
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub start: StartPoint,
    pub max_iterations: usize,
    /// Stop when the best value improved by less than `tolerance·(1 + |f|)`
    /// over this many iterations.
    pub window: usize,
    pub tolerance: f64,
    /// Improvement over the last window above which hitting the iteration
    /// cap is reported as not converged.
    pub stall_tolerance: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            start: StartPoint::Upper,
            max_iterations: 2000,
            window: 200,
            tolerance: 1e-8,
            stall_tolerance: 1e-4,
        }
    }
}

/// `u_m = min(q_min − q0, β_m)`.
pub fn upper_bounds<T: Real>(contrast_bound: T, beta: &[T]) -> Vec<T> {
    beta.iter().map(|&b| b.min(contrast_bound).max(T::zero())).collect()
}

#[derive(Clone, Debug)]
pub struct ReconProblem<T> {
    vd: SymMatrix<T>,
    stack: SensitivityStack<T>,
    upper: Vec<T>,
    delta: T,
    variant: Variant,
    settings: SolverSettings,
}

impl<T: Real> ReconProblem<T> {
    pub fn new(
        vd: SymMatrix<T>,
        stack: SensitivityStack<T>,
        upper: Vec<T>,
        delta: T,
        variant: Variant,
        settings: SolverSettings,
    ) -> Result<Self> {
        if vd.dim() != stack.dim() {
            return Err(Error::DimensionMismatch("V and stack sizes differ".into()));
        }
        if upper.len() != stack.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} bounds for {} pixels",
                upper.len(),
                stack.len()
            )));
        }
        if upper.iter().any(|&u| !(u >= T::zero() && u.is_finite())) {
            return Err(Error::invalid("upper bounds must be finite and nonnegative"));
        }
        if !(delta >= T::zero()) {
            return Err(Error::invalid("delta must be nonnegative"));
        }
        if settings.max_iterations == 0 || settings.window == 0 {
            return Err(Error::invalid("iteration limits must be positive"));
        }
        Ok(ReconProblem {
            vd,
            stack,
            upper,
            delta,
            variant,
            settings,
        })
    }

    pub fn num_pixels(&self) -> usize {
        self.upper.len()
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn settings(&self) -> SolverSettings {
        self.settings
    }

    pub fn stack(&self) -> &SensitivityStack<T> {
        &self.stack
    }

    pub fn residual(&self, a: &[T]) -> SymMatrix<T> {
        self.vd.sub(&self.stack.combine(a))
    }

    fn check_point(&self, a: &[T]) -> Result<()> {
        if a.len() != self.num_pixels() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} pixels",
                a.len(),
                self.num_pixels()
            )));
        }
        Ok(())
    }
}

fn eval_residual<T: Real>(p: &ReconProblem<T>, r: &SymMatrix<T>) -> Result<T> {
    let norm = r.frobenius_norm();
    Ok(match p.variant {
        Variant::Frobenius => norm,
        Variant::EigsumPlain | Variant::EigsumPenalized => {
            let tau = T::c(POSITIVE_EIG_REL) * norm;
            let s: T = eigh(r)?.values.iter().filter(|&&l| l > tau).copied().sum();
            if p.variant == Variant::EigsumPenalized {
                s + p.delta * norm
            } else {
                s
            }
        }
    })
}

/// Objective value at `a`.
pub fn objective<T: Real>(p: &ReconProblem<T>, a: &[T]) -> Result<T> {
    p.check_point(a)?;
    eval_residual(p, &p.residual(a))
}

/// Objective and one subgradient at `a`.
///
/// Component `m` is `−⟨P, S_m⟩ − δ⟨R, S_m⟩/‖R‖_F`, where `P` projects onto
/// the eigenvectors of `R` with eigenvalue above `1e-12‖R‖_F`; the Frobenius
/// variant uses `−⟨R, S_m⟩/‖R‖_F` alone.
pub fn objective_and_subgradient<T: Real>(p: &ReconProblem<T>, a: &[T]) -> Result<(T, Vec<T>)> {
    p.check_point(a)?;
    let r = p.residual(a);
    let n = r.dim();
    let norm = r.frobenius_norm();
    let tau = T::c(POSITIVE_EIG_REL) * norm;
    let use_eig = p.variant != Variant::Frobenius;
    let frob_weight = match p.variant {
        Variant::EigsumPlain => T::zero(),
        Variant::EigsumPenalized => p.delta,
        Variant::Frobenius => T::one(),
    };
    // Dual matrix G with component m = −⟨G, S_m⟩.
    let mut g = SymMatrix::zeros(n);
    let mut value = T::zero();
    if use_eig {
        let e = eigh(&r)?;
        for (j, &l) in e.values.iter().enumerate() {
            if l > tau {
                value += l;
                let q = e.vector(j);
                for i1 in 0..n {
                    for i2 in i1..n {
                        g.set(i1, i2, g.get(i1, i2) + q[i1] * q[i2]);
                    }
                }
            }
        }
    }
    if frob_weight > T::zero() {
        value += frob_weight * norm;
        if norm > T::c(TINY_NORM) {
            g.add_scaled(frob_weight / norm, &r);
        }
    }
    let grad = p
        .stack
        .blocks()
        .par_iter()
        .map(|s| -g.frobenius_dot(s))
        .collect();
    Ok((value, grad))
}

pub fn subgradient<T: Real>(p: &ReconProblem<T>, a: &[T]) -> Result<Vec<T>> {
    Ok(objective_and_subgradient(p, a)?.1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Best value stalled over the window.
    Stalled,
    /// A zero subgradient certified optimality.
    ZeroSubgradient,
    /// The projected step left the iterate unchanged.
    Stationary,
    IterationCap,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconResult<T> {
    pub coefficients: Vec<T>,
    pub upper: Vec<T>,
    pub objective: T,
    /// Best objective after each iteration, starting with the initial point.
    pub trace: Vec<T>,
    /// `a_m ≥ 0.5 · max u` among pixels with `u_m > 0`.
    pub support: Vec<bool>,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
}

/// Projected subgradient descent from the configured start point with steps
/// `s0/√t`, `s0 = ‖u‖₂ / ‖g0‖₂`.
pub fn solve<T: Real>(p: &ReconProblem<T>) -> Result<ReconResult<T>> {
    let m = p.num_pixels();
    let st = p.settings;
    let mut a = match st.start {
        StartPoint::Zero => vec![T::zero(); m],
        StartPoint::Upper => p.upper.clone(),
    };
    let (f0, g0) = objective_and_subgradient(p, &a)?;
    let mut best_a = a.clone();
    let mut best = f0;
    let mut trace = vec![f0];
    let diameter = p.upper.iter().map(|&u| u * u).sum::<T>().sqrt();
    let g0_norm = g0.iter().map(|&g| g * g).sum::<T>().sqrt();
    let finish = |best_a: Vec<T>, best: T, trace: Vec<T>, iterations: usize, converged: bool, reason| {
        let support = support_mask(&best_a, &p.upper, T::c(0.5));
        ReconResult {
            coefficients: best_a,
            upper: p.upper.clone(),
            objective: best,
            trace,
            support,
            iterations,
            converged,
            stop_reason: reason,
        }
    };
    if diameter == T::zero() || g0_norm == T::zero() {
        let reason = if diameter == T::zero() {
            StopReason::Stalled
        } else {
            StopReason::ZeroSubgradient
        };
        return Ok(finish(best_a, best, trace, 0, true, reason));
    }
    let s0 = diameter / g0_norm;
    let mut g = g0;
    for t in 1..=st.max_iterations {
        let step = s0 / T::from_usize_lossy(t).sqrt();
        let mut moved = false;
        for ((ai, &gi), &ui) in a.iter_mut().zip(&g).zip(&p.upper) {
            let next = (*ai - step * gi).max(T::zero()).min(ui);
            moved |= next != *ai;
            *ai = next;
        }
        if !moved {
            // a fixed point of the projected step is a minimizer
            return Ok(finish(best_a, best, trace, t - 1, true, StopReason::Stationary));
        }
        let (f, gn) = objective_and_subgradient(p, &a)?;
        if f < best {
            best = f;
            best_a.clone_from(&a);
        }
        trace.push(best);
        if gn.iter().all(|&x| x == T::zero()) {
            return Ok(finish(best_a, best, trace, t, true, StopReason::ZeroSubgradient));
        }
        g = gn;
        if t >= st.window {
            let gain = trace[t - st.window] - best;
            if gain < T::c(st.tolerance) * (T::one() + best.abs()) {
                return Ok(finish(best_a, best, trace, t, true, StopReason::Stalled));
            }
        }
    }
    let t = st.max_iterations;
    let w = st.window.min(t);
    let gain = trace[t - w] - best;
    let converged = gain <= T::c(st.stall_tolerance) * (T::one() + best.abs());
    Ok(finish(best_a, best, trace, t, converged, StopReason::IterationCap))
}

/// `a_m ≥ fraction · max u`; all false when every bound is zero.
pub fn support_mask<T: Real>(a: &[T], upper: &[T], fraction: T) -> Vec<bool> {
    let umax = upper.iter().copied().fold(T::zero(), T::max);
    if umax <= T::zero() {
        return vec![false; a.len()];
    }
    let thr = fraction * umax;
    a.iter().zip(upper).map(|(&x, &u)| u > T::zero() && x >= thr).collect()
}

/// One connected piece of the support.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Component {
    pub pixels: Vec<usize>,
    pub area: f64,
    pub centroid: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Support {
    pub mask: Vec<bool>,
    /// Largest area first.
    pub components: Vec<Component>,
}

/// Thresholded support, split into edge-connected components with
/// area-weighted centroids.
pub fn extract_support<T: Real>(result: &ReconResult<T>, mesh: &TriMesh<T>, threshold_fraction: T) -> Result<Support> {
    if mesh.num_triangles() != result.coefficients.len() {
        return Err(Error::DimensionMismatch("mesh does not match the coefficient vector".into()));
    }
    if !(threshold_fraction > T::zero() && threshold_fraction <= T::one()) {
        return Err(Error::invalid("threshold fraction must lie in (0, 1]"));
    }
    let mask = support_mask(&result.coefficients, &result.upper, threshold_fraction);
    if !mask.iter().any(|&b| b) {
        return Err(Error::EmptySupport);
    }
    let adj = mesh.triangle_adjacency();
    let mut label = vec![usize::MAX; mask.len()];
    let mut components = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || label[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut stack = vec![start];
        label[start] = id;
        let mut pixels = Vec::new();
        while let Some(t) = stack.pop() {
            pixels.push(t);
            for &nb in &adj[t] {
                if mask[nb] && label[nb] == usize::MAX {
                    label[nb] = id;
                    stack.push(nb);
                }
            }
        }
        pixels.sort_unstable();
        let mut area = 0.0;
        let mut c = [0.0, 0.0];
        for &t in &pixels {
            let w = mesh.signed_area(t).to_f64_lossy();
            let ct = mesh.centroid(t);
            area += w;
            c[0] += w * ct[0].to_f64_lossy();
            c[1] += w * ct[1].to_f64_lossy();
        }
        components.push(Component {
            pixels,
            area,
            centroid: [c[0] / area, c[1] / area],
        });
    }
    components.sort_by(|a, b| b.area.total_cmp(&a.area).then(a.pixels[0].cmp(&b.pixels[0])));
    Ok(Support { mask, components })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(vd: SymMatrix<f64>, blocks: Vec<SymMatrix<f64>>, upper: Vec<f64>, delta: f64, v: Variant) -> ReconProblem<f64> {
        let n = vd.dim();
        ReconProblem::new(vd, SensitivityStack::new(n, blocks).unwrap(), upper, delta, v, SolverSettings::default())
            .unwrap()
    }

    fn psd(rng: &mut ChaCha8Rng, n: usize, rank: usize, scale: f64) -> SymMatrix<f64> {
        let b: Vec<f64> = (0..n * rank).map(|_| rng.gen_range(-1.0..1.0)).collect();
        SymMatrix::from_upper_fn(n, |i, j| scale * (0..rank).map(|k| b[i * rank + k] * b[j * rank + k]).sum::<f64>())
    }

    #[test]
    fn objective_at_zero_and_exact_fit() {
        let vd = SymMatrix::from_diag(&[3.0, -1.0, 2.0]);
        let p = problem(vd.clone(), vec![vd.clone()], vec![2.0], 0.1, Variant::EigsumPenalized);
        let f0 = objective(&p, &[0.0]).unwrap();
        assert!((f0 - (5.0 + 0.1 * vd.frobenius_norm())).abs() < 1e-12);
        assert_eq!(objective(&p, &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn eigsum_matches_sdp_identity() {
        // min{trace X : X ⪰ 0, X ⪰ R} is attained at the positive part of R
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let vd = SymMatrix::from_upper_fn(5, |_, _| rng.gen_range(-1.0..1.0));
        let p = problem(vd.clone(), vec![SymMatrix::identity(5)], vec![1.0], 0.0, Variant::EigsumPlain);
        let e = eigh(&vd).unwrap();
        let positive_part: f64 = e.values.iter().map(|&l| l.max(0.0)).sum();
        assert!((objective(&p, &[0.0]).unwrap() - positive_part).abs() < 1e-12);
    }

    #[test]
    fn subgradient_strictly_negative_when_residual_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let vd = psd(&mut rng, 4, 4, 1.0).shifted(1.0);
        let blocks: Vec<_> = (0..3).map(|_| psd(&mut rng, 4, 2, 0.1)).collect();
        let p = problem(vd, blocks, vec![1.0; 3], 0.05, Variant::EigsumPenalized);
        assert!(subgradient(&p, &[0.0; 3]).unwrap().iter().all(|&g| g < 0.0));
    }

    #[test]
    fn zero_subgradient_for_negative_residual() {
        let vd = SymMatrix::from_diag(&[-1.0, -2.0]);
        let p = problem(vd, vec![SymMatrix::identity(2)], vec![1.0], 0.0, Variant::EigsumPlain);
        assert_eq!(subgradient(&p, &[0.5]).unwrap(), vec![0.0]);
    }

    #[test]
    fn subgradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for variant in [Variant::EigsumPenalized, Variant::EigsumPlain, Variant::Frobenius] {
            let vd = SymMatrix::from_upper_fn(5, |_, _| rng.gen_range(-1.0..1.0));
            let blocks: Vec<_> = (0..4).map(|_| psd(&mut rng, 5, 2, 0.3)).collect();
            let p = problem(vd, blocks, vec![1.0; 4], 0.1, variant);
            let a: Vec<f64> = (0..4).map(|_| rng.gen_range(0.2..0.8)).collect();
            let e = eigh(&p.residual(&a)).unwrap();
            assert!(e.values.iter().all(|l| l.abs() > 1e-6));
            let g = subgradient(&p, &a).unwrap();
            let dir: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let eps = 1e-7;
            let moved: Vec<f64> = a.iter().zip(&dir).map(|(x, d)| x + eps * d).collect();
            let fd = (objective(&p, &moved).unwrap() - objective(&p, &a).unwrap()) / eps;
            let an: f64 = g.iter().zip(&dir).map(|(x, d)| x * d).sum();
            assert!((fd - an).abs() < 1e-4, "{variant}: {fd} vs {an}");
        }
    }

    #[test]
    fn empty_box_returns_zero() {
        let vd = SymMatrix::from_diag(&[1.0, 2.0]);
        let p = problem(vd, vec![SymMatrix::identity(2); 2], vec![0.0, 0.0], 0.0, Variant::EigsumPlain);
        let r = solve(&p).unwrap();
        assert_eq!(r.coefficients, vec![0.0, 0.0]);
        assert_eq!(r.objective, objective(&p, &[0.0, 0.0]).unwrap());
    }

    #[test]
    fn solve_saturates_single_pixel() {
        // R = (4 − a) I: the minimizer over [0, 3] is a = 3
        let vd = SymMatrix::identity(3).scaled(4.0);
        let p = problem(vd, vec![SymMatrix::identity(3)], vec![3.0], 0.0, Variant::EigsumPlain);
        let r = solve(&p).unwrap();
        assert!((r.coefficients[0] - 3.0).abs() < 1e-12);
        assert!(r.converged);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(r.support, vec![true]);
    }

    #[test]
    fn solve_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let vd = SymMatrix::from_upper_fn(4, |_, _| rng.gen_range(-1.0..1.0));
        let blocks: Vec<_> = (0..3).map(|_| psd(&mut rng, 4, 2, 0.3)).collect();
        let p = problem(vd, blocks, vec![0.7; 3], 0.1, Variant::EigsumPenalized);
        assert_eq!(solve(&p).unwrap(), solve(&p).unwrap());
    }

    #[test]
    fn variant_parsing() {
        for v in [Variant::EigsumPenalized, Variant::EigsumPlain, Variant::Frobenius] {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert!("sdp".parse::<Variant>().is_err());
    }

    fn fake_result(a: Vec<f64>, u: Vec<f64>) -> ReconResult<f64> {
        ReconResult {
            support: support_mask(&a, &u, 0.5),
            coefficients: a,
            upper: u,
            objective: 0.0,
            trace: vec![0.0],
            iterations: 0,
            converged: true,
            stop_reason: StopReason::Stalled,
        }
    }

    #[test]
    fn support_components_and_empty() {
        let mesh = build_disk_mesh::<f64>(0.2).unwrap();
        let m = mesh.num_triangles();
        let near = |t: usize, x: f64| {
            let c = mesh.centroid(t);
            (c[0] - x).hypot(c[1]) < 0.25
        };
        let a: Vec<f64> = (0..m).map(|t| if near(t, -0.5) || near(t, 0.5) { 8.0 } else { 0.0 }).collect();
        let s = extract_support(&fake_result(a.clone(), vec![8.0; m]), &mesh, 0.5).unwrap();
        assert_eq!(s.components.len(), 2);
        let xs: Vec<f64> = s.components.iter().map(|c| c.centroid[0]).collect();
        assert!(xs.iter().any(|&x| (x + 0.5).abs() < 0.1) && xs.iter().any(|&x| (x - 0.5).abs() < 0.1));
        let mask: Vec<bool> = a.iter().map(|&x| x > 0.0).collect();
        assert_eq!(s.mask, mask);

        let zero = fake_result(vec![0.0; m], vec![8.0; m]);
        assert!(matches!(extract_support(&zero, &mesh, 0.5), Err(Error::EmptySupport)));
    }
}
