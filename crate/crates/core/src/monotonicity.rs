//! Per-pixel monotonicity bounds
//! `β_m = max{α ≥ 0 : V^δ − α S_m + δ I has at most d negative eigenvalues}`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::SensitivityStack;
use crate::linalg::{cholesky, congruence_eigs, count_negative, eigh, SymMatrix};
use crate::scalar::Real;

/// Upper cap on any bound; exceeds every physical contrast.
pub const BETA_CAP: f64 = 1e6;
/// `λ_{d+1}(L⁻¹ S L⁻ᵀ)` at or below this is treated as zero.
const LAMBDA_FLOOR: f64 = 1e-14;
/// `S` counts as semidefinite when `λ_min(S) <= SEMIDEFINITE_REL · ‖S‖_F`.
const SEMIDEFINITE_REL: f64 = 1e-14;
/// Diagonal regularization `+ε‖S‖_F I` for the fallback path.
pub const FALLBACK_REG_REL: f64 = 1e-12;
/// Relative bisection tolerance used inside [`compute_beta_map`].
pub const MAP_BISECTION_TOL: f64 = 1e-8;

/// How a pixel's bound was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMethod {
    ClosedForm,
    /// `λ_{d+1}` vanished; the bound was set to [`BETA_CAP`].
    Capped,
    /// `S_m` was numerically semidefinite; bisection on the regularized matrix.
    RegularizedBisection,
}

/// Closed-form result with its intermediate shift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaDetail<T> {
    pub beta: T,
    pub alpha0: T,
    pub method: BetaMethod,
}

fn check_dims<T: Real>(vd: &SymMatrix<T>, s: &SymMatrix<T>, d: usize) -> Result<()> {
    if vd.dim() != s.dim() {
        return Err(Error::DimensionMismatch(format!("V is {0}x{0}, S is {1}x{1}", vd.dim(), s.dim())));
    }
    if d >= vd.dim() {
        return Err(Error::invalid(format!("d = {d} must be below N = {}", vd.dim())));
    }
    Ok(())
}

/// Closed-form bound via one Cholesky factorization.
///
/// With `α0 = max(0, (1 − λ_N(V^δ + δI)) / λ_N(S))` the matrix
/// `V^δ + δI + α0 S = L Lᵀ` is positive definite and
/// `β = max(0, 1/λ_{d+1}(L⁻¹ S L⁻ᵀ) − α0)`.
pub fn beta_closed_form<T: Real>(vd: &SymMatrix<T>, s: &SymMatrix<T>, delta: T, d: usize) -> Result<T> {
    Ok(beta_closed_form_detail(vd, s, delta, d)?.beta)
}

pub fn beta_closed_form_detail<T: Real>(
    vd: &SymMatrix<T>,
    s: &SymMatrix<T>,
    delta: T,
    d: usize,
) -> Result<BetaDetail<T>> {
    check_dims(vd, s, d)?;
    if !(delta >= T::zero()) {
        return Err(Error::invalid("delta must be nonnegative"));
    }
    let s_min = *eigh(s)?.values.last().expect("n >= 1");
    if !(s_min > T::c(SEMIDEFINITE_REL) * s.frobenius_norm()) {
        return Err(Error::SemidefiniteSensitivity {
            lambda_min: s_min.to_f64_lossy(),
        });
    }
    let a = vd.shifted(delta);
    let a_min = *eigh(&a)?.values.last().expect("n >= 1");
    let alpha0 = ((T::one() - a_min) / s_min).max(T::zero());
    let mut shifted = a;
    shifted.add_scaled(alpha0, s);
    let l = cholesky(&shifted)?;
    let mu = congruence_eigs(&l, s)?[d];
    if mu <= T::c(LAMBDA_FLOOR) {
        return Ok(BetaDetail {
            beta: T::c(BETA_CAP),
            alpha0,
            method: BetaMethod::Capped,
        });
    }
    Ok(BetaDetail {
        beta: (T::one() / mu - alpha0).max(T::zero()).min(T::c(BETA_CAP)),
        alpha0,
        method: BetaMethod::ClosedForm,
    })
}

fn feasible<T: Real>(vd: &SymMatrix<T>, s: &SymMatrix<T>, delta: T, d: usize, alpha: T) -> Result<bool> {
    let mut m = vd.shifted(delta);
    m.add_scaled(-alpha, s);
    Ok(count_negative(&m, T::zero())? <= d)
}

/// Bisection on `α ↦ #{λ(V^δ − αS + δI) < 0} <= d`, which holds on an
/// interval `[0, β]` because `S ⪰ 0`. The bracket is doubled from 1 up to
/// [`BETA_CAP`]; bisection stops once the bracket is below `tol·(1 + lo)`.
pub fn beta_bisection_oracle<T: Real>(vd: &SymMatrix<T>, s: &SymMatrix<T>, delta: T, d: usize, tol: T) -> Result<T> {
    check_dims(vd, s, d)?;
    if !(tol > T::zero()) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if !feasible(vd, s, delta, d, T::zero())? {
        return Ok(T::zero());
    }
    let cap = T::c(BETA_CAP);
    let mut lo = T::zero();
    let mut hi = T::one();
    while feasible(vd, s, delta, d, hi)? {
        lo = hi;
        if hi >= cap {
            return Ok(cap);
        }
        hi = (hi * T::c(2.0)).min(cap);
    }
    while hi - lo > tol * (T::one() + lo) {
        let mid = (lo + hi) * T::c(0.5);
        if feasible(vd, s, delta, d, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) * T::c(0.5))
}

/// Per-pixel bounds with provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaMap<T> {
    pub values: Vec<T>,
    pub delta: T,
    pub d_tilde: usize,
    /// `α0` of the closed form; `None` where the fallback ran.
    pub alpha0: Vec<Option<T>>,
    pub method: Vec<BetaMethod>,
}

impl<T: Real> BetaMap<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of pixels per method, in [`BetaMethod`] declaration order.
    pub fn method_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for m in &self.method {
            c[*m as usize] += 1;
        }
        c
    }
}

/// Bound for one pixel: closed form, or regularized bisection when `S_m` is
/// numerically semidefinite.
pub fn pixel_beta<T: Real>(vd: &SymMatrix<T>, s: &SymMatrix<T>, delta: T, d: usize) -> Result<BetaDetail<T>> {
    match beta_closed_form_detail(vd, s, delta, d) {
        Ok(b) => Ok(b),
        Err(Error::DimensionMismatch(m)) => Err(Error::DimensionMismatch(m)),
        Err(Error::InvalidInput(m)) => Err(Error::InvalidInput(m)),
        Err(_) => {
            let reg = s.shifted(T::c(FALLBACK_REG_REL) * s.frobenius_norm());
            let beta = beta_bisection_oracle(vd, &reg, delta, d, T::c(MAP_BISECTION_TOL))?;
            Ok(BetaDetail {
                beta,
                alpha0: T::zero(),
                method: BetaMethod::RegularizedBisection,
            })
        }
    }
}

/// Applies [`pixel_beta`] to every pixel in parallel; results are in pixel order.
pub fn compute_beta_map<T: Real>(
    vd: &SymMatrix<T>,
    stack: &SensitivityStack<T>,
    delta: T,
    d: usize,
) -> Result<BetaMap<T>> {
    if vd.dim() != stack.dim() {
        return Err(Error::DimensionMismatch(format!(
            "V is {0}x{0}, stack blocks are {1}x{1}",
            vd.dim(),
            stack.dim()
        )));
    }
    let details: Vec<BetaDetail<T>> = stack
        .blocks()
        .par_iter()
        .map(|s| pixel_beta(vd, s, delta, d))
        .collect::<Result<_>>()?;
    Ok(BetaMap {
        values: details.iter().map(|b| b.beta).collect(),
        delta,
        d_tilde: d,
        alpha0: details
            .iter()
            .map(|b| (b.method != BetaMethod::RegularizedBisection).then_some(b.alpha0))
            .collect(),
        method: details.iter().map(|b| b.method).collect(),
    })
}

/// `#{λ(V^δ − α S_m + δI) < 0}` per pixel.
pub fn negative_count_field<T: Real>(
    vd: &SymMatrix<T>,
    stack: &SensitivityStack<T>,
    alpha: T,
    delta: T,
) -> Result<Vec<usize>> {
    if vd.dim() != stack.dim() {
        return Err(Error::DimensionMismatch("V and stack sizes differ".into()));
    }
    let base = vd.shifted(delta);
    stack
        .blocks()
        .par_iter()
        .map(|s| {
            let mut m = base.clone();
            m.add_scaled(-alpha, s);
            count_negative(&m, T::zero())
        })
        .collect()
}
