use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest dimension accepted by the dense eigensolver.
pub const DENSE_MAX_DIM: usize = 512;

/// Dense real symmetric matrix stored row-major.
///
/// Construction always symmetrizes, so `a[i][j] == a[j][i]` holds bit-exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> SymMatrix<T> {
    /// Builds a matrix from row-major entries, replacing it by `(A + Aᵀ)/2`.
    pub fn new(n: usize, data: Vec<T>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("matrix dimension must be at least 1"));
        }
        if data.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        let mut m = SymMatrix { n, data };
        m.symmetrize();
        Ok(m)
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "matrix dimension must be at least 1");
        SymMatrix {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * m.n + i] = d;
        }
        m
    }

    /// Builds `A_ij = f(i, j)` for `i <= j` and mirrors the upper triangle.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    /// Asymmetry `‖A − Aᵀ‖_F / ‖A‖_F` of a raw row-major square array.
    pub fn relative_asymmetry(n: usize, data: &[T]) -> T {
        let mut num = T::zero();
        let mut den = T::zero();
        for i in 0..n {
            for j in 0..n {
                let d = data[i * n + j] - data[j * n + i];
                num += d * d;
                den += data[i * n + j] * data[i * n + j];
            }
        }
        if den == T::zero() {
            T::zero()
        } else {
            (num / den).sqrt()
        }
    }

    fn symmetrize(&mut self) {
        let n = self.n;
        let half = T::c(0.5);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = (self.data[i * n + j] + self.data[j * n + i]) * half;
                self.data[i * n + j] = v;
                self.data[j * n + i] = v;
            }
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    /// Frobenius inner product `⟨A, B⟩_F = trace(AB)`.
    pub fn frobenius_dot(&self, other: &Self) -> T {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: T, other: &Self) {
        assert_eq!(self.n, other.n);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    /// `self + s I`.
    pub fn shifted(&self, s: T) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            m.data[i * self.n + i] += s;
        }
        m
    }

    pub fn scaled(&self, c: T) -> Self {
        SymMatrix {
            n: self.n,
            data: self.data.iter().map(|&x| c * x).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut m = self.clone();
        m.add_scaled(-T::one(), other);
        m
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(&a, &b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Quadratic form `xᵀ A x`.
    pub fn quad_form(&self, x: &[T]) -> T {
        self.matvec(x).iter().zip(x).map(|(&a, &b)| a * b).sum()
    }

    fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("matrix contains NaN or Inf"))
        }
    }
}

/// Eigendecomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct Eigh<T> {
    /// Eigenvalues in descending order.
    pub values: Vec<T>,
    /// Row-major `n × n`; column `j` is the unit eigenvector of `values[j]`.
    pub vectors: Vec<T>,
    n: usize,
}

impl<T: Real> Eigh<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn vector(&self, j: usize) -> Vec<T> {
        (0..self.n).map(|i| self.vectors[i * self.n + j]).collect()
    }
}

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Sweeps until the off-diagonal Frobenius norm drops below `1e-13 ‖A‖_F`
/// (or a few ulps for `f32`). Eigenvalues are returned in descending order.
pub fn eigh<T: Real>(a: &SymMatrix<T>) -> Result<Eigh<T>> {
    a.check_finite()?;
    let n = a.n;
    if n > DENSE_MAX_DIM {
        return Err(Error::invalid(format!(
            "dense eigensolver limited to n <= {DENSE_MAX_DIM}, got {n}"
        )));
    }
    let mut m = a.data.clone();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }

    let norm = a.frobenius_norm();
    let rel = T::c(1e-13).max(T::epsilon() * T::c(8.0));
    let tol = rel * norm;

    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        let off = (off + off).sqrt();
        if off <= tol || norm == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (apq + apq);
                let t = {
                    let s = if theta < T::zero() { -T::one() } else { T::one() };
                    s / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                m[p * n + q] = T::zero();
                m[q * n + p] = T::zero();
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[j * n + j]
            .partial_cmp(&m[i * n + i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vectors = vec![T::zero(); n * n];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[row * n + col] = v[row * n + src];
        }
    }
    Ok(Eigh { values, vectors, n })
}

/// Relative threshold below which an eigenvalue is not counted as positive.
pub const POSITIVE_EIG_REL: f64 = 1e-12;

/// Sum of the positive eigenvalues of `A`.
///
/// Eigenvalues at or below `1e-12 ‖A‖_F` are treated as roundoff and excluded.
pub fn sum_positive_eigs<T: Real>(a: &SymMatrix<T>) -> Result<T> {
    let eig = eigh(a)?;
    let tau = T::c(POSITIVE_EIG_REL) * a.frobenius_norm();
    Ok(eig.values.iter().filter(|&&l| l > tau).copied().sum())
}

/// Dense lower-triangular matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerTriangular<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> LowerTriangular<T> {
    /// Takes row-major entries; the strict upper triangle is ignored.
    pub fn new(n: usize, mut data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                data[i * n + j] = T::zero();
            }
        }
        Ok(LowerTriangular { n, data })
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let n = diag.len();
        let mut data = vec![T::zero(); n * n];
        for (i, &d) in diag.iter().enumerate() {
            data[i * n + i] = d;
        }
        LowerTriangular { n, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    /// `L Lᵀ`.
    pub fn gram(&self) -> SymMatrix<T> {
        let n = self.n;
        SymMatrix::from_upper_fn(n, |i, j| {
            (0..=i.min(j)).map(|k| self.get(i, k) * self.get(j, k)).sum()
        })
    }

    fn check_invertible(&self) -> Result<()> {
        let tiny = T::c(1e-14);
        for i in 0..self.n {
            if !(self.get(i, i).abs() > tiny) {
                return Err(Error::SingularFactor { index: i });
            }
        }
        Ok(())
    }

    /// Solves `L x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.data[i * n + k] * b[k];
            }
            b[i] = s / self.data[i * n + i];
        }
    }
}

/// Cholesky factor `A = L Lᵀ` with positive diagonal.
///
/// Fails with [`Error::NotPositiveDefinite`] at the first pivot not exceeding
/// `1e-14 ‖A‖_F`.
pub fn cholesky<T: Real>(a: &SymMatrix<T>) -> Result<LowerTriangular<T>> {
    a.check_finite()?;
    let n = a.n;
    let tol = T::c(1e-14) * a.frobenius_norm();
    let mut l = vec![T::zero(); n * n];
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > tol) {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let ljj = d.sqrt();
        l[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    Ok(LowerTriangular { n, data: l })
}

/// Number of eigenvalues of `A` strictly below `threshold`.
///
/// Computed as the inertia of `A − threshold·I`: Householder reduction to
/// tridiagonal form followed by a Sturm-sequence count.
pub fn count_negative<T: Real>(a: &SymMatrix<T>, threshold: T) -> Result<usize> {
    a.check_finite()?;
    if !threshold.is_finite() {
        return Err(Error::invalid("threshold must be finite"));
    }
    let (diag, off) = tridiagonalize(a);
    Ok(sturm_count(&diag, &off, threshold))
}

/// Householder reduction of a symmetric matrix to tridiagonal form.
/// Returns the diagonal and the `n − 1` sub-diagonal entries.
fn tridiagonalize<T: Real>(a: &SymMatrix<T>) -> (Vec<T>, Vec<T>) {
    let n = a.n;
    let mut m = a.data.clone();
    let mut w = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    for k in 0..n.saturating_sub(2) {
        // Householder vector annihilating m[k+2.., k].
        let mut alpha = T::zero();
        for i in (k + 1)..n {
            alpha += m[i * n + k] * m[i * n + k];
        }
        let alpha = alpha.sqrt();
        if alpha == T::zero() {
            continue;
        }
        let x0 = m[(k + 1) * n + k];
        let alpha = if x0 > T::zero() { -alpha } else { alpha };
        let r2 = alpha * alpha - x0 * alpha;
        if r2 == T::zero() {
            continue;
        }
        for wi in w.iter_mut().take(k + 1) {
            *wi = T::zero();
        }
        w[k + 1] = x0 - alpha;
        for i in (k + 2)..n {
            w[i] = m[i * n + k];
        }
        // H = I − w wᵀ / r2 ; A ← H A H.
        let inv = T::one() / r2;
        let mut wpw = T::zero();
        for i in (k + 1)..n {
            let mut s = T::zero();
            for j in (k + 1)..n {
                s += m[i * n + j] * w[j];
            }
            p[i] = s * inv;
            wpw += w[i] * p[i];
        }
        let kfac = wpw * inv * T::c(0.5);
        for i in (k + 1)..n {
            p[i] -= kfac * w[i];
        }
        for i in (k + 1)..n {
            for j in (k + 1)..n {
                m[i * n + j] -= w[i] * p[j] + p[i] * w[j];
            }
        }
        m[(k + 1) * n + k] = alpha;
        m[k * n + k + 1] = alpha;
        for i in (k + 2)..n {
            m[i * n + k] = T::zero();
            m[k * n + i] = T::zero();
        }
    }
    let diag = (0..n).map(|i| m[i * n + i]).collect();
    let off = (0..n.saturating_sub(1)).map(|i| m[(i + 1) * n + i]).collect();
    (diag, off)
}

fn sturm_count<T: Real>(diag: &[T], off: &[T], x: T) -> usize {
    let scale = diag
        .iter()
        .chain(off)
        .fold(T::zero(), |acc, v| acc.max(v.abs()))
        .max(x.abs())
        .max(T::min_positive_value());
    let guard = T::epsilon() * scale;
    let mut count = 0;
    let mut q = T::one();
    for i in 0..diag.len() {
        q = if i == 0 {
            diag[0] - x
        } else {
            (diag[i] - x) - off[i - 1] * off[i - 1] / q
        };
        if q == T::zero() {
            // An eigenvalue sitting exactly at x is not strictly below it.
            q = guard;
        }
        if q < T::zero() {
            count += 1;
        }
    }
    count
}

/// Eigenvalues of `L⁻¹ S L⁻ᵀ` in descending order.
pub fn congruence_eigs<T: Real>(l: &LowerTriangular<T>, s: &SymMatrix<T>) -> Result<Vec<T>> {
    let n = l.dim();
    if s.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "factor is {n}x{n}, matrix is {0}x{0}",
            s.dim()
        )));
    }
    l.check_invertible()?;
    // X = L⁻¹ S column by column; W = L⁻¹ Xᵀ.
    let mut x = vec![T::zero(); n * n];
    let mut col = vec![T::zero(); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = s.get(i, j);
        }
        l.solve_in_place(&mut col);
        for i in 0..n {
            x[i * n + j] = col[i];
        }
    }
    let mut w = vec![T::zero(); n * n];
    for j in 0..n {
        // column j of Xᵀ is row j of X
        col.copy_from_slice(&x[j * n..(j + 1) * n]);
        l.solve_in_place(&mut col);
        for i in 0..n {
            w[i * n + j] = col[i];
        }
    }
    let w = SymMatrix::new(n, w)?;
    Ok(eigh(&w)?.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix<f64> {
        SymMatrix::from_upper_fn(n, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix<f64> {
        let b: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        SymMatrix::from_upper_fn(n, |i, j| {
            (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 }
        })
    }

    #[test]
    fn eigh_diagonal_and_swap() {
        let e = eigh(&SymMatrix::from_diag(&[3.0, -1.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0, -1.0]);
        let e = eigh(&SymMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(e.values[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.values[1], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn eigh_residual_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &n in &[1usize, 2, 8, 33] {
            let a = random_sym(&mut rng, n);
            let e = eigh(&a).unwrap();
            let an = a.frobenius_norm();
            let mut res = 0.0;
            let mut orth = 0.0;
            for j in 0..n {
                let q = e.vector(j);
                let aq = a.matvec(&q);
                for i in 0..n {
                    res += (aq[i] - e.values[j] * q[i]).powi(2);
                }
                for k in 0..n {
                    let d: f64 = q.iter().zip(e.vector(k)).map(|(x, y)| x * y).sum();
                    let t = if j == k { 1.0 } else { 0.0 };
                    orth += (d - t).powi(2);
                }
            }
            assert!(res.sqrt() <= 1e-10 * n as f64 * an, "residual {}", res.sqrt());
            assert!(orth.sqrt() <= 1e-10 * n as f64);
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
            let sum: f64 = e.values.iter().sum();
            assert!((sum - a.trace()).abs() <= 1e-10 * n as f64 * an);
        }
    }

    #[test]
    fn eigh_rejects_nan() {
        let a = SymMatrix::new(2, vec![1.0, f64::NAN, f64::NAN, 0.0]).unwrap();
        assert!(eigh(&a).is_err());
        assert!(count_negative(&a, 0.0).is_err());
    }

    #[test]
    fn eigh_works_in_f32() {
        let a = SymMatrix::<f32>::new(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let e = eigh(&a).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-5);
        assert!((e.values[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn positive_eig_sum_cases() {
        assert_eq!(sum_positive_eigs(&SymMatrix::from_diag(&[3.0, -1.0, 2.0])).unwrap(), 5.0);
        assert_eq!(sum_positive_eigs(&SymMatrix::<f64>::zeros(4)).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_sym(&mut rng, 6);
        let e = eigh(&a).unwrap();
        let abs_sum: f64 = e.values.iter().map(|l| l.abs()).sum();
        let oracle = 0.5 * (a.trace() + abs_sum);
        assert_abs_diff_eq!(sum_positive_eigs(&a).unwrap(), oracle, epsilon = 1e-12);
    }

    #[test]
    fn cholesky_cases() {
        let l = cholesky(&SymMatrix::<f64>::identity(3)).unwrap();
        assert_eq!(l, LowerTriangular::from_diag(&[1.0, 1.0, 1.0]));
        let l = cholesky(&SymMatrix::from_diag(&[4.0, 1.0])).unwrap();
        assert_eq!(l, LowerTriangular::from_diag(&[2.0, 1.0]));

        let a = SymMatrix::new(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let l = cholesky(&a).unwrap();
        assert_abs_diff_eq!(l.get(0, 0), 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(l.get(1, 0), 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(l.get(1, 1), 1.5f64.sqrt(), epsilon = 1e-15);
        assert!(l.gram().sub(&a).frobenius_norm() <= 1e-14);
    }

    #[test]
    fn cholesky_reports_failing_pivot() {
        let a = SymMatrix::from_diag(&[1.0, 2.0, -1.0]);
        match cholesky(&a) {
            Err(Error::NotPositiveDefinite { pivot }) => assert_eq!(pivot, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cholesky_residual_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(&mut rng, 12);
        let l = cholesky(&a).unwrap();
        assert!(l.gram().sub(&a).frobenius_norm() <= 1e-10 * 12.0 * a.frobenius_norm());
        assert!((0..12).all(|i| l.get(i, i) > 0.0));
    }

    #[test]
    fn count_negative_cases() {
        assert_eq!(count_negative(&SymMatrix::from_diag(&[1.0, -2.0]), 0.0).unwrap(), 1);
        let swap = SymMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(count_negative(&swap, 0.0).unwrap(), 1);
        assert_eq!(count_negative(&SymMatrix::from_diag(&[-0.5, -2.0]), -1.0).unwrap(), 1);
        // eigenvalue exactly at the threshold is not strictly below
        assert_eq!(count_negative(&SymMatrix::from_diag(&[0.0, 1.0]), 0.0).unwrap(), 0);
    }

    #[test]
    fn count_negative_matches_eigh() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [3usize, 7, 20, 33] {
            for _ in 0..10 {
                let a = random_sym(&mut rng, n);
                let thr = rng.gen_range(-1.0..1.0);
                let e = eigh(&a).unwrap();
                // skip draws with an eigenvalue on the threshold
                if e.values.iter().any(|l| (l - thr).abs() < 1e-9) {
                    continue;
                }
                let expect = e.values.iter().filter(|&&l| l < thr).count();
                assert_eq!(count_negative(&a, thr).unwrap(), expect);
            }
        }
    }

    #[test]
    fn congruence_cases() {
        let s = SymMatrix::new(3, vec![2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, -1.0]).unwrap();
        let vals = congruence_eigs(&LowerTriangular::from_diag(&[1.0, 1.0, 1.0]), &s).unwrap();
        let direct = eigh(&s).unwrap().values;
        for (a, b) in vals.iter().zip(&direct) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-13);
        }
        let vals = congruence_eigs(&LowerTriangular::from_diag(&[2.0, 1.0]), &SymMatrix::identity(2)).unwrap();
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(vals[1], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn congruence_rejects_singular_factor() {
        let l = LowerTriangular::from_diag(&[1.0, 0.0]);
        assert!(matches!(
            congruence_eigs(&l, &SymMatrix::identity(2)),
            Err(Error::SingularFactor { index: 1 })
        ));
    }

    /// Generalized eigenvalues of (S, B) with B = L Lᵀ, found independently as
    /// the roots of det(S − μB) by bisection on the inertia of S − μB.
    #[test]
    fn congruence_matches_generalized_eigs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 6;
        let b = random_spd(&mut rng, n);
        let s = random_spd(&mut rng, n);
        let l = cholesky(&b).unwrap();
        let vals = congruence_eigs(&l, &s).unwrap();
        // k-th largest generalized eigenvalue: smallest μ with #neg(S − μB) ≥ n − k.
        for (k, &v) in vals.iter().enumerate() {
            let count = |mu: f64| {
                let mut m = s.clone();
                m.add_scaled(-mu, &b);
                let e = eigh(&m).unwrap();
                e.values.iter().filter(|&&x| x < 0.0).count()
            };
            let (mut lo, mut hi) = (0.0, 1e3);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if count(mid) >= n - k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            assert!((0.5 * (lo + hi) - v).abs() <= 1e-9 * (1.0 + v.abs()), "k={k}");
        }
    }
}
