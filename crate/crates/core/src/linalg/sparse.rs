//! Sparse symmetric matrices and an envelope (skyline) LDLᵀ factorization.
//!
//! The factorization uses diagonal pivots in the natural ordering, so the
//! signs of `D` give the inertia of the matrix (Sylvester's law). Meshes from
//! [`crate::mesh::build_disk_mesh`] are numbered ring by ring, which keeps the
//! envelope narrow without reordering.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Symmetric sparse matrix in compressed-row form with the full pattern stored.
#[derive(Clone, Debug)]
pub struct SparseSym<T> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Real> SparseSym<T> {
    /// Builds from `(i, j, v)` triplets, summing duplicates. Each off-diagonal
    /// triplet must appear for both `(i, j)` and `(j, i)`; asymmetric input is
    /// rejected.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, T)> = triplets.to_vec();
        for &(i, j, _) in &sorted {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("triplet ({i},{j}) outside {n}x{n}")));
            }
        }
        sorted.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(sorted.len());
        let mut vals: Vec<T> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *vals.last_mut().expect("nonempty") += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let m = SparseSym {
            n,
            row_ptr,
            cols,
            vals,
        };
        for i in 0..n {
            for (j, v) in m.row(i) {
                if m.get(j, i) != v {
                    return Err(Error::invalid(format!("entries ({i},{j}) and ({j},{i}) differ")));
                }
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Iterator over `(column, value)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(p) => self.vals[r.start + p],
            Err(_) => T::zero(),
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> T {
        self.vals.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// `a·self + b·other`; patterns are merged.
    pub fn lin_comb(&self, a: T, other: &Self, b: T) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {}",
                self.n, other.n
            )));
        }
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut cols = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut vals = Vec::with_capacity(cols.capacity());
        for i in 0..self.n {
            let mut x = self.row(i).peekable();
            let mut y = other.row(i).peekable();
            loop {
                let (c, v) = match (x.peek().copied(), y.peek().copied()) {
                    (Some((cx, vx)), Some((cy, vy))) => {
                        if cx == cy {
                            x.next();
                            y.next();
                            (cx, a * vx + b * vy)
                        } else if cx < cy {
                            x.next();
                            (cx, a * vx)
                        } else {
                            y.next();
                            (cy, b * vy)
                        }
                    }
                    (Some((cx, vx)), None) => {
                        x.next();
                        (cx, a * vx)
                    }
                    (None, Some((cy, vy))) => {
                        y.next();
                        (cy, b * vy)
                    }
                    (None, None) => break,
                };
                cols.push(c);
                vals.push(v);
            }
            row_ptr[i + 1] = cols.len();
        }
        Ok(SparseSym {
            n: self.n,
            row_ptr,
            cols,
            vals,
        })
    }

    /// Dense row-major copy (for tests and small problems).
    pub fn to_dense(&self) -> Vec<T> {
        let mut d = vec![T::zero(); self.n * self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[i * self.n + j] = v;
            }
        }
        d
    }
}

/// `A = L D Lᵀ` with unit lower-triangular `L` stored by row envelope.
#[derive(Clone, Debug)]
pub struct LdltFactor<T> {
    n: usize,
    /// First column of the envelope of each row.
    first: Vec<usize>,
    /// Offset into `lower` of each row's envelope.
    start: Vec<usize>,
    lower: Vec<T>,
    d: Vec<T>,
}

impl<T: Real> LdltFactor<T> {
    /// Factors `a` without reordering. A pivot with `|d_i| < pivot_tol` aborts
    /// with [`Error::NearResonance`].
    pub fn factor(a: &SparseSym<T>, pivot_tol: T) -> Result<Self> {
        let n = a.dim();
        let mut first: Vec<usize> = (0..n).collect();
        for (i, f) in first.iter_mut().enumerate() {
            for (j, _) in a.row(i) {
                if j < *f {
                    *f = j;
                }
            }
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i]);
        }
        let mut lower = vec![T::zero(); start[n]];
        let mut d = vec![T::zero(); n];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j < i {
                    lower[start[i] + (j - first[i])] = v;
                } else if j == i {
                    d[i] = v;
                }
            }
        }

        // Row-oriented Crout: on entry lower[i, j] holds a_ij; we first form
        // g_ij = a_ij − Σ_k g_ik l_jk (g = L D), then scale.
        for i in 0..n {
            let fi = first[i];
            let si = start[i];
            for j in fi..i {
                let fj = first[j];
                let sj = start[j];
                let k0 = fi.max(fj);
                let mut s = lower[si + (j - fi)];
                for k in k0..j {
                    s -= lower[si + (k - fi)] * lower[sj + (k - fj)];
                }
                lower[si + (j - fi)] = s;
            }
            // now lower[i, j] = g_ij; convert to l_ij and accumulate d_i
            let mut di = d[i];
            for j in fi..i {
                let g = lower[si + (j - fi)];
                let l = g / d[j];
                di -= g * l;
                lower[si + (j - fi)] = l;
            }
            if !(di.abs() >= pivot_tol) {
                return Err(Error::NearResonance {
                    pivot: i,
                    magnitude: di.abs().to_f64_lossy(),
                });
            }
            d[i] = di;
        }
        Ok(LdltFactor {
            n,
            first,
            start,
            lower,
            d,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn pivots(&self) -> &[T] {
        &self.d
    }

    /// Number of negative pivots, which equals the number of negative
    /// eigenvalues of the factored matrix.
    pub fn negative_count(&self) -> usize {
        self.d.iter().filter(|&&x| x < T::zero()).count()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n);
        let mut x = b.to_vec();
        for i in 0..self.n {
            let fi = self.first[i];
            let si = self.start[i];
            let mut s = x[i];
            for j in fi..i {
                s -= self.lower[si + (j - fi)] * x[j];
            }
            x[i] = s;
        }
        for (xi, &di) in x.iter_mut().zip(&self.d) {
            *xi /= di;
        }
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let si = self.start[i];
            let xi = x[i];
            for j in fi..i {
                x[j] -= self.lower[si + (j - fi)] * xi;
            }
        }
        x
    }
}
