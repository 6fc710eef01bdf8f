//! Bessel functions of the first kind for integer order.
//!
//! Values come from Miller's backward recurrence normalized by
//! `J_0(x) + 2 Σ_k J_{2k}(x) = 1`, which is stable for all orders in range.

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAX_ORDER: usize = 64;
pub const MAX_ARG: f64 = 100.0;

fn check_args<T: Real>(n: usize, x: T) -> Result<()> {
    if n > MAX_ORDER {
        return Err(Error::invalid(format!("Bessel order {n} exceeds {MAX_ORDER}")));
    }
    if !(x >= T::zero() && x <= T::c(MAX_ARG)) {
        return Err(Error::invalid(format!("Bessel argument {x} outside [0, {MAX_ARG}]")));
    }
    Ok(())
}

/// `J_0(x), …, J_{nmax}(x)` from a single backward sweep.
///
/// Requires `nmax <= 64` and `0 <= x <= 100`.
pub fn bessel_j_all<T: Real>(nmax: usize, x: T) -> Result<Vec<T>> {
    check_args(nmax, x)?;
    Ok(table(nmax, x))
}

/// Unchecked sweep; callers validate `x` and keep `nmax <= MAX_ORDER + 1`.
pub(crate) fn table<T: Real>(nmax: usize, x: T) -> Vec<T> {
    let mut out = vec![T::zero(); nmax + 1];
    if x == T::zero() {
        out[0] = T::one();
        return out;
    }
    let xf = x.to_f64_lossy();
    let top = (nmax as f64).max(xf);
    // Start well above max(n, x); the recurrence error decays geometrically
    // once the order exceeds the argument.
    let mut start = (top + 30.0 + (50.0 * top).sqrt()) as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let big = T::max_value().sqrt();
    let two = T::c(2.0);
    let mut jp1 = T::zero();
    let mut j = T::one() / big;
    let mut norm = T::zero();
    // J_start = tiny, J_{start+1} = 0, recur down to 0.
    let mut k = start;
    loop {
        if k <= nmax {
            out[k] = j;
        }
        if k % 2 == 0 {
            norm += if k == 0 { j } else { two * j };
        }
        if k == 0 {
            break;
        }
        let jm1 = two * T::from_usize_lossy(k) / x * j - jp1;
        jp1 = j;
        j = jm1;
        k -= 1;
        if j.abs() > big {
            let s = T::one() / big;
            j *= s;
            jp1 *= s;
            norm *= s;
            for v in out.iter_mut().skip(k + 1) {
                *v *= s;
            }
        }
    }
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// `J_n(x)` for `n <= 64`, `0 <= x <= 100`.
pub fn bessel_j<T: Real>(n: usize, x: T) -> Result<T> {
    check_args(n, x)?;
    Ok(table(n, x)[n])
}

/// `J_n'(x)`: `(J_{n−1} − J_{n+1})/2` for `n >= 1` and `−J_1` for `n = 0`.
pub fn bessel_j_prime<T: Real>(n: usize, x: T) -> Result<T> {
    check_args(n, x)?;
    let all = table(n + 1, x);
    Ok(derivative_from_table(&all, n))
}

/// `J_n'` from a table holding at least `J_0..=J_{n+1}`.
pub(crate) fn derivative_from_table<T: Real>(table: &[T], n: usize) -> T {
    if n == 0 {
        -table[1]
    } else {
        (table[n - 1] - table[n + 1]) * T::c(0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Power-series reference, accurate to ~1e-14 for x <= 10.
    fn series(n: usize, x: f64) -> f64 {
        let half = 0.5 * x;
        let mut term = half.powi(n as i32) / (1..=n).map(|k| k as f64).product::<f64>();
        let mut sum = term;
        for k in 1..200 {
            term *= -half * half / (k as f64 * (k + n) as f64);
            sum += term;
            if term.abs() < 1e-30 {
                break;
            }
        }
        sum
    }

    #[test]
    fn values_at_origin() {
        assert_eq!(bessel_j(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(1, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_j_prime(0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn matches_power_series() {
        for n in [0usize, 1, 2, 5, 16, 33, 64] {
            for &x in &[1e-6, 0.1, 0.5, 1.0, 2.5, 5.0, 7.3, 10.0] {
                let got = bessel_j(n, x).unwrap();
                assert_abs_diff_eq!(got, series(n, x), epsilon = 1e-12);
            }
        }
    }

    /// Reference values frozen from an independent library evaluation.
    #[test]
    fn large_argument_reference_values() {
        let cases = [
            (0usize, 100.0, 0.01998585030422312),
            (5, 50.0, -0.08140024769656964),
            (64, 100.0, 0.03998506945291891),
            (30, 80.5, 0.07883868945117009),
            (1, 30.0, -0.11875106261662291),
            (16, 1.0, 7.186396586807489e-19),
            (10, 20.0, 0.1864825580239451),
        ];
        for (n, x, expect) in cases {
            assert_abs_diff_eq!(bessel_j(n, x).unwrap(), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn recurrence_residual() {
        for n in 1..=16usize {
            for i in 0..=60 {
                let x = 0.1 + i as f64 * 0.5;
                let t = bessel_j_all(n + 1, x).unwrap();
                let r = t[n - 1] + t[n + 1] - 2.0 * n as f64 / x * t[n];
                assert!(r.abs() <= 1e-10 * (1.0 + t[n].abs()), "n={n} x={x} r={r}");
            }
        }
    }

    #[test]
    fn wronskian_like_identity_is_finite_and_sign_consistent() {
        // J_{n+1} J_n' − J_n J_{n+1}' = (2n+1)/x · J_n J_{n+1} − J_n² − J_{n+1}²
        // stays strictly negative.
        for n in 0..8usize {
            for i in 1..=40 {
                let x = i as f64 * 0.2;
                let t = bessel_j_all(n + 2, x).unwrap();
                let w = t[n + 1] * derivative_from_table(&t, n) - t[n] * derivative_from_table(&t, n + 1);
                assert!(w.is_finite());
                assert!(w < 0.0, "n={n} x={x} w={w}");
            }
        }
    }

    #[test]
    fn first_zero_of_j0() {
        assert!(bessel_j(0, 2.404825557695773f64).unwrap().abs() < 1e-10);
    }

    #[test]
    fn first_zero_of_j1_prime() {
        assert!(bessel_j_prime(1, 1.8412f64).unwrap().abs() < 1e-4);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let h = 1e-6;
        let fd = (bessel_j(2, 3.7 + h).unwrap() - bessel_j(2, 3.7 - h).unwrap()) / (2.0 * h);
        assert_abs_diff_eq!(bessel_j_prime(2, 3.7).unwrap(), fd, epsilon = 1e-6);
    }

    #[test]
    fn derivative_identity() {
        for n in 1..10usize {
            let x = 0.3 + n as f64;
            let expect = 0.5 * (bessel_j(n - 1, x).unwrap() - bessel_j(n + 1, x).unwrap());
            assert_abs_diff_eq!(bessel_j_prime(n, x).unwrap(), expect, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(
            bessel_j_prime(0, 1.3).unwrap(),
            -bessel_j(1, 1.3).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(bessel_j(65, 1.0).is_err());
        assert!(bessel_j(0, -0.1).is_err());
        assert!(bessel_j(0, 100.5).is_err());
        assert!(bessel_j(0, f64::NAN).is_err());
    }

    #[test]
    fn f32_instantiation() {
        let v: f32 = bessel_j(0, 1.0f32).unwrap();
        assert!((v - 0.765_197_7).abs() < 1e-5);
    }
}
