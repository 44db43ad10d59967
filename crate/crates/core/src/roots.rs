//! Bracketing root finders: a uniform sign-change scan followed by bisection.

use crate::scalar::Scalar;

/// Bisects `f` on `[lo, hi]` until the bracket cannot shrink any further.
///
/// `f(lo)` and `f(hi)` must have opposite signs (or one of them is zero).
pub fn bisect<T: Scalar, F: Fn(T) -> T>(f: F, mut lo: T, mut hi: T) -> T {
    let mut f_lo = f(lo);
    if f_lo == T::zero() {
        return lo;
    }
    if f(hi) == T::zero() {
        return hi;
    }
    let two = T::lit(2.0);
    for _ in 0..256 {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == T::zero() {
            return mid;
        }
        if (f_mid < T::zero()) == (f_lo < T::zero()) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    if f_lo.abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

/// Bisects until the bracket is narrower than `tol`, returning the midpoint.
///
/// Used where `f` is expensive and only a coarse location is required.
pub fn bisect_to<T: Scalar, F: FnMut(T) -> T>(mut f: F, mut lo: T, mut hi: T, tol: T) -> T {
    let two = T::lit(2.0);
    let mut f_lo = f(lo);
    while (hi - lo).abs() > tol {
        let mid = (lo + hi) / two;
        let f_mid = f(mid);
        if f_mid == T::zero() {
            return mid;
        }
        if (f_mid < T::zero()) == (f_lo < T::zero()) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / two
}

/// Samples `f` at `a, a+step, ..., b` and returns every bracket `[x_i, x_{i+1}]`
/// across which `f` changes sign. A sample that is exactly zero yields a
/// degenerate bracket `[x_i, x_i]`.
pub fn sign_change_brackets<T: Scalar, F: Fn(T) -> T>(f: F, a: T, b: T, step: T) -> Vec<(T, T)> {
    let n = ((b - a) / step).round().to_usize().unwrap_or(0).max(1);
    let h = (b - a) / T::from_usize(n).expect("sample count fits scalar");
    let mut out = Vec::new();
    let mut x_prev = a;
    let mut f_prev = f(a);
    if f_prev == T::zero() {
        out.push((a, a));
    }
    for i in 1..=n {
        let x = if i == n {
            b
        } else {
            a + h * T::from_usize(i).expect("index fits scalar")
        };
        let fx = f(x);
        if fx == T::zero() {
            out.push((x, x));
        } else if f_prev != T::zero() && (fx < T::zero()) != (f_prev < T::zero()) {
            out.push((x_prev, x));
        }
        x_prev = x;
        f_prev = fx;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt_two() {
        let r = bisect(|x: f64| x * x - 2.0, 0.0, 2.0);
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bisect_to_respects_tolerance() {
        let r = bisect_to(|x: f64| x - 0.3, 0.0, 1.0, 1e-6);
        assert!((r - 0.3).abs() < 1e-6);
    }

    #[test]
    fn scan_reports_each_crossing() {
        let b = sign_change_brackets(|x: f64| (x - 0.25) * (x - 0.5005) * (x - 0.75), 0.0, 1.0, 0.01);
        assert_eq!(b.len(), 3);
        assert!(b[1].0 <= 0.5005 && 0.5005 <= b[1].1);
    }

    #[test]
    fn scan_reports_exact_zero_once() {
        let b = sign_change_brackets(|x: f64| x - 0.5, 0.0, 1.0, 0.25);
        assert_eq!(b, vec![(0.5, 0.5)]);
    }

    #[test]
    fn scan_works_in_f32() {
        let b = sign_change_brackets(|x: f32| x - 0.3, 0.0, 1.0, 0.1);
        assert_eq!(b.len(), 1);
        let r = bisect(|x: f32| x - 0.3, b[0].0, b[0].1);
        assert!((r - 0.3).abs() < 1e-6);
    }
}
