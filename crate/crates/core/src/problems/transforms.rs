//! Standard space transformations used by the benchmark functions.

use crate::scalar::Scalar;

/// `i / (d - 1)`, zero in one dimension.
pub fn ratio<T: Scalar>(i: usize, d: usize) -> T {
    if d <= 1 {
        T::zero()
    } else {
        T::of_usize(i) / T::of_usize(d - 1)
    }
}

/// Oscillation transform of one coordinate.
pub fn t_osz1<T: Scalar>(x: T) -> T {
    if x == T::zero() {
        return T::zero();
    }
    let xh = x.abs().ln();
    let (c1, c2) = if x > T::zero() {
        (T::of(10.0), T::of(7.9))
    } else {
        (T::of(5.5), T::of(3.1))
    };
    x.signum() * (xh + T::of(0.049) * ((c1 * xh).sin() + (c2 * xh).sin())).exp()
}

pub fn t_osz<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| t_osz1(v)).collect()
}

/// Asymmetry transform with strength `beta`.
pub fn t_asy<T: Scalar>(x: &[T], beta: T) -> Vec<T> {
    let d = x.len();
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            if v > T::zero() {
                v.powf(T::one() + beta * ratio::<T>(i, d) * v.sqrt())
            } else {
                v
            }
        })
        .collect()
}

/// Diagonal of the conditioning matrix `Λ^alpha`.
pub fn lambda_diag<T: Scalar>(alpha: T, d: usize) -> Vec<T> {
    (0..d).map(|i| alpha.powf(T::of(0.5) * ratio::<T>(i, d))).collect()
}

pub fn scale<T: Scalar>(diag: &[T], x: &[T]) -> Vec<T> {
    diag.iter().zip(x).map(|(&a, &b)| a * b).collect()
}

/// Boundary penalty `Σ max(0, |x_i| - 5)^2`.
pub fn f_pen<T: Scalar>(x: &[T]) -> T {
    x.iter()
        .map(|&v| {
            let e = (v.abs() - T::of(5.0)).max(T::zero());
            e * e
        })
        .sum()
}
