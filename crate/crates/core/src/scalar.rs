//! Scalar abstraction shared by the model math.
//!
//! Parameters and activations are generic over [`Scalar`] so the same
//! encoder, decoders and optimizers run in `f32` for training and serving
//! and in `f64` for finite-difference gradient checks. Reductions always
//! accumulate in `f64` regardless of the storage type.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point storage type: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Lossy conversion from `f64`.
    fn of(v: f64) -> Self;

    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Dot product accumulated in `f64`.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.as_f64() * y.as_f64()).sum()
}

/// Euclidean norm accumulated in `f64`.
#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> f64 {
    dot(a, a).sqrt()
}

/// `y = M x` for a row-major `rows x cols` matrix, accumulating in `f64`.
pub fn matvec<T: Scalar>(m: &[T], rows: usize, cols: usize, x: &[T], y: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    for (r, out) in y.iter_mut().enumerate().take(rows) {
        *out = dot(&m[r * cols..(r + 1) * cols], x);
    }
}

/// `dx += Mᵀ dy` for a row-major `rows x cols` matrix.
pub fn matvec_t_acc<T: Scalar>(m: &[T], rows: usize, cols: usize, dy: &[f64], dx: &mut [f64]) {
    for (r, &g) in dy.iter().enumerate().take(rows) {
        if g == 0.0 {
            continue;
        }
        let row = &m[r * cols..(r + 1) * cols];
        for (d, w) in dx.iter_mut().zip(row) {
            *d += g * w.as_f64();
        }
    }
}

/// `dM += dy xᵀ` into an `f64` gradient buffer.
pub fn outer_acc<T: Scalar>(dy: &[f64], x: &[T], dm: &mut [f64]) {
    let cols = x.len();
    for (r, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &mut dm[r * cols..(r + 1) * cols];
        for (d, v) in row.iter_mut().zip(x) {
            *d += g * v.as_f64();
        }
    }
}

pub fn to_scalars<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::of(x)).collect()
}

pub fn is_finite_slice<T: Scalar>(v: &[T]) -> bool {
    v.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f32_dot_accumulates_wide() {
        // 1e8 + 1 - 1e8 is lost in f32 accumulation but not in f64.
        let a = [1.0e8f32, 1.0, -1.0e8];
        let b = [1.0f32, 1.0, 1.0];
        assert_eq!(dot(&a, &b), 1.0);
    }

    #[test]
    fn matvec_and_transpose_agree() {
        let m = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0];
        let x = [1.0, 0.0, -1.0];
        let mut y = [0.0; 2];
        matvec(&m, 2, 3, &x, &mut y);
        assert_eq!(y, [-2.0, -2.0]);
        let mut dx = [0.0; 3];
        matvec_t_acc(&m, 2, 3, &[1.0, 1.0], &mut dx);
        assert_eq!(dx, [5.0, 7.0, 9.0]);
    }
}
