//! Scalar abstraction shared by every numeric kernel in the crate.
//!
//! Kernels are written once against [`Scalar`]. The only operation that is
//! specialised per type is dense matrix multiplication: `f32` and `f64` route
//! to `matrixmultiply`, anything else falls back to a plain triple loop.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Read-only view of a dense row-major matrix, optionally transposed.
#[derive(Clone, Copy, Debug)]
pub struct MatRef<'a, T> {
    pub data: &'a [T],
    /// Logical rows after applying `transposed`.
    pub rows: usize,
    /// Logical columns after applying `transposed`.
    pub cols: usize,
    pub transposed: bool,
}

impl<'a, T> MatRef<'a, T> {
    /// Matrix stored row-major as `rows x cols`.
    pub fn new(data: &'a [T], rows: usize, cols: usize) -> Self {
        MatRef { data, rows, cols, transposed: false }
    }

    /// Transpose of a matrix stored row-major as `stored_rows x stored_cols`.
    pub fn transposed(data: &'a [T], stored_rows: usize, stored_cols: usize) -> Self {
        MatRef { data, rows: stored_cols, cols: stored_rows, transposed: true }
    }

    fn strides(&self) -> (isize, isize) {
        if self.transposed {
            (1, self.rows as isize)
        } else {
            (self.cols as isize, 1)
        }
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> &T {
        let (rs, cs) = self.strides();
        &self.data[r * rs as usize + c * cs as usize]
    }
}

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + 'static
{
    /// Short name used in file headers and diagnostics.
    const NAME: &'static str;

    /// `c = alpha * a * b + beta * c`, with `c` dense row-major `a.rows x b.cols`.
    ///
    /// Panics on inconsistent extents.
    fn gemm(alpha: Self, a: MatRef<'_, Self>, b: MatRef<'_, Self>, beta: Self, c: &mut [Self]) {
        check_gemm(&a, &b, c.len());
        let n = b.cols;
        for i in 0..a.rows {
            let row = &mut c[i * n..(i + 1) * n];
            for v in row.iter_mut() {
                *v = if beta == Self::zero() { Self::zero() } else { *v * beta };
            }
            for p in 0..a.cols {
                let aip = alpha * *a.at(i, p);
                if aip == Self::zero() {
                    continue;
                }
                for (j, v) in row.iter_mut().enumerate() {
                    *v += aip * *b.at(p, j);
                }
            }
        }
    }

    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 converts to every scalar")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_f64_lossy(v as f64)
    }
}

fn check_gemm<T>(a: &MatRef<'_, T>, b: &MatRef<'_, T>, c_len: usize) {
    assert_eq!(a.cols, b.rows, "gemm inner extents differ");
    assert!(a.data.len() >= a.rows * a.cols, "gemm lhs buffer too short");
    assert!(b.data.len() >= b.rows * b.cols, "gemm rhs buffer too short");
    assert_eq!(c_len, a.rows * b.cols, "gemm output buffer has wrong length");
}

macro_rules! native_gemm {
    ($t:ty, $name:literal, $kernel:path) => {
        impl Scalar for $t {
            const NAME: &'static str = $name;

            fn gemm(alpha: Self, a: MatRef<'_, Self>, b: MatRef<'_, Self>, beta: Self, c: &mut [Self]) {
                check_gemm(&a, &b, c.len());
                if a.rows == 0 || b.cols == 0 {
                    return;
                }
                let (rsa, csa) = a.strides();
                let (rsb, csb) = b.strides();
                // SAFETY: extents and buffer lengths were checked above; strides
                // describe dense row-major storage (or its transpose) inside
                // those buffers, and `c` is exclusively borrowed.
                unsafe {
                    $kernel(
                        a.rows,
                        a.cols,
                        b.cols,
                        alpha,
                        a.data.as_ptr(),
                        rsa,
                        csa,
                        b.data.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        b.cols as isize,
                        1,
                    );
                }
            }
        }
    };
}

native_gemm!(f32, "f32", matrixmultiply::sgemm);
native_gemm!(f64, "f64", matrixmultiply::dgemm);
