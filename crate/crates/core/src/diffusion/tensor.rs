//! Scalar abstraction and a channel-major 3-D tensor.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;
use core::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

/// Floating-point element type of the network. Training runs in `f32`; the
/// gradient checks run the same code in `f64`.
pub trait Real:
    Copy
    + Default
    + Debug
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    const ZERO: Self;
    const ONE: Self;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn sqrt(self) -> Self;
    fn is_finite(self) -> bool;

    /// `C ← α·A·B + β·C` for strided row-major operands.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        a_strides: (isize, isize),
        b: &[Self],
        b_strides: (isize, isize),
        beta: Self,
        c: &mut [Self],
        c_cols: usize,
    );
}

fn check_extent(len: usize, rows: usize, cols: usize, (rs, cs): (isize, isize)) {
    if rows == 0 || cols == 0 {
        return;
    }
    let last = (rows - 1) as isize * rs + (cols - 1) as isize * cs;
    assert!(rs >= 0 && cs >= 0 && (last as usize) < len, "gemm operand out of bounds");
}

macro_rules! impl_real {
    ($t:ty, $gemm:path, $exp:path, $sqrt:path) => {
        impl Real for $t {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;

            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn exp(self) -> Self {
                $exp(self)
            }
            #[inline]
            fn sqrt(self) -> Self {
                $sqrt(self)
            }
            #[inline]
            fn is_finite(self) -> bool {
                <$t>::is_finite(self)
            }

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                a_strides: (isize, isize),
                b: &[Self],
                b_strides: (isize, isize),
                beta: Self,
                c: &mut [Self],
                c_cols: usize,
            ) {
                check_extent(a.len(), m, k, a_strides);
                check_extent(b.len(), k, n, b_strides);
                check_extent(c.len(), m, n, (c_cols as isize, 1));
                // SAFETY: every operand extent was bounds-checked above.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        a_strides.0,
                        a_strides.1,
                        b.as_ptr(),
                        b_strides.0,
                        b_strides.1,
                        beta,
                        c.as_mut_ptr(),
                        c_cols as isize,
                        1,
                    )
                }
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm, libm::expf, libm::sqrtf);
impl_real!(f64, matrixmultiply::dgemm, libm::exp, libm::sqrt);

/// `[channels, height, width]` tensor, channel-major. Vectors are `[n, 1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: [usize; 3],
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(shape: [usize; 3]) -> Self {
        Self {
            shape,
            data: vec![T::ZERO; shape[0] * shape[1] * shape[2]],
        }
    }

    pub fn from_vec(shape: [usize; 3], data: Vec<T>) -> Result<Self> {
        if data.len() != shape[0] * shape[1] * shape[2] {
            return Err(Error::ShapeMismatch {
                expected: shape.to_vec(),
                actual: alloc::vec![data.len()],
            });
        }
        Ok(Self { shape, data })
    }

    pub fn vector(data: Vec<T>) -> Self {
        Self {
            shape: [data.len(), 1, 1],
            data,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.shape[0]
    }

    pub fn plane(&self) -> usize {
        self.shape[1] * self.shape[2]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn convert<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn check_shape(&self, expected: [usize; 3]) -> Result<()> {
        if self.shape != expected {
            return Err(Error::ShapeMismatch {
                expected: expected.to_vec(),
                actual: self.shape.to_vec(),
            });
        }
        Ok(())
    }
}
