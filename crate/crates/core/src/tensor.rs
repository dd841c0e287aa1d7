//! Dense row-major tensors and the small set of kernels the verifier and the
//! native encoder are built from.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};

/// Floating point element type. `f32` is the working precision; `f64` is used
/// by the finite-difference oracle.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 conversion")
    }
    fn as_f64(self) -> f64 {
        self.to_f64().expect("f64 conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {n} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Row `i` of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[T] {
        let cols = self.shape[self.shape.len() - 1];
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|v| *v = value);
    }
}

/// `a (n×k) · b (k×m)`.
pub fn matmul<T: Scalar>(a: &[T], b: &[T], n: usize, k: usize, m: usize) -> Vec<T> {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), k * m);
    let mut out = vec![T::zero(); n * m];
    for i in 0..n {
        let orow = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let brow = &b[p * m..(p + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
    out
}

/// `a (n×k) · bᵀ` where `b` is `m×k`.
pub fn matmul_bt<T: Scalar>(a: &[T], b: &[T], n: usize, k: usize, m: usize) -> Vec<T> {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), m * k);
    let mut out = vec![T::zero(); n * m];
    for i in 0..n {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..m {
            let brow = &b[j * k..(j + 1) * k];
            out[i * m + j] = dot(arow, brow);
        }
    }
    out
}

/// Accumulates `aᵀ (k×n) · b (n×m)` into `out (k×m)`.
pub fn matmul_at_acc<T: Scalar>(a: &[T], b: &[T], n: usize, k: usize, m: usize, out: &mut [T]) {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), n * m);
    debug_assert_eq!(out.len(), k * m);
    for i in 0..n {
        let brow = &b[i * m..(i + 1) * m];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let orow = &mut out[p * m..(p + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Adds `bias` to every row of `x`.
pub fn add_row_bias<T: Scalar>(x: &mut [T], bias: &[T]) {
    for row in x.chunks_mut(bias.len()) {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v = *v + b;
        }
    }
}

/// Accumulates the column sums of `x` into `out`.
pub fn sum_rows_acc<T: Scalar>(x: &[T], out: &mut [T]) {
    for row in x.chunks(out.len()) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o = *o + v;
        }
    }
}

pub fn add_assign<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

/// Numerically stable in-place softmax over one row.
pub fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum = sum + *v;
    }
    for v in row.iter_mut() {
        *v = *v / sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::<f32>::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::<f32>::from_vec(&[2, 3], vec![0.0; 6]).unwrap();
        assert_eq!(t.shape(), &[2, 3]);
    }

    #[test]
    fn matmul_variants_agree() {
        let a: Vec<f64> = (0..6).map(|v| v as f64 - 2.0).collect(); // 2x3
        let b: Vec<f64> = (0..12).map(|v| (v as f64) * 0.5).collect(); // 3x4
        let ab = matmul(&a, &b, 2, 3, 4);
        // bᵀ stored as 4x3
        let mut bt = vec![0.0; 12];
        for i in 0..3 {
            for j in 0..4 {
                bt[j * 3 + i] = b[i * 4 + j];
            }
        }
        assert_eq!(ab, matmul_bt(&a, &bt, 2, 3, 4));
        // aᵀ·(ab) computed two ways
        let mut at = vec![0.0; 6];
        for i in 0..2 {
            for j in 0..3 {
                at[j * 2 + i] = a[i * 3 + j];
            }
        }
        let mut acc = vec![0.0; 12];
        matmul_at_acc(&a, &ab, 2, 3, 4, &mut acc);
        assert_eq!(acc, matmul(&at, &ab, 3, 2, 4));
    }

    #[test]
    fn softmax_handles_large_values() {
        let mut row = [1000.0f32, 0.0];
        softmax_in_place(&mut row);
        assert_eq!(row[0], 1.0);
        assert!(row[1] >= 0.0 && row[1] < 1e-30);
    }
}
