//! Dense real or complex n-d arrays.
//!
//! Gradients use the same storage as values. For complex tensors each
//! gradient entry packs the two real partials of a real loss as
//! `dL/dRe + j dL/dIm`, so a complex tensor behaves like two independent real
//! coordinates under differentiation.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    Real,
    Complex,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Data {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl Data {
    pub fn len(&self) -> usize {
        match self {
            Data::Real(v) => v.len(),
            Data::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            Data::Real(_) => DType::Real,
            Data::Complex(_) => DType::Complex,
        }
    }

    pub fn zeros(dtype: DType, len: usize) -> Self {
        match dtype {
            DType::Real => Data::Real(vec![0.0; len]),
            DType::Complex => Data::Complex(vec![Complex64::new(0.0, 0.0); len]),
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Data) {
        match (self, other) {
            (Data::Real(a), Data::Real(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
            (Data::Complex(a), Data::Complex(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
            _ => panic!("gradient dtype mismatch"),
        }
    }

    /// Real coordinates in storage order (complex entries as re, im).
    pub fn real_coords(&self) -> Vec<f64> {
        match self {
            Data::Real(v) => v.clone(),
            Data::Complex(v) => v.iter().flat_map(|c| [c.re, c.im]).collect(),
        }
    }

    /// Inverse of [`Data::real_coords`].
    pub fn from_real_coords(dtype: DType, coords: Vec<f64>) -> Self {
        match dtype {
            DType::Real => Data::Real(coords),
            DType::Complex => Data::Complex(coords.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Data::Real(v) => v.iter().all(|x| x.is_finite()),
            Data::Complex(v) => v.iter().all(|x| x.re.is_finite() && x.im.is_finite()),
        }
    }
}

/// Shaped, row-major array.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Data,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Data) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape("tensor", format!("shape {shape:?} needs {n} values, got {}", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn real(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        Self::new(shape.to_vec(), Data::Real(values))
    }

    pub fn complex(shape: &[usize], values: Vec<Complex64>) -> Result<Self> {
        Self::new(shape.to_vec(), Data::Complex(values))
    }

    pub fn zeros(shape: &[usize], dtype: DType) -> Self {
        Self { shape: shape.to_vec(), data: Data::zeros(dtype, shape.iter().product()) }
    }

    pub fn scalar(x: f64) -> Self {
        Self { shape: vec![1], data: Data::Real(vec![x]) }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Number of real scalars (complex entries count twice).
    pub fn scalar_count(&self) -> usize {
        match self.dtype() {
            DType::Real => self.numel(),
            DType::Complex => 2 * self.numel(),
        }
    }

    pub fn data(&self) -> &Data {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Data {
        &mut self.data
    }

    pub fn into_data(self) -> Data {
        self.data
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match &self.data {
            Data::Real(v) => Some(v),
            Data::Complex(_) => None,
        }
    }

    pub fn as_complex(&self) -> Option<&[Complex64]> {
        match &self.data {
            Data::Complex(v) => Some(v),
            Data::Real(_) => None,
        }
    }

    pub fn reshaped(&self, shape: &[usize]) -> Result<Self> {
        Self::new(shape.to_vec(), self.data.clone())
    }
}

/// Element type shared by the real and complex kernels.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + PartialEq
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + 'static
{
    const DTYPE: DType;
    fn zero() -> Self;
    fn conj(self) -> Self;
    fn wrap(v: Vec<Self>) -> Data;
    fn unwrap(d: &Data) -> &[Self];
    fn unwrap_owned(d: Data) -> Vec<Self>;
}

impl Scalar for f64 {
    const DTYPE: DType = DType::Real;

    fn zero() -> Self {
        0.0
    }

    fn conj(self) -> Self {
        self
    }

    fn wrap(v: Vec<Self>) -> Data {
        Data::Real(v)
    }

    fn unwrap(d: &Data) -> &[Self] {
        match d {
            Data::Real(v) => v,
            Data::Complex(_) => panic!("expected real data"),
        }
    }

    fn unwrap_owned(d: Data) -> Vec<Self> {
        match d {
            Data::Real(v) => v,
            Data::Complex(_) => panic!("expected real data"),
        }
    }
}

impl Scalar for Complex64 {
    const DTYPE: DType = DType::Complex;

    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }

    fn conj(self) -> Self {
        Complex64::conj(&self)
    }

    fn wrap(v: Vec<Self>) -> Data {
        Data::Complex(v)
    }

    fn unwrap(d: &Data) -> &[Self] {
        match d {
            Data::Complex(v) => v,
            Data::Real(_) => panic!("expected complex data"),
        }
    }

    fn unwrap_owned(d: Data) -> Vec<Self> {
        match d {
            Data::Complex(v) => v,
            Data::Real(_) => panic!("expected complex data"),
        }
    }
}
