//! Finite truncations of a real separable Hilbert space, realized as `R^D`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default truncation dimension.
pub const DEFAULT_DIM: usize = 8;

/// An element of `R^D` with the Euclidean inner product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HVector {
    coeffs: Vec<f64>,
}

impl HVector {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zero(dim: usize) -> Self {
        Self { coeffs: vec![0.0; dim] }
    }

    /// `scale * e_k`, the `k`-th basis vector scaled.
    pub fn basis(dim: usize, k: usize, scale: f64) -> Self {
        let mut v = Self::zero(dim);
        v.coeffs[k] = scale;
        v
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn add(&self, other: &HVector) -> Result<HVector> {
        check_dims(self, other)?;
        Ok(HVector::new(
            self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &HVector) -> Result<HVector> {
        check_dims(self, other)?;
        Ok(HVector::new(
            self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn scale(&self, c: f64) -> HVector {
        HVector::new(self.coeffs.iter().map(|x| c * x).collect())
    }

    pub fn inner(&self, other: &HVector) -> Result<f64> {
        check_dims(self, other)?;
        Ok(dot(&self.coeffs, &other.coeffs))
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coeffs)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.coeffs, &self.coeffs)
    }
}

fn check_dims(u: &HVector, v: &HVector) -> Result<()> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: v.dim(),
        });
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm of a coefficient slice. Uses `hypot`-style rescaling only
/// for the one-dimensional case, where `abs` is exact.
pub(crate) fn norm(a: &[f64]) -> f64 {
    match a {
        [x] => x.abs(),
        _ => dot(a, a).sqrt(),
    }
}
