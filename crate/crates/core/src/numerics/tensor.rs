//! Row-major 2-D double-precision tensors. Scalars are 1x1.

use super::NumError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    pub shape: (usize, usize),
    pub values: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseTensor { shape: (rows, cols), values: vec![0.0; rows * cols] }
    }

    pub fn scalar(v: f64) -> Self {
        DenseTensor { shape: (1, 1), values: vec![v] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, NumError> {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        if rows.iter().any(|x| x.len() != c) {
            return Err(NumError::Shape("ragged rows".into()));
        }
        Ok(DenseTensor { shape: (r, c), values: rows.into_iter().flatten().collect() })
    }

    pub fn row_vector(values: Vec<f64>) -> Self {
        DenseTensor { shape: (1, values.len()), values }
    }

    pub fn rows(&self) -> usize {
        self.shape.0
    }

    pub fn cols(&self) -> usize {
        self.shape.1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.shape.1 + c]
    }

    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.values[r * self.shape.1 + c]
    }

    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.values.len(), 1);
        self.values[0]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn matmul(&self, other: &DenseTensor) -> Result<DenseTensor, NumError> {
        let (n, k) = self.shape;
        let (k2, m) = other.shape;
        if k != k2 {
            return Err(NumError::Shape(format!(
                "matmul {n}x{k} by {k2}x{m}"
            )));
        }
        let mut out = DenseTensor::zeros(n, m);
        for i in 0..n {
            for p in 0..k {
                let a = self.values[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let row = &other.values[p * m..(p + 1) * m];
                let dst = &mut out.values[i * m..(i + 1) * m];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> DenseTensor {
        let (n, m) = self.shape;
        let mut out = DenseTensor::zeros(m, n);
        for i in 0..n {
            for j in 0..m {
                out.values[j * n + i] = self.values[i * m + j];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseTensor {
        DenseTensor { shape: self.shape, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip(&self, other: &DenseTensor, f: impl Fn(f64, f64) -> f64) -> Result<DenseTensor, NumError> {
        if self.shape != other.shape {
            return Err(NumError::Shape(format!(
                "elementwise {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(DenseTensor {
            shape: self.shape,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add_in_place(&mut self, other: &DenseTensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }
}
