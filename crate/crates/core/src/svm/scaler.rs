use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::FeatureMatrix;

/// Per-dimension standardization learned from training rows.
///
/// Dimensions with zero spread keep `std = 1`, so they map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: &FeatureMatrix) -> Result<Self> {
        let all: Vec<usize> = (0..x.rows()).collect();
        Self::fit_rows(x, &all)
    }

    /// Fits on the listed rows only.
    pub fn fit_rows(x: &FeatureMatrix, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("scaler training rows"));
        }
        let d = x.cols();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for &i in rows {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for &i in rows {
            for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                let c = v - m;
                *s += c * c;
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 { sd } else { 1.0 }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_into(&self, row: &[f64], out: &mut [f64]) {
        for (((o, v), m), s) in out.iter_mut().zip(row).zip(&self.mean).zip(&self.std) {
            *o = (v - m) / s;
        }
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: row.len() });
        }
        let mut out = vec![0.0; row.len()];
        self.transform_into(row, &mut out);
        Ok(out)
    }

    /// Standardized copy of the listed rows.
    pub fn transform_rows(&self, x: &FeatureMatrix, rows: &[usize]) -> Result<FeatureMatrix> {
        if x.cols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.cols() });
        }
        let mut out = FeatureMatrix::zeros(rows.len(), x.cols());
        for (k, &i) in rows.iter().enumerate() {
            self.transform_into(x.row(i), out.row_mut(k));
        }
        Ok(out)
    }

    pub fn transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        let all: Vec<usize> = (0..x.rows()).collect();
        self.transform_rows(x, &all)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_example() {
        let x = FeatureMatrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        let s = Scaler::fit(&x).unwrap();
        assert_eq!(s.mean, vec![1.0, 1.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let x = FeatureMatrix::from_rows(&[vec![3.0, 1.0], vec![3.0, 5.0], vec![3.0, 9.0]]).unwrap();
        let s = Scaler::fit(&x).unwrap();
        let t = s.transform(&x).unwrap();
        assert!((0..3).all(|i| t.get(i, 0) == 0.0));
    }

    #[test]
    fn own_mean_maps_to_origin() {
        let x = FeatureMatrix::from_rows(&[vec![1.0, -4.0, 2.5], vec![3.0, 8.0, 0.5], vec![-2.0, 1.0, 7.0]]).unwrap();
        let s = Scaler::fit(&x).unwrap();
        let z = s.transform_row(&s.mean.clone()).unwrap();
        assert!(z.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn empty_input_is_an_error() {
        let x = FeatureMatrix::zeros(0, 3);
        assert!(matches!(Scaler::fit(&x), Err(Error::EmptyInput(_))));
    }
}
