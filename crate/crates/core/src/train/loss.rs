use std::ops::Range;

use crate::tensor::{Matrix, Scalar};

use super::TrainError;

/// Mean absolute error over every entry, with its gradient.
///
/// The subgradient at an exact tie is 0.
pub fn l1_loss<T: Scalar>(
    pred: &Matrix<T>,
    target: &Matrix<T>,
) -> Result<(f64, Matrix<T>), TrainError> {
    l1_loss_rows(pred, target, 0..pred.rows())
}

/// [`l1_loss`] restricted to `rows`; other rows get zero gradient.
pub fn l1_loss_rows<T: Scalar>(
    pred: &Matrix<T>,
    target: &Matrix<T>,
    rows: Range<usize>,
) -> Result<(f64, Matrix<T>), TrainError> {
    if pred.shape() != target.shape() {
        return Err(TrainError::Shape(format!(
            "prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    if rows.end > pred.rows() || rows.is_empty() {
        return Err(TrainError::Shape(format!(
            "loss rows {rows:?} outside 0..{}",
            pred.rows()
        )));
    }
    let cols = pred.cols();
    let count = (rows.len() * cols) as f64;
    let scale = T::from_f64(1.0 / count);
    let mut grad = Matrix::zeros(pred.rows(), cols);
    let mut sum = 0.0;
    for r in rows {
        for c in 0..cols {
            let d = pred.get(r, c) - target.get(r, c);
            sum += d.to_f64().abs();
            let g = if d > T::ZERO {
                scale
            } else if d < T::ZERO {
                -scale
            } else {
                T::ZERO
            };
            grad.set(r, c, g);
        }
    }
    Ok((sum / count, grad))
}
